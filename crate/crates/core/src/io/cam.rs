//! MVSNet-style camera files.
//!
//! ```text
//! extrinsic
//! r11 r12 r13 t1
//! r21 r22 r23 t2
//! r31 r32 r33 t3
//! 0 0 0 1
//!
//! intrinsic
//! fx s cx
//! 0 fy cy
//! 0 0 1
//!
//! depth_min depth_interval [depth_num [depth_max]]
//! ```
//!
//! When `depth_max` is missing it is derived as
//! `depth_min + depth_interval·(depth_num − 1)` with `depth_num` defaulting
//! to [`DEFAULT_DEPTH_NUM`]. That default silently moves `depth_max`, so cam
//! files meant for this pipeline should carry all four numbers.

use nalgebra::{Matrix3, Matrix4};

use crate::error::{Error, Result};
use crate::geometry::CameraView;

pub const DEFAULT_DEPTH_NUM: f64 = 192.0;

/// Rotations whose RᵀR deviates from I by less than this are re-orthonormalized
/// on conversion to a [`CameraView`]; text files rarely carry more digits.
pub const ORTHONORMALIZE_TOL: f64 = 1e-3;

/// Raw content of a cam file, as written.
#[derive(Debug, Clone, PartialEq)]
pub struct CamFile {
    pub extrinsic: Matrix4<f64>,
    pub intrinsic: Matrix3<f64>,
    pub depth_min: f64,
    pub depth_interval: f64,
    pub depth_num: f64,
    pub depth_max: f64,
}

impl CamFile {
    pub fn from_view(view: &CameraView, depth_num: f64) -> Self {
        let depth_interval = (view.depth_max() - view.depth_min()) / (depth_num - 1.0).max(1.0);
        Self {
            extrinsic: *view.extrinsics(),
            intrinsic: *view.intrinsics(),
            depth_min: view.depth_min(),
            depth_interval,
            depth_num,
            depth_max: view.depth_max(),
        }
    }

    /// Builds a camera for an image of the given size.
    pub fn to_view(&self, image_size: (usize, usize)) -> Result<CameraView> {
        let mut extrinsic = self.extrinsic;
        let r: Matrix3<f64> = extrinsic.fixed_view::<3, 3>(0, 0).into_owned();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > crate::geometry::ROTATION_TOL && err <= ORTHONORMALIZE_TOL {
            let svd = r.svd(true, true);
            let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
            extrinsic.fixed_view_mut::<3, 3>(0, 0).copy_from(&(u * v_t));
        }
        CameraView::new(
            self.intrinsic,
            extrinsic,
            self.depth_min,
            self.depth_max,
            image_size,
        )
    }
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line with its 1-based number.
    fn next_nonblank(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim()))
            .find(|(_, l)| !l.is_empty())
    }

    fn expect(&mut self, what: &str, last_line: usize) -> Result<(usize, &'a str)> {
        self.next_nonblank()
            .ok_or_else(|| Error::parse(last_line + 1, format!("unexpected end of file, expected {what}")))
    }
}

fn parse_floats(line_no: usize, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid number '{tok}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite number '{tok}'")));
            }
            Ok(v)
        })
        .collect()
}

fn parse_rows<const R: usize, const C: usize>(
    lines: &mut Lines<'_>,
    mut line_no: usize,
    what: &str,
) -> Result<([[f64; C]; R], usize)> {
    let mut rows = [[0.0; C]; R];
    for (r, row) in rows.iter_mut().enumerate() {
        let (n, text) = lines.expect(&format!("{what} row {}", r + 1), line_no)?;
        line_no = n;
        let vals = parse_floats(n, text)?;
        if vals.len() != C {
            return Err(Error::parse(
                n,
                format!("{what} row {} needs {C} numbers, found {}", r + 1, vals.len()),
            ));
        }
        row.copy_from_slice(&vals);
    }
    Ok((rows, line_no))
}

fn expect_header(lines: &mut Lines<'_>, header: &str, line_no: usize) -> Result<usize> {
    let (n, text) = lines.expect(&format!("'{header}'"), line_no)?;
    if text != header {
        return Err(Error::parse(n, format!("expected '{header}', found '{text}'")));
    }
    Ok(n)
}

/// Parses a cam file; see the module docs for the grammar.
pub fn parse_cam(text: &str) -> Result<CamFile> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let n = expect_header(&mut lines, "extrinsic", 0)?;
    let (e, n) = parse_rows::<4, 4>(&mut lines, n, "extrinsic")?;
    let n = expect_header(&mut lines, "intrinsic", n)?;
    let (k, n) = parse_rows::<3, 3>(&mut lines, n, "intrinsic")?;
    let (dn, depth_line) = lines.expect("depth range line", n)?;
    let d = parse_floats(dn, depth_line)?;
    if !(2..=4).contains(&d.len()) {
        return Err(Error::parse(
            dn,
            format!("depth line needs 2 to 4 numbers, found {}", d.len()),
        ));
    }
    if let Some((extra, _)) = lines.next_nonblank() {
        return Err(Error::parse(extra, "unexpected content after depth line"));
    }
    let (depth_min, depth_interval) = (d[0], d[1]);
    if depth_min <= 0.0 {
        return Err(Error::parse(dn, format!("depth_min must be positive, got {depth_min}")));
    }
    let depth_num = d.get(2).copied().unwrap_or(DEFAULT_DEPTH_NUM);
    let depth_max = match d.get(3) {
        Some(&m) => m,
        None => depth_min + depth_interval * (depth_num - 1.0),
    };
    if depth_max <= depth_min {
        return Err(Error::parse(
            dn,
            format!("depth_max {depth_max} must exceed depth_min {depth_min}"),
        ));
    }
    Ok(CamFile {
        extrinsic: Matrix4::from_fn(|r, c| e[r][c]),
        intrinsic: Matrix3::from_fn(|r, c| k[r][c]),
        depth_min,
        depth_interval,
        depth_num,
        depth_max,
    })
}

/// Serializes with shortest round-trip float formatting, all four depth numbers.
pub fn write_cam(cam: &CamFile) -> String {
    let mut s = String::from("extrinsic\n");
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| format!("{}", cam.extrinsic[(r, c)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s.push_str("\nintrinsic\n");
    for r in 0..3 {
        let row: Vec<String> = (0..3).map(|c| format!("{}", cam.intrinsic[(r, c)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s.push_str(&format!(
        "\n{} {} {} {}\n",
        cam.depth_min, cam.depth_interval, cam.depth_num, cam.depth_max
    ));
    s
}
