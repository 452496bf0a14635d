use std::path::{Path, PathBuf};

use priormvs::io::read_pfm_file;
use priormvs::{Error, Grid};

use crate::failure::{Context, Failure};

/// Fraction of pixels whose stored values differ bit-wise.
pub fn changed_fraction(a: &Grid<f32>, b: &Grid<f32>) -> Result<f64, Error> {
    a.same_dims(b)?;
    let changed = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .filter(|(x, y)| x.to_bits() != y.to_bits())
        .count();
    Ok(changed as f64 / a.len().max(1) as f64)
}

/// Pairs of PFM files to compare: the two files themselves, or same-named
/// files in two directories.
fn pairs(a: &Path, b: &Path) -> Result<Vec<(PathBuf, PathBuf)>, Failure> {
    if a.is_file() {
        return Ok(vec![(a.to_path_buf(), b.to_path_buf())]);
    }
    let entries = std::fs::read_dir(a).map_err(|e| Failure::other(format!("{}: {e}", a.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Failure::other(format!("{}: {e}", a.display())))?.path();
        if path.extension().is_some_and(|e| e == "pfm") {
            names.push(path.file_name().expect("file name").to_owned());
        }
    }
    names.sort();
    Ok(names.into_iter().map(|n| (a.join(&n), b.join(&n))).collect())
}

/// Per-file and total changed-pixel fractions, one line each.
pub fn run(a: &Path, b: &Path) -> Result<String, Failure> {
    let mut out = String::new();
    let (mut changed, mut total) = (0.0, 0usize);
    for (pa, pb) in pairs(a, b)? {
        let ga = read_pfm_file(&pa).context(pa.display())?;
        let gb = read_pfm_file(&pb).context(pb.display())?;
        let f = changed_fraction(&ga, &gb).context(pa.display())?;
        changed += f * ga.len() as f64;
        total += ga.len();
        out += &format!("{} {f}\n", pa.file_name().unwrap_or_default().to_string_lossy());
    }
    if total == 0 {
        return Err(Failure::empty(format!("no PFM files in {}", a.display())));
    }
    out += &format!("total {}\n", changed / total as f64);
    Ok(out)
}
