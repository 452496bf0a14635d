//! Grayscale portable float maps.
//!
//! Header `Pf`, then `W H`, then a scale whose sign selects endianness
//! (negative is little-endian), each followed by whitespace; the header ends
//! with exactly one whitespace byte. Rows are stored bottom-up.

use crate::error::{Error, Result};
use crate::raster::Grid;

/// Writes `Pf\n{W} {H}\n-1.000000\n` followed by little-endian rows, bottom first.
pub fn write_pfm(raster: &Grid<f32>) -> Vec<u8> {
    let (w, h) = raster.dims();
    let header = format!("Pf\n{w} {h}\n-1.000000\n");
    let mut out = Vec::with_capacity(header.len() + 4 * w * h);
    out.extend_from_slice(header.as_bytes());
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&raster.get(x, y).to_le_bytes());
        }
    }
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn token(&mut self, what: &str) -> Result<&'a str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("PFM header truncated, expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::Format(format!("PFM {what} is not ASCII")))
    }
}

pub fn read_pfm(bytes: &[u8]) -> Result<Grid<f32>> {
    let mut hdr = Header { bytes, pos: 0 };
    match hdr.token("magic")? {
        "Pf" => {}
        "PF" => return Err(Error::Format("unsupported: color PFM".into())),
        other => return Err(Error::Format(format!("not a PFM file (magic '{other}')"))),
    }
    let w: usize = hdr
        .token("width")?
        .parse()
        .map_err(|_| Error::Format("invalid PFM width".into()))?;
    let h: usize = hdr
        .token("height")?
        .parse()
        .map_err(|_| Error::Format("invalid PFM height".into()))?;
    let scale: f64 = hdr
        .token("scale")?
        .parse()
        .map_err(|_| Error::Format("invalid PFM scale".into()))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format(format!("invalid PFM scale {scale}")));
    }
    if hdr.pos >= bytes.len() || !bytes[hdr.pos].is_ascii_whitespace() {
        return Err(Error::Format("PFM header must end with whitespace".into()));
    }
    let data = &bytes[hdr.pos + 1..];
    let count = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format("PFM dimensions overflow".into()))?;
    if data.len() < count {
        return Err(Error::Format(format!(
            "truncated PFM payload: need {count} bytes, found {}",
            data.len()
        )));
    }
    let little = scale < 0.0;
    let mut values = vec![0.0f32; w * h];
    for (i, chunk) in data[..count].chunks_exact(4).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        let (x, file_row) = (i % w, i / w);
        values[(h - 1 - file_row) * w + x] = v;
    }
    Grid::from_vec(w, h, values)
}

pub fn read_pfm_file(path: &std::path::Path) -> Result<Grid<f32>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_pfm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn write_pfm_file(path: &std::path::Path, raster: &Grid<f32>) -> Result<()> {
    std::fs::write(path, write_pfm(raster)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pixel_layout() {
        let g = Grid::filled(1, 1, 3.5f32);
        let bytes = write_pfm(&g);
        assert_eq!(&bytes[..bytes.len() - 4], b"Pf\n1 1\n-1.000000\n");
        assert_eq!(bytes.len(), 21);
        assert_eq!(&bytes[17..], &3.5f32.to_le_bytes());
        assert_eq!(read_pfm(&bytes).unwrap(), g);
    }

    #[test]
    fn rows_stored_bottom_up() {
        // top row (1, 2), bottom row (3, 4)
        let g = Grid::from_vec(2, 2, vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let bytes = write_pfm(&g);
        let off = b"Pf\n2 2\n-1.000000\n".len();
        let at = |k: usize| f32::from_le_bytes(bytes[off + 4 * k..off + 4 * k + 4].try_into().unwrap());
        assert_eq!([at(0), at(1), at(2), at(3)], [3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn big_endian_payload() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.25f32.to_be_bytes());
        bytes.extend_from_slice(&(-7.5f32).to_be_bytes());
        let g = read_pfm(&bytes).unwrap();
        assert_eq!(g.as_slice(), &[1.25, -7.5]);
    }

    #[test]
    fn rejects_color_and_truncation() {
        let err = read_pfm(b"PF\n1 1\n-1\n\0\0\0\0\0\0\0\0\0\0\0\0").unwrap_err();
        assert!(err.to_string().contains("unsupported: color PFM"));
        assert!(read_pfm(b"Pf\n2 2\n-1\n\0\0\0\0").is_err());
        assert!(read_pfm(b"Pf\n2 2\n-1").is_err());
        assert!(read_pfm(b"P6\n2 2\n255\n").is_err());
        assert!(read_pfm(b"Pf\n2 x\n-1\n").is_err());
        assert!(read_pfm(b"Pf\n1 1\n0\n\0\0\0\0").is_err());
        assert!(read_pfm(b"").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            w in 0usize..9, h in 0usize..9, seed in proptest::collection::vec(any::<u32>(), 81)
        ) {
            let g = Grid::from_fn(w, h, |x, y| f32::from_bits(seed[y * 9 + x]));
            let back = read_pfm(&write_pfm(&g)).unwrap();
            prop_assert_eq!(back.dims(), g.dims());
            let same = back.as_slice().iter().zip(g.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }

        #[test]
        fn never_panics_on_garbage(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let _ = read_pfm(&bytes);
            let mut prefixed = b"Pf\n".to_vec();
            prefixed.extend_from_slice(&bytes);
            let _ = read_pfm(&prefixed);
        }
    }
}
