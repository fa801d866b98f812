//! Field files.
//!
//! The native format is a NetPBM-style text header followed by a raw
//! little-endian `f64` payload, row by row along the first axis:
//!
//! ```text
//! PD
//! # L=10
//! 256 256
//! <N*N*8 bytes>
//! ```
//!
//! 8-bit binary PGM (`P5`) is written for viewing only; its values are
//! normalized to `[0, 255]` and cannot be read back losslessly.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

const MAGIC: &str = "PD";

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedInput {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes `field` in the native lossless format.
pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !field.is_finite() {
        return Err(malformed(path, "refusing to write non-finite values"));
    }
    let grid = field.grid();
    let n = grid.n();
    let mut buf = Vec::with_capacity(n * n * 8 + 64);
    write!(buf, "{MAGIC}\n# L={}\n{n} {n}\n", grid.half_width())?;
    for v in field.values().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

fn header_line(reader: &mut impl BufRead, path: &Path) -> Result<String> {
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(malformed(path, "unexpected end of header"));
    }
    Ok(line.trim_end().to_string())
}

/// Reads a field written by [`write_field`].
pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let path = path.as_ref();
    let mut reader = BufReader::new(fs::File::open(path)?);

    if header_line(&mut reader, path)? != MAGIC {
        return Err(malformed(path, "missing PD magic"));
    }
    let meta = header_line(&mut reader, path)?;
    let half_width: f64 = meta
        .strip_prefix("# L=")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| malformed(path, format!("bad metadata line {meta:?}")))?;
    let dims = header_line(&mut reader, path)?;
    let mut parts = dims.split_whitespace().map(str::parse::<usize>);
    let (rows, cols) = match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(r)), Some(Ok(c)), None) => (r, c),
        _ => return Err(malformed(path, format!("bad dimension line {dims:?}"))),
    };
    if rows != cols {
        return Err(Error::DimensionMismatch {
            expected: rows,
            rows,
            cols,
        });
    }
    let grid = Grid::new(rows, half_width)?;

    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != rows * cols * 8 {
        return Err(malformed(
            path,
            format!("payload has {} bytes, expected {}", payload.len(), rows * cols * 8),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let values = Array2::from_shape_vec((rows, cols), values).expect("length checked above");
    ScalarField::from_array(grid, values).map_err(|_| malformed(path, "non-finite values in payload"))
}

/// Maps the field linearly onto `0..=255`. A constant field maps to 0.
pub fn to_gray8(field: &ScalarField) -> Vec<u8> {
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    field
        .values()
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 0 })
        .collect()
}

/// Writes an 8-bit binary PGM for viewing.
pub fn export_pgm(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if !field.is_finite() {
        return Err(malformed(path, "refusing to export non-finite values"));
    }
    let n = field.grid().n();
    let mut buf = Vec::with_capacity(n * n + 32);
    write!(buf, "P5\n{n} {n}\n255\n")?;
    buf.extend(to_gray8(field));
    fs::write(path, buf)?;
    Ok(())
}

/// Reads an 8-bit binary PGM as a field in `[0, 1]` on `[-L, L]²`.
pub fn read_pgm(path: impl AsRef<Path>, half_width: f64) -> Result<ScalarField> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    // header tokens are whitespace separated, with '#' comments to end of line
    let mut tokens = Vec::new();
    let mut pos = 0;
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(malformed(path, "truncated PGM header"));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if tokens[0] != "P5" {
        return Err(malformed(path, "missing P5 magic"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| malformed(path, format!("bad header token {s:?}")));
    let (cols, rows, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(malformed(path, "only 8-bit PGM is supported"));
    }
    if rows != cols {
        return Err(Error::DimensionMismatch {
            expected: rows,
            rows,
            cols,
        });
    }
    let data = bytes.get(pos..pos + rows * cols).ok_or_else(|| malformed(path, "truncated PGM payload"))?;
    let grid = Grid::new(rows, half_width)?;
    let values = Array2::from_shape_fn((rows, cols), |(i, j)| data[i * cols + j] as f64 / maxval as f64);
    ScalarField::from_array(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn native_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pd");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = Grid::new(12, 2.5).unwrap();
        let f = ScalarField::from_index_fn(grid, |_, _| rng.random_range(-1e3..1e3));
        write_field(&f, &path).unwrap();
        let back = read_field(&path).unwrap();
        assert_eq!(back.grid(), grid);
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_file_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pd");
        let f = ScalarField::constant(Grid::new(4, 1.0).unwrap(), 0.5);
        write_field(&f, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_field(&path), Err(Error::MalformedInput { .. })));
        fs::write(&path, b"PD\n").unwrap();
        assert!(matches!(read_field(&path), Err(Error::MalformedInput { .. })));
    }

    #[test]
    fn non_finite_write_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut f = ScalarField::zeros(Grid::new(4, 1.0).unwrap());
        f.values_mut()[(1, 2)] = f64::NAN;
        assert!(write_field(&f, dir.path().join("x.pd")).is_err());
    }

    #[test]
    fn gray_export_spans_full_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let grid = Grid::new(8, 1.0).unwrap();
        let f = ScalarField::from_index_fn(grid, |i, j| (i * 8 + j) as f64 / 63.0);
        export_pgm(&f, &path).unwrap();
        let px = to_gray8(&f);
        assert_eq!(*px.iter().max().unwrap(), 255);
        assert_eq!(*px.iter().min().unwrap(), 0);
        let back = read_pgm(&path, 1.0).unwrap();
        assert!((back.max() - 1.0).abs() < 1e-15 && back.min() == 0.0);
    }
}
