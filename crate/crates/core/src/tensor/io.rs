//! RAMX binary persistence and plain CSV loading.
//!
//! RAMX layout (all little-endian): magic `RAMX`, u32 version (= 1),
//! u64 rows, u64 cols, then `rows × cols` binary64 values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::matrix::Matrix;

pub const RAMX_MAGIC: [u8; 4] = *b"RAMX";
pub const RAMX_VERSION: u32 = 1;
const HEADER_LEN: usize = 24;

pub fn to_ramx_bytes<T: Scalar>(m: &Matrix<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data().len());
    out.extend_from_slice(&RAMX_MAGIC);
    out.extend_from_slice(&RAMX_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &v in m.data() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    out
}

pub fn from_ramx_bytes<T: Scalar>(bytes: &[u8]) -> Result<Matrix<T>> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != RAMX_MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != RAMX_VERSION {
        return Err(Error::Version(version));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN as u64))
        .ok_or_else(|| Error::dim("ramx", format!("{rows}x{cols} overflows")))?;
    if (bytes.len() as u64) < expected {
        return Err(Error::Truncated {
            expected: expected as usize,
            found: bytes.len(),
        });
    }
    if (bytes.len() as u64) > expected {
        return Err(Error::shape(
            "ramx",
            format!("{} trailing bytes", bytes.len() as u64 - expected),
        ));
    }
    let data = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Matrix::from_vec(rows as usize, cols as usize, data)
}

pub fn save_matrix<T: Scalar>(m: &Matrix<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_ramx_bytes(m))?;
    Ok(())
}

pub fn load_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    from_ramx_bytes(&fs::read(path)?)
}

/// Parses comma-separated numeric rows. A first line whose first token is not
/// a number is treated as a header and skipped.
pub fn parse_csv<T: Scalar>(text: &str) -> Result<Matrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let first = line.split(',').next().unwrap_or("").trim();
        if idx == 0 && first.parse::<f64>().is_err() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Csv {
                        line: idx + 1,
                        detail: format!("{tok:?}: {e}"),
                    })
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            line: 0,
            detail: "no data rows".into(),
        });
    }
    Matrix::from_rows(&rows)
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    parse_csv(&fs::read_to_string(path)?)
}

pub fn to_csv<T: Scalar>(m: &Matrix<T>) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m
            .row(i)
            .iter()
            .map(|v| format!("{:?}", v.as_f64()))
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrong_magic() {
        let mut b = to_ramx_bytes(&Matrix::<f64>::identity(2));
        b[0] = b'X';
        assert!(matches!(
            from_ramx_bytes::<f64>(&b),
            Err(Error::BadMagic { .. })
        ));
    }

    #[test]
    fn wrong_version() {
        let mut b = to_ramx_bytes(&Matrix::<f64>::identity(2));
        b[4] = 2;
        assert!(matches!(from_ramx_bytes::<f64>(&b), Err(Error::Version(2))));
    }

    #[test]
    fn header_claims_more_than_present() {
        let mut b = to_ramx_bytes(&Matrix::<f64>::identity(2));
        b.truncate(HEADER_LEN + 3 * 8);
        assert!(matches!(
            from_ramx_bytes::<f64>(&b),
            Err(Error::Truncated { .. })
        ));
        assert!(matches!(
            from_ramx_bytes::<f64>(&b[..10]),
            Err(Error::Truncated { .. })
        ));
    }

    #[test]
    fn non_finite_payload() {
        let mut b = to_ramx_bytes(&Matrix::<f64>::identity(2));
        b[HEADER_LEN + 8..HEADER_LEN + 16].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            from_ramx_bytes::<f64>(&b),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn exact_header_layout() {
        let m = Matrix::from_rows(&[[1.5, -2.0, 0.25]]).unwrap();
        let b = to_ramx_bytes(&m);
        assert_eq!(&b[0..4], &[0x52, 0x41, 0x4D, 0x58]);
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..16], &1u64.to_le_bytes());
        assert_eq!(&b[16..24], &3u64.to_le_bytes());
        assert_eq!(&b[24..32], &1.5f64.to_le_bytes());
        assert_eq!(b.len(), 24 + 3 * 8);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ramx");
        let m = Matrix::from_rows(&[[1.0 / 3.0, f64::MIN_POSITIVE], [-0.0, 1e300]]).unwrap();
        save_matrix(&m, &p).unwrap();
        let back: Matrix<f64> = load_matrix(&p).unwrap();
        let bits = |m: &Matrix<f64>| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn csv_with_and_without_header() {
        let a: Matrix<f64> = parse_csv("x,y\n1,2\n3.5,-4\n").unwrap();
        let b: Matrix<f64> = parse_csv("1,2\n3.5,-4\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shape(), (2, 2));
        assert!(parse_csv::<f64>("1,2\n3,abc\n").is_err());
        assert!(parse_csv::<f64>("1,2\n3\n").is_err());
        assert!(parse_csv::<f64>("1,nan\n").is_err());
        let back: Matrix<f64> = parse_csv(&to_csv(&a)).unwrap();
        assert_eq!(back, a);
    }

    proptest! {
        #[test]
        fn ramx_round_trip_is_bit_exact(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in any::<u64>(),
        ) {
            let mut s = seed;
            let data: Vec<f64> = (0..rows * cols).map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = f64::from_bits(s);
                if v.is_finite() { v } else { (s >> 11) as f64 }
            }).collect();
            let m = Matrix::from_vec(rows, cols, data).unwrap();
            let back: Matrix<f64> = from_ramx_bytes(&to_ramx_bytes(&m)).unwrap();
            let bits = |m: &Matrix<f64>| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&m));
        }
    }
}
