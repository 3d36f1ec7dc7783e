//! On-disk formats for unitary tuples.
//!
//! Binary `.utpl` layout, all integers and floats little-endian:
//!
//! ```text
//! b"UTPL"  version:u8 = 1  n:u32  N:u32  n*N*N x (re:f64, im:f64)
//! ```
//!
//! Matrices follow in tuple order, entries row-major. The JSON mirror is
//! `{"n":..,"dim":..,"matrices":[[[re,im],..],..],"label":..}` where each
//! matrix is its flat row-major entry list.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, UnitaryTuple, C64};

pub const MAGIC: &[u8; 4] = b"UTPL";
pub const VERSION: u8 = 0x01;
const HEADER_LEN: usize = 4 + 1 + 4 + 4;

/// Unitarity tolerance for tuples read from disk.
pub const LOAD_TOL: f64 = 1e-8;

pub fn encode_utpl(t: &UnitaryTuple) -> Vec<u8> {
    let dim = t.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + t.n() * dim * dim * 16);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(t.n() as u32).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for m in t.matrices() {
        for z in m.as_slice() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

/// Parses the binary format without checking unitarity.
pub fn decode_utpl(bytes: &[u8], label: &str) -> Result<UnitaryTuple> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Parse(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Parse("bad magic, expected UTPL".into()));
    }
    if bytes[4] != VERSION {
        return Err(Error::Parse(format!("unsupported version {}", bytes[4])));
    }
    let n = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    if n == 0 || dim == 0 {
        return Err(Error::Parse(format!("invalid header n={n} N={dim}")));
    }
    let expected = n
        .checked_mul(dim)
        .and_then(|x| x.checked_mul(dim))
        .and_then(|x| x.checked_mul(16))
        .and_then(|x| x.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Parse("header sizes overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Parse(format!(
            "expected {expected} bytes for n={n} N={dim}, found {}",
            bytes.len()
        )));
    }
    let mut entries = bytes[HEADER_LEN..].chunks_exact(16).map(|c| {
        C64::new(
            f64::from_le_bytes(c[..8].try_into().unwrap()),
            f64::from_le_bytes(c[8..].try_into().unwrap()),
        )
    });
    let matrices = (0..n)
        .map(|_| {
            let data: Vec<C64> = entries.by_ref().take(dim * dim).collect();
            ComplexMatrix::from_vec(dim, dim, data).map_err(|e| Error::Parse(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    UnitaryTuple::unchecked(matrices, label)
}

#[derive(Serialize, Deserialize)]
struct JsonTuple {
    n: usize,
    dim: usize,
    matrices: Vec<Vec<[f64; 2]>>,
    #[serde(default)]
    label: String,
}

pub fn encode_json(t: &UnitaryTuple) -> String {
    let doc = JsonTuple {
        n: t.n(),
        dim: t.dim(),
        matrices: t
            .matrices()
            .iter()
            .map(|m| m.as_slice().iter().map(|z| [z.re, z.im]).collect())
            .collect(),
        label: t.label().to_string(),
    };
    serde_json::to_string(&doc).expect("tuple serialization cannot fail")
}

pub fn decode_json(text: &str) -> Result<UnitaryTuple> {
    let doc: JsonTuple = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.matrices.len() != doc.n {
        return Err(Error::Parse(format!(
            "n={} but {} matrices present",
            doc.n,
            doc.matrices.len()
        )));
    }
    let matrices = doc
        .matrices
        .into_iter()
        .map(|entries| {
            let data = entries.into_iter().map(|[re, im]| C64::new(re, im)).collect();
            ComplexMatrix::from_vec(doc.dim, doc.dim, data).map_err(|e| Error::Parse(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    UnitaryTuple::unchecked(matrices, doc.label)
}

pub fn save_utpl(t: &UnitaryTuple, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_utpl(t))?;
    Ok(())
}

pub fn save_json(t: &UnitaryTuple, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_json(t))?;
    Ok(())
}

/// Reads either format (JSON when the extension is `.json` or the content
/// starts with `{`), then validates unitarity at [`LOAD_TOL`].
pub fn load_tuple(path: impl AsRef<Path>) -> Result<UnitaryTuple> {
    let path = path.as_ref();
    let bytes = fs::read(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json")
        || bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{');
    let tuple = if is_json {
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Parse(e.to_string()))?;
        decode_json(text)?
    } else {
        decode_utpl(&bytes, &path.display().to_string())?
    };
    let check = crate::linalg::check_unitary(&tuple, LOAD_TOL);
    if !check.unitary {
        return Err(Error::NotUnitary { defect: check.max_defect, tol: LOAD_TOL });
    }
    Ok(tuple)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    fn phase_tuple() -> UnitaryTuple {
        let a = ComplexMatrix::diag(&[C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -1.7)]);
        let b = ComplexMatrix::from_rows(&[vec![C64::new(0.0, 0.0), ONE], vec![ONE, C64::new(0.0, 0.0)]])
            .unwrap();
        UnitaryTuple::new(vec![a, b], "phases").unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_utpl(&phase_tuple());
        assert_eq!(&bytes[..4], b"UTPL");
        assert_eq!(bytes[4], 1);
        assert_eq!(&bytes[5..9], &2u32.to_le_bytes());
        assert_eq!(&bytes[9..13], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), 13 + 2 * 4 * 16);
        // first entry real part
        assert_eq!(&bytes[13..21], &0.3f64.cos().to_le_bytes());
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let bytes = encode_utpl(&phase_tuple());
        for cut in [0, 3, 12, bytes.len() - 1] {
            assert!(matches!(decode_utpl(&bytes[..cut], ""), Err(Error::Parse(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_utpl(&bad, ""), Err(Error::Parse(_))));
        let mut bad = bytes;
        bad[4] = 2;
        assert!(matches!(decode_utpl(&bad, ""), Err(Error::Parse(_))));
    }

    #[test]
    fn json_mirror_shape() {
        let text = encode_json(&phase_tuple());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["dim"], 2);
        assert_eq!(v["label"], "phases");
        assert_eq!(v["matrices"][1][1], serde_json::json!([1.0, 0.0]));
        assert_eq!(decode_json(&text).unwrap(), phase_tuple());
    }

    #[test]
    fn load_rejects_non_unitary() {
        let dir = tempfile::tempdir().unwrap();
        let two = ComplexMatrix::identity(2).scale(C64::new(2.0, 0.0));
        let bad = UnitaryTuple::unchecked(vec![two], "bad").unwrap();
        let path = dir.path().join("bad.utpl");
        save_utpl(&bad, &path).unwrap();
        assert!(matches!(load_tuple(&path), Err(Error::NotUnitary { .. })));
        let path = dir.path().join("bad.json");
        save_json(&bad, &path).unwrap();
        assert!(matches!(load_tuple(&path), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn load_missing_file_is_io_error() {
        let err = load_tuple("/nonexistent/definitely/missing.utpl").unwrap_err();
        assert!(matches!(err, Error::Io(_)));
        assert_eq!(err.exit_code(), 2);
    }
}
