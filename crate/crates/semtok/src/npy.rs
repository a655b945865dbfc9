//! Reader and writer for 2-D little-endian float arrays in the `.npy`
//! container (version 1.0 written, 1.0 and 2.0 read).
//!
//! Layout: `\x93NUMPY`, major/minor version bytes, header length
//! (u16 LE for 1.0, u32 LE for 2.0), an ASCII Python dict literal padded with
//! spaces and a trailing newline so that the preamble plus header is a
//! multiple of 64 bytes, then the raw element bytes in C order.

use std::fs;
use std::io::Write;
use std::path::Path;

use semtok_core::Matrix;

pub const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NpyError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes, not an .npy file")]
    BadMagic,
    #[error("unsupported format version {major}.{minor}")]
    UnsupportedVersion { major: u8, minor: u8 },
    #[error("header field `descr`: unsupported dtype {0:?} (expected '<f4' or '<f8')")]
    UnsupportedDtype(String),
    #[error("header field `fortran_order`: Fortran-ordered arrays are not supported")]
    FortranOrder,
    #[error("header field `shape`: expected a 2-D shape, got {0:?}")]
    NotTwoDimensional(Vec<usize>),
    #[error("header field `shape`: zero-sized dimension in {0:?}")]
    EmptyShape(Vec<usize>),
    #[error("header field `{field}`: {detail}")]
    MalformedHeader { field: &'static str, detail: String },
    #[error("data section holds {found} bytes, shape needs {expected}")]
    Truncated { expected: usize, found: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq)]
struct Header {
    dtype: Dtype,
    fortran_order: bool,
    shape: Vec<usize>,
}

fn header_text(dtype: Dtype, rows: usize, cols: usize) -> String {
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': ({rows}, {cols}), }}",
        dtype.descr()
    );
    // 10-byte preamble + dict + padding + '\n' is a multiple of ALIGN.
    let unpadded = 10 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    format!("{dict}{}\n", " ".repeat(pad))
}

/// Canonical byte encoding of `m` stored as `dtype`.
///
/// `F32` storage rounds each value to the nearest `f32`.
pub fn encode(m: &Matrix, dtype: Dtype) -> Vec<u8> {
    let header = header_text(dtype, m.rows(), m.cols());
    let mut out = Vec::with_capacity(10 + header.len() + m.as_slice().len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    match dtype {
        Dtype::F32 => m
            .as_slice()
            .iter()
            .for_each(|v| out.extend_from_slice(&(*v as f32).to_le_bytes())),
        Dtype::F64 => m
            .as_slice()
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

pub fn write_array(m: &Matrix, dtype: Dtype, path: impl AsRef<Path>) -> Result<(), NpyError> {
    // Matrix construction already guarantees finite values; f32 storage
    // can still overflow.
    if dtype == Dtype::F32 {
        if let Some(i) = m.as_slice().iter().position(|v| !(*v as f32).is_finite()) {
            return Err(NpyError::NonFinite {
                row: i / m.cols().max(1),
                col: i % m.cols().max(1),
            });
        }
    }
    let bytes = encode(m, dtype);
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_array(path: impl AsRef<Path>) -> Result<Matrix, NpyError> {
    decode(&fs::read(path)?).map(|(m, _)| m)
}

/// Reads an array and also reports the stored element type.
pub fn read_array_with_dtype(path: impl AsRef<Path>) -> Result<(Matrix, Dtype), NpyError> {
    decode(&fs::read(path)?)
}

pub fn decode(bytes: &[u8]) -> Result<(Matrix, Dtype), NpyError> {
    if bytes.len() < 8 || &bytes[..6] != MAGIC {
        return Err(NpyError::BadMagic);
    }
    let (major, minor) = (bytes[6], bytes[7]);
    let (header_len, start) = match (major, minor) {
        (1, 0) if bytes.len() >= 10 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        (2, 0) if bytes.len() >= 12 => (
            u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
            12,
        ),
        (1, 0) | (2, 0) => {
            return Err(NpyError::Truncated {
                expected: 12,
                found: bytes.len(),
            })
        }
        _ => return Err(NpyError::UnsupportedVersion { major, minor }),
    };
    let data_start = start + header_len;
    if bytes.len() < data_start {
        return Err(NpyError::Truncated {
            expected: data_start,
            found: bytes.len(),
        });
    }
    let text = std::str::from_utf8(&bytes[start..data_start]).map_err(|_| NpyError::MalformedHeader {
        field: "header",
        detail: "not ASCII".into(),
    })?;
    let header = parse_header(text)?;
    if header.fortran_order {
        return Err(NpyError::FortranOrder);
    }
    let &[rows, cols] = header.shape.as_slice() else {
        return Err(NpyError::NotTwoDimensional(header.shape));
    };
    if rows == 0 || cols == 0 {
        return Err(NpyError::EmptyShape(header.shape));
    }
    let count = rows.checked_mul(cols).ok_or_else(|| NpyError::MalformedHeader {
        field: "shape",
        detail: "element count overflows".into(),
    })?;
    let data = &bytes[data_start..];
    let expected = count * header.dtype.size();
    if data.len() != expected {
        return Err(NpyError::Truncated {
            expected,
            found: data.len(),
        });
    }
    let values: Vec<f64> = match header.dtype {
        Dtype::F32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        Dtype::F64 => data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    };
    let m = Matrix::new(rows, cols, values).map_err(|e| match e {
        semtok_core::Error::NonFinite { row, col } => NpyError::NonFinite { row, col },
        other => NpyError::MalformedHeader {
            field: "shape",
            detail: other.to_string(),
        },
    })?;
    Ok((m, header.dtype))
}

fn malformed(field: &'static str, detail: impl Into<String>) -> NpyError {
    NpyError::MalformedHeader {
        field,
        detail: detail.into(),
    }
}

/// Minimal parser for the dict literal numpy writes:
/// `{'descr': '<f4', 'fortran_order': False, 'shape': (3, 5), }`.
fn parse_header(text: &str) -> Result<Header, NpyError> {
    let body = text
        .trim()
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| malformed("header", "not a dict literal"))?;

    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    let mut rest = body.trim_start();
    while !rest.is_empty() {
        let (key, after) =
            parse_quoted(rest).ok_or_else(|| malformed("header", format!("expected a quoted key at {rest:?}")))?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| malformed("header", format!("missing ':' after key {key:?}")))?
            .trim_start();
        rest = match key {
            "descr" => {
                let (v, r) = parse_quoted(after).ok_or_else(|| malformed("descr", "expected a quoted string"))?;
                descr = Some(v.to_string());
                r
            }
            "fortran_order" => {
                if let Some(r) = after.strip_prefix("False") {
                    fortran = Some(false);
                    r
                } else if let Some(r) = after.strip_prefix("True") {
                    fortran = Some(true);
                    r
                } else {
                    return Err(malformed("fortran_order", "expected True or False"));
                }
            }
            "shape" => {
                let inner = after
                    .strip_prefix('(')
                    .ok_or_else(|| malformed("shape", "expected a tuple"))?;
                let close = inner
                    .find(')')
                    .ok_or_else(|| malformed("shape", "unterminated tuple"))?;
                let dims = inner[..close]
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.trim_end_matches('L').parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| malformed("shape", e.to_string()))?;
                shape = Some(dims);
                &inner[close + 1..]
            }
            other => return Err(malformed("header", format!("unexpected key {other:?}"))),
        };
        rest = rest.trim_start();
        rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
    }

    let descr = descr.ok_or_else(|| malformed("descr", "missing"))?;
    let dtype = match descr.as_str() {
        "<f4" => Dtype::F32,
        "<f8" => Dtype::F64,
        _ => return Err(NpyError::UnsupportedDtype(descr)),
    };
    Ok(Header {
        dtype,
        fortran_order: fortran.ok_or_else(|| malformed("fortran_order", "missing"))?,
        shape: shape.ok_or_else(|| malformed("shape", "missing"))?,
    })
}

fn parse_quoted(s: &str) -> Option<(&str, &str)> {
    let q = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let body = &s[1..];
    let end = body.find(q)?;
    Some((&body[..end], &body[end + 1..]))
}
