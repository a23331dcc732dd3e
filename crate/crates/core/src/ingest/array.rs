// SPDX-License-Identifier: MIT OR Apache-2.0

//! Numeric array files: NPY (v1.x/v2.x, little-endian f4/f8, C order) and
//! plain comma-separated text.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

const NPY_MAGIC: &[u8] = b"\x93NUMPY";

/// On-disk encoding of a channel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrayFormat {
    Npy,
    Csv,
}

impl ArrayFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ArrayFormat::Npy => "npy",
            ArrayFormat::Csv => "csv",
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "npy" => Some(ArrayFormat::Npy),
            "csv" => Some(ArrayFormat::Csv),
            _ => None,
        }
    }
}

/// Reads a matrix from `path`, dispatching on the file extension.
pub fn read_array(path: &Path) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    match ArrayFormat::from_path(path) {
        Some(ArrayFormat::Npy) => parse_npy(&bytes).map_err(|(offset, message)| Error::ArrayParse {
            path: path.to_path_buf(),
            offset,
            message,
        }),
        Some(ArrayFormat::Csv) => parse_csv(&bytes).map_err(|(offset, message)| Error::ArrayParse {
            path: path.to_path_buf(),
            offset,
            message,
        }),
        None => Err(Error::invalid(format!(
            "unsupported array file extension: {}",
            path.display()
        ))),
    }
}

pub fn write_array(path: &Path, data: &Array2<f64>, format: ArrayFormat) -> Result<()> {
    let bytes = match format {
        ArrayFormat::Npy => encode_npy(data),
        ArrayFormat::Csv => encode_csv(data).into_bytes(),
    };
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

type ParseResult<T> = std::result::Result<T, (usize, String)>;

#[derive(Debug, Clone, Copy)]
enum Dtype {
    F4,
    F8,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F4 => 4,
            Dtype::F8 => 8,
        }
    }
}

/// Decodes an NPY payload. Errors carry the byte offset of the problem.
pub fn parse_npy(bytes: &[u8]) -> ParseResult<Array2<f64>> {
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err((0, "missing NPY magic string".into()));
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err((8, "truncated header length".into()));
            }
            (
                u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]) as usize,
                12,
            )
        }
        v => return Err((6, format!("unsupported NPY version {v}"))),
    };
    let data_start = header_start + header_len;
    if bytes.len() < data_start {
        return Err((header_start, "header extends past end of file".into()));
    }
    let header = std::str::from_utf8(&bytes[header_start..data_start])
        .map_err(|e| (header_start + e.valid_up_to(), "header is not valid text".to_string()))?;

    let descr = dict_value(header, "descr").ok_or((header_start, "header lacks 'descr'".to_string()))?;
    let dtype = match descr.1.trim_matches(|c| c == '\'' || c == '"') {
        "<f8" | "float64" => Dtype::F8,
        "<f4" | "float32" => Dtype::F4,
        other => {
            return Err((
                header_start + descr.0,
                format!("unsupported dtype {other}; expected little-endian float32/float64"),
            ))
        }
    };
    let fortran =
        dict_value(header, "fortran_order").ok_or((header_start, "header lacks 'fortran_order'".to_string()))?;
    if fortran.1.trim() != "False" {
        return Err((header_start + fortran.0, "only C-order arrays are supported".into()));
    }
    let shape_field = dict_value(header, "shape").ok_or((header_start, "header lacks 'shape'".to_string()))?;
    let shape = parse_shape(shape_field.1).map_err(|m| (header_start + shape_field.0, m))?;
    let (rows, cols) = match shape.as_slice() {
        [n] => (*n, 1),
        [n, d] => (*n, *d),
        _ => {
            return Err((
                header_start + shape_field.0,
                format!("expected 1-D or 2-D array, got shape {shape:?}"),
            ))
        }
    };

    let count = rows * cols;
    let needed = count * dtype.size();
    let payload = &bytes[data_start..];
    if payload.len() < needed {
        return Err((
            data_start + payload.len(),
            format!("payload truncated: need {needed} bytes, found {}", payload.len()),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for i in 0..count {
        let at = i * dtype.size();
        let v = match dtype {
            Dtype::F8 => f64::from_le_bytes(payload[at..at + 8].try_into().unwrap()),
            Dtype::F4 => f32::from_le_bytes(payload[at..at + 4].try_into().unwrap()) as f64,
        };
        if !v.is_finite() {
            return Err((data_start + at, format!("non-finite value {v}")));
        }
        values.push(v);
    }
    Array2::from_shape_vec((rows, cols), values).map_err(|e| (data_start, e.to_string()))
}

/// Finds `'key': value` in a Python dict literal; returns (offset of value, value text).
fn dict_value<'a>(header: &'a str, key: &str) -> Option<(usize, &'a str)> {
    let pat_single = format!("'{key}'");
    let pat_double = format!("\"{key}\"");
    let key_at = header.find(&pat_single).or_else(|| header.find(&pat_double))?;
    let after_key = key_at + key.len() + 2;
    let colon = header[after_key..].find(':')? + after_key + 1;
    let rest = &header[colon..];
    let lead = rest.len() - rest.trim_start().len();
    let start = colon + lead;
    let body = &header[start..];
    let end = if body.starts_with('(') {
        body.find(')')? + 1
    } else {
        body.find([',', '}']).unwrap_or(body.len())
    };
    Some((start, &header[start..start + end]))
}

fn parse_shape(text: &str) -> std::result::Result<Vec<usize>, String> {
    let inner = text
        .trim()
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| format!("malformed shape {text}"))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| format!("malformed shape dimension {s:?}"))
        })
        .collect()
}

/// Encodes a matrix as NPY v1.0, `<f8`, C order.
pub fn encode_npy(data: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = data.dim();
    let mut header = format!("{{'descr': '<f8', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    // magic(6) + version(2) + len(2) + header + '\n' must be a multiple of 64
    let unpadded = 10 + header.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    header.extend(std::iter::repeat_n(' ', pad));
    header.push('\n');

    let mut out = Vec::with_capacity(10 + header.len() + rows * cols * 8);
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u16).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in data.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Parses comma-separated rows of numbers. Blank lines are skipped; every
/// other line must have the same number of fields.
pub fn parse_csv(bytes: &[u8]) -> ParseResult<Array2<f64>> {
    let text = std::str::from_utf8(bytes).map_err(|e| (e.valid_up_to(), "file is not valid UTF-8".to_string()))?;
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;
    let mut line_start = 0usize;
    for line in text.split_inclusive('\n') {
        let offset = line_start;
        line_start += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        if content.trim().is_empty() {
            continue;
        }
        let mut field_start = offset;
        let mut n = 0usize;
        for field in content.split(',') {
            let trimmed = field.trim();
            let lead = field.len() - field.trim_start().len();
            let v: f64 = trimmed
                .parse()
                .map_err(|_| (field_start + lead, format!("not a number: {trimmed:?}")))?;
            if !v.is_finite() {
                return Err((field_start + lead, format!("non-finite value {trimmed}")));
            }
            values.push(v);
            n += 1;
            field_start += field.len() + 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err((offset, format!("row has {n} fields, expected {c}")));
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Array2::from_shape_vec((rows, cols), values).map_err(|e| (0, e.to_string()))
}

pub fn encode_csv(data: &Array2<f64>) -> String {
    let mut out = String::new();
    for row in data.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
