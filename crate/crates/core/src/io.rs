//! File formats: binary and CSV matrices, label lists, encoder manifests and
//! report CSVs. Every write goes to a temporary sibling first and is renamed
//! into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use crate::analysis::ContractionReport;
use crate::encoder::{Activation, EncoderParams};
use crate::error::{Error, Result};
use crate::spectral::ClusterLabels;
use crate::Matrix;

pub const MAGIC: &[u8; 4] = b"LSCM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

fn format_error(path: &Path, offset: u64, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

/// Write `bytes` to a temporary file next to `path`, then rename it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn encode_matrix(a: &Matrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(a.nrows())
        .map_err(|_| Error::InvalidInput(format!("{} rows exceed the format limit", a.nrows())))?;
    let cols = u32::try_from(a.ncols())
        .map_err(|_| Error::InvalidInput(format!("{} columns exceed the format limit", a.ncols())))?;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * a.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    // nalgebra storage is already column-major.
    for v in a.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(format_error(
            path,
            bytes.len() as u64,
            format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len()),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(format_error(path, 0, "bad magic, expected LSCM"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != VERSION {
        return Err(format_error(path, 4, format!("unsupported version {version}")));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| format_error(path, 8, "matrix dimensions overflow"))?;
    let actual = bytes.len() - HEADER_LEN;
    if actual != expected {
        return Err(format_error(
            path,
            HEADER_LEN as u64,
            format!("expected {expected} payload bytes for {rows}x{cols}, found {actual}"),
        ));
    }
    let data: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(DMatrix::from_vec(rows, cols, data))
}

fn is_csv(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Comma-separated values, one matrix row per line. A first line that does
/// not parse as numbers is taken as a header.
pub fn parse_csv(text: &str, path: &Path) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut offset = 0u64;
    let mut first = true;
    for line in text.split_inclusive('\n') {
        let start = offset;
        offset += line.len() as u64;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            trimmed.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(values) => {
                if let Some(width) = rows.first().map(Vec::len) {
                    if values.len() != width {
                        return Err(format_error(
                            path,
                            start,
                            format!("row has {} fields, expected {width}", values.len()),
                        ));
                    }
                }
                rows.push(values);
            }
            Err(_) if first => {}
            Err(e) => return Err(format_error(path, start, format!("bad number: {e}"))),
        }
        first = false;
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn format_csv(a: &Matrix) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Binary unless the extension is `.csv`.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    if is_csv(path) {
        parse_csv(&read_text(path)?, path)
    } else {
        decode_matrix(&read_bytes(path)?, path)
    }
}

pub fn write_matrix(path: &Path, a: &Matrix) -> Result<()> {
    if is_csv(path) {
        atomic_write(path, format_csv(a).as_bytes())
    } else {
        atomic_write(path, &encode_matrix(a)?)
    }
}

pub fn read_labels(path: &Path) -> Result<ClusterLabels> {
    let text = read_text(path)?;
    let mut labels = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let v: usize = trimmed
                .parse()
                .map_err(|e| format_error(path, offset, format!("bad label `{trimmed}`: {e}")))?;
            labels.push(v);
        }
        offset += line.len() as u64;
    }
    Ok(ClusterLabels::new(labels))
}

pub fn write_labels(path: &Path, labels: &ClusterLabels) -> Result<()> {
    let mut out = String::with_capacity(labels.len() * 2);
    for l in labels.as_slice() {
        writeln!(out, "{l}").expect("writing to a String");
    }
    atomic_write(path, out.as_bytes())
}

const MANIFEST_HEADER: &str = "leasc-encoder 1";

fn sidecar(manifest: &Path, what: &str, index: usize) -> PathBuf {
    let stem = manifest
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "encoder".into());
    manifest.with_file_name(format!("{stem}.{what}{index}.lscm"))
}

/// Text manifest plus one binary matrix file per weight and bias.
pub fn save_encoder(path: &Path, params: &EncoderParams) -> Result<()> {
    params.validate()?;
    let mut text = String::new();
    writeln!(text, "{MANIFEST_HEADER}").expect("String write");
    writeln!(text, "hidden_activation = {}", params.hidden_activation).expect("String write");
    writeln!(text, "output_activation = {}", params.output_activation).expect("String write");
    writeln!(text, "layers = {}", params.num_layers()).expect("String write");
    writeln!(text, "bias = {}", params.has_bias()).expect("String write");
    for (i, w) in params.layers.iter().enumerate() {
        let file = sidecar(path, "layer", i);
        write_matrix(&file, w)?;
        writeln!(text, "layer{i} = {}", file.file_name().expect("file").to_string_lossy())
            .expect("String write");
    }
    for (i, b) in params.biases.iter().enumerate() {
        let file = sidecar(path, "bias", i);
        write_matrix(&file, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        writeln!(text, "bias{i} = {}", file.file_name().expect("file").to_string_lossy())
            .expect("String write");
    }
    atomic_write(path, text.as_bytes())
}

pub fn load_encoder(path: &Path) -> Result<EncoderParams> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(MANIFEST_HEADER) {
        return Err(format_error(path, 0, "not an encoder manifest"));
    }
    let entries = parse_key_values(&text[text.find('\n').map_or(text.len(), |i| i + 1)..], path)?;
    let get = |key: &str| {
        entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| format_error(path, 0, format!("manifest lacks `{key}`")))
    };
    let parse_act = |key: &str| -> Result<Activation> {
        get(key)?
            .parse()
            .map_err(|_| format_error(path, 0, format!("bad activation for `{key}`")))
    };
    let hidden_activation = parse_act("hidden_activation")?;
    let output_activation = parse_act("output_activation")?;
    let count: usize = get("layers")?
        .parse()
        .map_err(|_| format_error(path, 0, "bad layer count"))?;
    let bias: bool = get("bias")?
        .parse()
        .map_err(|_| format_error(path, 0, "bad bias flag"))?;
    let resolve = |name: &str| path.with_file_name(name);
    let layers: Vec<Matrix> = (0..count)
        .map(|i| read_matrix(&resolve(get(&format!("layer{i}"))?)))
        .collect::<Result<_>>()?;
    let biases: Vec<DVector<f64>> = if bias {
        (0..count)
            .map(|i| {
                let m = read_matrix(&resolve(get(&format!("bias{i}"))?))?;
                Ok(DVector::from_column_slice(m.as_slice()))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let params = EncoderParams {
        layers,
        biases,
        hidden_activation,
        output_activation,
    };
    params.validate()?;
    Ok(params)
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_key_values(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let content = line.split('#').next().unwrap_or("").trim();
        if !content.is_empty() {
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| format_error(path, offset, format!("expected `key = value`, got `{content}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        offset += line.len() as u64;
    }
    Ok(out)
}

pub fn write_contraction_csv(path: &Path, report: &ContractionReport) -> Result<()> {
    let mut out = String::from("pair,point,representative,lhs,bound,slack,remainder,satisfied\n");
    for (i, p) in report.pairs.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            p.point, p.representative, p.lhs, p.bound, p.slack, p.remainder, p.satisfied
        )
        .expect("String write");
    }
    atomic_write(path, out.as_bytes())
}
