//! Dataset readers: IDX image/label pairs and numeric CSV with the label in
//! the last column.

use std::fs;
use std::path::{Path, PathBuf};

use dasvdd_core::{LabeledDataset, Tensor2};
use thiserror::Error;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad IDX magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("IDX payload has {actual} bytes, header promises {expected}")]
    Truncated { expected: usize, actual: usize },
    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("line {line}: expected {expected} columns, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}, column {column}: {value:?} is not a number")]
    NonNumeric {
        line: usize,
        column: usize,
        value: String,
    },
    #[error("line {line}: label {value} is not an integer")]
    NonIntegerLabel { line: usize, value: f64 },
    #[error("line {line}: malformed CSV: {message}")]
    Malformed { line: usize, message: String },
    #[error("no data rows")]
    Empty,
    #[error(transparent)]
    Core(#[from] dasvdd_core::Error),
}

fn read(path: &Path) -> Result<Vec<u8>, DataError> {
    fs::read(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32, DataError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Truncated {
            expected: offset + 4,
            actual: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<(), DataError> {
    let found = be_u32(bytes, 0)?;
    if found != expected {
        return Err(DataError::BadMagic { expected, found });
    }
    Ok(())
}

fn check_len(bytes: &[u8], expected: usize) -> Result<(), DataError> {
    if bytes.len() != expected {
        return Err(DataError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}

/// Parses an IDX image file into one row per image, pixels scaled to [0, 1].
pub fn parse_idx_images(bytes: &[u8]) -> Result<Tensor2, DataError> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let dim = rows * cols;
    check_len(bytes, 16 + count * dim)?;
    let data = bytes[16..].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(Tensor2::from_vec(count, dim, data)?)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<i64>, DataError> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    check_len(bytes, 8 + count)?;
    Ok(bytes[8..].iter().map(|&b| i64::from(b)).collect())
}

pub fn load_idx(image_path: &Path, label_path: &Path) -> Result<LabeledDataset, DataError> {
    let features = parse_idx_images(&read(image_path)?)?;
    let labels = parse_idx_labels(&read(label_path)?)?;
    if features.rows() != labels.len() {
        return Err(DataError::CountMismatch {
            images: features.rows(),
            labels: labels.len(),
        });
    }
    let name = image_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(LabeledDataset::new(features, labels, name)?)
}

/// Comma-separated numeric rows; the last column is an integer label. A first
/// row containing any non-numeric cell is treated as a header.
pub fn parse_csv(text: &str, name: &str) -> Result<LabeledDataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut width = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| DataError::Malformed {
            line,
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Result<f64, &str>> = record
            .iter()
            .map(|c| c.parse::<f64>().map_err(|_| c))
            .collect();
        if i == 0 && parsed.iter().any(Result::is_err) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::Ragged {
                line,
                expected,
                found: record.len(),
            });
        }
        if expected < 2 {
            return Err(DataError::Ragged {
                line,
                expected: 2,
                found: expected,
            });
        }
        let mut row = Vec::with_capacity(expected);
        for (column, cell) in parsed.into_iter().enumerate() {
            let v = cell.map_err(|value| DataError::NonNumeric {
                line,
                column: column + 1,
                value: value.to_string(),
            })?;
            row.push(v);
        }
        let label = row.pop().expect("at least two columns");
        if label.fract() != 0.0 || !label.is_finite() {
            return Err(DataError::NonIntegerLabel { line, value: label });
        }
        labels.push(label as i64);
        features.extend(row);
    }
    let Some(width) = width else {
        return Err(DataError::Empty);
    };
    let features = Tensor2::from_vec(labels.len(), width - 1, features)?;
    Ok(LabeledDataset::new(features, labels, name)?)
}

pub fn load_csv(path: &Path) -> Result<LabeledDataset, DataError> {
    let bytes = read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let name = path
        .file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, &name)
}
