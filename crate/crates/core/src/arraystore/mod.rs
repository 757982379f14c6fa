//! Dense-array files, paired image datasets and experiment configuration.
//!
//! An `.arr` file is an 8-byte little-endian header length, a JSON header and
//! the raw little-endian payload in row-major order.

mod config;
mod dataset;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{ExperimentConfig, NarrowbandConfig, WidebandConfig};
pub use dataset::{
    load_dataset, read_image, save_dataset, split_dataset, split_indices, write_image, Dataset, PairLabel,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("header: {0}")]
    Json(#[from] serde_json::Error),
    #[error("shape entries all >= 1 (got {0:?})")]
    Shape(Vec<usize>),
    #[error("unsupported dtype {0}")]
    Dtype(String),
    #[error("payload holds {got} bytes, shape needs {want}")]
    Payload { got: usize, want: usize },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F64,
    C128,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F64 => 8,
            Dtype::C128 => 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    F64(Vec<f64>),
    C128(Vec<Complex64>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::F64(v) => v.len(),
            ArrayData::C128(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            ArrayData::F64(_) => Dtype::F64,
            ArrayData::C128(_) => Dtype::C128,
        }
    }
}

/// Row-major array with a label and free-form metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseArray {
    pub shape: Vec<usize>,
    pub label: String,
    pub meta: serde_json::Value,
    pub data: ArrayData,
}

impl DenseArray {
    pub fn real(shape: Vec<usize>, label: &str, data: Vec<f64>) -> Self {
        Self { shape, label: label.into(), meta: serde_json::Value::Null, data: ArrayData::F64(data) }
    }

    pub fn complex(shape: Vec<usize>, label: &str, data: Vec<Complex64>) -> Self {
        Self { shape, label: label.into(), meta: serde_json::Value::Null, data: ArrayData::C128(data) }
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = meta;
        self
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.shape.is_empty() || self.shape.iter().any(|&s| s == 0) {
            return Err(StoreError::Shape(self.shape.clone()));
        }
        let n: usize = self.shape.iter().product();
        if n != self.data.len() {
            let size = self.data.dtype().size();
            return Err(StoreError::Payload { got: self.data.len() * size, want: n * size });
        }
        Ok(())
    }

    pub fn into_real(self) -> Result<Vec<f64>, StoreError> {
        match self.data {
            ArrayData::F64(v) => Ok(v),
            ArrayData::C128(_) => Err(StoreError::Dtype("expected f64, found c128".into())),
        }
    }

    pub fn into_complex(self) -> Result<Vec<Complex64>, StoreError> {
        match self.data {
            ArrayData::C128(v) => Ok(v),
            ArrayData::F64(_) => Err(StoreError::Dtype("expected c128, found f64".into())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    dtype: String,
    shape: Vec<usize>,
    byte_order: String,
    label: String,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    meta: serde_json::Value,
}

pub fn write_array(path: &Path, array: &DenseArray) -> Result<(), StoreError> {
    array.validate()?;
    let header = Header {
        dtype: match array.data.dtype() {
            Dtype::F64 => "f64".into(),
            Dtype::C128 => "c128".into(),
        },
        shape: array.shape.clone(),
        byte_order: "little".into(),
        label: array.label.clone(),
        meta: array.meta.clone(),
    };
    let text = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(text.len() as u64).to_le_bytes())?;
    w.write_all(&text)?;
    match &array.data {
        ArrayData::F64(v) => {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        ArrayData::C128(v) => {
            for c in v {
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_array(path: &Path) -> Result<DenseArray, StoreError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 24 {
        return Err(StoreError::Invalid(format!("header length {len}")));
    }
    let mut text = vec![0u8; len];
    r.read_exact(&mut text)?;
    let header: Header = serde_json::from_slice(&text)?;
    if header.byte_order != "little" {
        return Err(StoreError::Invalid(format!("byte order {}", header.byte_order)));
    }
    let dtype = match header.dtype.as_str() {
        "f64" => Dtype::F64,
        "c128" => Dtype::C128,
        other => return Err(StoreError::Dtype(other.into())),
    };
    if header.shape.is_empty() || header.shape.iter().any(|&s| s == 0) {
        return Err(StoreError::Shape(header.shape));
    }
    let n: usize = header.shape.iter().product();
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != n * dtype.size() {
        return Err(StoreError::Payload { got: payload.len(), want: n * dtype.size() });
    }
    let word = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let data = match dtype {
        Dtype::F64 => ArrayData::F64(payload.chunks_exact(8).map(word).collect()),
        Dtype::C128 => ArrayData::C128(
            payload
                .chunks_exact(16)
                .map(|c| Complex64::new(word(&c[..8]), word(&c[8..])))
                .collect(),
        ),
    };
    Ok(DenseArray { shape: header.shape, label: header.label, meta: header.meta, data })
}

#[cfg(test)]
mod tests;
