use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_array, write_array, DenseArray, StoreError};
use crate::image::FrontalImage;

/// Scene metadata shared by a clean/corrupt pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairLabel {
    pub wall: String,
    pub aspect_deg: f64,
    pub frame: usize,
    /// Channel realisation index.
    pub eta: usize,
}

/// Paired free-space (clean) and through-wall (corrupt) images.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub clean: Vec<FrontalImage>,
    pub corrupt: Vec<FrontalImage>,
    pub labels: Vec<PairLabel>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.clean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clean.is_empty()
    }

    pub fn push(&mut self, clean: FrontalImage, corrupt: FrontalImage, label: PairLabel) {
        self.clean.push(clean);
        self.corrupt.push(corrupt);
        self.labels.push(label);
    }

    /// Pairs with the given indices, in order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            clean: idx.iter().map(|&i| self.clean[i].clone()).collect(),
            corrupt: idx.iter().map(|&i| self.corrupt[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Concatenate datasets.
    pub fn concat(parts: &[&Dataset]) -> Self {
        let mut out = Dataset::default();
        for p in parts {
            out.clean.extend_from_slice(&p.clean);
            out.corrupt.extend_from_slice(&p.corrupt);
            out.labels.extend_from_slice(&p.labels);
        }
        out
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if self.clean.len() != self.corrupt.len() || self.clean.len() != self.labels.len() {
            return Err(StoreError::Invalid(format!(
                "{} clean, {} corrupt, {} labels",
                self.clean.len(),
                self.corrupt.len(),
                self.labels.len()
            )));
        }
        if let Some(first) = self.clean.first() {
            let bad = self
                .clean
                .iter()
                .chain(&self.corrupt)
                .position(|im| !im.same_raster(first));
            if let Some(i) = bad {
                return Err(StoreError::Invalid(format!("image {i} raster differs from {:?}", first.dims())));
            }
        }
        Ok(())
    }
}

/// Train/test index partition of `m` pairs.
///
/// The train size is `round(fraction * m)`, kept within `1..m` so that both
/// sides are non-empty.
pub fn split_indices(m: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), StoreError> {
    if m < 2 {
        return Err(StoreError::Invalid(format!("need at least 2 pairs to split, got {m}")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(StoreError::Invalid(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * m as f64).round() as usize).clamp(1, m - 1);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn split_dataset(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset), StoreError> {
    ds.validate()?;
    let (train, test) = split_indices(ds.len(), fraction, seed)?;
    Ok((ds.select(&train), ds.select(&test)))
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    clean: PathBuf,
    corrupt: PathBuf,
    label: PairLabel,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    n_az: usize,
    n_el: usize,
    pairs: Vec<ManifestEntry>,
}

pub(crate) fn image_to_array(im: &FrontalImage, label: &str) -> DenseArray {
    DenseArray::real(vec![im.n_az, im.n_el], label, im.pixels.clone())
        .with_meta(serde_json::json!({ "az_deg": im.az_deg, "el_deg": im.el_deg }))
}

pub(crate) fn array_to_image(a: DenseArray) -> Result<FrontalImage, StoreError> {
    if a.shape.len() != 2 {
        return Err(StoreError::Invalid(format!("image array of shape {:?}", a.shape)));
    }
    let (n_az, n_el) = (a.shape[0], a.shape[1]);
    let axis = |key: &str, n: usize| -> Result<Vec<f64>, StoreError> {
        match a.meta.get(key) {
            Some(v) => Ok(serde_json::from_value(v.clone())?),
            None => Ok((0..n).map(|i| i as f64).collect()),
        }
    };
    let az = axis("az_deg", n_az)?;
    let el = axis("el_deg", n_el)?;
    let pixels = a.into_real()?;
    FrontalImage::new(n_az, n_el, pixels, az, el).map_err(|e| StoreError::Invalid(e.to_string()))
}

pub fn write_image(path: &Path, im: &FrontalImage) -> Result<(), StoreError> {
    write_array(path, &image_to_array(im, "frontal_image"))
}

pub fn read_image(path: &Path) -> Result<FrontalImage, StoreError> {
    array_to_image(read_array(path)?)
}

/// Write every pair as two `.arr` files plus `manifest.json` in `dir`.
pub fn save_dataset(dir: &Path, ds: &Dataset) -> Result<(), StoreError> {
    ds.validate()?;
    fs::create_dir_all(dir)?;
    let (n_az, n_el) = ds.clean.first().map_or((0, 0), |im| im.dims());
    let mut pairs = Vec::with_capacity(ds.len());
    for i in 0..ds.len() {
        let clean = PathBuf::from(format!("{i:05}_clean.arr"));
        let corrupt = PathBuf::from(format!("{i:05}_corrupt.arr"));
        write_image(&dir.join(&clean), &ds.clean[i])?;
        write_image(&dir.join(&corrupt), &ds.corrupt[i])?;
        pairs.push(ManifestEntry { clean, corrupt, label: ds.labels[i].clone() });
    }
    let manifest = Manifest { n_az, n_el, pairs };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset, StoreError> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let mut ds = Dataset::default();
    for e in manifest.pairs {
        ds.push(read_image(&dir.join(&e.clean))?, read_image(&dir.join(&e.corrupt))?, e.label);
    }
    ds.validate()?;
    Ok(ds)
}
