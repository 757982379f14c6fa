//! Denoising autoencoder trained by alternating exact least-squares solves.
//!
//! Objective over (W1, W2, Z):
//! `J = ||Y - W2 Z||^2 + lambda ||Z - phi(W1 Yhat)||^2`,
//! with clean images `Y` and corrupt images `Yhat` as N x M column matrices.

mod train;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arraystore::{read_array, write_array, DenseArray, StoreError};
use crate::image::FrontalImage;

pub use train::train;

/// Inputs to `phi^-1` are kept this far inside the open range of tanh and
/// sigmoid.
pub const CLAMP_MARGIN: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DaeError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("need at least 2 training pairs, got {0}")]
    TooFewPairs(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("objective became non-finite at sweep {sweep} ({stage}); last finite value {last}")]
    NonFinite { sweep: usize, stage: &'static str, last: f64 },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MappingFn {
    Linear,
    Tanh,
    Sigmoid,
}

impl MappingFn {
    pub const ALL: [MappingFn; 3] = [MappingFn::Linear, MappingFn::Tanh, MappingFn::Sigmoid];

    pub fn name(self) -> &'static str {
        match self {
            MappingFn::Linear => "linear",
            MappingFn::Tanh => "tanh",
            MappingFn::Sigmoid => "sigmoid",
        }
    }

    #[inline]
    pub fn forward(self, x: f64) -> f64 {
        match self {
            MappingFn::Linear => x,
            MappingFn::Tanh => x.tanh(),
            MappingFn::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Range accepted by `inverse` without clamping.
    pub fn invertible_range(self) -> (f64, f64) {
        match self {
            MappingFn::Linear => (f64::NEG_INFINITY, f64::INFINITY),
            MappingFn::Tanh => (-1.0 + CLAMP_MARGIN, 1.0 - CLAMP_MARGIN),
            MappingFn::Sigmoid => (CLAMP_MARGIN, 1.0 - CLAMP_MARGIN),
        }
    }

    /// `phi^-1(y)` after clamping `y` into the invertible range; the flag is
    /// set when clamping changed `y`.
    #[inline]
    pub fn inverse(self, y: f64) -> (f64, bool) {
        let (lo, hi) = self.invertible_range();
        let c = y.clamp(lo, hi);
        let clamped = c != y;
        let x = match self {
            MappingFn::Linear => c,
            MappingFn::Tanh => c.atanh(),
            MappingFn::Sigmoid => (c / (1.0 - c)).ln(),
        };
        (x, clamped)
    }

    pub fn apply(self, m: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            MappingFn::Linear => m.clone(),
            _ => m.map(|x| self.forward(x)),
        }
    }

    /// Element-wise inverse and the number of clamped entries.
    pub fn invert(self, m: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
        if self == MappingFn::Linear {
            return (m.clone(), 0);
        }
        let mut count = 0;
        let out = m.map(|y| {
            let (x, c) = self.inverse(y);
            count += c as usize;
            x
        });
        (out, count)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden-layer size.
    pub r: usize,
    pub lambda: f64,
    pub mapping: MappingFn,
    pub max_sweeps: usize,
    /// Stop once the relative objective change falls below this.
    pub tolerance: f64,
    /// Ridge added to each normal-equation matrix, relative to the mean of its
    /// diagonal.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::narrowband()
    }
}

impl TrainConfig {
    pub fn narrowband() -> Self {
        Self {
            r: 500,
            lambda: 1.0,
            mapping: MappingFn::Linear,
            max_sweeps: 200,
            tolerance: 1e-6,
            ridge: 1e-8,
            seed: 1,
        }
    }

    pub fn wideband() -> Self {
        Self {
            r: 1500,
            mapping: MappingFn::Sigmoid,
            ..Self::narrowband()
        }
    }

    pub fn validate(&self) -> Result<(), DaeError> {
        if self.r == 0 {
            return Err(DaeError::Config("r must be at least 1".into()));
        }
        if !(self.lambda > 0.0) {
            return Err(DaeError::Config(format!("lambda {} must be positive", self.lambda)));
        }
        if !(self.ridge >= 0.0) || !(self.tolerance >= 0.0) {
            return Err(DaeError::Config("ridge and tolerance must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DaeModel {
    /// r x N
    pub w1: DMatrix<f64>,
    /// N x r
    pub w2: DMatrix<f64>,
    pub mapping: MappingFn,
    pub lambda: f64,
    /// Objective after initialisation and after every sweep.
    pub log: Vec<f64>,
    /// Entries clamped before inversion, summed over sweeps.
    pub clamp_count: usize,
    pub converged: bool,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    mapping: MappingFn,
    r: usize,
    n: usize,
    lambda: f64,
    log: Vec<f64>,
    clamp_count: usize,
    converged: bool,
}

impl DaeModel {
    pub fn r(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n(&self) -> usize {
        self.w1.ncols()
    }

    pub fn sweeps(&self) -> usize {
        self.log.len().saturating_sub(1)
    }

    /// Write `w1.arr`, `w2.arr` and `model.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), DaeError> {
        std::fs::create_dir_all(dir).map_err(StoreError::from)?;
        write_array(&dir.join("w1.arr"), &matrix_to_array(&self.w1, "w1"))?;
        write_array(&dir.join("w2.arr"), &matrix_to_array(&self.w2, "w2"))?;
        let meta = ModelMeta {
            mapping: self.mapping,
            r: self.r(),
            n: self.n(),
            lambda: self.lambda,
            log: self.log.clone(),
            clamp_count: self.clamp_count,
            converged: self.converged,
        };
        let text = serde_json::to_vec_pretty(&meta).map_err(StoreError::from)?;
        std::fs::write(dir.join("model.json"), text).map_err(StoreError::from)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, DaeError> {
        let text = std::fs::read(dir.join("model.json")).map_err(StoreError::from)?;
        let meta: ModelMeta = serde_json::from_slice(&text).map_err(StoreError::from)?;
        let w1 = array_to_matrix(read_array(&dir.join("w1.arr"))?)?;
        let w2 = array_to_matrix(read_array(&dir.join("w2.arr"))?)?;
        if w1.shape() != (meta.r, meta.n) || w2.shape() != (meta.n, meta.r) {
            return Err(DaeError::Dimension(format!(
                "stored weights {:?} / {:?} for r={} N={}",
                w1.shape(),
                w2.shape(),
                meta.r,
                meta.n
            )));
        }
        Ok(Self {
            w1,
            w2,
            mapping: meta.mapping,
            lambda: meta.lambda,
            log: meta.log,
            clamp_count: meta.clamp_count,
            converged: meta.converged,
        })
    }
}

fn matrix_to_array(m: &DMatrix<f64>, label: &str) -> DenseArray {
    // row-major payload
    DenseArray::real(vec![m.nrows(), m.ncols()], label, m.transpose().as_slice().to_vec())
}

fn array_to_matrix(a: DenseArray) -> Result<DMatrix<f64>, DaeError> {
    if a.shape.len() != 2 {
        return Err(DaeError::Dimension(format!("weight array of shape {:?}", a.shape)));
    }
    let (r, c) = (a.shape[0], a.shape[1]);
    Ok(DMatrix::from_row_slice(r, c, &a.into_real()?))
}

/// Stack images as the columns of an N x M matrix.
pub fn images_to_matrix(images: &[FrontalImage]) -> Result<DMatrix<f64>, DaeError> {
    let first = images.first().ok_or(DaeError::TooFewPairs(0))?;
    let n = first.len();
    if let Some(i) = images.iter().position(|im| !im.same_raster(first)) {
        return Err(DaeError::Dimension(format!("image {i} raster differs from image 0")));
    }
    Ok(DMatrix::from_fn(n, images.len(), |p, j| images[j].pixels[p]))
}

fn check_cols(what: &str, m: &DMatrix<f64>, rows: usize) -> Result<(), DaeError> {
    if m.nrows() != rows {
        return Err(DaeError::Dimension(format!("{what} has {} rows, expected {rows}", m.nrows())));
    }
    Ok(())
}

/// `Z = phi(W1 Yhat)`.
pub fn encode(model: &DaeModel, yhat: &DMatrix<f64>) -> Result<DMatrix<f64>, DaeError> {
    check_cols("input", yhat, model.n())?;
    Ok(model.mapping.apply(&(&model.w1 * yhat)))
}

/// `Ytilde = W2 Z`.
pub fn decode(model: &DaeModel, z: &DMatrix<f64>) -> Result<DMatrix<f64>, DaeError> {
    check_cols("code", z, model.r())?;
    Ok(&model.w2 * z)
}

/// Solve `(G + eps I) X = B` for symmetric positive semi-definite `G`.
fn spd_solve(g: &DMatrix<f64>, eps: f64, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    let mut a = g.clone();
    for i in 0..n {
        a[(i, i)] += eps;
    }
    if eps > 0.0 {
        if let Some(ch) = a.clone().cholesky() {
            return ch.solve(b);
        }
    }
    // singular or indefinite after rounding: least squares via SVD
    let svd = a.svd(true, true);
    let tol = svd.singular_values.max() * n as f64 * f64::EPSILON;
    svd.solve(b, tol).expect("SVD with both factors")
}

/// Right solve `X (G + eps I) = A`, i.e. `X = A (G + eps I)^-1`.
fn spd_right_solve(a: &DMatrix<f64>, g: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    spd_solve(g, eps, &a.transpose()).transpose()
}

fn mean_diag_of_gram(m: &DMatrix<f64>, dim: usize) -> f64 {
    if dim == 0 {
        0.0
    } else {
        m.norm_squared() / dim as f64
    }
}

/// `W1 = argmin ||phi^-1(Z) - W1 Yhat||^2 + eps ||W1||^2` and the number of
/// clamped entries of `Z`.
///
/// Solved through the M x M Gram matrix of `Yhat`, which equals the N x N
/// normal equations by the push-through identity. With `eps = 0` this is the
/// minimum-norm least-squares solution.
pub fn solve_w1(z: &DMatrix<f64>, yhat: &DMatrix<f64>, phi: MappingFn, eps: f64) -> Result<(DMatrix<f64>, usize), DaeError> {
    if z.ncols() != yhat.ncols() {
        return Err(DaeError::Dimension(format!("Z has {} columns, Yhat {}", z.ncols(), yhat.ncols())));
    }
    let (a, clamps) = phi.invert(z);
    if eps == 0.0 {
        let svd = yhat.clone().svd(true, true);
        let tol = svd.singular_values.max() * yhat.nrows().max(yhat.ncols()) as f64 * f64::EPSILON;
        let pinv = svd.pseudo_inverse(tol).expect("SVD with both factors");
        return Ok((a * pinv, clamps));
    }
    let g = yhat.tr_mul(yhat);
    let c = spd_right_solve(&a, &g, eps);
    Ok((c * yhat.transpose(), clamps))
}

/// `W2 = Y Z^T (Z Z^T + eps I)^-1`.
pub fn solve_w2(y: &DMatrix<f64>, z: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>, DaeError> {
    if y.ncols() != z.ncols() {
        return Err(DaeError::Dimension(format!("Y has {} columns, Z {}", y.ncols(), z.ncols())));
    }
    if z.nrows() <= z.ncols() || eps == 0.0 {
        let zzt = z * z.transpose();
        Ok(spd_right_solve(&(y * z.transpose()), &zzt, eps))
    } else {
        // push-through form, M x M
        let ztz = z.tr_mul(z);
        Ok(spd_right_solve(y, &ztz, eps) * z.transpose())
    }
}

/// `Z = (W2^T W2 + lambda I)^-1 (W2^T Y + lambda phi(W1 Yhat))`.
pub fn solve_z(
    y: &DMatrix<f64>,
    yhat: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
    lambda: f64,
    phi: MappingFn,
) -> Result<DMatrix<f64>, DaeError> {
    check_cols("W2", w2, y.nrows())?;
    check_cols("Yhat", yhat, w1.ncols())?;
    if !(lambda > 0.0) {
        return Err(DaeError::Config(format!("lambda {lambda} must be positive")));
    }
    let rhs = w2.tr_mul(y) + phi.apply(&(w1 * yhat)) * lambda;
    Ok(spd_solve(&w2.tr_mul(w2), lambda, &rhs))
}

/// Value of the training objective.
pub fn objective(
    y: &DMatrix<f64>,
    yhat: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    w2: &DMatrix<f64>,
    z: &DMatrix<f64>,
    lambda: f64,
    phi: MappingFn,
) -> f64 {
    (y - w2 * z).norm_squared() + lambda * (z - phi.apply(&(w1 * yhat))).norm_squared()
}

/// Default ridge for the W1 solve: `scale` times the mean diagonal of
/// `Yhat Yhat^T`.
pub fn ridge_w1(yhat: &DMatrix<f64>, scale: f64) -> f64 {
    scale * mean_diag_of_gram(yhat, yhat.nrows())
}

/// Default ridge for the W2 solve: `scale` times the mean diagonal of
/// `Z Z^T`.
pub fn ridge_w2(z: &DMatrix<f64>, scale: f64) -> f64 {
    scale * mean_diag_of_gram(z, z.nrows())
}

/// `W2 phi(W1 yhat)` per column, clamped to be non-negative and scaled to
/// peak 1.
pub fn denoise(model: &DaeModel, yhat: &DMatrix<f64>) -> Result<DMatrix<f64>, DaeError> {
    let mut out = decode(model, &encode(model, yhat)?)?;
    for mut col in out.column_iter_mut() {
        col.iter_mut().for_each(|v| *v = v.max(0.0));
        let p = col.max();
        if p > 0.0 {
            col /= p;
        }
    }
    Ok(out)
}

/// Denoise one image; the output carries the input's axes.
pub fn denoise_image(model: &DaeModel, im: &FrontalImage) -> Result<FrontalImage, DaeError> {
    if im.len() != model.n() {
        return Err(DaeError::Dimension(format!("image has {} pixels, model expects {}", im.len(), model.n())));
    }
    let x = DVector::from_column_slice(&im.pixels);
    let mut h = &model.w1 * x;
    h.iter_mut().for_each(|v| *v = model.mapping.forward(*v));
    let mut y = &model.w2 * h;
    y.iter_mut().for_each(|v| *v = v.max(0.0));
    let p = y.max();
    if p > 0.0 {
        y /= p;
    }
    Ok(FrontalImage {
        pixels: y.as_slice().to_vec(),
        ..im.clone()
    })
}
