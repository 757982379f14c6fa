//! Carrier-frequency wall transfer functions and their realisations.

mod lattice;

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sfdtd::FieldStats;
pub use lattice::{ProbeLattice, RatioField, TransferBank};

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("window of {samples} samples is not a whole number of periods ({per_period} per period)")]
    NonIntegerWindow { samples: usize, per_period: f64 },
    #[error("window shorter than {min} periods")]
    ShortWindow { min: usize },
    #[error("transient not settled at probe {probe} ({x:.3}, {z:.3}) m: drift {drift:.4}")]
    NotSettled {
        probe: usize,
        x: f64,
        z: f64,
        drift: f64,
    },
    #[error("in-plane distance is zero")]
    ZeroDistance,
    #[error("point ({x:.3}, {z:.3}) m is outside the transfer lattice")]
    OutsideLattice { x: f64, z: f64 },
    #[error("lattice mismatch: {0}")]
    Mismatch(String),
}

/// Relative amplitude drift allowed between the two halves of the window.
pub const SETTLE_TOLERANCE: f64 = 0.02;

/// Single-frequency DFT `(2/N) sum x_j exp(-j w t_j)` over `t_j = t0 + j dt`.
pub fn phasor(series: &[f64], t0: f64, dt: f64, frequency: f64) -> Complex64 {
    let w = 2.0 * PI * frequency;
    let n = series.len() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &x) in series.iter().enumerate() {
        let t = t0 + j as f64 * dt;
        acc += x * Complex64::from_polar(1.0, -w * t);
    }
    acc * (2.0 / n)
}

/// Transfer statistics from one source to a set of field points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WallTransfer {
    pub source: (f64, f64),
    pub frequency: f64,
    pub points: Vec<(f64, f64)>,
    pub mean: Vec<Complex64>,
    pub std: Vec<f64>,
}

impl WallTransfer {
    /// Transfer of the source reflected in the plane x = 0, for a scene that
    /// is itself symmetric. The point set must be closed under the reflection.
    pub fn mirrored(&self) -> Result<WallTransfer, ChannelError> {
        let key = |x: f64, z: f64| ((x * 1e6).round() as i64, (z * 1e6).round() as i64);
        let index: HashMap<(i64, i64), usize> = self.points.iter().enumerate().map(|(i, &(x, z))| (key(x, z), i)).collect();
        let mut mean = Vec::with_capacity(self.points.len());
        let mut std = Vec::with_capacity(self.points.len());
        for &(x, z) in &self.points {
            let j = *index
                .get(&key(-x, z))
                .ok_or_else(|| ChannelError::Mismatch(format!("no mirror point for ({x}, {z})")))?;
            mean.push(self.mean[j]);
            std.push(self.std[j]);
        }
        Ok(WallTransfer {
            source: (-self.source.0, self.source.1),
            frequency: self.frequency,
            points: self.points.clone(),
            mean,
            std,
        })
    }
}

fn periods_in(samples: usize, dt: f64, frequency: f64) -> Result<usize, ChannelError> {
    let per = samples as f64 * dt * frequency;
    let whole = per.round();
    if (per - whole).abs() > 1e-6 || whole < 1.0 {
        return Err(ChannelError::NonIntegerWindow {
            samples,
            per_period: 1.0 / (dt * frequency),
        });
    }
    Ok(whole as usize)
}

/// Carrier phasors of the mean field and the deviation amplitude, normalised
/// by the source so that free space yields the 2D Green's function.
pub fn extract_transfer(fs: &FieldStats, frequency: f64) -> Result<WallTransfer, ChannelError> {
    let n = fs.n_samples;
    let periods = periods_in(n, fs.dt, frequency)?;
    if periods < 10 {
        return Err(ChannelError::ShortWindow { min: 10 });
    }
    let half = n / 2;
    let split = periods % 2 == 0;
    let omega = 2.0 * PI * frequency;
    let norm = Complex64::new(0.0, -omega * crate::consts::MU0) * Complex64::new(0.0, -fs.amplitude);
    let t0 = fs.time(0);

    let mut mean = Vec::with_capacity(fs.probes.len());
    let mut std = Vec::with_capacity(fs.probes.len());
    let mut drifts = Vec::with_capacity(fs.probes.len());
    for p in 0..fs.probes.len() {
        let e = fs.mean_series(p);
        let h = phasor(e, t0, fs.dt, frequency);
        if split {
            let a = phasor(&e[..half], t0, fs.dt, frequency);
            let b = phasor(&e[half..], fs.time(half), fs.dt, frequency);
            drifts.push(((a - b).norm(), h.norm()));
        }
        mean.push(h / norm);
        // a rectified sinusoid of amplitude s has RMS s / sqrt(2)
        let s = fs.std_series(p);
        let rms = (s.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
        std.push(2f64.sqrt() * rms / norm.norm());
    }
    let peak = drifts.iter().map(|d| d.1).fold(0.0, f64::max);
    for (p, &(d, amp)) in drifts.iter().enumerate() {
        let drift = d / amp.max(0.05 * peak).max(1e-300);
        if drift > SETTLE_TOLERANCE {
            let (x, z) = fs.probes[p];
            return Err(ChannelError::NotSettled { probe: p, x, z, drift });
        }
    }
    Ok(WallTransfer {
        source: fs.source,
        frequency,
        points: fs.probes.clone(),
        mean,
        std,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// Perturb along the mean phasor with one scalar deviate.
    #[default]
    Coherent,
    /// Independent real and imaginary perturbations.
    Iid,
}

/// One wall realisation: a complex transfer per (source, point).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub eta: usize,
    pub mode: SampleMode,
    pub values: Vec<Complex64>,
}

/// Draw one realisation from mean/std arrays laid out identically.
pub fn sample_values<R: Rng + ?Sized>(
    mean: &[Complex64],
    std: &[f64],
    rng: &mut R,
    mode: SampleMode,
) -> Vec<Complex64> {
    mean.iter()
        .zip(std)
        .map(|(&h, &s)| match mode {
            SampleMode::Coherent => {
                let g: f64 = rng.sample(StandardNormal);
                let a = h.norm();
                if a > 0.0 {
                    h * (1.0 + g * s / a)
                } else {
                    let g2: f64 = rng.sample(StandardNormal);
                    h + Complex64::new(g, g2) * (s / 2f64.sqrt())
                }
            }
            SampleMode::Iid => {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                h + Complex64::new(re, im) * (s / 2f64.sqrt())
            }
        })
        .collect()
}

pub fn sample_realization<R: Rng + ?Sized>(
    wt: &WallTransfer,
    eta: usize,
    rng: &mut R,
    mode: SampleMode,
) -> ChannelRealization {
    ChannelRealization {
        eta,
        mode,
        values: sample_values(&wt.mean, &wt.std, rng, mode),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dims {
    Two,
    Three,
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// `(-j/4) H0^(2)(k d)`.
pub fn green_2d(k: f64, d: f64) -> Complex64 {
    let x = k * d;
    let j0 = puruspe::bessel::Jn(0, x);
    let y0 = puruspe::bessel::Yn(0, x);
    Complex64::new(0.0, -0.25) * Complex64::new(j0, -y0)
}

/// `exp(-j k d) / (4 pi d)`.
pub fn green_3d(k: f64, d: f64) -> Complex64 {
    Complex64::from_polar(1.0 / (4.0 * PI * d), -k * d)
}

/// Free-space line-source (2D) or point-source (3D) transfer.
pub fn free_space_transfer(src: [f64; 3], pt: [f64; 3], k: f64, dims: Dims) -> Complex64 {
    let d = dist(src, pt);
    match dims {
        Dims::Two => green_2d(k, d),
        Dims::Three => green_3d(k, d),
    }
}

/// Factor taking a 2D propagation factor over the in-plane distance to a 3D
/// transfer over the true distance.
pub fn scale_factor(src: [f64; 3], pt: [f64; 3], k: f64) -> Result<Complex64, ChannelError> {
    let d2 = (pt[0] - src[0]).hypot(pt[2] - src[2]);
    if d2 <= 0.0 {
        return Err(ChannelError::ZeroDistance);
    }
    let d3 = dist(src, pt);
    Ok(green_3d(k, d2) / green_2d(k, d2) * (d2 / d3) * Complex64::from_polar(1.0, -k * (d3 - d2)))
}

pub fn scale_2d_to_3d(h2d: Complex64, src: [f64; 3], pt: [f64; 3], k: f64) -> Result<Complex64, ChannelError> {
    Ok(h2d * scale_factor(src, pt, k)?)
}
