use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{green_2d, sample_values, ChannelError, ChannelRealization, SampleMode, WallTransfer};
use crate::consts::C0;

/// Regular field-point lattice in the x-z plane, `k` (z) fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeLattice {
    pub x0: f64,
    pub z0: f64,
    pub step: f64,
    pub nx: usize,
    pub nz: usize,
}

impl ProbeLattice {
    /// Target zone x in [-1, 1] m, z in [1.5, 3.5] m at 2 cm.
    pub fn target_zone() -> Self {
        Self::covering((-1.0, 1.0), (1.5, 3.5), 0.02)
    }

    pub fn covering(x: (f64, f64), z: (f64, f64), step: f64) -> Self {
        Self {
            x0: x.0,
            z0: z.0,
            step,
            nx: ((x.1 - x.0) / step).round() as usize + 1,
            nz: ((z.1 - z.0) / step).round() as usize + 1,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, idx: usize) -> (f64, f64) {
        let (i, k) = (idx / self.nz, idx % self.nz);
        (self.x0 + i as f64 * self.step, self.z0 + k as f64 * self.step)
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        let tol = 1e-9;
        let fx = (x - self.x0) / self.step;
        let fz = (z - self.z0) / self.step;
        fx >= -tol && fz >= -tol && fx <= (self.nx - 1) as f64 + tol && fz <= (self.nz - 1) as f64 + tol
    }

    /// Bilinear stencil: four (index, weight) pairs.
    fn stencil(&self, x: f64, z: f64) -> Option<[(usize, f64); 4]> {
        if !self.contains(x, z) {
            return None;
        }
        let fx = ((x - self.x0) / self.step).clamp(0.0, (self.nx - 1) as f64);
        let fz = ((z - self.z0) / self.step).clamp(0.0, (self.nz - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx.saturating_sub(2));
        let k = (fz.floor() as usize).min(self.nz.saturating_sub(2));
        let (u, v) = (fx - i as f64, fz - k as f64);
        let at = |a: usize, b: usize| a * self.nz + b;
        Some([
            (at(i, k), (1.0 - u) * (1.0 - v)),
            (at(i + 1, k), u * (1.0 - v)),
            (at(i, k + 1), (1.0 - u) * v),
            (at(i + 1, k + 1), u * v),
        ])
    }
}

/// Transfers from every array source to every lattice point.
///
/// Interpolation works on the ratio to the free-space line-source field,
/// which varies slowly between lattice points even where the phasor itself
/// turns through half a cycle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferBank {
    pub lattice: ProbeLattice,
    pub frequency: f64,
    pub sources: Vec<(f64, f64)>,
    /// Source-major, `lattice.len()` per source.
    pub mean: Vec<Complex64>,
    pub std: Vec<f64>,
}

impl TransferBank {
    pub fn from_transfers(lattice: ProbeLattice, transfers: &[WallTransfer]) -> Result<Self, ChannelError> {
        let n = lattice.len();
        let mut bank = Self {
            frequency: transfers.first().map_or(0.0, |t| t.frequency),
            lattice,
            sources: Vec::with_capacity(transfers.len()),
            mean: Vec::with_capacity(n * transfers.len()),
            std: Vec::with_capacity(n * transfers.len()),
        };
        for (s, wt) in transfers.iter().enumerate() {
            if wt.points.len() != n {
                return Err(ChannelError::Mismatch(format!(
                    "source {s} has {} points, lattice has {n}",
                    wt.points.len()
                )));
            }
            for (idx, &(x, z)) in wt.points.iter().enumerate() {
                let (lx, lz) = bank.lattice.point(idx);
                if (x - lx).abs() > 1e-6 || (z - lz).abs() > 1e-6 {
                    return Err(ChannelError::Mismatch(format!(
                        "source {s} probe {idx} at ({x}, {z}) is off the lattice node ({lx}, {lz})"
                    )));
                }
            }
            if (wt.frequency - bank.frequency).abs() > 1e-6 * bank.frequency {
                return Err(ChannelError::Mismatch("mixed frequencies".into()));
            }
            bank.sources.push(wt.source);
            bank.mean.extend_from_slice(&wt.mean);
            bank.std.extend_from_slice(&wt.std);
        }
        Ok(bank)
    }

    /// Bank filled with the analytic line-source field.
    pub fn free_space(lattice: ProbeLattice, frequency: f64, sources: &[(f64, f64)]) -> Self {
        let k = 2.0 * std::f64::consts::PI * frequency / C0;
        let mut mean = Vec::with_capacity(lattice.len() * sources.len());
        for &(sx, sz) in sources {
            for (x, z) in lattice.points() {
                mean.push(green_2d(k, (x - sx).hypot(z - sz)));
            }
        }
        let std = vec![0.0; mean.len()];
        Self {
            lattice,
            frequency,
            sources: sources.to_vec(),
            mean,
            std,
        }
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.frequency / C0
    }

    pub fn sample<R: Rng + ?Sized>(&self, eta: usize, rng: &mut R, mode: SampleMode) -> ChannelRealization {
        ChannelRealization {
            eta,
            mode,
            values: sample_values(&self.mean, &self.std, rng, mode),
        }
    }

    /// The mean bank as a realisation.
    pub fn mean_realization(&self) -> ChannelRealization {
        ChannelRealization {
            eta: 0,
            mode: SampleMode::Coherent,
            values: self.mean.clone(),
        }
    }

    /// Interpolate a source-major value array at an in-plane point.
    pub fn interpolate(&self, values: &[Complex64], source: usize, x: f64, z: f64) -> Result<Complex64, ChannelError> {
        let st = self
            .lattice
            .stencil(x, z)
            .ok_or(ChannelError::OutsideLattice { x, z })?;
        let k = self.wavenumber();
        let (sx, sz) = self.sources[source];
        let base = source * self.lattice.len();
        let mut ratio = Complex64::new(0.0, 0.0);
        for (idx, w) in st {
            if w == 0.0 {
                continue;
            }
            let (px, pz) = self.lattice.point(idx);
            let g = green_2d(k, (px - sx).hypot(pz - sz));
            ratio += w * values[base + idx] / g;
        }
        Ok(ratio * green_2d(k, (x - sx).hypot(z - sz)))
    }

    /// Divide a realisation by the free-space line-source field at every node,
    /// ready for repeated interpolation.
    pub fn ratio_field(&self, values: &[Complex64]) -> Result<RatioField<'_>, ChannelError> {
        let n = self.lattice.len();
        if values.len() != n * self.sources.len() {
            return Err(ChannelError::Mismatch(format!(
                "{} values for {} sources x {n} points",
                values.len(),
                self.sources.len()
            )));
        }
        let k = self.wavenumber();
        let mut ratio = Vec::with_capacity(values.len());
        for (s, &(sx, sz)) in self.sources.iter().enumerate() {
            for idx in 0..n {
                let (px, pz) = self.lattice.point(idx);
                ratio.push(values[s * n + idx] / green_2d(k, (px - sx).hypot(pz - sz)));
            }
        }
        Ok(RatioField { bank: self, ratio })
    }

    /// Interpolated deviation amplitude, scaled like the mean.
    pub fn interpolate_std(&self, source: usize, x: f64, z: f64) -> Result<f64, ChannelError> {
        let st = self
            .lattice
            .stencil(x, z)
            .ok_or(ChannelError::OutsideLattice { x, z })?;
        let k = self.wavenumber();
        let (sx, sz) = self.sources[source];
        let base = source * self.lattice.len();
        let mut r = 0.0;
        for (idx, w) in st {
            let (px, pz) = self.lattice.point(idx);
            r += w * self.std[base + idx] / green_2d(k, (px - sx).hypot(pz - sz)).norm();
        }
        Ok(r * green_2d(k, (x - sx).hypot(z - sz)).norm())
    }
}

/// A realisation stored as its ratio to the free-space line-source field.
pub struct RatioField<'a> {
    bank: &'a TransferBank,
    ratio: Vec<Complex64>,
}

impl RatioField<'_> {
    pub fn bank(&self) -> &TransferBank {
        self.bank
    }

    /// Interpolated ratio for `source` at an in-plane point.
    pub fn ratio(&self, source: usize, x: f64, z: f64) -> Result<Complex64, ChannelError> {
        let st = self
            .bank
            .lattice
            .stencil(x, z)
            .ok_or(ChannelError::OutsideLattice { x, z })?;
        let base = source * self.bank.lattice.len();
        Ok(st.iter().map(|&(idx, w)| w * self.ratio[base + idx]).sum())
    }

    /// One-way 3D transfer from an element to a point.
    ///
    /// The element must lie over the 2D source (same x and z). Scaling the
    /// interpolated 2D field by `scale_factor` reduces to the ratio times the
    /// 3D Green's function over the true distance.
    pub fn transfer_3d(&self, source: usize, element: [f64; 3], pt: [f64; 3]) -> Result<Complex64, ChannelError> {
        let d3 = ((pt[0] - element[0]).powi(2) + (pt[1] - element[1]).powi(2) + (pt[2] - element[2]).powi(2)).sqrt();
        if d3 <= 0.0 {
            return Err(ChannelError::ZeroDistance);
        }
        Ok(self.ratio(source, pt[0], pt[2])? * super::green_3d(self.bank.wavenumber(), d3))
    }
}
