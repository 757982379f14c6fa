//! Two-dimensional stochastic FDTD for an out-of-plane electric field.

mod engine;
mod grid;
mod wall;

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::{C0, MU0};
pub use engine::{mean_spatial_dispersion, numerical_wavenumber_ratio};
pub use grid::Grid2D;
pub use wall::{build_wall, WallKind, WallSpec};

/// Carrier frequency of the narrowband experiments.
pub const CARRIER_HZ: f64 = 7.5e9;

#[derive(Debug, Error)]
pub enum FdtdError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("wall x {x:?}, z {z:?} lies outside the grid")]
    WallOutsideGrid { x: (f64, f64), z: (f64, f64) },
    #[error("rod pitch {pitch} m is below two cells of {cell} m")]
    RodSpacing { pitch: f64, cell: f64 },
    #[error("time step {dt:e} s exceeds the stability limit {limit:e} s")]
    Courant { dt: f64, limit: f64 },
    #[error("PML of {cells} cells is thinner than the 10-cell minimum")]
    PmlTooThin { cells: usize },
    #[error("position ({x}, {z}) m is outside the grid")]
    OutsideGrid { x: f64, z: f64 },
    #[error("source at z = {z} m must sit below the wall")]
    SourcePlacement { z: f64 },
    #[error("{n_periods} periods cannot hold a {window}-period window after the ramp")]
    TooShort { n_periods: usize, window: usize },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("Monte-Carlo needs at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("unstable: |E| = {field:e} at step {step}, node ({x:.4}, {z:.4}) m")]
    Unstable {
        step: usize,
        field: f64,
        x: f64,
        z: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// Compact Yee differences.
    Second,
    /// Staggered fourth-order differences, compact next to the outer boundary.
    Fourth,
}

/// CW line source with a raised-cosine ramp.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub x: f64,
    pub z: f64,
    pub frequency: f64,
    pub amplitude: f64,
    pub ramp_periods: f64,
}

impl SourceSpec {
    pub fn carrier(x: f64, z: f64) -> Self {
        Self {
            x,
            z,
            frequency: CARRIER_HZ,
            amplitude: 1.0,
            ramp_periods: 5.0,
        }
    }

    pub fn current(&self, t: f64) -> f64 {
        let omega = 2.0 * PI * self.frequency;
        let t_ramp = self.ramp_periods / self.frequency;
        let ramp = if t <= 0.0 {
            0.0
        } else if t >= t_ramp {
            1.0
        } else {
            0.5 * (1.0 - (PI * t / t_ramp).cos())
        };
        self.amplitude * ramp * (omega * t).sin()
    }

    /// Field phasor produced per unit 2D Green's function.
    pub fn norm(&self) -> num_complex::Complex64 {
        engine::source_norm(self)
    }

    pub fn wavelength(&self) -> f64 {
        C0 / self.frequency
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdtdSettings {
    pub stencil: Stencil,
    pub steps_per_period: usize,
    pub pml_cells: usize,
    pub pml_order: f64,
    /// Normal-incidence reflection target of the PML.
    pub pml_reflection: f64,
    /// Complex-frequency shift as a fraction of the carrier angular frequency.
    pub pml_alpha: f64,
    /// Periods at the end of the run that are recorded.
    pub window_periods: usize,
    /// Correlation between the permittivity and conductivity perturbations
    /// of one cell. Different cells are independent.
    pub rho_corr: f64,
    /// Random-sign tangent fields used to estimate the deviation field.
    pub tangent_count: usize,
    pub tangent_seed: u64,
    /// Rescale the time constant to cancel the angle-averaged spatial
    /// dispersion at the carrier.
    pub dispersion_compensation: bool,
    /// Abort once |E| exceeds this multiple of the source field scale.
    pub instability_factor: f64,
}

impl Default for FdtdSettings {
    fn default() -> Self {
        Self {
            stencil: Stencil::Fourth,
            steps_per_period: 28,
            pml_cells: 16,
            pml_order: 3.0,
            pml_reflection: 1e-5,
            pml_alpha: 0.05,
            window_periods: 10,
            rho_corr: 1.0,
            tangent_count: 4,
            tangent_seed: 0x5eed,
            dispersion_compensation: true,
            instability_factor: 1e6,
        }
    }
}

impl FdtdSettings {
    /// Plain Yee scheme, no compensation.
    pub fn yee() -> Self {
        Self {
            stencil: Stencil::Second,
            steps_per_period: 20,
            dispersion_compensation: false,
            ..Self::default()
        }
    }
}

/// Probe time series of the mean and standard-deviation fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldStats {
    /// Snapped probe positions (x, z).
    pub probes: Vec<(f64, f64)>,
    /// Snapped source position.
    pub source: (f64, f64),
    pub frequency: f64,
    pub amplitude: f64,
    pub dt: f64,
    /// Step index of the first sample; sample `j` is at `(first_step + j) * dt`.
    pub first_step: usize,
    pub steps_per_period: usize,
    pub n_samples: usize,
    /// Probe-major, `n_samples` per probe.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FieldStats {
    pub fn mean_series(&self, p: usize) -> &[f64] {
        &self.mean[p * self.n_samples..(p + 1) * self.n_samples]
    }

    pub fn std_series(&self, p: usize) -> &[f64] {
        &self.std[p * self.n_samples..(p + 1) * self.n_samples]
    }

    pub fn time(&self, j: usize) -> f64 {
        (self.first_step + j) as f64 * self.dt
    }
}

/// Source-to-probe run length (periods) that lets the slowest path through
/// the grid settle, plus the recording window.
pub fn recommended_periods(
    grid: &Grid2D,
    src: &SourceSpec,
    probes: &[(f64, f64)],
    settings: &FdtdSettings,
) -> usize {
    let lambda = src.wavelength();
    let far = probes
        .iter()
        .map(|&(x, z)| (x - src.x).hypot(z - src.z))
        .fold(0.0, f64::max);
    // optical excess and internal round trip of the thickest dielectric column
    let (mut excess, mut inner) = (0.0f64, 0.0f64);
    for i in 0..grid.nx {
        let (mut e, mut n) = (0.0, 0.0);
        for k in 0..grid.nz {
            let er = grid.eps_r[grid.index(i, k)];
            if er > 1.0 {
                e += (er.sqrt() - 1.0) * grid.cell;
                n += er.sqrt() * grid.cell;
            }
        }
        excess = excess.max(e);
        inner = inner.max(n);
    }
    let settle = (far + excess + 4.0 * inner) / lambda;
    (src.ramp_periods + settle).ceil() as usize + settings.window_periods + 10
}

struct Plan {
    src_idx: usize,
    source: (f64, f64),
    probe_idx: Vec<usize>,
    probes: Vec<(f64, f64)>,
    total_steps: usize,
    first_step: usize,
}

fn plan(
    grid: &Grid2D,
    src: &SourceSpec,
    n_periods: usize,
    probes: &[(f64, f64)],
    settings: &FdtdSettings,
) -> Result<Plan, FdtdError> {
    grid.validate()?;
    if !(-1.0..=1.0).contains(&settings.rho_corr) {
        return Err(FdtdError::InvalidSettings(format!("rho_corr {} outside [-1, 1]", settings.rho_corr)));
    }
    if settings.tangent_count == 0 && grid.has_variance() {
        return Err(FdtdError::InvalidSettings("tangent_count must be positive".into()));
    }
    if settings.pml_cells < 10 {
        return Err(FdtdError::PmlTooThin {
            cells: settings.pml_cells,
        });
    }
    let lambda_min = src.wavelength();
    // 4 mm at 7.5 GHz is a hair above a tenth of a wavelength; allow 1 %
    if grid.cell > lambda_min / 10.0 * 1.01 {
        return Err(FdtdError::InvalidGrid(format!(
            "cell {} m is coarser than a tenth of the {} m wavelength",
            grid.cell, lambda_min
        )));
    }
    let first_wall_z = (0..grid.nz)
        .find(|&k| (0..grid.nx).any(|i| grid.eps_r[grid.index(i, k)] > 1.0 || grid.pec[grid.index(i, k)]))
        .map(|k| grid.z(k));
    if let Some(zw) = first_wall_z {
        if src.z >= zw {
            return Err(FdtdError::SourcePlacement { z: src.z });
        }
    }
    let snap = |x: f64, z: f64| -> Result<(usize, (f64, f64)), FdtdError> {
        let (i, k) = grid.nearest_node(x, z).ok_or(FdtdError::OutsideGrid { x, z })?;
        let p = settings.pml_cells;
        let idx = (i + p) * (grid.nz + 2 * p) + (k + p);
        Ok((idx, (grid.x(i), grid.z(k))))
    };
    let (src_idx, source) = snap(src.x, src.z)?;
    let mut probe_idx = Vec::with_capacity(probes.len());
    let mut snapped = Vec::with_capacity(probes.len());
    for &(x, z) in probes {
        let (i, p) = snap(x, z)?;
        probe_idx.push(i);
        snapped.push(p);
    }
    let spp = settings.steps_per_period;
    let window = settings.window_periods;
    if n_periods < window + src.ramp_periods.ceil() as usize || window == 0 {
        return Err(FdtdError::TooShort { n_periods, window });
    }
    let total_steps = n_periods * spp;
    Ok(Plan {
        src_idx,
        source,
        probe_idx,
        probes: snapped,
        total_steps,
        first_step: total_steps - window * spp + 1,
    })
}

struct Recording {
    mean: Vec<f64>,
    std: Vec<f64>,
    dt: f64,
}

fn simulate(
    grid: &Grid2D,
    materials: Option<(&[f64], &[f64])>,
    src: &SourceSpec,
    plan: &Plan,
    settings: &FdtdSettings,
    stochastic: bool,
) -> Result<Recording, FdtdError> {
    let mut sim = engine::Simulation::<f32>::new(grid, src, settings, materials, stochastic)?;
    let dt = sim.dt;
    let n_samples = plan.total_steps + 1 - plan.first_step;
    let n_probes = plan.probe_idx.len();
    let mut mean = vec![0.0; n_probes * n_samples];
    let mut std = vec![0.0; n_probes * n_samples];
    let limit = settings.instability_factor * 2.0 * PI * src.frequency * MU0 * src.amplitude.abs().max(1e-300);
    let spp = settings.steps_per_period;
    for n in 0..plan.total_steps {
        let current = src.current((n as f64 + 0.5) * dt);
        sim.step(plan.src_idx, current);
        let step = n + 1;
        if step % spp == 0 || step == plan.total_steps {
            let peak = sim.max_abs_e();
            if !(peak <= limit) {
                let (idx, _) = (0..sim.mean.e.len()).map(|i| (i, sim.e_at(i).abs())).fold((0, 0.0f64), |(bi, bv), (i, v)| {
                    if v > bv || v.is_nan() {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                });
                let (it, kt) = (idx / sim.nzt, idx % sim.nzt);
                return Err(FdtdError::Unstable {
                    step,
                    field: peak,
                    x: grid.x_min + (it as f64 - sim.pad as f64) * grid.cell,
                    z: grid.z_min + (kt as f64 - sim.pad as f64) * grid.cell,
                });
            }
        }
        if step >= plan.first_step {
            let j = step - plan.first_step;
            for (p, &idx) in plan.probe_idx.iter().enumerate() {
                mean[p * n_samples + j] = sim.e_at(idx);
                if sim.has_stochastic() {
                    std[p * n_samples + j] = sim.sigma_e(idx);
                }
            }
        }
    }
    Ok(Recording { mean, std, dt })
}

fn stats(plan: &Plan, src: &SourceSpec, settings: &FdtdSettings, rec: Recording) -> FieldStats {
    let n_samples = plan.total_steps + 1 - plan.first_step;
    FieldStats {
        probes: plan.probes.clone(),
        source: plan.source,
        frequency: src.frequency,
        amplitude: src.amplitude,
        dt: rec.dt,
        first_step: plan.first_step,
        steps_per_period: settings.steps_per_period,
        n_samples,
        mean: rec.mean,
        std: rec.std,
    }
}

/// Mean and linearised standard-deviation fields at `probes`.
///
/// The deviation field is skipped (and reported as zero) when the grid
/// carries no material variance.
pub fn run_sfdtd(
    grid: &Grid2D,
    src: &SourceSpec,
    n_periods: usize,
    probes: &[(f64, f64)],
    settings: &FdtdSettings,
) -> Result<FieldStats, FdtdError> {
    let plan = plan(grid, src, n_periods, probes, settings)?;
    let rec = simulate(grid, None, src, &plan, settings, grid.has_variance())?;
    Ok(stats(&plan, src, settings, rec))
}

/// Deterministic run on the mean materials.
pub fn run_fdtd(
    grid: &Grid2D,
    src: &SourceSpec,
    n_periods: usize,
    probes: &[(f64, f64)],
    settings: &FdtdSettings,
) -> Result<FieldStats, FdtdError> {
    let plan = plan(grid, src, n_periods, probes, settings)?;
    let rec = simulate(grid, None, src, &plan, settings, false)?;
    Ok(stats(&plan, src, settings, rec))
}

/// Draw one material realisation. Cells are independent; within a cell the
/// two parameters have correlation `rho`.
pub fn sample_materials(grid: &Grid2D, rho: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let rest = (1.0 - rho * rho).max(0.0).sqrt();
    let mut eps = grid.eps_r.clone();
    let mut sig = grid.sigma.clone();
    for idx in 0..eps.len() {
        let (se, ss) = (grid.eps_std[idx], grid.sigma_std[idx]);
        if se > 0.0 || ss > 0.0 {
            let g: f64 = StandardNormal.sample(rng);
            let g2: f64 = if rest > 0.0 { StandardNormal.sample(rng) } else { 0.0 };
            eps[idx] = (eps[idx] + se * g).max(1.0);
            sig[idx] = (sig[idx] + ss * (rho * g + rest * g2)).max(0.0);
        }
    }
    (eps, sig)
}

/// Brute-force ensemble of deterministic runs over sampled materials.
pub fn run_monte_carlo(
    grid: &Grid2D,
    src: &SourceSpec,
    n_periods: usize,
    probes: &[(f64, f64)],
    n_runs: usize,
    seed: u64,
    settings: &FdtdSettings,
) -> Result<FieldStats, FdtdError> {
    if n_runs < 2 {
        return Err(FdtdError::TooFewRuns(n_runs));
    }
    let plan = plan(grid, src, n_periods, probes, settings)?;
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    let mut dt = 0.0;
    for run in 0..n_runs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run as u64);
        let (eps, sig) = sample_materials(grid, settings.rho_corr, &mut rng);
        let rec = simulate(grid, Some((&eps, &sig)), src, &plan, settings, false)?;
        dt = rec.dt;
        if run == 0 {
            mean = rec.mean;
            m2 = vec![0.0; mean.len()];
            continue;
        }
        let n = (run + 1) as f64;
        for ((m, s), x) in mean.iter_mut().zip(m2.iter_mut()).zip(rec.mean) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }
    let denom = (n_runs - 1) as f64;
    let std = m2.into_iter().map(|v| (v / denom).max(0.0).sqrt()).collect();
    Ok(stats(&plan, src, settings, Recording { mean, std, dt }))
}

#[cfg(test)]
mod tests;
