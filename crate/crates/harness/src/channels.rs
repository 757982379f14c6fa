//! FDTD transfer banks: one sFDTD run per array column, cached on disk.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use throughwall::arraystore::{read_array, write_array, DenseArray, ExperimentConfig};
use throughwall::channel::{extract_transfer, ChannelError, ProbeLattice, TransferBank, WallTransfer};
use throughwall::radarsim::PlanarArray;
use throughwall::sfdtd::{
    build_wall, recommended_periods, run_monte_carlo, run_sfdtd, FdtdSettings, Grid2D, SourceSpec, WallSpec,
};

use crate::{HarnessError, Result, WallChoice};

pub const GEOMETRY_FILE: &str = "geometry.json";

/// Longest run (periods) tried when a transient has not settled.
const MAX_PERIODS: usize = 600;

/// Depth range of the transfer lattice.
pub const LATTICE_Z: (f64, f64) = (1.5, 3.5);

/// Everything a cached bank depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankKey {
    pub wall: WallChoice,
    pub wall_spec: Option<WallSpec>,
    pub cell: f64,
    pub settings: FdtdSettings,
    pub array: PlanarArray,
    pub lattice_step: f64,
}

impl BankKey {
    pub fn new(cfg: &ExperimentConfig, wall: WallChoice) -> Result<Self> {
        Ok(Self {
            wall,
            wall_spec: wall.fdtd_wall()?,
            cell: cfg.fdtd_cell,
            settings: cfg.fdtd.clone(),
            array: cfg.narrowband.array.clone(),
            lattice_step: cfg.narrowband.lattice_step,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceRun {
    pub column: usize,
    pub source: (f64, f64),
    pub periods: usize,
    pub seconds: f64,
    /// Column whose run was reflected in x = 0 instead of simulating.
    pub mirror_of: Option<usize>,
}

/// Sidecar written next to the per-column transfer files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankGeometry {
    pub key: BankKey,
    pub lattice: ProbeLattice,
    pub frequency: f64,
    pub runs: Vec<SourceRun>,
}

/// Room cross-section of the narrowband path: about 2 m by 4 m, snapped so
/// that x = 0 and the array plane are grid nodes.
pub fn channel_grid(cell: f64, array: &PlanarArray) -> Result<Grid2D> {
    let half = (1.0 / cell).round() * cell;
    let z_src = array.centre[2];
    let z0 = z_src - (z_src / cell).round() * cell;
    let z1 = z0 + (4.0 / cell).round() * cell;
    Ok(Grid2D::new((-half, half), (z0, z1), cell)?)
}

/// Lattice of grid nodes over the target zone, about `step` apart and
/// symmetric about x = 0.
pub fn bank_lattice(grid: &Grid2D, step: f64) -> ProbeLattice {
    let s = (step / grid.cell).round().max(1.0) * grid.cell;
    let half = (grid.x_max().min(-grid.x_min) / s + 1e-9).floor();
    let k0 = ((LATTICE_Z.0 - grid.z_min) / grid.cell).ceil();
    let z0 = grid.z_min + k0 * grid.cell;
    let nz = ((LATTICE_Z.1 - z0) / s + 1e-9).floor() as usize + 1;
    ProbeLattice { x0: -half * s, z0, step: s, nx: 2 * half as usize + 1, nz }
}

fn symmetric(array: &PlanarArray, grid: &Grid2D) -> bool {
    array.centre[0] == 0.0 && (grid.x_min + grid.x_max()).abs() < 1e-9 * grid.cell
}

/// Simulate every column of the array (mirrored where the scene allows) and
/// collect the transfers into a bank.
pub fn generate_bank(
    cfg: &ExperimentConfig,
    wall: WallChoice,
    progress: &mut dyn FnMut(&str),
) -> Result<(TransferBank, BankGeometry)> {
    let key = BankKey::new(cfg, wall)?;
    let array = &key.array;
    let free = channel_grid(key.cell, array)?;
    let grid = match &key.wall_spec {
        Some(spec) => build_wall(&free, spec)?,
        None => free,
    };
    let lattice = bank_lattice(&grid, key.lattice_step);
    let probes = lattice.points();
    let columns = array.columns();
    let n = columns.len();
    let mirror = symmetric(array, &grid);
    let mut transfers: Vec<Option<WallTransfer>> = vec![None; n];
    let mut runs = Vec::with_capacity(n);
    // a run length that had to be extended carries over to later columns
    let mut floor = 0;
    for (m, &(x, z)) in columns.iter().enumerate() {
        let twin = n - 1 - m;
        if mirror && twin < m {
            let wt = transfers[twin].as_ref().expect("earlier column").mirrored()?;
            transfers[m] = Some(wt);
            runs.push(SourceRun { column: m, source: (x, z), periods: 0, seconds: 0.0, mirror_of: Some(twin) });
            continue;
        }
        let mut src = SourceSpec::carrier(x, z);
        src.frequency = array.design_frequency;
        let mut periods = recommended_periods(&grid, &src, &probes, &key.settings).max(floor);
        let t = Instant::now();
        let mut wt = loop {
            let fs = run_sfdtd(&grid, &src, periods, &probes, &key.settings)?;
            if (fs.source.0 - x).abs() > 1e-6 || (fs.source.1 - z).abs() > 1e-6 {
                return Err(HarnessError::Invalid(format!(
                    "column {m} at ({x}, {z}) is not a grid node (nearest {:?}); pick a cell that divides the element spacing",
                    fs.source
                )));
            }
            match extract_transfer(&fs, src.frequency) {
                Err(ChannelError::NotSettled { drift, .. }) if periods < MAX_PERIODS => {
                    progress(&format!("{} column {m}: drift {drift:.4} after {periods} periods, extending", wall.name()));
                    periods += periods / 2;
                }
                other => break other?,
            }
        };
        let seconds = t.elapsed().as_secs_f64();
        floor = periods;
        wt.source = (x, z);
        progress(&format!("{} column {m}: {periods} periods, {seconds:.1} s", wall.name()));
        transfers[m] = Some(wt);
        runs.push(SourceRun { column: m, source: (x, z), periods, seconds, mirror_of: None });
    }
    let transfers: Vec<WallTransfer> = transfers.into_iter().map(|t| t.expect("all columns filled")).collect();
    let bank = TransferBank::from_transfers(lattice.clone(), &transfers)?;
    let geometry = BankGeometry { key, lattice, frequency: bank.frequency, runs };
    Ok((bank, geometry))
}

fn column_file(m: usize, what: &str) -> String {
    format!("column_{m:02}_{what}.arr")
}

/// One complex mean and one real deviation file per column, plus the
/// geometry sidecar.
pub fn save_bank(dir: &Path, bank: &TransferBank, geometry: &BankGeometry) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let n = bank.lattice.len();
    let shape = vec![bank.lattice.nx, bank.lattice.nz];
    for (m, &(x, z)) in bank.sources.iter().enumerate() {
        let meta = serde_json::json!({ "source": [x, z], "frequency": bank.frequency });
        let mean = DenseArray::complex(shape.clone(), "transfer_mean", bank.mean[m * n..(m + 1) * n].to_vec())
            .with_meta(meta.clone());
        let std = DenseArray::real(shape.clone(), "transfer_std", bank.std[m * n..(m + 1) * n].to_vec()).with_meta(meta);
        write_array(&dir.join(column_file(m, "mean")), &mean)?;
        write_array(&dir.join(column_file(m, "std")), &std)?;
    }
    std::fs::write(dir.join(GEOMETRY_FILE), serde_json::to_string_pretty(geometry)?)?;
    Ok(())
}

pub fn load_bank(dir: &Path) -> Result<(TransferBank, BankGeometry)> {
    let path = dir.join(GEOMETRY_FILE);
    if !path.exists() {
        return Err(HarnessError::MissingChannel(dir.to_path_buf()));
    }
    let geometry: BankGeometry = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let points = geometry.lattice.points();
    let mut transfers = Vec::with_capacity(geometry.runs.len());
    for run in &geometry.runs {
        let mean = read_array(&dir.join(column_file(run.column, "mean")))?.into_complex()?;
        let std = read_array(&dir.join(column_file(run.column, "std")))?.into_real()?;
        transfers.push(WallTransfer { source: run.source, frequency: geometry.frequency, points: points.clone(), mean, std });
    }
    let bank = TransferBank::from_transfers(geometry.lattice.clone(), &transfers)?;
    Ok((bank, geometry))
}

/// Load the bank for `wall` from the channel directory, simulating and
/// saving it first when it is missing or was made with other settings.
pub fn cached_bank(cfg: &ExperimentConfig, wall: WallChoice, progress: &mut dyn FnMut(&str)) -> Result<TransferBank> {
    let dir = cfg.channel_dir.join(wall.name());
    let key = BankKey::new(cfg, wall)?;
    match load_bank(&dir) {
        Ok((bank, geometry)) if geometry.key == key => return Ok(bank),
        Ok(_) => progress(&format!("{}: cached bank has other settings, regenerating", wall.name())),
        Err(HarnessError::MissingChannel(_)) => progress(&format!("{}: no cached bank, simulating", wall.name())),
        Err(e) => return Err(e),
    }
    let (bank, geometry) = generate_bank(cfg, wall, progress)?;
    save_bank(&dir, &bank, &geometry)?;
    Ok(bank)
}

/// Settings of the sFDTD against Monte-Carlo comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub cell: f64,
    pub settings: FdtdSettings,
    pub runs: usize,
    pub seed: u64,
    pub source: (f64, f64),
    /// Probe spacing over the target zone.
    pub probe_step: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            cell: 0.004,
            settings: FdtdSettings { steps_per_period: 20, tangent_count: 32, ..FdtdSettings::default() },
            runs: 100,
            seed: 1,
            source: (0.0, 0.5),
            probe_step: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub probes: Vec<(f64, f64)>,
    pub sfdtd_std: Vec<f64>,
    pub mc_std: Vec<f64>,
    /// Pearson correlation of the two deviation patterns.
    pub correlation: f64,
    pub ratio_min: f64,
    pub ratio_median: f64,
    pub ratio_max: f64,
    pub periods: usize,
    pub sfdtd_seconds: f64,
    pub mc_seconds: f64,
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Deviation amplitude of the default dielectric wall from one sFDTD run and
/// from a brute-force ensemble over sampled materials.
pub fn sigma_oracle(cfg: &OracleConfig) -> Result<OracleReport> {
    let grid = build_wall(&Grid2D::room(cfg.cell)?, &WallSpec::dielectric())?;
    let src = SourceSpec::carrier(cfg.source.0, cfg.source.1);
    let lattice = ProbeLattice::covering((-1.0, 1.0), LATTICE_Z, cfg.probe_step);
    let probes = lattice.points();
    let periods = recommended_periods(&grid, &src, &probes, &cfg.settings);

    let t = Instant::now();
    let sf = extract_transfer(&run_sfdtd(&grid, &src, periods, &probes, &cfg.settings)?, src.frequency)?;
    let sfdtd_seconds = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let mc = run_monte_carlo(&grid, &src, periods, &probes, cfg.runs, cfg.seed, &cfg.settings)?;
    let mc = extract_transfer(&mc, src.frequency)?;
    let mc_seconds = t.elapsed().as_secs_f64();

    let mut ratios: Vec<f64> = sf.std.iter().zip(&mc.std).map(|(a, b)| a / b).collect();
    ratios.sort_by(f64::total_cmp);
    Ok(OracleReport {
        correlation: pearson(&sf.std, &mc.std),
        ratio_min: ratios[0],
        ratio_median: ratios[ratios.len() / 2],
        ratio_max: ratios[ratios.len() - 1],
        probes,
        sfdtd_std: sf.std,
        mc_std: mc.std,
        periods,
        sfdtd_seconds,
        mc_seconds,
    })
}
