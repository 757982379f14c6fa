use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::StoreError;
use crate::channel::SampleMode;
use crate::dae::TrainConfig;
use crate::radarsim::{ImagingParams, PlanarArray, SlabSpec};
use crate::consts::C0;
use crate::sfdtd::{FdtdSettings, CARRIER_HZ};
use crate::target::WalkParams;

/// Dynamic (Doppler) experiment settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NarrowbandConfig {
    pub array: PlanarArray,
    pub imaging: ImagingParams,
    pub walk: WalkParams,
    pub frames: usize,
    pub realizations: usize,
    pub aspects_deg: Vec<f64>,
    /// Spread of the random gait phase added per stride (rad).
    pub phase_jitter: f64,
    pub sample_mode: SampleMode,
    /// Spacing of the transfer lattice over the target zone.
    pub lattice_step: f64,
}

impl Default for NarrowbandConfig {
    fn default() -> Self {
        Self {
            array: PlanarArray::narrowband(),
            imaging: ImagingParams::narrowband(),
            walk: WalkParams::default(),
            frames: 10,
            realizations: 20,
            aspects_deg: vec![0.0, 45.0, 90.0, 180.0],
            phase_jitter: 0.5,
            sample_mode: SampleMode::Coherent,
            lattice_step: 0.02,
        }
    }
}

/// Static (range) experiment settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WidebandConfig {
    pub array: PlanarArray,
    pub imaging: ImagingParams,
    pub f_start: f64,
    pub f_stop: f64,
    pub n_freqs: usize,
    pub measurements_per_subject: usize,
    /// Orientations are drawn uniformly from +- this many degrees.
    pub orientation_span_deg: f64,
    pub glass: SlabSpec,
    pub wood: SlabSpec,
}

impl Default for WidebandConfig {
    fn default() -> Self {
        Self {
            array: PlanarArray::wideband(),
            imaging: ImagingParams::wideband(),
            f_start: 3.3e9,
            f_stop: 10.3e9,
            n_freqs: 256,
            measurements_per_subject: 25,
            orientation_span_deg: 45.0,
            glass: SlabSpec::glass(),
            wood: SlabSpec::wood(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Fraction of pairs used for training.
    pub split_fraction: f64,
    pub output_dir: PathBuf,
    pub channel_dir: PathBuf,
    pub fdtd: FdtdSettings,
    /// FDTD cell size (m). The default, a sixteenth of the carrier wavelength,
    /// puts the element columns and the 2 cm lattice on grid nodes.
    pub fdtd_cell: f64,
    pub narrowband: NarrowbandConfig,
    pub wideband: WidebandConfig,
    pub train: TrainConfig,
    pub train_wideband: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            split_fraction: 0.8,
            output_dir: PathBuf::from("out"),
            channel_dir: PathBuf::from("out/channels"),
            fdtd: FdtdSettings::default(),
            fdtd_cell: C0 / CARRIER_HZ / 16.0,
            narrowband: NarrowbandConfig::default(),
            wideband: WidebandConfig::default(),
            train: TrainConfig::narrowband(),
            train_wideband: TrainConfig::wideband(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), StoreError> {
        let bad = |m: String| Err(StoreError::Invalid(m));
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split fraction {} outside (0, 1)", self.split_fraction));
        }
        if !(self.fdtd_cell > 0.0) {
            return bad(format!("FDTD cell {}", self.fdtd_cell));
        }
        let nb = &self.narrowband;
        if nb.frames == 0 || nb.realizations == 0 || nb.aspects_deg.is_empty() {
            return bad("narrowband needs frames, realizations and aspects".into());
        }
        if self.wideband.n_freqs < 64 {
            return bad(format!("{} frequency steps", self.wideband.n_freqs));
        }
        self.train.validate().map_err(|e| StoreError::Invalid(e.to_string()))?;
        self.train_wideband.validate().map_err(|e| StoreError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
