//! Experiment orchestration: channel banks, paired datasets, training and
//! evaluation runs, sweeps and timing.

pub mod channels;
pub mod experiment;
pub mod synth;
pub mod sweep;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use throughwall::arraystore::{StoreError, WidebandConfig};
use throughwall::channel::ChannelError;
use throughwall::dae::DaeError;
use throughwall::image::ImageError;
use throughwall::metrics::MetricError;
use throughwall::radarsim::{RadarError, SlabSpec};
use throughwall::sfdtd::{FdtdError, WallSpec};
use throughwall::target::TargetError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Fdtd(#[from] FdtdError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Radar(#[from] RadarError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Dae(#[from] DaeError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing channel bank in {0}")]
    MissingChannel(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Wall between the array and the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum WallChoice {
    None,
    Dielectric,
    Reinforced,
    Airgap,
    Glass,
    Wood,
}

impl WallChoice {
    pub const NARROWBAND: [WallChoice; 3] = [WallChoice::Dielectric, WallChoice::Reinforced, WallChoice::Airgap];
    pub const WIDEBAND: [WallChoice; 2] = [WallChoice::Glass, WallChoice::Wood];

    pub fn name(self) -> &'static str {
        match self {
            WallChoice::None => "none",
            WallChoice::Dielectric => "dielectric",
            WallChoice::Reinforced => "reinforced",
            WallChoice::Airgap => "airgap",
            WallChoice::Glass => "glass",
            WallChoice::Wood => "wood",
        }
    }

    /// FDTD wall of the narrowband path; `None` for free space.
    pub fn fdtd_wall(self) -> Result<Option<WallSpec>> {
        match self {
            WallChoice::None => Ok(None),
            WallChoice::Dielectric => Ok(Some(WallSpec::dielectric())),
            WallChoice::Reinforced => Ok(Some(WallSpec::reinforced())),
            WallChoice::Airgap => Ok(Some(WallSpec::airgap())),
            _ => Err(HarnessError::Invalid(format!("{} is a slab wall of the wideband path", self.name()))),
        }
    }

    /// Layered slab of the wideband path; `None` for free space.
    pub fn slab(self, cfg: &WidebandConfig) -> Result<Option<SlabSpec>> {
        match self {
            WallChoice::None => Ok(None),
            WallChoice::Glass => Ok(Some(cfg.glass.clone())),
            WallChoice::Wood => Ok(Some(cfg.wood.clone())),
            _ => Err(HarnessError::Invalid(format!("{} is an FDTD wall of the narrowband path", self.name()))),
        }
    }

    pub fn is_wideband(self) -> bool {
        matches!(self, WallChoice::Glass | WallChoice::Wood)
    }
}
