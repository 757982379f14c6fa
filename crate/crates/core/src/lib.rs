//! Through-wall radar channel simulation, frontal image formation and
//! denoising autoencoder training.

pub mod consts;
pub mod sfdtd;
pub mod channel;
pub mod target;
pub mod radarsim;
pub mod image;
pub mod arraystore;
pub mod dae;
pub mod metrics;
