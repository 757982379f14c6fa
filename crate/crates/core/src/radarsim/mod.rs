//! Raw radar cubes and frontal image formation.
//!
//! Array elements are monostatic: each one transmits and receives its own
//! return. Element `(m, n)` sits at column `m` along x (azimuth) and row `n`
//! along y (elevation).

mod narrowband;
mod slab;
mod wideband;

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::consts::C0;
use crate::image::{FrontalImage, ImageError};

pub use narrowband::{doppler_frontal_image, doppler_frontal_image_raw, doppler_spectrum, synth_narrowband, DopplerSpectrum, Propagation};
pub use slab::{slab_reflection, slab_transmission, SlabLayer, SlabSpec};
pub use wideband::{range_frontal_image, range_frontal_image_raw, range_profile, stepped_frequencies, synth_wideband};

pub const NARROWBAND_HZ: f64 = 7.5e9;
pub const WIDEBAND_CENTRE_HZ: f64 = 6.8e9;

#[derive(Debug, Error)]
pub enum RadarError {
    #[error("scatterer {scatterer} at sample {sample}: {source}")]
    Channel {
        scatterer: usize,
        sample: usize,
        #[source]
        source: ChannelError,
    },
    #[error("array has {array} columns, channel has {channel} sources")]
    Sources { array: usize, channel: usize },
    #[error("array column {column} at x = {expected:.4} m, channel source at x = {found:.4} m")]
    SourcePosition { column: usize, expected: f64, found: f64 },
    #[error("CPI of {cpi} samples invalid for {samples} samples (need 8 <= cpi <= samples)")]
    Cpi { cpi: usize, samples: usize },
    #[error("need at least {min} frequency steps, got {got}")]
    Frequencies { min: usize, got: usize },
    #[error("cube axis does not suit this operation: {0}")]
    Axis(String),
    #[error("raster {0}x{1} smaller than the aperture")]
    Raster(usize, usize),
    #[error("slab: {0}")]
    Slab(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Regular grid of elements in the plane z = centre.z.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarArray {
    pub n_az: usize,
    pub n_el: usize,
    pub spacing: f64,
    pub centre: [f64; 3],
    /// Frequency at which `spacing` is half a wavelength.
    pub design_frequency: f64,
}

impl PlanarArray {
    pub fn new(n_az: usize, n_el: usize, design_frequency: f64, centre: [f64; 3]) -> Self {
        Self { n_az, n_el, spacing: C0 / design_frequency / 2.0, centre, design_frequency }
    }

    /// 10 x 10 at 7.5 GHz, 0.5 m in front of the wall, 1 m above the floor.
    pub fn narrowband() -> Self {
        Self::new(10, 10, NARROWBAND_HZ, [0.0, 1.0, 0.5])
    }

    /// 4 x 4 with half-wave spacing at the band centre.
    pub fn wideband() -> Self {
        Self::new(4, 4, WIDEBAND_CENTRE_HZ, [0.0, 0.9, 0.0])
    }

    pub fn len(&self) -> usize {
        self.n_az * self.n_el
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element(&self, m: usize, n: usize) -> [f64; 3] {
        let ox = (self.n_az as f64 - 1.0) / 2.0;
        let oy = (self.n_el as f64 - 1.0) / 2.0;
        [
            self.centre[0] + (m as f64 - ox) * self.spacing,
            self.centre[1] + (n as f64 - oy) * self.spacing,
            self.centre[2],
        ]
    }

    /// In-plane (x, z) positions of the element columns, which are the 2D
    /// source positions of the channel simulation.
    pub fn columns(&self) -> Vec<(f64, f64)> {
        (0..self.n_az).map(|m| (self.element(m, 0)[0], self.centre[2])).collect()
    }

    /// Direction sine imaged by shifted FFT bin `p` of a `size`-point
    /// aperture transform, for two-way propagation at `frequency`.
    pub fn bin_sine(&self, p: f64, size: usize, frequency: f64) -> f64 {
        p * C0 / frequency / (2.0 * self.spacing * size as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CubeAxis {
    Time { fs: f64, frequency: f64 },
    Frequency { freqs: Vec<f64> },
}

/// Complex samples per element; element `(m, n)` owns the contiguous block
/// starting at `(m * n_el + n) * n_samples`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawCube {
    pub array: PlanarArray,
    pub n_samples: usize,
    pub axis: CubeAxis,
    pub data: Vec<Complex64>,
}

impl RawCube {
    pub fn zeros(array: &PlanarArray, n_samples: usize, axis: CubeAxis) -> Self {
        let data = vec![Complex64::new(0.0, 0.0); array.len() * n_samples];
        Self { array: array.clone(), n_samples, axis, data }
    }

    pub fn n_az(&self) -> usize {
        self.array.n_az
    }

    pub fn n_el(&self) -> usize {
        self.array.n_el
    }

    pub fn series(&self, m: usize, n: usize) -> &[Complex64] {
        let s = (m * self.array.n_el + n) * self.n_samples;
        &self.data[s..s + self.n_samples]
    }

    pub fn series_mut(&mut self, m: usize, n: usize) -> &mut [Complex64] {
        let s = (m * self.array.n_el + n) * self.n_samples;
        &mut self.data[s..s + self.n_samples]
    }

    pub fn scale(&mut self, a: f64) {
        self.data.iter_mut().for_each(|v| *v *= a);
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Image formation settings shared by both paths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImagingParams {
    /// FFT sizes over azimuth and elevation.
    pub raster: (usize, usize),
    /// Pixels more than this far below the peak of their Doppler bin or
    /// range gate are dropped.
    pub threshold_db: f64,
    /// Doppler dwell in samples.
    pub cpi: usize,
    pub notch_zero_doppler: bool,
}

impl ImagingParams {
    pub fn narrowband() -> Self {
        Self { raster: (92, 92), threshold_db: 6.0, cpi: 100, notch_zero_doppler: true }
    }

    pub fn wideband() -> Self {
        Self { raster: (91, 37), threshold_db: 6.0, cpi: 0, notch_zero_doppler: false }
    }

    fn threshold_ratio(&self) -> f64 {
        10f64.powf(-self.threshold_db / 20.0)
    }
}

/// Zero-padded 2D aperture transform with the zero bin moved to the middle.
pub(crate) struct ApertureFft {
    pa: usize,
    pe: usize,
    fa: Arc<dyn Fft<f64>>,
    fe: Arc<dyn Fft<f64>>,
    buf: Vec<Complex64>,
    col: Vec<Complex64>,
}

impl ApertureFft {
    pub fn new(raster: (usize, usize), planner: &mut FftPlanner<f64>) -> Self {
        let (pa, pe) = raster;
        Self {
            pa,
            pe,
            fa: planner.plan_fft_forward(pa),
            fe: planner.plan_fft_forward(pe),
            buf: vec![Complex64::new(0.0, 0.0); pa * pe],
            col: vec![Complex64::new(0.0, 0.0); pa],
        }
    }

    /// Shifted bin index `i` of a `size`-point transform as a signed bin.
    pub fn signed_bin(i: usize, size: usize) -> isize {
        i as isize - (size / 2) as isize
    }

    /// Transform `get(m, n)` over an `na x ne` aperture. The result is
    /// azimuth-major and shifted: `out[i * pe + j]` holds signed bins
    /// `(i - pa/2, j - pe/2)`.
    pub fn transform(&mut self, na: usize, ne: usize, get: impl Fn(usize, usize) -> Complex64, out: &mut [Complex64]) {
        let (pa, pe) = (self.pa, self.pe);
        let zero = Complex64::new(0.0, 0.0);
        self.buf.iter_mut().for_each(|v| *v = zero);
        // rows m < na: transform along elevation
        for m in 0..na {
            let row = &mut self.buf[m * pe..(m + 1) * pe];
            for n in 0..ne {
                row[n] = get(m, n);
            }
            self.fe.process(row);
        }
        for j in 0..pe {
            for m in 0..pa {
                self.col[m] = if m < na { self.buf[m * pe + j] } else { zero };
            }
            self.fa.process(&mut self.col);
            let js = (j + pe / 2) % pe;
            for b in 0..pa {
                let is = (b + pa / 2) % pa;
                out[is * pe + js] = self.col[b];
            }
        }
    }
}

/// Degrees labelling the shifted bins of an aperture transform.
pub(crate) fn axis_degrees(array: &PlanarArray, size: usize, frequency: f64) -> Vec<f64> {
    (0..size)
        .map(|i| {
            let s = array.bin_sine(ApertureFft::signed_bin(i, size) as f64, size, frequency);
            s.clamp(-1.0, 1.0).asin().to_degrees()
        })
        .collect()
}

/// Zero every value of `mags` below `ratio` times their maximum.
pub(crate) fn peak_threshold(mags: &mut [f64], ratio: f64) {
    let peak = mags.iter().cloned().fold(0.0, f64::max);
    let floor = peak * ratio;
    mags.iter_mut().for_each(|v| {
        if *v < floor {
            *v = 0.0
        }
    });
}

pub(crate) fn image_from(
    array: &PlanarArray,
    raster: (usize, usize),
    frequency: f64,
    pixels: Vec<f64>,
) -> Result<FrontalImage, RadarError> {
    Ok(FrontalImage::new(
        raster.0,
        raster.1,
        pixels,
        axis_degrees(array, raster.0, frequency),
        axis_degrees(array, raster.1, frequency),
    )?)
}

#[cfg(test)]
mod tests;
