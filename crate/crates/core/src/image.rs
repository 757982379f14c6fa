//! Frontal radar images.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ImageError {
    #[error("raster {n_az}x{n_el} does not hold {len} pixels")]
    Size { n_az: usize, n_el: usize, len: usize },
    #[error("negative or non-finite pixel {value} at {index}")]
    Pixel { index: usize, value: f64 },
    #[error("axis length {got} does not match raster dimension {want}")]
    Axis { got: usize, want: usize },
}

/// Non-negative magnitude raster over azimuth and elevation.
///
/// Pixels are stored azimuth-major: pixel `(i, j)` (azimuth `i`, elevation
/// `j`) is at `i * n_el + j`. Read as an elevation-by-azimuth matrix this is
/// column-major order, which is the vectorisation fed to the autoencoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontalImage {
    pub n_az: usize,
    pub n_el: usize,
    pub pixels: Vec<f64>,
    /// Azimuth of each raster column in degrees.
    pub az_deg: Vec<f64>,
    /// Elevation of each raster row in degrees.
    pub el_deg: Vec<f64>,
}

impl FrontalImage {
    pub fn new(
        n_az: usize,
        n_el: usize,
        pixels: Vec<f64>,
        az_deg: Vec<f64>,
        el_deg: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if n_az * n_el != pixels.len() || pixels.is_empty() {
            return Err(ImageError::Size { n_az, n_el, len: pixels.len() });
        }
        if az_deg.len() != n_az {
            return Err(ImageError::Axis { got: az_deg.len(), want: n_az });
        }
        if el_deg.len() != n_el {
            return Err(ImageError::Axis { got: el_deg.len(), want: n_el });
        }
        if let Some((index, &value)) = pixels.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
            return Err(ImageError::Pixel { index, value });
        }
        Ok(Self { n_az, n_el, pixels, az_deg, el_deg })
    }

    /// Image with index-valued axes, mainly for tests.
    pub fn from_pixels(n_az: usize, n_el: usize, pixels: Vec<f64>) -> Result<Self, ImageError> {
        let az = (0..n_az).map(|i| i as f64).collect();
        let el = (0..n_el).map(|j| j as f64).collect();
        Self::new(n_az, n_el, pixels, az, el)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_az, self.n_el)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pixels[i * self.n_el + j]
    }

    pub fn peak(&self) -> f64 {
        self.pixels.iter().copied().fold(0.0, f64::max)
    }

    /// Copy scaled to peak 1; an all-zero image is returned unchanged.
    pub fn normalized(&self) -> Self {
        let mut out = self.clone();
        out.normalize();
        out
    }

    pub fn normalize(&mut self) {
        let p = self.peak();
        if p > 0.0 {
            self.pixels.iter_mut().for_each(|v| *v /= p);
        }
    }

    /// Raster position of the brightest pixel.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.pixels.iter().enumerate() {
            if v > self.pixels[best] {
                best = i;
            }
        }
        (best / self.n_el, best % self.n_el)
    }

    pub fn same_raster(&self, other: &Self) -> bool {
        self.n_az == other.n_az && self.n_el == other.n_el
    }
}
