use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::RadarError;
use crate::consts::{C0, EPS0};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabLayer {
    pub thickness: f64,
    pub eps_r: f64,
    /// Conductivity in S/m.
    pub sigma: f64,
}

/// Planar layered wall parallel to the array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub layers: Vec<SlabLayer>,
    /// Range from the array plane to the front face.
    pub distance: f64,
    /// Include the specular echo of the front face in synthesised data.
    pub front_echo: bool,
}

impl SlabSpec {
    pub fn single(thickness: f64, eps_r: f64, sigma: f64) -> Self {
        Self { layers: vec![SlabLayer { thickness, eps_r, sigma }], distance: 1.0, front_echo: true }
    }

    /// 2 cm float glass.
    pub fn glass() -> Self {
        Self::single(0.02, 6.5, 0.01)
    }

    /// 3 cm dry wood.
    pub fn wood() -> Self {
        Self::single(0.03, 2.0, 0.03)
    }

    pub fn thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    pub fn validate(&self) -> Result<(), RadarError> {
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.thickness >= 0.0 && l.eps_r >= 1.0 && l.sigma >= 0.0) {
                return Err(RadarError::Slab(format!("layer {i}: {l:?}")));
            }
        }
        if !(self.distance > 0.0) {
            return Err(RadarError::Slab(format!("distance {}", self.distance)));
        }
        Ok(())
    }
}

/// TE characteristic matrix of the stack (time dependence exp(+j w t)) and
/// the admittance of the surrounding air, both normalised to free space.
fn stack(f: f64, slab: &SlabSpec, incidence: f64) -> ([[Complex64; 2]; 2], Complex64) {
    let k0 = 2.0 * PI * f / C0;
    let omega = 2.0 * PI * f;
    let s2 = incidence.sin().powi(2);
    let j = Complex64::i();
    let one = Complex64::new(1.0, 0.0);
    let mut m = [[one, Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), one]];
    for l in &slab.layers {
        let eps = Complex64::new(l.eps_r, -l.sigma / (omega * EPS0));
        let y = (eps - s2).sqrt();
        let delta = k0 * l.thickness * y;
        let (c, s) = (delta.cos(), delta.sin());
        let lm = [[c, j * s / y], [j * y * s, c]];
        m = [
            [m[0][0] * lm[0][0] + m[0][1] * lm[1][0], m[0][0] * lm[0][1] + m[0][1] * lm[1][1]],
            [m[1][0] * lm[0][0] + m[1][1] * lm[1][0], m[1][0] * lm[0][1] + m[1][1] * lm[1][1]],
        ];
    }
    (m, Complex64::new(incidence.cos(), 0.0))
}

/// Insertion transmission of the slab: the field behind the wall relative to
/// the field the same path would carry without it. Equals 1 for an air slab.
pub fn slab_transmission(f: f64, slab: &SlabSpec, incidence: f64) -> Complex64 {
    let (m, y0) = stack(f, slab, incidence);
    let den = y0 * m[0][0] + y0 * y0 * m[0][1] + m[1][0] + y0 * m[1][1];
    let t = 2.0 * y0 / den;
    let k0 = 2.0 * PI * f / C0;
    t * Complex64::from_polar(1.0, k0 * slab.thickness() * incidence.cos())
}

/// Reflection coefficient of the slab referred to its front face.
pub fn slab_reflection(f: f64, slab: &SlabSpec, incidence: f64) -> Complex64 {
    let (m, y0) = stack(f, slab, incidence);
    let a = y0 * m[0][0] + y0 * y0 * m[0][1];
    let b = m[1][0] + y0 * m[1][1];
    (a - b) / (a + b)
}
