use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{image_from, peak_threshold, slab_reflection, slab_transmission, ApertureFft, CubeAxis, ImagingParams, PlanarArray, RadarError, RawCube, SlabSpec};
use crate::consts::C0;
use crate::image::FrontalImage;
use crate::target::StaticPose;

pub const MIN_FREQUENCIES: usize = 64;

/// `n` evenly spaced frequencies from `f0` to `f1` inclusive.
pub fn stepped_frequencies(f0: f64, f1: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![f0];
    }
    (0..n).map(|i| f0 + (f1 - f0) * i as f64 / (n - 1) as f64).collect()
}

fn frequencies(cube: &RawCube) -> Result<&[f64], RadarError> {
    match &cube.axis {
        CubeAxis::Frequency { freqs } => Ok(freqs),
        CubeAxis::Time { .. } => Err(RadarError::Axis("expected stepped frequencies".into())),
    }
}

/// Stepped-frequency returns of a static pose, optionally through a slab.
///
/// Each scatterer contributes `sqrt(sigma) T^2 exp(-j 2 k d) / (4 pi d)^2`,
/// with `T` evaluated at the incidence angle of the element-scatterer path.
/// With `slab.front_echo` the specular return of the wall face is added as
/// an image source at twice the wall distance.
pub fn synth_wideband(pose: &StaticPose, array: &PlanarArray, freqs: &[f64], slab: Option<&SlabSpec>) -> Result<RawCube, RadarError> {
    if freqs.len() < MIN_FREQUENCIES {
        return Err(RadarError::Frequencies { min: MIN_FREQUENCIES, got: freqs.len() });
    }
    if let Some(s) = slab {
        s.validate()?;
        let back = array.centre[2] + s.distance + s.thickness();
        if let Some(i) = pose.positions.iter().position(|p| p[2] <= back) {
            return Err(RadarError::Slab(format!("scatterer {i} is not behind the wall")));
        }
    }
    let nf = freqs.len();
    let mut cube = RawCube::zeros(array, nf, CubeAxis::Frequency { freqs: freqs.to_vec() });
    for m in 0..array.n_az {
        for n in 0..array.n_el {
            let e = array.element(m, n);
            let out = cube.series_mut(m, n);
            for (b, p) in pose.positions.iter().enumerate() {
                let amp = pose.reflectivity[b].sqrt();
                let d = ((p[0] - e[0]).powi(2) + (p[1] - e[1]).powi(2) + (p[2] - e[2]).powi(2)).sqrt();
                let incidence = ((p[2] - e[2]) / d).clamp(-1.0, 1.0).acos();
                let spread = amp / (4.0 * PI * d).powi(2);
                for (x, &f) in out.iter_mut().zip(freqs) {
                    let k = 2.0 * PI * f / C0;
                    let t = slab.map_or(Complex64::new(1.0, 0.0), |s| slab_transmission(f, s, incidence));
                    *x += spread * t * t * Complex64::from_polar(1.0, -2.0 * k * d);
                }
            }
            if let Some(s) = slab.filter(|s| s.front_echo) {
                let path = 2.0 * s.distance;
                for (x, &f) in out.iter_mut().zip(freqs) {
                    let k = 2.0 * PI * f / C0;
                    *x += slab_reflection(f, s, 0.0) * Complex64::from_polar(1.0 / (4.0 * PI * path), -k * path);
                }
            }
        }
    }
    Ok(cube)
}

/// Inverse DFT over frequency for one element. Bin `r` is the round trip to
/// range `r c / (2 n df)`.
pub fn range_profile(cube: &RawCube, m: usize, n: usize) -> Result<Vec<Complex64>, RadarError> {
    frequencies(cube)?;
    let mut v = cube.series(m, n).to_vec();
    FftPlanner::new().plan_fft_inverse(v.len()).process(&mut v);
    Ok(v)
}

/// Range-enhanced image before peak normalisation: per range gate, pixels
/// below the gate peak by more than the threshold are dropped and the
/// complex remainder is summed over gates.
///
/// The frequency index of the range transform is counted from the band
/// centre, so the gates a scatterer occupies carry the same phase.
pub fn range_frontal_image_raw(cube: &RawCube, params: &ImagingParams) -> Result<FrontalImage, RadarError> {
    let freqs = frequencies(cube)?;
    let (pa, pe) = params.raster;
    if pa < cube.n_az() || pe < cube.n_el() {
        return Err(RadarError::Raster(pa, pe));
    }
    let nf = cube.n_samples;
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(nf);
    let mut gates = cube.data.clone();
    let reference: Vec<Complex64> = (0..nf)
        .map(|r| Complex64::from_polar(1.0, -PI * (nf - 1) as f64 * r as f64 / nf as f64))
        .collect();
    for chunk in gates.chunks_exact_mut(nf) {
        ifft.process(chunk);
        chunk.iter_mut().zip(&reference).for_each(|(v, w)| *v *= w);
    }
    let mut aperture = ApertureFft::new(params.raster, &mut planner);
    let np = pa * pe;
    let ne = cube.n_el();
    let ratio = params.threshold_ratio();
    let mut bin = vec![Complex64::new(0.0, 0.0); np];
    let mut mags = vec![0.0; np];
    let mut acc = vec![Complex64::new(0.0, 0.0); np];
    for r in 0..nf {
        aperture.transform(cube.n_az(), ne, |m, n| gates[(m * ne + n) * nf + r], &mut bin);
        mags.iter_mut().zip(&bin).for_each(|(a, v)| *a = v.norm());
        peak_threshold(&mut mags, ratio);
        for ((a, v), g) in acc.iter_mut().zip(&bin).zip(&mags) {
            if *g > 0.0 {
                *a += v;
            }
        }
    }
    let centre = freqs.iter().sum::<f64>() / freqs.len() as f64;
    image_from(&cube.array, params.raster, centre, acc.iter().map(|v| v.norm()).collect())
}

pub fn range_frontal_image(cube: &RawCube, params: &ImagingParams) -> Result<FrontalImage, RadarError> {
    let mut img = range_frontal_image_raw(cube, params)?;
    img.normalize();
    Ok(img)
}
