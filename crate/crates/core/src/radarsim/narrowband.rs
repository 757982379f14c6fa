use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{image_from, peak_threshold, ApertureFft, CubeAxis, ImagingParams, PlanarArray, RadarError, RawCube};
use crate::channel::{green_3d, RatioField};
use crate::consts::C0;
use crate::image::FrontalImage;
use crate::target::ScattererTrack;

/// One-way propagation model for the narrowband path.
pub enum Propagation<'a> {
    /// Analytic 3D Green's function.
    FreeSpace { frequency: f64 },
    /// 2D channel realisation scaled to 3D; one source per array column.
    Channel(&'a RatioField<'a>),
}

impl Propagation<'_> {
    fn frequency(&self) -> f64 {
        match self {
            Propagation::FreeSpace { frequency } => *frequency,
            Propagation::Channel(f) => f.bank().frequency,
        }
    }

    fn check(&self, array: &PlanarArray) -> Result<(), RadarError> {
        let Propagation::Channel(field) = self else {
            return Ok(());
        };
        let sources = &field.bank().sources;
        if sources.len() != array.n_az {
            return Err(RadarError::Sources { array: array.n_az, channel: sources.len() });
        }
        for (m, (&(sx, sz), (ex, ez))) in sources.iter().zip(array.columns()).enumerate() {
            if (sx - ex).abs() > 1e-6 || (sz - ez).abs() > 1e-6 {
                return Err(RadarError::SourcePosition { column: m, expected: ex, found: sx });
            }
        }
        Ok(())
    }
}

/// Sum of `sqrt(sigma_b) H^2` over the scatterers, with `H` the one-way
/// transfer from each element to each scatterer.
pub fn synth_narrowband(track: &ScattererTrack, array: &PlanarArray, prop: &Propagation) -> Result<RawCube, RadarError> {
    prop.check(array)?;
    let frequency = prop.frequency();
    let k = 2.0 * std::f64::consts::PI * frequency / C0;
    let nt = track.n_samples;
    let mut cube = RawCube::zeros(array, nt, CubeAxis::Time { fs: track.fs, frequency });
    let n_el = array.n_el;
    for b in 0..track.n_scatterers() {
        for t in 0..nt {
            let amp = track.sigma(b, t).sqrt();
            if amp == 0.0 {
                continue;
            }
            let p = track.position(b, t);
            for m in 0..array.n_az {
                let ratio = match prop {
                    Propagation::FreeSpace { .. } => Complex64::new(1.0, 0.0),
                    Propagation::Channel(field) => field
                        .ratio(m, p[0], p[2])
                        .map_err(|source| RadarError::Channel { scatterer: b, sample: t, source })?,
                };
                for n in 0..n_el {
                    let e = array.element(m, n);
                    let d = ((p[0] - e[0]).powi(2) + (p[1] - e[1]).powi(2) + (p[2] - e[2]).powi(2)).sqrt();
                    let h = ratio * green_3d(k, d);
                    cube.data[(m * n_el + n) * nt + t] += amp * h * h;
                }
            }
        }
    }
    Ok(cube)
}

/// Doppler-angle spectrum of one dwell.
#[derive(Clone, Debug)]
pub struct DopplerSpectrum {
    pub n_doppler: usize,
    pub raster: (usize, usize),
    pub fs: f64,
    /// Doppler-major: `values[q * pa * pe + i * pe + j]`.
    pub values: Vec<Complex64>,
}

impl DopplerSpectrum {
    /// Signed Doppler frequency of bin `q`.
    pub fn doppler_hz(&self, q: usize) -> f64 {
        let n = self.n_doppler;
        let s = if q < n.div_ceil(2) { q as f64 } else { q as f64 - n as f64 };
        s * self.fs / n as f64
    }

    pub fn bin(&self, q: usize) -> &[Complex64] {
        let np = self.raster.0 * self.raster.1;
        &self.values[q * np..(q + 1) * np]
    }

    /// (Doppler bin, azimuth index, elevation index) of the largest
    /// magnitude, skipping bin 0 when `skip_zero`.
    pub fn peak(&self, skip_zero: bool) -> (usize, usize, usize) {
        let np = self.raster.0 * self.raster.1;
        let start = if skip_zero { np } else { 0 };
        let (idx, _) = self.values[start..]
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, v)| if v.norm() > best.1 { (i, v.norm()) } else { best });
        let idx = idx + start;
        (idx / np, (idx % np) / self.raster.1, idx % self.raster.1)
    }
}

fn time_axis(cube: &RawCube) -> Result<(f64, f64), RadarError> {
    match cube.axis {
        CubeAxis::Time { fs, frequency } => Ok((fs, frequency)),
        CubeAxis::Frequency { .. } => Err(RadarError::Axis("expected slow-time samples".into())),
    }
}

/// Per-element time FFTs of samples `start..start + len`, element-major.
fn doppler_ffts(cube: &RawCube, start: usize, len: usize, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let fft = planner.plan_fft_forward(len);
    let mut out = Vec::with_capacity(cube.array.len() * len);
    for m in 0..cube.n_az() {
        for n in 0..cube.n_el() {
            out.extend_from_slice(&cube.series(m, n)[start..start + len]);
        }
    }
    for chunk in out.chunks_exact_mut(len) {
        fft.process(chunk);
    }
    out
}

fn check_raster(cube: &RawCube, raster: (usize, usize)) -> Result<(), RadarError> {
    if raster.0 < cube.n_az() || raster.1 < cube.n_el() {
        return Err(RadarError::Raster(raster.0, raster.1));
    }
    Ok(())
}

/// 3D FFT over (element column, element row, slow time) of one dwell.
pub fn doppler_spectrum(cube: &RawCube, start: usize, len: usize, raster: (usize, usize)) -> Result<DopplerSpectrum, RadarError> {
    let (fs, _) = time_axis(cube)?;
    if len == 0 || start + len > cube.n_samples {
        return Err(RadarError::Cpi { cpi: len, samples: cube.n_samples });
    }
    check_raster(cube, raster)?;
    let mut planner = FftPlanner::new();
    let spec = doppler_ffts(cube, start, len, &mut planner);
    let mut aperture = ApertureFft::new(raster, &mut planner);
    let np = raster.0 * raster.1;
    let mut values = vec![Complex64::new(0.0, 0.0); len * np];
    let ne = cube.n_el();
    for (q, out) in values.chunks_exact_mut(np).enumerate() {
        aperture.transform(cube.n_az(), ne, |m, n| spec[(m * ne + n) * len + q], out);
    }
    Ok(DopplerSpectrum { n_doppler: len, raster, fs, values })
}

/// Doppler-enhanced images before peak normalisation, one per dwell.
pub fn doppler_frontal_image_raw(cube: &RawCube, params: &ImagingParams) -> Result<Vec<FrontalImage>, RadarError> {
    let (_, frequency) = time_axis(cube)?;
    let cpi = params.cpi;
    if cpi < 8 || cpi > cube.n_samples {
        return Err(RadarError::Cpi { cpi, samples: cube.n_samples });
    }
    check_raster(cube, params.raster)?;
    let mut planner = FftPlanner::new();
    let mut aperture = ApertureFft::new(params.raster, &mut planner);
    let np = params.raster.0 * params.raster.1;
    let ne = cube.n_el();
    let ratio = params.threshold_ratio();
    let mut bin = vec![Complex64::new(0.0, 0.0); np];
    let mut mags = vec![0.0; np];
    let mut images = Vec::new();
    for c in 0..cube.n_samples / cpi {
        let spec = doppler_ffts(cube, c * cpi, cpi, &mut planner);
        let mut acc = vec![0.0; np];
        let first = usize::from(params.notch_zero_doppler);
        for q in first..cpi {
            aperture.transform(cube.n_az(), ne, |m, n| spec[(m * ne + n) * cpi + q], &mut bin);
            mags.iter_mut().zip(&bin).for_each(|(a, v)| *a = v.norm());
            peak_threshold(&mut mags, ratio);
            acc.iter_mut().zip(&mags).for_each(|(a, v)| *a += v);
        }
        images.push(image_from(&cube.array, params.raster, frequency, acc)?);
    }
    Ok(images)
}

/// Doppler-enhanced frontal images normalised to unit peak (all-zero images
/// are left as they are).
pub fn doppler_frontal_image(cube: &RawCube, params: &ImagingParams) -> Result<Vec<FrontalImage>, RadarError> {
    let mut images = doppler_frontal_image_raw(cube, params)?;
    images.iter_mut().for_each(FrontalImage::normalize);
    Ok(images)
}
