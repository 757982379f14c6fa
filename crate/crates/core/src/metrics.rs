//! Image similarity: NMSE, windowed SSIM and the group correlation of a
//! frame sequence.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::FrontalImage;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("raster mismatch: {0:?} vs {1:?}")]
    Dimension((usize, usize), (usize, usize)),
    #[error("reference image has zero energy")]
    ZeroReference,
    #[error("need at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame {0} is constant")]
    ConstantFrame(usize),
    #[error("invalid SSIM parameters: {0}")]
    Params(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k1: f64,
    pub k2: f64,
    /// Dynamic range of the pixel values.
    pub dynamic_range: f64,
    pub window: usize,
    pub sigma: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
            window: 11,
            sigma: 1.5,
        }
    }
}

impl SsimParams {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.dynamic_range).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.dynamic_range).powi(2)
    }

    pub fn c3(&self) -> f64 {
        self.c2() / 2.0
    }

    fn validate(&self) -> Result<(), MetricError> {
        if !(self.c1() > 0.0 && self.c2() > 0.0) {
            return Err(MetricError::Params("C1 and C2 must be positive".into()));
        }
        if self.window == 0 || !(self.sigma > 0.0) {
            return Err(MetricError::Params("window and sigma must be positive".into()));
        }
        Ok(())
    }
}

fn check_dims(a: &FrontalImage, b: &FrontalImage) -> Result<(), MetricError> {
    if a.same_raster(b) {
        Ok(())
    } else {
        Err(MetricError::Dimension(a.dims(), b.dims()))
    }
}

/// `||ref - test||^2 / ||ref||^2`.
pub fn nmse(reference: &FrontalImage, test: &FrontalImage) -> Result<f64, MetricError> {
    check_dims(reference, test)?;
    let energy: f64 = reference.pixels.iter().map(|v| v * v).sum();
    if energy == 0.0 {
        return Err(MetricError::ZeroReference);
    }
    let err: f64 = reference.pixels.iter().zip(&test.pixels).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(err / energy)
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let w: Vec<f64> = (0..size).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable filter over the positions where the window fits entirely.
fn filter_valid(data: &[f64], rows: usize, cols: usize, k: &[f64]) -> (Vec<f64>, usize, usize) {
    let w = k.len();
    let (vr, vc) = (rows + 1 - w, cols + 1 - w);
    let mut tmp = vec![0.0; rows * vc];
    for i in 0..rows {
        let row = &data[i * cols..(i + 1) * cols];
        for j in 0..vc {
            tmp[i * vc + j] = k.iter().zip(&row[j..j + w]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; vr * vc];
    for i in 0..vr {
        for (t, &kv) in k.iter().enumerate() {
            let src = &tmp[(i + t) * vc..(i + t + 1) * vc];
            for (o, s) in out[i * vc..(i + 1) * vc].iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    }
    (out, vr, vc)
}

/// Mean SSIM over all positions of the Gaussian window inside the image.
///
/// The window shrinks to the smaller raster side for images narrower than
/// it.
pub fn ssim(reference: &FrontalImage, test: &FrontalImage, params: &SsimParams) -> Result<f64, MetricError> {
    check_dims(reference, test)?;
    params.validate()?;
    let (rows, cols) = reference.dims();
    let mut size = params.window.min(rows).min(cols);
    if size % 2 == 0 && size > 1 {
        size -= 1;
    }
    let k = gaussian_kernel(size, params.sigma);
    let x = &reference.pixels;
    let y = &test.pixels;
    let f = |d: &[f64]| filter_valid(d, rows, cols, &k).0;
    let mx = f(x);
    let my = f(y);
    let xx = f(&x.iter().map(|v| v * v).collect::<Vec<_>>());
    let yy = f(&y.iter().map(|v| v * v).collect::<Vec<_>>());
    let xy = f(&x.iter().zip(y).map(|(a, b)| a * b).collect::<Vec<_>>());
    let (c1, c2, c3) = (params.c1(), params.c2(), params.c3());
    let simple = params.alpha == 1.0 && params.beta == 1.0 && params.gamma == 1.0;
    let mut total = 0.0;
    for p in 0..mx.len() {
        let (ux, uy) = (mx[p], my[p]);
        let vx = (xx[p] - ux * ux).max(0.0);
        let vy = (yy[p] - uy * uy).max(0.0);
        let cov = xy[p] - ux * uy;
        total += if simple {
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        } else {
            let (sx, sy) = (vx.sqrt(), vy.sqrt());
            let l = (2.0 * ux * uy + c1) / (ux * ux + uy * uy + c1);
            let c = (2.0 * sx * sy + c2) / (vx + vy + c2);
            let s = (cov + c3) / (sx * sy + c3);
            l.powf(params.alpha) * c.powf(params.beta) * s.signum() * s.abs().powf(params.gamma)
        };
    }
    Ok(total / mx.len() as f64)
}

/// Mean pairwise Pearson correlation over all unordered frame pairs.
pub fn group_correlation(frames: &[FrontalImage]) -> Result<f64, MetricError> {
    if frames.len() < 2 {
        return Err(MetricError::TooFewFrames(frames.len()));
    }
    let mut centred = Vec::with_capacity(frames.len());
    for (i, f) in frames.iter().enumerate() {
        check_dims(&frames[0], f)?;
        let n = f.len() as f64;
        let mean = f.pixels.iter().sum::<f64>() / n;
        let c: Vec<f64> = f.pixels.iter().map(|v| v - mean).collect();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(MetricError::ConstantFrame(i));
        }
        centred.push((c, norm));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for a in 0..centred.len() {
        for b in a + 1..centred.len() {
            let dot: f64 = centred[a].0.iter().zip(&centred[b].0).map(|(x, y)| x * y).sum();
            sum += dot / (centred[a].1 * centred[b].1);
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// NMSE and SSIM of `test` against `reference`, optionally after scaling
/// both to peak 1.
pub fn compare(
    reference: &FrontalImage,
    test: &FrontalImage,
    params: &SsimParams,
    normalize: bool,
) -> Result<(f64, f64), MetricError> {
    if normalize {
        let (r, t) = (reference.normalized(), test.normalized());
        Ok((nmse(&r, &t)?, ssim(&r, &t, params)?))
    } else {
        Ok((nmse(reference, test)?, ssim(reference, test, params)?))
    }
}

/// Before or after denoising.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "BD")]
    Before,
    #[serde(rename = "AD")]
    After,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub pair: usize,
    pub wall: String,
    pub condition: Condition,
    pub nmse: f64,
    pub ssim: f64,
}

pub fn write_metric_csv<W: Write>(out: W, rows: &[MetricRow]) -> Result<(), MetricError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn im(rows: usize, cols: usize, px: Vec<f64>) -> FrontalImage {
        FrontalImage::from_pixels(rows, cols, px).unwrap()
    }

    fn checkerboard(n: usize) -> FrontalImage {
        im(n, n, (0..n * n).map(|p| ((p / n + p % n) % 2) as f64).collect())
    }

    fn pattern(seed: u64, rows: usize, cols: usize) -> FrontalImage {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        im(rows, cols, (0..rows * cols).map(|_| rng.gen::<f64>()).collect())
    }

    #[test]
    fn nmse_examples() {
        let r = pattern(1, 5, 4);
        assert_eq!(nmse(&r, &r).unwrap(), 0.0);
        let zero = im(5, 4, vec![0.0; 20]);
        assert!((nmse(&r, &zero).unwrap() - 1.0).abs() < 1e-15);
        let a = im(1, 2, vec![1.0, 0.0]);
        let b = im(1, 2, vec![0.0, 1.0]);
        assert_eq!(nmse(&a, &b).unwrap(), 2.0);
        assert!(matches!(nmse(&zero, &r), Err(MetricError::ZeroReference)));
        assert!(nmse(&a, &r).is_err());
    }

    #[test]
    fn nmse_scale_law() {
        let r = pattern(2, 6, 6);
        for alpha in [0.0, 0.3, 1.0, 2.5] {
            let t = im(6, 6, r.pixels.iter().map(|v| alpha * v).collect());
            assert!((nmse(&r, &t).unwrap() - (1.0 - alpha).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn ssim_examples() {
        let p = SsimParams::default();
        let r = pattern(3, 20, 16);
        assert!((ssim(&r, &r, &p).unwrap() - 1.0).abs() < 1e-12);
        let c = checkerboard(16);
        let inv = im(16, 16, c.pixels.iter().map(|v| 1.0 - v).collect());
        assert!(ssim(&c, &inv, &p).unwrap() < 0.0);
        let half = im(12, 12, vec![0.5; 144]);
        assert!((ssim(&half, &half, &p).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&half, &c, &p).is_err());
    }

    #[test]
    fn ssim_is_symmetric_and_bounded() {
        let p = SsimParams::default();
        for s in 0..10 {
            let a = pattern(10 + s, 18, 13);
            let b = pattern(40 + s, 18, 13);
            let ab = ssim(&a, &b, &p).unwrap();
            assert!((ab - ssim(&b, &a, &p).unwrap()).abs() < 1e-12);
            assert!(ab <= 1.0);
        }
    }

    #[test]
    fn general_exponent_form_reduces_to_the_simplified_index() {
        let a = pattern(5, 14, 14);
        let b = pattern(6, 14, 14);
        let p = SsimParams::default();
        let q = SsimParams { gamma: 1.0 + 1e-15, ..p.clone() };
        assert!((ssim(&a, &b, &p).unwrap() - ssim(&a, &b, &q).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn ssim_matches_direct_windowed_statistics() {
        // brute-force local statistics at every window position
        let a = pattern(7, 13, 12);
        let b = pattern(8, 13, 12);
        let p = SsimParams::default();
        let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
        let gs: f64 = g.iter().sum::<f64>().powi(2);
        let (c1, c2) = (1e-4, 9e-4);
        let mut total = 0.0;
        let mut n = 0;
        for i0 in 0..3 {
            for j0 in 0..2 {
                let (mut ux, mut uy, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let w = g[i] * g[j] / gs;
                        let (x, y) = (a.get(i0 + i, j0 + j), b.get(i0 + i, j0 + j));
                        ux += w * x;
                        uy += w * y;
                        xx += w * x * x;
                        yy += w * y * y;
                        xy += w * x * y;
                    }
                }
                let (vx, vy, cv) = (xx - ux * ux, yy - uy * uy, xy - ux * uy);
                total += (2.0 * ux * uy + c1) * (2.0 * cv + c2) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
                n += 1;
            }
        }
        assert!((ssim(&a, &b, &p).unwrap() - total / n as f64).abs() < 1e-12);
    }

    #[test]
    fn group_correlation_examples() {
        let a = pattern(9, 6, 5);
        assert!((group_correlation(&[a.clone(), a.clone(), a.clone()]).unwrap() - 1.0).abs() < 1e-12);
        let u = im(1, 4, vec![1.0, 0.0, 1.0, 0.0]);
        let v = im(1, 4, vec![1.0, 1.0, 0.0, 0.0]);
        assert!(group_correlation(&[u.clone(), v]).unwrap().abs() < 1e-15);
        assert!(group_correlation(&[u.clone()]).is_err());
        let flat = im(1, 4, vec![0.3; 4]);
        assert!(matches!(group_correlation(&[u, flat]), Err(MetricError::ConstantFrame(1))));
    }

    #[test]
    fn group_correlation_ignores_affine_rescaling() {
        let frames: Vec<_> = (0..4).map(|s| pattern(20 + s, 7, 7)).collect();
        let base = group_correlation(&frames).unwrap();
        let mut scaled = frames.clone();
        scaled[2] = im(7, 7, frames[2].pixels.iter().map(|v| 3.0 * v + 0.7).collect());
        assert!((group_correlation(&scaled).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn csv_rows() {
        let rows = vec![
            MetricRow { pair: 0, wall: "dielectric".into(), condition: Condition::Before, nmse: 0.5, ssim: 0.25 },
            MetricRow { pair: 0, wall: "dielectric".into(), condition: Condition::After, nmse: 0.125, ssim: 0.75 },
        ];
        let mut buf = Vec::new();
        write_metric_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "pair,wall,condition,nmse,ssim\n0,dielectric,BD,0.5,0.25\n0,dielectric,AD,0.125,0.75\n");
    }
}
