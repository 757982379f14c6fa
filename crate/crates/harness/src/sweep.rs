//! Hidden-size and mapping sweeps, and denoising time against model size.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use throughwall::arraystore::Dataset;
use throughwall::dae::{denoise_image, DaeModel, MappingFn, TrainConfig};
use throughwall::image::FrontalImage;

use crate::experiment::{after_denoising, before_denoising, split, train_on, EvalOptions, MetricMeans};
use crate::Result;

pub const SWEEP_NODES: [usize; 6] = [50, 100, 250, 500, 1000, 1500];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: usize,
    pub mapping: MappingFn,
    pub bd_ssim: f64,
    pub ad_ssim: f64,
    pub bd_nmse: f64,
    pub ad_nmse: f64,
    pub train_seconds: f64,
    pub denoise_ms: f64,
    pub sweeps: usize,
}

/// Train one model per (r, mapping) on the same split and score it on the
/// same test pairs. Sizes not below the pixel count are skipped.
pub fn sweep(
    ds: &Dataset,
    fraction: f64,
    seed: u64,
    base: &TrainConfig,
    nodes: &[usize],
    mappings: &[MappingFn],
    opts: &EvalOptions,
    progress: &mut dyn FnMut(&str),
) -> Result<Vec<SweepRow>> {
    let (train_set, test_set) = split(ds, fraction, seed)?;
    let n = train_set.clean.first().map_or(0, FrontalImage::len);
    let bd = MetricMeans::of_pairs(&before_denoising(&test_set, opts)?);
    let mut rows = Vec::new();
    for &mapping in mappings {
        for &r in nodes.iter().filter(|&&r| r < n) {
            let cfg = TrainConfig { r, mapping, ..base.clone() };
            let (model, train_seconds) = train_on(&train_set, &cfg)?;
            let (ad, denoise_ms) = after_denoising(&model, &test_set, opts)?;
            let ad = MetricMeans::of_pairs(&ad);
            progress(&format!("sweep {} r={r}: SSIM {:.4}, {:.1} s", mapping.name(), ad.ssim, train_seconds));
            rows.push(SweepRow {
                r,
                mapping,
                bd_ssim: bd.ssim,
                ad_ssim: ad.ssim,
                bd_nmse: bd.nmse,
                ad_nmse: ad.nmse,
                train_seconds,
                denoise_ms,
                sweeps: model.sweeps(),
            });
        }
    }
    Ok(rows)
}

/// Smallest r whose SSIM is within `tol` of the best of the curve, and
/// whether the curve never drops by more than `tol` before it.
pub fn plateau(rows: &[SweepRow], mapping: MappingFn, tol: f64) -> Option<(usize, bool)> {
    let mut curve: Vec<(usize, f64)> = rows.iter().filter(|r| r.mapping == mapping).map(|r| (r.r, r.ad_ssim)).collect();
    curve.sort_by_key(|c| c.0);
    let best = curve.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let at = curve.iter().position(|c| c.1 >= best - tol)?;
    let rising = curve[..=at].windows(2).all(|w| w[1].1 >= w[0].1 - tol);
    Some((curve[at].0, rising))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingPoint {
    pub r: usize,
    pub n: usize,
    pub rn: f64,
    /// Median time per denoised image.
    pub ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingFit {
    pub points: Vec<TimingPoint>,
    pub intercept_ms: f64,
    pub slope_ms: f64,
    pub r2: f64,
}

/// Least-squares line through (x, y) and its coefficient of determination.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    (intercept, slope, 1.0 - ss_res / ss_tot)
}

fn random_model(r: usize, n: usize, rng: &mut ChaCha8Rng) -> DaeModel {
    let s = 1.0 / (n as f64).sqrt();
    let mut g = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng));
    DaeModel {
        w1: g(r, n),
        w2: g(n, r),
        mapping: MappingFn::Linear,
        lambda: 1.0,
        log: vec![],
        clamp_count: 0,
        converged: true,
    }
}

/// Median single-image denoising time for random models of each (r, N).
pub fn denoise_timing(shapes: &[(usize, usize)], repeats: usize, seed: u64) -> Result<TimingFit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(shapes.len());
    for &(r, n) in shapes {
        let model = random_model(r, n, &mut rng);
        let image = FrontalImage::from_pixels(n, 1, (0..n).map(|i| (i % 17) as f64 / 16.0).collect())?;
        denoise_image(&model, &image)?;
        let mut times: Vec<f64> = (0..repeats.max(1))
            .map(|_| {
                let t = Instant::now();
                let out = denoise_image(&model, &image);
                let ms = 1e3 * t.elapsed().as_secs_f64();
                out.map(|_| ms)
            })
            .collect::<std::result::Result<_, _>>()?;
        times.sort_by(f64::total_cmp);
        points.push(TimingPoint { r, n, rn: (r * n) as f64, ms: times[times.len() / 2] });
    }
    let x: Vec<f64> = points.iter().map(|p| p.rn).collect();
    let y: Vec<f64> = points.iter().map(|p| p.ms).collect();
    let (intercept_ms, slope_ms, r2) = linear_fit(&x, &y);
    Ok(TimingFit { points, intercept_ms, slope_ms, r2 })
}
