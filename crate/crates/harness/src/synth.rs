//! Paired clean / through-wall image sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use throughwall::arraystore::{Dataset, ExperimentConfig, NarrowbandConfig, PairLabel};
use throughwall::channel::TransferBank;
use throughwall::image::FrontalImage;
use throughwall::metrics::group_correlation;
use throughwall::radarsim::{
    doppler_frontal_image, doppler_spectrum, range_frontal_image, stepped_frequencies, synth_narrowband, synth_wideband,
    ImagingParams, Propagation,
};
use throughwall::target::{apply_aspect, static_pose, synth_walk, ScattererTrack, SubjectParams, WalkParams};

use crate::{HarnessError, Result, WallChoice};

/// Derive an independent seed from a base seed and a list of tags
/// (splitmix64 finaliser).
pub fn mix_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut h = seed;
    for &t in tags {
        h = h.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(t.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

fn wall_tag(wall: WallChoice) -> u64 {
    wall as u64 + 1
}

/// Scatterer windows for frames `0..frames`. Frame `f` is dwell `f % d` of
/// stride `f / d`, where `d` dwells fit in one simulated stride; every
/// stride starts from the base gait phase plus a uniform jitter.
pub fn walk_frames(cfg: &NarrowbandConfig, frames: usize, aspect_deg: f64, seed: u64) -> Result<Vec<ScattererTrack>> {
    let cpi = cfg.imaging.cpi;
    let probe = synth_walk(&cfg.walk)?;
    let per_stride = probe.n_samples / cpi.max(1);
    if cpi == 0 || per_stride == 0 {
        return Err(HarnessError::Invalid(format!("dwell of {cpi} samples in a {}-sample stride", probe.n_samples)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[0x57a1d]));
    let mut out = Vec::with_capacity(frames);
    let mut stride: Option<ScattererTrack> = None;
    for f in 0..frames {
        if f % per_stride == 0 {
            let jitter = if cfg.phase_jitter > 0.0 { rng.gen_range(-cfg.phase_jitter..=cfg.phase_jitter) } else { 0.0 };
            let walk = WalkParams { phase: cfg.walk.phase + jitter, ..cfg.walk.clone() };
            stride = Some(apply_aspect(&synth_walk(&walk)?, aspect_deg));
        }
        let track = stride.as_ref().expect("set on the first frame");
        out.push(track.window((f % per_stride) * cpi, cpi));
    }
    Ok(out)
}

fn doppler_image(track: &ScattererTrack, cfg: &NarrowbandConfig, prop: &Propagation) -> Result<FrontalImage> {
    let cube = synth_narrowband(track, &cfg.array, prop)?;
    let params = ImagingParams { cpi: track.n_samples, ..cfg.imaging.clone() };
    let mut images = doppler_frontal_image(&cube, &params)?;
    Ok(images.remove(0))
}

/// RMS Doppler frequency (Hz) of the returns, zero bin excluded.
pub fn doppler_spread(track: &ScattererTrack, cfg: &NarrowbandConfig, prop: &Propagation) -> Result<f64> {
    let cube = synth_narrowband(track, &cfg.array, prop)?;
    let spec = doppler_spectrum(&cube, 0, cube.n_samples, (cube.n_az(), cube.n_el()))?;
    let (mut p, mut pf2) = (0.0, 0.0);
    for q in 1..spec.n_doppler {
        let e: f64 = spec.bin(q).iter().map(|v| v.norm_sqr()).sum();
        p += e;
        pf2 += e * spec.doppler_hz(q).powi(2);
    }
    Ok(if p > 0.0 { (pf2 / p).sqrt() } else { 0.0 })
}

/// Request for one narrowband pair set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NarrowbandRequest {
    pub wall: WallChoice,
    pub aspect_deg: f64,
    pub frames: usize,
    pub realizations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadRow {
    pub wall: String,
    pub aspect_deg: f64,
    /// Mean over frames of the clean-scene RMS Doppler.
    pub doppler_spread_hz: f64,
}

/// `frames x realizations` pairs: each frame imaged through the free-space
/// bank (clean) and through sampled realisations of the wall bank.
pub fn narrowband_dataset(
    cfg: &ExperimentConfig,
    req: &NarrowbandRequest,
    clean: &TransferBank,
    wall: &TransferBank,
) -> Result<(Dataset, SpreadRow)> {
    let nb = &cfg.narrowband;
    let tracks = walk_frames(nb, req.frames, req.aspect_deg, cfg.seed)?;
    let clean_field = clean.ratio_field(&clean.mean)?;
    let clean_prop = Propagation::Channel(&clean_field);
    let mut clean_images = Vec::with_capacity(tracks.len());
    let mut spread = 0.0;
    for t in &tracks {
        clean_images.push(doppler_image(t, nb, &clean_prop)?);
        spread += doppler_spread(t, nb, &clean_prop)? / tracks.len() as f64;
    }
    let mut ds = Dataset::default();
    let aspect_tag = (req.aspect_deg * 1000.0).round() as i64 as u64;
    for eta in 0..req.realizations {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[wall_tag(req.wall), aspect_tag, eta as u64]));
        let realization = wall.sample(eta, &mut rng, nb.sample_mode);
        let field = wall.ratio_field(&realization.values)?;
        let prop = Propagation::Channel(&field);
        for (f, t) in tracks.iter().enumerate() {
            let corrupt = doppler_image(t, nb, &prop)?;
            let label = PairLabel { wall: req.wall.name().into(), aspect_deg: req.aspect_deg, frame: f, eta };
            ds.push(clean_images[f].clone(), corrupt, label);
        }
    }
    let row = SpreadRow { wall: req.wall.name().into(), aspect_deg: req.aspect_deg, doppler_spread_hz: spread };
    Ok((ds, row))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameCorrelation {
    pub frames: usize,
    pub group_correlation: f64,
}

/// Group correlation of the first `k` clean frames for each `k` in
/// `counts` (counts below 2 are skipped).
pub fn frame_correlation(cfg: &ExperimentConfig, clean: &TransferBank, counts: &[usize]) -> Result<Vec<FrameCorrelation>> {
    let nb = &cfg.narrowband;
    let most = counts.iter().copied().max().unwrap_or(0);
    let field = clean.ratio_field(&clean.mean)?;
    let prop = Propagation::Channel(&field);
    let images = walk_frames(nb, most, 0.0, cfg.seed)?
        .iter()
        .map(|t| doppler_image(t, nb, &prop))
        .collect::<Result<Vec<_>>>()?;
    counts
        .iter()
        .filter(|&&k| k >= 2)
        .map(|&k| Ok(FrameCorrelation { frames: k, group_correlation: group_correlation(&images[..k])? }))
        .collect()
}

/// Subjects x measurements pairs of static poses at random orientations,
/// imaged in free space (clean) and through the slab wall.
pub fn wideband_dataset(cfg: &ExperimentConfig, wall: WallChoice) -> Result<Dataset> {
    let wb = &cfg.wideband;
    let slab = wall
        .slab(wb)?
        .ok_or_else(|| HarnessError::Invalid("the wideband set needs a glass or wood wall".into()))?;
    let freqs = stepped_frequencies(wb.f_start, wb.f_stop, wb.n_freqs);
    // orientations are shared by both walls: the same sessions behind
    // different walls
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, &[0x0b1e]));
    let span = wb.orientation_span_deg;
    let mut ds = Dataset::default();
    for (s, subject) in SubjectParams::roster().iter().enumerate() {
        for j in 0..wb.measurements_per_subject {
            let orientation = if span > 0.0 { rng.gen_range(-span..=span) } else { 0.0 };
            let pose = static_pose(subject, orientation)?;
            let clean = range_frontal_image(&synth_wideband(&pose, &wb.array, &freqs, None)?, &wb.imaging)?;
            let corrupt = range_frontal_image(&synth_wideband(&pose, &wb.array, &freqs, Some(&slab))?, &wb.imaging)?;
            let label = PairLabel { wall: wall.name().into(), aspect_deg: orientation, frame: s, eta: j };
            ds.push(clean, corrupt, label);
        }
    }
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_seeds_are_stable_and_distinct() {
        assert_eq!(mix_seed(7, &[1, 2]), mix_seed(7, &[1, 2]));
        let seeds = [mix_seed(7, &[1, 2]), mix_seed(7, &[2, 1]), mix_seed(8, &[1, 2]), mix_seed(7, &[1]), mix_seed(7, &[])];
        for i in 0..seeds.len() {
            for j in i + 1..seeds.len() {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }

    #[test]
    fn frames_are_consecutive_dwells_of_a_stride() {
        let cfg = NarrowbandConfig::default();
        let cpi = cfg.imaging.cpi;
        let a = walk_frames(&cfg, 10, 0.0, 3).unwrap();
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|t| t.n_samples == cpi));
        assert_eq!(a, walk_frames(&cfg, 10, 0.0, 3).unwrap());
        // the end of frame 0 runs into the start of frame 1
        let last = a[0].positions[cpi - 1];
        let next = a[1].positions[0];
        let step = ((last[0] - next[0]).powi(2) + (last[1] - next[1]).powi(2) + (last[2] - next[2]).powi(2)).sqrt();
        assert!(step < 0.05, "{step}");
        assert_ne!(a, walk_frames(&cfg, 10, 0.0, 4).unwrap());
    }
}
