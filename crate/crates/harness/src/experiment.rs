//! Training and evaluation runs and the experiment report.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use throughwall::arraystore::{split_indices, Dataset, ExperimentConfig};
use throughwall::channel::TransferBank;
use throughwall::dae::{denoise_image, images_to_matrix, train, DaeModel, TrainConfig};
use throughwall::metrics::{compare, write_metric_csv, Condition, MetricRow, SsimParams};

use crate::channels::cached_bank;
use crate::synth::{frame_correlation, narrowband_dataset, wideband_dataset, FrameCorrelation, NarrowbandRequest, SpreadRow};
use crate::sweep::{SweepRow, TimingFit};
use crate::{HarnessError, Result, WallChoice};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub nmse: f64,
    pub ssim: f64,
}

impl MetricMeans {
    pub fn of_pairs(pairs: &[(f64, f64)]) -> Self {
        let n = pairs.len() as f64;
        Self {
            nmse: pairs.iter().map(|p| p.0).sum::<f64>() / n,
            ssim: pairs.iter().map(|p| p.1).sum::<f64>() / n,
        }
    }
}

/// Evaluation options shared by every scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub ssim: SsimParams,
    /// Scale both images to peak 1 before comparing.
    pub normalize: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { ssim: SsimParams::default(), normalize: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub walls: Vec<String>,
    pub aspects_deg: Vec<f64>,
    pub frames: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub bd: MetricMeans,
    pub ad: MetricMeans,
    pub train_seconds: f64,
    pub denoise_ms: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub objective_log: Vec<f64>,
    pub rows: Vec<MetricRow>,
}

/// Per-pair (NMSE, SSIM) of the corrupt images against the clean ones; no
/// model involved.
pub fn before_denoising(test: &Dataset, opts: &EvalOptions) -> Result<Vec<(f64, f64)>> {
    test.clean
        .iter()
        .zip(&test.corrupt)
        .map(|(c, y)| Ok(compare(c, y, &opts.ssim, opts.normalize)?))
        .collect()
}

/// Fail when a pair lands on both sides of the split.
pub fn audit_split(train: &[usize], test: &[usize], m: usize) -> Result<()> {
    let seen: HashSet<usize> = train.iter().copied().collect();
    if seen.len() != train.len() || test.iter().any(|i| seen.contains(i)) {
        return Err(HarnessError::Invalid("train and test pairs overlap".into()));
    }
    if train.len() + test.len() != m || train.iter().chain(test).any(|&i| i >= m) {
        return Err(HarnessError::Invalid("split does not cover the dataset".into()));
    }
    Ok(())
}

pub fn split(ds: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    ds.validate()?;
    let (tr, te) = split_indices(ds.len(), fraction, seed)?;
    audit_split(&tr, &te, ds.len())?;
    Ok((ds.select(&tr), ds.select(&te)))
}

pub fn train_on(train_set: &Dataset, cfg: &TrainConfig) -> Result<(DaeModel, f64)> {
    let y = images_to_matrix(&train_set.clean)?;
    let yhat = images_to_matrix(&train_set.corrupt)?;
    let t = Instant::now();
    let model = train(&y, &yhat, cfg)?;
    Ok((model, t.elapsed().as_secs_f64()))
}

/// Denoise every test pair; returns per-pair (NMSE, SSIM) after denoising
/// and the mean denoising time per image in ms.
pub fn after_denoising(model: &DaeModel, test: &Dataset, opts: &EvalOptions) -> Result<(Vec<(f64, f64)>, f64)> {
    let mut out = Vec::with_capacity(test.len());
    let mut secs = 0.0;
    for (c, y) in test.clean.iter().zip(&test.corrupt) {
        let t = Instant::now();
        let d = denoise_image(model, y)?;
        secs += t.elapsed().as_secs_f64();
        out.push(compare(c, &d, &opts.ssim, opts.normalize)?);
    }
    Ok((out, 1e3 * secs / test.len().max(1) as f64))
}

/// Split, train, and score BD and AD on the same test pairs.
pub fn run_scenario(
    name: &str,
    ds: &Dataset,
    fraction: f64,
    seed: u64,
    cfg: &TrainConfig,
    opts: &EvalOptions,
) -> Result<(ScenarioResult, DaeModel)> {
    let (train_set, test_set) = split(ds, fraction, seed)?;
    let bd = before_denoising(&test_set, opts)?;
    let (model, train_seconds) = train_on(&train_set, cfg)?;
    let (ad, denoise_ms) = after_denoising(&model, &test_set, opts)?;
    let mut rows = Vec::with_capacity(2 * test_set.len());
    for (i, label) in test_set.labels.iter().enumerate() {
        for (cond, v) in [(Condition::Before, bd[i]), (Condition::After, ad[i])] {
            rows.push(MetricRow { pair: i, wall: label.wall.clone(), condition: cond, nmse: v.0, ssim: v.1 });
        }
    }
    let mut walls: Vec<String> = ds.labels.iter().map(|l| l.wall.clone()).collect();
    walls.sort();
    walls.dedup();
    let mut aspects: Vec<f64> = Vec::new();
    for l in &ds.labels {
        if !aspects.contains(&l.aspect_deg) {
            aspects.push(l.aspect_deg);
        }
    }
    let frames = ds.labels.iter().map(|l| l.frame + 1).max().unwrap_or(0);
    let result = ScenarioResult {
        name: name.to_string(),
        walls,
        aspects_deg: aspects,
        frames,
        n_train: train_set.len(),
        n_test: test_set.len(),
        bd: MetricMeans::of_pairs(&bd),
        ad: MetricMeans::of_pairs(&ad),
        train_seconds,
        denoise_ms,
        sweeps: model.sweeps(),
        converged: model.converged,
        objective_log: model.log.clone(),
        rows,
    };
    Ok((result, model))
}

/// Wall of the aspect-angle scenarios.
pub const ASPECT_WALL: WallChoice = WallChoice::Reinforced;

/// Frame counts of the group correlation curve.
pub const FRAME_COUNTS: [usize; 6] = [2, 5, 10, 15, 20, 30];

/// Which scenarios of the experiment matrix to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioSet {
    /// One scenario per narrowband wall type.
    SameWall,
    /// All narrowband walls pooled, no wall labels at test time.
    MixedWall,
    /// Each aspect angle alone and all of them pooled.
    Aspect,
    /// Glass, wood and both pooled.
    Wideband,
    All,
}

impl ScenarioSet {
    fn has(self, other: ScenarioSet) -> bool {
        self == ScenarioSet::All || self == other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub eval: EvalOptions,
    pub scenarios: Vec<ScenarioResult>,
    pub doppler_spread: Vec<SpreadRow>,
    pub sweep: Vec<SweepRow>,
    pub timing: Option<TimingFit>,
    #[serde(default)]
    pub frame_correlation: Vec<FrameCorrelation>,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig, eval: &EvalOptions) -> Self {
        Self {
            config: config.clone(),
            eval: eval.clone(),
            scenarios: Vec::new(),
            doppler_spread: Vec::new(),
            sweep: Vec::new(),
            timing: None,
            frame_correlation: Vec::new(),
        }
    }

    pub fn scenario(&self, name: &str) -> Option<&ScenarioResult> {
        self.scenarios.iter().find(|s| s.name == name)
    }

    /// One line per scenario.
    pub fn summary_text(&self) -> String {
        let mut s = format!(
            "{:<22} {:>6} {:>6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "scenario", "train", "test", "BD nmse", "AD nmse", "BD ssim", "AD ssim", "train s", "ms/img"
        );
        for r in &self.scenarios {
            s += &format!(
                "{:<22} {:>6} {:>6} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>9.2} {:>9.3}\n",
                r.name, r.n_train, r.n_test, r.bd.nmse, r.ad.nmse, r.bd.ssim, r.ad.ssim, r.train_seconds, r.denoise_ms
            );
        }
        for d in &self.doppler_spread {
            s += &format!("doppler spread {} {:>5.0} deg: {:.1} Hz\n", d.wall, d.aspect_deg, d.doppler_spread_hz);
        }
        for c in &self.frame_correlation {
            s += &format!("group correlation over {:>2} frames: {:.3}\n", c.frames, c.group_correlation);
        }
        if let Some(t) = &self.timing {
            s += &format!("denoise time vs r*N: slope {:.3e} ms, R^2 {:.4}\n", t.slope_ms, t.r2);
        }
        s
    }

    /// `report.json`, `summary.csv`, `summary.txt`, one metric and one
    /// objective CSV per scenario, and the Doppler spread, frame
    /// correlation, sweep and timing CSVs when present.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        std::fs::write(dir.join("summary.txt"), self.summary_text())?;
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        w.write_record([
            "scenario", "walls", "aspects_deg", "frames", "n_train", "n_test", "bd_nmse", "ad_nmse", "bd_ssim", "ad_ssim",
            "train_s", "denoise_ms", "sweeps",
        ])?;
        for r in &self.scenarios {
            let aspects: Vec<String> = r.aspects_deg.iter().map(|a| a.to_string()).collect();
            w.write_record([
                r.name.clone(),
                r.walls.join("+"),
                aspects.join("+"),
                r.frames.to_string(),
                r.n_train.to_string(),
                r.n_test.to_string(),
                r.bd.nmse.to_string(),
                r.ad.nmse.to_string(),
                r.bd.ssim.to_string(),
                r.ad.ssim.to_string(),
                r.train_seconds.to_string(),
                r.denoise_ms.to_string(),
                r.sweeps.to_string(),
            ])?;
        }
        w.flush()?;
        for r in &self.scenarios {
            let f = std::fs::File::create(dir.join(format!("metrics_{}.csv", r.name)))?;
            write_metric_csv(f, &r.rows)?;
            let mut f = std::fs::File::create(dir.join(format!("objective_{}.csv", r.name)))?;
            writeln!(f, "sweep,objective")?;
            for (i, v) in r.objective_log.iter().enumerate() {
                writeln!(f, "{i},{v}")?;
            }
        }
        if !self.doppler_spread.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("doppler_spread.csv"))?;
            self.doppler_spread.iter().try_for_each(|r| w.serialize(r))?;
            w.flush()?;
        }
        if !self.sweep.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
            self.sweep.iter().try_for_each(|r| w.serialize(r))?;
            w.flush()?;
        }
        if !self.frame_correlation.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("frame_correlation.csv"))?;
            self.frame_correlation.iter().try_for_each(|r| w.serialize(r))?;
            w.flush()?;
        }
        if let Some(t) = &self.timing {
            let mut w = csv::Writer::from_path(dir.join("timing.csv"))?;
            t.points.iter().try_for_each(|r| w.serialize(r))?;
            w.flush()?;
        }
        Ok(())
    }
}

/// Narrowband pair sets for the requested walls and aspects, using cached
/// channel banks.
pub struct NarrowbandSets {
    pub sets: Vec<(NarrowbandRequest, Dataset)>,
    pub spread: Vec<SpreadRow>,
}

pub fn narrowband_sets(
    cfg: &ExperimentConfig,
    requests: &[NarrowbandRequest],
    progress: &mut dyn FnMut(&str),
) -> Result<NarrowbandSets> {
    let clean = cached_bank(cfg, WallChoice::None, progress)?;
    let mut banks: Vec<(WallChoice, TransferBank)> = Vec::new();
    let mut out = NarrowbandSets { sets: Vec::new(), spread: Vec::new() };
    for req in requests {
        if !banks.iter().any(|b| b.0 == req.wall) {
            banks.push((req.wall, cached_bank(cfg, req.wall, progress)?));
        }
        let bank = &banks.iter().find(|b| b.0 == req.wall).expect("just loaded").1;
        let t = Instant::now();
        let (ds, spread) = narrowband_dataset(cfg, req, &clean, bank)?;
        progress(&format!(
            "synthesised {} pairs ({}, aspect {} deg) in {:.1} s",
            ds.len(),
            req.wall.name(),
            req.aspect_deg,
            t.elapsed().as_secs_f64()
        ));
        out.sets.push((req.clone(), ds));
        out.spread.push(spread);
    }
    Ok(out)
}

fn run_logged(
    name: &str,
    ds: &Dataset,
    tc: &TrainConfig,
    cfg: &ExperimentConfig,
    opts: &EvalOptions,
    report: &mut ExperimentReport,
    progress: &mut dyn FnMut(&str),
) -> Result<()> {
    let (r, _) = run_scenario(name, ds, cfg.split_fraction, cfg.seed, tc, opts)?;
    progress(&format!(
        "{name}: SSIM {:.3} -> {:.3}, NMSE {:.4} -> {:.4} ({} train / {} test, {:.1} s)",
        r.bd.ssim, r.ad.ssim, r.bd.nmse, r.ad.nmse, r.n_train, r.n_test, r.train_seconds
    ));
    report.scenarios.push(r);
    Ok(())
}

/// The scenario matrix: same-wall per wall type, mixed walls, per-aspect
/// and pooled aspects, and the wideband walls.
pub fn run_matrix(
    cfg: &ExperimentConfig,
    which: ScenarioSet,
    frames: usize,
    opts: &EvalOptions,
    progress: &mut dyn FnMut(&str),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut report = ExperimentReport::new(cfg, opts);
    let nb = &cfg.narrowband;
    let req = |wall: WallChoice, aspect_deg: f64| NarrowbandRequest {
        wall,
        aspect_deg,
        frames,
        realizations: nb.realizations,
    };
    let mut requests = Vec::new();
    if which.has(ScenarioSet::SameWall) || which.has(ScenarioSet::MixedWall) {
        requests.extend(WallChoice::NARROWBAND.iter().map(|&w| req(w, 0.0)));
    }
    if which.has(ScenarioSet::Aspect) {
        for &a in &nb.aspects_deg {
            let r = req(ASPECT_WALL, a);
            if !requests.contains(&r) {
                requests.push(r);
            }
        }
    }
    let sets = narrowband_sets(cfg, &requests, progress)?;
    report.doppler_spread = sets.spread.clone();
    let find = |wall: WallChoice, aspect: f64| -> &Dataset {
        &sets.sets.iter().find(|(r, _)| r.wall == wall && r.aspect_deg == aspect).expect("requested").1
    };

    if which.has(ScenarioSet::SameWall) {
        let clean = cached_bank(cfg, WallChoice::None, progress)?;
        report.frame_correlation = frame_correlation(cfg, &clean, &FRAME_COUNTS)?;
        for &w in &WallChoice::NARROWBAND {
            run_logged(&format!("same-wall-{}", w.name()), find(w, 0.0), &cfg.train, cfg, opts, &mut report, progress)?;
        }
    }
    if which.has(ScenarioSet::MixedWall) {
        let parts: Vec<&Dataset> = WallChoice::NARROWBAND.iter().map(|&w| find(w, 0.0)).collect();
        run_logged("mixed-wall", &Dataset::concat(&parts), &cfg.train, cfg, opts, &mut report, progress)?;
    }
    if which.has(ScenarioSet::Aspect) {
        for &a in &nb.aspects_deg {
            run_logged(&format!("aspect-{a}"), find(ASPECT_WALL, a), &cfg.train, cfg, opts, &mut report, progress)?;
        }
        let parts: Vec<&Dataset> = nb.aspects_deg.iter().map(|&a| find(ASPECT_WALL, a)).collect();
        run_logged("aspect-pooled", &Dataset::concat(&parts), &cfg.train, cfg, opts, &mut report, progress)?;
    }
    if which.has(ScenarioSet::Wideband) {
        let mut parts = Vec::new();
        for &w in &WallChoice::WIDEBAND {
            let ds = wideband_dataset(cfg, w)?;
            run_logged(&format!("wideband-{}", w.name()), &ds, &cfg.train_wideband, cfg, opts, &mut report, progress)?;
            parts.push(ds);
        }
        let refs: Vec<&Dataset> = parts.iter().collect();
        run_logged("wideband-mixed", &Dataset::concat(&refs), &cfg.train_wideband, cfg, opts, &mut report, progress)?;
    }
    Ok(report)
}
