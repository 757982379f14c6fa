use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use throughwall::arraystore::{load_dataset, save_dataset, split_dataset, read_image, write_image, ExperimentConfig};
use throughwall::dae::{denoise_image, DaeModel, MappingFn};
use twharness::channels::{cached_bank, generate_bank, save_bank, sigma_oracle, OracleConfig};
use twharness::experiment::{
    after_denoising, before_denoising, narrowband_sets, run_matrix, run_scenario, EvalOptions, ExperimentReport,
    MetricMeans, ScenarioSet,
};
use twharness::synth::{wideband_dataset, NarrowbandRequest};
use twharness::sweep::{denoise_timing, sweep, SWEEP_NODES};
use twharness::{HarnessError, Result, WallChoice};

#[derive(Parser)]
#[command(name = "throughwall", about = "Through-wall radar imaging experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Compare images as they are instead of scaling both to peak 1.
    #[arg(long, global = true)]
    no_normalize: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    MonteCarlo,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate (or refresh) the transfer bank of a wall.
    Channel {
        #[arg(long, value_enum, default_value = "dielectric")]
        wall: WallChoice,
        /// Compare the sFDTD deviation field against a Monte-Carlo ensemble instead.
        #[arg(long, value_enum)]
        oracle: Option<Oracle>,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        /// Re-simulate even when a matching bank is cached.
        #[arg(long)]
        force: bool,
    },
    /// Synthesise a paired clean / through-wall dataset.
    Synth {
        #[arg(long, value_enum, default_value = "dielectric")]
        wall: WallChoice,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        aspect: f64,
    },
    /// Train a model on the training split of a dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        wideband: bool,
    },
    /// Run scenarios end to end and write the report.
    Eval {
        #[arg(long, value_enum, default_value = "all")]
        scenario: ScenarioSet,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Denoise one image file with a trained model.
    Denoise {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Hidden-size and mapping sweep on a dataset, plus denoising timing.
    Sweep {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        wideband: bool,
    },
    /// Score a saved model on the test split of a dataset.
    Report {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
}

fn log(msg: &str) {
    eprintln!("{msg}");
}

fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.channel_dir = o.join("channels");
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    let opts = EvalOptions { normalize: !cli.common.no_normalize, ..EvalOptions::default() };
    let out = cfg.output_dir.clone();
    match cli.cmd {
        Cmd::Channel { wall, oracle: Some(Oracle::MonteCarlo), runs, .. } => {
            if wall != WallChoice::Dielectric {
                return Err(HarnessError::Invalid("the Monte-Carlo check uses the dielectric wall".into()));
            }
            let oc = OracleConfig { runs, seed: cfg.seed, ..OracleConfig::default() };
            let rep = sigma_oracle(&oc)?;
            println!(
                "correlation {:.3}, ratio [{:.3}, {:.3}] median {:.3}, sFDTD {:.0} s, Monte-Carlo {:.0} s",
                rep.correlation, rep.ratio_min, rep.ratio_max, rep.ratio_median, rep.sfdtd_seconds, rep.mc_seconds
            );
            std::fs::create_dir_all(&out)?;
            std::fs::write(out.join("sigma_oracle.json"), serde_json::to_string_pretty(&rep)?)?;
        }
        Cmd::Channel { wall, force, .. } => {
            wall.fdtd_wall()?;
            let dir = cfg.channel_dir.join(wall.name());
            if force {
                let (bank, geometry) = generate_bank(&cfg, wall, &mut log)?;
                save_bank(&dir, &bank, &geometry)?;
            } else {
                cached_bank(&cfg, wall, &mut log)?;
            }
            println!("{}", dir.display());
        }
        Cmd::Synth { wall, frames, aspect } => {
            let ds = if wall.is_wideband() {
                wideband_dataset(&cfg, wall)?
            } else {
                let req = NarrowbandRequest {
                    wall,
                    aspect_deg: aspect,
                    frames: frames.unwrap_or(cfg.narrowband.frames),
                    realizations: cfg.narrowband.realizations,
                };
                let sets = narrowband_sets(&cfg, &[req], &mut log)?;
                for s in &sets.spread {
                    println!("doppler spread {:.1} Hz at aspect {} deg", s.doppler_spread_hz, s.aspect_deg);
                }
                sets.sets.into_iter().next().expect("one request").1
            };
            let dir = out.join("datasets").join(format!("{}_{aspect}", wall.name()));
            save_dataset(&dir, &ds)?;
            println!("{} pairs in {}", ds.len(), dir.display());
        }
        Cmd::Train { dataset, wideband } => {
            let ds = load_dataset(&dataset)?;
            let tc = if wideband { &cfg.train_wideband } else { &cfg.train };
            let (res, model) = run_scenario("train", &ds, cfg.split_fraction, cfg.seed, tc, &opts)?;
            let dir = out.join("model");
            model.save(&dir)?;
            let mut report = ExperimentReport::new(&cfg, &opts);
            report.scenarios.push(res);
            report.write(&out)?;
            print!("{}", report.summary_text());
        }
        Cmd::Eval { scenario, frames } => {
            let report = run_matrix(&cfg, scenario, frames.unwrap_or(cfg.narrowband.frames), &opts, &mut log)?;
            report.write(&out)?;
            print!("{}", report.summary_text());
        }
        Cmd::Denoise { model, input, output } => {
            let model = DaeModel::load(&model)?;
            let im = read_image(&input)?;
            write_image(&output, &denoise_image(&model, &im)?)?;
        }
        Cmd::Sweep { dataset, wideband } => {
            let ds = load_dataset(&dataset)?;
            let tc = if wideband { &cfg.train_wideband } else { &cfg.train };
            let mut report = ExperimentReport::new(&cfg, &opts);
            report.sweep = sweep(&ds, cfg.split_fraction, cfg.seed, tc, &SWEEP_NODES, &MappingFn::ALL, &opts, &mut log)?;
            report.timing = Some(denoise_timing(&[(500, 8464), (1500, 3367), (1500, 8464)], 21, cfg.seed)?);
            report.write(&out)?;
            print!("{}", report.summary_text());
        }
        Cmd::Report { dataset, model } => {
            let ds = load_dataset(&dataset)?;
            let model = DaeModel::load(&model)?;
            let (_, test) = split_dataset(&ds, cfg.split_fraction, cfg.seed)?;
            let bd = MetricMeans::of_pairs(&before_denoising(&test, &opts)?);
            let (ad, ms) = after_denoising(&model, &test, &opts)?;
            let ad = MetricMeans::of_pairs(&ad);
            println!(
                "{} test pairs: SSIM {:.4} -> {:.4}, NMSE {:.4} -> {:.4}, {ms:.2} ms per image",
                test.len(),
                bd.ssim,
                ad.ssim,
                bd.nmse,
                ad.nmse
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
