use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dike_core::io::config::RunConfig;
use dike_core::io::output;
use dike_core::io::pipeline::{OptimumReport, Pipeline};
use dike_core::io::synth::{write_synthetic, SynthSpec};
use dike_core::objectives::{evaluate_grid, expected_tradeoffs, ModelVersion};
use dike_core::{Error, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "dike", about = "Dike heightening under deep uncertainty", version = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Model version; defaults to the first configured one.
    #[arg(long = "version")]
    model_version: Option<ModelVersion>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal heightening for the point-value state of the world.
    Optimize(Common),
    /// Sample the states of the world and write them as CSV.
    Ensemble(Common),
    /// Fit the quadratic sea-level trend.
    FitSlr(Common),
    /// Bootstrap and calibrate the sea-level ensemble.
    CalibrateSlr(Common),
    /// Fit a GEV to annual maxima by maximum likelihood.
    FitGev(Common),
    /// Sample the GEV posterior.
    Mcmc(Common),
    /// Expected trade-offs, Pareto front and density histograms.
    Tradeoffs(Common),
    /// Solutions meeting each threshold set.
    Satisfice(Common),
    /// One-at-a-time and Sobol sensitivity analysis.
    Sensitivity(Common),
    /// Write a synthetic tide-gauge record and its ground truth.
    Synth(SynthArgs),
    /// Every stage for every configured model version.
    Run(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    DelfzijlLike,
    HeavyTail,
}

#[derive(Args)]
struct SynthArgs {
    /// Output CSV path; the truth goes to `<out>.truth.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Preset::DelfzijlLike)]
    preset: Preset,
    /// Full specification (JSON); overrides the preset and `--seed`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    years: Option<usize>,
    #[arg(long)]
    cadence_hours: Option<u32>,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = match (&c.config, c.seed) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(seed)) => RunConfig {
            model_versions: vec![ModelVersion::Baseline],
            ..RunConfig::with_seed(seed)
        },
        (None, None) => return Err(Error::config("a seed is required: pass --config or --seed")),
    };
    if let Some(seed) = c.seed {
        cfg.sampling.seed = seed;
    }
    if let Some(v) = c.model_version {
        cfg.model_versions = vec![v];
    }
    if let Some(out) = &c.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn version(cfg: &RunConfig) -> Result<ModelVersion> {
    cfg.model_versions
        .first()
        .copied()
        .ok_or_else(|| Error::config("no model version selected"))
}

fn stage(c: &Common, f: impl FnOnce(&mut Pipeline, ModelVersion) -> Result<Value>) -> Result<Value> {
    let cfg = load_config(c)?;
    let v = version(&cfg)?;
    let mut p = Pipeline::new(cfg)?;
    std::fs::create_dir_all(&p.out)?;
    f(&mut p, v)
}

fn synth(args: &SynthArgs) -> Result<Value> {
    let mut spec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        }
        None => match args.preset {
            Preset::DelfzijlLike => SynthSpec::delfzijl_like(args.seed),
            Preset::HeavyTail => SynthSpec::heavy_tail(args.seed),
        },
    };
    if let Some(y) = args.years {
        spec.years = y;
    }
    if let Some(h) = args.cadence_hours {
        spec.cadence_hours = h;
    }
    let truth = write_synthetic(&spec, &args.out)?;
    Ok(json!({ "record": args.out, "truth": truth }))
}

fn dispatch(command: &Command) -> Result<Value> {
    match command {
        Command::Optimize(c) => stage(c, |p, v| {
            let base = p.base_sow(v)?;
            let grid = p.config.grid()?;
            let records = evaluate_grid(&[base], &grid, v, p.config.horizon)?;
            let tradeoffs = expected_tradeoffs(&records, &grid)?;
            output::write_curve(
                &p.out.join(v.name()).join("cost_curve.csv"),
                &tradeoffs.heights,
                &tradeoffs.expected,
            )?;
            Ok(json!(OptimumReport {
                version: v,
                optimal_height_m: tradeoffs.optimal_height,
                expected: tradeoffs.expected[tradeoffs.optimal_index],
            }))
        }),
        Command::Ensemble(c) => stage(c, |p, v| {
            let sows = p.ensemble(v)?;
            let path = p.out.join(v.name()).join("sows.csv");
            output::write_sows(&path, &sows)?;
            Ok(json!({ "version": v, "n_sow": sows.len(), "path": path }))
        }),
        Command::FitSlr(c) => stage(c, |p, _| p.write_slr_fit()),
        Command::CalibrateSlr(c) => stage(c, |p, _| p.write_slr()),
        Command::FitGev(c) => stage(c, |p, _| p.write_gev_fit()),
        Command::Mcmc(c) => stage(c, |p, _| p.write_mcmc()),
        Command::Tradeoffs(c) => stage(c, |p, v| {
            let run = p.evaluate_version(v)?;
            p.write_tradeoffs(&run)
        }),
        Command::Satisfice(c) => stage(c, |p, v| {
            let run = p.evaluate_version(v)?;
            p.write_satisficing(&run)?;
            Ok(p.version_summary(&run)["satisficing"].take())
        }),
        Command::Sensitivity(c) => stage(c, |p, v| {
            let optimum = match p.config.sensitivity.height {
                Some(h) => h,
                None => p.evaluate_version(v)?.tradeoffs.optimal_height,
            };
            let run = p.sensitivity(v, optimum)?;
            p.write_sensitivity(v, &run)
        }),
        Command::Synth(args) => synth(args),
        Command::Run(c) => stage(c, |p, _| p.run()),
    }
}

fn threads(command: &Command) -> usize {
    match command {
        Command::Synth(_) => 0,
        Command::Optimize(c)
        | Command::Ensemble(c)
        | Command::FitSlr(c)
        | Command::CalibrateSlr(c)
        | Command::FitGev(c)
        | Command::Mcmc(c)
        | Command::Tradeoffs(c)
        | Command::Satisfice(c)
        | Command::Sensitivity(c)
        | Command::Run(c) => c.threads,
    }
}

fn execute(command: &Command) -> Result<Value> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads(command))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(command))
}

fn print(value: &Value) {
    match serde_json::to_string_pretty(value) {
        Ok(s) => println!("{s}"),
        Err(e) => eprintln!("error: {e}"),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .with_writer(std::io::stderr)
        .with_target(false)
        .init();
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(v) => {
            print(&v);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
