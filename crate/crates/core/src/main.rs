use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rmt_anomaly::harness::record::{emit_plotdata, Experiment, ExperimentRecord};
use rmt_anomaly::harness::{run_fig1, run_fig2, run_quench_sweep, Mode, Overrides, RunConfig};
use rmt_anomaly::spectral::{kubo_diffusion, DrivingSpec};
use rmt_anomaly::{Error, Result};

#[derive(Parser)]
#[command(version, about = "Energy spreading in driven random-matrix models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Driven and frozen spreading curves
    Fig1(RunArgs),
    /// Diffusion coefficients versus driving strength
    Fig2(RunArgs),
    /// Spreading after a sudden constant perturbation
    Quench(RunArgs),
    /// Evaluate the Kubo diffusion integral
    Kubo(KuboArgs),
    /// Write plot series from a stored record
    Emit(EmitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Driven,
    Frozen,
    Quench,
    All,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    s0: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    fdot: Option<Vec<f64>>,
    /// Quench strengths
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    band: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args)]
struct KuboArgs {
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    omega0: f64,
    #[arg(long, default_value_t = 50.0)]
    omega_cl: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Fig1,
    Fig2,
}

#[derive(Args)]
struct EmitArgs {
    /// record.json written by fig1 or fig2
    #[arg(long)]
    record: PathBuf,
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long)]
    out: PathBuf,
}

fn resolve(args: &RunArgs, defaults: RunConfig) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => defaults,
    };
    Overrides {
        seed: args.seed,
        workers: args.workers,
        out: args.out.clone(),
        s0: args.s0.clone(),
        fdot: args.fdot.clone(),
        eps: args.eps.clone(),
        n: args.n,
        band: args.band,
        realizations: args.realizations,
        mode: args.mode.map(|m| match m {
            ModeArg::Driven => Mode::Driven,
            ModeArg::Frozen => Mode::Frozen,
            ModeArg::Quench => Mode::Quench,
            ModeArg::All => Mode::All,
        }),
    }
    .apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn finish(record: ExperimentRecord) -> Result<ExitCode> {
    let dir = record.config.output_dir.clone();
    record.write(&dir)?;
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    for f in &record.failures {
        eprintln!(
            "flagged: {} s0={} fdot={} realization {}: {}",
            f.mode.as_str(),
            f.s0,
            f.fdot,
            f.realization,
            f.message
        );
    }
    println!(
        "{}: {} curves, {} estimates written to {} in {:.1} s",
        record.experiment.as_str(),
        record.curves.len(),
        record.estimates.len(),
        dir.display(),
        record.wall_clock_seconds
    );
    if record.is_complete() {
        Ok(ExitCode::SUCCESS)
    } else {
        for p in &record.failed_points {
            eprintln!("failed: {p}");
        }
        Ok(ExitCode::from(3))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fig1(a) => finish(run_fig1(&resolve(&a, RunConfig::default())?)?),
        Command::Fig2(a) => finish(run_fig2(&resolve(&a, RunConfig::fig2_defaults())?)?),
        Command::Quench(a) => {
            let defaults = RunConfig {
                mode: Mode::Quench,
                ..RunConfig::default()
            };
            finish(run_quench_sweep(&resolve(&a, defaults)?)?)
        }
        Command::Kubo(a) => {
            let spec = DrivingSpec::from_gamma(a.eps, a.sigma, a.gamma)?;
            let r = kubo_diffusion(a.s0, &spec, a.omega0, a.omega_cl)?;
            let out = serde_json::json!({
                "s0": a.s0,
                "eps": a.eps,
                "sigma": a.sigma,
                "gamma": a.gamma,
                "omega0": a.omega0,
                "omega_cl": a.omega_cl,
                "D": r.diffusion,
                "quadrature_error": r.quadrature_error,
            });
            println!("{}", serde_json::to_string_pretty(&out).map_err(Error::from)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Emit(a) => {
            let record = ExperimentRecord::load(&a.record)?;
            let which = match a.which {
                Which::Fig1 => Experiment::Fig1,
                Which::Fig2 => Experiment::Fig2,
            };
            for f in emit_plotdata(&record, which, &a.out)? {
                println!("{}", f.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
