use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use uav_coverage::analytic::{clamp_drift_events, evaluate};
use uav_coverage::montecarlo::simulate;
use uav_coverage::sweep::{figure_preset, run_sweep, write_csv, AntennaKind, Engine, Metric, SweepAxis, SweepSpec};
use uav_coverage::validate::validate;
use uav_coverage::{load_config, AssociationPolicy, LinkType, QuadratureSpec, SystemParams};

/// Coverage and handover probabilities of a mobile UAV user in a Poisson
/// cellular network, by numerical evaluation and by simulation.
#[derive(Parser)]
#[command(name = "uavcov", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value parameter file; missing keys take the default values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Monte Carlo episodes per point.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Relative tolerance of the outer integrals.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate coverage, handover and association probabilities.
    Analytic,
    /// Estimate the same probabilities by simulation.
    Simulate,
    /// Sweep one parameter and write CSV.
    Sweep(SweepArgs),
    /// Run a figure preset (fig2a, fig2b, fig3a, fig3b) and write CSV.
    Figure { id: String },
    /// Compare both engines; exits with status 1 if any gap is too large.
    Validate,
}

#[derive(Args)]
struct SweepArgs {
    /// lambda_b, beamwidth_deg, v, kappa, height_band or t_thresh.
    #[arg(long)]
    axis: String,
    /// Comma-separated values in configuration units.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "coverage,handover")]
    metrics: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "strongest_rss")]
    policies: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "directional")]
    antennas: Vec<String>,
    /// analytic, mc or both.
    #[arg(long, default_value = "analytic")]
    engine: String,
}

const DEFAULT_TRIALS: u64 = 100_000;
const DEFAULT_SWEEP_TRIALS: u64 = 10_000;

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let params = match &c.config {
        Some(path) => load_config(path).with_context(|| format!("loading {}", path.display()))?,
        None => SystemParams::default(),
    };
    let quad = match c.rel_tol {
        Some(rel_tol) => QuadratureSpec {
            rel_tol,
            ..QuadratureSpec::default()
        },
        None => QuadratureSpec::default(),
    };
    let mut out: Box<dyn Write> = match &c.output {
        Some(path) => Box::new(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?)),
        None => Box::new(io::stdout().lock()),
    };

    let code = match &cli.command {
        Command::Analytic => {
            let b = evaluate(&params, &quad)?;
            writeln!(out, "policy                 {}", params.policy.as_str())?;
            writeln!(out, "coverage               {:.6}", b.total)?;
            writeln!(out, "sir_coverage           {:.6}", b.sir_coverage)?;
            writeln!(out, "handover               {:.6}", b.handover_prob)?;
            writeln!(out, "association_los        {:.6}", b.association[LinkType::Los.index()])?;
            writeln!(out, "association_nlos       {:.6}", b.association[LinkType::Nlos.index()])?;
            writeln!(out, "void                   {:.6}", b.void_prob)?;
            if clamp_drift_events() > 0 {
                eprintln!("warning: {} probabilities were clamped into [0, 1]", clamp_drift_events());
            }
            ExitCode::SUCCESS
        }
        Command::Simulate => {
            let n = c.trials.unwrap_or(DEFAULT_TRIALS);
            let s = simulate(&params, n, c.seed)?;
            writeln!(out, "policy {}  trials {n}  seed {}", params.policy.as_str(), c.seed)?;
            for (name, e) in [
                ("coverage", s.coverage()),
                ("sir_coverage", s.sir_coverage()),
                ("handover", s.handover()),
                ("association_los", s.association(LinkType::Los)),
                ("association_nlos", s.association(LinkType::Nlos)),
                ("void", s.void()),
            ] {
                writeln!(out, "{name:<22} {:.6}  [{:.6}, {:.6}]", e.mean, e.ci_low, e.ci_high)?;
            }
            ExitCode::SUCCESS
        }
        Command::Sweep(args) => {
            let spec = SweepSpec {
                axis: args.axis.parse()?,
                values: args.values.clone(),
                metrics: parse_all::<Metric>(&args.metrics)?,
                policies: parse_all::<AssociationPolicy>(&args.policies)?,
                antennas: parse_all::<AntennaKind>(&args.antennas)?,
                engine: args.engine.parse::<Engine>()?,
                trials: c.trials.unwrap_or(DEFAULT_SWEEP_TRIALS),
                seed: c.seed,
                fixed: Vec::<(SweepAxis, f64)>::new(),
            };
            let rows = run_sweep(&spec, &params, &quad)?;
            write_csv(&rows, &mut out)?;
            ExitCode::SUCCESS
        }
        Command::Figure { id } => {
            let mut rows = Vec::new();
            for spec in figure_preset(id, c.trials.unwrap_or(DEFAULT_SWEEP_TRIALS), c.seed)? {
                rows.extend(run_sweep(&spec, &params, &quad)?);
            }
            write_csv(&rows, &mut out)?;
            ExitCode::SUCCESS
        }
        Command::Validate => {
            let report = validate(&params, c.trials.unwrap_or(DEFAULT_TRIALS), c.seed, &quad)?;
            writeln!(out, "{report}")?;
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    };
    out.flush()?;
    Ok(code)
}

fn parse_all<T>(items: &[String]) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let mut out = Vec::with_capacity(items.len());
    for s in items {
        match s.trim().parse() {
            Ok(v) => out.push(v),
            Err(e) => bail!("{e}"),
        }
    }
    Ok(out)
}
