use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use sybilsim_core::config::load_config;
use sybilsim_core::experiments::{execute, ExperimentKind, ExperimentSpec, Network};

#[derive(Parser)]
#[command(name = "sybilsim", version, about = "Simulate proof-of-work Sybil defenses under churn and attack")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One configured simulation; writes a time series and per-iteration costs.
    Run(Common),
    /// Algorithmic against adversarial spend rate for every listed defense.
    Sweep(Common),
    /// Measure churn assumption constants for a network.
    Assumptions(Common),
    /// GMCom against CCom when the final join arrives 1/X after the previous one.
    GmcomFailure(Common),
    /// Spend-rate sweep over ToGCom and its heuristic variants.
    Heuristics(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Full grid: every power of two, 20 runs of 10^4 seconds.
    #[arg(long)]
    paper_scale: bool,
    /// Base seed; overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `experiment.output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add log2 columns to sweep output.
    #[arg(long)]
    emit_plot_data: bool,
}

fn build_spec(kind: ExperimentKind, args: &Common) -> anyhow::Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::new(kind, Network::Gnutella);
    if args.paper_scale {
        spec = spec.paper_scale();
    }
    if let Some(path) = &args.config {
        load_config(&mut spec, path).with_context(|| format!("reading {}", path.display()))?;
        if spec.kind != kind {
            bail!("config sets experiment.kind = {} but the command runs {}", spec.kind.name(), kind.name());
        }
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(out) = &args.out {
        spec.output_dir = out.clone();
    }
    spec.emit_plot_data |= args.emit_plot_data;
    spec.check()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Run(a) => (ExperimentKind::SingleRun, a),
        Command::Sweep(a) => (ExperimentKind::AvtSweep, a),
        Command::Assumptions(a) => (ExperimentKind::Assumptions, a),
        Command::GmcomFailure(a) => (ExperimentKind::GmcomFailure, a),
        Command::Heuristics(a) => (ExperimentKind::HeuristicSweep, a),
    };
    let result = build_spec(kind, args).and_then(|spec| Ok(execute(&spec)?));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
