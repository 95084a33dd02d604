use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pileup_cli::{plot, run, Mode, RunConfig, RunOptions};

/// Discrete and continuum minimizers with theorem checks.
#[derive(Parser)]
#[command(name = "riesz-pileup", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    SolveDiscrete(RunArgs),
    SolveContinuum(RunArgs),
    Verify(RunArgs),
    Robin(RunArgs),
    Sweep(RunArgs),
    CheckAssumptions(RunArgs),
    AppendixCheck(RunArgs),
    /// Plot-ready CSVs from a finished run directory.
    PlotData {
        run_dir: PathBuf,
        /// Defaults to RUN_DIR/plots.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config, or a manifest from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overrides the config.
    #[arg(long)]
    workers: Option<usize>,
    /// Reserved; every mode is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RIESZ_PILEUP_LOG", "warn")).init();
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::PlotData { run_dir, out } => {
            return match plot::plot_data(&run_dir, out.as_deref()) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            };
        }
        Command::SolveDiscrete(a) => (Mode::SolveDiscrete, a),
        Command::SolveContinuum(a) => (Mode::SolveContinuum, a),
        Command::Verify(a) => (Mode::Verify, a),
        Command::Robin(a) => (Mode::Robin, a),
        Command::Sweep(a) => (Mode::Sweep, a),
        Command::CheckAssumptions(a) => (Mode::CheckAssumptions, a),
        Command::AppendixCheck(a) => (Mode::AppendixCheck, a),
    };

    let cfg = match &args.config {
        Some(p) => RunConfig::load(p),
        None if mode == Mode::AppendixCheck => RunConfig::from_json("{}"),
        None => {
            eprintln!("error: --config is required for {mode}");
            return ExitCode::from(3);
        }
    };
    let cfg = match cfg.and_then(|c| c.validate(mode).map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    };
    let Some(out) = args.out.clone().or_else(|| cfg.output.clone()) else {
        eprintln!("error: no output directory; pass --out or set `output`");
        return ExitCode::from(3);
    };
    if args.workers == Some(0) {
        eprintln!("error: --workers must be at least 1");
        return ExitCode::from(3);
    }
    let workers = args.workers.or(cfg.workers).unwrap_or(1);
    let opts = RunOptions { mode, out, workers, seed: args.seed };
    match run(&cfg, &opts) {
        Ok(s) => {
            println!(
                "{mode}: {} done, {} skipped, {} failed, checks {}",
                s.done,
                s.skipped,
                s.failed,
                if s.checks_passed { "passed" } else { "FAILED" }
            );
            ExitCode::from(s.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
