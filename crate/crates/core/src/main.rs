use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dab_core::harness::{self, PatternConfig, SweepConfig};
use dab_core::validate::run_validation;
use dab_core::{Error, Result};

/// Distortion-aware precoding experiments.
#[derive(Parser)]
#[command(name = "dab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ergodic sum rate of MRT, ZF and DAB over an SNR grid.
    Sweep(RunArgs),
    /// Mean best-so-far DAB rate versus iteration.
    Converge(RunArgs),
    /// Far-field radiation patterns of MRT and DAB for fixed users.
    Pattern(RunArgs),
    /// Run the built-in oracle and invariant checks.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON config; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output path from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "DAB_THREADS", default_value_t = 0)]
    threads: usize,
}

fn load_sweep(args: &RunArgs) -> Result<SweepConfig> {
    let mut cfg = match &args.config {
        Some(path) => SweepConfig::load(path)?,
        None => SweepConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sweep(args) => {
            let cfg = load_sweep(&args)?;
            let results = harness::with_threads(args.threads, || harness::run_sweep(&cfg))??;
            for w in &results.warnings {
                eprintln!("warning: {w}");
            }
            harness::write_sweep(&results, &cfg.output_path)?;
            for s in &results.summary {
                println!(
                    "snr {:>6.1} dB  {:<3}  mean {:.4} ± {:.4} bit/s/Hz",
                    s.snr_db,
                    s.precoder.as_str(),
                    s.mean,
                    s.std_err
                );
            }
            println!("wrote {}", cfg.output_path.display());
        }
        Command::Converge(args) => {
            let mut cfg = load_sweep(&args)?;
            if args.out.is_none() && args.config.is_none() {
                cfg.output_path = Path::new("convergence.csv").to_path_buf();
            }
            let traces = harness::with_threads(args.threads, || harness::run_convergence(&cfg))??;
            harness::write_convergence(&traces, &cfg.output_path)?;
            for t in &traces {
                println!(
                    "snr {:>6.1} dB  start {:.4}  final {:.4}  99% after {} iterations",
                    t.snr_db,
                    t.mean_rate[0],
                    t.mean_rate.last().copied().unwrap_or(f64::NAN),
                    t.iterations_to(0.99)
                );
            }
            println!("wrote {}", cfg.output_path.display());
        }
        Command::Pattern(args) => {
            let mut cfg = match &args.config {
                Some(path) => PatternConfig::load(path)?,
                None => PatternConfig::default(),
            };
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(out) = &args.out {
                cfg.output_path = out.clone();
            }
            let res = harness::with_threads(args.threads, || harness::run_pattern(&cfg))??;
            harness::write_pattern(&res, &cfg.output_path)?;
            println!(
                "mrt rate {:.4}, dab rate {:.4} (init {})",
                res.mrt_rate, res.dab_rate, res.dab_init
            );
            println!("wrote {}", cfg.output_path.display());
        }
        Command::Validate(args) => {
            let checks = harness::with_threads(args.threads, || run_validation(args.seed.unwrap_or(1)))?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Error::InvalidInput(format!("{failed} validation check(s) failed")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
