use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use riesz_she_core::harness::{emit_results, run_experiment, ExperimentConfig, ExperimentKind, Outcome};
use riesz_she_core::Error;

/// Monte Carlo experiments for the stochastic heat equation driven by
/// Riesz-correlated noise.
#[derive(Debug, Parser)]
#[command(name = "riesz-she", version)]
struct Cli {
    /// noise-validate, variance-limit, clt, fclt, tightness, decay, lemma31 or constants
    #[arg(value_parser = parse_kind)]
    kind: ExperimentKind,

    #[arg(long)]
    config: PathBuf,

    /// Output directory for CSV/JSON results.
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    replicas: Option<usize>,

    /// Worker threads; 0 uses one per core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let mut config = ExperimentConfig::load(&cli.config)?;
    config.kind = cli.kind;
    if let Some(seed) = cli.seed {
        config = config.with_seed(seed);
    }
    if let Some(n) = cli.replicas {
        config = config.with_replicas(n)?;
    }
    config.validate()?;
    let result = run_experiment(&config, cli.workers)?;
    for r in &result.reports {
        println!(
            "{} {} [{}] estimate={:.6} target={:.6} tol={:.6} ({})",
            if r.pass { "PASS" } else { "FAIL" },
            r.metric,
            r.params,
            r.estimate,
            r.target,
            r.tolerance,
            r.rule.name()
        );
    }
    for note in &result.notes {
        eprintln!("note: {note}");
    }
    if let Outcome::Degenerate(msg) = &result.outcome {
        eprintln!("degenerate: {msg}");
    }
    if let Some(dir) = &cli.out {
        emit_results(&result, dir)?;
    }
    eprintln!(
        "{}: {} replicas, {:.1}s, exit {}",
        result.kind,
        result.n_replicas,
        result.elapsed.as_secs_f64(),
        result.exit_code()
    );
    Ok(result.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
