use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use adaptivefl::config::parse_config;
use adaptivefl::federation::Federation;
use adaptivefl::metrics::emit_metrics;
use adaptivefl::pruning::{param_count, ShapeSpec};
use adaptivefl::selftest;

#[derive(Parser, Debug)]
#[command(author, version, about = "Heterogeneous federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write metrics.csv, rounds.jsonl and config.toml.
    Run {
        /// Experiment configuration file (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed; overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Count the weights of a shape file under a width ratio and starting layer.
    CountParams {
        /// Shape file (`shapespec v1` format).
        #[arg(long)]
        shape: PathBuf,
        /// Width pruning ratio in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        rw: f64,
        /// Layers up to and including this index keep full width.
        #[arg(long, default_value_t = 0)]
        start_layer: usize,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<()> {
    let mut cfg = parse_config(&config)?;
    if let Some(seed) = seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = out {
        cfg.output_dir = out;
    }
    let e = &cfg.experiment;
    eprintln!(
        "running {} for {} rounds ({} clients, {} per round, seed {})",
        e.scenario.strategy, e.scenario.rounds, e.scenario.n_clients, e.scenario.clients_per_round, e.seed
    );
    let mut fed = Federation::new(e)?;
    let records = fed.run()?;
    if records.is_empty() {
        bail!("scenario.rounds is 0; nothing to report");
    }
    let files = emit_metrics(&records, &cfg.output_dir)?;
    let echo = cfg.output_dir.join("config.toml");
    fs::write(&echo, cfg.to_toml()).with_context(|| format!("writing {}", echo.display()))?;
    let last = records.last().expect("nonempty");
    println!(
        "round {}: acc_full {:.4}  acc_M1 {:.4}  acc_S1 {:.4}  waste {:.4}",
        last.round, last.acc_full, last.acc_m1, last.acc_s1, last.waste_rate
    );
    println!("wrote {} and {}", files.csv.display(), files.log.display());
    Ok(())
}

fn count_params(shape: PathBuf, rw: f64, start_layer: usize) -> Result<()> {
    let text = fs::read_to_string(&shape).with_context(|| format!("reading {}", shape.display()))?;
    let spec: ShapeSpec = text.parse()?;
    let full = param_count(&spec, 1.0, spec.layers.len())?;
    let pruned = param_count(&spec, rw, start_layer)?;
    println!("params: {pruned}");
    println!("full: {full}");
    println!("ratio: {:.4}", pruned as f64 / full as f64);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed } => run(config, out, seed),
        Command::CountParams {
            shape,
            rw,
            start_layer,
        } => count_params(shape, rw, start_layer),
        Command::Selftest => {
            let checks = selftest::run_all();
            let mut failed = 0;
            for c in &checks {
                match &c.outcome {
                    Ok(()) => println!("PASS  {}", c.name),
                    Err(msg) => {
                        failed += 1;
                        println!("FAIL  {}: {msg}", c.name);
                    }
                }
            }
            if failed == 0 {
                Ok(())
            } else {
                Err(anyhow::anyhow!("{failed} of {} checks failed", checks.len()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
