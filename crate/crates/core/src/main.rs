use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use mechanic_forge::cli::{self, CompareOptions, ExperimentConfig, ReplayFormat, ReplayOptions};
use mechanic_forge::eval::EvaluatorKind;
use mechanic_forge::rule::Rule;

#[derive(Parser)]
#[command(name = "mechanic-forge", version, about = "Generate platformer rules by greedy search and compare evaluators")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run rule generation for every configured seed and evaluator.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        evaluator: Option<EvaluatorKind>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_generations: Option<u32>,
    },
    /// Compare the final rules of two run logs.
    Compare {
        log_a: PathBuf,
        log_b: PathBuf,
        #[arg(long, default_value_t = 12)]
        pool: usize,
        #[arg(long)]
        min_pool: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "compare")]
        out: PathBuf,
    },
    /// Re-simulate a trace's successful action sequence and render it.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ReplayFormat::Ascii)]
        format: ReplayFormat,
        #[arg(long)]
        rule: Option<Rule>,
        #[arg(long)]
        level: Option<PathBuf>,
    },
    /// Per-episode NewRule usage of a training record, as CSV.
    UsageCurve {
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(args: Args) -> Result<ExitCode> {
    match args.command {
        Command::Run { config, seed, evaluator, out, max_generations } => {
            let mut cfg = match &config {
                Some(path) => ExperimentConfig::load(path)?,
                None => ExperimentConfig::default(),
            };
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            if let Some(kind) = evaluator {
                cfg.evaluators = vec![kind];
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            if let Some(g) = max_generations {
                cfg.generations = g;
            }
            cfg.validate()?;
            let summary = cli::cmd_run(&cfg).context("run failed")?;
            print!("{}", std::fs::read_to_string(cfg.output_dir.join("summary.txt"))?);
            if !summary.any_success() {
                eprintln!("error: {}", cli::CliError::NoFeasibleRule);
                return Ok(ExitCode::from(2));
            }
        }
        Command::Compare { log_a, log_b, pool, min_pool, seed, out } => {
            let report = cli::cmd_compare(&log_a, &log_b, &CompareOptions { pool, min_pool, seed, out })?;
            print!("{}\n{}\n{}\n{}", report.similarity.to_text(), report.usage_a.to_text(), report.usage_b.to_text(), report.breakdown.to_text());
        }
        Command::Replay { trace, out, format, rule, level } => {
            let frames = cli::cmd_replay(&trace, &ReplayOptions { out: out.clone(), format, rule, level })?;
            println!("replayed {} steps to {}", frames.len() - 1, out.display());
        }
        Command::UsageCurve { record, out } => {
            let rows = cli::cmd_usage_curve(&record, &out)?;
            println!("wrote {rows} episodes to {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
