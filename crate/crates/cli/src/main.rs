// SPDX-License-Identifier: MIT OR Apache-2.0

//! `tal`: drives the telemetry anomaly workbench end to end.

mod config;
mod ledger;
mod outcome;
mod pipeline;
mod report;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use tal_core::forecast::Family;
use tal_core::ingest::{ArrayFormat, BehaviorKind};

use config::{ArchitectureEntry, Overrides, RunConfig, OUTPUT_ENV};
use ledger::RunLedger;
use outcome::{exit_code, usage, EXIT_OK, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "tal", version, about = "Telemetry anomaly workbench")]
struct Cli {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset root (train/, test/, labeled_anomalies.csv).
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Output directory. Overrides TAL_OUTPUT_DIR.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs are identical for every value.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    parallel: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset into the dataset root.
    Synth(SynthArgs),
    /// Signatures, elbow scan, K-means and 2-D projection.
    Cluster(ClusterArgs),
    /// Train one forecaster per architecture and channel.
    Train(ArchArgs),
    /// Threshold forecast errors and write detected intervals.
    Detect(ArchArgs),
    /// Score detections per architecture and cluster and pick the ensemble.
    Evaluate(ArchArgs),
    /// Render report.md from the cluster and evaluation outputs.
    Report,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    per_kind: Option<usize>,
    /// Comma-separated behavior kinds.
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<BehaviorKind>>,
    #[arg(long)]
    train_len: Option<usize>,
    #[arg(long)]
    test_len: Option<usize>,
    /// Command columns next to the target.
    #[arg(long)]
    context: Option<usize>,
    /// Planted anomalies per channel.
    #[arg(long)]
    anomalies: Option<usize>,
    #[arg(long)]
    magnitude: Option<f64>,
    /// npy or csv.
    #[arg(long, value_parser = parse_format)]
    format: Option<ArrayFormat>,
    /// Overwrite a non-empty dataset root.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    /// Fixed cluster count instead of the elbow choice.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Args, Debug)]
struct ArchArgs {
    /// Comma-separated presets, replacing the configured list.
    #[arg(long, value_delimiter = ',')]
    architectures: Option<Vec<Family>>,
}

fn parse_format(s: &str) -> Result<ArrayFormat, String> {
    match s {
        "npy" => Ok(ArrayFormat::Npy),
        "csv" => Ok(ArrayFormat::Csv),
        _ => Err(format!("unknown format {s:?} (expected npy or csv)")),
    }
}

fn apply_archs(config: &mut RunConfig, args: &ArchArgs) {
    if let Some(list) = &args.architectures {
        config.architectures = list
            .iter()
            .map(|f| ArchitectureEntry::Preset(f.name().to_string()))
            .collect();
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    let env_output = std::env::var_os(OUTPUT_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    config.apply(
        env_output,
        Overrides {
            dataset: cli.dataset,
            output: cli.output,
            seed: cli.seed,
            parallel: cli.parallel.map(|p| p as usize),
        },
    );
    match &cli.command {
        Command::Synth(a) => {
            let s = &mut config.synth;
            s.per_kind = a.per_kind.unwrap_or(s.per_kind);
            if let Some(k) = &a.kinds {
                s.kinds = k.clone();
            }
            s.train_len = a.train_len.unwrap_or(s.train_len);
            s.test_len = a.test_len.unwrap_or(s.test_len);
            s.context = a.context.unwrap_or(s.context);
            s.anomalies = a.anomalies.unwrap_or(s.anomalies);
            s.magnitude = a.magnitude.unwrap_or(s.magnitude);
            s.format = a.format.unwrap_or(s.format);
        }
        Command::Cluster(a) => {
            let c = &mut config.clustering;
            c.k = a.k.or(c.k);
            c.k_min = a.k_min.unwrap_or(c.k_min);
            c.k_max = a.k_max.unwrap_or(c.k_max);
        }
        Command::Train(a) | Command::Detect(a) | Command::Evaluate(a) => apply_archs(&mut config, a),
        Command::Report => {}
    }
    config.validate()?;
    let archs = config.resolve_architectures()?;
    let hash = config.hash();
    let started = ledger::now();

    if let Command::Synth(a) = &cli.command {
        let n = synth::run(&config, a.force)?;
        println!("wrote {n} channels to {}", config.dataset.display());
        return Ok(());
    }

    let out = config.output.clone();
    pipeline::create_dir(&out).map_err(|e| usage(format!("output directory is not writable: {e:#}")))?;
    let mut ledger = RunLedger::open(&out)?;
    let stage = match &cli.command {
        Command::Synth(_) => unreachable!("handled above"),
        Command::Cluster(_) => {
            let c = pipeline::cluster(&config)?;
            println!("k = {}, distortion {:.6}", c.model.k, c.model.distortion);
            "cluster"
        }
        Command::Train(_) => {
            let n = pipeline::train_all(&config, &archs, &mut ledger)?;
            println!("trained {n} models");
            "train"
        }
        Command::Detect(_) => {
            let n = pipeline::detect_all(&config, &archs)?;
            println!("detected {n} intervals");
            "detect"
        }
        Command::Evaluate(_) => {
            let e = report::evaluate(&config, &archs, &ledger)?;
            for s in &e.architectures {
                println!(
                    "{}: F1 anomaly {}",
                    s.architecture,
                    s.f1_anomaly.map_or_else(|| "n/a".to_string(), |f| format!("{f:.2}"))
                );
            }
            println!("ensemble mean F1 {:.2}", e.ensemble.mean_f1);
            "evaluate"
        }
        Command::Report => {
            report::report(&out)?;
            println!("wrote {}", out.join(report::REPORT_FILE).display());
            "report"
        }
    };
    ledger.record(stage, started, &hash);
    ledger.save(&out)
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
