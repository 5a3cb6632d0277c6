//! Command-line front end.
//!
//! ```text
//! fedwatch run      <config.toml> [--key value]...
//! fedwatch compare  <config.toml> [--key value]...
//! fedwatch inspect  <run-dir>
//! fedwatch validate <config.toml> [--key value]...
//! ```
//!
//! Overrides use dotted config paths, e.g. `--federation.rounds 5`.
//! Exit codes: 0 success, 1 configuration error, 2 runtime error.
//! `FEDWATCH_OUT` overrides the output root.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedwatch::config::{load_config_with_overrides, ExperimentConfig};
use fedwatch::experiment::{compare_methods, load_records, run_experiment, ExperimentSummary};
use fedwatch::Error;

#[derive(Parser)]
#[command(name = "fedwatch", version, about = "Federated-learning simulator with abnormal-client detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its outputs.
    Run(ConfigArgs),
    /// Run every configured method against every configured attack.
    Compare(ConfigArgs),
    /// Print the summary and per-round table of a finished run.
    Inspect { run_dir: PathBuf },
    /// Check a config and print it with all defaults filled in.
    Validate(ConfigArgs),
}

#[derive(clap::Args)]
struct ConfigArgs {
    config: PathBuf,
    /// `--dotted.key value` pairs applied on top of the file.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>, Failure> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Failure::Config(format!("expected `--key value`, found `{arg}`")))?;
        if let Some((k, v)) = key.split_once('=') {
            out.push((k.to_string(), v.to_string()));
        } else {
            let v = it
                .next()
                .ok_or_else(|| Failure::Config(format!("missing value for `--{key}`")))?;
            out.push((key.to_string(), v.clone()));
        }
    }
    Ok(out)
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let overrides = parse_overrides(&args.overrides)?;
    load_config_with_overrides(&args.config, &overrides).map_err(|e| Failure::Config(e.to_string()))
}

fn print_summary(s: &ExperimentSummary) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!("config hash      {}", s.config_hash);
    println!("method           {}", s.method.name());
    println!("attack           {}", s.attack);
    println!("rounds           {}", s.rounds);
    println!("final accuracy   {:.4}", s.final_accuracy);
    println!("final loss       {}", opt(s.final_loss));
    println!("mean precision   {}", opt(s.mean_precision));
    println!("mean recall      {}", opt(s.mean_recall));
    println!(
        "rounds to {:.2}   {}",
        s.accuracy_target,
        s.rounds_to_target.map_or("-".to_string(), |r| r.to_string())
    );
    println!("fallback rounds  {}", s.fallback_rounds);
}

fn inspect(dir: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(dir.join("summary.json"))
        .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.join("summary.json").display())))?;
    let summary: ExperimentSummary = serde_json::from_str(&text).map_err(|e| Failure::Runtime(e.to_string()))?;
    print_summary(&summary);
    let records = load_records(dir)?;
    println!();
    println!("{:>5}  {:>7}  {:>8}  {:>9}  {:>6}  {:>8}", "round", "phase", "accuracy", "precision", "recall", "flagged");
    for r in &records {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
        let flagged = r.report.as_ref().map_or(0, |rep| rep.flagged().len());
        let phase = match r.phase {
            fedwatch::sim::Phase::Warmup => "warmup",
            fedwatch::sim::Phase::Attack => "attack",
        };
        println!(
            "{:>5}  {:>7}  {:>8.4}  {:>9}  {:>6}  {:>8}",
            r.round,
            phase,
            r.accuracy,
            opt(r.precision),
            opt(r.recall),
            flagged
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let out = run_experiment(&cfg)?;
            print_summary(&out.summary);
            println!("written to       {}", out.dir.display());
        }
        Command::Compare(args) => {
            let cfg = load(&args)?;
            let cmp = compare_methods(&cfg, &cfg.compare.methods, &cfg.compare.attacks)?;
            print!("{}", cmp.to_csv());
        }
        Command::Inspect { run_dir } => inspect(&run_dir)?,
        Command::Validate(args) => {
            let cfg = load(&args)?;
            println!("# config hash {}", cfg.config_hash());
            print!("{}", cfg.to_toml()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("fedwatch: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("fedwatch: {msg}");
            ExitCode::from(2)
        }
    }
}
