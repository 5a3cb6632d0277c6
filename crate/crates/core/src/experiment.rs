//! Running configured experiments and persisting their results.
//!
//! Each run writes to `<root>/<config-hash>/`:
//!
//! * `rounds.csv`: `config_hash,round,method,attack,accuracy,loss,precision,recall`
//!   with six fixed decimals and empty cells for absent values;
//! * `rounds.jsonl`: the full round records, anomaly reports included;
//! * `summary.json` and the normalized `config.toml`.
//!
//! The root is `output.dir` unless `FEDWATCH_OUT` is set.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::Method;
use crate::attack::AttackSpec;
use crate::config::{hash_json, DatasetSource, ExperimentConfig};
use crate::data::{generate_synthetic_dataset, load_image_dataset, Dataset};
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::sim::{Federation, Phase, RoundRecord};

pub const OUTPUT_ENV: &str = "FEDWATCH_OUT";

/// Output root: `FEDWATCH_OUT` when set and non-empty, else `output.dir`.
pub fn output_root(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.output.dir.clone(),
    }
}

/// Train and test sets described by the config's `[dataset]` section.
pub fn load_datasets(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let d = &cfg.dataset;
    let full = match d.source {
        DatasetSource::Synthetic => {
            generate_synthetic_dataset(&d.synthetic, rng::split_seed(cfg.seed, Purpose::Dataset, 0, 0))?
        }
        DatasetSource::Image => {
            let path = d.path.as_ref().ok_or_else(|| Error::config("dataset.path", "missing"))?;
            load_image_dataset(path)?
        }
    };
    let (train, test) = full.split(d.test_fraction, rng::split_seed(cfg.seed, Purpose::Dataset, 1, 0))?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub method: Method,
    pub attack: String,
    pub rounds: usize,
    /// Test accuracy of the final global model (the initial one when no
    /// round ran).
    pub final_accuracy: f64,
    pub final_loss: Option<f64>,
    /// Means over attack-phase rounds where the value is present.
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub accuracy_target: f64,
    /// First round whose accuracy reaches `accuracy_target`.
    pub rounds_to_target: Option<usize>,
    pub fallback_rounds: usize,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub summary: ExperimentSummary,
    pub records: Vec<RoundRecord>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Runs one experiment and writes its outputs.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let (train, test) = load_datasets(cfg)?;
    run_on(cfg, &train, &test)
}

/// As [`run_experiment`] with the datasets already loaded.
pub fn run_on(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<RunOutcome> {
    let start = Instant::now();
    let hash = cfg.config_hash();
    let mut fed = Federation::new(
        cfg.federation(),
        cfg.server(),
        cfg.attack,
        &cfg.model.hidden_sizes,
        train,
        test.clone(),
    )?;
    let initial = fed.initial_weights();
    let (weights, records) = fed.run()?;
    let (final_accuracy, final_loss) = match records.last() {
        Some(r) => (r.accuracy, r.loss),
        None => {
            let (acc, loss) = fed.evaluate(&initial)?;
            (acc, loss.is_finite().then_some(loss))
        }
    };
    debug_assert!(records.is_empty() || weights.len() == initial.len());

    let attack_rounds = || records.iter().filter(|r| r.phase == Phase::Attack);
    let summary = ExperimentSummary {
        config_hash: hash.clone(),
        method: cfg.federation.aggregation_method,
        attack: cfg.attack_label().to_string(),
        rounds: records.len(),
        final_accuracy,
        final_loss,
        mean_precision: mean(attack_rounds().filter_map(|r| r.precision)),
        mean_recall: mean(attack_rounds().filter_map(|r| r.recall)),
        accuracy_target: cfg.output.accuracy_target,
        rounds_to_target: records
            .iter()
            .find(|r| r.accuracy >= cfg.output.accuracy_target)
            .map(|r| r.round),
        fallback_rounds: records.iter().filter(|r| r.fallback.is_some()).count(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };

    let dir = output_root(cfg).join(&hash);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("rounds.csv"), rounds_csv(&hash, cfg.attack_label(), &records))?;
    let mut jsonl = std::io::BufWriter::new(std::fs::File::create(dir.join("rounds.jsonl"))?);
    for r in &records {
        serde_json::to_writer(&mut jsonl, r).map_err(|e| Error::Serde(e.to_string()))?;
        jsonl.write_all(b"\n")?;
    }
    jsonl.flush()?;
    write_json(&dir.join("summary.json"), &summary)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    log::info!(
        "{hash}: {} / {} final accuracy {:.4}",
        summary.method.name(),
        summary.attack,
        summary.final_accuracy
    );
    Ok(RunOutcome { dir, summary, records })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

pub const ROUNDS_CSV_HEADER: &str = "config_hash,round,method,attack,accuracy,loss,precision,recall";

/// The `rounds.csv` text for a run.
pub fn rounds_csv(hash: &str, attack: &str, records: &[RoundRecord]) -> String {
    let mut out = String::from(ROUNDS_CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{hash},{},{},{attack},{:.6},{},{},{}",
            r.round,
            r.method.name(),
            r.accuracy,
            fmt_opt(r.loss),
            fmt_opt(r.precision),
            fmt_opt(r.recall)
        )
        .expect("writing to a String");
    }
    out
}

/// Reads `rounds.jsonl` from a run directory.
pub fn load_records(run_dir: &Path) -> Result<Vec<RoundRecord>> {
    let f = std::fs::File::open(run_dir.join("rounds.jsonl"))?;
    BufReader::new(f)
        .lines()
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
        .map(|line| serde_json::from_str(&line?).map_err(|e| Error::Serde(e.to_string())))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub attack: String,
    pub method: Method,
    pub config_hash: String,
    pub final_accuracy: f64,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub rounds_to_target: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub grid_hash: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn get(&self, attack: &str, method: Method) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.attack == attack && r.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("attack,method,config_hash,final_accuracy,mean_precision,mean_recall,rounds_to_target\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{:.6},{},{},{}",
                r.attack,
                r.method.name(),
                r.config_hash,
                r.final_accuracy,
                fmt_opt(r.mean_precision),
                fmt_opt(r.mean_recall),
                r.rounds_to_target.map(|v| v.to_string()).unwrap_or_default()
            )
            .expect("writing to a String");
        }
        out
    }
}

/// One cell of a comparison grid.
pub fn cell_config(base: &ExperimentConfig, method: Method, attack: Option<AttackSpec>) -> ExperimentConfig {
    let mut c = base.clone();
    c.federation.aggregation_method = method;
    match attack {
        Some(a) => c.attack = a,
        None => c.federation.abnormal_fraction = 0.0,
    }
    c
}

/// Runs every method against every attack with the base config's seed and
/// data, plus clean FedAvg when `compare.clean_baseline` is set. Cells run
/// in parallel and each writes its own run directory; the table goes to
/// `<root>/compare-<grid-hash>/comparison.csv`.
pub fn compare_methods(cfg: &ExperimentConfig, methods: &[Method], attacks: &[AttackSpec]) -> Result<Comparison> {
    cfg.validate()?;
    if methods.is_empty() || attacks.is_empty() {
        return Err(Error::input("compare needs at least one method and one attack"));
    }
    let mut cells: Vec<ExperimentConfig> = Vec::new();
    if cfg.compare.clean_baseline {
        cells.push(cell_config(cfg, Method::Fedavg, None));
    }
    for &a in attacks {
        for &m in methods {
            cells.push(cell_config(cfg, m, Some(a)));
        }
    }
    for c in &cells {
        c.validate()?;
    }

    // identical cells run once so that no two writers share a directory
    let mut unique: Vec<&ExperimentConfig> = Vec::new();
    for c in &cells {
        if !unique.iter().any(|u| u.config_hash() == c.config_hash()) {
            unique.push(c);
        }
    }
    let (train, test) = load_datasets(cfg)?;
    let outcomes = unique
        .par_iter()
        .map(|c| run_on(c, &train, &test).map(|o| o.summary))
        .collect::<Result<Vec<_>>>()?;

    let rows = cells
        .iter()
        .map(|c| {
            let s = outcomes
                .iter()
                .find(|s| s.config_hash == c.config_hash())
                .expect("every cell ran");
            ComparisonRow {
                attack: s.attack.clone(),
                method: s.method,
                config_hash: s.config_hash.clone(),
                final_accuracy: s.final_accuracy,
                mean_precision: s.mean_precision,
                mean_recall: s.mean_recall,
                rounds_to_target: s.rounds_to_target,
            }
        })
        .collect();

    let grid_hash = hash_json(&(cfg.config_hash(), methods, attacks, cfg.compare.clean_baseline));
    let comparison = Comparison { grid_hash, rows };
    let dir = output_root(cfg).join(format!("compare-{}", comparison.grid_hash));
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("comparison.csv"), comparison.to_csv())?;
    write_json(&dir.join("comparison.json"), &comparison)?;
    Ok(comparison)
}
