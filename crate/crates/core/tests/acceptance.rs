//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Failures are reported but do not fail `cargo test` unless
//! `ACCEPTANCE_STRICT=1` is set.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use common::*;
use fedwatch::aggregate::{geomed_aggregate, krum_select, trimmed_mean_aggregate};
use fedwatch::config::{load_config, ExperimentConfig};
use fedwatch::detector::{anomaly_scores, credit_scores, threshold_credit_scores, ThresholdRule};
use fedwatch::experiment::{compare_methods, run_experiment, Comparison};
use fedwatch::{rng, AttackSpec, ClientId, ClientUpdate, Method};
use rand::Rng;

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn desk() -> ExperimentConfig {
    load_config(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml").as_ref()).expect("desk config")
}

fn random_updates(r: &mut rng::Stream, k: usize, dim: usize) -> Vec<ClientUpdate> {
    (0..k)
        .map(|i| {
            let w: Vec<f64> = (0..dim).map(|_| r.random_range(-5.0..5.0)).collect();
            ClientUpdate::new(i as u32, r.random_range(1..100), w)
        })
        .collect()
}

fn formulas(rep: &mut Report) {
    let start = Instant::now();
    let mut r = rng::from_seed(101);
    let mut worst_sum: f64 = 0.0;
    let mut min_is_one = true;
    for _ in 0..1000 {
        let k = r.random_range(1..40);
        let errors: BTreeMap<ClientId, f64> = (0..k)
            .map(|i| {
                let e = match r.random_range(0..4) {
                    0 => r.random_range(0.0..1e-6),
                    1 => r.random_range(0.0..10.0),
                    2 => 10f64.powf(r.random_range(-3.0..8.0)),
                    _ => r.random_range(0.0..1.0),
                };
                (ClientId(i), e)
            })
            .collect();
        let n: BTreeMap<ClientId, u64> = errors.keys().map(|&c| (c, r.random_range(1..1000))).collect();
        let a = anomaly_scores(&errors).unwrap();
        let min = a.values().copied().fold(f64::INFINITY, f64::min);
        min_is_one &= min == 1.0;
        for exponent in [0.0, 1.0, 2.0, 3.5] {
            let alpha = credit_scores(&a, &n, exponent).unwrap();
            worst_sum = worst_sum.max((alpha.values().sum::<f64>() - 1.0).abs());
        }
        for rule in [ThresholdRule::MEAN, ThresholdRule::MEDIAN] {
            let t = threshold_credit_scores(&a, &n, rule, true).unwrap();
            worst_sum = worst_sum.max((t.alpha.values().sum::<f64>() - 1.0).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    rep.line(
        "1 formulas",
        worst_sum <= 1e-12 && min_is_one && secs < 5.0,
        format!("max |sum alpha - 1| = {worst_sum:.2e}, min A == 1 on all 1000 maps: {min_is_one}, {secs:.2}s"),
    );
}

fn oracles(rep: &mut Report) {
    let mut r = rng::from_seed(202);
    let mut krum_ok = 0;
    for _ in 0..200 {
        let k = r.random_range(3..=7);
        let f = r.random_range(0..=k - 3);
        let dim = r.random_range(1..=4);
        let ups = random_updates(&mut r, k, dim);
        krum_ok += (krum_select(&ups, f).unwrap().0 == krum_oracle(&ups, f)) as usize;
    }
    rep.line("2a krum oracle", krum_ok == 200, format!("{krum_ok}/200 draws identical"));

    let mut tm_ok = 0;
    let mut draws = 0;
    while draws < 200 {
        let k = r.random_range(1..=15);
        let beta = r.random_range(0.0..0.5);
        if 2 * (beta * k as f64).floor() as usize >= k {
            continue;
        }
        draws += 1;
        let dim = r.random_range(1..=6);
        let ups = random_updates(&mut r, k, dim);
        let got = trimmed_mean_aggregate(&ups, beta).unwrap();
        let want = trimmed_mean_oracle(&ups, beta);
        tm_ok += got.iter().zip(&want).all(|(a, b)| (a - b).abs() <= 1e-12) as usize;
    }
    rep.line("2b trimmed mean oracle", tm_ok == 200, format!("{tm_ok}/200 draws within 1e-12"));

    let mut gm_ok = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let k = r.random_range(1..=12);
        let ups = random_updates(&mut r, k, 1);
        let x = geomed_aggregate(&ups, 1e-10, 1000).unwrap().0[0];
        let values: Vec<f64> = ups.iter().map(|u| u.weights.0[0]).collect();
        let (lo, hi) = median_interval(&values);
        let gap = (lo - x).max(x - hi).max(0.0);
        worst = worst.max(gap);
        gm_ok += (gap <= 1e-4) as usize;
    }
    rep.line("2c geomed 1-D median", gm_ok == 100, format!("{gm_ok}/100 draws, worst distance {worst:.2e}"));
}

fn gradients(rep: &mut Report) {
    let errs: Vec<f64> = (0..50).map(|s| gradient_check(&random_grad_case(1000 + s), 1e-6)).collect();
    let worst = errs.iter().copied().fold(0.0, f64::max);
    rep.line("3 gradient check", worst < 1e-4, format!("worst relative error {worst:.2e} over 50 nets"));
}

fn detection(rep: &mut Report, root: &Path) {
    let mut cfg = desk();
    cfg.output.dir = root.join("detection");
    cfg.federation.rounds = 60;
    cfg.federation.aggregation_method = Method::Thresholding;
    cfg.attack = AttackSpec::SignFlip;
    let out = run_experiment(&cfg).expect("detection run");
    let from = cfg.federation.warmup_rounds + 5;
    let tail: Vec<_> = out.records.iter().filter(|r| r.round >= from).collect();
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let p = mean(tail.iter().map(|r| r.precision.unwrap_or(0.0)).collect());
    let rc = mean(tail.iter().map(|r| r.recall.unwrap_or(0.0)).collect());
    rep.line(
        "4 detection quality",
        p >= 0.9 && rc >= 0.9,
        format!("thresholding, sign flip, rounds {from}..{}: precision {p:.3}, recall {rc:.3}", cfg.federation.total_rounds() - 1),
    );
}

fn acc(c: &Comparison, attack: &str, m: Method) -> f64 {
    c.get(attack, m).map(|r| r.final_accuracy).expect("cell present")
}

fn ranking(rep: &mut Report, c: &Comparison) {
    let clean = acc(c, "none", Method::Fedavg);
    for attack in ["sign_flip", "additive_noise", "gradient_ascent"] {
        let thr = acc(c, attack, Method::Thresholding);
        let cs = acc(c, attack, Method::CreditScore);
        let (k, g, t) = (acc(c, attack, Method::Krum), acc(c, attack, Method::Geomed), acc(c, attack, Method::TrimmedMean));
        let best = k.max(g).max(t);
        let fa = acc(c, attack, Method::Fedavg);
        let checks = [
            ("thr >= cs", thr >= cs),
            ("cs > best baseline", cs > best),
            ("best baseline > fedavg", best > fa),
            ("thr within 3 pts of clean", clean - thr <= 0.03),
        ];
        let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
        rep.line(
            &format!("5 ranking {attack}"),
            failed.is_empty(),
            format!(
                "thr {thr:.3} cs {cs:.3} krum {k:.3} geomed {g:.3} trimmed {t:.3} fedavg {fa:.3} clean {clean:.3}{}",
                if failed.is_empty() { String::new() } else { format!("; violated: {}", failed.join(", ")) }
            ),
        );
    }
    let margin = acc(c, "sign_flip", Method::Thresholding) - acc(c, "sign_flip", Method::Geomed);
    rep.line("5 sign flip margin over geomed", margin > 0.0, format!("thr - geomed = {:+.3}", margin));
}

fn grid(cfg: &ExperimentConfig) -> Comparison {
    compare_methods(cfg, &Method::ALL, &cfg.compare.attacks.clone()).expect("comparison grid")
}

fn reproducibility(rep: &mut Report, first: &Comparison, root_a: &Path, cfg: &ExperimentConfig, root_b: &Path) {
    let mut again = cfg.clone();
    again.output.dir = root_b.to_path_buf();
    let second = grid(&again);
    let mut same = 0;
    for (a, b) in first.rows.iter().zip(&second.rows) {
        let fa = std::fs::read(root_a.join(&a.config_hash).join("rounds.csv")).unwrap();
        let fb = std::fs::read(root_b.join(&b.config_hash).join("rounds.csv")).unwrap();
        same += (fa == fb) as usize;
    }
    let n = first.rows.len();
    rep.line("6 reproducibility", same == n && n == second.rows.len(), format!("{same}/{n} rounds.csv files byte-identical"));
}

fn clean_detection(rep: &mut Report, c: &Comparison, root: &Path) {
    let clean = acc(c, "none", Method::Fedavg);
    let mut cfg = desk();
    cfg.output.dir = root.join("clean");
    cfg.federation.abnormal_fraction = 0.0;
    let mut parts = Vec::new();
    let mut ok = true;
    for m in [Method::Thresholding, Method::CreditScore] {
        cfg.federation.aggregation_method = m;
        let a = run_experiment(&cfg).expect("clean run").summary.final_accuracy;
        ok &= (a - clean).abs() <= 0.02;
        parts.push(format!("{} {a:.3} ({:+.3})", m.name(), a - clean));
    }
    rep.line("7 no attackers", ok, format!("fedavg {clean:.3}, {}", parts.join(", ")));
}

fn main() {
    // `cargo test` passes harness flags such as `--list` or a filter
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let start = Instant::now();
    let mut rep = Report { failed: 0 };
    formulas(&mut rep);
    oracles(&mut rep);
    gradients(&mut rep);

    let tmp = tempfile::tempdir().expect("temp dir");
    detection(&mut rep, tmp.path());
    let mut cfg = desk();
    let root_a = tmp.path().join("grid-a");
    cfg.output.dir = root_a.clone();
    let first = grid(&cfg);
    ranking(&mut rep, &first);
    reproducibility(&mut rep, &first, &root_a, &cfg, &tmp.path().join("grid-b"));
    clean_detection(&mut rep, &first, tmp.path());

    println!("{} criteria failed, {:.0}s", rep.failed, start.elapsed().as_secs_f64());
    if rep.failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
