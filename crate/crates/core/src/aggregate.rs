//! Aggregation rules.
//!
//! `fedavg_aggregate` and `weighted_aggregate` are the sample-weighted and
//! arbitrarily weighted means. Krum, the geometric median and the
//! coordinate-wise trimmed mean are the defense-based baselines; they ignore
//! sample counts, as in their original formulations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::update::{ClientId, ClientUpdate};
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fedavg,
    CreditScore,
    Thresholding,
    Krum,
    Geomed,
    TrimmedMean,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Fedavg,
        Method::CreditScore,
        Method::Thresholding,
        Method::Krum,
        Method::Geomed,
        Method::TrimmedMean,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Fedavg => "fedavg",
            Method::CreditScore => "credit_score",
            Method::Thresholding => "thresholding",
            Method::Krum => "krum",
            Method::Geomed => "geomed",
            Method::TrimmedMean => "trimmed_mean",
        }
    }

    /// True for the methods that run the anomaly detector.
    pub fn uses_detector(&self) -> bool {
        matches!(self, Method::CreditScore | Method::Thresholding)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::input(format!("unknown aggregation method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams {
    /// Assumed attacker count for Krum; `None` means `⌈0.3 K⌉`.
    pub krum_f: Option<usize>,
    pub trim_fraction: f64,
    pub geomed_tol: f64,
    pub geomed_max_iters: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            krum_f: None,
            trim_fraction: 0.3,
            geomed_tol: 1e-6,
            geomed_max_iters: 100,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(Error::config("baselines.trim_fraction", "must lie in [0, 0.5)"));
        }
        if !(self.geomed_tol > 0.0) {
            return Err(Error::config("baselines.geomed_tol", "must be positive"));
        }
        if self.geomed_max_iters == 0 {
            return Err(Error::config("baselines.geomed_max_iters", "must be positive"));
        }
        Ok(())
    }

    pub fn krum_f_for(&self, k: usize) -> usize {
        self.krum_f.unwrap_or_else(|| (0.3 * k as f64).ceil() as usize)
    }
}

fn check_updates(updates: &[ClientUpdate]) -> Result<usize> {
    let first = updates
        .first()
        .ok_or_else(|| Error::input("no updates to aggregate"))?;
    let len = first.weights.len();
    if let Some(u) = updates.iter().find(|u| u.weights.len() != len) {
        return Err(Error::shape(format!(
            "client {} sent {} weights, expected {len}",
            u.client,
            u.weights.len()
        )));
    }
    Ok(len)
}

/// `Σ_k α_k w_k` in update order; zero-weight terms are skipped so that
/// excluded non-finite updates cannot poison the sum.
fn weighted_sum(updates: &[ClientUpdate], alphas: &[f64], len: usize) -> WeightVector {
    let mut out = vec![0.0; len];
    for (u, &a) in updates.iter().zip(alphas) {
        if a == 0.0 {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(u.weights.iter()) {
            *o += a * w;
        }
    }
    WeightVector(out)
}

/// `Σ_k (n_k / n) w_k`.
pub fn fedavg_aggregate(updates: &[ClientUpdate]) -> Result<WeightVector> {
    let len = check_updates(updates)?;
    if updates.iter().any(|u| u.samples == 0) {
        return Err(Error::input("sample counts must be positive"));
    }
    let n: u64 = updates.iter().map(|u| u.samples).sum();
    let alphas: Vec<f64> = updates.iter().map(|u| u.samples as f64 / n as f64).collect();
    Ok(weighted_sum(updates, &alphas, len))
}

/// `Σ_k α_k w_k` for explicit weights with `Σ α ≤ 1`.
pub fn weighted_aggregate(updates: &[ClientUpdate], alpha: &BTreeMap<ClientId, f64>) -> Result<WeightVector> {
    let len = check_updates(updates)?;
    if alpha.len() != updates.len() {
        return Err(Error::input(format!(
            "{} weights for {} updates",
            alpha.len(),
            updates.len()
        )));
    }
    let alphas = updates
        .iter()
        .map(|u| {
            alpha
                .get(&u.client)
                .copied()
                .ok_or_else(|| Error::input(format!("no weight for client {}", u.client)))
        })
        .collect::<Result<Vec<f64>>>()?;
    if alphas.iter().any(|a| !(*a >= 0.0)) {
        return Err(Error::input("weights must be non-negative"));
    }
    let total: f64 = alphas.iter().sum();
    if total > 1.0 + 1e-9 {
        return Err(Error::input(format!("weights sum to {total} > 1")));
    }
    Ok(weighted_sum(updates, &alphas, len))
}

/// Krum: the update whose `K − f − 2` nearest neighbours are closest in
/// summed squared distance. Ties go to the lowest client id.
pub fn krum_select(updates: &[ClientUpdate], f: usize) -> Result<WeightVector> {
    check_updates(updates)?;
    let k = updates.len();
    if k < f + 3 {
        return Err(Error::input(format!("krum needs at least f + 3 = {} updates, got {k}", f + 3)));
    }
    let neighbours = k - f - 2;
    let mut dist = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let d = updates[i].weights.distance_squared(&updates[j].weights);
            dist[i * k + j] = d;
            dist[j * k + i] = d;
        }
    }
    let scores: Vec<f64> = (0..k)
        .map(|i| {
            let mut row: Vec<f64> = (0..k).filter(|&j| j != i).map(|j| dist[i * k + j]).collect();
            row.sort_by(f64::total_cmp);
            row[..neighbours].iter().sum()
        })
        .collect();
    let best = (0..k)
        .min_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then(updates[a].client.cmp(&updates[b].client))
        })
        .expect("non-empty");
    Ok(updates[best].weights.clone())
}

/// Distances at or below this count as coinciding with a data point.
const COINCIDENCE_EPS: f64 = 1e-12;

fn geomed_objective(x: &[f64], updates: &[ClientUpdate]) -> f64 {
    updates
        .iter()
        .map(|u| {
            x.iter()
                .zip(u.weights.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

/// Geometric median by Weiszfeld iteration from the coordinate-wise mean.
///
/// When the iterate lands on a data point the Vardi-Zhang correction is
/// used: stop if that point is optimal, otherwise step off it along the
/// descent direction. Returns the iterate with the lowest objective seen.
pub fn geomed_aggregate(updates: &[ClientUpdate], tol: f64, max_iters: usize) -> Result<WeightVector> {
    let len = check_updates(updates)?;
    let k = updates.len() as f64;
    let mut x = vec![0.0; len];
    for u in updates {
        for (o, &w) in x.iter_mut().zip(u.weights.iter()) {
            *o += w / k;
        }
    }
    let mut best = x.clone();
    let mut best_obj = geomed_objective(&x, updates);

    for _ in 0..max_iters {
        let mut num = vec![0.0; len];
        let mut den = 0.0;
        let mut coincident = 0usize;
        for u in updates {
            let d = x
                .iter()
                .zip(u.weights.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if d <= COINCIDENCE_EPS {
                coincident += 1;
                continue;
            }
            let inv = 1.0 / d;
            den += inv;
            for (n, &w) in num.iter_mut().zip(u.weights.iter()) {
                *n += w * inv;
            }
        }
        if den == 0.0 || !den.is_finite() {
            break;
        }
        let t: Vec<f64> = num.iter().map(|n| n / den).collect();
        let next: Vec<f64> = if coincident == 0 {
            t
        } else {
            // R = Σ_{k not at x} (w_k − x) / d_k = den · (T − x)
            let r = t
                .iter()
                .zip(&x)
                .map(|(ti, xi)| den * (ti - xi))
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            let eta = coincident as f64;
            if r <= eta {
                break;
            }
            let keep = eta / r;
            t.iter().zip(&x).map(|(ti, xi)| (1.0 - keep) * ti + keep * xi).collect()
        };
        let step = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        x = next;
        let obj = geomed_objective(&x, updates);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&x);
        }
        if step < tol {
            break;
        }
    }
    Ok(WeightVector(best))
}

/// Per coordinate: drop the `⌊βK⌋` smallest and largest values and average
/// the rest.
pub fn trimmed_mean_aggregate(updates: &[ClientUpdate], beta: f64) -> Result<WeightVector> {
    let len = check_updates(updates)?;
    if !(0.0..0.5).contains(&beta) {
        return Err(Error::input(format!("trim fraction {beta} must lie in [0, 0.5)")));
    }
    let k = updates.len();
    let trim = (beta * k as f64).floor() as usize;
    if 2 * trim >= k {
        return Err(Error::input(format!(
            "trimming {trim} from each side leaves nothing of {k} updates"
        )));
    }
    let kept = (k - 2 * trim) as f64;
    let mut column = vec![0.0; k];
    let out = (0..len)
        .map(|i| {
            for (c, u) in column.iter_mut().zip(updates) {
                *c = u.weights[i];
            }
            column.sort_by(f64::total_cmp);
            column[trim..k - trim].iter().sum::<f64>() / kept
        })
        .collect();
    Ok(WeightVector(out))
}
