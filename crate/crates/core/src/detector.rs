//! Server-side anomaly detection over client weight surrogates.
//!
//! An autoencoder is fitted on surrogates of updates the server has already
//! accumulated. In each scored round every client's reconstruction error is
//! normalized by the round minimum into an anomaly score `A ≥ 1`. Scores
//! become aggregation weights either softly (credit scores,
//! `n_k A_k^{-L} / Σ_j n_j A_j^{-L}`) or by hard exclusion of clients whose
//! score is strictly above a threshold.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{forward, mse_loss, sgd_epoch, Activation, Direction, LayerSpec, Matrix, Network, Targets, TrainConfig};
use crate::rng;
use crate::surrogate::{extract, Standardizer, SurrogateSpec, SurrogateVector};
use crate::update::{ClientId, ClientUpdate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderConfig {
    pub hidden_sizes: Vec<usize>,
    pub train_batch_size: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            hidden_sizes: vec![64, 32, 32, 64],
            train_batch_size: 32,
            dropout_rate: 0.2,
            epochs: 200,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_sizes.contains(&0) {
            return Err(Error::config("autoencoder.hidden_sizes", "sizes must be positive"));
        }
        let train = TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.train_batch_size,
            epochs: self.epochs,
            dropout_rate: self.dropout_rate,
            rng_seed: self.seed,
        };
        train.validate().map_err(|e| match e {
            Error::Config { field, message } => Error::config(format!("autoencoder.{field}"), message),
            other => other,
        })
    }

    /// Encoder and decoder widths mirror each other.
    pub fn is_symmetric(&self) -> bool {
        self.hidden_sizes.iter().eq(self.hidden_sizes.iter().rev())
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.train_batch_size,
            epochs: self.epochs,
            dropout_rate: self.dropout_rate,
            rng_seed: self.seed,
        }
    }
}

/// Dense autoencoder: ReLU hidden layers, identity output of the input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    net: Network,
    training_set_size: usize,
}

impl Autoencoder {
    pub fn from_network(net: Network) -> Result<Self> {
        if net.input_dim() != net.output_dim() {
            return Err(Error::shape(format!(
                "autoencoder maps {} inputs to {} outputs",
                net.input_dim(),
                net.output_dim()
            )));
        }
        if net.output_activation() != Activation::Identity {
            return Err(Error::input("autoencoder output layer must be linear"));
        }
        Ok(Autoencoder {
            net,
            training_set_size: 0,
        })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn training_set_size(&self) -> usize {
        self.training_set_size
    }

    pub fn reconstruct(&self, s: &SurrogateVector) -> Result<Vec<f64>> {
        if s.len() != self.dim() {
            return Err(Error::shape(format!(
                "surrogate has {} values, autoencoder expects {}",
                s.len(),
                self.dim()
            )));
        }
        Ok(self.net.predict_one(s.as_slice()))
    }
}

fn autoencoder_layers(dim: usize, hidden: &[usize]) -> Vec<LayerSpec> {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut prev = dim;
    for &h in hidden {
        layers.push(LayerSpec::new(prev, h, Activation::Relu));
        prev = h;
    }
    layers.push(LayerSpec::new(prev, dim, Activation::Identity));
    layers
}

fn to_matrix(surrogates: &[SurrogateVector]) -> Result<Matrix> {
    Matrix::from_rows(&surrogates.iter().map(|s| s.as_slice()).collect::<Vec<_>>())
}

/// Fits an autoencoder to reconstruct `surrogates`.
pub fn train_autoencoder(surrogates: &[SurrogateVector], cfg: &AutoencoderConfig) -> Result<Autoencoder> {
    if surrogates.len() < 2 {
        return Err(Error::input(format!(
            "autoencoder needs at least 2 training surrogates, got {}",
            surrogates.len()
        )));
    }
    let dim = surrogates[0].len();
    if dim == 0 || surrogates.iter().any(|s| s.len() != dim) {
        return Err(Error::shape("training surrogates must share one positive length"));
    }
    cfg.validate()?;
    if !cfg.is_symmetric() {
        log::warn!("autoencoder hidden sizes {:?} are not symmetric", cfg.hidden_sizes);
    }
    let data = to_matrix(surrogates)?;
    let mut r = rng::from_seed(cfg.seed);
    let mut net = Network::new(autoencoder_layers(dim, &cfg.hidden_sizes), &mut r)?;
    let train = cfg.train_config();
    for _ in 0..cfg.epochs {
        net = sgd_epoch(&net, &data, Targets::Values(&data), &train, Direction::Descent, &mut r)?.0;
    }
    Ok(Autoencoder {
        net,
        training_set_size: surrogates.len(),
    })
}

/// `‖s − ae(s)‖²`, dropout disabled.
pub fn reconstruction_error(ae: &Autoencoder, s: &SurrogateVector) -> Result<f64> {
    let out = ae.reconstruct(s)?;
    mse_loss(s.as_slice(), &out)
}

/// Mean reconstruction error over a set, computed through the batched
/// forward pass.
pub fn mean_reconstruction_error(ae: &Autoencoder, set: &[SurrogateVector]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::input("empty surrogate set"));
    }
    let x = to_matrix(set)?;
    let y = forward(&ae.net, &x)?;
    let mut total = 0.0;
    for (a, b) in x.iter_rows().zip(y.iter_rows()) {
        total += mse_loss(a, b)?;
    }
    Ok(total / set.len() as f64)
}

/// `A_k = (1 + err_k) / (1 + min_j err_j)`.
pub fn anomaly_scores(errors: &BTreeMap<ClientId, f64>) -> Result<BTreeMap<ClientId, f64>> {
    if errors.is_empty() {
        return Err(Error::input("no reconstruction errors to score"));
    }
    if let Some((id, e)) = errors.iter().find(|(_, e)| !(**e >= 0.0)) {
        return Err(Error::input(format!("client {id} has invalid error {e}")));
    }
    let sigma = errors.values().copied().fold(f64::INFINITY, f64::min);
    Ok(errors
        .iter()
        .map(|(&k, &e)| (k, (1.0 + e) / (1.0 + sigma)))
        .collect())
}

fn check_keys(a: &BTreeMap<ClientId, f64>, n: &BTreeMap<ClientId, u64>) -> Result<()> {
    if a.is_empty() {
        return Err(Error::input("no clients to weight"));
    }
    if !a.keys().eq(n.keys()) {
        return Err(Error::input("anomaly scores and sample counts cover different clients"));
    }
    if n.values().any(|&c| c == 0) {
        return Err(Error::input("sample counts must be positive"));
    }
    Ok(())
}

/// `α_k = n_k A_k^{-L} / Σ_j n_j A_j^{-L}`.
pub fn credit_scores(
    a: &BTreeMap<ClientId, f64>,
    n: &BTreeMap<ClientId, u64>,
    exponent: f64,
) -> Result<BTreeMap<ClientId, f64>> {
    check_keys(a, n)?;
    if !(exponent >= 0.0 && exponent.is_finite()) {
        return Err(Error::input(format!("credit exponent {exponent} must be finite and >= 0")));
    }
    let raw: Vec<(ClientId, f64)> = a
        .iter()
        .map(|(&k, &score)| (k, n[&k] as f64 * score.powf(-exponent)))
        .collect();
    let total: f64 = raw.iter().map(|(_, v)| v).sum();
    Ok(raw.into_iter().map(|(k, v)| (k, v / total)).collect())
}

/// How the hard-decision threshold is chosen each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdRule {
    Named(NamedThreshold),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedThreshold {
    Mean,
    Median,
}

impl ThresholdRule {
    pub const MEAN: ThresholdRule = ThresholdRule::Named(NamedThreshold::Mean);
    pub const MEDIAN: ThresholdRule = ThresholdRule::Named(NamedThreshold::Median);

    pub fn validate(&self) -> Result<()> {
        if let ThresholdRule::Value(v) = self {
            if !(*v >= 1.0) {
                return Err(Error::config(
                    "detection.threshold",
                    format!("explicit threshold {v} is below the minimum anomaly score 1 and would flag every client"),
                ));
            }
        }
        Ok(())
    }

    /// The threshold for this round's scores.
    pub fn resolve(&self, a: &BTreeMap<ClientId, f64>) -> Result<f64> {
        self.validate()?;
        if a.is_empty() {
            return Err(Error::input("no anomaly scores"));
        }
        let mut values: Vec<f64> = a.values().copied().collect();
        values.sort_by(f64::total_cmp);
        let (lo, hi) = (values[0], values[values.len() - 1]);
        let t = match self {
            ThresholdRule::Value(v) => return Ok(*v),
            ThresholdRule::Named(NamedThreshold::Mean) => {
                let k = values.len() as f64;
                let sum: f64 = values.iter().sum();
                if sum.is_finite() {
                    sum / k
                } else {
                    values.iter().map(|v| v / k).sum()
                }
            }
            ThresholdRule::Named(NamedThreshold::Median) => {
                let m = values.len() / 2;
                if values.len() % 2 == 1 {
                    values[m]
                } else {
                    values[m - 1] / 2.0 + values[m] / 2.0
                }
            }
        };
        // Rounding must never push the mean or median outside the data range.
        Ok(t.clamp(lo, hi))
    }
}

/// Result of hard thresholding.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholded {
    pub threshold: f64,
    pub alpha: BTreeMap<ClientId, f64>,
    pub flagged: BTreeSet<ClientId>,
}

/// Flags clients with `A_k` strictly above the threshold and gives them zero
/// weight. Survivors get `n_k / Σ_{surviving} n_j` when `renormalize`, or
/// `n_k / Σ_all n_j` otherwise (weights then sum to less than one).
pub fn threshold_credit_scores(
    a: &BTreeMap<ClientId, f64>,
    n: &BTreeMap<ClientId, u64>,
    rule: ThresholdRule,
    renormalize: bool,
) -> Result<Thresholded> {
    check_keys(a, n)?;
    let threshold = rule.resolve(a)?;
    let flagged: BTreeSet<ClientId> = a
        .iter()
        .filter(|(_, &score)| score > threshold)
        .map(|(&k, _)| k)
        .collect();
    let denom: u64 = if renormalize {
        n.iter().filter(|(k, _)| !flagged.contains(k)).map(|(_, &c)| c).sum()
    } else {
        n.values().sum()
    };
    if denom == 0 {
        return Err(Error::input("every client was flagged"));
    }
    let alpha = n
        .iter()
        .map(|(&k, &c)| {
            let w = if flagged.contains(&k) { 0.0 } else { c as f64 / denom as f64 };
            (k, w)
        })
        .collect();
    Ok(Thresholded {
        threshold,
        alpha,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientScore {
    pub reconstruction_error: f64,
    pub anomaly_score: f64,
    pub credit_score: f64,
    pub flagged: bool,
}

/// Per-round detector output for the selected clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub threshold: f64,
    pub clients: BTreeMap<ClientId, ClientScore>,
}

impl AnomalyReport {
    pub fn alpha(&self) -> BTreeMap<ClientId, f64> {
        self.clients.iter().map(|(&k, s)| (k, s.credit_score)).collect()
    }

    pub fn flagged(&self) -> BTreeSet<ClientId> {
        self.clients
            .iter()
            .filter(|(_, s)| s.flagged)
            .map(|(&k, _)| k)
            .collect()
    }

    pub fn credit_sum(&self) -> f64 {
        self.clients.values().map(|s| s.credit_score).sum()
    }
}

/// How anomaly scores turn into aggregation weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    CreditScore,
    Thresholding,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionConfig {
    /// Exponent `L` of the credit score.
    pub credit_exponent: f64,
    pub threshold: ThresholdRule,
    /// Renormalize thresholding survivors to sum to one. When off they keep
    /// `n_k / n` and the step toward their mean shrinks accordingly.
    pub renormalize_survivors: bool,
    pub standardize_surrogates: bool,
    /// Refit the autoencoder every this many scored rounds; 0 never refits.
    pub retrain_every: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            credit_exponent: 2.0,
            threshold: ThresholdRule::MEAN,
            renormalize_survivors: true,
            standardize_surrogates: true,
            retrain_every: 0,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.credit_exponent >= 0.0 && self.credit_exponent.is_finite()) {
            return Err(Error::config("detection.credit_exponent", "must be finite and >= 0"));
        }
        self.threshold.validate()
    }
}

/// A fitted detector: surrogate extraction, optional standardization and the
/// autoencoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    spec: SurrogateSpec,
    standardizer: Option<Standardizer>,
    autoencoder: Autoencoder,
}

impl Detector {
    /// Fits on raw (unstandardized) surrogates.
    pub fn fit(
        spec: SurrogateSpec,
        raw: &[SurrogateVector],
        ae_cfg: &AutoencoderConfig,
        standardize: bool,
    ) -> Result<Self> {
        let standardizer = if standardize { Some(Standardizer::fit(raw)?) } else { None };
        let inputs = match &standardizer {
            Some(st) => raw.iter().map(|s| st.apply(s)).collect::<Result<Vec<_>>>()?,
            None => raw.to_vec(),
        };
        let autoencoder = train_autoencoder(&inputs, ae_cfg)?;
        Ok(Detector {
            spec,
            standardizer,
            autoencoder,
        })
    }

    pub fn autoencoder(&self) -> &Autoencoder {
        &self.autoencoder
    }

    pub fn spec(&self) -> &SurrogateSpec {
        &self.spec
    }

    /// Reconstruction error of one update's surrogate. Non-finite results
    /// (from non-finite weights) saturate at `f64::MAX`.
    pub fn error_of(&self, update: &ClientUpdate) -> Result<f64> {
        let mut s = extract(&self.spec, &update.weights)?;
        if let Some(st) = &self.standardizer {
            s = st.apply(&s)?;
        }
        let e = reconstruction_error(&self.autoencoder, &s)?;
        Ok(if e.is_finite() { e } else { f64::MAX })
    }

    /// Scores a round. In credit-score mode `flagged` uses the configured
    /// threshold for reporting only; weights come from the credit scores.
    pub fn score(&self, updates: &[ClientUpdate], weighting: Weighting, cfg: &DetectionConfig) -> Result<AnomalyReport> {
        let mut errors = BTreeMap::new();
        let mut counts = BTreeMap::new();
        for u in updates {
            if errors.insert(u.client, self.error_of(u)?).is_some() {
                return Err(Error::input(format!("duplicate update from client {}", u.client)));
            }
            counts.insert(u.client, u.samples);
        }
        let a = anomaly_scores(&errors)?;
        let (alpha, flagged, threshold) = match weighting {
            Weighting::CreditScore => {
                let alpha = credit_scores(&a, &counts, cfg.credit_exponent)?;
                let threshold = cfg.threshold.resolve(&a)?;
                let flagged = a.iter().filter(|(_, &s)| s > threshold).map(|(&k, _)| k).collect();
                (alpha, flagged, threshold)
            }
            Weighting::Thresholding => {
                let t = threshold_credit_scores(&a, &counts, cfg.threshold, cfg.renormalize_survivors)?;
                (t.alpha, t.flagged, t.threshold)
            }
        };
        let clients = errors
            .iter()
            .map(|(&k, &err)| {
                (
                    k,
                    ClientScore {
                        reconstruction_error: err,
                        anomaly_score: a[&k],
                        credit_score: alpha[&k],
                        flagged: flagged.contains(&k),
                    },
                )
            })
            .collect();
        Ok(AnomalyReport { threshold, clients })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::WeightVector;
    use proptest::prelude::*;

    fn ids<const N: usize>(vals: [f64; N]) -> BTreeMap<ClientId, f64> {
        vals.iter().enumerate().map(|(i, &v)| (ClientId(i as u32), v)).collect()
    }

    fn counts<const N: usize>(vals: [u64; N]) -> BTreeMap<ClientId, u64> {
        vals.iter().enumerate().map(|(i, &v)| (ClientId(i as u32), v)).collect()
    }

    #[test]
    fn anomaly_score_examples() {
        assert_eq!(anomaly_scores(&ids([0.2, 0.2])).unwrap(), ids([1.0, 1.0]));
        // σ = 0.2: (1 + 0.8) / (1 + 0.2) = 1.5
        let a = anomaly_scores(&ids([0.2, 0.8])).unwrap();
        assert_eq!(a[&ClientId(0)], 1.0);
        assert!((a[&ClientId(1)] - 1.5).abs() < 1e-15);
        assert_eq!(anomaly_scores(&ids([3.7])).unwrap(), ids([1.0]));
        assert!(anomaly_scores(&BTreeMap::new()).is_err());
        assert!(anomaly_scores(&ids([-1.0])).is_err());
    }

    #[test]
    fn credit_score_examples() {
        let n = counts([3, 5, 2]);
        let equal = credit_scores(&ids([2.0, 2.0, 2.0]), &n, 2.0).unwrap();
        for (k, &c) in &n {
            assert!((equal[k] - c as f64 / 10.0).abs() < 1e-15);
        }
        let l0 = credit_scores(&ids([1.0, 4.0, 9.0]), &n, 0.0).unwrap();
        for (k, &c) in &n {
            assert!((l0[k] - c as f64 / 10.0).abs() < 1e-15);
        }
        // 1 / (1 + 2^-2) = 0.8
        let hand = credit_scores(&ids([1.0, 2.0]), &counts([1, 1]), 2.0).unwrap();
        assert!((hand[&ClientId(0)] - 0.8).abs() < 1e-15);
        assert!((hand[&ClientId(1)] - 0.2).abs() < 1e-15);
        assert!(credit_scores(&ids([1.0]), &counts([1, 1]), 2.0).is_err());
    }

    #[test]
    fn thresholding_examples() {
        let a = ids([1.0, 1.0, 3.0]);
        let n = counts([1, 3, 5]);
        let t = threshold_credit_scores(&a, &n, ThresholdRule::MEAN, true).unwrap();
        assert!((t.threshold - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(t.flagged, BTreeSet::from([ClientId(2)]));
        assert_eq!(t.alpha[&ClientId(0)], 0.25);
        assert_eq!(t.alpha[&ClientId(1)], 0.75);
        assert_eq!(t.alpha[&ClientId(2)], 0.0);

        let exact = threshold_credit_scores(&a, &n, ThresholdRule::MEAN, false).unwrap();
        assert!((exact.alpha.values().sum::<f64>() - 4.0 / 9.0).abs() < 1e-15);

        let same = threshold_credit_scores(&ids([1.3, 1.3, 1.3]), &n, ThresholdRule::MEAN, true).unwrap();
        assert!(same.flagged.is_empty());
        let same = threshold_credit_scores(&ids([1.1; 7]), &counts([1; 7]), ThresholdRule::MEAN, true).unwrap();
        assert!(same.flagged.is_empty());
    }

    #[test]
    fn median_threshold_and_explicit_values() {
        let a = ids([1.0, 2.0, 5.0, 9.0]);
        assert_eq!(ThresholdRule::MEDIAN.resolve(&a).unwrap(), 3.5);
        assert_eq!(ThresholdRule::Value(4.0).resolve(&a).unwrap(), 4.0);
        assert!(ThresholdRule::Value(0.5).validate().is_err());
        let n = counts([1, 1, 1, 1]);
        assert!(threshold_credit_scores(&a, &n, ThresholdRule::Value(0.9), true).is_err());
    }

    #[test]
    fn threshold_rule_serde() {
        #[derive(Deserialize)]
        struct W {
            t: ThresholdRule,
        }
        assert_eq!(toml::from_str::<W>("t = \"mean\"").unwrap().t, ThresholdRule::MEAN);
        assert_eq!(toml::from_str::<W>("t = \"median\"").unwrap().t, ThresholdRule::MEDIAN);
        assert_eq!(toml::from_str::<W>("t = 2.5").unwrap().t, ThresholdRule::Value(2.5));
        assert!(toml::from_str::<W>("t = \"max\"").is_err());
    }

    #[test]
    fn huge_scores_do_not_overflow_threshold() {
        let a = ids([1.0, 1.2, f64::MAX, f64::MAX]);
        let t = threshold_credit_scores(&a, &counts([1, 1, 1, 1]), ThresholdRule::MEAN, true).unwrap();
        assert_eq!(t.flagged, BTreeSet::from([ClientId(2), ClientId(3)]));
        let c = credit_scores(&a, &counts([1, 1, 1, 1]), 2.0).unwrap();
        assert_eq!(c[&ClientId(2)], 0.0);
        assert!((c.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_built_autoencoder_error() {
        // 1-2-1: h = relu(2s + 0.5, -s + 1); out = 0.5 h1 + 3 h2 - 0.25
        // s = 1: h = (2.5, 0); out = 1.0; err = 0
        // s = 2: h = (4.5, 0); out = 2.0; err = 0
        // s = -1: h = (0, 2); out = 5.75; err = 6.75² = 45.5625
        let net = Network::from_params(
            vec![LayerSpec::new(1, 2, Activation::Relu), LayerSpec::new(2, 1, Activation::Identity)],
            WeightVector(vec![2.0, -1.0, 0.5, 1.0, 0.5, 3.0, -0.25]),
        )
        .unwrap();
        let ae = Autoencoder::from_network(net).unwrap();
        assert_eq!(reconstruction_error(&ae, &SurrogateVector(vec![1.0])).unwrap(), 0.0);
        assert_eq!(reconstruction_error(&ae, &SurrogateVector(vec![2.0])).unwrap(), 0.0);
        assert_eq!(reconstruction_error(&ae, &SurrogateVector(vec![-1.0])).unwrap(), 45.5625);
    }

    #[test]
    fn error_is_mse_of_forward() {
        let set: Vec<SurrogateVector> = (0..6)
            .map(|i| SurrogateVector((0..5).map(|j| ((i * 5 + j) as f64).sin()).collect()))
            .collect();
        let cfg = AutoencoderConfig { hidden_sizes: vec![4, 2, 4], epochs: 3, ..Default::default() };
        let ae = train_autoencoder(&set, &cfg).unwrap();
        for s in &set {
            let out = forward(ae.network(), &Matrix::from_rows(&[s.as_slice()]).unwrap()).unwrap();
            assert_eq!(reconstruction_error(&ae, s).unwrap(), mse_loss(s.as_slice(), out.row(0)).unwrap());
        }
    }

    #[test]
    fn training_needs_two_points() {
        let cfg = AutoencoderConfig::default();
        assert!(matches!(
            train_autoencoder(&[SurrogateVector(vec![1.0])], &cfg),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn zero_data_keeps_zero_fixed_point() {
        let set = vec![SurrogateVector(vec![0.0; 6]); 4];
        let cfg = AutoencoderConfig { epochs: 5, ..Default::default() };
        let ae = train_autoencoder(&set, &cfg).unwrap();
        assert_eq!(reconstruction_error(&ae, &set[0]).unwrap(), 0.0);
    }

    #[test]
    fn converges_on_single_point_cluster() {
        let v = SurrogateVector((0..12).map(|i| (i as f64 * 0.7).cos()).collect());
        let set = vec![v.clone(); 8];
        let cfg = AutoencoderConfig {
            hidden_sizes: vec![8, 4, 8],
            dropout_rate: 0.0,
            epochs: 400,
            learning_rate: 0.05,
            train_batch_size: 4,
            seed: 3,
        };
        let ae = train_autoencoder(&set, &cfg).unwrap();
        let norm2: f64 = v.as_slice().iter().map(|x| x * x).sum();
        let err = reconstruction_error(&ae, &v).unwrap();
        assert!(err < 0.01 * norm2, "err {err} vs {norm2}");
    }

    #[test]
    fn training_reduces_error_and_is_deterministic() {
        let mut r = rng::from_seed(8);
        use rand::Rng;
        let set: Vec<SurrogateVector> = (0..20)
            .map(|_| {
                let t: f64 = r.random();
                SurrogateVector((0..10).map(|j| t * j as f64 * 0.1 + 0.05 * r.random::<f64>()).collect())
            })
            .collect();
        let cfg = AutoencoderConfig { hidden_sizes: vec![8, 3, 8], epochs: 60, seed: 5, ..Default::default() };
        let untrained = train_autoencoder(&set, &AutoencoderConfig { epochs: 0, ..cfg.clone() });
        // zero epochs is rejected by validation
        assert!(untrained.is_err());
        let mut r0 = rng::from_seed(cfg.seed);
        let init = Autoencoder::from_network(Network::new(autoencoder_layers(10, &cfg.hidden_sizes), &mut r0).unwrap()).unwrap();
        let a = train_autoencoder(&set, &cfg).unwrap();
        let b = train_autoencoder(&set, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(mean_reconstruction_error(&a, &set).unwrap() < mean_reconstruction_error(&init, &set).unwrap());
    }

    proptest! {
        #[test]
        fn score_invariants(errs in proptest::collection::vec(0.0f64..50.0, 1..12), l in 0.5f64..4.0) {
            let e: BTreeMap<ClientId, f64> = errs.iter().enumerate().map(|(i, &v)| (ClientId(i as u32), v)).collect();
            let n: BTreeMap<ClientId, u64> = e.keys().map(|&k| (k, 1 + k.0 as u64 % 5)).collect();
            let a = anomaly_scores(&e).unwrap();
            prop_assert_eq!(a.values().copied().fold(f64::INFINITY, f64::min), 1.0);
            let alpha = credit_scores(&a, &n, l).unwrap();
            prop_assert!((alpha.values().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(alpha.values().all(|&x| (0.0..=1.0).contains(&x)));

            // raising one client's error strictly lowers its credit
            if e.len() > 1 {
                let k = ClientId(0);
                let mut e2 = e.clone();
                *e2.get_mut(&k).unwrap() += 1.0;
                let alpha2 = credit_scores(&anomaly_scores(&e2).unwrap(), &n, l).unwrap();
                prop_assert!(alpha2[&k] < alpha[&k]);
            }

            let t = threshold_credit_scores(&a, &n, ThresholdRule::MEAN, true).unwrap();
            prop_assert!(t.flagged.len() < e.len());
            prop_assert!((t.alpha.values().sum::<f64>() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn permutation_equivariance(errs in proptest::collection::vec(0.0f64..10.0, 2..8), shift in 1u32..100) {
            let e: BTreeMap<ClientId, f64> = errs.iter().enumerate().map(|(i, &v)| (ClientId(i as u32), v)).collect();
            // relabel k -> (k * 7 + shift) which is injective on the range
            let relabel = |k: ClientId| ClientId(k.0 * 7 + shift);
            let e2: BTreeMap<ClientId, f64> = e.iter().map(|(&k, &v)| (relabel(k), v)).collect();
            let n: BTreeMap<ClientId, u64> = e.keys().map(|&k| (k, 2 + k.0 as u64)).collect();
            let n2: BTreeMap<ClientId, u64> = n.iter().map(|(&k, &v)| (relabel(k), v)).collect();
            let a = credit_scores(&anomaly_scores(&e).unwrap(), &n, 2.0).unwrap();
            let a2 = credit_scores(&anomaly_scores(&e2).unwrap(), &n2, 2.0).unwrap();
            for (k, v) in &a {
                prop_assert!((a2[&relabel(*k)] - v).abs() < 1e-15);
            }
        }
    }
}
