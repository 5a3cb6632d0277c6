use std::collections::BTreeSet;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{local_train, partition_non_iid, ClientState, Phase};
use crate::aggregate::{
    fedavg_aggregate, geomed_aggregate, krum_select, trimmed_mean_aggregate, weighted_aggregate, BaselineParams, Method,
};
use crate::attack::AttackSpec;
use crate::data::Dataset;
use crate::detector::{AnomalyReport, AutoencoderConfig, DetectionConfig, Detector, Weighting};
use crate::error::{Error, Result};
use crate::nn::{evaluate, Activation, Direction, LayerSpec, Network, TrainConfig};
use crate::rng::{self, Purpose};
use crate::surrogate::{extract, SurrogateConfig, SurrogateSpec, SurrogateVector};
use crate::update::{ClientId, ClientUpdate};
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationConfig {
    pub total_clients: usize,
    /// `K`, clients selected per round.
    pub clients_per_round: usize,
    /// Rounds after the warm-up.
    pub rounds: usize,
    pub abnormal_fraction: f64,
    pub aggregation_method: Method,
    pub train: TrainConfig,
    pub warmup_rounds: usize,
    /// Set from the experiment's top-level `seed`.
    #[serde(skip)]
    pub master_seed: u64,
    pub allow_attacks_in_warmup: bool,
    /// Dirichlet concentration of the label-skewed partition.
    pub dirichlet_concentration: f64,
}

impl Default for FederationConfig {
    fn default() -> Self {
        FederationConfig {
            total_clients: 60,
            clients_per_round: 20,
            rounds: 100,
            abnormal_fraction: 0.3,
            aggregation_method: Method::Thresholding,
            train: TrainConfig::default(),
            warmup_rounds: 10,
            master_seed: 0,
            allow_attacks_in_warmup: false,
            dirichlet_concentration: 0.5,
        }
    }
}

impl FederationConfig {
    /// Attacked clients per attack round, `⌊abnormal_fraction × K⌋`.
    pub fn attack_quota(&self) -> usize {
        (self.abnormal_fraction * self.clients_per_round as f64).floor() as usize
    }

    /// Size of the persistent attacker pool.
    pub fn attacker_pool(&self) -> usize {
        let wanted = (self.abnormal_fraction * self.total_clients as f64).floor() as usize;
        let quota = self.attack_quota();
        let max_pool = self.total_clients - (self.clients_per_round - quota);
        wanted.max(quota).min(max_pool)
    }

    pub fn total_rounds(&self) -> usize {
        self.warmup_rounds + self.rounds
    }

    pub fn validate(&self) -> Result<()> {
        let f = |name: &str| format!("federation.{name}");
        if self.total_clients == 0 {
            return Err(Error::config(f("total_clients"), "must be positive"));
        }
        if self.clients_per_round == 0 || self.clients_per_round > self.total_clients {
            return Err(Error::config(f("clients_per_round"), "must lie in 1..=total_clients"));
        }
        if !(0.0..1.0).contains(&self.abnormal_fraction) {
            return Err(Error::config(f("abnormal_fraction"), "must lie in [0, 1)"));
        }
        if self.attack_quota() >= self.clients_per_round {
            return Err(Error::config(f("abnormal_fraction"), "would make every selected client abnormal"));
        }
        if !(self.dirichlet_concentration > 0.0 && self.dirichlet_concentration.is_finite()) {
            return Err(Error::config(f("dirichlet_concentration"), "must be positive"));
        }
        if self.aggregation_method.uses_detector() && self.rounds > 0 {
            if self.warmup_rounds * self.clients_per_round < 2 {
                return Err(Error::config(
                    f("warmup_rounds"),
                    "detection needs at least two warm-up updates to train the autoencoder",
                ));
            }
        }
        self.train.validate().map_err(|e| match e {
            Error::Config { field, message } => Error::config(format!("federation.train.{field}"), message),
            other => other,
        })
    }
}

/// Server-side settings for detection and the baseline aggregators.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerConfig {
    pub surrogate: SurrogateConfig,
    pub autoencoder: AutoencoderConfig,
    pub detection: DetectionConfig,
    pub baselines: BaselineParams,
}

impl ServerConfig {
    pub fn validate(&self) -> Result<()> {
        self.surrogate.validate()?;
        self.autoencoder.validate()?;
        self.detection.validate()?;
        self.baselines.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSelection {
    /// Sorted by id.
    pub clients: Vec<ClientId>,
    pub attacked: BTreeSet<ClientId>,
}

/// Everything recorded about one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub phase: Phase,
    pub method: Method,
    pub accuracy: f64,
    /// Absent once the global model has diverged to non-finite values.
    pub loss: Option<f64>,
    /// Absent when the method has no detector, or when nothing was flagged.
    pub precision: Option<f64>,
    /// Absent when the method has no detector, or when no client was attacked.
    pub recall: Option<f64>,
    pub selected: Vec<ClientId>,
    pub attacked: Vec<ClientId>,
    pub report: Option<AnomalyReport>,
    /// Set when aggregation failed and the previous global model was kept.
    pub fallback: Option<String>,
}

/// A running federation: clients, attacker identities, server state.
pub struct Federation {
    cfg: FederationConfig,
    server: ServerConfig,
    attack: AttackSpec,
    model: Network,
    clients: Vec<ClientState>,
    attackers: BTreeSet<ClientId>,
    test: Dataset,
    spec: SurrogateSpec,
    buffer: Vec<SurrogateVector>,
    detector: Option<Detector>,
    detector_fits: u64,
    scored_rounds: usize,
}

impl Federation {
    /// Partitions `train` across clients, designates attackers and draws the
    /// initial model. `hidden` lists hidden-layer widths of the classifier.
    pub fn new(
        cfg: FederationConfig,
        server: ServerConfig,
        attack: AttackSpec,
        hidden: &[usize],
        train: &Dataset,
        test: Dataset,
    ) -> Result<Self> {
        cfg.validate()?;
        server.validate()?;
        attack.validate()?;
        if train.input_dim() != test.input_dim() || test.is_empty() {
            return Err(Error::input("train and test sets must share a non-zero input width"));
        }
        let classes = train.classes().max(test.classes());
        let layers = classifier_layers(train.input_dim(), hidden, classes);
        let model = Network::new(layers, &mut rng::stream(cfg.master_seed, Purpose::ModelInit, 0, 0))?;
        let clients = partition_non_iid(train, cfg.total_clients, cfg.dirichlet_concentration, cfg.master_seed)?;

        let pool = cfg.attacker_pool();
        let mut ar = rng::stream(cfg.master_seed, Purpose::AttackerAssignment, 0, 0);
        let attackers = index::sample(&mut ar, cfg.total_clients, pool)
            .into_iter()
            .map(|i| ClientId(i as u32))
            .collect();

        let spec = server
            .surrogate
            .build(model.layout(), rng::split_seed(cfg.master_seed, Purpose::Surrogate, 0, 0))?;

        Ok(Federation {
            cfg,
            server,
            attack,
            model,
            clients,
            attackers,
            test,
            spec,
            buffer: Vec::new(),
            detector: None,
            detector_fits: 0,
            scored_rounds: 0,
        })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.cfg
    }

    pub fn clients(&self) -> &[ClientState] {
        &self.clients
    }

    pub fn attackers(&self) -> &BTreeSet<ClientId> {
        &self.attackers
    }

    pub fn model(&self) -> &Network {
        &self.model
    }

    pub fn surrogate_spec(&self) -> &SurrogateSpec {
        &self.spec
    }

    pub fn detector(&self) -> Option<&Detector> {
        self.detector.as_ref()
    }

    pub fn initial_weights(&self) -> WeightVector {
        self.model.params().clone()
    }

    pub fn is_warmup(&self, round: usize) -> bool {
        round < self.cfg.warmup_rounds
    }

    /// Test accuracy and loss of `weights`.
    pub fn evaluate(&self, weights: &WeightVector) -> Result<(f64, f64)> {
        let net = self.model.with_params(weights.clone())?;
        let e = evaluate(&net, self.test.features(), self.test.labels())?;
        Ok((e.accuracy, e.loss))
    }

    /// The `K` clients of a round. Warm-up rounds draw from honest clients
    /// (topping up with attackers, whose attacks stay off, only if there are
    /// too few); attack rounds draw exactly the attack quota from the
    /// attacker pool and the rest from honest clients.
    pub fn select_round_clients(&self, round: usize) -> RoundSelection {
        let k = self.cfg.clients_per_round;
        let mut r = rng::stream(self.cfg.master_seed, Purpose::Selection, round as u64, 0);
        let honest: Vec<ClientId> = self
            .clients
            .iter()
            .map(|c| c.id())
            .filter(|id| !self.attackers.contains(id))
            .collect();
        let bad: Vec<ClientId> = self.attackers.iter().copied().collect();
        let pick = |pool: &[ClientId], n: usize, r: &mut rng::Stream| -> Vec<ClientId> {
            index::sample(r, pool.len(), n).into_iter().map(|i| pool[i]).collect()
        };

        let attack_round = !self.is_warmup(round) || self.cfg.allow_attacks_in_warmup;
        let (mut clients, attacked) = if attack_round {
            let quota = self.cfg.attack_quota();
            let a = pick(&bad, quota, &mut r);
            let mut h = pick(&honest, k - quota, &mut r);
            let attacked: BTreeSet<ClientId> = a.iter().copied().collect();
            h.extend(a);
            (h, attacked)
        } else if honest.len() >= k {
            (pick(&honest, k, &mut r), BTreeSet::new())
        } else {
            let mut h = honest.clone();
            h.extend(pick(&bad, k - honest.len(), &mut r));
            (h, BTreeSet::new())
        };
        clients.sort_unstable();
        RoundSelection { clients, attacked }
    }

    fn client(&self, id: ClientId) -> &ClientState {
        &self.clients[id.0 as usize]
    }

    /// Local training of one selected client, with its attack applied when
    /// it is attacking this round.
    fn local_update(&self, id: ClientId, global: &WeightVector, round: usize, attacked: bool) -> Result<ClientUpdate> {
        let client = self.client(id);
        let mut r = rng::stream(self.cfg.master_seed, Purpose::ClientRound, id.0 as u64, round as u64);
        let direction = if attacked { self.attack.training_direction() } else { Direction::Descent };
        let trained = local_train(client, &self.model, global, &self.cfg.train, direction, &mut r)?;
        let weights = if attacked { self.attack.apply(trained, &mut r) } else { trained };
        Ok(ClientUpdate {
            client: id,
            samples: client.num_samples() as u64,
            weights,
            attacked,
        })
    }

    /// Collects the round's updates; clients train in parallel, results keep
    /// selection order.
    pub fn collect_updates(&self, global: &WeightVector, round: usize) -> Result<(RoundSelection, Vec<ClientUpdate>)> {
        if global.len() != self.model.params().len() {
            return Err(Error::shape(format!(
                "global weights have {} values, model has {}",
                global.len(),
                self.model.params().len()
            )));
        }
        let sel = self.select_round_clients(round);
        let updates = sel
            .clients
            .par_iter()
            .map(|&id| self.local_update(id, global, round, sel.attacked.contains(&id)))
            .collect::<Result<Vec<_>>>()?;
        Ok((sel, updates))
    }

    fn fit_detector(&mut self) -> Result<()> {
        let mut ae: AutoencoderConfig = self.server.autoencoder.clone();
        ae.seed = rng::split_seed(self.cfg.master_seed, Purpose::Autoencoder, self.server.autoencoder.seed, self.detector_fits);
        self.detector = Some(Detector::fit(
            self.spec.clone(),
            &self.buffer,
            &ae,
            self.server.detection.standardize_surrogates,
        )?);
        self.detector_fits += 1;
        Ok(())
    }

    fn aggregate(
        &mut self,
        method: Method,
        global: &WeightVector,
        updates: &[ClientUpdate],
    ) -> Result<(WeightVector, Option<AnomalyReport>)> {
        if updates.len() == 1 {
            let report = if method.uses_detector() {
                Some(self.score(method, updates)?)
            } else {
                None
            };
            return Ok((updates[0].weights.clone(), report));
        }
        let b = &self.server.baselines;
        let out = match method {
            Method::Fedavg => fedavg_aggregate(updates)?,
            Method::Krum => krum_select(updates, b.krum_f_for(updates.len()))?,
            Method::Geomed => geomed_aggregate(updates, b.geomed_tol, b.geomed_max_iters)?,
            Method::TrimmedMean => trimmed_mean_aggregate(updates, b.trim_fraction)?,
            Method::CreditScore | Method::Thresholding => {
                let report = self.score(method, updates)?;
                let alpha = report.alpha();
                let total: f64 = alpha.values().sum();
                let w = if !self.server.detection.renormalize_survivors && total < 1.0 {
                    // Σα < 1 scales the aggregated step, not the model itself.
                    let deltas: Vec<ClientUpdate> = updates
                        .iter()
                        .map(|u| {
                            Ok(ClientUpdate {
                                weights: u.weights.sub(global)?,
                                ..u.clone()
                            })
                        })
                        .collect::<Result<_>>()?;
                    global.add(&weighted_aggregate(&deltas, &alpha)?)?
                } else {
                    weighted_aggregate(updates, &alpha)?
                };
                return Ok((w, Some(report)));
            }
        };
        Ok((out, None))
    }

    fn score(&mut self, method: Method, updates: &[ClientUpdate]) -> Result<AnomalyReport> {
        if self.detector.is_none() {
            self.fit_detector()?;
        }
        let weighting = match method {
            Method::CreditScore => Weighting::CreditScore,
            _ => Weighting::Thresholding,
        };
        self.detector
            .as_ref()
            .expect("fitted above")
            .score(updates, weighting, &self.server.detection)
    }

    /// Runs one round from `global`, returning the new global weights and
    /// the round's record. A failed aggregation keeps `global`; a non-finite
    /// aggregate is installed as is, as a real server would.
    pub fn run_round(&mut self, global: &WeightVector, round: usize) -> Result<(WeightVector, RoundRecord)> {
        let (sel, updates) = self.collect_updates(global, round)?;
        let warmup = self.is_warmup(round);
        let configured = self.cfg.aggregation_method;
        let detecting = configured.uses_detector();

        if warmup && detecting {
            for u in &updates {
                self.buffer.push(extract(&self.spec, &u.weights)?);
            }
        }

        let method = if warmup { Method::Fedavg } else { configured };
        let (next, report, fallback) = match self.aggregate(method, global, &updates) {
            Ok((w, report)) => (w, report, None),
            Err(e @ (Error::Input(_) | Error::Shape(_))) => (global.clone(), None, Some(e.to_string())),
            Err(e) => return Err(e),
        };

        let (precision, recall) = match &report {
            Some(rep) => detection_quality(&rep.flagged(), &sel.attacked),
            None => (None, None),
        };

        if !warmup && detecting && self.server.detection.retrain_every > 0 {
            if let Some(rep) = &report {
                for u in updates.iter().filter(|u| !rep.clients[&u.client].flagged) {
                    self.buffer.push(extract(&self.spec, &u.weights)?);
                }
            }
            self.scored_rounds += 1;
            if self.scored_rounds % self.server.detection.retrain_every == 0 {
                self.fit_detector()?;
            }
        }

        let (accuracy, loss) = self.evaluate(&next)?;
        let loss = loss.is_finite().then_some(loss);
        let record = RoundRecord {
            round,
            phase: if warmup { Phase::Warmup } else { Phase::Attack },
            method: configured,
            accuracy,
            loss,
            precision,
            recall,
            selected: sel.clients,
            attacked: sel.attacked.into_iter().collect(),
            report,
            fallback,
        };
        Ok((next, record))
    }

    /// Runs the warm-up and all attack rounds from the initial model.
    pub fn run(&mut self) -> Result<(WeightVector, Vec<RoundRecord>)> {
        let mut w = self.initial_weights();
        let mut records = Vec::with_capacity(self.cfg.total_rounds());
        for round in 0..self.cfg.total_rounds() {
            let (next, rec) = self.run_round(&w, round)?;
            w = next;
            records.push(rec);
        }
        Ok((w, records))
    }
}

/// Classifier used by the clients: ReLU hidden layers, softmax output.
pub fn classifier_layers(input_dim: usize, hidden: &[usize], classes: usize) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    let mut prev = input_dim;
    for &h in hidden {
        layers.push(LayerSpec::new(prev, h, Activation::Relu));
        prev = h;
    }
    layers.push(LayerSpec::new(prev, classes, Activation::Softmax));
    layers
}

/// Precision over flagged clients and recall over attacked ones; each is
/// absent when its denominator is zero.
pub fn detection_quality(flagged: &BTreeSet<ClientId>, attacked: &BTreeSet<ClientId>) -> (Option<f64>, Option<f64>) {
    let tp = flagged.intersection(attacked).count() as f64;
    let precision = (!flagged.is_empty()).then(|| tp / flagged.len() as f64);
    let recall = (!attacked.is_empty()).then(|| tp / attacked.len() as f64);
    (precision, recall)
}
