//! Federated rounds: partitioning, client selection, local training,
//! attack hooks, aggregation dispatch and evaluation.

mod federation;
mod partition;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::nn::{sgd_epoch, Direction, Network, Targets, TrainConfig};
use crate::update::ClientId;
use crate::weights::WeightVector;

pub use federation::{
    classifier_layers, detection_quality, Federation, FederationConfig, RoundRecord, RoundSelection, ServerConfig,
};
pub use partition::partition_non_iid;

/// A client's private data. Which clients misbehave is decided by the
/// federation at setup.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    id: ClientId,
    dataset: Dataset,
}

impl ClientState {
    pub fn new(id: ClientId, dataset: Dataset) -> Self {
        ClientState { id, dataset }
    }

    pub fn id(&self) -> ClientId {
        self.id
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// `n_k`.
    pub fn num_samples(&self) -> usize {
        self.dataset.len()
    }
}

/// Trains `model`'s architecture from `global_weights` on the client's data
/// for `cfg.epochs` epochs.
pub fn local_train<R: Rng + ?Sized>(
    client: &ClientState,
    model: &Network,
    global_weights: &WeightVector,
    cfg: &TrainConfig,
    direction: Direction,
    rng: &mut R,
) -> Result<WeightVector> {
    let mut net = model.with_params(global_weights.clone())?;
    let data = client.dataset();
    for _ in 0..cfg.epochs {
        net = sgd_epoch(&net, data.features(), Targets::Labels(data.labels()), cfg, direction, rng)?.0;
    }
    Ok(net.into_params())
}

/// Warm-up rounds are attack-free and aggregate with plain FedAvg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Warmup,
    Attack,
}
