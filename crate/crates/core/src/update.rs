use std::fmt;

use serde::{Deserialize, Serialize};

use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientId(pub u32);

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One client's submission for a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientUpdate {
    pub client: ClientId,
    /// Local sample count `n_k`.
    pub samples: u64,
    pub weights: WeightVector,
    /// Ground truth, known only to the simulator; used for scoring detection.
    pub attacked: bool,
}

impl ClientUpdate {
    pub fn new(client: u32, samples: u64, weights: impl Into<WeightVector>) -> Self {
        ClientUpdate {
            client: ClientId(client),
            samples,
            weights: weights.into(),
            attacked: false,
        }
    }
}
