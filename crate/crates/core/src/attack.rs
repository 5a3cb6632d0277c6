//! Abnormal-client behaviors.
//!
//! Sign flipping and additive noise transform an already trained local
//! weight vector. Gradient ascent changes the direction of local training
//! itself; see [`crate::sim::local_train`].

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Direction, TrainConfig};
use crate::sim::{local_train, ClientState};
use crate::nn::Network;
use crate::weights::WeightVector;

pub const DEFAULT_NOISE_STD: f64 = 1.0;

fn default_noise_std() -> f64 {
    DEFAULT_NOISE_STD
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAttack", into = "RawAttack")]
pub enum AttackSpec {
    SignFlip,
    AdditiveNoise { noise_std: f64 },
    GradientAscent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AttackKind {
    SignFlip,
    AdditiveNoise,
    GradientAscent,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAttack {
    kind: AttackKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_std: Option<f64>,
}

impl TryFrom<RawAttack> for AttackSpec {
    type Error = String;
    fn try_from(raw: RawAttack) -> std::result::Result<Self, String> {
        match (raw.kind, raw.noise_std) {
            (AttackKind::AdditiveNoise, std) => Ok(AttackSpec::AdditiveNoise {
                noise_std: std.unwrap_or_else(default_noise_std),
            }),
            (_, Some(_)) => Err("noise_std only applies to additive_noise".into()),
            (AttackKind::SignFlip, None) => Ok(AttackSpec::SignFlip),
            (AttackKind::GradientAscent, None) => Ok(AttackSpec::GradientAscent),
        }
    }
}

impl From<AttackSpec> for RawAttack {
    fn from(a: AttackSpec) -> Self {
        match a {
            AttackSpec::SignFlip => RawAttack { kind: AttackKind::SignFlip, noise_std: None },
            AttackSpec::AdditiveNoise { noise_std } => RawAttack {
                kind: AttackKind::AdditiveNoise,
                noise_std: Some(noise_std),
            },
            AttackSpec::GradientAscent => RawAttack { kind: AttackKind::GradientAscent, noise_std: None },
        }
    }
}

impl AttackSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::SignFlip => "sign_flip",
            AttackSpec::AdditiveNoise { .. } => "additive_noise",
            AttackSpec::GradientAscent => "gradient_ascent",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let AttackSpec::AdditiveNoise { noise_std } = self {
            if !(*noise_std > 0.0 && noise_std.is_finite()) {
                return Err(Error::config("attack.noise_std", "must be a positive finite number"));
            }
        }
        Ok(())
    }

    /// Direction the attacker uses for local training.
    pub fn training_direction(&self) -> Direction {
        match self {
            AttackSpec::GradientAscent => Direction::Ascent,
            _ => Direction::Descent,
        }
    }

    /// Post-training transformation of the local weights.
    pub fn apply<R: Rng + ?Sized>(&self, w: WeightVector, rng: &mut R) -> WeightVector {
        match *self {
            AttackSpec::SignFlip => apply_sign_flip(&w),
            AttackSpec::AdditiveNoise { noise_std } => apply_additive_noise(&w, noise_std, rng),
            AttackSpec::GradientAscent => w,
        }
    }
}

pub fn apply_sign_flip(w: &WeightVector) -> WeightVector {
    WeightVector(w.iter().map(|v| -v).collect())
}

/// Adds i.i.d. `N(0, noise_std²)` noise drawn from `rng`.
pub fn apply_additive_noise<R: Rng + ?Sized>(w: &WeightVector, noise_std: f64, rng: &mut R) -> WeightVector {
    let normal = Normal::new(0.0, noise_std).expect("noise_std is validated positive");
    WeightVector(w.iter().map(|v| v + normal.sample(rng)).collect())
}

/// Local training with the gradient sign reversed.
pub fn apply_gradient_ascent<R: Rng + ?Sized>(
    client: &ClientState,
    model: &Network,
    global_weights: &WeightVector,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<WeightVector> {
    local_train(client, model, global_weights, cfg, Direction::Ascent, rng)
}
