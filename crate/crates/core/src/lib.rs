//! Deterministic simulation of horizontal federated learning with
//! server-side detection of abnormal clients.
//!
//! Clients train a small classifier on label-skewed private data and send
//! their full local weights each round. A configurable fraction of them
//! misbehaves (sign flipping, additive Gaussian noise, or local gradient
//! ascent). The server aggregates with one of:
//!
//! * FedAvg, the sample-weighted mean;
//! * credit-score weighting, where an autoencoder trained on accumulated
//!   weight surrogates turns reconstruction errors into anomaly scores and
//!   soft aggregation weights;
//! * thresholding, which drops clients whose anomaly score exceeds the
//!   round's mean (or median) score;
//! * the defense-based baselines Krum, geometric median and trimmed mean.
//!
//! Everything is a pure function of the configuration and its master seed.
//! See `examples/` for one runnable program per capability.

pub mod aggregate;
pub mod attack;
pub mod config;
pub mod data;
pub mod detector;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod surrogate;
pub mod update;
pub mod weights;

pub use aggregate::Method;
pub use attack::AttackSpec;
pub use error::{Error, Result};
pub use update::{ClientId, ClientUpdate};
pub use weights::{LayerSlot, Layout, WeightVector};
