use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{activate, layer_forward};
use super::{Activation, Matrix, Network};
use crate::error::{Error, Result};
use crate::rng;
use crate::weights::WeightVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.06,
            batch_size: 16,
            epochs: 20,
            dropout_rate: 0.0,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be a finite non-negative number"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate", "must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Which way a step moves along the loss gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Descent,
    Ascent,
}

/// Supervision for a batch: class labels for softmax outputs, dense targets
/// (squared-error loss) otherwise.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Labels(&'a [usize]),
    Values(&'a Matrix),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Labels(l) => l.len(),
            Targets::Values(m) => m.rows(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// The parameter change of one SGD step: `∓ lr · grad`.
pub fn step_delta(grad: &[f64], learning_rate: f64, direction: Direction) -> Vec<f64> {
    let signed = match direction {
        Direction::Descent => -learning_rate,
        Direction::Ascent => learning_rate,
    };
    grad.iter().map(|g| g * signed).collect()
}

impl Network {
    /// Mean loss and its gradient over the given samples, dropout disabled.
    pub fn loss_and_gradient(&self, inputs: &Matrix, targets: Targets<'_>) -> Result<(f64, WeightVector)> {
        check_data(self, inputs, targets)?;
        let idx: Vec<usize> = (0..inputs.rows()).collect();
        let mut grad = vec![0.0; self.params().len()];
        let loss = batch_gradient::<rng::Stream>(self, inputs, targets, &idx, None, &mut grad)?;
        Ok((loss, WeightVector(grad)))
    }

    /// Mean loss over the given samples.
    pub fn loss(&self, inputs: &Matrix, targets: Targets<'_>) -> Result<f64> {
        check_data(self, inputs, targets)?;
        let mut total = 0.0;
        for i in 0..inputs.rows() {
            let (zs, acts) = forward_cached::<rng::Stream>(self, inputs.row(i), None);
            total += sample_loss(self, &zs, &acts, targets, i)?.0;
        }
        Ok(total / inputs.rows() as f64)
    }
}

/// One pass over the data in shuffled mini-batches. Returns the updated
/// network and the mean of the per-batch losses seen during the epoch.
pub fn sgd_epoch<R: Rng + ?Sized>(
    net: &Network,
    inputs: &Matrix,
    targets: Targets<'_>,
    cfg: &TrainConfig,
    direction: Direction,
    rng: &mut R,
) -> Result<(Network, f64)> {
    check_data(net, inputs, targets)?;
    cfg.validate()?;
    let mut order: Vec<usize> = (0..inputs.rows()).collect();
    order.shuffle(rng);

    let mut current = net.clone();
    let mut grad = vec![0.0; current.params().len()];
    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    for chunk in order.chunks(cfg.batch_size) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let dropout = (cfg.dropout_rate > 0.0).then_some(cfg.dropout_rate);
        let loss = batch_gradient(&current, inputs, targets, chunk, dropout.map(|p| (&mut *rng, p)), &mut grad)?;
        loss_sum += loss;
        batches += 1;
        for (p, d) in current
            .params_mut()
            .iter_mut()
            .zip(step_delta(&grad, cfg.learning_rate, direction))
        {
            *p += d;
        }
    }
    Ok((current, loss_sum / batches as f64))
}

/// Runs `cfg.epochs` epochs with a stream seeded from `cfg.rng_seed`.
pub fn train(net: &Network, inputs: &Matrix, targets: Targets<'_>, cfg: &TrainConfig, direction: Direction) -> Result<Network> {
    let mut r = rng::from_seed(cfg.rng_seed);
    let mut cur = net.clone();
    for _ in 0..cfg.epochs {
        cur = sgd_epoch(&cur, inputs, targets, cfg, direction, &mut r)?.0;
    }
    Ok(cur)
}

/// Classification accuracy and mean cross-entropy.
pub fn evaluate(net: &Network, inputs: &Matrix, labels: &[usize]) -> Result<Evaluation> {
    check_data(net, inputs, Targets::Labels(labels))?;
    let mut correct = 0usize;
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let (zs, acts) = forward_cached::<rng::Stream>(net, inputs.row(i), None);
        let out = acts.last().expect("non-empty network");
        let pred = argmax(out);
        if pred == y {
            correct += 1;
        }
        loss += sample_loss(net, &zs, &acts, Targets::Labels(labels), i)?.0;
    }
    Ok(Evaluation {
        accuracy: correct as f64 / labels.len() as f64,
        loss: loss / labels.len() as f64,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check_data(net: &Network, inputs: &Matrix, targets: Targets<'_>) -> Result<()> {
    if inputs.rows() == 0 {
        return Err(Error::input("dataset is empty"));
    }
    if inputs.cols() != net.input_dim() {
        return Err(Error::shape(format!(
            "inputs have {} columns, network expects {}",
            inputs.cols(),
            net.input_dim()
        )));
    }
    if targets.len() != inputs.rows() {
        return Err(Error::shape(format!(
            "{} inputs but {} targets",
            inputs.rows(),
            targets.len()
        )));
    }
    match targets {
        Targets::Labels(labels) => {
            if net.output_activation() != Activation::Softmax {
                return Err(Error::input("label targets require a softmax output layer"));
            }
            if let Some(bad) = labels.iter().find(|&&l| l >= net.output_dim()) {
                return Err(Error::input(format!(
                    "label {bad} out of range for {} outputs",
                    net.output_dim()
                )));
            }
        }
        Targets::Values(m) => {
            if net.output_activation() == Activation::Softmax {
                return Err(Error::input("dense targets require a non-softmax output layer"));
            }
            if m.cols() != net.output_dim() {
                return Err(Error::shape(format!(
                    "targets have {} columns, network outputs {}",
                    m.cols(),
                    net.output_dim()
                )));
            }
        }
    }
    Ok(())
}

/// Pre-activations and post-activations; `acts[0]` is the input.
fn forward_cached<R: Rng + ?Sized>(
    net: &Network,
    x: &[f64],
    mut dropout: Option<(&mut R, f64)>,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (zs, acts, _) = forward_masked(net, x, dropout.as_mut().map(|(r, p)| (&mut **r, *p)));
    (zs, acts)
}

type Masks = Vec<Option<Vec<f64>>>;

/// Like [`forward_cached`], also returning the inverted-dropout mask applied
/// to each hidden layer.
fn forward_masked<R: Rng + ?Sized>(
    net: &Network,
    x: &[f64],
    mut dropout: Option<(&mut R, f64)>,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Masks) {
    let n = net.layers().len();
    let mut zs = Vec::with_capacity(n);
    let mut acts = Vec::with_capacity(n + 1);
    let mut masks = Vec::with_capacity(n);
    acts.push(x.to_vec());
    for (l, (spec, slot)) in net.layers().iter().zip(net.layout().slots()).enumerate() {
        let z = layer_forward(net.params().as_slice(), slot, &acts[l]);
        let mut a = z.clone();
        activate(spec.activation, &mut a);
        let mut mask = None;
        if l + 1 < n {
            if let Some((r, p)) = dropout.as_mut() {
                let keep = 1.0 / (1.0 - *p);
                let m: Vec<f64> = (0..a.len())
                    .map(|_| if r.random::<f64>() < *p { 0.0 } else { keep })
                    .collect();
                for (v, s) in a.iter_mut().zip(&m) {
                    *v *= s;
                }
                mask = Some(m);
            }
        }
        zs.push(z);
        acts.push(a);
        masks.push(mask);
    }
    (zs, acts, masks)
}

/// Loss of one sample and the gradient with respect to the final
/// pre-activation.
fn sample_loss(
    net: &Network,
    zs: &[Vec<f64>],
    acts: &[Vec<f64>],
    targets: Targets<'_>,
    i: usize,
) -> Result<(f64, Vec<f64>)> {
    let z = zs.last().expect("non-empty network");
    let a = acts.last().expect("non-empty network");
    match (net.output_activation(), targets) {
        (Activation::Softmax, Targets::Labels(labels)) => {
            let y = labels[i];
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            let loss = lse - z[y];
            let mut dz = a.clone();
            dz[y] -= 1.0;
            Ok((loss, dz))
        }
        (act, Targets::Values(t)) => {
            let t = t.row(i);
            let d = a.len() as f64;
            let mut loss = 0.0;
            let mut dz = Vec::with_capacity(a.len());
            for ((&ak, &tk), &zk) in a.iter().zip(t).zip(z) {
                let diff = ak - tk;
                loss += diff * diff;
                let g = 2.0 * diff / d;
                dz.push(if act == Activation::Relu && zk <= 0.0 { 0.0 } else { g });
            }
            Ok((loss / d, dz))
        }
        _ => Err(Error::input("targets do not match the output layer")),
    }
}

/// Accumulates the mean gradient over `idx` into `grad`; returns the mean loss.
fn batch_gradient<R: Rng + ?Sized>(
    net: &Network,
    inputs: &Matrix,
    targets: Targets<'_>,
    idx: &[usize],
    mut dropout: Option<(&mut R, f64)>,
    grad: &mut [f64],
) -> Result<f64> {
    let params = net.params().as_slice();
    let slots = net.layout().slots();
    let mut loss = 0.0;
    for &i in idx {
        let (zs, acts, masks) = forward_masked(net, inputs.row(i), dropout.as_mut().map(|(r, p)| (&mut **r, *p)));
        let (l, mut dz) = sample_loss(net, &zs, &acts, targets, i)?;
        loss += l;
        for layer in (0..slots.len()).rev() {
            let slot = &slots[layer];
            let x = &acts[layer];
            let w = &params[slot.weight_range()];
            let gw_start = slot.offset;
            for (j, &d) in dz.iter().enumerate() {
                grad[slot.bias_range().start + j] += d;
            }
            for (ii, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let row = &mut grad[gw_start + ii * slot.output_dim..gw_start + (ii + 1) * slot.output_dim];
                for (g, &d) in row.iter_mut().zip(&dz) {
                    *g += xi * d;
                }
            }
            if layer == 0 {
                break;
            }
            let mut dx: Vec<f64> = (0..slot.input_dim)
                .map(|ii| {
                    let row = &w[ii * slot.output_dim..(ii + 1) * slot.output_dim];
                    row.iter().zip(&dz).map(|(a, b)| a * b).sum()
                })
                .collect();
            // dx is the gradient w.r.t. the previous layer's (masked) activation
            if let Some(mask) = &masks[layer - 1] {
                for (v, m) in dx.iter_mut().zip(mask) {
                    *v *= m;
                }
            }
            if net.layers()[layer - 1].activation == Activation::Relu {
                for (v, &z) in dx.iter_mut().zip(&zs[layer - 1]) {
                    if z <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            dz = dx;
        }
    }
    let scale = 1.0 / idx.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok(loss * scale)
}
