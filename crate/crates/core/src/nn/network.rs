use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::weights::{LayerSlot, Layout, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            input_dim,
            output_dim,
            activation,
        }
    }
}

/// A feed-forward network: layer specs plus their flattened parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<LayerSpec>,
    params: WeightVector,
    layout: Layout,
}

impl Network {
    /// Glorot-uniform weights drawn from `rng`, zero biases.
    pub fn new<R: Rng + ?Sized>(layers: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        let layout = validate_layers(&layers)?;
        let mut params = WeightVector::zeros(layout.total_len());
        for slot in layout.slots() {
            let limit = (6.0 / (slot.input_dim + slot.output_dim) as f64).sqrt();
            for v in &mut params.as_mut_slice()[slot.weight_range()] {
                *v = rng.random_range(-limit..=limit);
            }
        }
        Ok(Network {
            layers,
            params,
            layout,
        })
    }

    pub fn from_params(layers: Vec<LayerSpec>, params: WeightVector) -> Result<Self> {
        let layout = validate_layers(&layers)?;
        if params.len() != layout.total_len() {
            return Err(Error::shape(format!(
                "network needs {} parameters, got {}",
                layout.total_len(),
                params.len()
            )));
        }
        Ok(Network {
            layers,
            params,
            layout,
        })
    }

    pub fn zeros(layers: Vec<LayerSpec>) -> Result<Self> {
        let layout = validate_layers(&layers)?;
        let params = WeightVector::zeros(layout.total_len());
        Ok(Network {
            layers,
            params,
            layout,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn params(&self) -> &WeightVector {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [f64] {
        self.params.as_mut_slice()
    }

    pub fn into_params(self) -> WeightVector {
        self.params
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }

    pub fn output_activation(&self) -> Activation {
        self.layers[self.layers.len() - 1].activation
    }

    /// Same architecture, different parameters.
    pub fn with_params(&self, params: WeightVector) -> Result<Network> {
        Network::from_params(self.layers.clone(), params)
    }

    /// Forward pass for a single sample, returning the final activation.
    pub fn predict_one(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for (spec, slot) in self.layers.iter().zip(self.layout.slots()) {
            cur = layer_forward(self.params.as_slice(), slot, &cur);
            activate(spec.activation, &mut cur);
        }
        cur
    }
}

fn validate_layers(layers: &[LayerSpec]) -> Result<Layout> {
    if layers.is_empty() {
        return Err(Error::input("network needs at least one layer"));
    }
    for (i, l) in layers.iter().enumerate() {
        if l.input_dim == 0 || l.output_dim == 0 {
            return Err(Error::input(format!("layer {i} has a zero dimension")));
        }
        if l.activation == Activation::Softmax && i + 1 != layers.len() {
            return Err(Error::input(format!(
                "softmax is only allowed on the final layer (found on layer {i})"
            )));
        }
        if i > 0 && layers[i - 1].output_dim != l.input_dim {
            return Err(Error::shape(format!(
                "layer {} outputs {} values but layer {i} expects {}",
                i - 1,
                layers[i - 1].output_dim,
                l.input_dim
            )));
        }
    }
    Ok(Layout::from_dims(
        layers.iter().map(|l| (l.input_dim, l.output_dim)),
    ))
}

/// `x · W + b` for one layer, weights stored `input_dim x output_dim`.
pub(crate) fn layer_forward(params: &[f64], slot: &LayerSlot, x: &[f64]) -> Vec<f64> {
    let w = &params[slot.weight_range()];
    let mut out = params[slot.bias_range()].to_vec();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &w[i * slot.output_dim..(i + 1) * slot.output_dim];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

pub(crate) fn activate(act: Activation, z: &mut [f64]) {
    match act {
        Activation::Identity => {}
        Activation::Relu => {
            for v in z.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        Activation::Softmax => {
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in z.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in z.iter_mut() {
                *v /= sum;
            }
        }
    }
}

/// Runs every row of `batch` through `net`.
pub fn forward(net: &Network, batch: &Matrix) -> Result<Matrix> {
    if batch.cols() != net.input_dim() {
        return Err(Error::shape(format!(
            "batch has {} columns, network expects {}",
            batch.cols(),
            net.input_dim()
        )));
    }
    let out_dim = net.output_dim();
    let mut data = Vec::with_capacity(batch.rows() * out_dim);
    for row in batch.iter_rows() {
        data.extend(net.predict_one(row));
    }
    Matrix::new(batch.rows(), out_dim, data)
}

/// Squared Euclidean distance `‖a − b‖²`.
pub fn mse_loss(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "vector lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}
