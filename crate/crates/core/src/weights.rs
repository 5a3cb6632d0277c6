use std::ops::{Index, IndexMut, Range};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat model parameters, the unit exchanged between clients and server.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn zeros(len: usize) -> Self {
        WeightVector(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn sub(&self, other: &WeightVector) -> Result<WeightVector> {
        check_len(self.len(), other.len())?;
        Ok(WeightVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn add(&self, other: &WeightVector) -> Result<WeightVector> {
        check_len(self.len(), other.len())?;
        Ok(WeightVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn distance_squared(&self, other: &WeightVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("weight lengths differ: {a} vs {b}")));
    }
    Ok(())
}

impl From<Vec<f64>> for WeightVector {
    fn from(v: Vec<f64>) -> Self {
        WeightVector(v)
    }
}

impl Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for WeightVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Where one layer's parameters live inside a [`WeightVector`].
///
/// Weights come first, stored row-major as `input_dim x output_dim`, then
/// the `output_dim` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSlot {
    pub offset: usize,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl LayerSlot {
    pub fn weight_len(&self) -> usize {
        self.input_dim * self.output_dim
    }

    pub fn len(&self) -> usize {
        self.weight_len() + self.output_dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }

    pub fn weight_range(&self) -> Range<usize> {
        self.offset..self.offset + self.weight_len()
    }

    pub fn bias_range(&self) -> Range<usize> {
        self.offset + self.weight_len()..self.offset + self.len()
    }
}

/// Per-layer (offset, length) table of a flattened network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    slots: Vec<LayerSlot>,
}

impl Layout {
    /// Builds a contiguous layout from `(input_dim, output_dim)` pairs.
    pub fn from_dims(dims: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut offset = 0;
        let slots = dims
            .into_iter()
            .map(|(input_dim, output_dim)| {
                let slot = LayerSlot {
                    offset,
                    input_dim,
                    output_dim,
                };
                offset += slot.len();
                slot
            })
            .collect();
        Layout { slots }
    }

    pub fn slots(&self) -> &[LayerSlot] {
        &self.slots
    }

    pub fn slot(&self, layer: usize) -> Option<&LayerSlot> {
        self.slots.get(layer)
    }

    pub fn num_layers(&self) -> usize {
        self.slots.len()
    }

    pub fn total_len(&self) -> usize {
        self.slots.last().map_or(0, |s| s.offset + s.len())
    }

    /// Splits a flat vector into per-layer `(weights, biases)` copies.
    pub fn unflatten(&self, w: &WeightVector) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        check_len(self.total_len(), w.len())?;
        Ok(self
            .slots
            .iter()
            .map(|s| (w.0[s.weight_range()].to_vec(), w.0[s.bias_range()].to_vec()))
            .collect())
    }

    /// Inverse of [`Layout::unflatten`].
    pub fn flatten(&self, parts: &[(Vec<f64>, Vec<f64>)]) -> Result<WeightVector> {
        if parts.len() != self.slots.len() {
            return Err(Error::shape(format!(
                "expected {} layers, got {}",
                self.slots.len(),
                parts.len()
            )));
        }
        let mut out = Vec::with_capacity(self.total_len());
        for (slot, (w, b)) in self.slots.iter().zip(parts) {
            check_len(slot.weight_len(), w.len())?;
            check_len(slot.output_dim, b.len())?;
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        Ok(WeightVector(out))
    }
}
