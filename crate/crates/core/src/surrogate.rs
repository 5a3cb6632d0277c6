//! Low-dimensional surrogates of weight vectors.
//!
//! A [`SurrogateSpec`] fixes, once per experiment, which coordinates of the
//! flat weight vector feed the detector: either a random subset of the whole
//! vector, or a random subset of one layer's parameters.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::weights::{Layout, WeightVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateMode {
    RandomIndices,
    LayerSlice,
}

/// Experiment-level surrogate settings; the index set itself is drawn once
/// per experiment by [`build_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    pub mode: SurrogateMode,
    /// Upper bound on the surrogate length; clamped to the source size.
    pub target_dim: usize,
    /// Layer sampled in `layer_slice` mode; defaults to the last hidden layer.
    pub source_layer: Option<usize>,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            mode: SurrogateMode::LayerSlice,
            target_dim: 3000,
            source_layer: None,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_dim == 0 {
            return Err(Error::config("surrogate.target_dim", "must be positive"));
        }
        Ok(())
    }

    /// The layer sampled in `layer_slice` mode: the configured one, else the
    /// last layer feeding a hidden activation (layer 0 for one-layer nets).
    pub fn resolved_layer(&self, layout: &Layout) -> usize {
        self.source_layer
            .unwrap_or_else(|| layout.num_layers().saturating_sub(2))
    }

    pub fn build(&self, layout: &Layout, seed: u64) -> Result<SurrogateSpec> {
        let (layer, source_len) = match self.mode {
            SurrogateMode::RandomIndices => (None, layout.total_len()),
            SurrogateMode::LayerSlice => {
                let layer = self.resolved_layer(layout);
                let len = layout
                    .slot(layer)
                    .ok_or_else(|| {
                        Error::config(
                            "surrogate.source_layer",
                            format!("layer {layer} does not exist ({} layers)", layout.num_layers()),
                        )
                    })?
                    .len();
                (Some(layer), len)
            }
        };
        build_spec(layout, self.mode, self.target_dim.min(source_len), layer, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    mode: SurrogateMode,
    source_layer: Option<usize>,
    /// Sorted, distinct absolute indices into the weight vector.
    index_set: Vec<usize>,
    weight_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SurrogateVector(pub Vec<f64>);

impl SurrogateVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Samples `target_dim` coordinates without replacement from the source
/// range: the whole vector for [`SurrogateMode::RandomIndices`], layer
/// `source_layer` for [`SurrogateMode::LayerSlice`].
pub fn build_spec(
    layout: &Layout,
    mode: SurrogateMode,
    target_dim: usize,
    source_layer: Option<usize>,
    seed: u64,
) -> Result<SurrogateSpec> {
    let range = match mode {
        SurrogateMode::RandomIndices => 0..layout.total_len(),
        SurrogateMode::LayerSlice => {
            let layer = source_layer
                .ok_or_else(|| Error::input("layer_slice mode needs a source layer"))?;
            layout
                .slot(layer)
                .ok_or_else(|| {
                    Error::input(format!(
                        "source layer {layer} does not exist ({} layers)",
                        layout.num_layers()
                    ))
                })?
                .range()
        }
    };
    let source_len = range.len();
    if target_dim == 0 || target_dim > source_len {
        return Err(Error::input(format!(
            "surrogate dimension {target_dim} must lie in 1..={source_len}"
        )));
    }
    let mut r = rng::from_seed(seed);
    let mut picked: Vec<usize> = index::sample(&mut r, source_len, target_dim)
        .into_iter()
        .map(|i| range.start + i)
        .collect();
    picked.sort_unstable();
    Ok(SurrogateSpec {
        mode,
        source_layer: match mode {
            SurrogateMode::LayerSlice => source_layer,
            SurrogateMode::RandomIndices => None,
        },
        index_set: picked,
        weight_len: layout.total_len(),
    })
}

impl SurrogateSpec {
    /// A spec gathering explicit indices from vectors of length `weight_len`.
    pub fn from_indices(mut index_set: Vec<usize>, weight_len: usize) -> Result<Self> {
        index_set.sort_unstable();
        index_set.dedup();
        if index_set.is_empty() || index_set.last().is_some_and(|&i| i >= weight_len) {
            return Err(Error::input("indices must be non-empty and within the vector"));
        }
        Ok(SurrogateSpec {
            mode: SurrogateMode::RandomIndices,
            source_layer: None,
            index_set,
            weight_len,
        })
    }

    pub fn mode(&self) -> SurrogateMode {
        self.mode
    }

    pub fn source_layer(&self) -> Option<usize> {
        self.source_layer
    }

    pub fn indices(&self) -> &[usize] {
        &self.index_set
    }

    pub fn dim(&self) -> usize {
        self.index_set.len()
    }
}

/// Gathers the spec's coordinates from `w`.
pub fn extract(spec: &SurrogateSpec, w: &WeightVector) -> Result<SurrogateVector> {
    if w.len() != spec.weight_len {
        return Err(Error::shape(format!(
            "surrogate spec built for {} weights, got {}",
            spec.weight_len,
            w.len()
        )));
    }
    Ok(SurrogateVector(spec.index_set.iter().map(|&i| w[i]).collect()))
}

/// Per-dimension affine standardization fitted on a reference set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

pub const MIN_STD: f64 = 1e-8;

impl Standardizer {
    pub fn fit(samples: &[SurrogateVector]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::input("cannot standardize an empty set"))?;
        let dim = first.len();
        if samples.iter().any(|s| s.len() != dim) {
            return Err(Error::shape("surrogates differ in length"));
        }
        let n = samples.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s.as_slice()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(s.as_slice()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt().max(MIN_STD)).collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, s: &SurrogateVector) -> Result<SurrogateVector> {
        if s.len() != self.mean.len() {
            return Err(Error::shape(format!(
                "standardizer fitted on {} dims, got {}",
                self.mean.len(),
                s.len()
            )));
        }
        Ok(SurrogateVector(
            s.as_slice()
                .iter()
                .zip(&self.mean)
                .zip(&self.std)
                .map(|((v, m), sd)| (v - m) / sd)
                .collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::apply_sign_flip;
    use proptest::prelude::*;

    fn layout() -> Layout {
        Layout::from_dims([(4, 5), (5, 3)])
    }

    #[test]
    fn full_size_spec_is_whole_range() {
        let l = layout();
        let s = build_spec(&l, SurrogateMode::LayerSlice, 18, Some(1), 3).unwrap();
        assert_eq!(s.indices(), (25..43).collect::<Vec<_>>().as_slice());
        let s = build_spec(&l, SurrogateMode::RandomIndices, 43, None, 3).unwrap();
        assert_eq!(s.indices(), (0..43).collect::<Vec<_>>().as_slice());
    }

    #[test]
    fn spec_is_deterministic_per_seed() {
        let l = layout();
        let a = build_spec(&l, SurrogateMode::RandomIndices, 10, None, 9).unwrap();
        let b = build_spec(&l, SurrogateMode::RandomIndices, 10, None, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.indices().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn oversized_target_is_rejected() {
        let l = layout();
        assert!(build_spec(&l, SurrogateMode::LayerSlice, 19, Some(1), 0).is_err());
        assert!(build_spec(&l, SurrogateMode::LayerSlice, 3, Some(5), 0).is_err());
        assert!(build_spec(&l, SurrogateMode::RandomIndices, 44, None, 0).is_err());
    }

    #[test]
    fn full_size_layer_slice() {
        // A 3000-parameter layer sampled at its full size.
        let l = Layout::from_dims([(10, 59), (59, 50), (50, 10)]);
        assert_eq!(l.slot(1).unwrap().len(), 3000);
        let s = build_spec(&l, SurrogateMode::LayerSlice, 3000, Some(1), 1).unwrap();
        assert_eq!(s.dim(), 3000);
        assert_eq!(s.indices()[0], l.slot(1).unwrap().offset);
    }

    #[test]
    fn gather_example() {
        let spec = SurrogateSpec::from_indices(vec![0, 2, 4], 6).unwrap();
        let w = WeightVector(vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0]);
        assert_eq!(extract(&spec, &w).unwrap().0, vec![10.0, 30.0, 50.0]);
        assert!(extract(&spec, &WeightVector::zeros(5)).is_err());
    }

    #[test]
    fn standardizer_centers_and_clamps() {
        let set = vec![SurrogateVector(vec![1.0, 5.0]), SurrogateVector(vec![3.0, 5.0])];
        let st = Standardizer::fit(&set).unwrap();
        let z = st.apply(&SurrogateVector(vec![3.0, 5.0])).unwrap();
        assert_eq!(z.0, vec![1.0, 0.0]);
        let z = st.apply(&SurrogateVector(vec![1.0, 5.0 + 1e-8])).unwrap();
        assert!((z.0[1] - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn extract_matches_index_loop_and_is_linear(
            a in proptest::collection::vec(-10.0f64..10.0, 43),
            b in proptest::collection::vec(-10.0f64..10.0, 43),
            seed in any::<u64>(),
            dim in 1usize..43,
        ) {
            let spec = build_spec(&layout(), SurrogateMode::RandomIndices, dim, None, seed).unwrap();
            let wa = WeightVector(a.clone());
            let wb = WeightVector(b);
            let ea = extract(&spec, &wa).unwrap();
            let mut brute = Vec::new();
            for k in 0..spec.dim() {
                brute.push(a[spec.indices()[k]]);
            }
            prop_assert_eq!(&ea.0, &brute);
            let eb = extract(&spec, &wb).unwrap();
            let esum = extract(&spec, &wa.add(&wb).unwrap()).unwrap();
            for i in 0..dim {
                prop_assert_eq!(esum.0[i], ea.0[i] + eb.0[i]);
            }
            let flipped = extract(&spec, &apply_sign_flip(&wa)).unwrap();
            prop_assert!(flipped.0.iter().zip(&ea.0).all(|(f, e)| *f == -*e));
        }
    }
}
