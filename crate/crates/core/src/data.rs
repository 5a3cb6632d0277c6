//! Labeled datasets: a seeded Gaussian-cluster generator and a loader for a
//! small binary image format.
//!
//! Image files start with three little-endian `u32` values (sample count,
//! rows, columns), followed by `count × rows × cols` pixel bytes in row-major
//! order and then `count` label bytes. Pixels are scaled to `[0, 1]`.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::input(format!("label {bad} out of range for {classes} classes")));
        }
        Ok(Dataset {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Seeded shuffle split; the first part receives `1 − test_fraction`.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::input(format!("test fraction {test_fraction} must lie in [0, 1)")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng::from_seed(seed));
        let n_test = (self.len() as f64 * test_fraction).round() as usize;
        let (test, train) = idx.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// Parameters of the Gaussian-cluster generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub samples: usize,
    pub input_dim: usize,
    /// Clusters per class; more than one makes classes non-convex.
    pub modes_per_class: usize,
    /// Standard deviation of cluster centres around the origin.
    pub separation: f64,
    /// Within-cluster standard deviation.
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 10,
            samples: 6000,
            input_dim: 20,
            modes_per_class: 1,
            separation: 1.0,
            noise: 1.0,
        }
    }
}

/// Gaussian clusters around seeded centres with a uniform class prior:
/// labels cycle through the classes, so every class gets
/// `samples / classes` samples up to one.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec, seed: u64) -> Result<Dataset> {
    if spec.classes == 0 || spec.samples == 0 || spec.input_dim == 0 || spec.modes_per_class == 0 {
        return Err(Error::input("synthetic dataset dimensions must be positive"));
    }
    if !(spec.noise >= 0.0 && spec.separation > 0.0) {
        return Err(Error::input("noise must be >= 0 and separation > 0"));
    }
    let mut r = rng::from_seed(seed);
    let centre = Normal::new(0.0, spec.separation).expect("positive separation");
    let centres: Vec<Vec<f64>> = (0..spec.classes * spec.modes_per_class)
        .map(|_| (0..spec.input_dim).map(|_| centre.sample(&mut r)).collect())
        .collect();
    let mut labels: Vec<usize> = (0..spec.samples).map(|i| i % spec.classes).collect();
    labels.shuffle(&mut r);
    let mut data = Vec::with_capacity(spec.samples * spec.input_dim);
    for &y in &labels {
        let mode = r.random_range(0..spec.modes_per_class);
        let c = &centres[y * spec.modes_per_class + mode];
        for &m in c {
            let eps = if spec.noise > 0.0 {
                Normal::new(0.0, spec.noise).expect("positive noise").sample(&mut r)
            } else {
                0.0
            };
            data.push(m + eps);
        }
    }
    Dataset::new(Matrix::new(spec.samples, spec.input_dim, data)?, labels, spec.classes)
}

/// Reads the byte image format described in the module docs.
pub fn load_image_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_image_dataset(&bytes)
}

pub fn parse_image_dataset(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 12 {
        return Err(Error::input("image dataset header is truncated"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().expect("4 bytes")) as usize;
    let (count, rows, cols) = (word(0), word(1), word(2));
    let dim = rows * cols;
    let expected = 12 + count * dim + count;
    if count == 0 || dim == 0 {
        return Err(Error::input("image dataset has no samples or zero-sized images"));
    }
    if bytes.len() != expected {
        return Err(Error::input(format!(
            "image dataset should be {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let pixels = &bytes[12..12 + count * dim];
    let labels: Vec<usize> = bytes[12 + count * dim..].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let data = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    Dataset::new(Matrix::new(count, dim, data)?, labels, classes)
}

/// Writes images in the byte format; `pixels` holds `count × rows × cols`.
pub fn write_image_dataset(path: &Path, rows: u32, cols: u32, pixels: &[u8], labels: &[u8]) -> Result<()> {
    let count = labels.len();
    if pixels.len() != count * (rows * cols) as usize {
        return Err(Error::shape("pixel buffer does not match count × rows × cols"));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&(count as u32).to_le_bytes())?;
    f.write_all(&rows.to_le_bytes())?;
    f.write_all(&cols.to_le_bytes())?;
    f.write_all(pixels)?;
    f.write_all(labels)?;
    Ok(())
}
