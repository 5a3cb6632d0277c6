//! Reference implementations shared by the integration tests and the
//! acceptance suite. They favour obviousness over speed.
#![allow(dead_code)]

use fedwatch::nn::{Activation, LayerSpec, Matrix, Network, Targets};
use fedwatch::{rng, ClientUpdate, WeightVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Krum by enumeration: every candidate's score is the sum of its
/// `K − f − 2` smallest squared distances; ties go to the lowest index.
pub fn krum_oracle(updates: &[ClientUpdate], f: usize) -> Vec<f64> {
    let k = updates.len();
    let m = k - f - 2;
    let mut best: Option<(f64, usize)> = None;
    for i in 0..k {
        let mut d: Vec<f64> = (0..k)
            .filter(|&j| j != i)
            .map(|j| sq_dist(updates[i].weights.as_slice(), updates[j].weights.as_slice()))
            .collect();
        d.sort_by(f64::total_cmp);
        let score: f64 = d[..m].iter().sum();
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, i));
        }
    }
    updates[best.expect("non-empty").1].weights.0.clone()
}

/// Coordinate-wise: sort, drop `floor(beta · K)` from each end, average.
pub fn trimmed_mean_oracle(updates: &[ClientUpdate], beta: f64) -> Vec<f64> {
    let k = updates.len();
    let cut = (beta * k as f64).floor() as usize;
    let dim = updates[0].weights.len();
    (0..dim)
        .map(|j| {
            let mut col: Vec<f64> = updates.iter().map(|u| u.weights.0[j]).collect();
            col.sort_by(f64::total_cmp);
            let kept = &col[cut..k - cut];
            kept.iter().sum::<f64>() / kept.len() as f64
        })
        .collect()
}

/// The set of 1-D medians as a closed interval: a single point for odd
/// counts, the two middle values for even ones.
pub fn median_interval(values: &[f64]) -> (f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        (v[m], v[m])
    } else {
        (v[m - 1], v[m])
    }
}

/// A random small network with its own batch and targets.
pub struct GradCase {
    pub net: Network,
    pub inputs: Matrix,
    pub labels: Vec<usize>,
    pub values: Option<Matrix>,
}

impl GradCase {
    pub fn targets(&self) -> Targets<'_> {
        match &self.values {
            Some(m) => Targets::Values(m),
            None => Targets::Labels(&self.labels),
        }
    }
}

pub fn random_grad_case(seed: u64) -> GradCase {
    let mut r = rng::from_seed(seed);
    let input = r.random_range(2..6);
    let depth = r.random_range(1..3);
    let regression = r.random_bool(0.3);
    let mut layers = Vec::new();
    let mut prev = input;
    for _ in 0..depth {
        let h = r.random_range(2..7);
        layers.push(LayerSpec::new(prev, h, Activation::Relu));
        prev = h;
    }
    let out = r.random_range(2..5);
    let act = if regression { Activation::Identity } else { Activation::Softmax };
    layers.push(LayerSpec::new(prev, out, act));
    let mut normal = |n: usize| -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut r)).collect() };
    // Fresh nets have zero biases, which puts a ReLU exactly on its kink
    // whenever a sample switches off a whole layer. Checking at generic
    // parameters avoids that.
    let len = Network::zeros(layers.clone()).unwrap().params().len();
    let net = Network::from_params(layers, WeightVector(normal(len))).unwrap();
    let n = 2 + (seed as usize % 5);
    let inputs = Matrix::new(n, input, normal(n * input)).unwrap();
    let values = regression.then(|| Matrix::new(n, out, normal(n * out)).unwrap());
    let mut r2 = rng::from_seed(seed ^ 0x5eed);
    let labels = (0..n).map(|_| r2.random_range(0..out)).collect();
    GradCase { net, inputs, labels, values }
}

/// Norm-wise relative error between the analytic gradient and central
/// finite differences.
pub fn gradient_check(case: &GradCase, h: f64) -> f64 {
    let (_, analytic) = case.net.loss_and_gradient(&case.inputs, case.targets()).unwrap();
    let p = case.net.params().clone();
    let mut numeric = vec![0.0; p.len()];
    for i in 0..p.len() {
        let mut plus = p.clone();
        plus.0[i] += h;
        let mut minus = p.clone();
        minus.0[i] -= h;
        let lp = case.net.with_params(plus).unwrap().loss(&case.inputs, case.targets()).unwrap();
        let lm = case.net.with_params(minus).unwrap().loss(&case.inputs, case.targets()).unwrap();
        numeric[i] = (lp - lm) / (2.0 * h);
    }
    let diff = WeightVector(analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect()).norm();
    let scale = analytic.norm().max(WeightVector(numeric).norm()).max(1e-12);
    diff / scale
}
