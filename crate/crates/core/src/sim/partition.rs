use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::ClientState;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose};
use crate::update::ClientId;

/// Splits `dataset` across `total_clients` with label skew.
///
/// For each class, the share going to each client is drawn from a symmetric
/// Dirichlet with the given concentration and that class's (shuffled)
/// samples are cut accordingly. Small concentrations give clients dominated
/// by few classes; large ones approach an iid split. Clients left empty by
/// rounding take one sample from the currently largest client.
pub fn partition_non_iid(
    dataset: &Dataset,
    total_clients: usize,
    concentration: f64,
    seed: u64,
) -> Result<Vec<ClientState>> {
    if total_clients == 0 {
        return Err(Error::input("need at least one client"));
    }
    if dataset.len() < total_clients {
        return Err(Error::input(format!(
            "{} samples cannot cover {total_clients} clients",
            dataset.len()
        )));
    }
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::input(format!("concentration {concentration} must be positive")));
    }
    let mut r = rng::stream(seed, Purpose::Partition, 0, 0);
    let gamma = Gamma::new(concentration, 1.0).map_err(|e| Error::input(e.to_string()))?;

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.classes()];
    for (i, &y) in dataset.labels().iter().enumerate() {
        by_class[y].push(i);
    }

    let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); total_clients];
    for members in by_class.iter_mut() {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut r);
        let mut props: Vec<f64> = (0..total_clients).map(|_| gamma.sample(&mut r)).collect();
        let sum: f64 = props.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            props.iter_mut().for_each(|p| *p /= sum);
        } else {
            // every draw underflowed: give the class to one client
            let k = r.random_range(0..total_clients);
            props = vec![0.0; total_clients];
            props[k] = 1.0;
        }
        let m = members.len();
        let mut cum = 0.0;
        let mut start = 0;
        for (k, p) in props.iter().enumerate() {
            cum += p;
            let end = if k + 1 == total_clients { m } else { ((cum * m as f64).round() as usize).min(m) };
            if end > start {
                assigned[k].extend_from_slice(&members[start..end]);
                start = end;
            }
        }
    }

    while let Some(empty) = assigned.iter().position(|a| a.is_empty()) {
        let donor = (0..total_clients)
            .max_by(|&a, &b| assigned[a].len().cmp(&assigned[b].len()).then(b.cmp(&a)))
            .expect("non-empty");
        let moved = assigned[donor].pop().expect("donor has samples");
        assigned[empty].push(moved);
    }

    Ok(assigned
        .into_iter()
        .enumerate()
        .map(|(k, mut idx)| {
            idx.sort_unstable();
            ClientState::new(ClientId(k as u32), dataset.subset(&idx))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_dataset, SyntheticSpec};

    fn dataset(classes: usize, samples: usize) -> Dataset {
        generate_synthetic_dataset(
            &SyntheticSpec { classes, samples, input_dim: 3, ..Default::default() },
            17,
        )
        .unwrap()
    }

    #[test]
    fn near_iid_limit_matches_global_histogram() {
        let d = dataset(4, 4000);
        let global: Vec<f64> = d.class_counts().iter().map(|&c| c as f64 / d.len() as f64).collect();
        let clients = partition_non_iid(&d, 10, 1e6, 3).unwrap();
        for c in &clients {
            let n = c.num_samples() as f64;
            for (cnt, g) in c.dataset().class_counts().iter().zip(&global) {
                assert!((*cnt as f64 / n - g).abs() < 0.05);
            }
        }
    }

    #[test]
    fn small_concentration_is_skewed() {
        let d = dataset(2, 2000);
        let clients = partition_non_iid(&d, 10, 0.1, 5).unwrap();
        let skewed = clients.iter().any(|c| {
            let counts = c.dataset().class_counts();
            *counts.iter().max().unwrap() as f64 > 0.8 * c.num_samples() as f64
        });
        assert!(skewed);
    }

    #[test]
    fn every_sample_assigned_once_and_clients_non_empty() {
        let d = dataset(5, 300);
        for conc in [0.05, 0.5, 100.0] {
            let clients = partition_non_iid(&d, 30, conc, 9).unwrap();
            assert!(clients.iter().all(|c| c.num_samples() > 0));
            let mut rows: Vec<Vec<u64>> = clients
                .iter()
                .flat_map(|c| c.dataset().features().iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect::<Vec<_>>())
                .collect();
            let mut expected: Vec<Vec<u64>> = d.features().iter_rows().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            rows.sort();
            expected.sort();
            assert_eq!(rows, expected);
        }
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let d = dataset(2, 5);
        assert!(matches!(partition_non_iid(&d, 6, 1.0, 0), Err(Error::Input(_))));
    }
}
