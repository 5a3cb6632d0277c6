//! Every aggregation rule on a hand-made round: seven honest clients near
//! (1, 1) and three sign-flipped ones near (-1, -1).

use std::collections::BTreeMap;

use fedwatch::aggregate::{fedavg_aggregate, geomed_aggregate, krum_select, trimmed_mean_aggregate, weighted_aggregate};
use fedwatch::{ClientId, ClientUpdate};

fn main() -> fedwatch::Result<()> {
    let honest = [[1.0, 1.1], [0.9, 1.0], [1.1, 0.9], [1.0, 1.0], [0.95, 1.05], [1.05, 0.95], [1.0, 0.9]];
    let mut updates: Vec<ClientUpdate> = honest
        .iter()
        .enumerate()
        .map(|(i, w)| ClientUpdate::new(i as u32, 100, w.to_vec()))
        .collect();
    for i in 7..10 {
        updates.push(ClientUpdate::new(i, 100, vec![-1.0, -1.0]));
    }

    let show = |name: &str, w: &fedwatch::WeightVector| println!("{name:<14} [{:.3}, {:.3}]", w.0[0], w.0[1]);
    show("fedavg", &fedavg_aggregate(&updates)?);
    show("krum (f=3)", &krum_select(&updates, 3)?);
    show("geomed", &geomed_aggregate(&updates, 1e-8, 200)?);
    show("trimmed 0.3", &trimmed_mean_aggregate(&updates, 0.3)?);

    // explicit weights, here zero for the known attackers
    let alpha: BTreeMap<ClientId, f64> = updates
        .iter()
        .map(|u| (u.client, if u.client.0 < 7 { 1.0 / 7.0 } else { 0.0 }))
        .collect();
    show("weighted", &weighted_aggregate(&updates, &alpha)?);
    Ok(())
}
