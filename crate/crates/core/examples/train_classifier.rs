//! Centralized training of the classifier used by the clients.

use fedwatch::data::{generate_synthetic_dataset, SyntheticSpec};
use fedwatch::nn::{evaluate, sgd_epoch, Direction, Network, Targets, TrainConfig};
use fedwatch::rng;
use fedwatch::sim::classifier_layers;

fn main() -> fedwatch::Result<()> {
    let spec = SyntheticSpec { modes_per_class: 2, samples: 4000, ..Default::default() };
    let (train, test) = generate_synthetic_dataset(&spec, 0)?.split(0.25, 1)?;
    let mut net = Network::new(classifier_layers(spec.input_dim, &[32, 16], spec.classes), &mut rng::from_seed(2))?;
    let cfg = TrainConfig::default();
    let mut r = rng::from_seed(3);
    for epoch in 1..=20 {
        let (next, loss) = sgd_epoch(&net, train.features(), Targets::Labels(train.labels()), &cfg, Direction::Descent, &mut r)?;
        net = next;
        if epoch % 5 == 0 {
            let ev = evaluate(&net, test.features(), test.labels())?;
            println!("epoch {epoch:>2}  train loss {loss:.4}  test accuracy {:.3}", ev.accuracy);
        }
    }
    Ok(())
}
