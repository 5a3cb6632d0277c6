//! The three attacks on one client's locally trained model.

use fedwatch::attack::{apply_gradient_ascent, AttackSpec};
use fedwatch::data::{generate_synthetic_dataset, SyntheticSpec};
use fedwatch::nn::{evaluate, Direction, Network, TrainConfig};
use fedwatch::rng::{self, Purpose};
use fedwatch::sim::{classifier_layers, local_train, ClientState};
use fedwatch::ClientId;

fn main() -> fedwatch::Result<()> {
    let spec = SyntheticSpec { samples: 1000, ..Default::default() };
    let data = generate_synthetic_dataset(&spec, 1)?;
    let (train, test) = data.split(0.3, 2)?;
    let client = ClientState::new(ClientId(0), train);

    let layers = classifier_layers(spec.input_dim, &[32, 16], spec.classes);
    let model = Network::new(layers, &mut rng::from_seed(3))?;
    let cfg = TrainConfig { epochs: 5, ..Default::default() };
    let mut r = rng::stream(0, Purpose::ClientRound, 0, 0);

    let honest = local_train(&client, &model, model.params(), &cfg, Direction::Descent, &mut r)?;
    let acc = |w| -> fedwatch::Result<f64> {
        Ok(evaluate(&model.with_params(w)?, test.features(), test.labels())?.accuracy)
    };
    println!("initial          accuracy {:.3}", acc(model.params().clone())?);
    println!("honest           accuracy {:.3}  norm {:.2}", acc(honest.clone())?, honest.norm());

    for attack in [AttackSpec::SignFlip, AttackSpec::AdditiveNoise { noise_std: 1.0 }] {
        let w = attack.apply(honest.clone(), &mut r);
        println!("{:<16} accuracy {:.3}  norm {:.2}", attack.name(), acc(w.clone())?, w.norm());
    }
    let w = apply_gradient_ascent(&client, &model, model.params(), &cfg, &mut r)?;
    println!("{:<16} accuracy {:.3}  norm {:.2}", "gradient_ascent", acc(w.clone())?, w.norm());
    Ok(())
}
