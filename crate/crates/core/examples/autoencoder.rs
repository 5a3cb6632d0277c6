//! Trains the surrogate autoencoder on vectors from a low-dimensional
//! subspace and compares reconstruction errors in and out of it.

use fedwatch::detector::{mean_reconstruction_error, train_autoencoder, AutoencoderConfig};
use fedwatch::rng;
use fedwatch::surrogate::SurrogateVector;
use rand::Rng;

fn main() -> fedwatch::Result<()> {
    let dim = 24;
    let mut r = rng::from_seed(5);
    let basis: Vec<Vec<f64>> = (0..3).map(|_| (0..dim).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let on_subspace = |r: &mut rng::Stream| {
        let c: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
        SurrogateVector((0..dim).map(|j| (0..3).map(|i| c[i] * basis[i][j]).sum()).collect())
    };
    let train: Vec<_> = (0..200).map(|_| on_subspace(&mut r)).collect();
    let held_out: Vec<_> = (0..50).map(|_| on_subspace(&mut r)).collect();
    let off: Vec<_> = (0..50)
        .map(|_| SurrogateVector((0..dim).map(|_| r.random_range(-1.0..1.0)).collect()))
        .collect();

    let cfg = AutoencoderConfig { hidden_sizes: vec![16, 3, 16], epochs: 300, dropout_rate: 0.0, ..Default::default() };
    let ae = train_autoencoder(&train, &cfg)?;
    println!("training set      {:.4}", mean_reconstruction_error(&ae, &train)?);
    println!("held out, inside  {:.4}", mean_reconstruction_error(&ae, &held_out)?);
    println!("outside subspace  {:.4}", mean_reconstruction_error(&ae, &off)?);
    Ok(())
}
