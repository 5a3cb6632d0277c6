//! Every aggregation method against one attack, plus clean FedAvg.
//!
//! ```text
//! FEDWATCH_OUT=/tmp/fw cargo run --release --example compare_grid -- gradient_ascent
//! ```

use fedwatch::config::load_config_with_overrides;
use fedwatch::experiment::compare_methods;
use fedwatch::{AttackSpec, Method};

fn main() -> fedwatch::Result<()> {
    let attack = match std::env::args().nth(1).as_deref() {
        None | Some("sign_flip") => AttackSpec::SignFlip,
        Some("additive_noise") => AttackSpec::AdditiveNoise { noise_std: 1.0 },
        Some("gradient_ascent") => AttackSpec::GradientAscent,
        Some(other) => panic!("unknown attack {other}"),
    };
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml");
    let overrides = [("federation.rounds".to_string(), "30".to_string())];
    let cfg = load_config_with_overrides(path.as_ref(), &overrides)?;
    let cmp = compare_methods(&cfg, &Method::ALL, &[attack])?;
    for row in &cmp.rows {
        println!("{:<15} {:<13} {:.3}", row.attack, row.method.name(), row.final_accuracy);
    }
    Ok(())
}
