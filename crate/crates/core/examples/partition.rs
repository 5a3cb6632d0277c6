//! Label skew of the Dirichlet partition at a few concentrations.

use fedwatch::data::{generate_synthetic_dataset, SyntheticSpec};
use fedwatch::sim::partition_non_iid;

fn main() -> fedwatch::Result<()> {
    let spec = SyntheticSpec { classes: 5, samples: 2000, ..Default::default() };
    let data = generate_synthetic_dataset(&spec, 0)?;
    for conc in [0.1, 0.5, 10.0] {
        let clients = partition_non_iid(&data, 8, conc, 42)?;
        println!("concentration {conc}");
        for c in &clients {
            let counts = c.dataset().class_counts();
            let top = *counts.iter().max().unwrap_or(&0) as f64 / c.num_samples() as f64;
            println!("  client {:>2}  n {:>4}  classes {:?}  top share {:.2}", c.id(), c.num_samples(), counts, top);
        }
    }
    Ok(())
}
