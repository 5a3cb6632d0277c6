//! One experiment from the desk config, shortened to a few rounds.
//!
//! ```text
//! cargo run --release --example run_experiment
//! ```

use fedwatch::config::load_config_with_overrides;
use fedwatch::experiment::run_experiment;

fn main() -> fedwatch::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/desk.toml");
    let overrides = [("federation.rounds".to_string(), "10".to_string())];
    let cfg = load_config_with_overrides(path.as_ref(), &overrides)?;
    let out = run_experiment(&cfg)?;
    for r in &out.records {
        let flagged: Vec<_> = r.report.iter().flat_map(|rep| rep.flagged()).collect();
        println!(
            "round {:>2}  accuracy {:.3}  attacked {:?}  flagged {:?}",
            r.round, r.accuracy, r.attacked, flagged
        );
    }
    println!("final accuracy {:.3}, outputs in {}", out.summary.final_accuracy, out.dir.display());
    Ok(())
}
