//! Anomaly scores, credit scores and thresholding on a single round, from
//! made-up reconstruction errors.

use std::collections::BTreeMap;

use fedwatch::detector::{anomaly_scores, credit_scores, threshold_credit_scores, ThresholdRule};
use fedwatch::ClientId;

fn main() -> fedwatch::Result<()> {
    let errors: BTreeMap<ClientId, f64> = [0.21, 0.18, 0.25, 0.19, 0.22, 3.4, 2.9]
        .iter()
        .enumerate()
        .map(|(i, &e)| (ClientId(i as u32), e))
        .collect();
    let samples: BTreeMap<ClientId, u64> = errors.keys().map(|&k| (k, 100 + 10 * k.0 as u64)).collect();

    let a = anomaly_scores(&errors)?;
    let alpha = credit_scores(&a, &samples, 2.0)?;
    let thr = threshold_credit_scores(&a, &samples, ThresholdRule::MEAN, true)?;

    println!("threshold {:.3}", thr.threshold);
    println!("client  error  anomaly  credit  thresholded");
    for (k, e) in &errors {
        println!("{:>6}  {:>5.2}  {:>7.3}  {:>6.3}  {:>11.3}", k, e, a[k], alpha[k], thr.alpha[k]);
    }
    println!("flagged {:?}", thr.flagged);
    Ok(())
}
