//! Simulate an identifiable instance and recover every held-out pair with SI-A.
//!
//! ```text
//! cargo run --example recover_identifiable
//! ```

use si_impute::estimators::{si_a, EstimatorConfig};
use si_impute::scm_sim::{random_identifiable_instance, InstanceSizes};

pub fn run() -> si_impute::Result<()> {
    let sizes = InstanceSizes { num_contexts: 6, num_actions: 9, p: 8, r: 3 };
    let instance = random_identifiable_instance(sizes, 0.6, 7)?;
    let data = instance.generate(None)?;
    println!(
        "{} observed pairs, {} targets",
        data.observed.len(),
        instance.targets.len()
    );
    for t in &instance.targets {
        let report = si_a(&data.observed, &t.context, &t.action, &EstimatorConfig::default(), None)?;
        let truth = data.truth.get(&t.context, &t.action).expect("full truth");
        let err = report
            .prediction
            .iter()
            .zip(truth)
            .map(|(p, x)| (p - x).abs())
            .fold(0.0, f64::max);
        let art = report.artifacts.as_ref().expect("SI-A keeps its designs");
        println!(
            "{t}: {} donors, {} training contexts, max abs error {err:.1e}",
            art.donors.len(),
            art.training.len()
        );
        assert!(err < 1e-8);
    }
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
