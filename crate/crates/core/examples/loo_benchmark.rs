//! Leave-one-out benchmark of every estimator on a noisy simulated tensor.

use si_impute::estimators::{EstimatorName, ImputeSettings};
use si_impute::evaluation::loo_evaluate;
use si_impute::scm_sim::{random_identifiable_instance, signal_rms, InstanceSizes, NoiseKind, NoiseModel};

pub fn run() -> si_impute::Result<()> {
    let sizes = InstanceSizes { num_contexts: 8, num_actions: 10, p: 12, r: 2 };
    let instance = random_identifiable_instance(sizes, 0.7, 5)?;
    let clean = instance.generate(None)?;
    let noise = NoiseModel { kind: NoiseKind::Additive, sigma: 0.1 * signal_rms(&clean.observed), seed: 5 };
    let data = instance.generate(Some(&noise))?;

    println!("{:<20} {:>9} {:>9} {:>11} {:>8}", "estimator", "evaluated", "skipped", "median r2", "rmse");
    for name in EstimatorName::ALL {
        let mut settings = ImputeSettings::new(name);
        settings.reference_action = Some("a00".into());
        let result = loo_evaluate(&data.observed, &settings)?;
        let row = result.overall();
        println!(
            "{:<20} {:>9} {:>9} {:>11.4} {:>8.4}",
            row.estimator,
            row.evaluated,
            row.skipped,
            row.median_r2.unwrap_or(f64::NAN),
            row.median_rmse.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
