//! Hard singular value thresholding of the regression designs on noisy data.

use si_impute::estimators::{si_a, EstimatorConfig};
use si_impute::evaluation::rmse;
use si_impute::scm_sim::{random_identifiable_instance, signal_rms, InstanceSizes, NoiseKind, NoiseModel};

pub fn run() -> si_impute::Result<()> {
    let sizes = InstanceSizes { num_contexts: 10, num_actions: 12, p: 20, r: 2 };
    let instance = random_identifiable_instance(sizes, 0.7, 21)?;
    let clean = instance.generate(None)?;
    let noise = NoiseModel { kind: NoiseKind::Additive, sigma: 0.5 * signal_rms(&clean.observed), seed: 21 };
    let data = instance.generate(Some(&noise))?;
    for denoise in [None, Some(0.99), Some(0.95), Some(0.8)] {
        let config = EstimatorConfig { denoise, ..EstimatorConfig::default() };
        let mut total = 0.0;
        for t in &instance.targets {
            let report = si_a(&data.observed, &t.context, &t.action, &config, None)?;
            total += rmse(&report.prediction, data.truth.get(&t.context, &t.action).expect("truth"));
        }
        let label = denoise.map_or("none".to_string(), |e| format!("{e:.2}"));
        println!("denoise {label:<5} mean RMSE {:.4}", total / instance.targets.len() as f64);
    }
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
