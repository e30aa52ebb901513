//! Test-then-fallback imputation on a batch mixing recoverable and
//! unrecoverable targets.

use si_impute::estimators::{impute_with_fallback, EstimatorConfig};
use si_impute::scm_sim::{random_identifiable_instance, violating_instance, InstanceSizes, Violation};

pub fn run() -> si_impute::Result<()> {
    let sizes = InstanceSizes { num_contexts: 8, num_actions: 10, p: 12, r: 3 };
    let config = EstimatorConfig::default();
    let batch = [
        ("identifiable", random_identifiable_instance(sizes, 0.6, 1)?),
        ("identifiable", random_identifiable_instance(sizes, 0.6, 2)?),
        ("span", violating_instance(Violation::Assumption2, sizes, 1)?),
        ("rowspace", violating_instance(Violation::Assumption3, sizes, 1)?),
    ];
    for (label, instance) in &batch {
        let data = instance.generate(None)?;
        let t = &instance.targets[0];
        let report = impute_with_fallback(&data.observed, &t.context, &t.action, &config)?;
        let truth = data.truth.get(&t.context, &t.action).expect("truth");
        let num: f64 = report.prediction.iter().zip(truth).map(|(p, x)| (p - x).powi(2)).sum();
        let den: f64 = truth.iter().map(|x| x * x).sum();
        println!(
            "{label:<13} {t}: used {:<18} relative error {:.2e}",
            report.estimator_used.as_str(),
            (num / den).sqrt()
        );
        if let Some(reason) = &report.fallback_reason {
            println!("              {reason}");
        }
    }
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
