//! Alternating SI-A and SI-C passes fill a sparsity pattern that neither
//! estimator can complete alone.

use si_impute::estimators::{si_a, si_c, tandem_impute, EstimatorConfig};
use si_impute::ObservationTensor;

pub fn run() -> si_impute::Result<()> {
    // x^{ca} = alpha_c * beta_a * w, low rank across both contexts and
    // actions, so SI-A and SI-C are both exact where they apply.
    let w = [1.0, 2.0];
    let alpha = [1.0, -0.5, 2.0];
    let beta = [1.5, -2.0, 0.5];
    let x = |i: usize, j: usize| vec![alpha[i] * beta[j] * w[0], alpha[i] * beta[j] * w[1]];
    let observed = [(0, 1), (0, 2), (1, 0), (1, 1), (2, 0)];
    let mut t = ObservationTensor::new(2)?;
    for (i, j) in observed {
        t.insert(format!("c{i}"), format!("a{j}"), x(i, j))?;
    }
    let config = EstimatorConfig::default();
    for k in t.missing_pairs() {
        let by_a = si_a(&t, &k.context, &k.action, &config, None).is_ok();
        let by_c = si_c(&t, &k.context, &k.action, &config, None).is_ok();
        println!("{k}: si_a alone {by_a}, si_c alone {by_c}");
    }
    let result = tandem_impute(&t, 10, 1e-10, &config)?;
    for round in &result.rounds {
        println!(
            "round {}: si_a {}, si_c {}, max change {:.2e}",
            round.round, round.imputed_by_si_a, round.imputed_by_si_c, round.max_relative_change
        );
    }
    for k in &result.synthetic {
        let i: usize = k.context[1..].parse().expect("numeric id");
        let j: usize = k.action[1..].parse().expect("numeric id");
        let got = result.tensor.get(&k.context, &k.action).expect("imputed");
        let truth = x(i, j);
        println!("{k}: imputed {got:?}, truth {truth:?}");
        assert!(got.iter().zip(&truth).all(|(a, b)| (a - b).abs() < 1e-8));
    }
    println!("converged: {}, unimputable: {}", result.converged, result.unimputable.len());
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
