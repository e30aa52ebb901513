//! The four baseline predictors on a small additive tensor with one gap.

use si_impute::estimators::{fixed_action_effect, mean_over_actions, mean_over_contexts, two_way_mean, TwoWayConfig};
use si_impute::ObservationTensor;

pub fn run() -> si_impute::Result<()> {
    // x = u_c + v_a, with (c3, drug) held back.
    let u = [("c1", [1.0, 0.0]), ("c2", [0.0, 2.0]), ("c3", [-1.0, 1.0])];
    let v = [("control", [0.0, 0.0]), ("drug", [3.0, -1.0]), ("other", [0.5, 0.5])];
    let mut t = ObservationTensor::new(2)?;
    for (c, uc) in u {
        for (a, va) in v {
            if (c, a) != ("c3", "drug") {
                t.insert(c, a, vec![uc[0] + va[0], uc[1] + va[1]])?;
            }
        }
    }
    t.register_action("drug");
    println!("truth           {:?}", [2.0, 0.0]);
    println!("mean_over_actions  {:?}", mean_over_actions(&t, "c3", "drug")?);
    println!("mean_over_contexts {:?}", mean_over_contexts(&t, "c3", "drug")?);
    for lambda_c in [0.0, 0.5, 1.0] {
        println!("two_way {lambda_c:.1}        {:?}", two_way_mean(&t, "c3", "drug", TwoWayConfig { lambda_c })?);
    }
    let fae = fixed_action_effect(&t, "c3", "drug", "control")?;
    println!("fixed_action_effect {fae:?}");
    assert!((fae[0] - 2.0).abs() < 1e-12 && fae[1].abs() < 1e-12);
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
