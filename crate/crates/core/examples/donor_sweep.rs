//! Mean R^2 of SI-A as a function of donor and training-context counts.

use si_impute::estimators::EstimatorConfig;
use si_impute::evaluation::donor_sweep;
use si_impute::scm_sim::{random_identifiable_instance, InstanceSizes};

pub fn run() -> si_impute::Result<()> {
    let sizes = InstanceSizes { num_contexts: 8, num_actions: 8, p: 10, r: 3 };
    let data = random_identifiable_instance(sizes, 1.0, 4)?.generate(None)?;
    let counts = [1, 2, 3, 4, 5];
    let grid = donor_sweep(&data.observed, &counts, &counts, 2, 9, &EstimatorConfig::default())?;
    print!("donors\\train");
    for j in counts {
        print!("{j:>10}");
    }
    println!();
    for i in counts {
        print!("{i:>12}");
        for j in counts {
            print!("{:>10.4}", grid.get(i, j).expect("cell").mean_r2.max(-99.0));
        }
        println!();
    }
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
