//! A linear structural model and its factor form give the same outcomes.

use si_impute::scm_sim::{action_id, context_id, scm_to_factor, seeded_rng, ScmSpec};

pub fn run() -> si_impute::Result<()> {
    let contexts: Vec<String> = (0..3).map(context_id).collect();
    let actions: Vec<String> = (0..4).map(action_id).collect();
    let spec = ScmSpec::random(&contexts, &actions, 6, 2, &mut seeded_rng(3, 0));
    let factor = scm_to_factor(&spec)?;
    for c in &contexts {
        let u = &factor.u_matrices[c];
        println!("{c}: U is {}x{}", u.nrows(), u.ncols());
        for a in &actions {
            let by_nodes = spec.simulate(c, a)?;
            let by_factor = factor.outcome(c, a)?;
            let gap = by_nodes.iter().zip(&by_factor).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            println!("  {a}: {:>8.4} ... gap {gap:.1e}", by_nodes[0]);
            assert!(gap < 1e-10 * by_nodes.iter().map(|x| x.abs()).fold(1.0, f64::max));
        }
    }
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
