//! Full, greedy and exhaustive donor selection when one donor action is
//! observed in only a single training context.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use si_impute::diagnostics::{
    exhaustive_donor_selection, full_donor_selection, greedy_donor_selection, DonorSelection, DEFAULT_MAX_ACTIONS,
    DEFAULT_RHO, DEFAULT_TEST_ENERGY,
};
use si_impute::scm_sim::seeded_rng;
use si_impute::ObservationTensor;

fn show(label: &str, sel: &DonorSelection) {
    println!(
        "{label:<11} {:>2} donors  {:>3} training contexts  tau_hat {:.1e}  {}",
        sel.donors.len(),
        sel.training_contexts.len(),
        sel.test_report.tau_hat,
        if sel.test_report.rejected { "rejected" } else { "accepted" }
    );
}

pub fn run() -> si_impute::Result<()> {
    let (p, r) = (5, 3);
    let mut rng = seeded_rng(1, 0);
    let mut normal = move || -> f64 { rng.sample(StandardNormal) };
    let donors: Vec<String> = (0..11).map(|i| format!("d{i:02}")).collect();
    let target = "target".to_string();
    let latent: Vec<DVector<f64>> = (0..12).map(|_| DVector::from_fn(r, |_, _| normal())).collect();
    let outcome = |u: &DMatrix<f64>, a: usize| -> Vec<f64> { (u * &latent[a]).iter().copied().collect() };

    let mut t = ObservationTensor::new(p)?;
    let add_context = |t: &mut ObservationTensor, name: &str, actions: &[usize], u: DMatrix<f64>| {
        for &a in actions {
            let id = if a == 11 { &target } else { &donors[a] };
            t.insert(name, id.as_str(), outcome(&u, a)).expect("fresh pair");
        }
    };
    let mut loading = || DMatrix::from_fn(p, r, |_, _| normal());
    add_context(&mut t, "c_new", &(0..11).collect::<Vec<_>>(), loading());
    add_context(&mut t, "c_all", &(0..12).collect::<Vec<_>>(), loading());
    let common: Vec<usize> = (0..10).chain([11]).collect();
    for k in 0..99 {
        add_context(&mut t, &format!("k{k:03}"), &common, loading());
    }

    show("full", &full_donor_selection(&t, "c_new", "target", DEFAULT_RHO, DEFAULT_TEST_ENERGY)?);
    show("greedy", &greedy_donor_selection(&t, "c_new", "target", DEFAULT_RHO, DEFAULT_TEST_ENERGY)?);
    let best = exhaustive_donor_selection(&t, "c_new", "target", DEFAULT_RHO, DEFAULT_TEST_ENERGY, DEFAULT_MAX_ACTIONS)?;
    show("exhaustive", &best);
    assert_eq!(best.training_contexts.len(), 100);
    Ok(())
}

fn main() -> si_impute::Result<()> {
    run()
}
