//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use common::*;
use si_impute::diagnostics::{exhaustive_donor_selection, full_donor_selection, DEFAULT_MAX_ACTIONS};
use si_impute::estimators::{
    fixed_action_effect, impute_with_fallback, mean_over_actions, mean_over_contexts, si_a, two_way_mean,
    EstimatorConfig, TwoWayConfig,
};
use si_impute::evaluation::{donor_sweep, median, rmse};
use si_impute::linalg::{pseudoinverse_solve, DEFAULT_RCOND};
use si_impute::scm_sim::{
    action_id, context_id, random_identifiable_instance, scm_to_factor, seeded_rng, signal_rms,
    violating_instance, InstanceSizes, NoiseKind, NoiseModel, ScmSpec, SimInstance, Violation,
};
use si_impute::ObservationTensor;

const RHO: f64 = 0.1;
const ENERGY: f64 = 0.95;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sizes_for(seed: u64) -> InstanceSizes {
    let mut rng = seeded_rng(seed, 99);
    let r = rng.random_range(1..=4);
    InstanceSizes {
        num_contexts: rng.random_range((r + 1).max(5)..=10),
        num_actions: rng.random_range((r + 2).max(6)..=12),
        p: rng.random_range(r.max(4)..=20),
        r,
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut targets = 0;
    for seed in 0..50 {
        let inst = random_identifiable_instance(sizes_for(seed), 0.6, seed).map_err(|e| e.to_string())?;
        let data = inst.generate(None).map_err(|e| e.to_string())?;
        for t in &inst.targets {
            let rep = si_a(&data.observed, &t.context, &t.action, &EstimatorConfig::default(), None)
                .map_err(|e| format!("seed {seed} {t}: {e}"))?;
            worst = worst.max(rel_err(&rep.prediction, data.truth.get(&t.context, &t.action).unwrap()));
            targets += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-8 && secs < 10.0 && targets > 0,
        format!("{targets} targets, max relative error {worst:.2e} (<= 1e-8), {secs:.2}s (< 10s)"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = seeded_rng(seed, 7);
        let p = rng.random_range(1..=20);
        let r = rng.random_range(1..=4);
        let cs: Vec<String> = (0..rng.random_range(1..=4)).map(context_id).collect();
        let acts: Vec<String> = (0..rng.random_range(1..=4)).map(action_id).collect();
        let spec = ScmSpec::random(&cs, &acts, p, r, &mut rng);
        let factor = scm_to_factor(&spec).map_err(|e| e.to_string())?;
        for c in &cs {
            for a in &acts {
                let sim = spec.simulate(c, a).map_err(|e| e.to_string())?;
                let fac = factor.outcome(c, a).map_err(|e| e.to_string())?;
                let scale = norm(&sim).max(1.0);
                let diff: Vec<f64> = sim.iter().zip(&fac).map(|(x, y)| x - y).collect();
                worst = worst.max(norm(&diff) / scale);
            }
        }
    }
    check(worst <= 1e-10, format!("max deviation {worst:.2e} relative to max(1, |x|) (<= 1e-10)"))
}

fn satisfying(seed: u64) -> Result<SimInstance, String> {
    let sizes = InstanceSizes { num_contexts: 8, num_actions: 10, p: 12, r: 3 };
    random_identifiable_instance(sizes, 0.6, 1000 + seed).map_err(|e| e.to_string())
}

fn violator(seed: u64, kind: Violation) -> Result<SimInstance, String> {
    let sizes = InstanceSizes { num_contexts: 8, num_actions: 10, p: 12, r: 3 };
    violating_instance(kind, sizes, 2000 + seed).map_err(|e| e.to_string())
}

fn criterion_3() -> Outcome {
    let mut worst_tau: f64 = 0.0;
    let mut accepted = 0;
    for seed in 0..20 {
        let inst = satisfying(seed)?;
        let data = inst.generate(None).map_err(|e| e.to_string())?;
        let t = &inst.targets[0];
        let sel = full_donor_selection(&data.observed, &t.context, &t.action, RHO, ENERGY).map_err(|e| e.to_string())?;
        worst_tau = worst_tau.max(sel.test_report.tau_hat);
        accepted += usize::from(!sel.test_report.rejected);
    }
    let mut rejected = 0;
    for seed in 0..20 {
        let inst = violator(seed, Violation::Assumption3)?;
        let data = inst.generate(None).map_err(|e| e.to_string())?;
        let t = &inst.targets[0];
        let sel = full_donor_selection(&data.observed, &t.context, &t.action, RHO, ENERGY).map_err(|e| e.to_string())?;
        rejected += usize::from(sel.test_report.rejected);
    }
    check(
        worst_tau < 1e-8 && accepted == 20 && rejected == 20,
        format!("satisfying: max tau_hat {worst_tau:.2e}, {accepted}/20 accepted; violating: {rejected}/20 rejected"),
    )
}

fn criterion_4() -> Outcome {
    let mut batch = Vec::new();
    for seed in 0..10 {
        batch.push(satisfying(seed)?);
        batch.push(violator(seed, if seed % 2 == 0 { Violation::Assumption2 } else { Violation::Assumption3 })?);
    }
    let config = EstimatorConfig::default();
    let (mut fb, mut si, mut moa) = (Vec::new(), Vec::new(), Vec::new());
    for inst in &batch {
        let data = inst.generate(None).map_err(|e| e.to_string())?;
        let t = &inst.targets[0];
        let truth = data.truth.get(&t.context, &t.action).unwrap();
        let o = &data.observed;
        fb.push(rel_err(&impute_with_fallback(o, &t.context, &t.action, &config).map_err(|e| e.to_string())?.prediction, truth));
        si.push(rel_err(&si_a(o, &t.context, &t.action, &config, None).map_err(|e| e.to_string())?.prediction, truth));
        moa.push(rel_err(&mean_over_actions(o, &t.context, &t.action).map_err(|e| e.to_string())?, truth));
    }
    let (mf, ms, mm) = (median(&fb).unwrap(), median(&si).unwrap(), median(&moa).unwrap());
    check(
        mf <= ms.min(mm),
        format!("median relative error: fallback {mf:.3e}, si_a {ms:.3e}, mean_over_actions {mm:.3e}"),
    )
}

fn criterion_5() -> Outcome {
    let sizes = InstanceSizes { num_contexts: 10, num_actions: 12, p: 20, r: 2 };
    let plain = EstimatorConfig::default();
    let denoised = EstimatorConfig { denoise: Some(0.95), ..EstimatorConfig::default() };
    let mut wins = 0;
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let inst = random_identifiable_instance(sizes, 0.7, 3000 + seed).map_err(|e| e.to_string())?;
        let clean = inst.generate(None).map_err(|e| e.to_string())?;
        let noise = NoiseModel { kind: NoiseKind::Additive, sigma: 0.5 * signal_rms(&clean.observed), seed };
        let data = inst.generate(Some(&noise)).map_err(|e| e.to_string())?;
        let mean_rmse = |config: &EstimatorConfig| -> Result<f64, String> {
            let mut total = 0.0;
            for t in &inst.targets {
                let rep = si_a(&data.observed, &t.context, &t.action, config, None).map_err(|e| e.to_string())?;
                total += rmse(&rep.prediction, data.truth.get(&t.context, &t.action).unwrap());
            }
            Ok(total / inst.targets.len() as f64)
        };
        let (a, b) = (mean_rmse(&denoised)?, mean_rmse(&plain)?);
        wins += usize::from(a < b);
        ratios.push(a / b);
    }
    check(
        wins >= 16,
        format!("denoised RMSE strictly lower in {wins}/20 seeds (>= 16); median ratio {:.3}", median(&ratios).unwrap()),
    )
}

fn criterion_6() -> Outcome {
    let sizes = InstanceSizes { num_contexts: 8, num_actions: 8, p: 10, r: 3 };
    let inst = random_identifiable_instance(sizes, 1.0, 4000).map_err(|e| e.to_string())?;
    let data = inst.generate(None).map_err(|e| e.to_string())?;
    let counts = [1, 2, 3, 4, 5];
    let grid = donor_sweep(&data.observed, &counts, &counts, 2, 17, &EstimatorConfig::default())
        .map_err(|e| e.to_string())?;
    let high = grid
        .cells
        .iter()
        .filter(|c| c.donors >= 3 && c.training >= 3)
        .map(|c| c.mean_r2)
        .fold(f64::INFINITY, f64::min);
    let low = grid.get(1, 1).unwrap().mean_r2;
    check(high > 1.0 - 1e-6 && low < 0.99, format!("min mean r2 over i,j >= 3: {high:.9}; (1,1): {low:.4}"))
}

fn criterion_7() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    let max_diff = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    for seed in 0..30u64 {
        let mut rng = seeded_rng(seed, 5);
        let t = random_tensor(&mut rng, 6, 7, 4, 0.6);
        let lambda = rng.random::<f64>();
        for c in t.contexts() {
            for a in t.actions() {
                let masked = t.without(c, a);
                let m = &*masked;
                let moa = brute_mean_over_actions(m, c, a);
                let moc = brute_mean_over_contexts(m, c, a);
                if let (Some(x), Ok(y)) = (&moa, mean_over_actions(m, c, a)) {
                    worst = worst.max(max_diff(x, &y));
                    compared += 1;
                }
                if let (Some(x), Ok(y)) = (&moc, mean_over_contexts(m, c, a)) {
                    worst = worst.max(max_diff(x, &y));
                    compared += 1;
                }
                if let (Some(x), Some(z), Ok(y)) = (&moc, &moa, two_way_mean(m, c, a, TwoWayConfig { lambda_c: lambda })) {
                    let brute: Vec<f64> = x.iter().zip(z).map(|(u, v)| lambda * u + (1.0 - lambda) * v).collect();
                    worst = worst.max(max_diff(&brute, &y));
                    compared += 1;
                }
                for r in t.actions().filter(|r| *r != a) {
                    match (brute_fixed_effect(m, c, a, r), fixed_action_effect(m, c, a, r)) {
                        (Some(x), Ok(y)) => {
                            worst = worst.max(max_diff(&x, &y));
                            compared += 1;
                        }
                        (None, Err(_)) => {}
                        (x, y) => return Err(format!("fixed effect availability differs at ({c},{a},{r}): {x:?} vs {y:?}")),
                    }
                }
            }
        }
    }
    // Additive outcomes u_c + v_a are recovered exactly.
    let mut additive_worst: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = seeded_rng(seed, 6);
        let u: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| gaussian(&mut rng)).collect()).collect();
        let v: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| gaussian(&mut rng)).collect()).collect();
        let mut t = ObservationTensor::new(3).unwrap();
        for (i, uc) in u.iter().enumerate() {
            for (j, va) in v.iter().enumerate() {
                t.insert(context_id(i), action_id(j), uc.iter().zip(va).map(|(x, y)| x + y).collect()).unwrap();
            }
        }
        for (key, truth) in t.entries() {
            let reference = if key.action == action_id(0) { action_id(1) } else { action_id(0) };
            let pred = fixed_action_effect(&t.without(&key.context, &key.action), &key.context, &key.action, &reference)
                .map_err(|e| e.to_string())?;
            additive_worst = additive_worst.max(max_diff(&pred, truth));
        }
    }
    check(
        worst <= 1e-12 && additive_worst <= 1e-12 && compared > 0,
        format!("{compared} baseline comparisons, max deviation {worst:.2e}; additive fixed effect max error {additive_worst:.2e} (<= 1e-12)"),
    )
}

fn criterion_8() -> Outcome {
    let (p, r) = (5, 3);
    let mut rng = seeded_rng(8, 0);
    let donors: Vec<String> = (0..11).map(|i| format!("d{i:02}")).collect();
    let mut v = std::collections::BTreeMap::new();
    for a in donors.iter().chain([&"target".to_string()]) {
        v.insert(a.clone(), DVector::from_fn(r, |_, _| gaussian(&mut rng)));
    }
    let mut t = ObservationTensor::new(p).unwrap();
    let put = |t: &mut ObservationTensor, c: &str, a: &str, u: &DMatrix<f64>| {
        t.insert(c, a, (u * &v[a]).iter().copied().collect()).unwrap();
    };
    let mut loading = || DMatrix::from_fn(p, r, |_, _| gaussian(&mut rng));
    let u_target = loading();
    for d in &donors {
        put(&mut t, "c_target", d, &u_target);
    }
    let u_full = loading();
    for a in donors.iter().chain([&"target".to_string()]) {
        put(&mut t, "c_full", a, &u_full);
    }
    for k in 0..99 {
        let u = loading();
        let name = format!("k{k:03}");
        for a in donors[..10].iter().chain([&"target".to_string()]) {
            put(&mut t, &name, a, &u);
        }
    }
    let full = full_donor_selection(&t, "c_target", "target", RHO, ENERGY).map_err(|e| e.to_string())?;
    let best = exhaustive_donor_selection(&t, "c_target", "target", RHO, ENERGY, DEFAULT_MAX_ACTIONS)
        .map_err(|e| e.to_string())?;
    let ok = full.training_contexts.len() == 1
        && !full.test_report.rejected
        && best.donors == donors[..10]
        && best.training_contexts.len() == 100
        && !best.test_report.rejected;
    check(
        ok,
        format!(
            "full set: {} donors, {} training; exhaustive: {} donors, {} training, rejected={}",
            full.donors.len(),
            full.training_contexts.len(),
            best.donors.len(),
            best.training_contexts.len(),
            best.test_report.rejected
        ),
    )
}

fn criterion_9() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_si-impute");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&out.stderr).into_owned())
        }
    };
    let sim = dir.path().join("sim");
    let sim_s = sim.to_str().unwrap();
    run(&["simulate", "--output", sim_s, "--seed", "42", "--noise-sigma", "0.1"])?;
    let observed = sim.join("observed.csv");
    let mut payloads = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("eval{k}"));
        run(&[
            "evaluate",
            "--input",
            observed.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
            "--estimator",
            "si_a_fallback",
            "--seed",
            "42",
        ])?;
        let json = std::fs::read(out.join("loo_results.json")).map_err(|e| e.to_string())?;
        let summary = std::fs::read(out.join("summary.csv")).map_err(|e| e.to_string())?;
        payloads.push((json, summary));
    }
    check(
        payloads[0] == payloads[1] && !payloads[0].0.is_empty(),
        format!("loo_results.json ({} bytes) and summary.csv identical across runs", payloads[0].0.len()),
    )
}

fn criterion_10() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut rng = seeded_rng(10, 0);
    while done < 100 {
        let m = rng.random_range(10..=40);
        let n = rng.random_range(2..=8);
        let x = DMatrix::from_fn(m, n, |_, _| gaussian(&mut rng));
        let sv = x.singular_values();
        if sv.max() / sv.min() > 100.0 {
            continue;
        }
        let y = DVector::from_fn(m, |_, _| gaussian(&mut rng));
        let sol = pseudoinverse_solve(&x, &y, DEFAULT_RCOND);
        let rows: Vec<Vec<f64>> = (0..m).map(|i| x.row(i).iter().copied().collect()).collect();
        let oracle = normal_equation_solve(&rows, y.as_slice());
        worst = worst.max(rel_err(sol.weights.as_slice(), &oracle));
        done += 1;
    }
    check(worst <= 1e-8, format!("100 tall matrices, max relative deviation {worst:.2e} (<= 1e-8)"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("exact recovery on identifiable instances", criterion_1),
        ("structural simulation matches factor form", criterion_2),
        ("subspace test discrimination", criterion_3),
        ("fallback pipeline median error", criterion_4),
        ("HSVT denoising benefit", criterion_5),
        ("donor sweep shape", criterion_6),
        ("baseline oracles", criterion_7),
        ("exhaustive donor selection", criterion_8),
        ("evaluate determinism", criterion_9),
        ("pseudoinverse oracle", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
