//! Applicability checks for synthetic-interventions regression.
//!
//! The subspace test compares the right singular bases of the training and
//! test designs: `tau = ||V_test - V_train V_train^T V_test||_F^2` is the
//! part of the test rowspace missing from the training rowspace, bounded by
//! `rank(V_test)`. The test rejects when `tau >= rho * rank(V_test)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{right_singular_basis, SvdFactors};
use crate::tensor_store::ObservationTensor;

/// Default rejection fraction.
pub const DEFAULT_RHO: f64 = 0.1;
/// Default spectral energy used to pick the test bases.
pub const DEFAULT_TEST_ENERGY: f64 = 0.95;
/// Default bound on donor count for exhaustive search.
pub const DEFAULT_MAX_ACTIONS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubspaceTestReport {
    pub tau_hat: f64,
    pub rank_test: usize,
    pub rank_train: usize,
    pub rho: f64,
    pub threshold: f64,
    pub rejected: bool,
    /// Zero test design: nothing to check, accepted.
    pub degenerate: bool,
}

pub fn subspace_test(
    x_train: &DMatrix<f64>,
    x_test: &DMatrix<f64>,
    rho: f64,
    energy: f64,
) -> Result<SubspaceTestReport> {
    if x_train.ncols() != x_test.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "x_train has {} columns, x_test has {}",
            x_train.ncols(),
            x_test.ncols()
        )));
    }
    check_fraction("rho", rho, true)?;
    check_fraction("energy", energy, false)?;
    let v_train = right_singular_basis(x_train, energy);
    let v_test = right_singular_basis(x_test, energy);
    let rank_test = v_test.ncols();
    let rank_train = v_train.ncols();
    let threshold = rho * rank_test as f64;
    if rank_test == 0 {
        return Ok(SubspaceTestReport {
            tau_hat: 0.0,
            rank_test,
            rank_train,
            rho,
            threshold,
            rejected: false,
            degenerate: true,
        });
    }
    let residual = if rank_train == 0 {
        v_test.clone()
    } else {
        &v_test - &v_train * (v_train.transpose() * &v_test)
    };
    let tau_hat = residual.norm_squared();
    Ok(SubspaceTestReport {
        tau_hat,
        rank_test,
        rank_train,
        rho,
        threshold,
        rejected: tau_hat >= threshold,
        degenerate: false,
    })
}

pub(crate) fn check_fraction(name: &str, value: f64, allow_zero: bool) -> Result<()> {
    let lower_ok = if allow_zero { value >= 0.0 } else { value > 0.0 };
    if value.is_finite() && lower_ok && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} = {value} is outside its allowed range")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    Full,
    Greedy,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DonorSelection {
    pub donors: Vec<String>,
    pub training_contexts: Vec<String>,
    pub test_report: SubspaceTestReport,
    pub strategy: SelectionStrategy,
}

/// SI-A training contexts for a donor set: `C(donors + {action}) \ {context}`.
pub(crate) fn training_contexts_for(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    donors: &[String],
) -> Result<Vec<String>> {
    let mut needed: Vec<&str> = donors.iter().map(String::as_str).collect();
    needed.push(action);
    let mut out = tensor.contexts_of_all(&needed)?;
    out.retain(|c| c != context);
    Ok(out)
}

/// Test for the SI-A design built from `donors`; an empty training set makes
/// the training basis empty.
fn test_donor_set(
    tensor: &ObservationTensor,
    context: &str,
    donors: &[String],
    training: &[String],
    rho: f64,
    energy: f64,
) -> Result<SubspaceTestReport> {
    let x_train = tensor.stack_training(training, donors)?;
    let x_test = tensor.stack_training(&[context], donors)?;
    subspace_test(&x_train, &x_test, rho, energy)
}

fn candidate_donors(tensor: &ObservationTensor, context: &str, action: &str) -> Result<Vec<String>> {
    tensor.has_action(action).then_some(()).ok_or_else(|| Error::UnknownAction(action.into()))?;
    let mut donors = tensor.actions_of(context)?;
    donors.retain(|a| a != action);
    if donors.is_empty() {
        return Err(Error::EmptyDonorSet { context: context.into(), action: action.into() });
    }
    Ok(donors)
}

/// Full donor set `A(c) \ {a}` with its test verdict.
pub fn full_donor_selection(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    rho: f64,
    energy: f64,
) -> Result<DonorSelection> {
    let tensor = tensor.without(context, action);
    let donors = candidate_donors(&tensor, context, action)?;
    let training = training_contexts_for(&tensor, context, action, &donors)?;
    let test_report = test_donor_set(&tensor, context, &donors, &training, rho, energy)?;
    Ok(DonorSelection { donors, training_contexts: training, test_report, strategy: SelectionStrategy::Full })
}

/// Order in which greedy selection adds donors: each step takes the action
/// that keeps the most training contexts, the first in canonical order on
/// ties. The order does not depend on the test.
pub fn greedy_order(tensor: &ObservationTensor, context: &str, action: &str) -> Result<Vec<String>> {
    let tensor = tensor.without(context, action);
    let mut remaining = candidate_donors(&tensor, context, action)?;
    let mut chosen: Vec<String> = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(usize, usize)> = None;
        for (idx, cand) in remaining.iter().enumerate() {
            let mut trial = chosen.clone();
            trial.push(cand.clone());
            let count = training_contexts_for(&tensor, context, action, &trial)?.len();
            // `remaining` is in canonical order, so strict > keeps the first on ties.
            if best.is_none_or(|(_, c)| count > c) {
                best = Some((idx, count));
            }
        }
        let (idx, _) = best.expect("remaining is nonempty");
        chosen.push(remaining.remove(idx));
    }
    Ok(chosen)
}

/// Grows the donor set along [`greedy_order`] until the subspace test
/// passes or every candidate is included.
pub fn greedy_donor_selection(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    rho: f64,
    energy: f64,
) -> Result<DonorSelection> {
    let order = greedy_order(tensor, context, action)?;
    let tensor = tensor.without(context, action);
    for k in 1..=order.len() {
        let mut donors = order[..k].to_vec();
        donors.sort();
        let training = training_contexts_for(&tensor, context, action, &donors)?;
        let report = test_donor_set(&tensor, context, &donors, &training, rho, energy)?;
        if !report.rejected || k == order.len() {
            return Ok(DonorSelection {
                donors,
                training_contexts: training,
                test_report: report,
                strategy: SelectionStrategy::Greedy,
            });
        }
    }
    unreachable!("greedy_order is nonempty")
}

/// Evaluates every nonempty donor subset and returns the passing subset with
/// the most training contexts (ties: more donors, then canonical order). If
/// none passes, returns the subset with the smallest `tau / rank_test`.
pub fn exhaustive_donor_selection(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    rho: f64,
    energy: f64,
    max_actions: usize,
) -> Result<DonorSelection> {
    let tensor = tensor.without(context, action);
    let pool = candidate_donors(&tensor, context, action)?;
    if pool.len() > max_actions {
        return Err(Error::TooManyDonors { count: pool.len(), max: max_actions });
    }

    let mut best_pass: Option<DonorSelection> = None;
    let mut best_fail: Option<(f64, DonorSelection)> = None;
    for mask in 1u64..(1u64 << pool.len()) {
        let donors: Vec<String> = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.clone())
            .collect();
        let training = training_contexts_for(&tensor, context, action, &donors)?;
        if training.is_empty() {
            continue;
        }
        let report = test_donor_set(&tensor, context, &donors, &training, rho, energy)?;
        let candidate = DonorSelection {
            donors,
            training_contexts: training,
            test_report: report,
            strategy: SelectionStrategy::Exhaustive,
        };
        if !candidate.test_report.rejected {
            if best_pass.as_ref().is_none_or(|b| pass_order(&candidate, b).is_gt()) {
                best_pass = Some(candidate);
            }
        } else {
            let score = candidate.test_report.tau_hat / candidate.test_report.rank_test.max(1) as f64;
            let better = match &best_fail {
                None => true,
                Some((s, b)) => score < *s || (score == *s && pass_order(&candidate, b).is_gt()),
            };
            if better {
                best_fail = Some((score, candidate));
            }
        }
    }
    best_pass
        .or(best_fail.map(|(_, s)| s))
        .ok_or_else(|| Error::EmptyTrainingSet { context: context.into(), action: action.into() })
}

/// Preference among passing subsets: more training contexts, then more
/// donors, then lexicographically smaller donor list.
fn pass_order(a: &DonorSelection, b: &DonorSelection) -> std::cmp::Ordering {
    a.training_contexts
        .len()
        .cmp(&b.training_contexts.len())
        .then(a.donors.len().cmp(&b.donors.len()))
        .then_with(|| b.donors.cmp(&a.donors))
}

/// Energy levels reported by [`spectrum_report`].
pub const SPECTRUM_ENERGIES: [f64; 3] = [0.9, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub num_rows: usize,
    pub p: usize,
    pub singular_values: Vec<f64>,
    /// `(energy, effective rank)` pairs.
    pub effective_ranks: Vec<(f64, usize)>,
}

impl SpectrumReport {
    pub fn rank_at(&self, energy: f64) -> usize {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total <= 0.0 {
            return 0;
        }
        let mut cum = 0.0;
        for (i, s) in self.singular_values.iter().enumerate() {
            cum += s * s;
            if cum / total >= energy {
                return i + 1;
            }
        }
        self.singular_values.len()
    }
}

/// Spectrum of the `|Omega| x p` matrix of observed outcome vectors.
pub fn spectrum_report(tensor: &ObservationTensor) -> Result<SpectrumReport> {
    if tensor.is_empty() {
        return Err(Error::EmptyTensor);
    }
    let p = tensor.p();
    let rows: Vec<f64> = tensor.entries().flat_map(|(_, v)| v.iter().copied()).collect();
    let m = DMatrix::from_row_slice(tensor.len(), p, &rows);
    let svd = SvdFactors::new(&m);
    Ok(SpectrumReport {
        num_rows: tensor.len(),
        p,
        singular_values: svd.s.iter().copied().collect(),
        effective_ranks: SPECTRUM_ENERGIES.iter().map(|&e| (e, svd.energy_rank(e))).collect(),
    })
}
