//! Leave-one-out benchmarking.
//!
//! Every observed pair is masked in turn, predicted from the rest of the
//! tensor and scored against its true vector. Failures are kept as records
//! with a skip reason.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{fit_si_a, EstimatorConfig, EstimatorKind, ImputationReport, ImputeSettings};
use crate::scm_sim::seeded_rng;
use crate::tensor_store::ObservationTensor;

/// Anything that can impute a pair from a tensor.
pub trait Estimator {
    fn label(&self) -> String;
    fn impute(&self, tensor: &ObservationTensor, context: &str, action: &str) -> Result<ImputationReport>;
}

impl Estimator for ImputeSettings {
    fn label(&self) -> String {
        self.estimator.to_string()
    }

    fn impute(&self, tensor: &ObservationTensor, context: &str, action: &str) -> Result<ImputationReport> {
        ImputeSettings::impute(self, tensor, context, action)
    }
}

/// `1 - SS_res / SS_tot` with the total sum of squares centred on the mean
/// of the true vector's coordinates. A constant truth gives 1 on an exact
/// match and negative infinity otherwise.
pub fn r2_score(prediction: &[f64], truth: &[f64]) -> f64 {
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_res: f64 = prediction.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

pub fn rmse(prediction: &[f64], truth: &[f64]) -> f64 {
    let ss: f64 = prediction.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    (ss / truth.len() as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooRecord {
    pub context: String,
    pub action: String,
    /// `None` when skipped. Negative infinity (written as JSON `null`) only
    /// with `zero_variance` set.
    pub r2: Option<f64>,
    pub rmse: Option<f64>,
    pub estimator_used: Option<EstimatorKind>,
    pub fell_back: bool,
    pub zero_variance: bool,
    pub skip_reason: Option<String>,
    #[serde(skip)]
    pub runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Requested estimator, or `requested/used` for the per-route breakdown.
    pub estimator: String,
    pub evaluated: usize,
    pub skipped: usize,
    pub median_r2: Option<f64>,
    pub mean_r2: Option<f64>,
    pub median_rmse: Option<f64>,
    pub mean_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LooResult {
    pub estimator: String,
    pub per_pair: Vec<LooRecord>,
    pub summary: Vec<SummaryRow>,
}

impl LooResult {
    pub fn overall(&self) -> &SummaryRow {
        &self.summary[0]
    }

    pub fn median_r2(&self) -> Option<f64> {
        self.overall().median_r2
    }

    /// Deterministic JSON payload; runtimes are excluded.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

fn summarize(label: String, records: &[&LooRecord]) -> SummaryRow {
    let r2: Vec<f64> = records.iter().filter_map(|r| r.r2).collect();
    let rm: Vec<f64> = records.iter().filter_map(|r| r.rmse).collect();
    SummaryRow {
        estimator: label,
        evaluated: rm.len(),
        skipped: records.iter().filter(|r| r.skip_reason.is_some()).count(),
        median_r2: median(&r2),
        mean_r2: mean(&r2),
        median_rmse: median(&rm),
        mean_rmse: mean(&rm),
    }
}

/// LOO evaluation with the named estimator settings.
pub fn loo_evaluate(tensor: &ObservationTensor, settings: &ImputeSettings) -> Result<LooResult> {
    loo_evaluate_with(tensor, settings)
}

pub fn loo_evaluate_with(tensor: &ObservationTensor, estimator: &dyn Estimator) -> Result<LooResult> {
    if tensor.len() < 2 {
        return Err(Error::InvalidParameter("leave-one-out needs at least two observations".into()));
    }
    let mut per_pair = Vec::with_capacity(tensor.len());
    for (key, truth) in tensor.entries() {
        let masked = tensor.without(&key.context, &key.action);
        let start = Instant::now();
        let outcome = estimator.impute(&masked, &key.context, &key.action);
        let runtime_seconds = start.elapsed().as_secs_f64();
        let record = match outcome {
            Ok(report) => {
                let r2 = r2_score(&report.prediction, truth);
                LooRecord {
                    context: key.context.clone(),
                    action: key.action.clone(),
                    r2: Some(r2),
                    rmse: Some(rmse(&report.prediction, truth)),
                    estimator_used: Some(report.estimator_used),
                    fell_back: report.fell_back,
                    zero_variance: is_constant(truth),
                    skip_reason: None,
                    runtime_seconds,
                }
            }
            Err(e) => LooRecord {
                context: key.context.clone(),
                action: key.action.clone(),
                r2: None,
                rmse: None,
                estimator_used: None,
                fell_back: false,
                zero_variance: false,
                skip_reason: Some(e.to_string()),
                runtime_seconds,
            },
        };
        per_pair.push(record);
    }

    let label = estimator.label();
    let all: Vec<&LooRecord> = per_pair.iter().collect();
    let mut summary = vec![summarize(label.clone(), &all)];
    let mut used: Vec<EstimatorKind> = per_pair.iter().filter_map(|r| r.estimator_used).collect();
    used.sort_by_key(|k| k.as_str());
    used.dedup();
    if used.len() > 1 {
        for kind in used {
            let subset: Vec<&LooRecord> =
                per_pair.iter().filter(|r| r.estimator_used == Some(kind)).collect();
            summary.push(summarize(format!("{label}/{}", kind.as_str()), &subset));
        }
    }
    Ok(LooResult { estimator: label, per_pair, summary })
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub donors: usize,
    pub training: usize,
    pub mean_r2: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn get(&self, donors: usize, training: usize) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.donors == donors && c.training == training)
    }
}

fn sample_sorted(pool: &[String], k: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    for i in 0..k {
        let j = rng.random_range(i..idx.len());
        idx.swap(i, j);
    }
    let mut out: Vec<String> = idx[..k].iter().map(|&i| pool[i].clone()).collect();
    out.sort();
    out
}

/// SI-A with `i` random donor actions and `j` random training contexts, for
/// every `(i, j)` in the grid, averaged over all observed pairs (held out in
/// turn) and `repeats` draws.
///
/// A (pair, draw) is skipped when the pair cannot supply the counts; a cell
/// with no evaluations is an error.
pub fn donor_sweep(
    tensor: &ObservationTensor,
    donor_counts: &[usize],
    training_counts: &[usize],
    repeats: usize,
    seed: u64,
    config: &EstimatorConfig,
) -> Result<SweepGrid> {
    if repeats == 0 || donor_counts.contains(&0) || training_counts.contains(&0) {
        return Err(Error::InvalidParameter("counts and repeats must be positive".into()));
    }
    let pairs: Vec<_> = tensor.observed_pairs().into_iter().collect();
    let mut cells = Vec::new();
    let mut stream = 0u64;
    for &i in donor_counts {
        for &j in training_counts {
            let mut total = 0.0;
            let mut evaluated = 0;
            let mut skipped = 0;
            for key in &pairs {
                let truth = tensor.get(&key.context, &key.action).expect("observed");
                let masked = tensor.without(&key.context, &key.action);
                let mut pool = masked.actions_of(&key.context)?;
                pool.retain(|a| a != &key.action);
                for _ in 0..repeats {
                    let mut rng = seeded_rng(seed, stream);
                    stream += 1;
                    if pool.len() < i {
                        skipped += 1;
                        continue;
                    }
                    let donors = sample_sorted(&pool, i, &mut rng);
                    let mut needed: Vec<&str> = donors.iter().map(String::as_str).collect();
                    needed.push(&key.action);
                    let mut train_pool = masked.contexts_of_all(&needed)?;
                    train_pool.retain(|c| c != &key.context);
                    if train_pool.len() < j {
                        skipped += 1;
                        continue;
                    }
                    let training = sample_sorted(&train_pool, j, &mut rng);
                    let report = fit_si_a(&masked, &key.context, &key.action, &donors, &training, config)?;
                    total += r2_score(&report.prediction, truth);
                    evaluated += 1;
                }
            }
            if evaluated == 0 {
                return Err(Error::CountsExceedAvailability(format!(
                    "no pair supports {i} donors with {j} training contexts"
                )));
            }
            cells.push(SweepCell { donors: i, training: j, mean_r2: total / evaluated as f64, evaluated, skipped });
        }
    }
    Ok(SweepGrid { cells })
}
