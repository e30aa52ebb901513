//! Synthetic-interventions estimators and the baselines they are compared to.
//!
//! SI-A expresses the target action as a linear combination of donor actions:
//! weights are fit on training contexts that observe every donor and the
//! target action, then applied to the target context's donor outcomes. SI-C is
//! the mirror image with contexts as donors.
//!
//! Every single-pair estimator masks the target pair before fitting, so an
//! observed pair is imputed as if it were held out.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::diagnostics::{
    self, exhaustive_donor_selection, greedy_donor_selection, subspace_test, DonorSelection,
    SelectionStrategy, SubspaceTestReport, DEFAULT_MAX_ACTIONS, DEFAULT_RHO, DEFAULT_TEST_ENERGY,
};
use crate::error::{Error, Result};
use crate::linalg::{hsvt, pseudoinverse_solve, DEFAULT_RCOND};
use crate::tensor_store::{ObservationTensor, PairKey, PairSet};

/// Which axis supplies the donors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// SI-A: donors are actions, training fibers are contexts.
    ActionDonors,
    /// SI-C: donors are contexts, training fibers are actions.
    ContextDonors,
}

fn serialize_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(s)
}

fn serialize_vector<S: Serializer>(v: &DVector<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.as_slice().serialize(s)
}

/// Matrices and weights from one regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionArtifacts {
    pub orientation: Orientation,
    pub donors: Vec<String>,
    pub training: Vec<String>,
    #[serde(serialize_with = "serialize_matrix")]
    pub x_train: DMatrix<f64>,
    #[serde(serialize_with = "serialize_vector")]
    pub y_train: DVector<f64>,
    #[serde(serialize_with = "serialize_matrix")]
    pub x_test: DMatrix<f64>,
    #[serde(serialize_with = "serialize_vector")]
    pub beta: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoWayConfig {
    pub lambda_c: f64,
}

impl Default for TwoWayConfig {
    fn default() -> Self {
        Self { lambda_c: 0.5 }
    }
}

/// A baseline estimator, usable as the fallback of the test-gated pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Baseline {
    MeanOverActions,
    MeanOverContexts,
    TwoWay(TwoWayConfig),
    FixedActionEffect { reference: String },
}

impl Baseline {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            Baseline::MeanOverActions => EstimatorKind::MeanOverActions,
            Baseline::MeanOverContexts => EstimatorKind::MeanOverContexts,
            Baseline::TwoWay(_) => EstimatorKind::TwoWay,
            Baseline::FixedActionEffect { .. } => EstimatorKind::FixedActionEffect,
        }
    }

    pub fn predict(&self, tensor: &ObservationTensor, context: &str, action: &str) -> Result<Vec<f64>> {
        match self {
            Baseline::MeanOverActions => mean_over_actions(tensor, context, action),
            Baseline::MeanOverContexts => mean_over_contexts(tensor, context, action),
            Baseline::TwoWay(cfg) => two_way_mean(tensor, context, action, *cfg),
            Baseline::FixedActionEffect { reference } => {
                fixed_action_effect(tensor, context, action, reference)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorConfig {
    /// HSVT energy applied to the training and test designs, if any.
    pub denoise: Option<f64>,
    pub rcond: f64,
    /// Subspace-test rejection fraction.
    pub rho: f64,
    /// Spectral energy for the subspace-test bases.
    pub energy: f64,
    pub fallback: Baseline,
    pub donor_strategy: SelectionStrategy,
    pub max_exhaustive_donors: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            denoise: None,
            rcond: DEFAULT_RCOND,
            rho: DEFAULT_RHO,
            energy: DEFAULT_TEST_ENERGY,
            fallback: Baseline::MeanOverActions,
            donor_strategy: SelectionStrategy::Full,
            max_exhaustive_donors: DEFAULT_MAX_ACTIONS,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.denoise {
            diagnostics::check_fraction("denoise", e, false)?;
        }
        diagnostics::check_fraction("rho", self.rho, true)?;
        diagnostics::check_fraction("energy", self.energy, false)?;
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return Err(Error::InvalidParameter(format!("rcond = {} must lie in (0, 1)", self.rcond)));
        }
        if let Baseline::TwoWay(cfg) = &self.fallback {
            diagnostics::check_fraction("lambda_c", cfg.lambda_c, true)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    SiA,
    SiC,
    MeanOverActions,
    MeanOverContexts,
    TwoWay,
    FixedActionEffect,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::SiA => "si_a",
            EstimatorKind::SiC => "si_c",
            EstimatorKind::MeanOverActions => "mean_over_actions",
            EstimatorKind::MeanOverContexts => "mean_over_contexts",
            EstimatorKind::TwoWay => "two_way",
            EstimatorKind::FixedActionEffect => "fixed_action_effect",
        }
    }
}

/// Outcome of imputing one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputationReport {
    pub target: PairKey,
    pub prediction: Vec<f64>,
    pub estimator_used: EstimatorKind,
    pub artifacts: Option<RegressionArtifacts>,
    pub test_report: Option<SubspaceTestReport>,
    pub fell_back: bool,
    /// Zero training design: prediction is the zero-weight combination.
    pub degenerate: bool,
    /// Why the SI estimate was not used, when `fell_back` is set.
    pub fallback_reason: Option<String>,
}

impl ImputationReport {
    fn baseline(target: PairKey, kind: EstimatorKind, prediction: Vec<f64>) -> Self {
        Self {
            target,
            prediction,
            estimator_used: kind,
            artifacts: None,
            test_report: None,
            fell_back: false,
            degenerate: false,
            fallback_reason: None,
        }
    }
}

fn check_pair(tensor: &ObservationTensor, context: &str, action: &str) -> Result<()> {
    if !tensor.has_context(context) {
        return Err(Error::UnknownContext(context.into()));
    }
    if !tensor.has_action(action) {
        return Err(Error::UnknownAction(action.into()));
    }
    Ok(())
}

/// Builds the designs, optionally denoises them, and solves for the weights.
/// `tensor` must already have the target masked.
fn regress(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    orientation: Orientation,
    donors: Vec<String>,
    training: Vec<String>,
    config: &EstimatorConfig,
) -> Result<(Vec<f64>, RegressionArtifacts, bool)> {
    let (mut x_train, y_train, mut x_test) = match orientation {
        Orientation::ActionDonors => (
            tensor.stack_training(&training, &donors)?,
            tensor.stack_training(&training, &[action])?,
            tensor.stack_training(&[context], &donors)?,
        ),
        Orientation::ContextDonors => (
            tensor.stack_training_by_context(&training, &donors)?,
            tensor.stack_training_by_context(&training, &[context])?,
            tensor.stack_training_by_context(&[action], &donors)?,
        ),
    };
    if let Some(energy) = config.denoise {
        x_train = hsvt(&x_train, energy);
        x_test = hsvt(&x_test, energy);
    }
    let y_train = y_train.column(0).clone_owned();
    let sol = pseudoinverse_solve(&x_train, &y_train, config.rcond);
    let prediction = (&x_test * &sol.weights).iter().copied().collect();
    let artifacts = RegressionArtifacts {
        orientation,
        donors,
        training,
        x_train,
        y_train,
        x_test,
        beta: sol.weights,
    };
    Ok((prediction, artifacts, sol.degenerate))
}

fn validated_override(
    available: &[String],
    requested: &[String],
    missing: impl Fn(&str) -> Error,
    empty: Error,
) -> Result<Vec<String>> {
    if requested.is_empty() {
        return Err(empty);
    }
    for (i, d) in requested.iter().enumerate() {
        if !available.contains(d) || requested[..i].contains(d) {
            return Err(missing(d));
        }
    }
    Ok(requested.to_vec())
}

/// Donor actions for SI-A according to the configured strategy, together
/// with the selection report when a test was run.
fn si_a_donors(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    config: &EstimatorConfig,
    donor_override: Option<&[String]>,
) -> Result<(Vec<String>, Option<DonorSelection>)> {
    let mut available = tensor.actions_of(context)?;
    available.retain(|a| a != action);
    let empty = Error::EmptyDonorSet { context: context.into(), action: action.into() };
    if let Some(req) = donor_override {
        let donors = validated_override(
            &available,
            req,
            |d| Error::MissingPair { context: context.into(), action: d.into() },
            empty,
        )?;
        return Ok((donors, None));
    }
    if available.is_empty() {
        return Err(empty);
    }
    let selection = match config.donor_strategy {
        SelectionStrategy::Full => return Ok((available, None)),
        SelectionStrategy::Greedy => {
            greedy_donor_selection(tensor, context, action, config.rho, config.energy)?
        }
        SelectionStrategy::Exhaustive => exhaustive_donor_selection(
            tensor,
            context,
            action,
            config.rho,
            config.energy,
            config.max_exhaustive_donors,
        )?,
    };
    Ok((selection.donors.clone(), Some(selection)))
}

/// SI-A with explicit donor actions and training contexts.
pub fn fit_si_a(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    donors: &[String],
    training: &[String],
    config: &EstimatorConfig,
) -> Result<ImputationReport> {
    check_pair(tensor, context, action)?;
    let masked = tensor.without(context, action);
    if donors.is_empty() {
        return Err(Error::EmptyDonorSet { context: context.into(), action: action.into() });
    }
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet { context: context.into(), action: action.into() });
    }
    let (prediction, artifacts, degenerate) = regress(
        &masked,
        context,
        action,
        Orientation::ActionDonors,
        donors.to_vec(),
        training.to_vec(),
        config,
    )?;
    Ok(ImputationReport {
        target: PairKey::new(context, action),
        prediction,
        estimator_used: EstimatorKind::SiA,
        artifacts: Some(artifacts),
        test_report: None,
        fell_back: false,
        degenerate,
        fallback_reason: None,
    })
}

/// Synthetic interventions across actions.
///
/// Donors default to `A(c) \ {a}` (or the configured selection strategy);
/// training contexts are `C(donors + {a}) \ {c}`.
pub fn si_a(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    config: &EstimatorConfig,
    donor_override: Option<&[String]>,
) -> Result<ImputationReport> {
    config.validate()?;
    check_pair(tensor, context, action)?;
    let masked = tensor.without(context, action);
    let (donors, selection) = si_a_donors(&masked, context, action, config, donor_override)?;
    let training = diagnostics::training_contexts_for(&masked, context, action, &donors)?;
    let mut report = fit_si_a(&masked, context, action, &donors, &training, config)?;
    report.test_report = selection.map(|s| s.test_report);
    Ok(report)
}

/// Synthetic interventions across contexts: donors are `C(a) \ {c}`,
/// training actions are `A(donors + {c}) \ {a}`.
pub fn si_c(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    config: &EstimatorConfig,
    donor_override: Option<&[String]>,
) -> Result<ImputationReport> {
    config.validate()?;
    check_pair(tensor, context, action)?;
    let masked = tensor.without(context, action);
    let mut available = masked.contexts_of(action)?;
    available.retain(|c| c != context);
    let empty = Error::EmptyDonorSet { context: context.into(), action: action.into() };
    let (donors, test_report) = match donor_override {
        Some(req) => (
            validated_override(
                &available,
                req,
                |d| Error::MissingPair { context: d.into(), action: action.into() },
                empty,
            )?,
            None,
        ),
        None if available.is_empty() => return Err(empty),
        None => match config.donor_strategy {
            SelectionStrategy::Full => (available, None),
            strategy => {
                // Selection on the role-swapped tensor picks donor contexts.
                let swapped = masked.transposed();
                let sel = if strategy == SelectionStrategy::Greedy {
                    greedy_donor_selection(&swapped, action, context, config.rho, config.energy)?
                } else {
                    exhaustive_donor_selection(
                        &swapped,
                        action,
                        context,
                        config.rho,
                        config.energy,
                        config.max_exhaustive_donors,
                    )?
                };
                (sel.donors, Some(sel.test_report))
            }
        },
    };
    let mut needed: Vec<&str> = donors.iter().map(String::as_str).collect();
    needed.push(context);
    let mut training = masked.actions_of_all(&needed)?;
    training.retain(|a| a != action);
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet { context: context.into(), action: action.into() });
    }
    let (prediction, artifacts, degenerate) =
        regress(&masked, context, action, Orientation::ContextDonors, donors, training, config)?;
    Ok(ImputationReport {
        target: PairKey::new(context, action),
        prediction,
        estimator_used: EstimatorKind::SiC,
        artifacts: Some(artifacts),
        test_report,
        fell_back: false,
        degenerate,
        fallback_reason: None,
    })
}

fn mean_of<'a>(p: usize, vectors: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut sum = vec![0.0; p];
    let mut n = 0usize;
    for v in vectors {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1;
    }
    sum.iter().map(|s| s / n as f64).collect()
}

/// Mean of `x^{c a'}` over `a' in A(c) \ {a}`.
pub fn mean_over_actions(tensor: &ObservationTensor, context: &str, action: &str) -> Result<Vec<f64>> {
    check_pair(tensor, context, action)?;
    let mut others = tensor.actions_of(context)?;
    others.retain(|x| x != action);
    if others.is_empty() {
        return Err(Error::EmptyDonorSet { context: context.into(), action: action.into() });
    }
    Ok(mean_of(tensor.p(), others.iter().map(|x| tensor.get(context, x).expect("observed"))))
}

/// Mean of `x^{c' a}` over `c' in C(a) \ {c}`.
pub fn mean_over_contexts(tensor: &ObservationTensor, context: &str, action: &str) -> Result<Vec<f64>> {
    check_pair(tensor, context, action)?;
    let mut others = tensor.contexts_of(action)?;
    others.retain(|x| x != context);
    if others.is_empty() {
        return Err(Error::EmptyDonorSet { context: context.into(), action: action.into() });
    }
    Ok(mean_of(tensor.p(), others.iter().map(|x| tensor.get(x, action).expect("observed"))))
}

/// `lambda_c * mean_over_contexts + (1 - lambda_c) * mean_over_actions`.
pub fn two_way_mean(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    cfg: TwoWayConfig,
) -> Result<Vec<f64>> {
    diagnostics::check_fraction("lambda_c", cfg.lambda_c, true)?;
    let by_contexts = mean_over_contexts(tensor, context, action)?;
    let by_actions = mean_over_actions(tensor, context, action)?;
    Ok(by_contexts
        .iter()
        .zip(&by_actions)
        .map(|(c, a)| cfg.lambda_c * c + (1.0 - cfg.lambda_c) * a)
        .collect())
}

/// `x^{c a'}` plus the average shift `x^{i a} - x^{i a'}` over contexts
/// `i != c` observed under both actions.
pub fn fixed_action_effect(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    reference: &str,
) -> Result<Vec<f64>> {
    check_pair(tensor, context, action)?;
    if !tensor.has_action(reference) {
        return Err(Error::UnknownAction(reference.into()));
    }
    if action == reference {
        return tensor.get(context, reference).map(<[f64]>::to_vec).ok_or_else(|| {
            Error::MissingPair { context: context.into(), action: reference.into() }
        });
    }
    let base = tensor
        .get(context, reference)
        .ok_or_else(|| Error::MissingPair { context: context.into(), action: reference.into() })?;
    let mut shared = tensor.contexts_of_all(&[action, reference])?;
    shared.retain(|c| c != context);
    if shared.is_empty() {
        return Err(Error::EmptyTrainingSet { context: context.into(), action: action.into() });
    }
    let p = tensor.p();
    let mut shift = vec![0.0; p];
    for c in &shared {
        let xa = tensor.get(c, action).expect("observed");
        let xr = tensor.get(c, reference).expect("observed");
        for k in 0..p {
            shift[k] += xa[k] - xr[k];
        }
    }
    let n = shared.len() as f64;
    Ok(base.iter().zip(&shift).map(|(b, s)| b + s / n).collect())
}

/// Baseline prediction for `(c, a)` with the target masked.
pub fn baseline_report(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    baseline: &Baseline,
) -> Result<ImputationReport> {
    let masked = tensor.without(context, action);
    let prediction = baseline.predict(&masked, context, action)?;
    Ok(ImputationReport::baseline(PairKey::new(context, action), baseline.kind(), prediction))
}

/// SI-A gated by the subspace test, falling back to the configured baseline
/// when the test rejects or SI-A cannot be fit.
pub fn impute_with_fallback(
    tensor: &ObservationTensor,
    context: &str,
    action: &str,
    config: &EstimatorConfig,
) -> Result<ImputationReport> {
    config.validate()?;
    check_pair(tensor, context, action)?;
    let masked = tensor.without(context, action);

    let attempt = || -> Result<std::result::Result<ImputationReport, (SubspaceTestReport, String)>> {
        let (donors, selection) = si_a_donors(&masked, context, action, config, None)?;
        let training = diagnostics::training_contexts_for(&masked, context, action, &donors)?;
        if training.is_empty() {
            return Err(Error::EmptyTrainingSet { context: context.into(), action: action.into() });
        }
        let report = match selection {
            Some(sel) => sel.test_report,
            None => {
                let x_train = masked.stack_training(&training, &donors)?;
                let x_test = masked.stack_training(&[context], &donors)?;
                subspace_test(&x_train, &x_test, config.rho, config.energy)?
            }
        };
        if report.rejected {
            let reason = format!(
                "subspace test rejected: tau_hat {:.6} >= threshold {:.6}",
                report.tau_hat, report.threshold
            );
            return Ok(Err((report, reason)));
        }
        let mut si = fit_si_a(&masked, context, action, &donors, &training, config)?;
        si.test_report = Some(report);
        Ok(Ok(si))
    };

    let (test_report, reason) = match attempt() {
        Ok(Ok(report)) => return Ok(report),
        Ok(Err((report, reason))) => (Some(report), reason),
        Err(e) => (None, e.to_string()),
    };
    let prediction = config.fallback.predict(&masked, context, action)?;
    Ok(ImputationReport {
        target: PairKey::new(context, action),
        prediction,
        estimator_used: config.fallback.kind(),
        artifacts: None,
        test_report,
        fell_back: true,
        degenerate: false,
        fallback_reason: Some(reason),
    })
}

/// Estimator selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    SiA,
    SiC,
    SiAFallback,
    MeanOverActions,
    MeanOverContexts,
    TwoWay,
    FixedActionEffect,
}

impl EstimatorName {
    pub const ALL: [EstimatorName; 7] = [
        EstimatorName::SiA,
        EstimatorName::SiC,
        EstimatorName::SiAFallback,
        EstimatorName::MeanOverActions,
        EstimatorName::MeanOverContexts,
        EstimatorName::TwoWay,
        EstimatorName::FixedActionEffect,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorName::SiA => "si_a",
            EstimatorName::SiC => "si_c",
            EstimatorName::SiAFallback => "si_a_fallback",
            EstimatorName::MeanOverActions => "mean_over_actions",
            EstimatorName::MeanOverContexts => "mean_over_contexts",
            EstimatorName::TwoWay => "two_way",
            EstimatorName::FixedActionEffect => "fixed_action_effect",
        }
    }
}

impl std::fmt::Display for EstimatorName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownEstimator(s.to_string()))
    }
}

/// Everything needed to run any named estimator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputeSettings {
    pub estimator: EstimatorName,
    pub config: EstimatorConfig,
    pub two_way: TwoWayConfig,
    pub reference_action: Option<String>,
}

impl ImputeSettings {
    pub fn new(estimator: EstimatorName) -> Self {
        Self {
            estimator,
            config: EstimatorConfig::default(),
            two_way: TwoWayConfig::default(),
            reference_action: None,
        }
    }

    pub fn impute(&self, tensor: &ObservationTensor, context: &str, action: &str) -> Result<ImputationReport> {
        match self.estimator {
            EstimatorName::SiA => si_a(tensor, context, action, &self.config, None),
            EstimatorName::SiC => si_c(tensor, context, action, &self.config, None),
            EstimatorName::SiAFallback => impute_with_fallback(tensor, context, action, &self.config),
            EstimatorName::MeanOverActions => {
                baseline_report(tensor, context, action, &Baseline::MeanOverActions)
            }
            EstimatorName::MeanOverContexts => {
                baseline_report(tensor, context, action, &Baseline::MeanOverContexts)
            }
            EstimatorName::TwoWay => baseline_report(tensor, context, action, &Baseline::TwoWay(self.two_way)),
            EstimatorName::FixedActionEffect => {
                let reference = self.reference_action.clone().ok_or_else(|| {
                    Error::InvalidParameter("fixed_action_effect needs a reference action".into())
                })?;
                baseline_report(tensor, context, action, &Baseline::FixedActionEffect { reference })
            }
        }
    }
}

/// One round of tandem imputation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TandemRound {
    pub round: usize,
    pub imputed_by_si_a: usize,
    pub imputed_by_si_c: usize,
    /// Largest `||new - old|| / ||old||` over imputed pairs; infinite when a
    /// pair was imputed for the first time.
    pub max_relative_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TandemResult {
    /// Observations plus imputed entries.
    pub tensor: ObservationTensor,
    /// Pairs in `tensor` that were imputed rather than observed.
    pub synthetic: PairSet,
    pub rounds: Vec<TandemRound>,
    pub unimputable: Vec<PairKey>,
    pub converged: bool,
}

fn overwrite(tensor: &mut ObservationTensor, key: &PairKey, value: Vec<f64>) -> Result<()> {
    tensor.remove(&key.context, &key.action);
    tensor.insert(key.context.clone(), key.action.clone(), value)
}

/// Alternates SI-A and SI-C passes over all missing pairs, feeding each
/// pass's imputations to the next, until the imputed entries stop changing.
///
/// Each pass reads only the state left by the previous pass. Donor and
/// training sets are recomputed every pass, and every imputed pair is
/// re-estimated each round with itself masked.
pub fn tandem_impute(
    tensor: &ObservationTensor,
    max_rounds: usize,
    convergence_tol: f64,
    config: &EstimatorConfig,
) -> Result<TandemResult> {
    if max_rounds == 0 {
        return Err(Error::InvalidParameter("max_rounds must be at least 1".into()));
    }
    config.validate()?;
    let missing = tensor.missing_pairs();
    let mut working = tensor.clone();
    let mut imputed: BTreeMap<PairKey, Vec<f64>> = BTreeMap::new();
    let mut rounds = Vec::new();
    let mut converged = false;

    for round in 1..=max_rounds {
        if missing.is_empty() {
            rounds.push(TandemRound { round, imputed_by_si_a: 0, imputed_by_si_c: 0, max_relative_change: 0.0 });
            converged = true;
            break;
        }
        let previous = imputed.clone();
        let mut counts = [0usize; 2];
        for (pass, count) in counts.iter_mut().enumerate() {
            let snapshot = working.clone();
            let estimates: Vec<(PairKey, Vec<f64>)> = missing
                .iter()
                .filter_map(|key| {
                    let r = if pass == 0 {
                        si_a(&snapshot, &key.context, &key.action, config, None)
                    } else {
                        si_c(&snapshot, &key.context, &key.action, config, None)
                    };
                    r.ok().map(|rep| (key.clone(), rep.prediction))
                })
                .filter(|(_, v)| v.iter().all(|x| x.is_finite()))
                .collect();
            *count = estimates.len();
            for (key, value) in estimates {
                overwrite(&mut working, &key, value.clone())?;
                imputed.insert(key, value);
            }
        }

        let mut change: f64 = 0.0;
        for (key, new) in &imputed {
            let rel = match previous.get(key) {
                None => f64::INFINITY,
                Some(old) => {
                    let diff = new.iter().zip(old).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    let scale = old.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if scale > 0.0 {
                        diff / scale
                    } else if diff == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY
                    }
                }
            };
            change = change.max(rel);
        }
        rounds.push(TandemRound {
            round,
            imputed_by_si_a: counts[0],
            imputed_by_si_c: counts[1],
            max_relative_change: change,
        });
        if imputed.is_empty() || change < convergence_tol {
            converged = !imputed.is_empty();
            break;
        }
    }

    let unimputable = missing.iter().filter(|k| !imputed.contains_key(*k)).cloned().collect();
    Ok(TandemResult {
        tensor: working,
        synthetic: imputed.into_keys().collect(),
        rounds,
        unimputable,
        converged,
    })
}
