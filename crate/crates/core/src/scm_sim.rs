//! Synthetic ground truth from linear structural equation models.
//!
//! Each context carries a strictly lower-triangular edge matrix `A^c` and a
//! loading `B^c`; an action sets the latent vector `v^a`. Outcomes solve
//! `x = A^c x + B^c v^a`, which is the factor model `x = U^c v^a` with
//! `U^c = (I - A^c)^{-1} B^c`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{subspace_test, DEFAULT_RHO, DEFAULT_TEST_ENERGY};
use crate::error::{Error, Result};
use crate::linalg::{pseudoinverse_solve, DEFAULT_RCOND};
use crate::serde_mat::{matrix_map, vector_map};
use crate::tensor_store::{ObservationTensor, PairKey, PairSet};

/// Resampling bound for instance construction.
pub const MAX_ATTEMPTS: usize = 500;

/// Seeded generator; `stream` splits one seed into independent sequences.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn context_id(i: usize) -> String {
    format!("c{i:02}")
}

pub fn action_id(i: usize) -> String {
    format!("a{i:02}")
}

/// Linear SEM per context over `p` outcome nodes in identity DAG order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    pub p: usize,
    pub r: usize,
    #[serde(with = "matrix_map")]
    pub a_matrices: BTreeMap<String, DMatrix<f64>>,
    #[serde(with = "matrix_map")]
    pub b_matrices: BTreeMap<String, DMatrix<f64>>,
    #[serde(with = "vector_map")]
    pub v_vectors: BTreeMap<String, DVector<f64>>,
}

impl ScmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.r == 0 {
            return Err(Error::InvalidParameter("p and r must be positive".into()));
        }
        if self.a_matrices.keys().ne(self.b_matrices.keys()) {
            return Err(Error::InvalidParameter("edge and loading matrices cover different contexts".into()));
        }
        for (c, a) in &self.a_matrices {
            if a.shape() != (self.p, self.p) {
                return Err(Error::DimensionMismatch(format!("A^{c} is {:?}", a.shape())));
            }
            for i in 0..self.p {
                for j in i..self.p {
                    if a[(i, j)] != 0.0 {
                        return Err(Error::InvalidParameter(format!(
                            "A^{c} is not strictly lower-triangular at ({i}, {j})"
                        )));
                    }
                }
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { index: 0 });
            }
        }
        for (c, b) in &self.b_matrices {
            if b.shape() != (self.p, self.r) || b.iter().any(|x| !x.is_finite()) {
                return Err(Error::DimensionMismatch(format!("B^{c} is {:?}", b.shape())));
            }
        }
        for (a, v) in &self.v_vectors {
            if v.len() != self.r {
                return Err(Error::DimensionMismatch(format!("v^{a} has length {}", v.len())));
            }
        }
        Ok(())
    }

    pub fn contexts(&self) -> impl Iterator<Item = &String> {
        self.a_matrices.keys()
    }

    pub fn actions(&self) -> impl Iterator<Item = &String> {
        self.v_vectors.keys()
    }

    /// Samples every edge weight, loading and latent entry from N(0, 1).
    pub fn random(
        contexts: &[String],
        actions: &[String],
        p: usize,
        r: usize,
        rng: &mut impl Rng,
    ) -> ScmSpec {
        let mut a_matrices = BTreeMap::new();
        let mut b_matrices = BTreeMap::new();
        for c in contexts {
            let mut a = DMatrix::zeros(p, p);
            for i in 0..p {
                for j in 0..i {
                    a[(i, j)] = gaussian(rng);
                }
            }
            let b = DMatrix::from_fn(p, r, |_, _| gaussian(rng));
            a_matrices.insert(c.clone(), a);
            b_matrices.insert(c.clone(), b);
        }
        let v_vectors = actions
            .iter()
            .map(|a| (a.clone(), DVector::from_fn(r, |_, _| gaussian(rng))))
            .collect();
        ScmSpec { p, r, a_matrices, b_matrices, v_vectors }
    }

    /// Solves the structural equations node by node in topological order.
    pub fn simulate(&self, context: &str, action: &str) -> Result<Vec<f64>> {
        let a = self.a_matrices.get(context).ok_or_else(|| Error::UnknownContext(context.into()))?;
        let b = &self.b_matrices[context];
        let v = self.v_vectors.get(action).ok_or_else(|| Error::UnknownAction(action.into()))?;
        let exogenous = b * v;
        let mut x = vec![0.0; self.p];
        for i in 0..self.p {
            let mut acc = exogenous[i];
            for j in 0..i {
                acc += a[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        Ok(x)
    }
}

/// `x^{ca} = U^c v^a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModelSpec {
    #[serde(with = "matrix_map")]
    pub u_matrices: BTreeMap<String, DMatrix<f64>>,
    #[serde(with = "vector_map")]
    pub v_vectors: BTreeMap<String, DVector<f64>>,
}

impl FactorModelSpec {
    pub fn p(&self) -> usize {
        self.u_matrices.values().next().map_or(0, DMatrix::nrows)
    }

    pub fn outcome(&self, context: &str, action: &str) -> Result<Vec<f64>> {
        let u = self.u_matrices.get(context).ok_or_else(|| Error::UnknownContext(context.into()))?;
        let v = self.v_vectors.get(action).ok_or_else(|| Error::UnknownAction(action.into()))?;
        Ok((u * v).iter().copied().collect())
    }

    /// Every context x action outcome.
    pub fn full_tensor(&self) -> Result<ObservationTensor> {
        let mut t = ObservationTensor::new(self.p())?;
        for c in self.u_matrices.keys() {
            for a in self.v_vectors.keys() {
                t.insert(c.clone(), a.clone(), self.outcome(c, a)?)?;
            }
        }
        Ok(t)
    }
}

/// `U^c = (I - A^c)^{-1} B^c` for every context.
pub fn scm_to_factor(spec: &ScmSpec) -> Result<FactorModelSpec> {
    spec.validate()?;
    let identity = DMatrix::<f64>::identity(spec.p, spec.p);
    let u_matrices = spec
        .a_matrices
        .iter()
        .map(|(c, a)| {
            let inv = (&identity - a)
                .try_inverse()
                .expect("I - A is unit lower-triangular and therefore invertible");
            (c.clone(), inv * &spec.b_matrices[c])
        })
        .collect();
    Ok(FactorModelSpec { u_matrices, v_vectors: spec.v_vectors.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `y = x + sigma * e`
    Additive,
    /// `y = x * (1 + sigma * e)` entrywise
    Multiplicative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

/// Observed (possibly noisy) entries plus the noiseless full tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTensor {
    pub observed: ObservationTensor,
    pub truth: ObservationTensor,
}

pub fn generate_tensor(
    spec: &FactorModelSpec,
    sparsity: &PairSet,
    noise: Option<&NoiseModel>,
) -> Result<GeneratedTensor> {
    if let Some(n) = noise {
        if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("noise sigma {} must be >= 0", n.sigma)));
        }
    }
    let truth = spec.full_tensor()?;
    let mut observed = ObservationTensor::with_ids(
        truth.p(),
        spec.u_matrices.keys().cloned(),
        spec.v_vectors.keys().cloned(),
    )?;
    let mut rng = noise.map(|n| seeded_rng(n.seed, 0));
    for key in sparsity {
        let x = truth.get(&key.context, &key.action).ok_or_else(|| {
            if truth.has_context(&key.context) {
                Error::UnknownAction(key.action.clone())
            } else {
                Error::UnknownContext(key.context.clone())
            }
        })?;
        let y = match (noise, rng.as_mut()) {
            (Some(n), Some(rng)) if n.sigma > 0.0 => x
                .iter()
                .map(|v| {
                    let e = gaussian(rng) * n.sigma;
                    match n.kind {
                        NoiseKind::Additive => v + e,
                        NoiseKind::Multiplicative => v * (1.0 + e),
                    }
                })
                .collect(),
            _ => x.to_vec(),
        };
        observed.insert(key.context.clone(), key.action.clone(), y)?;
    }
    Ok(GeneratedTensor { observed, truth })
}

/// Root mean square over every observed coordinate.
pub fn signal_rms(tensor: &ObservationTensor) -> f64 {
    let (sum, n) = tensor
        .entries()
        .flat_map(|(_, v)| v.iter())
        .fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSizes {
    pub num_contexts: usize,
    pub num_actions: usize,
    pub p: usize,
    pub r: usize,
}

/// A ground-truth model, an observation pattern and the pairs to impute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimInstance {
    pub scm: ScmSpec,
    pub sparsity: PairSet,
    pub targets: Vec<PairKey>,
}

impl SimInstance {
    pub fn factor_model(&self) -> Result<FactorModelSpec> {
        scm_to_factor(&self.scm)
    }

    pub fn generate(&self, noise: Option<&NoiseModel>) -> Result<GeneratedTensor> {
        generate_tensor(&self.factor_model()?, &self.sparsity, noise)
    }
}

fn ids(n: usize, f: fn(usize) -> String) -> Vec<String> {
    (0..n).map(f).collect()
}

/// Instance on which every designated target is identifiable.
///
/// `r` anchor contexts observe every action, so each target has at least
/// `r` training contexts; every other context observes each action with
/// probability `density`, resampled until it has at least `r` actions and
/// at least one gap. Targets are the gaps outside the anchors that satisfy
/// the latent-span condition and pass the noiseless subspace test
/// (`tau_hat < 1e-8`) at energy 1.0 and at the default test energy. The
/// instance is resampled when gaps exist but none qualify.
pub fn random_identifiable_instance(
    sizes: InstanceSizes,
    density: f64,
    seed: u64,
) -> Result<SimInstance> {
    let InstanceSizes { num_contexts, num_actions, p, r } = sizes;
    if r == 0 || p == 0 || r > p || r + 1 > num_actions {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= r <= min(num_actions - 1, p); got r = {r}, num_actions = {num_actions}, p = {p}"
        )));
    }
    if num_contexts < r + 1 {
        return Err(Error::InvalidParameter(format!(
            "need at least r + 1 = {} contexts, got {num_contexts}",
            r + 1
        )));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter(format!("density {density} must lie in (0, 1]")));
    }
    let contexts = ids(num_contexts, context_id);
    let actions = ids(num_actions, action_id);

    let mut last_failure = String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seeded_rng(seed, attempt as u64);
        let scm = ScmSpec::random(&contexts, &actions, p, r, &mut rng);

        let mut order: Vec<usize> = (0..num_contexts).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let anchors: Vec<usize> = order[..r].to_vec();

        let mut sparsity = PairSet::new();
        let mut targets = Vec::new();
        let mut pattern_ok = true;
        for (ci, c) in contexts.iter().enumerate() {
            if anchors.contains(&ci) {
                sparsity.extend(actions.iter().map(|a| PairKey::new(c.clone(), a.clone())));
                continue;
            }
            let mut row = None;
            for _ in 0..1000 {
                let mask: Vec<bool> = (0..num_actions).map(|_| rng.random::<f64>() < density).collect();
                let observed = mask.iter().filter(|m| **m).count();
                if observed >= r && (observed < num_actions || density >= 1.0) {
                    row = Some(mask);
                    break;
                }
            }
            let Some(mask) = row else {
                pattern_ok = false;
                break;
            };
            for (a, seen) in actions.iter().zip(mask) {
                let key = PairKey::new(c.clone(), a.clone());
                if seen {
                    sparsity.insert(key);
                } else {
                    targets.push(key);
                }
            }
        }
        if !pattern_ok {
            last_failure = format!("could not draw a row with at least {r} observed actions");
            continue;
        }
        if targets.is_empty() {
            return Ok(SimInstance { scm, sparsity, targets });
        }
        let mut instance = SimInstance { scm, sparsity, targets };
        let (passing, failure) = identifiable_targets(&instance)?;
        if passing.is_empty() {
            last_failure = failure.unwrap_or_default();
            continue;
        }
        instance.targets = passing;
        return Ok(instance);
    }
    Err(Error::ConstructionFailed { attempts: MAX_ATTEMPTS, reason: last_failure })
}

/// Candidate targets that satisfy the latent-span condition and pass the
/// noiseless subspace test with the full donor set, both at exact rank and at
/// the default test energy. Also returns the first failure seen.
fn identifiable_targets(instance: &SimInstance) -> Result<(Vec<PairKey>, Option<String>)> {
    let generated = instance.generate(None)?;
    let observed = &generated.observed;
    let mut passing = Vec::new();
    let mut failure = None;
    for key in &instance.targets {
        match check_identifiable(instance, observed, key)? {
            None => passing.push(key.clone()),
            Some(reason) => {
                failure.get_or_insert(reason);
            }
        }
    }
    Ok((passing, failure))
}

fn check_identifiable(
    instance: &SimInstance,
    observed: &ObservationTensor,
    key: &PairKey,
) -> Result<Option<String>> {
    let donors = observed.actions_of(&key.context)?;
    let latent = DMatrix::from_columns(&donors.iter().map(|d| instance.scm.v_vectors[d].clone()).collect::<Vec<_>>());
    let target_v = &instance.scm.v_vectors[&key.action];
    let beta = pseudoinverse_solve(&latent, target_v, DEFAULT_RCOND).weights;
    if (&latent * beta - target_v).norm() > 1e-8 * target_v.norm().max(1.0) {
        return Ok(Some(format!("latent span condition fails for {key}")));
    }
    let mut needed: Vec<&str> = donors.iter().map(String::as_str).collect();
    needed.push(&key.action);
    let mut training = observed.contexts_of_all(&needed)?;
    training.retain(|c| c != &key.context);
    let x_train = observed.stack_training(&training, &donors)?;
    let x_test = observed.stack_training(&[&key.context], &donors)?;
    for energy in [1.0, DEFAULT_TEST_ENERGY] {
        let report = subspace_test(&x_train, &x_test, DEFAULT_RHO, energy)?;
        if report.tau_hat >= 1e-8 {
            return Ok(Some(format!(
                "rowspace inclusion fails for {key} at energy {energy}: tau_hat {}",
                report.tau_hat
            )));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    /// Target latent vector orthogonal to the donors' latent span.
    Assumption2,
    /// Target context's rowspace not covered by the training contexts.
    Assumption3,
}

/// Instance with one target `(c00, a_last)` that breaks the named condition.
///
/// Every context other than `c00` observes every action. For the span
/// violation `c00` observes only `r - 1` donors and the target latent vector
/// is projected off their span. For the rowspace violation `c00` observes
/// every other action, while the other contexts load on only the first
/// `r - 1` latent coordinates.
pub fn violating_instance(kind: Violation, sizes: InstanceSizes, seed: u64) -> Result<SimInstance> {
    let InstanceSizes { num_contexts, num_actions, p, r } = sizes;
    if r < 2 || p < r || num_contexts < 2 || num_actions < r + 1 {
        return Err(Error::InvalidParameter(format!(
            "violating instances need r >= 2, p >= r, >= 2 contexts and >= r + 1 actions; got {sizes:?}"
        )));
    }
    let contexts = ids(num_contexts, context_id);
    let actions = ids(num_actions, action_id);
    let target_c = contexts[0].clone();
    let target_a = actions[num_actions - 1].clone();

    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seeded_rng(seed, attempt as u64);
        let mut scm = ScmSpec::random(&contexts, &actions, p, r, &mut rng);
        let mut sparsity = PairSet::new();
        for c in &contexts[1..] {
            sparsity.extend(actions.iter().map(|a| PairKey::new(c.clone(), a.clone())));
        }
        let donors: Vec<String> = match kind {
            Violation::Assumption2 => actions[..r - 1].to_vec(),
            Violation::Assumption3 => actions[..num_actions - 1].to_vec(),
        };
        sparsity.extend(donors.iter().map(|a| PairKey::new(target_c.clone(), a.clone())));

        match kind {
            Violation::Assumption2 => {
                let span = DMatrix::from_columns(
                    &donors.iter().map(|d| scm.v_vectors[d].clone()).collect::<Vec<_>>(),
                );
                let v = scm.v_vectors[&target_a].clone();
                let coef = pseudoinverse_solve(&span, &v, DEFAULT_RCOND).weights;
                let orth = &v - &span * coef;
                if orth.norm() < 1e-3 * v.norm() {
                    continue;
                }
                scm.v_vectors.insert(target_a.clone(), orth);
            }
            Violation::Assumption3 => {
                for c in &contexts[1..] {
                    scm.b_matrices.get_mut(c).expect("context").column_mut(r - 1).fill(0.0);
                }
            }
        }
        let instance = SimInstance {
            scm,
            sparsity,
            targets: vec![PairKey::new(target_c.clone(), target_a.clone())],
        };
        if verify_violation(kind, &instance, &donors).is_ok() {
            return Ok(instance);
        }
    }
    Err(Error::ConstructionFailed {
        attempts: MAX_ATTEMPTS,
        reason: format!("{kind:?} violation could not be certified"),
    })
}

fn verify_violation(kind: Violation, instance: &SimInstance, donors: &[String]) -> Result<()> {
    let target = &instance.targets[0];
    match kind {
        Violation::Assumption2 => {
            let v = &instance.scm.v_vectors[&target.action];
            for d in donors {
                let w = &instance.scm.v_vectors[d];
                if v.dot(w).abs() > 1e-10 * v.norm() * w.norm() {
                    return Err(Error::ConstructionFailed { attempts: 1, reason: "not orthogonal".into() });
                }
            }
            Ok(())
        }
        Violation::Assumption3 => {
            let observed = instance.generate(None)?.observed;
            let mut needed: Vec<&str> = donors.iter().map(String::as_str).collect();
            needed.push(&target.action);
            let mut training = observed.contexts_of_all(&needed)?;
            training.retain(|c| c != &target.context);
            let x_train = observed.stack_training(&training, donors)?;
            let x_test = observed.stack_training(&[&target.context], donors)?;
            for energy in [DEFAULT_TEST_ENERGY, 1.0] {
                if !subspace_test(&x_train, &x_test, DEFAULT_RHO, energy)?.rejected {
                    return Err(Error::ConstructionFailed { attempts: 1, reason: "test accepted".into() });
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_context(a: DMatrix<f64>, b: DMatrix<f64>, v: DVector<f64>) -> ScmSpec {
        ScmSpec {
            p: a.nrows(),
            r: b.ncols(),
            a_matrices: [("c".to_string(), a)].into(),
            b_matrices: [("c".to_string(), b)].into(),
            v_vectors: [("a".to_string(), v)].into(),
        }
    }

    #[test]
    fn no_edges_means_u_equals_b() {
        let b = DMatrix::from_row_slice(2, 1, &[1.5, -2.0]);
        let spec = one_context(DMatrix::zeros(2, 2), b.clone(), DVector::from_vec(vec![1.0]));
        assert_eq!(scm_to_factor(&spec).unwrap().u_matrices["c"], b);
    }

    #[test]
    fn two_node_chain() {
        // x1 = v1, x2 = x1 + v2, so U = [[1, 0], [1, 1]].
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let spec = one_context(a, DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 2.0]));
        let u = &scm_to_factor(&spec).unwrap().u_matrices["c"];
        assert!((u - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])).norm() < 1e-14);
        assert_eq!(spec.simulate("c", "a").unwrap(), vec![1.0, 3.0]);
    }

    #[test]
    fn rejects_non_triangular_edges() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let spec = one_context(a, DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 2.0]));
        assert!(matches!(scm_to_factor(&spec), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn noise_free_generation() {
        let inst = random_identifiable_instance(
            InstanceSizes { num_contexts: 4, num_actions: 5, p: 3, r: 2 },
            0.6,
            3,
        )
        .unwrap();
        let clean = inst.generate(None).unwrap();
        for (k, v) in clean.observed.entries() {
            assert_eq!(clean.truth.get(&k.context, &k.action).unwrap(), v);
        }
        let zero = NoiseModel { kind: NoiseKind::Additive, sigma: 0.0, seed: 9 };
        assert_eq!(inst.generate(Some(&zero)).unwrap(), clean);
        let noisy = NoiseModel { kind: NoiseKind::Multiplicative, sigma: 0.3, seed: 9 };
        assert_eq!(inst.generate(Some(&noisy)).unwrap(), inst.generate(Some(&noisy)).unwrap());
        assert_ne!(inst.generate(Some(&noisy)).unwrap(), clean);
    }

    #[test]
    fn unknown_sparsity_ids() {
        let spec = one_context(DMatrix::zeros(1, 1), DMatrix::identity(1, 1), DVector::from_vec(vec![1.0]));
        let fm = scm_to_factor(&spec).unwrap();
        let bad: PairSet = [PairKey::new("c", "zz")].into();
        assert_eq!(generate_tensor(&fm, &bad, None).unwrap_err(), Error::UnknownAction("zz".into()));
        let bad: PairSet = [PairKey::new("q", "a")].into();
        assert_eq!(generate_tensor(&fm, &bad, None).unwrap_err(), Error::UnknownContext("q".into()));
    }

    #[test]
    fn instance_preconditions() {
        let sizes = InstanceSizes { num_contexts: 5, num_actions: 3, p: 6, r: 3 };
        assert!(matches!(random_identifiable_instance(sizes, 0.7, 1), Err(Error::InvalidParameter(_))));
        let sizes = InstanceSizes { num_contexts: 5, num_actions: 8, p: 6, r: 2 };
        assert!(random_identifiable_instance(sizes, 0.0, 1).is_err());
        assert_eq!(
            random_identifiable_instance(sizes, 0.7, 1).unwrap(),
            random_identifiable_instance(sizes, 0.7, 1).unwrap()
        );
        let tiny = InstanceSizes { num_contexts: 1, num_actions: 3, p: 2, r: 1 };
        assert!(violating_instance(Violation::Assumption3, tiny, 0).is_err());
    }
}
