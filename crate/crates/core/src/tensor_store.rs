//! Sparse storage for the observed slice of a context x action x feature tensor.
//!
//! Every matrix the estimators build is stacked from this store, so all
//! orderings are canonical: identifiers sort lexicographically and stacked
//! rows/columns follow that order.

use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Key of one (context, action) cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairKey {
    pub context: String,
    pub action: String,
}

impl PairKey {
    pub fn new(context: impl Into<String>, action: impl Into<String>) -> Self {
        Self { context: context.into(), action: action.into() }
    }
}

impl std::fmt::Display for PairKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.context, self.action)
    }
}

/// A set of (context, action) keys, e.g. a sparsity pattern.
pub type PairSet = BTreeSet<PairKey>;

/// The observed subset of the outcome tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTensor {
    p: usize,
    contexts: BTreeSet<String>,
    actions: BTreeSet<String>,
    entries: BTreeMap<PairKey, Vec<f64>>,
}

impl ObservationTensor {
    /// Empty tensor with outcome dimension `p`.
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("outcome dimension p must be positive".into()));
        }
        Ok(Self {
            p,
            contexts: BTreeSet::new(),
            actions: BTreeSet::new(),
            entries: BTreeMap::new(),
        })
    }

    /// Empty tensor with the given identifiers registered up front.
    pub fn with_ids<C, A>(p: usize, contexts: C, actions: A) -> Result<Self>
    where
        C: IntoIterator,
        C::Item: Into<String>,
        A: IntoIterator,
        A::Item: Into<String>,
    {
        let mut t = Self::new(p)?;
        t.contexts.extend(contexts.into_iter().map(Into::into));
        t.actions.extend(actions.into_iter().map(Into::into));
        Ok(t)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn contexts(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.contexts.iter().map(String::as_str)
    }

    pub fn actions(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.actions.iter().map(String::as_str)
    }

    pub fn num_contexts(&self) -> usize {
        self.contexts.len()
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn register_context(&mut self, context: impl Into<String>) {
        self.contexts.insert(context.into());
    }

    pub fn register_action(&mut self, action: impl Into<String>) {
        self.actions.insert(action.into());
    }

    /// Adds an observation, registering its identifiers if needed.
    ///
    /// Overwriting an existing entry is rejected; replicate averaging belongs
    /// to ingestion.
    pub fn insert(
        &mut self,
        context: impl Into<String>,
        action: impl Into<String>,
        outcome: Vec<f64>,
    ) -> Result<()> {
        if outcome.len() != self.p {
            return Err(Error::LengthMismatch { expected: self.p, actual: outcome.len() });
        }
        if let Some(index) = outcome.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let key = PairKey::new(context, action);
        if self.entries.contains_key(&key) {
            return Err(Error::DuplicateEntry { context: key.context, action: key.action });
        }
        self.contexts.insert(key.context.clone());
        self.actions.insert(key.action.clone());
        self.entries.insert(key, outcome);
        Ok(())
    }

    /// Removes and returns an entry; identifiers stay registered.
    pub fn remove(&mut self, context: &str, action: &str) -> Option<Vec<f64>> {
        self.entries.remove(&PairKey::new(context, action))
    }

    pub fn get(&self, context: &str, action: &str) -> Option<&[f64]> {
        self.entries.get(&PairKey::new(context, action)).map(Vec::as_slice)
    }

    pub fn contains(&self, context: &str, action: &str) -> bool {
        self.entries.contains_key(&PairKey::new(context, action))
    }

    pub fn has_context(&self, context: &str) -> bool {
        self.contexts.contains(context)
    }

    pub fn has_action(&self, action: &str) -> bool {
        self.actions.contains(action)
    }

    /// Observed entries in canonical (context, action) order.
    pub fn entries(&self) -> impl Iterator<Item = (&PairKey, &[f64])> + '_ {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// The observed pair set.
    pub fn observed_pairs(&self) -> PairSet {
        self.entries.keys().cloned().collect()
    }

    /// Registered pairs without an observation, in canonical order.
    pub fn missing_pairs(&self) -> Vec<PairKey> {
        let mut out = Vec::new();
        for c in &self.contexts {
            for a in &self.actions {
                let key = PairKey::new(c.clone(), a.clone());
                if !self.entries.contains_key(&key) {
                    out.push(key);
                }
            }
        }
        out
    }

    /// The tensor with `(context, action)` masked out; borrows when the pair
    /// is not observed.
    pub fn without(&self, context: &str, action: &str) -> Cow<'_, ObservationTensor> {
        if self.contains(context, action) {
            let mut masked = self.clone();
            masked.remove(context, action);
            Cow::Owned(masked)
        } else {
            Cow::Borrowed(self)
        }
    }

    /// Swaps the roles of contexts and actions.
    pub fn transposed(&self) -> ObservationTensor {
        ObservationTensor {
            p: self.p,
            contexts: self.actions.clone(),
            actions: self.contexts.clone(),
            entries: self
                .entries
                .iter()
                .map(|(k, v)| (PairKey::new(k.action.clone(), k.context.clone()), v.clone()))
                .collect(),
        }
    }

    fn check_context(&self, context: &str) -> Result<()> {
        if self.contexts.contains(context) {
            Ok(())
        } else {
            Err(Error::UnknownContext(context.to_string()))
        }
    }

    fn check_action(&self, action: &str) -> Result<()> {
        if self.actions.contains(action) {
            Ok(())
        } else {
            Err(Error::UnknownAction(action.to_string()))
        }
    }

    /// A(c): actions observed for `context`.
    pub fn actions_of(&self, context: &str) -> Result<Vec<String>> {
        self.check_context(context)?;
        Ok(self
            .actions
            .iter()
            .filter(|a| self.contains(context, a))
            .cloned()
            .collect())
    }

    /// C(a): contexts observed under `action`.
    pub fn contexts_of(&self, action: &str) -> Result<Vec<String>> {
        self.check_action(action)?;
        Ok(self
            .contexts
            .iter()
            .filter(|c| self.contains(c, action))
            .cloned()
            .collect())
    }

    /// C(S): contexts observed under every action in `actions`.
    pub fn contexts_of_all<S: AsRef<str>>(&self, actions: &[S]) -> Result<Vec<String>> {
        if actions.is_empty() {
            return Err(Error::EmptySet);
        }
        for a in actions {
            self.check_action(a.as_ref())?;
        }
        Ok(self
            .contexts
            .iter()
            .filter(|c| actions.iter().all(|a| self.contains(c, a.as_ref())))
            .cloned()
            .collect())
    }

    /// A(S): actions observed for every context in `contexts`.
    pub fn actions_of_all<S: AsRef<str>>(&self, contexts: &[S]) -> Result<Vec<String>> {
        if contexts.is_empty() {
            return Err(Error::EmptySet);
        }
        for c in contexts {
            self.check_context(c.as_ref())?;
        }
        Ok(self
            .actions
            .iter()
            .filter(|a| contexts.iter().all(|c| self.contains(c.as_ref(), a)))
            .cloned()
            .collect())
    }

    /// Stacks outcome vectors into a `(p * |training_contexts|) x |donor_actions|`
    /// matrix. Column `j` concatenates `x^{i, donor_j}` over the training
    /// contexts, in the order given.
    pub fn stack_training<S: AsRef<str>, T: AsRef<str>>(
        &self,
        training_contexts: &[S],
        donor_actions: &[T],
    ) -> Result<DMatrix<f64>> {
        self.stack_with(training_contexts, donor_actions, false)
    }

    /// Mirror of [`stack_training`](Self::stack_training) for context donors:
    /// column `j` concatenates `x^{donor_j, i}` over the training actions.
    pub fn stack_training_by_context<S: AsRef<str>, T: AsRef<str>>(
        &self,
        training_actions: &[S],
        donor_contexts: &[T],
    ) -> Result<DMatrix<f64>> {
        self.stack_with(training_actions, donor_contexts, true)
    }

    fn stack_with<S: AsRef<str>, T: AsRef<str>>(
        &self,
        blocks: &[S],
        columns: &[T],
        swap: bool,
    ) -> Result<DMatrix<f64>> {
        let p = self.p;
        let mut m = DMatrix::zeros(p * blocks.len(), columns.len());
        for (j, col) in columns.iter().enumerate() {
            for (b, block) in blocks.iter().enumerate() {
                let (c, a) = if swap { (col.as_ref(), block.as_ref()) } else { (block.as_ref(), col.as_ref()) };
                let x = self.get(c, a).ok_or_else(|| Error::MissingPair {
                    context: c.to_string(),
                    action: a.to_string(),
                })?;
                for (k, v) in x.iter().enumerate() {
                    m[(b * p + k, j)] = *v;
                }
            }
        }
        Ok(m)
    }
}
