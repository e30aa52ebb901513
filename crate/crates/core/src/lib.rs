//! Synthetic-interventions imputation for sparse context x action outcome
//! tensors.
//!
//! Observations `x^{ca}` are `p`-vectors indexed by a context `c` and an
//! action `a`; only a subset of pairs is measured. The library imputes the
//! rest by regressing across actions ([`estimators::si_a`]) or contexts
//! ([`estimators::si_c`]), checks when that regression is trustworthy
//! ([`diagnostics`]), compares against simple baselines, and ships a linear
//! structural-equation simulator ([`scm_sim`]) whose instances are exactly
//! recoverable.
//!
//! ```
//! use si_impute::scm_sim::{random_identifiable_instance, InstanceSizes};
//! use si_impute::estimators::{si_a, EstimatorConfig};
//!
//! let sizes = InstanceSizes { num_contexts: 5, num_actions: 8, p: 6, r: 2 };
//! let instance = random_identifiable_instance(sizes, 0.7, 1).unwrap();
//! let data = instance.generate(None).unwrap();
//! let target = &instance.targets[0];
//! let report = si_a(&data.observed, &target.context, &target.action, &EstimatorConfig::default(), None).unwrap();
//! let truth = data.truth.get(&target.context, &target.action).unwrap();
//! for (p, t) in report.prediction.iter().zip(truth) {
//!     assert!((p - t).abs() <= 1e-8 * t.abs().max(1.0));
//! }
//! ```

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod io;
pub mod linalg;
pub mod scm_sim;
mod serde_mat;
pub mod tensor_store;

pub use error::{Error, Result};
pub use tensor_store::{ObservationTensor, PairKey, PairSet};
