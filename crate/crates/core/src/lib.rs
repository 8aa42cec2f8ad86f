//! Sequences of dependent categorical random variables.
//!
//! Each position `n ≥ 2` of a sequence depends directly on one earlier
//! position `α(n)` chosen by a [`GeneratorSpec`]. Given the parent's outcome
//! `i`, the child repeats `i` with probability `p_i + δ(1 − p_i)` and takes any
//! other category `j` with probability `p_j(1 − δ)`. Every such sequence is
//! identically distributed with marginal `p`, and the cross-covariance between
//! two positions is `δ^d (diag(p) − p pᵀ)`.
//!
//! ```
//! use catdep::{DependencyCoefficient, GeneratorSpec, Marginal, SequenceModel};
//!
//! let p = Marginal::new(vec![0.5, 0.3, 0.2]).unwrap();
//! let delta = DependencyCoefficient::new(0.4).unwrap();
//! let model = SequenceModel::new(p, delta, GeneratorSpec::Sequential);
//!
//! let exact = model.cross_covariance_enumerated(2, 3).unwrap();
//! let closed = model.cross_covariance_closed_form(2, 3).unwrap();
//! assert!(exact.max_abs_diff(&closed) < 1e-12);
//! ```

pub mod error;
pub mod exact;
pub mod generators;
pub mod graph;
pub mod kernel;
pub mod primes;
pub mod sampler;

pub use error::{Error, Result};
pub use exact::{
    enumerate_outcomes, theta_probability, theta_probability_enumerated, CrossCovariance, ExponentBasis,
    JointProbability, JointRoute, Method, Outcome, PositionMarginal, SequenceModel, DEFAULT_ENUMERATION_CAP,
    EXACT_TOLERANCE,
};
pub use generators::{prime_partition, GeneratorSpec, ValidationReport, Violation};
pub use graph::{build_tree, DependencyTree};
pub use kernel::{p_minus, p_plus, transition_kernel, DependencyCoefficient, Marginal, TransitionKernel};
pub use sampler::{sample_sequence, sequence_rng, BatchMetadata, SampleBatch, Sampler, RNG_ALGORITHM};
