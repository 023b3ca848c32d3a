//! Sparse Ising model structure learning by regularized maximum likelihood.
//!
//! The objective `log Z(W,b) − ⟨Σ̂,W⟩ − μ̂ᵀb + ρ‖W‖₁` is minimized with
//! forward-backward splitting or proximal gradient methods. Gradients come
//! from exact enumeration, Gibbs sampling or importance sampling, and the
//! [`analysis`] module evaluates the matching convergence bounds.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod ising;
pub mod optim;
pub mod samplers;
pub mod seed;

pub use error::{Error, Result};
pub use ising::{Dataset, EmpiricalMoments, Enumerator, IsingParams, ModelConstants, Moments};
pub use optim::{OptimizerConfig, Problem, RunTrace, SampleSchedule};
pub use samplers::{GibbsSampler, ImportanceSampler, Sampler, SamplerKind};
