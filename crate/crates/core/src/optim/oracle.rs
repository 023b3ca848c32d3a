use serde::{Deserialize, Serialize};

use super::{Problem, SampleSchedule};
use crate::error::Result;
use crate::ising::IsingParams;
use crate::samplers::{random_direction, Sampler};
use crate::seed;

/// A gradient of the smooth part `L`, possibly carrying an error `ξ`.
#[derive(Clone, Debug)]
pub struct OracleGradient {
    pub grad: IsingParams,
    /// `‖ξ‖₂` when the oracle knows it.
    pub xi_norm: Option<f64>,
    /// Samples spent (`2^N` for exact enumeration).
    pub samples: usize,
}

pub trait GradientOracle {
    fn gradient(&mut self, problem: &Problem, theta: &IsingParams, k: usize) -> Result<OracleGradient>;
}

/// Exact gradient by enumeration.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactOracle;

impl GradientOracle for ExactOracle {
    fn gradient(&mut self, problem: &Problem, theta: &IsingParams, _k: usize) -> Result<OracleGradient> {
        Ok(OracleGradient {
            grad: problem.gradient(theta)?,
            xi_norm: Some(0.0),
            samples: 1 << problem.n(),
        })
    }
}

/// Sampled gradient `estimate − (Σ̂, μ̂)` with `S_k` samples at iteration `k`.
pub struct SamplerOracle<'a> {
    pub sampler: &'a dyn Sampler,
    pub schedule: SampleSchedule,
    pub seed: u64,
    /// Measure `‖ξ‖₂` against exact moments (one enumeration per iteration).
    pub track_error: bool,
}

impl GradientOracle for SamplerOracle<'_> {
    fn gradient(&mut self, problem: &Problem, theta: &IsingParams, k: usize) -> Result<OracleGradient> {
        let s = self.schedule.eval(k);
        let est = self.sampler.estimate(theta, s, seed::derive(self.seed, &[k as u64]))?;
        let xi_norm = if self.track_error {
            let exact = problem.enumerator.moments(theta)?;
            Some(est.error_against(&exact).norm2())
        } else {
            None
        };
        let mut grad = est.into_params();
        grad.axpy(-1.0, &problem.emp.as_params());
        Ok(OracleGradient {
            grad,
            xi_norm,
            samples: s,
        })
    }
}

/// Deterministic errors of prescribed magnitude `‖ξ^(k)‖₂ = c / k^a`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorInjector {
    pub c: f64,
    pub a: f64,
    pub seed: u64,
}

impl ErrorInjector {
    pub fn magnitude(&self, k: usize) -> f64 {
        self.c / (k as f64).powf(self.a)
    }

    /// A structured random direction seeded by `seed ^ k`, scaled to `c / k^a`.
    pub fn inject(&self, k: usize, n: usize) -> IsingParams {
        let magnitude = self.magnitude(k);
        if magnitude == 0.0 {
            return IsingParams::zeros(n);
        }
        let mut rng = seed::rng(self.seed ^ k as u64);
        let mut xi = random_direction(n, &mut rng);
        xi.scale(magnitude);
        xi
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ErrorSource {
    #[default]
    None,
    Injected(ErrorInjector),
}

impl ErrorSource {
    pub(crate) fn apply(&self, k: usize, mut g: OracleGradient) -> OracleGradient {
        if let ErrorSource::Injected(inj) = self {
            let xi = inj.inject(k, g.grad.n());
            g.grad.axpy(1.0, &xi);
            // Only an error-free oracle leaves the total error norm known exactly.
            g.xi_norm = match g.xi_norm {
                Some(0.0) => Some(inj.magnitude(k)),
                _ => None,
            };
        }
        g
    }
}
