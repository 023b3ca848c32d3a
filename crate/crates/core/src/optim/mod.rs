//! Forward-backward splitting and proximal-gradient engines for
//! `min_θ L(θ) + ρ‖W‖₁`, driven by exact, error-injected or sampled gradients.

mod oracle;
mod prox;
mod reference;
mod run;
mod trace;

pub use oracle::{ErrorInjector, ErrorSource, ExactOracle, GradientOracle, OracleGradient, SamplerOracle};
pub use prox::{prox_l1, soft_threshold};
pub use reference::{solve_reference, stationarity_residual, ReferenceConfig, ReferenceSolution};
pub use run::{fbs_run, pg_accel_run, pg_basic_run, run};
pub use trace::{Boundedness, FinalOutputs, OutputPoint, RunTrace, TraceMode, TraceRow};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ising::{EmpiricalMoments, Enumerator, IsingParams, ModelConstants, lipschitz_bound};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fbs,
    PgBasic,
    PgAccelerated,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Fbs => "fbs",
            Method::PgBasic => "pg-basic",
            Method::PgAccelerated => "pg-accelerated",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fbs" => Ok(Method::Fbs),
            "pg-basic" => Ok(Method::PgBasic),
            "pg-accelerated" => Ok(Method::PgAccelerated),
            _ => Err(Error::invalid(format!("unknown method {s:?}"))),
        }
    }
}

/// Which output of a run is reported as its result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Step-size weighted average of visited points.
    #[default]
    Robust,
    /// Plain average of visited points.
    Basic,
    /// A visited point drawn uniformly at random.
    Random,
    /// The final iterate.
    Last,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Step exponent: `η_k = β / (G k^r)`.
    pub r: f64,
    pub beta: f64,
    pub k_max: usize,
    pub rho: f64,
    #[serde(default)]
    pub averaging: Averaging,
    pub seed: u64,
    #[serde(default)]
    pub trace_mode: TraceMode,
    /// Halve the step until the quadratic upper bound holds (PG methods only).
    #[serde(default)]
    pub backtracking: bool,
    /// Key for progress events when several runs report to one sink.
    #[serde(default)]
    pub run_id: u64,
}

impl OptimizerConfig {
    pub fn fbs(rho: f64, k_max: usize) -> Self {
        OptimizerConfig {
            method: Method::Fbs,
            r: 0.5,
            beta: 1.0,
            k_max,
            rho,
            averaging: Averaging::Robust,
            seed: 0,
            trace_mode: TraceMode::Lean,
            backtracking: false,
            run_id: 0,
        }
    }

    pub fn pg(method: Method, rho: f64, k_max: usize) -> Self {
        OptimizerConfig {
            method,
            r: 0.0,
            averaging: Averaging::Last,
            ..OptimizerConfig::fbs(rho, k_max)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_max == 0 {
            return Err(Error::invalid("iteration budget must be at least 1"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        if !(self.rho > 0.0) {
            return Err(Error::invalid("rho must be positive"));
        }
        match self.method {
            Method::Fbs if !(self.r > 0.0 && self.r < 1.0) => {
                Err(Error::invalid(format!("fbs needs 0 < r < 1, got {}", self.r)))
            }
            Method::PgBasic | Method::PgAccelerated if self.r != 0.0 => {
                Err(Error::invalid(format!("{} uses a constant step (r = 0), got r = {}", self.method, self.r)))
            }
            _ => Ok(()),
        }
    }
}

/// `η_k = β / (G k^r)`.
pub fn step_size(k: usize, beta: f64, g: f64, r: f64) -> f64 {
    debug_assert!(k >= 1);
    beta / (g * (k as f64).powf(r))
}

/// Number of samples `S_k` drawn at iteration `k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SampleSchedule {
    /// `S_k = ⌈c⌉`.
    Constant { c: f64 },
    /// `S_k = ⌈c log(k + 1)⌉`.
    Logarithmic { c: f64 },
    /// `S_k = ⌈c k^p⌉`.
    Polynomial { c: f64, p: f64 },
}

impl SampleSchedule {
    pub fn eval(&self, k: usize) -> usize {
        let k = k.max(1) as f64;
        let raw = match *self {
            SampleSchedule::Constant { c } => c,
            SampleSchedule::Logarithmic { c } => c * (k + 1.0).ln(),
            SampleSchedule::Polynomial { c, p } => c * k.powf(p),
        };
        // Guard against 8.000000000000002 style round-up.
        let snapped = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw.ceil() };
        (snapped as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let c = match *self {
            SampleSchedule::Constant { c } | SampleSchedule::Logarithmic { c } | SampleSchedule::Polynomial { c, .. } => c,
        };
        if !(c >= 1.0) {
            return Err(Error::invalid(format!("schedule scale must be ≥ 1, got {c}")));
        }
        if let SampleSchedule::Polynomial { p, .. } = *self {
            if !(p >= 0.0) {
                return Err(Error::invalid("polynomial schedule exponent must be ≥ 0"));
            }
        }
        Ok(())
    }

    /// Short identifier such as `const-10`, `log-10` or `poly-1-0.51`.
    pub fn label(&self) -> String {
        match *self {
            SampleSchedule::Constant { c } => format!("const-{c}"),
            SampleSchedule::Logarithmic { c } => format!("log-{c}"),
            SampleSchedule::Polynomial { c, p } => format!("poly-{c}-{p}"),
        }
    }
}

impl FromStr for SampleSchedule {
    type Err = Error;

    /// Parses the [`SampleSchedule::label`] format.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse schedule {s:?}"));
        let parts: Vec<&str> = s.split('-').collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| bad());
        let sched = match parts.as_slice() {
            ["const", c] => SampleSchedule::Constant { c: num(c)? },
            ["log", c] => SampleSchedule::Logarithmic { c: num(c)? },
            ["poly", c, p] => SampleSchedule::Polynomial { c: num(c)?, p: num(p)? },
            _ => return Err(bad()),
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// The learning problem: data moments, regularization weight, and the exact
/// oracle used to evaluate objectives.
#[derive(Clone, Debug)]
pub struct Problem {
    pub emp: EmpiricalMoments,
    pub rho: f64,
    pub enumerator: Enumerator,
    /// Lipschitz constant `G`.
    pub g: f64,
    /// Solution radius `D`; absent when some variable is constant in the data.
    pub d: Option<f64>,
    /// High-precision optimum, when known; enables the boundedness check.
    pub reference: Option<IsingParams>,
}

impl Problem {
    pub fn new(emp: EmpiricalMoments, rho: f64) -> Result<Self> {
        let n = emp.n();
        let g = lipschitz_bound(n, rho, emp.sigma_inf(), emp.mu_inf())?;
        let d = ModelConstants::new(&emp, rho).ok().map(|c| c.d_bound);
        Ok(Problem {
            emp,
            rho,
            enumerator: Enumerator::default(),
            g,
            d,
            reference: None,
        })
    }

    pub fn with_reference(mut self, reference: IsingParams) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn n(&self) -> usize {
        self.emp.n()
    }

    pub fn objective(&self, theta: &IsingParams) -> Result<f64> {
        self.enumerator.objective(theta, &self.emp, self.rho)
    }

    pub fn smooth(&self, theta: &IsingParams) -> Result<f64> {
        self.enumerator.neg_log_likelihood(theta, &self.emp)
    }

    pub fn gradient(&self, theta: &IsingParams) -> Result<IsingParams> {
        self.enumerator.gradient(theta, &self.emp)
    }
}

/// Receives per-iteration progress from concurrently executing runs.
pub trait ProgressSink: Sync {
    fn iteration(&self, _run_id: u64, _k: usize, _objective: f64) {}
    fn finished(&self, _run_id: u64, _iterations: usize) {}
}

pub struct NoProgress;

impl ProgressSink for NoProgress {}
