//! Biased stochastic estimators of `∂ log Z / ∂θ = (E[xxᵀ], E[x])`.
//!
//! Every estimator clips its output to `[-1, +1]` entrywise, so the error
//! `ξ = estimate − exact` always satisfies `‖ξ‖₂ ≤ 2√d`.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::ising::{energy, moments_from_probabilities, Enumerator, IsingParams, Moments};
use crate::seed::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    Gibbs,
    Importance,
    Exact,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplerKind::Gibbs => write!(f, "gibbs"),
            SamplerKind::Importance => write!(f, "importance"),
            SamplerKind::Exact => write!(f, "exact"),
        }
    }
}

/// An estimate of the log-partition gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    moments: IsingParams,
    pub sampler_kind: SamplerKind,
    pub s_used: usize,
}

impl GradientEstimate {
    /// `moments` holds the second-moment estimate in the `W` slot (diagonal
    /// masked) and the first-moment estimate in the `b` slot.
    pub fn new(moments: IsingParams, sampler_kind: SamplerKind, s_used: usize) -> Self {
        GradientEstimate {
            moments,
            sampler_kind,
            s_used,
        }
    }

    pub fn w_part(&self) -> &[f64] {
        self.moments.w()
    }

    pub fn b_part(&self) -> &[f64] {
        self.moments.b()
    }

    pub fn as_params(&self) -> &IsingParams {
        &self.moments
    }

    pub fn into_params(self) -> IsingParams {
        self.moments
    }

    /// Entrywise clamp to `[-1, +1]`.
    pub fn clip(mut self) -> Self {
        self.moments
            .w_mut()
            .iter_mut()
            .for_each(|v| *v = v.clamp(-1.0, 1.0));
        self.moments
            .b_mut()
            .iter_mut()
            .for_each(|v| *v = v.clamp(-1.0, 1.0));
        self
    }

    /// `ξ = estimate − exact`, with the `W` diagonal excluded.
    pub fn error_against(&self, exact: &Moments) -> IsingParams {
        let mut xi = self.moments.clone();
        xi.axpy(-1.0, &exact.to_params());
        xi
    }
}

pub trait Sampler: Sync {
    fn kind(&self) -> SamplerKind;

    /// Draws an estimate from `s` samples; identical inputs give identical output.
    fn estimate(&self, params: &IsingParams, s: usize, seed: u64) -> Result<GradientEstimate>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        MeanFieldConfig {
            tol: 1e-8,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanField {
    pub mu: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `max_i |tanh(b_i + 2Σ_j w_ij μ_j) − μ_i|` at the returned point.
    pub residual: f64,
}

fn mean_field_map(params: &IsingParams, mu: &[f64], out: &mut [f64]) {
    let n = params.n();
    let w = params.w();
    for (i, o) in out.iter_mut().enumerate() {
        let h: f64 = w[i * n..(i + 1) * n].iter().zip(mu).map(|(w, m)| w * m).sum();
        *o = (params.b()[i] + 2.0 * h).tanh();
    }
}

/// Naive mean-field marginals by damped fixed-point iteration from `μ = 0`.
///
/// Not converging within `max_iter` is reported through the flag, not as an error.
pub fn mean_field(params: &IsingParams, config: &MeanFieldConfig) -> Result<MeanField> {
    if !(config.tol > 0.0) {
        return Err(Error::invalid("mean-field tolerance must be positive"));
    }
    if !(config.damping > 0.0 && config.damping <= 1.0) {
        return Err(Error::invalid("mean-field damping must lie in (0, 1]"));
    }
    let n = params.n();
    let mut mu = vec![0.0; n];
    let mut next = vec![0.0; n];
    let residual_of = |mu: &[f64], next: &[f64]| {
        mu.iter()
            .zip(next)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    };
    mean_field_map(params, &mu, &mut next);
    let mut residual = residual_of(&mu, &next);
    let mut iterations = 0;
    while residual > config.tol && iterations < config.max_iter {
        for (m, t) in mu.iter_mut().zip(&next) {
            *m += config.damping * (t - *m);
        }
        iterations += 1;
        mean_field_map(params, &mu, &mut next);
        residual = residual_of(&mu, &next);
    }
    Ok(MeanField {
        mu,
        converged: residual <= config.tol,
        iterations,
        residual,
    })
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `P(x_i = +1 | x_{-i}) = logistic(2b_i + 4Σ_{j≠i} w_ij x_j)`.
pub fn gibbs_conditional(params: &IsingParams, x: &[f64], i: usize) -> f64 {
    let n = params.n();
    let h: f64 = params.w()[i * n..(i + 1) * n]
        .iter()
        .zip(x)
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, (w, xj))| w * xj)
        .sum();
    logistic(2.0 * params.b()[i] + 4.0 * h)
}

/// Independent Gibbs chains started from the mean-field product distribution,
/// each run for a fixed number of ascending-order sweeps; one sample per chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSampler {
    pub sweeps: usize,
    pub mean_field: MeanFieldConfig,
}

impl Default for GibbsSampler {
    fn default() -> Self {
        GibbsSampler {
            sweeps: 5,
            mean_field: MeanFieldConfig::default(),
        }
    }
}

impl Sampler for GibbsSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Gibbs
    }

    fn estimate(&self, params: &IsingParams, s: usize, seed: u64) -> Result<GradientEstimate> {
        if s == 0 || self.sweeps == 0 {
            return Err(Error::invalid("Gibbs estimation needs s ≥ 1 and sweeps ≥ 1"));
        }
        let n = params.n();
        let mf = mean_field(params, &self.mean_field)?;
        let init: Vec<f64> = mf.mu.iter().map(|m| (1.0 + m) / 2.0).collect();
        let mut rng = seed::rng(seed);
        let mut second = vec![0.0; n * n];
        let mut first = vec![0.0; n];
        let mut x = vec![0.0; n];
        for _ in 0..s {
            for (xi, p) in x.iter_mut().zip(&init) {
                *xi = if rng.random::<f64>() < *p { 1.0 } else { -1.0 };
            }
            for _ in 0..self.sweeps {
                for i in 0..n {
                    let p = gibbs_conditional(params, &x, i);
                    x[i] = if rng.random::<f64>() < p { 1.0 } else { -1.0 };
                }
            }
            accumulate(&x, 1.0, &mut second, &mut first);
        }
        let inv = 1.0 / s as f64;
        Ok(finish(n, second, first, inv, SamplerKind::Gibbs, s))
    }
}

fn accumulate(x: &[f64], weight: f64, second: &mut [f64], first: &mut [f64]) {
    let n = x.len();
    for i in 0..n {
        let wx = weight * x[i];
        first[i] += wx;
        for j in (i + 1)..n {
            second[i * n + j] += wx * x[j];
        }
    }
}

fn finish(
    n: usize,
    mut second: Vec<f64>,
    mut first: Vec<f64>,
    scale: f64,
    kind: SamplerKind,
    s: usize,
) -> GradientEstimate {
    first.iter_mut().for_each(|v| *v *= scale);
    for i in 0..n {
        second[i * n + i] = 0.0;
        for j in (i + 1)..n {
            let v = second[i * n + j] * scale;
            second[i * n + j] = v;
            second[j * n + i] = v;
        }
    }
    GradientEstimate::new(IsingParams::from_parts(n, second, first), kind, s).clip()
}

/// Trial distribution `q` for importance sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Trial {
    Uniform,
    /// Product of mean-field marginals, each spin-state probability floored.
    MeanField { floor: f64, config: MeanFieldConfig },
    /// Every state exactly once with `q = 2^-N`; `s` is ignored.
    Enumerate { cap: usize },
}

impl Default for Trial {
    fn default() -> Self {
        Trial::MeanField {
            floor: 0.01,
            config: MeanFieldConfig::default(),
        }
    }
}

/// Self-normalized importance sampling with weights `exp(energy(x)) / q(x)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSampler {
    pub trial: Trial,
}

impl ImportanceSampler {
    /// `P(x_i = +1)` under a product trial.
    fn marginals(&self, params: &IsingParams) -> Result<Vec<f64>> {
        let n = params.n();
        match &self.trial {
            Trial::Uniform => Ok(vec![0.5; n]),
            Trial::MeanField { floor, config } => {
                if !(*floor > 0.0 && *floor <= 0.5) {
                    return Err(Error::invalid("trial floor must lie in (0, 0.5]"));
                }
                let mf = mean_field(params, config)?;
                Ok(mf
                    .mu
                    .iter()
                    .map(|m| ((1.0 + m) / 2.0).clamp(*floor, 1.0 - floor))
                    .collect())
            }
            Trial::Enumerate { .. } => unreachable!("enumeration has no product marginals"),
        }
    }
}

impl Sampler for ImportanceSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Importance
    }

    fn estimate(&self, params: &IsingParams, s: usize, seed: u64) -> Result<GradientEstimate> {
        let n = params.n();
        if let Trial::Enumerate { cap } = self.trial {
            let energies = Enumerator::with_cap(cap).energies(params)?;
            // log α = E(x) − log q(x), and q is constant, so it cancels on normalization.
            let weights = normalized_weights(&energies)?;
            let m = moments_from_probabilities(n, &weights);
            let est = GradientEstimate::new(m.to_params(), SamplerKind::Importance, energies.len());
            return Ok(est.clip());
        }
        if s == 0 {
            return Err(Error::invalid("importance estimation needs s ≥ 1"));
        }
        let marg = self.marginals(params)?;
        let mut rng = seed::rng(seed);
        let mut states = Vec::with_capacity(s * n);
        let mut log_alpha = Vec::with_capacity(s);
        let mut x = vec![0.0; n];
        for _ in 0..s {
            let mut log_q = 0.0;
            for (xi, p) in x.iter_mut().zip(&marg) {
                if rng.random::<f64>() < *p {
                    *xi = 1.0;
                    log_q += p.ln();
                } else {
                    *xi = -1.0;
                    log_q += (1.0 - p).ln();
                }
            }
            log_alpha.push(energy(params, &x)? - log_q);
            states.extend_from_slice(&x);
        }
        let weights = normalized_weights(&log_alpha)?;
        let mut second = vec![0.0; n * n];
        let mut first = vec![0.0; n];
        for (x, w) in states.chunks_exact(n).zip(&weights) {
            accumulate(x, *w, &mut second, &mut first);
        }
        Ok(finish(n, second, first, 1.0, SamplerKind::Importance, s))
    }
}

fn normalized_weights(log_alpha: &[f64]) -> Result<Vec<f64>> {
    let max = log_alpha.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut w: Vec<f64> = log_alpha.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Returns the exact log-partition gradient; its error is identically zero.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExactSampler {
    pub enumerator: Enumerator,
}

impl Sampler for ExactSampler {
    fn kind(&self) -> SamplerKind {
        SamplerKind::Exact
    }

    fn estimate(&self, params: &IsingParams, _s: usize, _seed: u64) -> Result<GradientEstimate> {
        let m = self.enumerator.moments(params)?;
        Ok(GradientEstimate::new(m.to_params(), SamplerKind::Exact, 1 << params.n()))
    }
}

/// Error norms drawn with a prescribed bias and variance profile:
/// `‖ξ‖₂ ~ min(Gamma(mean = B/S, var = V/S), 2√M)`.
///
/// Clipping at the cap only lowers the mean and (being 1-Lipschitz) cannot
/// raise the variance, so the draws satisfy `E‖ξ‖ ≤ B/S` and `Var‖ξ‖ ≤ V/S`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticErrors {
    pub bias: f64,
    pub variance: f64,
    pub dimension: usize,
}

impl SyntheticErrors {
    pub fn cap(&self) -> f64 {
        2.0 * (self.dimension as f64).sqrt()
    }

    pub fn draw_norm(&self, s: usize, rng: &mut Rng) -> f64 {
        let s = s.max(1) as f64;
        let mean = self.bias / s;
        let var = self.variance / s;
        let raw = if mean <= 0.0 {
            0.0
        } else if var <= 0.0 {
            mean
        } else {
            let shape = mean * mean / var;
            let scale = var / mean;
            Gamma::new(shape, scale).expect("positive gamma parameters").sample(rng)
        };
        raw.min(self.cap())
    }

    /// A θ-shaped error with norm drawn by [`SyntheticErrors::draw_norm`] and a
    /// uniformly random structured direction.
    pub fn draw(&self, n: usize, s: usize, rng: &mut Rng) -> IsingParams {
        let norm = self.draw_norm(s, rng);
        let mut xi = random_direction(n, rng);
        xi.scale(norm);
        xi
    }
}

/// A unit vector in θ-space, uniformly distributed over directions that keep
/// `W` symmetric with zero diagonal.
pub fn random_direction(n: usize, rng: &mut Rng) -> IsingParams {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.sample(StandardNormal);
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    let b = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut dir = IsingParams::from_parts(n, w, b);
    let norm = dir.norm2();
    if norm > 0.0 {
        dir.scale(1.0 / norm);
    }
    dir
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceRow {
    #[serde(rename = "S")]
    pub s: usize,
    pub mean_err: f64,
    pub var_err: f64,
}

/// Empirical `‖ξ‖₂` statistics over a grid of sample counts, with fitted
/// constants of the `B/S`, `V/S` profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceReport {
    pub sampler: SamplerKind,
    pub reps: usize,
    pub rows: Vec<BiasVarianceRow>,
    pub b_hat: f64,
    pub v_hat: f64,
    /// Whether the smallest S was left out of the fit.
    pub dropped_smallest: bool,
    /// Least-squares slope of `−log(mean_err)` against `log S`; 1 for a
    /// `1/S` bias law, 1/2 for Monte-Carlo fluctuation.
    pub decay_exponent: f64,
}

#[derive(Serialize)]
struct ReportSidecar {
    sampler: SamplerKind,
    reps: usize,
    b_hat: f64,
    v_hat: f64,
    dropped_smallest: bool,
    decay_exponent: f64,
    s_grid: Vec<usize>,
}

impl BiasVarianceReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// JSON sidecar with the fitted constants.
    pub fn sidecar_json(&self) -> Result<String> {
        let sidecar = ReportSidecar {
            sampler: self.sampler,
            reps: self.reps,
            b_hat: self.b_hat,
            v_hat: self.v_hat,
            dropped_smallest: self.dropped_smallest,
            decay_exponent: self.decay_exponent,
            s_grid: self.rows.iter().map(|r| r.s).collect(),
        };
        Ok(serde_json::to_string_pretty(&sidecar)?)
    }
}

/// Least squares through the origin: `argmin_c Σ (y − c x)²`.
fn fit_through_origin(xs: &[f64], ys: &[f64]) -> f64 {
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

fn log_log_slope(s: &[f64], m: &[f64]) -> f64 {
    if m.iter().any(|&v| !(v > 0.0)) || s.len() < 2 {
        return f64::NAN;
    }
    let xs: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = m.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -sxy / sxx
}

/// Measures `E‖ξ‖₂` and `Var‖ξ‖₂` of `sampler` at `params` for every S in
/// `s_grid`, against exact moments from enumeration.
pub fn measure_bias_variance(
    sampler: &dyn Sampler,
    params: &IsingParams,
    s_grid: &[usize],
    reps: usize,
    seed: u64,
    enumerator: &Enumerator,
) -> Result<BiasVarianceReport> {
    if reps < 30 {
        return Err(Error::invalid(format!("need at least 30 repetitions, got {reps}")));
    }
    if s_grid.is_empty() || s_grid.contains(&0) {
        return Err(Error::invalid("sample grid must be non-empty with S ≥ 1"));
    }
    let exact = enumerator.moments(params)?;
    let mut grid = s_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();

    let mut rows = Vec::with_capacity(grid.len());
    for &s in &grid {
        let errs = (0..reps)
            .map(|rep| {
                let est = sampler.estimate(params, s, seed::derive(seed, &[s as u64, rep as u64]))?;
                Ok(est.error_against(&exact).norm2())
            })
            .collect::<Result<Vec<f64>>>()?;
        let mean = errs.iter().sum::<f64>() / reps as f64;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        rows.push(BiasVarianceRow {
            s,
            mean_err: mean,
            var_err: var,
        });
    }

    let cap = 2.0 * (params.dim() as f64).sqrt();
    let dropped_smallest = rows.len() > 1 && rows[0].mean_err > 0.9 * cap;
    let fit_rows = if dropped_smallest { &rows[1..] } else { &rows[..] };
    let inv_s: Vec<f64> = fit_rows.iter().map(|r| 1.0 / r.s as f64).collect();
    let means: Vec<f64> = fit_rows.iter().map(|r| r.mean_err).collect();
    let vars: Vec<f64> = fit_rows.iter().map(|r| r.var_err).collect();
    let s_all: Vec<f64> = rows.iter().map(|r| r.s as f64).collect();
    let m_all: Vec<f64> = rows.iter().map(|r| r.mean_err).collect();

    Ok(BiasVarianceReport {
        sampler: sampler.kind(),
        reps,
        b_hat: fit_through_origin(&inv_s, &means),
        v_hat: fit_through_origin(&inv_s, &vars),
        dropped_smallest,
        decay_exponent: log_log_slope(&s_all, &m_all),
        rows,
    })
}
