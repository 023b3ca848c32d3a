//! Exact Ising-model computations by enumeration over all `2^N` spin states.
//!
//! The model is `p(x) ∝ exp(xᵀWx + bᵀx)` over `x ∈ {-1,+1}^N`, with `W`
//! symmetric and zero on the diagonal. The full `N×N` matrix is stored, so
//! every pair interaction contributes twice to the energy and `‖W‖₁` counts
//! both symmetric halves.
//!
//! State `s ∈ [0, 2^N)` maps to spins by bit: `x_i = +1` iff bit `i` of `s`
//! is set.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// Parameters `θ = (W, b)` of an Ising model.
///
/// The same type doubles as a vector in θ-space (gradients, injected errors,
/// differences of iterates), flattened as all `N²` entries of `W` in row-major
/// order followed by `b`, for a dimension `d = N² + N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct IsingParams {
    n: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Deserialize)]
struct RawParams {
    n: usize,
    w: Vec<f64>,
    b: Vec<f64>,
}

impl TryFrom<RawParams> for IsingParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        IsingParams::new(raw.n, raw.w, raw.b)
    }
}

impl IsingParams {
    /// Validates shape, finiteness, exact symmetry and a zero diagonal.
    pub fn new(n: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("model needs at least one variable"));
        }
        if w.len() != n * n {
            return Err(Error::invalid(format!(
                "coupling matrix has {} entries, expected {}",
                w.len(),
                n * n
            )));
        }
        if b.len() != n {
            return Err(Error::invalid(format!(
                "field vector has {} entries, expected {n}",
                b.len()
            )));
        }
        if w.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::invalid("parameters must be finite"));
        }
        for i in 0..n {
            if w[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("w[{i}][{i}] must be zero")));
            }
            for j in (i + 1)..n {
                if w[i * n + j] != w[j * n + i] {
                    return Err(Error::invalid(format!("w is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(IsingParams { n, w, b })
    }

    pub fn zeros(n: usize) -> Self {
        IsingParams {
            n,
            w: vec![0.0; n * n],
            b: vec![0.0; n],
        }
    }

    /// Builds a model from upper-triangle couplings `(i, j, w_ij)`, mirrored.
    pub fn from_couplings(n: usize, couplings: &[(usize, usize, f64)], b: Vec<f64>) -> Result<Self> {
        let mut w = vec![0.0; n * n];
        for &(i, j, v) in couplings {
            if i >= n || j >= n || i == j {
                return Err(Error::invalid(format!("bad coupling index ({i}, {j})")));
            }
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
        IsingParams::new(n, w, b)
    }

    /// Skips validation; callers guarantee the structural invariants.
    pub(crate) fn from_parts(n: usize, w: Vec<f64>, b: Vec<f64>) -> Self {
        debug_assert_eq!(w.len(), n * n);
        debug_assert_eq!(b.len(), n);
        IsingParams { n, w, b }
    }

    pub fn from_flat(n: usize, theta: &[f64]) -> Result<Self> {
        if theta.len() != n * n + n {
            return Err(Error::invalid(format!(
                "flat vector has {} entries, expected {}",
                theta.len(),
                n * n + n
            )));
        }
        IsingParams::new(n, theta[..n * n].to_vec(), theta[n * n..].to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major `N×N` coupling matrix.
    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    /// `d = N² + N`.
    pub fn dim(&self) -> usize {
        self.n * self.n + self.n
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.w.iter().chain(&self.b).copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.w.iter().chain(&self.b).copied()
    }

    /// `Σ_ij |w_ij|`, both symmetric halves.
    pub fn l1_w(&self) -> f64 {
        self.w.iter().map(|v| v.abs()).sum()
    }

    pub fn l1_b(&self) -> f64 {
        self.b.iter().map(|v| v.abs()).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &IsingParams) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn distance(&self, other: &IsingParams) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &IsingParams) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.w.iter_mut().zip(&other.w) {
            *a += alpha * b;
        }
        for (a, b) in self.b.iter_mut().zip(&other.b) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.w.iter_mut().chain(self.b.iter_mut()).for_each(|v| *v *= alpha);
    }

    pub(crate) fn w_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub(crate) fn b_mut(&mut self) -> &mut [f64] {
        &mut self.b
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.n;
        (0..n).all(|i| ((i + 1)..n).all(|j| self.w[i * n + j] == self.w[j * n + i]))
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.w[i * self.n + i] == 0.0)
    }

    /// Number of nonzero upper-triangle couplings, i.e. edges of the graph.
    pub fn edge_count(&self) -> usize {
        let n = self.n;
        (0..n)
            .map(|i| ((i + 1)..n).filter(|&j| self.w[i * n + j] != 0.0).count())
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        IsingParams::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Spin value of variable `i` in state `s`.
#[inline]
pub fn spin(s: usize, i: usize) -> f64 {
    if (s >> i) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

pub fn state_spins(s: usize, n: usize) -> Vec<f64> {
    (0..n).map(|i| spin(s, i)).collect()
}

/// `xᵀWx + bᵀx`.
pub fn energy(params: &IsingParams, x: &[f64]) -> Result<f64> {
    let n = params.n;
    if x.len() != n {
        return Err(Error::invalid(format!(
            "spin vector has length {}, expected {n}",
            x.len()
        )));
    }
    if x.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("spins must be -1 or +1"));
    }
    Ok(energy_unchecked(params, x))
}

fn energy_unchecked(params: &IsingParams, x: &[f64]) -> f64 {
    let n = params.n;
    let mut e = 0.0;
    for i in 0..n {
        let row = &params.w[i * n..(i + 1) * n];
        let h: f64 = row.iter().zip(x).map(|(w, xj)| w * xj).sum();
        e += x[i] * (h + params.b[i]);
    }
    e
}

/// A T×N matrix of ±1 observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    samples: Vec<i8>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<i8>>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("dataset needs at least one sample"))?;
        let n = first.len();
        if n == 0 {
            return Err(Error::invalid("samples must have at least one variable"));
        }
        let mut samples = Vec::with_capacity(rows.len() * n);
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "sample {t} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|&&v| v != 1 && v != -1) {
                return Err(Error::invalid(format!("sample {t} contains {v}, expected ±1")));
            }
            samples.extend_from_slice(row);
        }
        Ok(Dataset { n, samples })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.samples.chunks_exact(self.n)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for row in self.rows() {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for record in input.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| {
                    f.parse::<i8>()
                        .map_err(|_| Error::invalid(format!("cannot parse spin {f:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Dataset::new(rows)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::read_csv(std::fs::File::open(path)?)
    }
}

/// Empirical moments `Σ̂ = (1/T)Σ x xᵀ − I` and `μ̂ = (1/T)Σ x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    n: usize,
    sigma_hat: Vec<f64>,
    mu_hat: Vec<f64>,
    sigma_inf: f64,
    mu_inf: f64,
}

impl EmpiricalMoments {
    pub fn from_dataset(data: &Dataset) -> Self {
        let n = data.n();
        let t = data.len() as f64;
        let mut sigma = vec![0.0; n * n];
        let mut mu = vec![0.0; n];
        for row in data.rows() {
            for i in 0..n {
                let xi = row[i] as f64;
                mu[i] += xi;
                for j in (i + 1)..n {
                    sigma[i * n + j] += xi * row[j] as f64;
                }
            }
        }
        for i in 0..n {
            mu[i] /= t;
            for j in (i + 1)..n {
                let v = sigma[i * n + j] / t;
                sigma[i * n + j] = v;
                sigma[j * n + i] = v;
            }
        }
        EmpiricalMoments::from_parts(n, sigma, mu)
    }

    /// Moments supplied directly; `sigma_hat` must be symmetric with zero diagonal.
    pub fn new(n: usize, sigma_hat: Vec<f64>, mu_hat: Vec<f64>) -> Result<Self> {
        // Same structural contract as a coupling matrix.
        IsingParams::new(n, sigma_hat.clone(), mu_hat.clone())?;
        Ok(EmpiricalMoments::from_parts(n, sigma_hat, mu_hat))
    }

    pub fn zeros(n: usize) -> Self {
        EmpiricalMoments::from_parts(n, vec![0.0; n * n], vec![0.0; n])
    }

    /// Self-consistent moments of a model: `Σ̂ = E[xxᵀ] − I`, `μ̂ = E[x]`.
    pub fn from_model(moments: &Moments) -> Self {
        let n = moments.n;
        let mut sigma = moments.second.clone();
        for i in 0..n {
            sigma[i * n + i] = 0.0;
        }
        EmpiricalMoments::from_parts(n, sigma, moments.first.clone())
    }

    fn from_parts(n: usize, sigma_hat: Vec<f64>, mu_hat: Vec<f64>) -> Self {
        let sigma_inf = sigma_hat.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mu_inf = mu_hat.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        EmpiricalMoments {
            n,
            sigma_hat,
            mu_hat,
            sigma_inf,
            mu_inf,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sigma_hat(&self) -> &[f64] {
        &self.sigma_hat
    }

    pub fn mu_hat(&self) -> &[f64] {
        &self.mu_hat
    }

    pub fn sigma_inf(&self) -> f64 {
        self.sigma_inf
    }

    pub fn mu_inf(&self) -> f64 {
        self.mu_inf
    }

    /// True when no variable is constant across the dataset (`‖μ̂‖∞ < 1`),
    /// which the solution bound requires.
    pub fn bounded_mean(&self) -> bool {
        self.mu_inf < 1.0
    }

    /// `⟨Σ̂, W⟩ + μ̂ᵀb`.
    pub fn inner(&self, params: &IsingParams) -> f64 {
        let w: f64 = self.sigma_hat.iter().zip(&params.w).map(|(s, w)| s * w).sum();
        let b: f64 = self.mu_hat.iter().zip(&params.b).map(|(m, b)| m * b).sum();
        w + b
    }

    /// The moments as a θ-shaped vector.
    pub fn as_params(&self) -> IsingParams {
        IsingParams::from_parts(self.n, self.sigma_hat.clone(), self.mu_hat.clone())
    }
}

/// Exact model moments `E[xxᵀ]` (unit diagonal) and `E[x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub second: Vec<f64>,
    pub first: Vec<f64>,
}

impl Moments {
    /// The θ-shaped gradient of `log Z`, with the `W` diagonal masked to zero.
    pub fn to_params(&self) -> IsingParams {
        let n = self.n;
        let mut w = self.second.clone();
        for i in 0..n {
            w[i * n + i] = 0.0;
        }
        IsingParams::from_parts(n, w, self.first.clone())
    }
}

/// Theorem-level constants of the learning problem: the solution radius `D`,
/// the Lipschitz constant `G` and the regularization weight.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub d_bound: f64,
    pub g_bound: f64,
    pub rho: f64,
}

impl ModelConstants {
    pub fn new(emp: &EmpiricalMoments, rho: f64) -> Result<Self> {
        let sol = solution_bound(emp.n, rho, emp.sigma_inf, emp.mu_inf)?;
        Ok(ModelConstants {
            d_bound: sol.d,
            g_bound: lipschitz_bound(emp.n, rho, emp.sigma_inf, emp.mu_inf)?,
            rho,
        })
    }
}

/// Bounds on the regularized maximum-likelihood solution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionBound {
    /// Bound on `‖W*‖₁`.
    pub w_l1: f64,
    /// Bound on `‖b*‖₁`.
    pub b_l1: f64,
    /// Bound on `‖θ*‖₂`.
    pub d: f64,
}

pub fn solution_bound(n: usize, rho: f64, sigma_inf: f64, mu_inf: f64) -> Result<SolutionBound> {
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    if !(mu_inf < 1.0) {
        return Err(Error::AssumptionViolated(format!(
            "empirical first moment has a constant variable (‖μ̂‖∞ = {mu_inf})"
        )));
    }
    let w_l1 = n as f64 * std::f64::consts::LN_2 / rho;
    let ratio = (rho + 1.0 + sigma_inf) / (1.0 - mu_inf);
    Ok(SolutionBound {
        w_l1,
        b_l1: w_l1 * ratio,
        d: w_l1 * (1.0 + ratio * ratio).sqrt(),
    })
}

/// `G = N·sqrt(max((1+‖Σ̂‖∞)² + (1+‖μ̂‖∞)²/N, ρ²))`.
pub fn lipschitz_bound(n: usize, rho: f64, sigma_inf: f64, mu_inf: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("rho must be positive, got {rho}")));
    }
    let nf = n as f64;
    let moment = (1.0 + sigma_inf).powi(2) + (1.0 + mu_inf).powi(2) / nf;
    Ok(nf * moment.max(rho * rho).sqrt())
}

/// Exact inference by enumerating every state; refuses models above `cap` variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Enumerator {
    cap: usize,
}

impl Default for Enumerator {
    fn default() -> Self {
        Enumerator {
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// States per block of the Gray-code walk; energies are recomputed from
/// scratch at each block start to bound accumulated rounding.
const GRAY_BLOCK_BITS: usize = 10;

impl Enumerator {
    pub fn with_cap(cap: usize) -> Self {
        Enumerator { cap }
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if n > self.cap || n >= usize::BITS as usize {
            Err(Error::Capacity { n, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// Energy of every state, indexed by state.
    pub fn energies(&self, params: &IsingParams) -> Result<Vec<f64>> {
        let n = params.n;
        self.check(n)?;
        let low = n.min(GRAY_BLOCK_BITS);
        let block = 1usize << low;
        let mut out = vec![0.0; 1 << n];
        let mut x = vec![0.0; n];
        let mut h = vec![0.0; n];
        for high in 0..(1usize << (n - low)) {
            let base = high << low;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = spin(base, i);
            }
            for (hi, row) in h.iter_mut().zip(params.w.chunks_exact(n)) {
                *hi = row.iter().zip(&x).map(|(w, xj)| w * xj).sum();
            }
            let mut e: f64 = (0..n).map(|i| x[i] * (h[i] + params.b[i])).sum();
            out[base] = e;
            for k in 1..block {
                let i = k.trailing_zeros() as usize;
                // Flipping x_i changes the exponent by -2 x_i (b_i + 2 h_i).
                e -= 2.0 * x[i] * (params.b[i] + 2.0 * h[i]);
                x[i] = -x[i];
                let delta = 2.0 * x[i];
                let col = &params.w[i * n..(i + 1) * n];
                for (hj, w) in h.iter_mut().zip(col) {
                    *hj += w * delta;
                }
                out[base | (k ^ (k >> 1))] = e;
            }
        }
        Ok(out)
    }

    pub fn log_partition(&self, params: &IsingParams) -> Result<f64> {
        Ok(log_sum_exp(&self.energies(params)?))
    }

    /// Normalized state probabilities and `log Z`.
    pub fn probabilities(&self, params: &IsingParams) -> Result<(Vec<f64>, f64)> {
        let mut p = self.energies(params)?;
        let log_z = log_sum_exp(&p);
        p.iter_mut().for_each(|e| *e = (*e - log_z).exp());
        Ok((p, log_z))
    }

    pub fn moments(&self, params: &IsingParams) -> Result<Moments> {
        let (p, _) = self.probabilities(params)?;
        Ok(moments_from_probabilities(params.n, &p))
    }

    /// `L(θ) = log Z − ⟨Σ̂,W⟩ − μ̂ᵀb`.
    pub fn neg_log_likelihood(&self, params: &IsingParams, emp: &EmpiricalMoments) -> Result<f64> {
        check_same_n(params.n, emp.n)?;
        Ok(self.log_partition(params)? - emp.inner(params))
    }

    /// `L(θ) + ρ‖W‖₁`.
    pub fn objective(&self, params: &IsingParams, emp: &EmpiricalMoments, rho: f64) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::invalid(format!("rho must be positive, got {rho}")));
        }
        Ok(self.neg_log_likelihood(params, emp)? + rho * params.l1_w())
    }

    /// `∂L/∂θ` with the `W` diagonal masked to zero.
    pub fn gradient(&self, params: &IsingParams, emp: &EmpiricalMoments) -> Result<IsingParams> {
        check_same_n(params.n, emp.n)?;
        let mut g = self.moments(params)?.to_params();
        g.axpy(-1.0, &emp.as_params());
        Ok(g)
    }

    /// `t` i.i.d. draws by inverse CDF over the enumerated distribution.
    pub fn sample(&self, params: &IsingParams, t: usize, seed: u64) -> Result<Dataset> {
        if t == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let (p, _) = self.probabilities(params)?;
        let mut cdf = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        for v in &p {
            acc += v;
            cdf.push(acc);
        }
        let total = acc;
        let n = params.n;
        let mut rng = seed::rng(seed);
        let rows = (0..t)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                let s = cdf.partition_point(|&c| c <= u).min(p.len() - 1);
                (0..n).map(|i| spin(s, i) as i8).collect()
            })
            .collect();
        Dataset::new(rows)
    }

    /// `KL(p‖q) = Σ_x p(x) (log p(x) − log q(x))`.
    pub fn kl(&self, p: &IsingParams, q: &IsingParams) -> Result<f64> {
        check_same_n(p.n, q.n)?;
        let ep = self.energies(p)?;
        let eq = self.energies(q)?;
        let zp = log_sum_exp(&ep);
        let zq = log_sum_exp(&eq);
        let kl: f64 = ep
            .iter()
            .zip(&eq)
            .map(|(a, b)| {
                let lp = a - zp;
                lp.exp() * (lp - (b - zq))
            })
            .sum();
        // Rounding can leave a tiny negative value when p ≈ q.
        Ok(kl.max(0.0))
    }
}

fn check_same_n(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::invalid(format!("dimension mismatch: {a} vs {b} variables")))
    } else {
        Ok(())
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Moments of a distribution given as normalized per-state probabilities.
pub(crate) fn moments_from_probabilities(n: usize, p: &[f64]) -> Moments {
    let mut second = vec![0.0; n * n];
    let mut first = vec![0.0; n];
    let mut x = vec![0.0; n];
    for (s, &ps) in p.iter().enumerate() {
        if ps == 0.0 {
            continue;
        }
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = spin(s, i) * ps;
            first[i] += *xi;
        }
        // x_i x_j p = (x_i p) * x_j, using the unweighted sign of x_j.
        for i in 0..n {
            let row = &mut second[i * n..(i + 1) * n];
            for (j, r) in row.iter_mut().enumerate().skip(i + 1) {
                *r += x[i] * spin(s, j);
            }
        }
    }
    for i in 0..n {
        second[i * n + i] = 1.0;
        for j in (i + 1)..n {
            second[j * n + i] = second[i * n + j];
        }
    }
    Moments { n, second, first }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    fn pair(w12: f64) -> IsingParams {
        IsingParams::from_couplings(2, &[(0, 1, w12)], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn energy_examples() {
        let zero = IsingParams::zeros(3);
        assert_eq!(energy(&zero, &[1.0, -1.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(energy(&pair(0.5), &[1.0, 1.0]).unwrap(), 1.0, epsilon = 1e-15);
        let single = IsingParams::new(1, vec![0.0], vec![0.3]).unwrap();
        assert_abs_diff_eq!(energy(&single, &[-1.0]).unwrap(), -0.3, epsilon = 1e-15);
    }

    #[test]
    fn energy_rejects_bad_spins() {
        let p = IsingParams::zeros(2);
        assert!(matches!(energy(&p, &[1.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(energy(&p, &[1.0, 0.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn params_validation() {
        assert!(IsingParams::new(2, vec![0.0, 1.0, 0.5, 0.0], vec![0.0; 2]).is_err());
        assert!(IsingParams::new(2, vec![1.0, 0.0, 0.0, 0.0], vec![0.0; 2]).is_err());
        assert!(IsingParams::new(2, vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(IsingParams::new(2, vec![0.0; 4], vec![0.0; 3]).is_err());
        assert_eq!(IsingParams::zeros(3).dim(), 12);
    }

    #[test]
    fn params_json_shape() {
        let p = pair(0.25);
        let v: serde_json::Value = serde_json::from_str(&p.to_json().unwrap()).unwrap();
        assert_eq!(v["n"], 2);
        assert_eq!(v["w"].as_array().unwrap().len(), 4);
        assert_eq!(v["b"].as_array().unwrap().len(), 2);
        assert_eq!(IsingParams::from_json(&p.to_json().unwrap()).unwrap(), p);
        let asym = r#"{"n":2,"w":[0,1,0,0],"b":[0,0]}"#;
        assert!(IsingParams::from_json(asym).is_err());
    }

    #[test]
    fn gray_walk_matches_direct_energy() {
        let p = IsingParams::from_couplings(
            12,
            &[(0, 3, 0.7), (2, 11, -0.4), (5, 6, 0.25), (1, 10, -1.1)],
            (0..12).map(|i| 0.1 * i as f64 - 0.5).collect(),
        )
        .unwrap();
        let e = Enumerator::default().energies(&p).unwrap();
        for s in [0, 1, 777, 1024, 2047, 4095, 3000] {
            let direct = energy(&p, &state_spins(s, 12)).unwrap();
            assert_abs_diff_eq!(e[s], direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn log_partition_examples() {
        let en = Enumerator::default();
        assert_abs_diff_eq!(en.log_partition(&IsingParams::zeros(5)).unwrap(), 5.0 * LN_2, epsilon = 1e-12);
        let single = IsingParams::new(1, vec![0.0], vec![0.7]).unwrap();
        assert_abs_diff_eq!(
            en.log_partition(&single).unwrap(),
            (2.0 * 0.7_f64.cosh()).ln(),
            epsilon = 1e-14
        );
        let expect = (2.0 * 1.0_f64.exp() + 2.0 * (-1.0_f64).exp()).ln();
        assert_abs_diff_eq!(en.log_partition(&pair(0.5)).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn capacity_error_above_cap() {
        let en = Enumerator::with_cap(4);
        let err = en.log_partition(&IsingParams::zeros(5)).unwrap_err();
        assert!(matches!(err, Error::Capacity { n: 5, cap: 4 }));
        assert!(en.moments(&IsingParams::zeros(5)).is_err());
        assert!(en.sample(&IsingParams::zeros(5), 3, 0).is_err());
    }

    #[test]
    fn moments_examples() {
        let en = Enumerator::default();
        let m = en.moments(&IsingParams::zeros(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m.second[i * 3 + j], expect, epsilon = 1e-15);
            }
            assert_abs_diff_eq!(m.first[i], 0.0, epsilon = 1e-15);
        }
        let single = IsingParams::new(1, vec![0.0], vec![0.7]).unwrap();
        assert_abs_diff_eq!(en.moments(&single).unwrap().first[0], 0.7_f64.tanh(), epsilon = 1e-14);
        let m = en.moments(&pair(0.5)).unwrap();
        assert_abs_diff_eq!(m.second[1], 1.0_f64.tanh(), epsilon = 1e-14);
        assert_abs_diff_eq!(m.second[2], 1.0_f64.tanh(), epsilon = 1e-14);
    }

    #[test]
    fn empirical_moments_examples() {
        let one = EmpiricalMoments::from_dataset(&Dataset::new(vec![vec![1, 1]]).unwrap());
        assert_eq!(one.sigma_hat(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(one.mu_hat(), &[1.0, 1.0]);
        assert!(!one.bounded_mean());

        let two = EmpiricalMoments::from_dataset(&Dataset::new(vec![vec![1, -1], vec![-1, 1]]).unwrap());
        assert_eq!(two.sigma_hat(), &[0.0, -1.0, -1.0, 0.0]);
        assert_eq!(two.mu_hat(), &[0.0, 0.0]);
        assert!(two.bounded_mean());

        let all: Vec<Vec<i8>> = (0..8)
            .map(|s| (0..3).map(|i| spin(s, i) as i8).collect())
            .collect();
        let full = EmpiricalMoments::from_dataset(&Dataset::new(all).unwrap());
        assert!(full.sigma_hat().iter().all(|&v| v == 0.0));
        assert!(full.mu_hat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dataset_validation_and_csv() {
        assert!(Dataset::new(vec![]).is_err());
        assert!(Dataset::new(vec![vec![1, 0]]).is_err());
        assert!(Dataset::new(vec![vec![1, 1], vec![1]]).is_err());
        let d = Dataset::new(vec![vec![1, -1, 1], vec![-1, -1, 1]]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "1,-1,1\n-1,-1,1\n");
        assert_eq!(Dataset::read_csv(&buf[..]).unwrap(), d);
        assert!(Dataset::read_csv(&b"1,2\n"[..]).is_err());
    }

    #[test]
    fn objective_examples() {
        let en = Enumerator::default();
        let emp = EmpiricalMoments::zeros(2);
        assert_abs_diff_eq!(en.objective(&IsingParams::zeros(2), &emp, 0.3).unwrap(), 2.0 * LN_2, epsilon = 1e-14);
        let expect = (2.0 * 1.0_f64.exp() + 2.0 * (-1.0_f64).exp()).ln() + 1.0;
        assert_abs_diff_eq!(en.objective(&pair(0.5), &emp, 1.0).unwrap(), expect, epsilon = 1e-14);
        assert!(en.objective(&pair(0.5), &emp, 0.0).is_err());
        let d = en.objective(&pair(0.5), &emp, 2.0).unwrap() - en.objective(&pair(0.5), &emp, 1.0).unwrap();
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nll_of_point_mass_approaches_zero() {
        let en = Enumerator::default();
        let emp = EmpiricalMoments::from_dataset(&Dataset::new(vec![vec![1, 1]]).unwrap());
        let mut last = f64::INFINITY;
        for scale in [1.0, 4.0, 16.0] {
            let p = IsingParams::from_couplings(2, &[(0, 1, scale)], vec![scale, scale]).unwrap();
            let l = en.neg_log_likelihood(&p, &emp).unwrap();
            assert!(l >= 0.0 && l < last);
            last = l;
        }
        assert!(last < 1e-12);
    }

    #[test]
    fn nll_at_self_consistent_moments_is_entropy() {
        let en = Enumerator::default();
        let p = IsingParams::from_couplings(2, &[(0, 1, -0.35)], vec![0.2, -0.6]).unwrap();
        let emp = EmpiricalMoments::from_model(&en.moments(&p).unwrap());
        let (probs, _) = en.probabilities(&p).unwrap();
        let entropy: f64 = probs.iter().map(|q| -q * q.ln()).sum();
        assert_abs_diff_eq!(en.neg_log_likelihood(&p, &emp).unwrap(), entropy, epsilon = 1e-13);
    }

    #[test]
    fn gradient_vanishes_at_self_consistency() {
        let en = Enumerator::default();
        let p = IsingParams::from_couplings(3, &[(0, 1, 0.4), (1, 2, -0.7)], vec![0.1, 0.0, -0.3]).unwrap();
        let emp = EmpiricalMoments::from_model(&en.moments(&p).unwrap());
        assert!(en.gradient(&p, &emp).unwrap().max_abs() < 1e-14);
        let g0 = en.gradient(&IsingParams::zeros(3), &EmpiricalMoments::zeros(3)).unwrap();
        assert!(g0.max_abs() < 1e-15);
    }

    #[test]
    fn solution_bound_examples() {
        let s = solution_bound(2, 1.0, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.d * s.d, (2.0 * LN_2).powi(2) * 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.d * s.d, 19.218, epsilon = 1e-3);
        let s = solution_bound(2, 1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(s.d * s.d, (2.0 * LN_2).powi(2) * 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.w_l1, 2.0 * LN_2, epsilon = 1e-15);
        // Large ρ drives the coupling bound to zero; the field bound tends to N log2/(1−μ∞).
        let s = solution_bound(2, 1e9, 1.0, 0.5).unwrap();
        assert!(s.w_l1 < 1e-8);
        assert_abs_diff_eq!(s.d, 4.0 * LN_2, epsilon = 1e-6);
        assert!(matches!(solution_bound(2, 1.0, 1.0, 1.0), Err(Error::AssumptionViolated(_))));
    }

    #[test]
    fn lipschitz_examples() {
        assert_abs_diff_eq!(lipschitz_bound(2, 1.0, 1.0, 0.0).unwrap().powi(2), 18.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lipschitz_bound(3, 10.0, 0.5, 0.5).unwrap(), 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lipschitz_bound(1, 0.1, 1.0, 1.0).unwrap().powi(2), 8.0, epsilon = 1e-12);
    }

    #[test]
    fn sampling_examples() {
        let en = Enumerator::default();
        let t = 20_000;
        let d = en.sample(&IsingParams::zeros(4), t, 11).unwrap();
        let emp = EmpiricalMoments::from_dataset(&d);
        assert!(emp.mu_inf() < 4.0 / (t as f64).sqrt());

        let strong = IsingParams::new(3, vec![0.0; 9], vec![0.0, 40.0, 0.0]).unwrap();
        assert!(en.sample(&strong, 500, 3).unwrap().rows().all(|r| r[1] == 1));

        let p = pair(0.3);
        assert_eq!(en.sample(&p, 50, 9).unwrap(), en.sample(&p, 50, 9).unwrap());
    }

    #[test]
    fn kl_examples() {
        let en = Enumerator::default();
        let p = pair(0.3);
        assert_abs_diff_eq!(en.kl(&p, &p).unwrap(), 0.0, epsilon = 1e-15);

        // Two-state closed form: p uniform, q(x) = e^{0.5x}/(2cosh 0.5).
        let p = IsingParams::zeros(1);
        let q = IsingParams::new(1, vec![0.0], vec![0.5]).unwrap();
        let expect = -LN_2 + (2.0 * 0.5_f64.cosh()).ln();
        assert_abs_diff_eq!(en.kl(&p, &q).unwrap(), expect, epsilon = 1e-14);
        assert!(en.kl(&p, &IsingParams::zeros(2)).is_err());
    }
}
