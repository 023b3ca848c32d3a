//! Closed-form convergence bounds: harmonic sums, error-term weights, the
//! deterministic regret bounds, the high-probability error-term bound for
//! biased samplers, and the rate tables that tie them to sample schedules.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};
use crate::optim::SampleSchedule;

/// `H_{r,K} = Σ_{k=1}^K k^{-r}`, summed smallest term first.
pub fn harmonic(r: f64, k: usize) -> f64 {
    debug_assert!(k >= 1 && r >= 0.0);
    if r == 0.0 {
        return k as f64;
    }
    (1..=k).rev().map(|i| (i as f64).powf(-r)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarmonicDiagnostic {
    pub exact: f64,
    /// `log K` for `r = 1`, `K^{1-r}/(1-r)` for `r < 1`; none for `r > 1`.
    pub approx: Option<f64>,
    pub relative_error: Option<f64>,
}

/// Compares the exact sum with its usual asymptotic approximation.
pub fn harmonic_diagnostic(r: f64, k: usize) -> HarmonicDiagnostic {
    let exact = harmonic(r, k);
    let kf = k as f64;
    let approx = if r == 1.0 {
        Some(kf.ln())
    } else if r < 1.0 {
        Some(kf.powf(1.0 - r) / (1.0 - r))
    } else {
        None
    };
    HarmonicDiagnostic {
        exact,
        approx,
        relative_error: approx.map(|a| (a - exact).abs() / exact),
    }
}

/// Weights `γ_k` of the error term `A_{γ,ξ} = Σ γ_k ‖ξ^(k)‖₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WeightFamily {
    /// `γ_k = k^{-r} / H_{r,K}`.
    Robust { r: f64 },
    /// `γ_k = 1/K`.
    Basic,
    /// `γ_k = 2k / (K(K+1))`.
    Accelerated,
}

impl WeightFamily {
    pub fn weights(&self, k: usize) -> Result<Vec<f64>> {
        if k == 0 {
            return Err(Error::invalid("weights need K ≥ 1"));
        }
        let kf = k as f64;
        Ok(match *self {
            WeightFamily::Robust { r } => {
                if !(r >= 0.0) {
                    return Err(Error::invalid("robust weights need r ≥ 0"));
                }
                let h = harmonic(r, k);
                (1..=k).map(|i| (i as f64).powf(-r) / h).collect()
            }
            WeightFamily::Basic => vec![1.0 / kf; k],
            WeightFamily::Accelerated => {
                let norm = kf * (kf + 1.0) / 2.0;
                (1..=k).map(|i| i as f64 / norm).collect()
            }
        })
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::invalid("empty weight vector"));
    }
    if weights.iter().any(|&g| !(g >= 0.0)) {
        return Err(Error::invalid("weights must be non-negative"));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("weights must sum to 1, got {sum}")));
    }
    Ok(())
}

/// `A_{γ,ξ} = Σ_k γ_k ‖ξ^(k)‖₂`.
pub fn error_term(weights: &[f64], xi_norms: &[f64]) -> Result<f64> {
    if weights.len() != xi_norms.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} error norms",
            weights.len(),
            xi_norms.len()
        )));
    }
    check_weights(weights)?;
    Ok(weights.iter().zip(xi_norms).map(|(g, x)| g * x).sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregateKind {
    Basic,
    Accelerated,
}

/// Error aggregates of the proximal-gradient bounds:
/// basic `(1/K)(Σ‖ξ^(k)‖)²`, accelerated `(4/(K+1)²)(Σ k‖ξ^(k)‖)²`.
pub fn pg_error_aggregate(kind: AggregateKind, xi_norms: &[f64]) -> Result<f64> {
    if xi_norms.is_empty() {
        return Err(Error::invalid("aggregate needs at least one error norm"));
    }
    let k = xi_norms.len() as f64;
    Ok(match kind {
        AggregateKind::Basic => xi_norms.iter().sum::<f64>().powi(2) / k,
        AggregateKind::Accelerated => {
            let s: f64 = xi_norms.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).sum();
            4.0 * s * s / ((k + 1.0) * (k + 1.0))
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Theorem {
    /// Step-size weighted average of visited points.
    Robust,
    /// Plain average of visited points.
    Basic,
    /// A uniformly drawn visited point, with probability at least `1 − ε`.
    Random { epsilon: f64 },
}

/// Right-hand side of the regret bound of forward-backward splitting with
/// `η_k = β/(G k^r)` after `K` steps and error term `A`.
#[allow(clippy::too_many_arguments)]
pub fn bound_deterministic(theorem: Theorem, d: f64, g: f64, beta: f64, r: f64, k: usize, a: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::invalid(format!("r must lie in (0, 1), got {r}")));
    }
    if !(d >= 0.0 && g > 0.0 && beta > 0.0 && a >= 0.0) || k == 0 {
        return Err(Error::invalid("need D ≥ 0, G > 0, β > 0, A ≥ 0 and K ≥ 1"));
    }
    let kf = k as f64;
    let h_r = harmonic(r, k);
    let robust = || d * d * g / (2.0 * beta * h_r) + 2.0 * d * a + 4.0 * beta * g * harmonic(2.0 * r, k) / h_r;
    let basic = || {
        d * d * g * (kf + 1.0).powf(r) / (2.0 * beta * kf)
            + 2f64.powf(1.0 + r) * d * a
            + 2f64.powf(2.0 + r) * beta * g * h_r / kf
    };
    match theorem {
        Theorem::Robust => Ok(robust()),
        Theorem::Basic => Ok(basic()),
        Theorem::Random { epsilon } => {
            if !(epsilon > 0.0 && epsilon <= 1.0) {
                return Err(Error::invalid(format!("ε must lie in (0, 1], got {epsilon}")));
            }
            Ok(basic() / epsilon)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bias: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
}

/// An evaluated bound with its inputs and sub-terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: String,
    pub inputs: BoundInputs,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda2: Option<f64>,
}

impl BoundReport {
    #[allow(clippy::too_many_arguments)]
    pub fn deterministic(theorem: Theorem, d: f64, g: f64, beta: f64, r: f64, k: usize, a: f64) -> Result<Self> {
        let rhs = bound_deterministic(theorem, d, g, beta, r, k, a)?;
        let (name, epsilon) = match theorem {
            Theorem::Robust => ("regret-robust", None),
            Theorem::Basic => ("regret-basic", None),
            Theorem::Random { epsilon } => ("regret-random", Some(epsilon)),
        };
        Ok(BoundReport {
            bound: name.into(),
            inputs: BoundInputs {
                d: Some(d),
                g: Some(g),
                beta: Some(beta),
                r: Some(r),
                k,
                a: Some(a),
                epsilon,
                ..BoundInputs::default()
            },
            rhs,
            lambda1: None,
            lambda2: None,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// High-probability bound on `A_{γ,ξ}` for `K = γ.len()` independent
/// estimates from a sampler with bias `B/S_k` and variance `V/S_k`:
///
/// `λ1 + (2√M/3K) log(1/δ) + √(2λ2 log(1/δ) + (4M/9K²) log²(1/δ))`
///
/// with `λ1 = min(2√M, B Σ γ_k/S_k)` and `λ2 = min(4M, V Σ γ_k²/S_k)`.
pub fn bound_thm9(bias: f64, variance: f64, s_k: &[usize], gamma: &[f64], m: f64, delta: f64) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("δ must lie in (0, 1), got {delta}")));
    }
    if !(bias >= 0.0 && variance >= 0.0 && m > 0.0) {
        return Err(Error::invalid("need B ≥ 0, V ≥ 0 and M > 0"));
    }
    if s_k.len() != gamma.len() {
        return Err(Error::invalid(format!("{} sample counts for {} weights", s_k.len(), gamma.len())));
    }
    if s_k.contains(&0) {
        return Err(Error::invalid("sample counts must be at least 1"));
    }
    check_weights(gamma)?;
    let k = gamma.len() as f64;
    let sum1: f64 = gamma.iter().zip(s_k).map(|(g, &s)| g / s as f64).sum();
    let sum2: f64 = gamma.iter().zip(s_k).map(|(g, &s)| g * g / s as f64).sum();
    let lambda1 = (2.0 * m.sqrt()).min(bias * sum1);
    let lambda2 = (4.0 * m).min(variance * sum2);
    let l = (1.0 / delta).ln();
    let rhs = lambda1 + 2.0 * m.sqrt() / (3.0 * k) * l + (2.0 * lambda2 * l + 4.0 * m / (9.0 * k * k) * l * l).sqrt();
    Ok(BoundReport {
        bound: "error-term-high-probability".into(),
        inputs: BoundInputs {
            k: gamma.len(),
            delta: Some(delta),
            bias: Some(bias),
            variance: Some(variance),
            m: Some(m),
            ..BoundInputs::default()
        },
        rhs,
        lambda1: Some(lambda1),
        lambda2: Some(lambda2),
    })
}

/// Rows of the rate tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableMethod {
    /// Basic proximal gradient.
    PB,
    /// Accelerated proximal gradient.
    PA,
    /// Forward-backward splitting with basic averaging, `r = ½`.
    FB,
    /// Forward-backward splitting with robust averaging, `r = ½`.
    FR,
}

/// Columns of the rate tables: the targeted convergence of the error term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Converge,
    InvSqrtK,
    InvK,
    InvK2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    /// Required order of `‖ξ^(k)‖₂`.
    Deterministic,
    /// Required growth of `S_k`.
    Stochastic,
}

/// A table cell. Exponents are the base rates; each cell holds for any
/// additional `ε > 0` on top of `p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Rate {
    /// `log k`, or `1/log k` when `inverse`.
    Log { inverse: bool },
    /// `k^{p+ε}`, or `1/k^{p+ε}` when `inverse`.
    Power { p: f64, inverse: bool },
    NotAchievable,
}

impl Rate {
    pub fn is_achievable(&self) -> bool {
        !matches!(self, Rate::NotAchievable)
    }

    /// A sample schedule meeting a stochastic cell, with scale `c` and
    /// excess exponent `epsilon`.
    pub fn recommend(&self, c: f64, epsilon: f64) -> Option<SampleSchedule> {
        match *self {
            Rate::Log { inverse: false } => Some(SampleSchedule::Logarithmic { c }),
            Rate::Power { p, inverse: false } => Some(SampleSchedule::Polynomial { c, p: p + epsilon }),
            _ => None,
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Rate::Log { inverse: false } => write!(f, "O(log k)"),
            Rate::Log { inverse: true } => write!(f, "O(1/log k)"),
            Rate::Power { p, inverse: false } => write!(f, "O(k^({p}+e))"),
            Rate::Power { p, inverse: true } => write!(f, "O(1/k^({p}+e))"),
            Rate::NotAchievable => write!(f, "-"),
        }
    }
}

pub fn schedule_table(method: TableMethod, target: Target, setting: Setting) -> Rate {
    use TableMethod::*;
    use Target::*;
    let inverse = setting == Setting::Deterministic;
    let pow = |p: f64| Rate::Power { p, inverse };
    let log = Rate::Log { inverse };
    match (setting, method, target) {
        (Setting::Stochastic, PA, _) => Rate::NotAchievable,
        (_, PB, Converge) => pow(0.5),
        (_, PB, InvSqrtK) => pow(0.75),
        (_, PB, InvK) => pow(1.0),
        (_, PA, Converge) => pow(1.0),
        (_, PA, InvSqrtK) => pow(1.25),
        (_, PA, InvK) => pow(1.5),
        (_, PA, InvK2) => pow(2.0),
        (_, FB | FR, Converge) => log,
        (_, FB | FR, InvSqrtK) => pow(0.5),
        (_, FB, InvK) => pow(1.0),
        _ => Rate::NotAchievable,
    }
}

/// Plain-text rendering of one rate table.
pub fn render_table(setting: Setting) -> String {
    let targets = [Target::Converge, Target::InvSqrtK, Target::InvK, Target::InvK2];
    let header = format!(
        "{:<8}{:<18}{:<18}{:<18}{}",
        "method", "K -> inf", "O(1/sqrt K)", "O(1/K)", "O(1/K^2)"
    );
    let mut out = format!("{header}\n");
    for method in [TableMethod::PB, TableMethod::PA, TableMethod::FB, TableMethod::FR] {
        out.push_str(&format!("{:<8}", format!("{method:?}")));
        for target in targets {
            out.push_str(&format!("{:<18}", schedule_table(method, target, setting).to_string()));
        }
        out.truncate(out.trim_end().len());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn harmonic_examples() {
        for k in [1, 2, 7, 1000] {
            assert_eq!(harmonic(0.0, k), k as f64);
        }
        assert_eq!(harmonic(1.0, 2), 1.5);
        let direct = 1.0 + 1.0 / 2f64.sqrt() + 1.0 / 3f64.sqrt() + 0.5;
        assert!((harmonic(0.5, 4) - direct).abs() < 1e-15);
        assert!((harmonic(0.5, 4) - 2.78446).abs() < 1e-5);
    }

    #[test]
    fn harmonic_diagnostic_approximations() {
        let d = harmonic_diagnostic(1.0, 100_000);
        assert!(d.relative_error.unwrap() < 0.05);
        let d = harmonic_diagnostic(0.5, 100_000);
        assert!(d.relative_error.unwrap() < 0.01);
        assert!(harmonic_diagnostic(2.0, 10).approx.is_none());
    }

    #[test]
    fn weight_families() {
        for fam in [WeightFamily::Robust { r: 0.5 }, WeightFamily::Basic, WeightFamily::Accelerated] {
            for k in [1, 2, 50, 999] {
                let w = fam.weights(k).unwrap();
                assert_eq!(w.len(), k);
                assert!(w.iter().all(|&g| g > 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        let r = WeightFamily::Robust { r: 0.5 }.weights(30).unwrap();
        assert!(r.windows(2).all(|w| w[1] <= w[0]));
        let a = WeightFamily::Accelerated.weights(30).unwrap();
        assert!(a.windows(2).all(|w| w[1] > w[0]));
        assert!(WeightFamily::Basic.weights(0).is_err());
    }

    #[test]
    fn error_term_examples() {
        let w = WeightFamily::Basic.weights(2).unwrap();
        assert!((error_term(&w, &[0.4, 0.2]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(error_term(&w, &[0.0, 0.0]).unwrap(), 0.0);
        let w = WeightFamily::Robust { r: 0.3 }.weights(5).unwrap();
        assert!((error_term(&w, &[0.7; 5]).unwrap() - 0.7).abs() < 1e-12);
        assert!(error_term(&w, &[0.7; 4]).is_err());
    }

    #[test]
    fn pg_aggregate_identities() {
        let k = 37;
        let c = 0.42;
        let xi = vec![c; k];
        let basic = pg_error_aggregate(AggregateKind::Basic, &xi).unwrap();
        assert!((basic - k as f64 * c * c).abs() < 1e-10);
        let a = error_term(&WeightFamily::Basic.weights(k).unwrap(), &xi).unwrap();
        assert!((basic - k as f64 * a * a).abs() < 1e-10);
        let acc = pg_error_aggregate(AggregateKind::Accelerated, &xi).unwrap();
        assert!((acc - (k * k) as f64 * c * c).abs() < 1e-10);
        assert_eq!(pg_error_aggregate(AggregateKind::Accelerated, &[0.0; 5]).unwrap(), 0.0);
        assert!(pg_error_aggregate(AggregateKind::Basic, &[]).is_err());
    }

    #[test]
    fn deterministic_bound_examples() {
        let v = bound_deterministic(Theorem::Robust, 1.0, 1.0, 1.0, 0.5, 1, 0.0).unwrap();
        assert!((v - 4.5).abs() < 1e-15);
        for k in [1, 10, 1000] {
            let b = bound_deterministic(Theorem::Basic, 2.0, 3.0, 1.0, 0.5, k, 0.1).unwrap();
            let r = bound_deterministic(Theorem::Random { epsilon: 1.0 }, 2.0, 3.0, 1.0, 0.5, k, 0.1).unwrap();
            assert_eq!(b, r);
        }
        assert!(bound_deterministic(Theorem::Robust, 1.0, 1.0, 1.0, 1.0, 5, 0.0).is_err());
        assert!(bound_deterministic(Theorem::Random { epsilon: 0.0 }, 1.0, 1.0, 1.0, 0.5, 5, 0.0).is_err());
    }

    #[test]
    fn robust_bound_decays_like_log_k_over_sqrt_k() {
        let ks = [100usize, 1000, 10_000, 100_000];
        let v: Vec<f64> = ks
            .iter()
            .map(|&k| bound_deterministic(Theorem::Robust, 1.0, 1.0, 1.0, 0.5, k, 0.0).unwrap())
            .collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        // Ratio to log K / √K stays within a constant band.
        let ratios: Vec<f64> = ks.iter().zip(&v).map(|(&k, v)| v / ((k as f64).ln() / (k as f64).sqrt())).collect();
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
        assert!(hi / lo < 3.0, "{ratios:?}");
    }

    #[test]
    fn error_term_bound_examples() {
        let rep = bound_thm9(0.0, 0.0, &[1], &[1.0], 1.0, (-1.0f64).exp()).unwrap();
        assert!((rep.rhs - 4.0 / 3.0).abs() < 1e-15);
        let k = 20;
        let g = WeightFamily::Basic.weights(k).unwrap();
        let rep = bound_thm9(3.0, 5.0, &vec![7; k], &g, 20.0, 0.05).unwrap();
        assert!((rep.lambda1.unwrap() - 3.0 / 7.0).abs() < 1e-12);
        assert!((rep.lambda2.unwrap() - 5.0 / (7.0 * k as f64)).abs() < 1e-12);
        // Caps.
        let rep = bound_thm9(1e9, 1e9, &vec![1; k], &g, 4.0, 0.05).unwrap();
        assert_eq!(rep.lambda1, Some(4.0));
        assert_eq!(rep.lambda2, Some(16.0));
        assert!(bound_thm9(0.0, 0.0, &[1], &[1.0], 1.0, 1.0).is_err());
        assert!(bound_thm9(0.0, 0.0, &[1, 2], &[1.0], 1.0, 0.5).is_err());
        let json = rep.to_json().unwrap();
        assert!(json.contains("lambda1"));
    }

    #[test]
    fn table_cells() {
        use Setting::*;
        use TableMethod::*;
        assert_eq!(schedule_table(FB, Target::Converge, Stochastic), Rate::Log { inverse: false });
        for t in [Target::Converge, Target::InvSqrtK, Target::InvK, Target::InvK2] {
            assert_eq!(schedule_table(PA, t, Stochastic), Rate::NotAchievable);
        }
        assert_eq!(
            schedule_table(FB, Target::InvSqrtK, Deterministic),
            Rate::Power { p: 0.5, inverse: true }
        );
        assert_eq!(schedule_table(PA, Target::InvK2, Deterministic), Rate::Power { p: 2.0, inverse: true });
        assert_eq!(schedule_table(FR, Target::InvK, Deterministic), Rate::NotAchievable);
        assert_eq!(schedule_table(PB, Target::InvK2, Stochastic), Rate::NotAchievable);
        assert_eq!(
            schedule_table(FB, Target::Converge, Stochastic).recommend(10.0, 0.0),
            Some(SampleSchedule::Logarithmic { c: 10.0 })
        );
        assert_eq!(
            schedule_table(PB, Target::InvK, Stochastic).recommend(1.0, 0.01),
            Some(SampleSchedule::Polynomial { c: 1.0, p: 1.01 })
        );
        let text = render_table(Stochastic);
        assert!(text.lines().any(|l| l.starts_with("PA") && l.matches('-').count() == 4));
    }

    proptest! {
        #[test]
        fn harmonic_monotone(r in 0.0f64..2.0, dr in 0.01f64..1.0, k in 2usize..400) {
            prop_assert!(harmonic(r, k + 1) > harmonic(r, k));
            prop_assert!(harmonic(r + dr, k) < harmonic(r, k));
        }

        #[test]
        fn error_term_monotone(xi in proptest::collection::vec(0.0f64..5.0, 1..40), idx in 0usize..40, bump in 0.0f64..3.0) {
            let k = xi.len();
            let w = WeightFamily::Robust { r: 0.5 }.weights(k).unwrap();
            let base = error_term(&w, &xi).unwrap();
            let mut up = xi.clone();
            up[idx % k] += bump;
            prop_assert!(error_term(&w, &up).unwrap() >= base);
            prop_assert!(base <= xi.iter().cloned().fold(0.0, f64::max) + 1e-12);
        }

        #[test]
        fn error_term_bound_floor_and_monotonicity(
            b in 0.0f64..50.0, v in 0.0f64..50.0, m in 1.0f64..400.0,
            delta in 0.001f64..0.999, k in 1usize..60, s in 1usize..200,
            db in 0.0f64..5.0, dv in 0.0f64..5.0, dm in 0.0f64..5.0,
        ) {
            let g = WeightFamily::Basic.weights(k).unwrap();
            let sk = vec![s; k];
            let base = bound_thm9(b, v, &sk, &g, m, delta).unwrap();
            let floor = 2.0 * m.sqrt() / (3.0 * k as f64) * (1.0 / delta).ln();
            prop_assert!(base.rhs >= floor);
            prop_assert!(base.lambda1.unwrap() <= 2.0 * m.sqrt());
            prop_assert!(base.lambda2.unwrap() <= 4.0 * m);
            prop_assert!(bound_thm9(b + db, v, &sk, &g, m, delta).unwrap().rhs >= base.rhs);
            prop_assert!(bound_thm9(b, v + dv, &sk, &g, m, delta).unwrap().rhs >= base.rhs);
            prop_assert!(bound_thm9(b, v, &sk, &g, m + dm, delta).unwrap().rhs >= base.rhs);
            prop_assert!(bound_thm9(b, v, &sk, &g, m, delta * 0.5).unwrap().rhs >= base.rhs);
        }
    }
}
