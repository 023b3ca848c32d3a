use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::experiment::SweepResult;
use sparse_ising::analysis::{bound_deterministic, bound_thm9, error_term, Theorem, WeightFamily};
use sparse_ising::optim::Method;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Confidence parameter of the random-output bound.
    pub epsilon: f64,
    /// Failure probability of the high-probability error-term bound.
    pub delta: f64,
    /// Sampler constants `(B, V)`; enables the error-term bound check.
    pub bias_variance: Option<(f64, f64)>,
    /// Dimension constant of the error-term bound; `N² + N` when unset.
    pub m: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            epsilon: 0.2,
            delta: 0.05,
            bias_variance: None,
            m: None,
        }
    }
}

/// One measured quantity against one bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub rep: usize,
    pub label: String,
    pub bound: String,
    pub k: usize,
    pub measured: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// A probabilistic bound checked as a violation frequency across repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub label: String,
    pub bound: String,
    pub runs: usize,
    pub violations: usize,
    pub allowed_fraction: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<BoundCheck>,
    pub groups: Vec<GroupCheck>,
    pub skipped: Vec<String>,
}

impl VerifyReport {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count() + self.groups.iter().filter(|g| !g.pass).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

/// `1, 2, 5, 10, 20, 50, …` up to and including `k_max`.
pub fn log_grid(k_max: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let k = m * decade;
            if k >= k_max {
                break 'outer;
            }
            grid.push(k);
        }
        decade *= 10;
    }
    grid.push(k_max);
    grid
}

/// Allowed violation frequency for a `p`-probability event over `runs` trials:
/// `p` plus three binomial standard deviations.
pub fn allowed_fraction(p: f64, runs: usize) -> f64 {
    p + 3.0 * (p * (1.0 - p) / runs as f64).sqrt()
}

/// Checks every bound that a sweep's recorded data supports. Regret bounds
/// need a known `D` and per-iteration error norms (exact cells always have
/// them); the error-term bound additionally needs sampler constants.
pub fn verify_bounds(sweep: &SweepResult, opts: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    let config = &sweep.config;
    let n = config.n as f64;
    let m = opts.m.unwrap_or(n * n + n);
    // label -> (runs, violations) for the grouped checks
    let mut random_groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut error_term_groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();

    for cell in &sweep.cells {
        let label = cell.spec.label();
        let Some(trace) = &cell.trace else {
            report.skipped.push(format!("rep {} {label}: run failed", cell.rep));
            continue;
        };
        let Some(rep) = sweep.rep(cell.rep) else {
            report.skipped.push(format!("rep {} {label}: no reference optimum", cell.rep));
            continue;
        };
        if let Some(b) = &trace.boundedness {
            report.checks.push(BoundCheck {
                rep: cell.rep,
                label: label.clone(),
                bound: "iterate-radius".into(),
                k: trace.len(),
                measured: b.max_distance,
                rhs: b.d_bound,
                pass: b.violations == 0,
            });
        }
        if cell.spec.method != Method::Fbs {
            continue;
        }
        let Some(d) = rep.d else {
            report.skipped.push(format!("rep {} {label}: solution radius undefined", cell.rep));
            continue;
        };
        let Some(xi) = trace.xi_norms() else {
            report.skipped.push(format!("rep {} {label}: error norms not tracked", cell.rep));
            continue;
        };
        let r = trace.config.r;
        let beta = trace.config.beta;
        for k in log_grid(trace.len()) {
            let prefix = &xi[..k];
            let robust_w = WeightFamily::Robust { r }.weights(k).expect("k ≥ 1");
            let basic_w = WeightFamily::Basic.weights(k).expect("k ≥ 1");
            let a_robust = error_term(&robust_w, prefix).expect("matching lengths");
            let a_basic = error_term(&basic_w, prefix).expect("matching lengths");
            let rhs6 = bound_deterministic(Theorem::Robust, d, trace.g, beta, r, k, a_robust).expect("valid inputs");
            let rhs7 = bound_deterministic(Theorem::Basic, d, trace.g, beta, r, k, a_basic).expect("valid inputs");
            for (bound, measured, rhs) in [
                ("weighted-regret", trace.weighted_regret(rep.f_star, k), rhs6),
                ("average-regret", trace.average_regret(rep.f_star, k), rhs7),
            ] {
                report.checks.push(BoundCheck {
                    rep: cell.rep,
                    label: label.clone(),
                    bound: bound.into(),
                    k,
                    measured,
                    rhs,
                    pass: measured <= rhs,
                });
            }
        }
        let k = trace.len();
        let outputs = trace.outputs.as_ref().expect("completed runs carry outputs");
        let a_basic = error_term(&WeightFamily::Basic.weights(k).expect("k ≥ 1"), &xi).expect("matching lengths");
        let rhs8 = bound_deterministic(Theorem::Random { epsilon: opts.epsilon }, d, trace.g, beta, r, k, a_basic)
            .expect("valid inputs");
        let entry = random_groups.entry(label.clone()).or_default();
        entry.0 += 1;
        if outputs.random.objective - rep.f_star > rhs8 {
            entry.1 += 1;
        }
        if let (Some((b, v)), Some(_)) = (opts.bias_variance, &cell.spec.schedule) {
            let s_k: Vec<usize> = trace.rows.iter().map(|row| row.s_k).collect();
            let gamma = WeightFamily::Basic.weights(k).expect("k ≥ 1");
            let bound = bound_thm9(b, v, &s_k, &gamma, m, opts.delta).expect("valid inputs");
            let entry = error_term_groups.entry(label.clone()).or_default();
            entry.0 += 1;
            if a_basic > bound.rhs {
                entry.1 += 1;
            }
        }
    }

    for (groups, bound, p) in [
        (random_groups, "random-output", opts.epsilon),
        (error_term_groups, "error-term", opts.delta),
    ] {
        for (label, (runs, violations)) in groups {
            let allowed = allowed_fraction(p, runs);
            report.groups.push(GroupCheck {
                label,
                bound: bound.into(),
                runs,
                violations,
                allowed_fraction: allowed,
                pass: violations as f64 / runs as f64 <= allowed,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        assert_eq!(log_grid(1), vec![1]);
        assert_eq!(log_grid(7), vec![1, 2, 5, 7]);
        assert_eq!(log_grid(100), vec![1, 2, 5, 10, 20, 50, 100]);
        assert_eq!(log_grid(150), vec![1, 2, 5, 10, 20, 50, 100, 150]);
    }

    #[test]
    fn slack_shrinks_with_runs() {
        assert!((allowed_fraction(0.2, 1000) - (0.2 + 3.0 * (0.16f64 / 1000.0).sqrt())).abs() < 1e-15);
        assert!(allowed_fraction(0.05, 500) < allowed_fraction(0.05, 100));
    }
}
