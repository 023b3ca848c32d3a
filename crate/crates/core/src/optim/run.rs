use rand::Rng as _;

use super::prox::prox_l1_in_place;
use super::{
    step_size, Boundedness, ErrorSource, FinalOutputs, GradientOracle, Method, OptimizerConfig, OutputPoint,
    Problem, ProgressSink, RunTrace, TraceMode, TraceRow,
};
use crate::analysis::{error_term, pg_error_aggregate, AggregateKind, WeightFamily};
use crate::error::{Error, Result};
use crate::ising::IsingParams;
use crate::seed;

/// Dispatches on `config.method`.
pub fn run(
    config: &OptimizerConfig,
    problem: &Problem,
    oracle: &mut dyn GradientOracle,
    errors: &ErrorSource,
    sink: &dyn ProgressSink,
) -> Result<RunTrace> {
    match config.method {
        Method::Fbs => fbs_run(config, problem, oracle, errors, sink),
        Method::PgBasic => pg_basic_run(config, problem, oracle, errors, sink),
        Method::PgAccelerated => pg_accel_run(config, problem, oracle, errors, sink),
    }
}

/// Forward-backward splitting with `η_k = β/(G k^r)`, `0 < r < 1`:
///
/// 1. `θ^(k+½) = θ^(k) − η_k (g^(k) + ξ^(k))`
/// 2. `θ^(k+1) = prox_{η_{k+1} ρ‖·‖₁}(θ^(k+½))`
///
/// starting from `θ^(1) = 0`.
pub fn fbs_run(
    config: &OptimizerConfig,
    problem: &Problem,
    oracle: &mut dyn GradientOracle,
    errors: &ErrorSource,
    sink: &dyn ProgressSink,
) -> Result<RunTrace> {
    expect_method(config, Method::Fbs)?;
    forward_backward(config, problem, oracle, errors, sink)
}

/// Basic proximal gradient: the forward-backward iteration with a constant
/// step `η = β/G` (optionally reduced by backtracking).
pub fn pg_basic_run(
    config: &OptimizerConfig,
    problem: &Problem,
    oracle: &mut dyn GradientOracle,
    errors: &ErrorSource,
    sink: &dyn ProgressSink,
) -> Result<RunTrace> {
    expect_method(config, Method::PgBasic)?;
    forward_backward(config, problem, oracle, errors, sink)
}

fn expect_method(config: &OptimizerConfig, method: Method) -> Result<()> {
    config.validate()?;
    if config.method != method {
        return Err(Error::invalid(format!("config is for {}, not {method}", config.method)));
    }
    Ok(())
}

struct Recorder<'a> {
    config: &'a OptimizerConfig,
    problem: &'a Problem,
    rows: Vec<TraceRow>,
    snapshots: Vec<(usize, IsingParams)>,
    snapshot_every: usize,
    sum_basic: IsingParams,
    sum_robust: IsingParams,
    sum_eta: f64,
    random_index: usize,
    random_point: Option<IsingParams>,
    boundedness: Option<Boundedness>,
}

impl<'a> Recorder<'a> {
    fn new(config: &'a OptimizerConfig, problem: &'a Problem) -> Self {
        let n = problem.n();
        let k_max = config.k_max;
        // Drawn up front, independently of anything the run observes.
        let mut rng = seed::rng(seed::derive(config.seed, &[seed::label("random-output")]));
        let boundedness = match (problem.d, &problem.reference) {
            (Some(d), Some(_)) => Some(Boundedness {
                d_bound: d,
                max_distance: 0.0,
                violations: 0,
            }),
            _ => None,
        };
        Recorder {
            config,
            problem,
            rows: Vec::with_capacity(k_max),
            snapshots: Vec::new(),
            snapshot_every: k_max.div_ceil(100),
            sum_basic: IsingParams::zeros(n),
            sum_robust: IsingParams::zeros(n),
            sum_eta: 0.0,
            random_index: rng.random_range(1..=k_max),
            random_point: None,
            boundedness,
        }
    }

    /// Evaluates the objective at the visited point; fails on overflow.
    fn objective(&self, k: usize, theta: &IsingParams) -> Result<f64> {
        let f = self.problem.objective(theta)?;
        if f.is_finite() {
            Ok(f)
        } else {
            Err(Error::NonFinite {
                k,
                trace: Box::new(self.partial()),
            })
        }
    }

    fn visit(&mut self, k: usize, theta: &IsingParams, row: TraceRow) {
        self.rows.push(row);
        self.sum_basic.axpy(1.0, theta);
        self.sum_robust.axpy(row.eta, theta);
        self.sum_eta += row.eta;
        if k == self.random_index {
            self.random_point = Some(theta.clone());
        }
        if self.config.trace_mode == TraceMode::Full && (k - 1).is_multiple_of(self.snapshot_every) {
            self.snapshots.push((k, theta.clone()));
        }
        if let (Some(b), Some(reference)) = (self.boundedness.as_mut(), &self.problem.reference) {
            let dist = theta.distance(reference);
            b.max_distance = b.max_distance.max(dist);
            if dist > b.d_bound {
                b.violations += 1;
            }
        }
    }

    fn partial(&self) -> RunTrace {
        RunTrace {
            config: self.config.clone(),
            g: self.problem.g,
            rows: self.rows.clone(),
            snapshots: self.snapshots.clone(),
            outputs: None,
            error_aggregate: None,
            boundedness: self.boundedness,
        }
    }

    fn finish(self, last: IsingParams, with_robust: bool, aggregate: Option<AggregateKind>) -> Result<RunTrace> {
        let k_max = self.rows.len();
        let point = |params: IsingParams| -> Result<OutputPoint> {
            let objective = self.problem.objective(&params)?;
            Ok(OutputPoint { params, objective })
        };
        let mut basic = self.sum_basic.clone();
        basic.scale(1.0 / k_max as f64);
        let robust = if with_robust {
            let mut r = self.sum_robust.clone();
            r.scale(1.0 / self.sum_eta);
            Some(point(r)?)
        } else {
            None
        };
        let random = self
            .random_point
            .clone()
            .expect("random index lies within the iteration budget");
        let outputs = FinalOutputs {
            robust,
            basic: point(basic)?,
            random: point(random)?,
            random_index: self.random_index,
            last: point(last)?,
        };
        let xi: Option<Vec<f64>> = self.rows.iter().map(|r| r.xi_norm).collect();
        let error_aggregate = match (xi, aggregate) {
            (Some(xi), Some(kind)) => Some(pg_error_aggregate(kind, &xi)?),
            (Some(xi), None) => {
                let w = WeightFamily::Robust { r: self.config.r }.weights(k_max)?;
                Some(error_term(&w, &xi)?)
            }
            _ => None,
        };
        Ok(RunTrace {
            config: self.config.clone(),
            g: self.problem.g,
            rows: self.rows,
            snapshots: self.snapshots,
            outputs: Some(outputs),
            error_aggregate,
            boundedness: self.boundedness,
        })
    }
}

/// Takes one proximal step from `from` along `grad`, halving `eta` until the
/// quadratic upper bound holds when backtracking is on. Returns the new point
/// and the step used.
fn prox_step(
    problem: &Problem,
    from: &IsingParams,
    grad: &IsingParams,
    eta: f64,
    threshold_eta: f64,
    backtracking: bool,
) -> Result<(IsingParams, f64)> {
    let step = |eta: f64, threshold_eta: f64| {
        let mut next = from.clone();
        next.axpy(-eta, grad);
        prox_l1_in_place(&mut next, threshold_eta * problem.rho);
        next
    };
    if !backtracking {
        return Ok((step(eta, threshold_eta), eta));
    }
    let base = problem.smooth(from)?;
    let mut eta = eta;
    for _ in 0..60 {
        let next = step(eta, eta);
        let mut diff = next.clone();
        diff.axpy(-1.0, from);
        let bound = base + grad.dot(&diff) + diff.norm2().powi(2) / (2.0 * eta);
        if problem.smooth(&next)? <= bound + 1e-12 * base.abs().max(1.0) {
            return Ok((next, eta));
        }
        eta *= 0.5;
    }
    Ok((step(eta, eta), eta))
}

fn forward_backward(
    config: &OptimizerConfig,
    problem: &Problem,
    oracle: &mut dyn GradientOracle,
    errors: &ErrorSource,
    sink: &dyn ProgressSink,
) -> Result<RunTrace> {
    let constant = config.method == Method::PgBasic;
    let backtracking = constant && config.backtracking;
    let step = |k: usize| step_size(k, config.beta, problem.g, config.r);
    let mut rec = Recorder::new(config, problem);
    let mut theta = IsingParams::zeros(problem.n());
    let mut eta = step(1);
    for k in 1..=config.k_max {
        let objective = rec.objective(k, &theta)?;
        if !constant {
            eta = step(k);
        }
        let og = errors.apply(k, oracle.gradient(problem, &theta, k)?);
        let eta_next = if constant { eta } else { step(k + 1) };
        let (next, used) = prox_step(problem, &theta, &og.grad, eta, eta_next, backtracking)?;
        rec.visit(
            k,
            &theta,
            TraceRow {
                k,
                objective,
                eta: used,
                xi_norm: og.xi_norm,
                s_k: og.samples,
            },
        );
        eta = used;
        theta = next;
        sink.iteration(config.run_id, k, objective);
    }
    sink.finished(config.run_id, config.k_max);
    let aggregate = constant.then_some(AggregateKind::Basic);
    rec.finish(theta, !constant, aggregate)
}

/// Accelerated proximal gradient with the standard momentum sequence
/// `t_1 = 1`, `t_{k+1} = (1 + √(1 + 4t_k²))/2`:
///
/// `x^(k) = prox(y^(k) − η(g(y^(k)) + ξ^(k)))`,
/// `y^(k+1) = x^(k) + ((t_k − 1)/t_{k+1})(x^(k) − x^(k−1))`.
///
/// Row `k` of the trace records the objective at `x^(k−1)` (with `x^(0) = 0`)
/// and the error of the gradient taken at `y^(k)`.
pub fn pg_accel_run(
    config: &OptimizerConfig,
    problem: &Problem,
    oracle: &mut dyn GradientOracle,
    errors: &ErrorSource,
    sink: &dyn ProgressSink,
) -> Result<RunTrace> {
    expect_method(config, Method::PgAccelerated)?;
    let mut rec = Recorder::new(config, problem);
    let n = problem.n();
    let mut x_prev = IsingParams::zeros(n);
    let mut y = IsingParams::zeros(n);
    let mut t = 1.0_f64;
    let mut eta = step_size(1, config.beta, problem.g, 0.0);
    for k in 1..=config.k_max {
        let objective = rec.objective(k, &x_prev)?;
        let og = errors.apply(k, oracle.gradient(problem, &y, k)?);
        let (x, used) = prox_step(problem, &y, &og.grad, eta, eta, config.backtracking)?;
        rec.visit(
            k,
            &x_prev,
            TraceRow {
                k,
                objective,
                eta: used,
                xi_norm: og.xi_norm,
                s_k: og.samples,
            },
        );
        eta = used;
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let mut momentum = x.clone();
        momentum.axpy(-1.0, &x_prev);
        y = x.clone();
        y.axpy((t - 1.0) / t_next, &momentum);
        x_prev = x;
        t = t_next;
        sink.iteration(config.run_id, k, objective);
    }
    sink.finished(config.run_id, config.k_max);
    rec.finish(x_prev, false, Some(AggregateKind::Accelerated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{Dataset, EmpiricalMoments, Enumerator};
    use crate::optim::{ErrorInjector, ExactOracle, NoProgress, SampleSchedule, SamplerOracle};
    use crate::samplers::GibbsSampler;
    use std::sync::Mutex;

    fn small_problem(rho: f64) -> Problem {
        let truth = IsingParams::from_couplings(4, &[(0, 1, 0.6), (1, 2, -0.4), (2, 3, 0.5)], vec![0.0; 4]).unwrap();
        let data = Enumerator::default().sample(&truth, 200, 17).unwrap();
        Problem::new(EmpiricalMoments::from_dataset(&data), rho).unwrap()
    }

    #[test]
    fn fbs_trace_shape_and_determinism() {
        let problem = small_problem(0.1);
        let mut cfg = OptimizerConfig::fbs(0.1, 50);
        cfg.seed = 3;
        let gibbs = GibbsSampler::default();
        let mk = || SamplerOracle {
            sampler: &gibbs,
            schedule: SampleSchedule::Constant { c: 10.0 },
            seed: 8,
            track_error: false,
        };
        let a = fbs_run(&cfg, &problem, &mut mk(), &ErrorSource::None, &NoProgress).unwrap();
        let b = fbs_run(&cfg, &problem, &mut mk(), &ErrorSource::None, &NoProgress).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
        assert!(a.rows.iter().all(|r| r.objective.is_finite() && r.s_k == 10));
        assert!(a.etas().windows(2).all(|w| w[1] <= w[0]));
        let nlog2 = 4.0 * std::f64::consts::LN_2;
        assert!((a.rows[0].objective - nlog2).abs() < 1e-12);
        let out = a.outputs.as_ref().unwrap();
        assert!(out.robust.is_some());
        assert!((1..=50).contains(&out.random_index));
    }

    #[test]
    fn huge_rho_keeps_couplings_zero() {
        let problem = small_problem(50.0);
        let mut cfg = OptimizerConfig::fbs(50.0, 40);
        cfg.trace_mode = TraceMode::Full;
        let trace = fbs_run(&cfg, &problem, &mut ExactOracle, &ErrorSource::None, &NoProgress).unwrap();
        assert!(trace.snapshots.iter().all(|(_, p)| p.l1_w() == 0.0));
        let last = &trace.outputs.as_ref().unwrap().last.params;
        assert_eq!(last.l1_w(), 0.0);
        assert!(last.l1_b() > 0.0);
    }

    #[test]
    fn full_mode_snapshot_cadence() {
        let problem = small_problem(0.1);
        let mut cfg = OptimizerConfig::fbs(0.1, 250);
        cfg.trace_mode = TraceMode::Full;
        let trace = fbs_run(&cfg, &problem, &mut ExactOracle, &ErrorSource::None, &NoProgress).unwrap();
        let ks: Vec<usize> = trace.snapshots.iter().map(|(k, _)| *k).collect();
        assert_eq!(ks.first(), Some(&1));
        assert!(ks.windows(2).all(|w| w[1] - w[0] == 3));
        cfg.trace_mode = TraceMode::Lean;
        let lean = fbs_run(&cfg, &problem, &mut ExactOracle, &ErrorSource::None, &NoProgress).unwrap();
        assert!(lean.snapshots.is_empty());
        assert_eq!(lean.rows, trace.rows);
    }

    #[test]
    fn jensen_consistency_of_averages() {
        let problem = small_problem(0.05);
        let cfg = OptimizerConfig::fbs(0.05, 300);
        let src = ErrorSource::Injected(ErrorInjector { c: 1.0, a: 0.51, seed: 2 });
        let trace = fbs_run(&cfg, &problem, &mut ExactOracle, &src, &NoProgress).unwrap();
        let out = trace.outputs.as_ref().unwrap();
        let f = trace.objectives();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        assert!(out.basic.objective <= mean + 1e-9);
        let etas = trace.etas();
        let wmean = f.iter().zip(&etas).map(|(f, e)| f * e).sum::<f64>() / etas.iter().sum::<f64>();
        assert!(out.robust.as_ref().unwrap().objective <= wmean + 1e-9);
    }

    #[test]
    fn pg_aggregates_match_closed_forms() {
        let problem = small_problem(0.1);
        let k = 40;
        let c = 0.3;
        let src = ErrorSource::Injected(ErrorInjector { c, a: 0.0, seed: 5 });
        let zero = ErrorSource::None;

        let cfg = OptimizerConfig::pg(Method::PgBasic, 0.1, k);
        let t = pg_basic_run(&cfg, &problem, &mut ExactOracle, &zero, &NoProgress).unwrap();
        assert_eq!(t.error_aggregate, Some(0.0));
        let t = pg_basic_run(&cfg, &problem, &mut ExactOracle, &src, &NoProgress).unwrap();
        assert!((t.error_aggregate.unwrap() - k as f64 * c * c).abs() < 1e-10);

        let cfg = OptimizerConfig::pg(Method::PgAccelerated, 0.1, k);
        let t = pg_accel_run(&cfg, &problem, &mut ExactOracle, &zero, &NoProgress).unwrap();
        assert_eq!(t.error_aggregate, Some(0.0));
        let t = pg_accel_run(&cfg, &problem, &mut ExactOracle, &src, &NoProgress).unwrap();
        assert!((t.error_aggregate.unwrap() - (k * k) as f64 * c * c).abs() < 1e-9);
    }

    #[test]
    fn method_mismatch_is_rejected() {
        let problem = small_problem(0.1);
        let cfg = OptimizerConfig::pg(Method::PgBasic, 0.1, 5);
        assert!(fbs_run(&cfg, &problem, &mut ExactOracle, &ErrorSource::None, &NoProgress).is_err());
        assert!(pg_accel_run(&cfg, &problem, &mut ExactOracle, &ErrorSource::None, &NoProgress).is_err());
        assert!(run(&cfg, &problem, &mut ExactOracle, &ErrorSource::None, &NoProgress).is_ok());
    }

    #[test]
    fn non_finite_objective_aborts_with_prefix() {
        // Errors near the float limit push the iterate past it within a few steps.
        let data = Dataset::new(vec![vec![1, 1, -1], vec![1, -1, -1], vec![-1, 1, 1]]).unwrap();
        let problem = Problem::new(EmpiricalMoments::from_dataset(&data), 0.01).unwrap();
        let cfg = OptimizerConfig::pg(Method::PgBasic, 0.01, 50);
        let src = ErrorSource::Injected(ErrorInjector { c: 1e308, a: 0.0, seed: 1 });
        match pg_basic_run(&cfg, &problem, &mut ExactOracle, &src, &NoProgress) {
            Err(Error::NonFinite { k, trace }) => {
                assert!(k >= 2);
                assert_eq!(trace.rows.len(), k - 1);
                assert!(trace.outputs.is_none());
            }
            other => panic!("expected non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn progress_events_are_keyed_by_run() {
        struct Collect(Mutex<Vec<(u64, usize)>>);
        impl ProgressSink for Collect {
            fn iteration(&self, run_id: u64, k: usize, _objective: f64) {
                self.0.lock().unwrap().push((run_id, k));
            }
        }
        let problem = small_problem(0.1);
        let sink = Collect(Mutex::new(Vec::new()));
        let mut cfg = OptimizerConfig::fbs(0.1, 5);
        cfg.run_id = 42;
        fbs_run(&cfg, &problem, &mut ExactOracle, &ErrorSource::None, &sink).unwrap();
        let events = sink.0.into_inner().unwrap();
        assert_eq!(events, (1..=5).map(|k| (42, k)).collect::<Vec<_>>());
    }

    #[test]
    fn backtracking_only_shrinks_step() {
        let problem = small_problem(0.05);
        let mut cfg = OptimizerConfig::pg(Method::PgBasic, 0.05, 30);
        cfg.beta = 50.0;
        cfg.backtracking = true;
        let t = pg_basic_run(&cfg, &problem, &mut ExactOracle, &ErrorSource::None, &NoProgress).unwrap();
        let etas = t.etas();
        assert!(etas.windows(2).all(|w| w[1] <= w[0]));
        assert!(etas[0] <= 50.0 / problem.g);
        let f = t.objectives();
        assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
