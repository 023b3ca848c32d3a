use anyhow::Context;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::config::ExperimentConfig;
use sparse_ising::optim::{
    run, solve_reference, ErrorSource, ExactOracle, GradientOracle, Method, OptimizerConfig, Problem, ProgressSink,
    ReferenceConfig, RunTrace, SampleSchedule, SamplerOracle,
};
use sparse_ising::seed;
use sparse_ising::{Dataset, EmpiricalMoments, Enumerator, IsingParams, Sampler};

/// Each unordered pair becomes an edge with probability `density`, with a
/// weight drawn uniformly from `weight_range`; fields are zero.
pub fn gen_ground_truth(n: usize, density: f64, weight_range: [f64; 2], seed: u64) -> sparse_ising::Result<IsingParams> {
    if !(0.0..=1.0).contains(&density) {
        return Err(sparse_ising::Error::InvalidInput(format!("density must lie in [0, 1], got {density}")));
    }
    let mut rng = seed::rng(seed);
    let [lo, hi] = weight_range;
    let mut couplings = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < density {
                let w = if hi > lo { rng.random_range(lo..hi) } else { lo };
                couplings.push((i, j, w));
            }
        }
    }
    IsingParams::from_couplings(n, &couplings, vec![0.0; n])
}

pub fn gen_dataset(params: &IsingParams, t: usize, seed: u64) -> sparse_ising::Result<Dataset> {
    Enumerator::default().sample(params, t, seed)
}

/// A column of the sweep: an optimizer fed by one gradient source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub index: usize,
    pub method: Method,
    /// `None` for exact gradients.
    pub schedule: Option<SampleSchedule>,
}

impl CellSpec {
    pub fn label(&self) -> String {
        match &self.schedule {
            Some(s) => format!("{}/{}", self.method, s.label()),
            None => format!("{}/exact", self.method),
        }
    }
}

pub fn cell_specs(config: &ExperimentConfig) -> Vec<CellSpec> {
    let mut cells = Vec::new();
    if config.include_reference {
        cells.push(CellSpec {
            index: 0,
            method: Method::Fbs,
            schedule: None,
        });
    }
    for &method in &config.methods {
        for &schedule in &config.schedules {
            cells.push(CellSpec {
                index: cells.len(),
                method,
                schedule: Some(schedule),
            });
        }
    }
    cells
}

pub fn truth_seed(master: u64, rep: usize) -> u64 {
    seed::derive(master, &[rep as u64, seed::label("truth")])
}

pub fn data_seed(master: u64, rep: usize) -> u64 {
    seed::derive(master, &[rep as u64, seed::label("data")])
}

pub fn oracle_seed(master: u64, rep: usize, cell: usize) -> u64 {
    seed::derive(master, &[rep as u64, cell as u64, seed::label("oracle")])
}

pub fn run_seed(master: u64, rep: usize, cell: usize) -> u64 {
    seed::derive(master, &[rep as u64, cell as u64, seed::label("run")])
}

/// Per-repetition ground truth, data and high-precision optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepSummary {
    pub rep: usize,
    pub truth_seed: u64,
    pub data_seed: u64,
    pub truth: IsingParams,
    pub emp: EmpiricalMoments,
    pub f_star: f64,
    pub optimum: IsingParams,
    pub optimum_residual: f64,
    pub optimum_converged: bool,
    pub d: Option<f64>,
    pub g: f64,
    pub kl_optimum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub rep: usize,
    pub spec: CellSpec,
    pub oracle_seed: u64,
    pub run_seed: u64,
    pub trace: Option<RunTrace>,
    /// `KL(truth ‖ learned)` at the run's primary output.
    pub kl_to_truth: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    pub version: String,
    pub reps: Vec<RepSummary>,
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn save(&self, path: &Path) -> anyhow::Result<()> {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        serde_json::to_writer(std::io::BufWriter::new(file), self).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        serde_json::from_reader(std::io::BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn rep(&self, rep: usize) -> Option<&RepSummary> {
        self.reps.iter().find(|r| r.rep == rep)
    }
}

#[derive(Serialize)]
struct ManifestCell {
    rep: usize,
    cell: usize,
    label: String,
    oracle_seed: u64,
    run_seed: u64,
    failed: bool,
}

#[derive(Serialize)]
struct ManifestRep {
    rep: usize,
    truth_seed: u64,
    data_seed: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    config: &'a ExperimentConfig,
    reps: Vec<ManifestRep>,
    cells: Vec<ManifestCell>,
}

/// Configuration, every derived seed, and the tool version.
pub fn manifest_json(sweep: &SweepResult) -> anyhow::Result<String> {
    let manifest = Manifest {
        version: &sweep.version,
        config: &sweep.config,
        reps: sweep
            .reps
            .iter()
            .map(|r| ManifestRep {
                rep: r.rep,
                truth_seed: r.truth_seed,
                data_seed: r.data_seed,
            })
            .collect(),
        cells: sweep
            .cells
            .iter()
            .map(|c| ManifestCell {
                rep: c.rep,
                cell: c.spec.index,
                label: c.spec.label(),
                oracle_seed: c.oracle_seed,
                run_seed: c.run_seed,
                failed: c.error.is_some(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&manifest)?)
}

/// Logs progress at roughly ten points per run.
pub struct LogProgress {
    pub k_max: usize,
}

impl ProgressSink for LogProgress {
    fn iteration(&self, run_id: u64, k: usize, objective: f64) {
        let every = self.k_max.div_ceil(10).max(1);
        if k.is_multiple_of(every) {
            log::debug!("run {run_id:#x}: k = {k}, objective = {objective:.6}");
        }
    }

    fn finished(&self, run_id: u64, iterations: usize) {
        log::debug!("run {run_id:#x} finished after {iterations} iterations");
    }
}

fn setup_rep(config: &ExperimentConfig, rep: usize) -> anyhow::Result<RepSummary> {
    let truth_seed = truth_seed(config.master_seed, rep);
    let data_seed = data_seed(config.master_seed, rep);
    let truth = gen_ground_truth(config.n, config.density, config.weight_range, truth_seed)?;
    let data = gen_dataset(&truth, config.t_samples, data_seed)?;
    let emp = EmpiricalMoments::from_dataset(&data);
    let problem = Problem::new(emp.clone(), config.rho)?;
    let reference = solve_reference(
        &problem,
        &ReferenceConfig {
            tol: config.reference_tol,
            ..ReferenceConfig::default()
        },
    )?;
    if !reference.converged {
        log::warn!(
            "repetition {rep}: reference solve stopped at residual {:.3e}",
            reference.residual
        );
    }
    let kl_optimum = problem.enumerator.kl(&truth, &reference.params)?;
    Ok(RepSummary {
        rep,
        truth_seed,
        data_seed,
        truth,
        emp,
        f_star: reference.objective,
        optimum: reference.params,
        optimum_residual: reference.residual,
        optimum_converged: reference.converged,
        d: problem.d,
        g: problem.g,
        kl_optimum,
    })
}

fn run_cell(
    config: &ExperimentConfig,
    rep: &RepSummary,
    spec: &CellSpec,
    sampler: &dyn Sampler,
    sink: &dyn ProgressSink,
) -> CellResult {
    let oracle_seed = oracle_seed(config.master_seed, rep.rep, spec.index);
    let run_seed = run_seed(config.master_seed, rep.rep, spec.index);
    let outcome = (|| -> anyhow::Result<(RunTrace, f64)> {
        let problem = Problem::new(rep.emp.clone(), config.rho)?.with_reference(rep.optimum.clone());
        let mut opt = match spec.method {
            Method::Fbs => OptimizerConfig {
                r: config.r,
                ..OptimizerConfig::fbs(config.rho, config.k_max)
            },
            m => OptimizerConfig::pg(m, config.rho, config.k_max),
        };
        opt.beta = config.beta;
        opt.seed = run_seed;
        opt.trace_mode = config.trace_mode;
        opt.run_id = ((rep.rep as u64) << 32) | spec.index as u64;
        let mut exact = ExactOracle;
        let mut sampled;
        let oracle: &mut dyn GradientOracle = match spec.schedule {
            None => &mut exact,
            Some(schedule) => {
                sampled = SamplerOracle {
                    sampler,
                    schedule,
                    seed: oracle_seed,
                    track_error: config.track_error,
                };
                &mut sampled
            }
        };
        let trace = run(&opt, &problem, oracle, &ErrorSource::None, sink)?;
        let primary = trace.primary().expect("completed runs carry outputs");
        let kl = problem.enumerator.kl(&rep.truth, &primary.params)?;
        Ok((trace, kl))
    })();
    match outcome {
        Ok((trace, kl)) => CellResult {
            rep: rep.rep,
            spec: spec.clone(),
            oracle_seed,
            run_seed,
            trace: Some(trace),
            kl_to_truth: Some(kl),
            error: None,
        },
        Err(err) => {
            log::warn!("repetition {} cell {}: {err:#}", rep.rep, spec.label());
            CellResult {
                rep: rep.rep,
                spec: spec.clone(),
                oracle_seed,
                run_seed,
                trace: None,
                kl_to_truth: None,
                error: Some(format!("{err:#}")),
            }
        }
    }
}

/// Runs every repetition × cell. A failing cell is recorded and the sweep
/// continues; failures while generating a repetition's data are fatal.
pub fn run_sweep(config: &ExperimentConfig) -> anyhow::Result<SweepResult> {
    config.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build()?;
    let sampler = config.build_sampler();
    let specs = cell_specs(config);
    let sink = LogProgress { k_max: config.k_max };
    pool.install(|| {
        let reps: Vec<RepSummary> = (0..config.repetitions)
            .into_par_iter()
            .map(|rep| setup_rep(config, rep).with_context(|| format!("repetition {rep}")))
            .collect::<anyhow::Result<_>>()?;
        log::info!("{} repetitions prepared, running {} cells each", reps.len(), specs.len());
        let jobs: Vec<(&RepSummary, &CellSpec)> = reps.iter().flat_map(|r| specs.iter().map(move |s| (r, s))).collect();
        let cells: Vec<CellResult> = jobs
            .into_par_iter()
            .map(|(rep, spec)| run_cell(config, rep, spec, sampler.as_ref(), &sink))
            .collect();
        Ok(SweepResult {
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            reps,
            cells,
        })
    })
}
