use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};

use sparse_ising::analysis::{render_table, Setting};
use sparse_ising::optim::{Method, SampleSchedule};
use sparse_ising::samplers::measure_bias_variance;
use sparse_ising::{Enumerator, IsingParams};
use sparse_ising_bench::experiment::manifest_json;
use sparse_ising_bench::{
    gen_dataset, gen_ground_truth, run_sweep, verify_bounds, write_report, ExperimentConfig, SamplerChoice, SweepResult,
    VerifyOptions,
};

#[derive(Parser)]
#[command(name = "ising-bench", version, about = "Sparse Ising learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random sparse ground-truth model.
    GenModel {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a dataset from a model by exact enumeration.
    GenData {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 50)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the repetition × method × schedule sweep.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated methods: fbs, pg-basic, pg-accelerated.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        /// Comma-separated schedules such as const-10, log-10, poly-1-0.51.
        #[arg(long, value_delimiter = ',')]
        schedules: Option<Vec<SampleSchedule>>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        track_error: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check recorded runs against the convergence bounds.
    Verify {
        /// Directory written by `run`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Sampler bias constant; together with --variance enables the error-term check.
        #[arg(long, requires = "variance")]
        bias: Option<f64>,
        #[arg(long, requires = "bias")]
        variance: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
        /// Exit with an error when any check fails.
        #[arg(long)]
        strict: bool,
    },
    /// Write curves, summary statistics and plots for a finished run.
    Report {
        #[arg(long)]
        run: PathBuf,
        /// Defaults to `<run>/report`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure sampler error against exact moments over a grid of sample sizes.
    BiasVariance {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "8,32,128,512")]
        grid: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the required error orders and sample growth per convergence rate.
    Tables,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    sampler: Option<SamplerChoice>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(n) = self.n {
            c.n = n;
        }
        if let Some(d) = self.density {
            c.density = d;
        }
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
        if let Some(s) = self.sampler {
            c.sampler = s;
        }
        Ok(c)
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GenModel { common, out } => {
            let c = common.resolve()?;
            c.validate()?;
            let model = gen_ground_truth(c.n, c.density, c.weight_range, c.master_seed)?;
            write(&out, &model.to_json()?)?;
            log::info!("{} variables, {} edges -> {}", model.n(), model.edge_count(), out.display());
        }
        Command::GenData { model, t, seed, out } => {
            let params = IsingParams::load(&model).with_context(|| format!("loading {}", model.display()))?;
            let data = gen_dataset(&params, t, seed)?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            data.save(&out).with_context(|| format!("writing {}", out.display()))?;
            log::info!("{} samples -> {}", data.len(), out.display());
        }
        Command::Run {
            common,
            methods,
            schedules,
            repetitions,
            k_max,
            workers,
            track_error,
            out,
        } => {
            let mut c = common.resolve()?;
            if let Some(m) = methods {
                c.methods = m;
            }
            if let Some(s) = schedules {
                c.schedules = s;
            }
            if let Some(r) = repetitions {
                c.repetitions = r;
            }
            if let Some(k) = k_max {
                c.k_max = k;
            }
            if workers.is_some() {
                c.workers = workers;
            }
            c.track_error |= track_error;
            let sweep = run_sweep(&c)?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            sweep.save(&out.join("sweep.json"))?;
            write(&out.join("manifest.json"), &manifest_json(&sweep)?)?;
            let failed = sweep.cells.iter().filter(|c| c.error.is_some()).count();
            log::info!("{} cells ({failed} failed) -> {}", sweep.cells.len(), out.display());
        }
        Command::Verify {
            run,
            epsilon,
            delta,
            bias,
            variance,
            m,
            strict,
        } => {
            let sweep = SweepResult::load(&run.join("sweep.json"))?;
            let opts = VerifyOptions {
                epsilon,
                delta,
                bias_variance: bias.zip(variance),
                m,
            };
            let report = verify_bounds(&sweep, &opts);
            for note in &report.skipped {
                log::warn!("skipped: {note}");
            }
            for g in &report.groups {
                println!(
                    "{} {} {}: {}/{} violations (allowed fraction {:.3})",
                    if g.pass { "PASS" } else { "FAIL" },
                    g.bound,
                    g.label,
                    g.violations,
                    g.runs,
                    g.allowed_fraction
                );
            }
            let failures = report.failures();
            println!("{} checks, {failures} failures", report.checks.len() + report.groups.len());
            write(&run.join("verify.json"), &serde_json::to_string_pretty(&report)?)?;
            if strict && failures > 0 {
                bail!("{failures} bound checks failed");
            }
        }
        Command::Report { run, out } => {
            let sweep = SweepResult::load(&run.join("sweep.json"))?;
            let out = out.unwrap_or_else(|| run.join("report"));
            let summary = write_report(&sweep, &out)?;
            for g in &summary.groups {
                println!(
                    "{:<28} last {:.5} ± {:.5}  KL {:.4}  ({} runs, {} failed)",
                    g.label, g.final_last.mean, g.final_last.std, g.kl_to_truth.mean, g.runs, g.failures
                );
            }
        }
        Command::BiasVariance { common, grid, reps, out } => {
            let c = common.resolve()?;
            c.validate()?;
            let model = gen_ground_truth(c.n, c.density, c.weight_range, c.master_seed)?;
            let sampler = c.build_sampler();
            let report = measure_bias_variance(sampler.as_ref(), &model, &grid, reps, c.master_seed, &Enumerator::default())?;
            fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let stem = out.join(format!("bias-variance-{}", report.sampler));
            let csv_path = stem.with_extension("csv");
            let file = fs::File::create(&csv_path).with_context(|| format!("creating {}", csv_path.display()))?;
            report.write_csv(file)?;
            write(&stem.with_extension("json"), &report.sidecar_json()?)?;
            for row in &report.rows {
                println!("S = {:>5}  mean ‖ξ‖ = {:.5}  var = {:.6}", row.s, row.mean_err, row.var_err);
            }
            println!("B = {:.4}  V = {:.4}", report.b_hat, report.v_hat);
        }
        Command::Tables => {
            println!("Required order of ‖ξ^(k)‖ (deterministic errors):\n{}", render_table(Setting::Deterministic));
            println!("Required growth of S_k (biased stochastic errors):\n{}", render_table(Setting::Stochastic));
        }
    }
    Ok(())
}
