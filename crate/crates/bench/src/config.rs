use serde::{Deserialize, Serialize};
use std::path::Path;

use anyhow::{bail, Context};
use sparse_ising::optim::{Method, SampleSchedule, TraceMode};
use sparse_ising::samplers::{GibbsSampler, ImportanceSampler, MeanFieldConfig, Sampler, Trial};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerChoice {
    #[default]
    Gibbs,
    Importance,
}

/// Everything needed to rerun a sweep bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub repetitions: usize,
    pub density: f64,
    pub weight_range: [f64; 2],
    pub t_samples: usize,
    pub rho: f64,
    pub beta: f64,
    /// Step exponent of forward-backward splitting.
    pub r: f64,
    pub gibbs_sweeps: usize,
    pub sampler: SamplerChoice,
    pub methods: Vec<Method>,
    pub schedules: Vec<SampleSchedule>,
    pub k_max: usize,
    pub master_seed: u64,
    /// Also run forward-backward splitting with exact gradients.
    pub include_reference: bool,
    /// Measure `‖ξ^(k)‖₂` against exact moments at every iteration.
    pub track_error: bool,
    pub trace_mode: TraceMode,
    pub reference_tol: f64,
    /// Worker threads; all available cores when unset.
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 15,
            repetitions: 10,
            density: 0.5,
            weight_range: [-1.0, 1.0],
            t_samples: 50,
            rho: 1.0 / 16.0,
            beta: 1.0,
            r: 0.5,
            gibbs_sweeps: 5,
            sampler: SamplerChoice::Gibbs,
            methods: vec![Method::Fbs, Method::PgBasic, Method::PgAccelerated],
            schedules: vec![
                SampleSchedule::Constant { c: 10.0 },
                SampleSchedule::Constant { c: 100.0 },
                SampleSchedule::Logarithmic { c: 10.0 },
                SampleSchedule::Polynomial { c: 1.0, p: 0.51 },
                SampleSchedule::Polynomial { c: 1.0, p: 1.01 },
            ],
            k_max: 1000,
            master_seed: 0,
            include_reference: true,
            track_error: false,
            trace_mode: TraceMode::Lean,
            reference_tol: 1e-9,
            workers: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: ExperimentConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(config)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.n == 0 {
            bail!("n must be at least 1");
        }
        if self.repetitions == 0 {
            bail!("repetitions must be at least 1");
        }
        if !(self.density >= 0.0 && self.density <= 1.0) {
            bail!("density must lie in [0, 1], got {}", self.density);
        }
        if !(self.weight_range[0] <= self.weight_range[1]) {
            bail!("weight range must be ordered, got {:?}", self.weight_range);
        }
        if self.t_samples == 0 {
            bail!("t_samples must be at least 1");
        }
        if !(self.rho > 0.0 && self.beta > 0.0) {
            bail!("rho and beta must be positive");
        }
        if self.k_max == 0 {
            bail!("k_max must be at least 1");
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            bail!("r must lie in (0, 1), got {}", self.r);
        }
        for s in &self.schedules {
            s.validate()?;
        }
        Ok(())
    }

    pub fn build_sampler(&self) -> Box<dyn Sampler> {
        match self.sampler {
            SamplerChoice::Gibbs => Box::new(GibbsSampler {
                sweeps: self.gibbs_sweeps,
                mean_field: MeanFieldConfig::default(),
            }),
            SamplerChoice::Importance => Box::new(ImportanceSampler { trial: Trial::default() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_experiment() {
        let c = ExperimentConfig::default();
        assert_eq!((c.n, c.repetitions, c.t_samples, c.gibbs_sweeps), (15, 10, 50, 5));
        assert_eq!((c.density, c.rho, c.beta), (0.5, 0.0625, 1.0));
        assert_eq!(c.weight_range, [-1.0, 1.0]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_json_keeps_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"n": 6, "schedules": [{"kind": "logarithmic", "c": 10}]}"#).unwrap();
        assert_eq!(c.n, 6);
        assert_eq!(c.repetitions, 10);
        assert_eq!(c.schedules, vec![SampleSchedule::Logarithmic { c: 10.0 }]);
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let c = ExperimentConfig {
            density: 1.5,
            ..ExperimentConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.schedules = vec![SampleSchedule::Constant { c: 0.0 }];
        assert!(c.validate().is_err());
    }
}
