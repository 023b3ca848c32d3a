use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{Averaging, OptimizerConfig};
use crate::error::Result;
use crate::ising::IsingParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMode {
    /// Objectives, step sizes and error norms only.
    #[default]
    Lean,
    /// Additionally snapshot the iterate every `⌈K/100⌉` steps.
    Full,
}

/// One iteration: the objective at the visited point `θ^(k)` and the step
/// taken from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub objective: f64,
    pub eta: f64,
    pub xi_norm: Option<f64>,
    pub s_k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPoint {
    pub params: IsingParams,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalOutputs {
    /// `Σ η_k θ^(k) / Σ η_k`; FBS only.
    pub robust: Option<OutputPoint>,
    /// `Σ θ^(k) / K`.
    pub basic: OutputPoint,
    /// `θ^(k)` for a uniformly drawn `k`.
    pub random: OutputPoint,
    pub random_index: usize,
    /// The iterate after the final step.
    pub last: OutputPoint,
}

/// Distance of visited points from the reference optimum versus the solution
/// radius `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Boundedness {
    pub d_bound: f64,
    pub max_distance: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub config: OptimizerConfig,
    pub g: f64,
    pub rows: Vec<TraceRow>,
    /// `(k, θ^(k))` pairs in full trace mode.
    pub snapshots: Vec<(usize, IsingParams)>,
    pub outputs: Option<FinalOutputs>,
    /// Error aggregate of the PG analysis, when every `‖ξ^(k)‖` is known.
    pub error_aggregate: Option<f64>,
    pub boundedness: Option<Boundedness>,
}

#[derive(Serialize)]
struct OutputSummary {
    objective: f64,
    l1_w: f64,
    edges: usize,
}

#[derive(Serialize)]
struct TraceHeader<'a> {
    config: &'a OptimizerConfig,
    g: f64,
    iterations: usize,
    random_index: Option<usize>,
    outputs: Option<serde_json::Value>,
    error_aggregate: Option<f64>,
    boundedness: Option<Boundedness>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.eta).collect()
    }

    /// All `‖ξ^(k)‖₂`, if each was measured.
    pub fn xi_norms(&self) -> Option<Vec<f64>> {
        self.rows.iter().map(|r| r.xi_norm).collect()
    }

    /// The output selected by the config's averaging mode.
    pub fn primary(&self) -> Option<&OutputPoint> {
        let out = self.outputs.as_ref()?;
        match self.config.averaging {
            Averaging::Robust => out.robust.as_ref().or(Some(&out.basic)),
            Averaging::Basic => Some(&out.basic),
            Averaging::Random => Some(&out.random),
            Averaging::Last => Some(&out.last),
        }
    }

    /// `π_η(K') = Σ_{k≤K'} η_k F(θ^(k)) / Σ_{k≤K'} η_k − F*`.
    pub fn weighted_regret(&self, f_star: f64, upto: usize) -> f64 {
        let rows = &self.rows[..upto.min(self.rows.len())];
        let num: f64 = rows.iter().map(|r| r.eta * r.objective).sum();
        let den: f64 = rows.iter().map(|r| r.eta).sum();
        num / den - f_star
    }

    /// `π(K') = Σ_{k≤K'} F(θ^(k)) / K' − F*`.
    pub fn average_regret(&self, f_star: f64, upto: usize) -> f64 {
        let rows = &self.rows[..upto.min(self.rows.len())];
        rows.iter().map(|r| r.objective).sum::<f64>() / rows.len() as f64 - f_star
    }

    /// Per-iteration CSV with columns `k, objective, eta, xi_norm, s_k`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// JSON header: configuration, seeds, final outputs and bound checks.
    pub fn header_json(&self) -> Result<String> {
        let outputs = self.outputs.as_ref().map(|o| {
            let summary = |p: &OutputPoint| OutputSummary {
                objective: p.objective,
                l1_w: p.params.l1_w(),
                edges: p.params.edge_count(),
            };
            serde_json::json!({
                "robust": o.robust.as_ref().map(summary),
                "basic": summary(&o.basic),
                "random": summary(&o.random),
                "last": summary(&o.last),
                "primary_params": self.primary().map(|p| &p.params),
            })
        });
        let header = TraceHeader {
            config: &self.config,
            g: self.g,
            iterations: self.rows.len(),
            random_index: self.outputs.as_ref().map(|o| o.random_index),
            outputs,
            error_aggregate: self.error_aggregate,
            boundedness: self.boundedness,
        };
        Ok(serde_json::to_string_pretty(&header)?)
    }
}
