use anyhow::Context;
use plotters::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::experiment::{CellResult, SweepResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Stat {
    /// Mean and sample standard deviation.
    pub fn of(values: &[f64]) -> Stat {
        let count = values.len();
        if count == 0 {
            return Stat::default();
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Stat { mean, std, count }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: usize,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Objective and gap-to-optimum curves of one method/schedule pair across
/// repetitions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub runs: usize,
    pub failures: usize,
    pub final_robust: Option<Stat>,
    pub final_basic: Stat,
    pub final_random: Stat,
    pub final_last: Stat,
    pub kl_to_truth: Stat,
    #[serde(skip)]
    pub objective: Vec<CurveRow>,
    #[serde(skip)]
    pub gap: Vec<CurveRow>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub repetitions: usize,
    pub f_star: Stat,
    pub kl_optimum: Stat,
    pub groups: Vec<GroupSummary>,
}

fn curve(traces: &[Vec<f64>]) -> Vec<CurveRow> {
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let vals: Vec<f64> = traces.iter().filter_map(|t| t.get(i).copied()).collect();
            let s = Stat::of(&vals);
            CurveRow {
                k: i + 1,
                mean: s.mean,
                std: s.std,
                count: s.count,
            }
        })
        .collect()
}

pub fn summarize(sweep: &SweepResult) -> Summary {
    let mut by_label: BTreeMap<(usize, String), Vec<&CellResult>> = BTreeMap::new();
    for cell in &sweep.cells {
        by_label.entry((cell.spec.index, cell.spec.label())).or_default().push(cell);
    }
    let groups = by_label
        .into_iter()
        .map(|((_, label), cells)| {
            let done: Vec<&CellResult> = cells.iter().copied().filter(|c| c.trace.is_some()).collect();
            let outputs: Vec<_> = done
                .iter()
                .filter_map(|c| c.trace.as_ref().and_then(|t| t.outputs.as_ref()))
                .collect();
            let pick = |f: &dyn Fn(&sparse_ising::optim::FinalOutputs) -> f64| {
                Stat::of(&outputs.iter().map(|o| f(o)).collect::<Vec<_>>())
            };
            let robust: Vec<f64> = outputs.iter().filter_map(|o| o.robust.as_ref().map(|p| p.objective)).collect();
            let objectives: Vec<Vec<f64>> = done.iter().map(|c| c.trace.as_ref().unwrap().objectives()).collect();
            let gaps: Vec<Vec<f64>> = done
                .iter()
                .filter_map(|c| {
                    let f_star = sweep.rep(c.rep)?.f_star;
                    Some(c.trace.as_ref().unwrap().objectives().iter().map(|f| f - f_star).collect())
                })
                .collect();
            GroupSummary {
                label,
                runs: cells.len(),
                failures: cells.len() - done.len(),
                final_robust: (!robust.is_empty()).then(|| Stat::of(&robust)),
                final_basic: pick(&|o| o.basic.objective),
                final_random: pick(&|o| o.random.objective),
                final_last: pick(&|o| o.last.objective),
                kl_to_truth: Stat::of(&done.iter().filter_map(|c| c.kl_to_truth).collect::<Vec<_>>()),
                objective: curve(&objectives),
                gap: curve(&gaps),
            }
        })
        .collect();
    Summary {
        repetitions: sweep.reps.len(),
        f_star: Stat::of(&sweep.reps.iter().map(|r| r.f_star).collect::<Vec<_>>()),
        kl_optimum: Stat::of(&sweep.reps.iter().map(|r| r.kl_optimum).collect::<Vec<_>>()),
        groups,
    }
}

fn file_stem(label: &str) -> String {
    label.replace('/', "_")
}

fn write_curve(path: &Path, rows: &[CurveRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for row in rows {
        w.serialize(row).with_context(|| format!("writing {}", path.display()))?;
    }
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes per-cell traces, mean/std curves, `summary.json` and one SVG plot
/// per method under `out`.
pub fn write_report(sweep: &SweepResult, out: &Path) -> anyhow::Result<Summary> {
    let summary = summarize(sweep);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let summary_path = out.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    if sweep.cells.is_empty() {
        log::warn!("sweep contains no cells; wrote an empty summary");
        return Ok(summary);
    }

    let cells_dir = out.join("cells");
    let curves_dir = out.join("curves");
    fs::create_dir_all(&cells_dir).with_context(|| format!("creating {}", cells_dir.display()))?;
    fs::create_dir_all(&curves_dir).with_context(|| format!("creating {}", curves_dir.display()))?;
    for cell in &sweep.cells {
        if let Some(trace) = &cell.trace {
            let path = cells_dir.join(format!("rep{}-{}.csv", cell.rep, file_stem(&cell.spec.label())));
            let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            trace.write_csv(file).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    for g in &summary.groups {
        let stem = file_stem(&g.label);
        write_curve(&curves_dir.join(format!("{stem}-objective.csv")), &g.objective)?;
        write_curve(&curves_dir.join(format!("{stem}-gap.csv")), &g.gap)?;
    }

    let baseline = summary.groups.iter().find(|g| g.label.ends_with("/exact"));
    for method in &sweep.config.methods {
        let prefix = format!("{method}/");
        let series: Vec<&GroupSummary> = summary
            .groups
            .iter()
            .filter(|g| g.label.starts_with(&prefix) && !g.label.ends_with("/exact"))
            .collect();
        if series.is_empty() {
            continue;
        }
        let path = out.join(format!("objective-{method}.svg"));
        plot(&path, &format!("{method}: objective vs. iteration"), &series, baseline)
            .with_context(|| format!("plotting {}", path.display()))?;
    }
    Ok(summary)
}

fn plot(path: &Path, title: &str, series: &[&GroupSummary], baseline: Option<&GroupSummary>) -> anyhow::Result<()> {
    let all: Vec<&GroupSummary> = series.iter().copied().chain(baseline).collect();
    let k_max = all.iter().map(|g| g.objective.len()).max().unwrap_or(1).max(2);
    let values = all.iter().flat_map(|g| g.objective.iter().map(|r| r.mean)).filter(|v| v.is_finite());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    let (lo, hi) = if lo < hi { (lo, hi) } else { (lo - 1.0, lo + 1.0) };
    let pad = 0.05 * (hi - lo);

    let root = SVGBackend::new(path, (900, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(1f64..k_max as f64, (lo - pad)..(hi + pad))?;
    chart.configure_mesh().x_desc("iteration k").y_desc("objective").draw()?;
    for (i, g) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(g.objective.iter().map(|r| (r.k as f64, r.mean)), color.stroke_width(2)))?
            .label(g.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    if let Some(b) = baseline {
        chart
            .draw_series(LineSeries::new(b.objective.iter().map(|r| (r.k as f64, r.mean)), BLACK.stroke_width(2)))?
            .label(format!("{} (baseline)", b.label))
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
