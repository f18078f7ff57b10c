//! Baseline-versus-variant policy comparison.
//!
//! Two runs are comparable when they share a seed and a scenario apart
//! from the policy schedule. The comparison is plain data: weekly deltas
//! and pre/post-event means, variant minus base.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use energetics_core::metrics::{Fixed4, MetricsRow, NUMERIC_COLUMNS};
use serde::{Deserialize, Serialize};

use crate::report::{self, Summary};

/// Canonical scenario copy written next to a run's report by the CLI.
pub const SCENARIO_COPY: &str = "scenario.toml";

#[derive(Debug, thiserror::Error)]
pub enum CompareError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("seeds differ: base {base}, variant {variant}")]
    SeedMismatch { base: u64, variant: u64 },
    #[error("scenarios differ beyond the policy schedule (base {base}, variant {variant}){diff}")]
    ScenarioMismatch {
        base: String,
        variant: String,
        diff: String,
    },
    #[error("run lengths differ: base {base} weeks, variant {variant} weeks")]
    WeeksMismatch { base: u32, variant: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricComparison {
    pub metric: String,
    pub base_pre_mean: Option<Fixed4>,
    pub variant_pre_mean: Option<Fixed4>,
    pub base_post_mean: Option<Fixed4>,
    pub variant_post_mean: Option<Fixed4>,
    pub post_mean_delta: Option<Fixed4>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub seed: u64,
    pub weeks: u32,
    /// First week whose regime changes differ between the runs.
    pub event_week: Option<u32>,
    pub metrics: Vec<MetricComparison>,
    /// Per week, per metric: variant minus base.
    pub weekly_deltas: Vec<BTreeMap<String, Fixed4>>,
}

impl Comparison {
    pub fn is_zero(&self) -> bool {
        self.weekly_deltas.iter().all(|w| w.values().all(|v| v.0 == 0))
            && self.metrics.iter().all(|m| m.post_mean_delta.is_none_or(|d| d.0 == 0))
    }
}

/// Mean of a column over rows, exact then rounded once.
pub fn mean(rows: &[&MetricsRow], column: &str) -> Option<Fixed4> {
    if rows.is_empty() {
        return None;
    }
    let sum: i128 = rows.iter().filter_map(|r| r.value(column)).map(|v| v.0).sum();
    Some(Fixed4::from_ratio(sum, rows.len() as i128 * Fixed4::SCALE))
}

fn split(rows: &[MetricsRow], event: Option<u32>) -> (Vec<&MetricsRow>, Vec<&MetricsRow>) {
    rows.iter().partition(|r| event.is_none_or(|e| r.week < e))
}

/// Compares already loaded runs.
pub fn compare_data(
    base: &Summary,
    base_rows: &[MetricsRow],
    variant: &Summary,
    variant_rows: &[MetricsRow],
) -> Result<Comparison, CompareError> {
    if base.seed != variant.seed {
        return Err(CompareError::SeedMismatch {
            base: base.seed,
            variant: variant.seed,
        });
    }
    if base.scenario_base_digest != variant.scenario_base_digest {
        return Err(CompareError::ScenarioMismatch {
            base: base.scenario_base_digest.clone(),
            variant: variant.scenario_base_digest.clone(),
            diff: String::new(),
        });
    }
    if base.weeks != variant.weeks || base_rows.len() != variant_rows.len() {
        return Err(CompareError::WeeksMismatch {
            base: base.weeks,
            variant: variant.weeks,
        });
    }
    let event_week = base_rows
        .iter()
        .zip(variant_rows)
        .find(|(b, v)| b.regime_change != v.regime_change)
        .map(|(b, _)| b.week);
    let (bpre, bpost) = split(base_rows, event_week);
    let (vpre, vpost) = split(variant_rows, event_week);
    let metrics = NUMERIC_COLUMNS
        .iter()
        .map(|c| {
            let bp = mean(&bpost, c);
            let vp = mean(&vpost, c);
            MetricComparison {
                metric: c.to_string(),
                base_pre_mean: mean(&bpre, c),
                variant_pre_mean: mean(&vpre, c),
                base_post_mean: bp,
                variant_post_mean: vp,
                post_mean_delta: bp.zip(vp).map(|(b, v)| Fixed4(v.0 - b.0)),
            }
        })
        .collect();
    let weekly_deltas = base_rows
        .iter()
        .zip(variant_rows)
        .map(|(b, v)| {
            NUMERIC_COLUMNS
                .iter()
                .map(|c| {
                    let d = v.value(c).unwrap_or_default().0 - b.value(c).unwrap_or_default().0;
                    (c.to_string(), Fixed4(d))
                })
                .collect()
        })
        .collect();
    Ok(Comparison {
        seed: base.seed,
        weeks: base.weeks,
        event_week,
        metrics,
        weekly_deltas,
    })
}

/// Lines present in only one of two texts, marked `-` (base) and `+`.
fn line_diff(a: &str, b: &str, limit: usize) -> String {
    let la: Vec<&str> = a.lines().collect();
    let lb: Vec<&str> = b.lines().collect();
    let mut out = String::new();
    let mut n = 0;
    for l in &la {
        if !lb.contains(l) && n < limit {
            out.push_str(&format!("\n- {l}"));
            n += 1;
        }
    }
    for l in &lb {
        if !la.contains(l) && n < limit {
            out.push_str(&format!("\n+ {l}"));
            n += 1;
        }
    }
    out
}

/// Loads two report directories and compares them.
pub fn compare_runs(base_dir: &Path, variant_dir: &Path) -> Result<Comparison, CompareError> {
    let base = report::read_summary(&base_dir.join(report::SUMMARY_FILE))?;
    let variant = report::read_summary(&variant_dir.join(report::SUMMARY_FILE))?;
    let brows = report::read_metrics(&base_dir.join(report::METRICS_FILE))?;
    let vrows = report::read_metrics(&variant_dir.join(report::METRICS_FILE))?;
    compare_data(&base, &brows, &variant, &vrows).map_err(|e| match e {
        CompareError::ScenarioMismatch {
            base: b, variant: v, ..
        } => {
            let read = |d: &Path| fs::read_to_string(d.join(SCENARIO_COPY)).ok();
            let diff = match (read(base_dir), read(variant_dir)) {
                (Some(x), Some(y)) => line_diff(&x, &y, 20),
                _ => String::new(),
            };
            CompareError::ScenarioMismatch {
                base: b,
                variant: v,
                diff,
            }
        }
        other => other,
    })
}

/// Writes `comparison.toml` and `deltas.csv` into `out_dir`.
pub fn write_comparison(c: &Comparison, out_dir: &Path) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        seed: u64,
        weeks: u32,
        #[serde(skip_serializing_if = "Option::is_none")]
        event_week: Option<u32>,
        metrics: &'a [MetricComparison],
    }
    let doc = Doc {
        seed: c.seed,
        weeks: c.weeks,
        event_week: c.event_week,
        metrics: &c.metrics,
    };
    fs::write(
        out_dir.join("comparison.toml"),
        toml::to_string(&doc).map_err(io::Error::other)?,
    )?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["week".to_string()];
    header.extend(NUMERIC_COLUMNS.iter().map(|c| format!("delta_{c}")));
    w.write_record(&header)?;
    for (week, d) in c.weekly_deltas.iter().enumerate() {
        let mut rec = vec![week.to_string()];
        rec.extend(NUMERIC_COLUMNS.iter().map(|c| d[*c].to_string()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| io::Error::other(e.to_string()))?;
    fs::write(out_dir.join("deltas.csv"), bytes)
}
