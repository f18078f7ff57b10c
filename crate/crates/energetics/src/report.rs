//! Run reports on disk.
//!
//! | file | content |
//! |------|---------|
//! | `metrics.csv` | one row per week, fixed column order |
//! | `summary.toml` | seed, digests, weekly means, rejection counts |
//! | `trades.jsonl` | trade tape |
//! | `journal.jsonl` | energy journal |
//! | `audit.jsonl` | rejected actions |
//! | `stock.jsonl` | final energy stock per account |

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use energetics_core::metrics::{Fixed4, MetricsRow, COLUMNS, NUMERIC_COLUMNS};
use energetics_core::RunReport;
use serde::{Deserialize, Serialize};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const TRADES_FILE: &str = "trades.jsonl";
pub const JOURNAL_FILE: &str = "journal.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";
pub const STOCK_FILE: &str = "stock.jsonl";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub weeks: u32,
    pub scenario_digest: String,
    pub scenario_base_digest: String,
    pub initial_digest: String,
    pub final_digest: String,
    /// Decimal text; may exceed 64 bits in principle.
    pub final_drift: String,
    pub trade_count: u64,
    pub rejected_actions: u64,
    pub rejections: BTreeMap<String, u64>,
    /// Weekly mean of every numeric column.
    pub means: BTreeMap<String, Fixed4>,
}

impl Summary {
    pub fn of(report: &RunReport) -> Summary {
        let rows: Vec<&MetricsRow> = report.rows.iter().collect();
        let means = NUMERIC_COLUMNS
            .iter()
            .filter_map(|c| crate::compare::mean(&rows, c).map(|m| (c.to_string(), m)))
            .collect();
        Summary {
            seed: report.seed,
            weeks: report.weeks,
            scenario_digest: report.scenario_digest.clone(),
            scenario_base_digest: report.scenario_base_digest.clone(),
            initial_digest: report.initial_digest.clone(),
            final_digest: report.final_digest.clone(),
            final_drift: report.final_drift.to_string(),
            trade_count: report.trades.len() as u64,
            rejected_actions: report.audit.len() as u64,
            rejections: report.audit_summary.clone(),
            means,
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct StockLine {
    pub account: String,
    pub stock: u128,
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> io::Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for it in items {
        serde_json::to_writer(&mut w, &it)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn metrics_csv(rows: &[MetricsRow]) -> io::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in rows {
        w.write_record(r.cells())?;
    }
    w.into_inner().map_err(|e| io::Error::other(e.to_string()))
}

/// Writes every report file into `out_dir`. Output bytes depend only on
/// the report.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> io::Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join(METRICS_FILE), metrics_csv(&report.rows)?)?;
    let summary = toml::to_string(&Summary::of(report)).map_err(io::Error::other)?;
    fs::write(out_dir.join(SUMMARY_FILE), summary)?;
    write_jsonl(&out_dir.join(TRADES_FILE), &report.trades)?;
    write_jsonl(&out_dir.join(JOURNAL_FILE), &report.journal)?;
    write_jsonl(&out_dir.join(AUDIT_FILE), &report.audit)?;
    write_jsonl(
        &out_dir.join(STOCK_FILE),
        report.final_stock.iter().map(|(a, s)| StockLine {
            account: a.to_string(),
            stock: *s,
        }),
    )
}

fn invalid(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Reads a metrics table written by [`emit_report`].
pub fn read_metrics(path: &Path) -> io::Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| invalid(e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| invalid(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    if header != COLUMNS {
        return Err(invalid(format!("{}: unexpected columns", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| invalid(e.to_string()))?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        let int = |i: usize| {
            f(i).parse::<u64>()
                .map_err(|e| invalid(format!("column {}: {e}", COLUMNS[i])))
        };
        let fix = |i: usize| {
            f(i).parse::<Fixed4>()
                .map_err(|e| invalid(format!("column {}: {e}", COLUMNS[i])))
        };
        rows.push(MetricsRow {
            week: f(0).parse().map_err(|e| invalid(format!("column week: {e}")))?,
            total_emissions_pu: int(1)?,
            energy_traded_kwh: int(2)?,
            mean_energy_price_cents: fix(3)?,
            energy_purchased_kwh: int(4)?,
            taxed_energy_kwh: int(5)?,
            tax_revenue_cents: int(6)?,
            quota_right_volume_pu: int(7)?,
            quota_right_mean_price_cents: fix(8)?,
            allowance_token_volume_kwh: int(9)?,
            gini_money: fix(10)?,
            outstanding_debt_kwh: int(11)?,
            shutdown_count: int(12)?,
            regime_change: f(13).to_string(),
        });
    }
    Ok(rows)
}

pub fn read_summary(path: &Path) -> io::Result<Summary> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
}
