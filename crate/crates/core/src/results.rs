//! Results tables: one CSV row per (instance, planner).
//!
//! Per-iteration lists are `;`-separated inside a single field. Floats are
//! written in shortest round-trip form so a re-read table is bit-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simulator::{EpisodeResult, PlanStatus, PlannerKind};
use crate::stats::{t_test_independent, StatsError, TTest, Variance};

pub const COLUMNS: [&str; 8] =
    ["instance_id", "H", "planner", "total_cost", "iteration_costs", "compute_seconds", "statuses", "failed"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instance_id: String,
    pub horizon: usize,
    pub planner: PlannerKind,
    pub total_cost: f64,
    pub iteration_costs: Vec<f64>,
    pub compute_seconds: Vec<f64>,
    pub statuses: Vec<PlanStatus>,
    pub failed: bool,
}

impl From<&EpisodeResult> for ResultRow {
    fn from(r: &EpisodeResult) -> Self {
        ResultRow {
            instance_id: r.instance_id.clone(),
            horizon: r.horizon,
            planner: r.planner,
            total_cost: r.total_cost,
            iteration_costs: r.iteration_costs.clone(),
            compute_seconds: r.compute_seconds.clone(),
            statuses: r.statuses.clone(),
            failed: r.failed,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRow {
    instance_id: String,
    #[serde(rename = "H")]
    horizon: usize,
    planner: String,
    total_cost: f64,
    iteration_costs: String,
    compute_seconds: String,
    statuses: String,
    failed: bool,
}

#[derive(Debug, Error)]
pub enum ResultsError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {msg}")]
    Field { row: usize, msg: String },
    #[error("duplicate row for {0} / {1}")]
    Duplicate(String, PlannerKind),
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn split<T: std::str::FromStr>(s: &str, row: usize, name: &str) -> Result<Vec<T>, ResultsError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|p| p.parse().map_err(|_| ResultsError::Field { row, msg: format!("bad {name} entry {p:?}") }))
        .collect()
}

pub fn write_header<W: Write>(w: &mut csv::Writer<W>) -> csv::Result<()> {
    w.write_record(COLUMNS)
}

pub fn write_row<W: Write>(w: &mut csv::Writer<W>, r: &ResultRow) -> csv::Result<()> {
    w.write_record([
        r.instance_id.clone(),
        r.horizon.to_string(),
        r.planner.to_string(),
        r.total_cost.to_string(),
        join(&r.iteration_costs),
        join(&r.compute_seconds),
        join(&r.statuses),
        r.failed.to_string(),
    ])
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    write_header(&mut w)?;
    for r in rows {
        write_row(&mut w, r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>, ResultsError> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, raw) in rdr.deserialize::<RawRow>().enumerate() {
        let raw = raw?;
        let row = k + 1;
        let planner: PlannerKind =
            raw.planner.parse().map_err(|e: String| ResultsError::Field { row, msg: e })?;
        if !seen.insert((raw.instance_id.clone(), planner)) {
            return Err(ResultsError::Duplicate(raw.instance_id, planner));
        }
        let r = ResultRow {
            iteration_costs: split(&raw.iteration_costs, row, "iteration_costs")?,
            compute_seconds: split(&raw.compute_seconds, row, "compute_seconds")?,
            statuses: split(&raw.statuses, row, "statuses")?,
            instance_id: raw.instance_id,
            horizon: raw.horizon,
            planner,
            total_cost: raw.total_cost,
            failed: raw.failed,
        };
        if r.iteration_costs.len() != r.horizon || r.statuses.len() != r.horizon {
            return Err(ResultsError::Field { row, msg: format!("expected {} iterations", r.horizon) });
        }
        rows.push(r);
    }
    Ok(rows)
}

/// Instances on which every listed planner has a row and none failed.
pub fn all_solved(rows: &[ResultRow], planners: &[PlannerKind]) -> BTreeSet<String> {
    let mut by_instance: BTreeMap<&str, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        by_instance.entry(&r.instance_id).or_default().push(r);
    }
    by_instance
        .into_iter()
        .filter(|(_, rs)| {
            planners.iter().all(|p| rs.iter().any(|r| r.planner == *p)) &&
                rs.iter().filter(|r| planners.contains(&r.planner)).all(|r| !r.failed)
        })
        .map(|(id, _)| id.to_string())
        .collect()
}

pub fn planners_in(rows: &[ResultRow]) -> Vec<PlannerKind> {
    rows.iter().map(|r| r.planner).collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn failure_counts(rows: &[ResultRow]) -> BTreeMap<(usize, PlannerKind), usize> {
    let mut out = BTreeMap::new();
    for r in rows {
        *out.entry((r.horizon, r.planner)).or_insert(0) += usize::from(r.failed);
    }
    out
}

/// Total cost per instance for one planner over `subset`, sorted by instance id.
pub fn costs_for(rows: &[ResultRow], planner: PlannerKind, horizon: Option<usize>, subset: &BTreeSet<String>) -> Vec<f64> {
    let mut v: Vec<(&str, f64)> = rows
        .iter()
        .filter(|r| r.planner == planner && horizon.is_none_or(|h| r.horizon == h) && subset.contains(&r.instance_id))
        .map(|r| (r.instance_id.as_str(), r.total_cost))
        .collect();
    v.sort_by(|a, b| a.0.cmp(b.0));
    v.into_iter().map(|(_, c)| c).collect()
}

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        f64::NAN
    } else {
        x.iter().sum::<f64>() / x.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    /// `None` for the row pooling every horizon.
    pub horizon: Option<usize>,
    pub n: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: Result<TTest, StatsError>,
}

/// Compares planners `a` and `b` per horizon on the all-solved subset, where
/// "all" means every planner present in the table.
pub fn compare(rows: &[ResultRow], a: PlannerKind, b: PlannerKind, variance: Variance) -> Vec<ComparisonRow> {
    let subset = all_solved(rows, &planners_in(rows));
    let horizons: BTreeSet<usize> = rows.iter().map(|r| r.horizon).collect();
    horizons
        .into_iter()
        .map(Some)
        .chain(std::iter::once(None))
        .map(|h| {
            let xa = costs_for(rows, a, h, &subset);
            let xb = costs_for(rows, b, h, &subset);
            ComparisonRow {
                horizon: h,
                n: xa.len().min(xb.len()),
                mean_a: mean(&xa),
                mean_b: mean(&xb),
                test: t_test_independent(&xa, &xb, variance),
            }
        })
        .collect()
}
