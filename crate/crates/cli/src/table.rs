//! Batch reproduction of the geodesic distance table.

use std::io::{self, Write};

use gmrf_geodesic::linalg::Vec3;
use gmrf_geodesic::{euclidean_distance, integrate, IntegratorConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format::fmt_g;

/// Published outcome of a row, kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub end: Vec3,
    pub gd: f64,
    pub ed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub start: Vec3,
    pub tangent: Vec3,
    #[serde(default)]
    pub reference: Option<Reference>,
}

const fn entry(start: Vec3, tangent: Vec3, end: Vec3, gd: f64, ed: f64) -> TableEntry {
    TableEntry { start, tangent, reference: Some(Reference { end, gd, ed }) }
}

/// The fifteen published rows.
pub fn default_rows() -> Vec<TableEntry> {
    vec![
        entry([0.0, 1.0, 0.0], [0.0, 0.0, 0.1], [0.0, 1.203, 0.465], 0.686, 0.631),
        entry([0.0, 1.0, 0.0], [0.1, 0.1, 0.2], [0.921, 1.116, -0.655], 1.667, 1.137),
        entry([5.0, 10.0, 0.0], [0.1, 0.1, -0.1], [5.102, 11.525, -0.487], 1.629, 1.596),
        entry([5.0, 10.0, -1.0], [0.1, -0.1, 0.2], [7.238, 12.495, -1.379], 3.794, 3.37),
        entry([5.0, 10.0, 0.5], [-0.1, -0.1, -0.2], [1.908, 12.031, 1.451], 5.292, 3.819),
        entry([1.0, 1.0, -1.0], [0.2, 0.2, 0.2], [1.568, 1.720, -2.736], 2.194, 1.933),
        entry([0.0, 100.0, 0.0], [0.2, -1.0, 0.2], [0.586, 96.5, 0.6], 3.58, 3.53),
        entry([1.0, 1.0, -1.0], [0.02, 0.02, 0.2], [1.705, 2.550, -1.786], 2.863, 1.879),
        entry([1.0, 1.0, 0.0], [0.05, 0.05, 0.05], [1.681, 1.141, -0.130], 0.805, 0.702),
        entry([1.0, 1.0, 0.0], [-0.05, -0.05, 0.1], [0.212, 0.581, -0.230], 1.161, 0.905),
        entry([10.0, 5.0, 0.0], [-0.25, 0.25, 0.8], [9.818, 6.084, 1.311], 1.942, 1.662),
        entry([10.0, 5.0, 0.0], [2.0, 0.05, 0.1], [10.891, 5.160, -1.133], 1.819, 1.383),
        entry([5.0, 1.0, 0.0], [0.0, 0.5, 0.2], [5.0, 2.169, 0.879], 1.556, 1.431),
        entry([0.0, 1.0, 0.0], [0.01, 0.5, 0.2], [0.068, 2.194, 0.893], 1.579, 1.461),
        entry([5.0, 10.0, -0.5], [0.01, 0.01, 0.2], [5.863, 13.438, 0.855], 4.503, 4.027),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    pub rows: Vec<TableEntry>,
    pub repeats: usize,
    pub integrator: IntegratorConfig,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            rows: default_rows(),
            repeats: 5,
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Seed of repeat `repeat` of row `row` (both zero-based).
pub fn run_seed(master: u64, row: usize, repeats: usize, repeat: usize) -> u64 {
    master.wrapping_add((row * repeats + repeat) as u64)
}

pub const ROW_HEADER: &str = "mu_a,sigma2_a,beta_a,alpha1,alpha2,alpha3,mu_b,sigma2_b,beta_b,gd,ed,seed,diverged";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub start: Vec3,
    pub tangent: Vec3,
    #[serde(rename = "final")]
    pub end: Vec3,
    pub gd: f64,
    pub ed: f64,
    pub seed: u64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRun {
    /// Zero-based row index.
    pub row: usize,
    pub repeat: usize,
    pub result: TableRow,
    pub error: Option<String>,
}

fn run_one(entry: &TableEntry, integrator: &IntegratorConfig, seed: u64) -> (TableRow, Option<String>) {
    let mut cfg = integrator.clone();
    cfg.mcmc.seed = seed;
    match integrate(entry.start, entry.tangent, &cfg) {
        Ok(curve) => {
            let end = curve.end().gamma;
            let row = TableRow {
                start: entry.start,
                tangent: entry.tangent,
                end,
                gd: curve.distance,
                ed: euclidean_distance(&entry.start, &end),
                seed,
                diverged: !curve.completed(),
            };
            (row, curve.divergence_reason)
        }
        Err(e) => {
            let row = TableRow {
                start: entry.start,
                tangent: entry.tangent,
                end: entry.start,
                gd: f64::NAN,
                ed: f64::NAN,
                seed,
                diverged: true,
            };
            (row, Some(e.to_string()))
        }
    }
}

/// Runs every row `repeats` times in parallel. Results are ordered by row,
/// then repeat, whatever the scheduling.
pub fn run_table(cfg: &TableConfig, master_seed: u64) -> Vec<TableRun> {
    let repeats = cfg.repeats.max(1);
    let jobs: Vec<(usize, usize)> = (0..cfg.rows.len()).flat_map(|r| (0..repeats).map(move |k| (r, k))).collect();
    jobs.par_iter()
        .map(|&(row, repeat)| {
            let seed = run_seed(master_seed, row, repeats, repeat);
            let (result, error) = run_one(&cfg.rows[row], &cfg.integrator, seed);
            if let Some(e) = &error {
                log::warn!("row {} repeat {repeat}: {e}", row + 1);
            }
            TableRun { row, repeat, result, error }
        })
        .collect()
}

pub fn write_rows_csv<W: Write>(mut w: W, runs: &[TableRun]) -> io::Result<()> {
    writeln!(w, "{ROW_HEADER}")?;
    for run in runs {
        let r = &run.result;
        let nums = [r.start, r.tangent, r.end].concat();
        let mut cols: Vec<String> = nums.iter().chain(&[r.gd, r.ed]).map(|v| fmt_g(*v, 12)).collect();
        cols.push(r.seed.to_string());
        cols.push(u8::from(r.diverged).to_string());
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// Per-row aggregate over completed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    /// One-based, matching the published numbering.
    pub row: usize,
    pub runs: usize,
    pub diverged: usize,
    pub gd_median: f64,
    pub gd_mean: f64,
    pub ed_median: f64,
    pub ed_mean: f64,
    pub end_median: Vec3,
    pub reference: Option<Reference>,
    /// Distance between the published endpoints, recomputed.
    pub reference_ed_recomputed: Option<f64>,
    pub note: Option<String>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Relative gap above which a published distance is reported as
/// inconsistent with its published endpoints. Most rows disagree by a few
/// percent, presumably from unrounded endpoints, so only gross gaps count.
const INCONSISTENCY_TOLERANCE: f64 = 0.1;

pub fn summarize(cfg: &TableConfig, runs: &[TableRun]) -> Vec<RowSummary> {
    cfg.rows
        .iter()
        .enumerate()
        .map(|(i, entry)| {
            let mine: Vec<&TableRow> = runs.iter().filter(|r| r.row == i).map(|r| &r.result).collect();
            let done: Vec<&TableRow> = mine.iter().copied().filter(|r| !r.diverged).collect();
            let col = |f: fn(&TableRow) -> f64| done.iter().map(|r| f(r)).collect::<Vec<_>>();
            let recomputed = entry.reference.map(|r| euclidean_distance(&entry.start, &r.end));
            let note = match (entry.reference, recomputed) {
                (Some(r), Some(ed)) if (r.ed - ed).abs() > INCONSISTENCY_TOLERANCE * ed => Some(format!(
                    "published E.D. {} disagrees with its published endpoints ({})",
                    fmt_g(r.ed, 6),
                    fmt_g(ed, 6)
                )),
                _ => None,
            };
            RowSummary {
                row: i + 1,
                runs: mine.len(),
                diverged: mine.len() - done.len(),
                gd_median: median(&col(|r| r.gd)),
                gd_mean: mean(&col(|r| r.gd)),
                ed_median: median(&col(|r| r.ed)),
                ed_mean: mean(&col(|r| r.ed)),
                end_median: [median(&col(|r| r.end[0])), median(&col(|r| r.end[1])), median(&col(|r| r.end[2]))],
                reference: entry.reference,
                reference_ed_recomputed: recomputed,
                note,
            }
        })
        .collect()
}

pub const SUMMARY_HEADER: &str = "row,runs,diverged,gd_median,gd_mean,ed_median,ed_mean,mu_b_median,sigma2_b_median,beta_b_median,ref_gd,ref_ed,ref_ed_recomputed,note";

pub fn write_summary_csv<W: Write>(mut w: W, rows: &[RowSummary]) -> io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in rows {
        let g = |v: f64| fmt_g(v, 12);
        let opt = |v: Option<f64>| v.map(g).unwrap_or_default();
        let cols = [
            s.row.to_string(),
            s.runs.to_string(),
            s.diverged.to_string(),
            g(s.gd_median),
            g(s.gd_mean),
            g(s.ed_median),
            g(s.ed_mean),
            g(s.end_median[0]),
            g(s.end_median[1]),
            g(s.end_median[2]),
            opt(s.reference.map(|r| r.gd)),
            opt(s.reference.map(|r| r.ed)),
            opt(s.reference_ed_recomputed),
            s.note.as_deref().map(|n| format!("\"{}\"", n.replace('"', "\"\""))).unwrap_or_default(),
        ];
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}
