//! File formats: curve CSV, field CSV and run summaries.

use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use gmrf_geodesic::linalg::Vec3;
use gmrf_geodesic::{Boundary, FieldSample, GeodesicCurve};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::format::fmt_g;

pub const CURVE_HEADER: &str = "t,mu,sigma2,beta,alpha1,alpha2,alpha3,step_norm,cum_dist";

/// One row per state, `%.12g`.
pub fn write_curve_csv<W: Write>(mut w: W, curve: &GeodesicCurve) -> io::Result<()> {
    writeln!(w, "{CURVE_HEADER}")?;
    let mut cum = 0.0;
    for (s, step) in curve.states.iter().zip(curve.step_norms()) {
        cum += step;
        let cols = [s.t, s.gamma[0], s.gamma[1], s.gamma[2], s.alpha[0], s.alpha[1], s.alpha[2], step, cum];
        let line: Vec<String> = cols.iter().map(|v| fmt_g(*v, 12)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

/// One lattice row per line, `%.17g`, so values round-trip exactly.
pub fn write_field_csv<W: Write>(mut w: W, field: &FieldSample) -> io::Result<()> {
    for row in field.rows() {
        let line: Vec<String> = row.iter().map(|v| fmt_g(*v, 17)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_field_csv<R: BufRead>(r: R, boundary: Boundary) -> Result<FieldSample, CliError> {
    let mut rows = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("field line {}: {e}", n + 1)))?;
        rows.push(row);
    }
    Ok(FieldSample::from_rows(&rows, boundary)?)
}

pub fn load_field(path: &Path, boundary: Boundary) -> Result<FieldSample, CliError> {
    read_field_csv(BufReader::new(fs::File::open(path)?), boundary)
}

pub fn save<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
{
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(fs::File::create(path)?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Short description of one integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub start: Vec3,
    pub tangent: Vec3,
    pub end: Vec3,
    pub gd: f64,
    pub ed: f64,
    pub riemannian_length: f64,
    pub steps_completed: usize,
    pub diverged_at: Option<usize>,
    pub divergence_reason: Option<String>,
    pub seed: u64,
}

impl Summary {
    pub fn new(curve: &GeodesicCurve, seed: u64) -> Self {
        Summary {
            start: curve.start().gamma,
            tangent: curve.start().alpha,
            end: curve.end().gamma,
            gd: curve.distance,
            ed: curve.euclidean_distance(),
            riemannian_length: curve.riemannian_length,
            steps_completed: curve.states.len() - 1,
            diverged_at: curve.diverged_at,
            divergence_reason: curve.divergence_reason.clone(),
            seed,
        }
    }
}
