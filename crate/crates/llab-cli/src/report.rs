//! Merging of scan, critical-line and Monte Carlo CSV files into one table
//! plus a summary with quantiles, fitted slopes and per-file provenance.

use std::io::Write;
use std::path::Path;

use lindelof_lab::deviation::GRID_CSV_HEADER;
use lindelof_lab::numerics::{least_squares, quantile};
use lindelof_lab::zeta_lab::CRITICAL_CSV_HEADER;
use lindelof_lab::LabError;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, CliError, MANIFEST_FILE};
use crate::params::ReportParams;
use crate::run::Outputs;

pub const MONTE_CARLO_CSV_HEADER: &str = "trial,max_normalized_dev";

struct Schema {
    name: &'static str,
    header: &'static str,
    /// Leading columns that order the merged rows.
    keys: usize,
    value: usize,
    /// Column regressed against in log-log space, if any.
    slope_against: Option<usize>,
}

const SCHEMAS: [Schema; 3] = [
    Schema {
        name: "deviation_scan",
        header: GRID_CSV_HEADER,
        keys: 2,
        value: 3,
        slope_against: Some(0),
    },
    Schema {
        name: "critical_line",
        header: CRITICAL_CSV_HEADER,
        keys: 1,
        value: 1,
        slope_against: Some(0),
    },
    Schema {
        name: "monte_carlo",
        header: MONTE_CARLO_CSV_HEADER,
        keys: 1,
        value: 1,
        slope_against: None,
    },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    /// Rows whose value column is a finite number.
    pub count: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub q50: Option<f64>,
    pub q90: Option<f64>,
    pub q99: Option<f64>,
    /// Least-squares slope of log value against log of the abscissa column.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRef {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    /// Manifest found next to the input, if any.
    pub manifest: Option<ManifestRef>,
    pub stats: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema: String,
    pub header: String,
    pub value_column: String,
    pub rows: usize,
    pub stats: Stats,
    pub inputs: Vec<InputSummary>,
}

fn stats(rows: &[Vec<String>], schema: &Schema) -> Stats {
    let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
    let mut values: Vec<f64> = rows.iter().filter_map(|r| num(&r[schema.value])).collect();
    values.sort_by(f64::total_cmp);
    let q = |p: f64| (!values.is_empty()).then(|| quantile(&values, p));
    let (slope, intercept) = match schema.slope_against {
        Some(col) => {
            let (lx, ly): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter_map(|r| Some((num(&r[col])?, num(&r[schema.value])?)))
                .filter(|&(x, y)| x > 0.0 && y > 0.0)
                .map(|(x, y)| (x.ln(), y.ln()))
                .unzip();
            let distinct = lx.iter().any(|&v| v != lx[0]);
            if lx.len() >= 2 && distinct {
                let (s, i) = least_squares(&lx, &ly);
                (Some(s), Some(i))
            } else {
                (None, None)
            }
        }
        None => (None, None),
    };
    Stats {
        count: values.len(),
        min: values.first().copied(),
        max: values.last().copied(),
        q50: q(0.5),
        q90: q(0.9),
        q99: q(0.99),
        slope,
        intercept,
    }
}

fn sort_key(row: &[String], keys: usize) -> Vec<f64> {
    row[..keys].iter().map(|c| c.parse::<f64>().unwrap_or(f64::NAN)).collect()
}

fn manifest_ref(path: &Path) -> Result<Option<ManifestRef>, CliError> {
    let m = path.parent().unwrap_or(Path::new(".")).join(MANIFEST_FILE);
    if !m.exists() {
        return Ok(None);
    }
    Ok(Some(ManifestRef {
        file: m.display().to_string(),
        sha256: sha256_hex(&std::fs::read(&m)?),
    }))
}

pub fn run(p: ReportParams, out: &mut Outputs) -> Result<(), CliError> {
    if p.inputs.is_empty() {
        return Err(crate::config::config_err("inputs must not be empty"));
    }
    let mut schema: Option<&Schema> = None;
    let mut all_rows: Vec<Vec<String>> = Vec::new();
    let mut inputs = Vec::new();
    for path in &p.inputs {
        if !path.exists() {
            return Err(LabError::FileNotFound(path.display().to_string()).into());
        }
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| LabError::Format(format!("{} is not UTF-8", path.display())))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").trim();
        let found = SCHEMAS.iter().find(|s| s.header == header).ok_or_else(|| {
            LabError::SchemaMismatch(format!("{}: unsupported header '{header}'", path.display()))
        })?;
        match schema {
            None => schema = Some(found),
            Some(s) if s.name != found.name => {
                return Err(LabError::SchemaMismatch(format!(
                    "{} is a {} table, earlier inputs are {}",
                    path.display(),
                    found.name,
                    s.name
                ))
                .into())
            }
            Some(_) => {}
        }
        let width = found.header.split(',').count();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<String> = line.split(',').map(str::to_string).collect();
            if cells.len() != width {
                return Err(LabError::Format(format!("{} line {}: {} columns", path.display(), i + 2, cells.len())).into());
            }
            rows.push(cells);
        }
        inputs.push(InputSummary {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            rows: rows.len(),
            manifest: manifest_ref(path)?,
            stats: stats(&rows, found),
        });
        all_rows.extend(rows);
    }
    let schema = schema.expect("at least one input");
    // stable sort: equal keys keep input order
    all_rows.sort_by(|a, b| {
        let (ka, kb) = (sort_key(a, schema.keys), sort_key(b, schema.keys));
        ka.iter()
            .zip(&kb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out.with_writer("report.csv", |w| {
        writeln!(w, "{}", schema.header)?;
        for r in &all_rows {
            writeln!(w, "{}", r.join(","))?;
        }
        Ok(())
    })?;
    let summary = Summary {
        schema: schema.name.to_string(),
        header: schema.header.to_string(),
        value_column: schema.header.split(',').nth(schema.value).unwrap_or("").to_string(),
        rows: all_rows.len(),
        stats: stats(&all_rows, schema),
        inputs,
    };
    out.json("summary.json", &summary)
}
