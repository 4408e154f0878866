//! Result artifacts on disk: trace, contour, and histogram CSVs, report and
//! calibration JSON, and the material and calibration input tables.
//!
//! Writers stage the complete file and land it with a rename, so readers
//! never observe a partially written artifact. Floats are written in the
//! shortest decimal form that parses back to the identical bits, with `.`
//! as the separator regardless of locale, so every file emitted here
//! round-trips exactly through the matching reader.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::demo::GdRecord;
use crate::harness::{ErrorReport, ReconstructionReport};
use crate::magnetic::{CalibrationData, MagneticError};
use crate::scenario::{MagneticOutcome, MagneticPartReport, ScenarioConfig};
use crate::solver::{IterationTrace, ModelError, SolverStatus};
use crate::topography::{Contour, TopographyError};
use crate::vdw::LJMaterial;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot {action} {}: {source}", path.display())]
    File { action: &'static str, path: PathBuf, #[source] source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, #[source] source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, #[source] source: serde_json::Error },
    #[error("{}: row {row}, column {column}: {value:?} is not a number", path.display())]
    BadNumber { path: PathBuf, row: usize, column: String, value: String },
    #[error("{}: expected columns {expected}, found {found}", path.display())]
    BadHeader { path: PathBuf, expected: String, found: String },
    #[error("{}: no data rows", path.display())]
    EmptyTable { path: PathBuf },
    #[error("{}: {source}", path.display())]
    BadDataset { path: PathBuf, #[source] source: MagneticError },
    #[error("{}: {source}", path.display())]
    BadContour { path: PathBuf, #[source] source: TopographyError },
    #[error("{}: material {name:?}: {source}", path.display())]
    BadMaterial { path: PathBuf, name: String, #[source] source: ModelError },
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    let file_err =
        |action, source| IoError::File { action, path: path.to_path_buf(), source };
    let mut staged =
        tempfile::NamedTempFile::new_in(dir).map_err(|e| file_err("stage", e))?;
    staged.write_all(bytes).map_err(|e| file_err("write", e))?;
    staged.persist(path).map_err(|e| file_err("replace", e.error))?;
    Ok(())
}

/// Shortest decimal that parses back to the same f64.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_cell(path: &Path, row: usize, column: &str, value: &str) -> Result<f64, IoError> {
    value.trim().parse().map_err(|_| IoError::BadNumber {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        value: value.to_string(),
    })
}

fn parse_count(path: &Path, row: usize, column: &str, value: &str) -> Result<usize, IoError> {
    value.trim().parse().map_err(|_| IoError::BadNumber {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        value: value.to_string(),
    })
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(csv_error(path))?;
    for row in rows {
        writer.write_record(&row).map_err(csv_error(path))?;
    }
    let bytes = writer.into_inner().expect("csv writer over a Vec cannot fail to flush");
    atomic_write(path, &bytes)
}

/// Opens a CSV, checks the header matches `expected` exactly, and returns
/// the reader positioned at the first data row.
fn open_csv(
    path: &Path,
    expected: &[&str],
) -> Result<csv::Reader<std::fs::File>, IoError> {
    let file = std::fs::File::open(path).map_err(|source| IoError::File {
        action: "open",
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(csv_error(path))?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(IoError::BadHeader {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(reader)
}

/// One parsed iteration-trace row. `omega_hat_sq` holds the working target
/// vector; the per-measurement residuals are not part of the artifact, only
/// their norm.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub g: Vec<f64>,
    pub omega_hat_sq: Vec<f64>,
    pub e_norm: f64,
}

fn trace_header(n: usize, m: usize) -> Vec<String> {
    let mut header = Vec::with_capacity(n + m + 2);
    header.push("iter".to_string());
    for j in 0..n {
        header.push(format!("g_{j}"));
    }
    for j in 0..m {
        header.push(format!("omega_hat_{j}"));
    }
    header.push("e_norm".to_string());
    header
}

pub fn write_trace_csv(path: &Path, trace: &IterationTrace) -> Result<(), IoError> {
    let first = trace.final_record();
    let header = trace_header(first.g.len(), first.omega_hat_sq.len());
    let rows = trace.records().iter().map(|r| {
        let mut row = Vec::with_capacity(header.len());
        row.push(r.iter.to_string());
        row.extend(r.g.iter().copied().map(fmt_f64));
        row.extend(r.omega_hat_sq.iter().copied().map(fmt_f64));
        row.push(fmt_f64(r.error_norm));
        row
    });
    write_csv(path, &header, rows)
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>, IoError> {
    let file = std::fs::File::open(path).map_err(|source| IoError::File {
        action: "open",
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let columns: Vec<String> =
        reader.headers().map_err(csv_error(path))?.iter().map(str::to_string).collect();
    let bad_header = || IoError::BadHeader {
        path: path.to_path_buf(),
        expected: "iter,g_0..,omega_hat_0..,e_norm".to_string(),
        found: columns.join(","),
    };
    if columns.len() < 4
        || columns.first().map(String::as_str) != Some("iter")
        || columns.last().map(String::as_str) != Some("e_norm")
    {
        return Err(bad_header());
    }
    let inner = &columns[1..columns.len() - 1];
    let n = inner.iter().take_while(|c| c.starts_with("g_")).count();
    let expected = trace_header(n, inner.len() - n);
    if columns != expected {
        return Err(bad_header());
    }

    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        let row_no = k + 1;
        let cell = |j: usize| record.get(j).unwrap_or("");
        let mut g = Vec::with_capacity(n);
        let mut omega_hat_sq = Vec::with_capacity(inner.len() - n);
        for (j, column) in columns.iter().enumerate().skip(1).take(inner.len()) {
            let value = parse_cell(path, row_no, column, cell(j))?;
            if j <= n {
                g.push(value);
            } else {
                omega_hat_sq.push(value);
            }
        }
        rows.push(TraceRow {
            iter: parse_count(path, row_no, "iter", cell(0))?,
            g,
            omega_hat_sq,
            e_norm: parse_cell(path, row_no, "e_norm", cell(columns.len() - 1))?,
        });
    }
    if rows.is_empty() {
        return Err(IoError::EmptyTable { path: path.to_path_buf() });
    }
    Ok(rows)
}

pub fn write_contour_csv(path: &Path, contour: &Contour) -> Result<(), IoError> {
    let header: Vec<String> = ["zeta", "g1", "g2"].map(str::to_string).to_vec();
    let rows = (0..contour.len()).map(|i| {
        vec![
            fmt_f64(contour.zeta()[i]),
            fmt_f64(contour.g1()[i]),
            fmt_f64(contour.g2()[i]),
        ]
    });
    write_csv(path, &header, rows)
}

pub fn read_contour_csv(path: &Path) -> Result<Contour, IoError> {
    let mut reader = open_csv(path, &["zeta", "g1", "g2"])?;
    let (mut zeta, mut g1, mut g2) = (Vec::new(), Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        let row_no = k + 1;
        let cell = |j: usize| record.get(j).unwrap_or("");
        zeta.push(parse_cell(path, row_no, "zeta", cell(0))?);
        g1.push(parse_cell(path, row_no, "g1", cell(1))?);
        g2.push(parse_cell(path, row_no, "g2", cell(2))?);
    }
    Contour::new(zeta, g1, g2)
        .map_err(|source| IoError::BadContour { path: path.to_path_buf(), source })
}

/// One histogram bin: segment-error percentages in `[low_pct, high_pct)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub low_pct: f64,
    pub high_pct: f64,
    pub count: usize,
}

pub fn write_histogram_csv(path: &Path, report: &ErrorReport) -> Result<(), IoError> {
    let header: Vec<String> = ["bin_low_pct", "bin_high_pct", "count"].map(str::to_string).to_vec();
    let width = report.bin_width();
    let rows = report.histogram().iter().enumerate().map(|(k, &count)| {
        vec![
            fmt_f64(k as f64 * width),
            fmt_f64((k + 1) as f64 * width),
            count.to_string(),
        ]
    });
    write_csv(path, &header, rows)
}

pub fn read_histogram_csv(path: &Path) -> Result<Vec<HistogramBin>, IoError> {
    let mut reader = open_csv(path, &["bin_low_pct", "bin_high_pct", "count"])?;
    let mut bins = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        let row_no = k + 1;
        let cell = |j: usize| record.get(j).unwrap_or("");
        bins.push(HistogramBin {
            low_pct: parse_cell(path, row_no, "bin_low_pct", cell(0))?,
            high_pct: parse_cell(path, row_no, "bin_high_pct", cell(1))?,
            count: parse_count(path, row_no, "count", cell(2))?,
        });
    }
    Ok(bins)
}

pub fn write_gd_trace_csv(path: &Path, records: &[GdRecord]) -> Result<(), IoError> {
    let header: Vec<String> = ["iter", "x", "f_value", "grad"].map(str::to_string).to_vec();
    let rows = records.iter().map(|r| {
        vec![r.iter.to_string(), fmt_f64(r.x), fmt_f64(r.f_value), fmt_f64(r.grad)]
    });
    write_csv(path, &header, rows)
}

pub fn read_gd_trace_csv(path: &Path) -> Result<Vec<GdRecord>, IoError> {
    let mut reader = open_csv(path, &["iter", "x", "f_value", "grad"])?;
    let mut records = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        let row_no = k + 1;
        let cell = |j: usize| record.get(j).unwrap_or("");
        records.push(GdRecord {
            iter: parse_count(path, row_no, "iter", cell(0))?,
            x: parse_cell(path, row_no, "x", cell(1))?,
            f_value: parse_cell(path, row_no, "f_value", cell(2))?,
            grad: parse_cell(path, row_no, "grad", cell(3))?,
        });
    }
    Ok(records)
}

pub fn write_calibration_csv(path: &Path, data: &CalibrationData) -> Result<(), IoError> {
    let header: Vec<String> = ["gap_m", "omega_rad_s"].map(str::to_string).to_vec();
    let rows = data
        .gaps()
        .iter()
        .zip(data.omegas())
        .map(|(&g, &w)| vec![fmt_f64(g), fmt_f64(w)]);
    write_csv(path, &header, rows)
}

/// Reads a frequency-vs-gap table. Column checks and the minimum row count
/// are enforced here; value validity is delegated to [`CalibrationData`].
pub fn read_calibration_csv(path: &Path) -> Result<CalibrationData, IoError> {
    let mut reader = open_csv(path, &["gap_m", "omega_rad_s"])?;
    let (mut gaps, mut omegas) = (Vec::new(), Vec::new());
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        let row_no = k + 1;
        let cell = |j: usize| record.get(j).unwrap_or("");
        gaps.push(parse_cell(path, row_no, "gap_m", cell(0))?);
        omegas.push(parse_cell(path, row_no, "omega_rad_s", cell(1))?);
    }
    CalibrationData::new(gaps, omegas)
        .map_err(|source| IoError::BadDataset { path: path.to_path_buf(), source })
}

/// Reads a material table and validates every entry, so a table loaded here
/// is safe to feed into constant mixing.
pub fn read_materials_json(path: &Path) -> Result<BTreeMap<String, LJMaterial>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    let table: BTreeMap<String, LJMaterial> = serde_json::from_str(&text)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    for (name, m) in &table {
        LJMaterial::new(m.sigma_nm, m.epsilon_kj_per_mol).map_err(|source| {
            IoError::BadMaterial { path: path.to_path_buf(), name: name.clone(), source }
        })?;
    }
    Ok(table)
}

pub fn read_scenario_json(path: &Path) -> Result<ScenarioConfig, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::File {
        action: "read",
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

/// Serializes any report value as pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), IoError> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// One solver pass as it appears in a report: which pass, how it ended, and
/// the residual it ended on. Wall-clock timings are deliberately absent so
/// reports from identical runs are byte-identical.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseSummary {
    pub name: String,
    pub status: SolverStatus,
    pub iterations: usize,
    pub final_error_norm: f64,
}

/// The report JSON artifact for a scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub scenario: String,
    pub phases: Vec<PhaseSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<ErrorReport>,
}

impl ReportDocument {
    pub fn from_groove(report: &ReconstructionReport) -> Self {
        let phases = report
            .phases
            .iter()
            .map(|p| PhaseSummary {
                name: p.name.to_string(),
                status: p.trace.status(),
                iterations: p.trace.len(),
                final_error_norm: p.trace.final_record().error_norm,
            })
            .collect();
        Self { scenario: "vdw_groove".to_string(), phases, errors: report.errors.clone() }
    }

    pub fn from_magnetic(outcome: &MagneticOutcome) -> Self {
        let part = |r: &MagneticPartReport| PhaseSummary {
            name: r.part.to_string(),
            status: r.trace.status(),
            iterations: r.trace.len(),
            final_error_norm: r.trace.final_record().error_norm,
        };
        Self {
            scenario: "magnetic".to_string(),
            phases: vec![part(&outcome.perpendicular), part(&outcome.parallel)],
            errors: Some(outcome.errors.clone()),
        }
    }
}
