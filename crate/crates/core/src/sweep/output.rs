//! Deterministic CSV and JSON tables. Every file starts with a header
//! carrying the schema version and the config hash.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{ConvergenceReport, Format, PointFailure, PointResult, SweepReport};

pub const SCHEMA_VERSION: u32 = 1;

fn num(x: f64) -> String {
    format!("{x:.12e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn header(w: &mut impl Write, hash: &str) -> io::Result<()> {
    writeln!(w, "# rabi-sweep schema {SCHEMA_VERSION}; config sha256 {hash}")
}

fn csv_writer(path: &Path, hash: &str) -> io::Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    header(&mut f, hash)?;
    Ok(csv::Writer::from_writer(f))
}

fn finish(w: csv::Writer<BufWriter<File>>) -> io::Result<()> {
    w.into_inner().map_err(|e| e.into_error())?.flush()
}

const POINT_COLUMNS: [&str; 23] = [
    "omega_d",
    "k_max",
    "re_omega1",
    "im_omega1",
    "re_omega2",
    "im_omega2",
    "re_omega3",
    "im_omega3",
    "iout_ss",
    "g2_ss",
    "omega_slow",
    "c_min",
    "c_max",
    "iout_min",
    "iout_max",
    "g2_min",
    "g2_max",
    "min_eig_min",
    "min_eig_max",
    "secondary_weight",
    "bracket_inside",
    "bracket_total",
    "bracket_worst_excess",
];

fn point_row(p: &PointResult) -> Vec<String> {
    let mut row = vec![num(p.params.omega_d), p.k_max.to_string()];
    for k in 0..3 {
        match p.rates.get(k) {
            Some(z) => row.extend([num(z[0]), num(z[1])]),
            None => row.extend([String::new(), String::new()]),
        }
    }
    match &p.steady {
        Some(s) => row.extend([num(s.iout), opt(s.g2)]),
        None => row.extend([String::new(), String::new()]),
    }
    match &p.metastable {
        Some(m) => row.extend([
            num(m.omega_1),
            num(m.c_min),
            num(m.c_max),
            num(m.iout_min),
            num(m.iout_max),
            opt(m.g2_min),
            opt(m.g2_max),
            num(m.min_eigenvalue_min),
            num(m.min_eigenvalue_max),
            opt(m.secondary_weight),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 10)),
    }
    match &p.bracket {
        Some(b) => row.extend([b.inside.to_string(), b.total.to_string(), num(b.worst_excess)]),
        None => row.extend(std::iter::repeat_n(String::new(), 3)),
    }
    row
}

/// `points.csv`, `transient.csv` and `errors.csv`.
pub fn write_csv(report: &SweepReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let axis = report.axis.name();
    let hash = &report.config_hash;

    let points = dir.join("points.csv");
    let mut w = csv_writer(&points, hash)?;
    let mut cols = vec!["status", axis];
    cols.extend(POINT_COLUMNS);
    w.write_record(&cols)?;
    for outcome in &report.outcomes {
        let mut row = Vec::with_capacity(cols.len());
        match outcome {
            Ok(p) => {
                row.extend(["ok".to_string(), num(p.value)]);
                row.extend(point_row(p));
            }
            Err(e) => {
                row.extend([format!("error:{}", e.stage), num(e.value)]);
                row.resize(cols.len(), String::new());
            }
        }
        w.write_record(&row)?;
    }
    finish(w)?;

    let transient = dir.join("transient.csv");
    let mut w = csv_writer(&transient, hash)?;
    w.write_record([axis, "tau_gamma", "Iout", "g2"])?;
    for p in report.successes() {
        for r in &p.transient {
            w.write_record([num(p.value), num(r.tau_gamma), num(r.iout), opt(r.g2)])?;
        }
    }
    finish(w)?;

    let errors = dir.join("errors.csv");
    let mut w = csv_writer(&errors, hash)?;
    w.write_record([axis, "stage", "message"])?;
    for e in report.failures() {
        w.write_record([num(e.value), e.stage.to_string(), e.message.clone()])?;
    }
    finish(w)?;

    Ok(vec![points, transient, errors])
}

#[derive(Serialize)]
struct JsonReport<'a> {
    schema: u32,
    config_sha256: &'a str,
    axis: &'static str,
    points: Vec<&'a PointResult>,
    errors: Vec<&'a PointFailure>,
}

/// Everything in one `sweep.json`.
pub fn write_json(report: &SweepReport, dir: &Path) -> io::Result<Vec<PathBuf>> {
    let doc = JsonReport {
        schema: SCHEMA_VERSION,
        config_sha256: &report.config_hash,
        axis: report.axis.name(),
        points: report.successes().collect(),
        errors: report.failures().collect(),
    };
    let path = dir.join("sweep.json");
    let mut f = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut f, &doc)?;
    writeln!(f)?;
    f.flush()?;
    Ok(vec![path])
}

pub fn write_report(report: &SweepReport, dir: &Path, format: Format) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    match format {
        Format::Csv => write_csv(report, dir),
        Format::Json => write_json(report, dir),
    }
}

/// `convergence.csv` (or `.json`) for a batch of audits.
pub fn write_convergence(reports: &[ConvergenceReport], axis: &str, hash: &str, dir: &Path, format: Format) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    match format {
        Format::Csv => {
            let path = dir.join("convergence.csv");
            let mut w = csv_writer(&path, hash)?;
            w.write_record([axis, "n_fock", "n_dressed", "k_max", "drift_omega1", "drift_iout", "drift_g2", "flagged", "error"])?;
            for r in reports {
                w.write_record([
                    num(r.value),
                    r.n_fock.to_string(),
                    r.n_dressed.to_string(),
                    r.k_max.to_string(),
                    num(r.drift_omega_1),
                    num(r.drift_iout),
                    num(r.drift_g2),
                    r.flagged.to_string(),
                    r.error.clone().unwrap_or_default(),
                ])?;
            }
            finish(w)?;
            Ok(path)
        }
        Format::Json => {
            let path = dir.join("convergence.json");
            let doc = serde_json::json!({ "schema": SCHEMA_VERSION, "config_sha256": hash, "axis": axis, "points": reports });
            fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")?;
            Ok(path)
        }
    }
}
