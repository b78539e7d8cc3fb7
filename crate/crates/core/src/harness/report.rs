use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "h,quantum_re,quantum_im,semicl_re,semicl_im,abs_err,rel_err,n_eigenvalues,wall_ms";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub h: f64,
    pub quantum: Complex64,
    pub semiclassical: Complex64,
    pub abs_err: f64,
    pub rel_err: f64,
    pub n_eigenvalues: usize,
    pub wall_ms: Option<f64>,
}

impl ReportRow {
    pub fn new(h: f64, quantum: Complex64, semiclassical: Complex64, n_eigenvalues: usize, wall_ms: Option<f64>) -> Self {
        let abs_err = (quantum - semiclassical).norm();
        Self { h, quantum, semiclassical, abs_err, rel_err: abs_err / quantum.norm(), n_eigenvalues, wall_ms }
    }

    fn csv_line(&self) -> String {
        let wall = self.wall_ms.map(|w| format!("{w:?}")).unwrap_or_default();
        format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{},{}",
            self.h,
            self.quantum.re,
            self.quantum.im,
            self.semiclassical.re,
            self.semiclassical.im,
            self.abs_err,
            self.rel_err,
            self.n_eigenvalues,
            wall
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudeRecord {
    pub h: f64,
    pub re: f64,
    pub im: f64,
}

/// Per-component breakdown written to `components.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentRecord {
    pub label: String,
    pub period: f64,
    pub dim: usize,
    pub action: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_squared: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winding: Option<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actions: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curvature: Option<f64>,
    pub phase_group: Option<String>,
    pub phase: Option<i32>,
    pub fhat: f64,
    pub amplitudes: Vec<AmplitudeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralDensityReport {
    /// Sorted by decreasing `h`.
    pub rows: Vec<ReportRow>,
    pub calibration_h: f64,
    pub phases: BTreeMap<String, i32>,
    pub components: Vec<ComponentRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrittenFiles {
    pub report: PathBuf,
    pub components: PathBuf,
    pub plot: Option<PathBuf>,
}

impl SpectralDensityReport {
    /// Rows other than the calibration one.
    pub fn evaluation_rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.h != self.calibration_h)
    }

    pub fn row(&self, h: f64) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.h == h)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn components_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Document<'a> {
            calibration_h: f64,
            phases: &'a BTreeMap<String, i32>,
            components: &'a [ComponentRecord],
        }
        Ok(serde_json::to_string_pretty(&Document {
            calibration_h: self.calibration_h,
            phases: &self.phases,
            components: &self.components,
        })?)
    }

    pub fn gnuplot(&self, csv_name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set key autotitle columnhead");
        let _ = writeln!(s, "set logscale xy");
        let _ = writeln!(s, "set xlabel 'h'");
        let _ = writeln!(s, "set multiplot layout 2,1");
        let _ = writeln!(s, "set ylabel 'relative error'");
        let _ = writeln!(s, "plot '{csv_name}' using 1:7 with linespoints title 'rel_err'");
        let _ = writeln!(s, "unset logscale y");
        let _ = writeln!(s, "set ylabel 'Re G'");
        let _ = writeln!(
            s,
            "plot '{csv_name}' using 1:2 with linespoints title 'quantum', '{csv_name}' using 1:4 with linespoints title 'semiclassical'"
        );
        let _ = writeln!(s, "unset multiplot");
        s
    }

    pub fn write(&self, dir: &Path, emit_plots: bool) -> Result<WrittenFiles> {
        std::fs::create_dir_all(dir)?;
        let report = dir.join("report.csv");
        std::fs::write(&report, self.to_csv())?;
        let components = dir.join("components.json");
        std::fs::write(&components, self.components_json()?)?;
        let plot = if emit_plots {
            let path = dir.join("plot.gnuplot");
            std::fs::write(&path, self.gnuplot("report.csv"))?;
            Some(path)
        } else {
            None
        };
        Ok(WrittenFiles { report, components, plot })
    }
}

fn parse_field<T: std::str::FromStr>(line: usize, name: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::MalformedReport(format!("line {line}: cannot parse {name} from {raw:?}")))
}

fn consistent(stored: f64, recomputed: f64) -> bool {
    stored == recomputed || (stored - recomputed).abs() <= 4.0 * f64::EPSILON * recomputed.abs()
}

/// Parses `report.csv`, checking row order and recomputing the error columns.
pub fn load_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == CSV_HEADER => {}
        other => return Err(Error::MalformedReport(format!("unexpected header {other:?}"))),
    }
    let mut rows: Vec<ReportRow> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::MalformedReport(format!("line {line_no}: expected 9 fields, found {}", fields.len())));
        }
        let h: f64 = parse_field(line_no, "h", fields[0])?;
        let quantum = Complex64::new(parse_field(line_no, "quantum_re", fields[1])?, parse_field(line_no, "quantum_im", fields[2])?);
        let semiclassical =
            Complex64::new(parse_field(line_no, "semicl_re", fields[3])?, parse_field(line_no, "semicl_im", fields[4])?);
        let abs_err: f64 = parse_field(line_no, "abs_err", fields[5])?;
        let rel_err: f64 = parse_field(line_no, "rel_err", fields[6])?;
        let n_eigenvalues: usize = parse_field(line_no, "n_eigenvalues", fields[7])?;
        let wall_ms = if fields[8].is_empty() { None } else { Some(parse_field(line_no, "wall_ms", fields[8])?) };
        let row = ReportRow::new(h, quantum, semiclassical, n_eigenvalues, wall_ms);
        if !consistent(abs_err, row.abs_err) || !(consistent(rel_err, row.rel_err) || rel_err.is_nan() && row.rel_err.is_nan()) {
            return Err(Error::MalformedReport(format!("line {line_no}: error columns disagree with stored values")));
        }
        if let Some(prev) = rows.last() {
            if !(h < prev.h) {
                return Err(Error::MalformedReport(format!("line {line_no}: rows must be sorted by decreasing h")));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
