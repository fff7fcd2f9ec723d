//! Comparison rows, CSV emission/parsing and aligned text tables.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rom::RomVariant;

pub const CSV_HEADER: [&str; 8] = [
    "method",
    "n",
    "T",
    "rel_err_pct",
    "max_err",
    "energy_drift",
    "wall_seconds",
    "converged",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Fom,
    Rom(RomVariant),
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Fom => "FOM",
            Method::Rom(v) => v.label(),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("FOM") {
            Ok(Method::Fom)
        } else {
            s.parse().map(Method::Rom)
        }
    }
}

/// One cell of a comparison sweep.
///
/// Metric fields are `None` when the run did not converge; `last_time` then
/// records how far the solver got.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub n: Option<usize>,
    pub horizon: f64,
    pub rel_err_pct: Option<f64>,
    pub max_err: Option<f64>,
    pub energy_drift: Option<f64>,
    pub wall_seconds: f64,
    pub converged: bool,
    #[serde(default)]
    pub last_time: Option<f64>,
}

impl ReportRow {
    pub fn failed(method: Method, n: Option<usize>, horizon: f64, last_time: f64, wall: f64) -> Self {
        ReportRow {
            method,
            n,
            horizon,
            rel_err_pct: None,
            max_err: None,
            energy_drift: None,
            wall_seconds: wall,
            converged: false,
            last_time: Some(last_time),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn parse_cell(s: &str, what: &str) -> Result<Option<f64>> {
    let s = s.trim();
    if s == "-" {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Format(format!("bad {what} value {s:?}")))
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Invalid("no rows to report".into()));
    }
    match format {
        ReportFormat::Csv => emit_csv(rows),
        ReportFormat::Table => Ok(emit_table(rows)),
    }
}

fn emit_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.method.label().to_string(),
            r.n.map_or_else(String::new, |n| n.to_string()),
            r.horizon.to_string(),
            cell(r.rel_err_pct),
            cell(r.max_err),
            cell(r.energy_drift),
            r.wall_seconds.to_string(),
            r.converged.to_string(),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Inverse of the CSV output. `last_time` is not part of the CSV layout and
/// comes back as `None`.
pub fn parse_report_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let n = match field(1) {
            "" => None,
            s => Some(
                s.parse()
                    .map_err(|_| Error::Format(format!("bad n value {s:?}")))?,
            ),
        };
        let num = |i: usize, what: &str| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| Error::Format(format!("bad {what} value {:?}", field(i))))
        };
        rows.push(ReportRow {
            method: field(0).parse()?,
            n,
            horizon: num(2, "T")?,
            rel_err_pct: parse_cell(field(3), "rel_err_pct")?,
            max_err: parse_cell(field(4), "max_err")?,
            energy_drift: parse_cell(field(5), "energy_drift")?,
            wall_seconds: num(6, "wall_seconds")?,
            converged: field(7)
                .parse()
                .map_err(|_| Error::Format(format!("bad converged value {:?}", field(7))))?,
            last_time: None,
        });
    }
    Ok(rows)
}

fn sci(v: Option<f64>) -> String {
    match v {
        None => "-".into(),
        Some(x) if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e5) => format!("{x:.3e}"),
        Some(x) => format!("{x:.4}"),
    }
}

fn emit_table(rows: &[ReportRow]) -> String {
    let head = ["T", "n", "method", "E_r %", "E_inf", "|E(T)-E0|", "time (s)", "note"];
    let body: Vec<[String; 8]> = rows
        .iter()
        .map(|r| {
            [
                r.horizon.to_string(),
                r.n.map_or_else(|| "-".into(), |n| n.to_string()),
                r.method.label().into(),
                sci(r.rel_err_pct),
                sci(r.max_err),
                sci(r.energy_drift),
                format!("{:.4}", r.wall_seconds),
                match (r.converged, r.last_time) {
                    (true, _) => String::new(),
                    (false, Some(t)) => format!("failed at t={t:.4}"),
                    (false, None) => "failed".into(),
                },
            ]
        })
        .collect();
    let mut widths = head.map(str::len);
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(&head.map(String::from));
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
    out.push('\n');
    for row in &body {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
