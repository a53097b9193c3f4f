//! CSV emission. The main file carries the modulus columns, the two K
//! estimates and the ratios; side files hold the modulus rows, the K rows
//! and the ratio summaries.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentReport, ExperimentRow};
use crate::error::{Error, Result};
use crate::kfunctional::KEstimate;
use crate::weight::Exponent;

/// One line of the main CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MainRecord {
    pub function_id: String,
    pub r: usize,
    pub p: Exponent,
    pub alpha: f64,
    pub t: f64,
    pub omega_main: Option<f64>,
    pub tail_zero: Option<f64>,
    pub tail_infinity: Option<f64>,
    pub omega_complete: Option<f64>,
    pub k_restricted: Option<f64>,
    pub k_full: Option<f64>,
    pub ratio14: Option<f64>,
    pub ratio_equiv: Option<f64>,
    pub ratio_full: Option<f64>,
    pub status: String,
}

/// One line of the modulus side file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusRecord {
    pub function_id: String,
    pub r: usize,
    pub p: Exponent,
    pub alpha: f64,
    pub t: f64,
    pub omega_main: Option<f64>,
    pub tail_zero: Option<f64>,
    pub tail_infinity: Option<f64>,
    pub omega_complete: Option<f64>,
    pub status: String,
}

/// One line of the K side file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRecord {
    pub function_id: String,
    pub variant: String,
    pub r: usize,
    pub p: Exponent,
    pub alpha: f64,
    pub t: f64,
    pub value: Option<f64>,
    pub approx_error_term: Option<f64>,
    pub seminorm_term: Option<f64>,
    pub candidate_id: Option<String>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub function_id: String,
    pub r: usize,
    pub p: Exponent,
    pub alpha: f64,
    pub ratio: String,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub spread: f64,
    pub trend: f64,
}

impl From<&ExperimentRow> for MainRecord {
    fn from(row: &ExperimentRow) -> Self {
        let m = row.modulus.as_ref();
        MainRecord {
            function_id: row.function_id.clone(),
            r: row.r,
            p: row.p,
            alpha: row.alpha,
            t: row.t,
            omega_main: row.omega_main(),
            tail_zero: m.map(|m| m.tail_zero),
            tail_infinity: m.map(|m| m.tail_infinity),
            omega_complete: m.map(|m| m.omega_complete),
            k_restricted: row.k_restricted.as_ref().map(|k| k.value),
            k_full: row.k_full.as_ref().map(|k| k.value),
            ratio14: row.ratio14,
            ratio_equiv: row.ratio_equiv,
            ratio_full: row.ratio_full,
            status: row.status.clone(),
        }
    }
}

impl From<&ExperimentRow> for ModulusRecord {
    fn from(row: &ExperimentRow) -> Self {
        let m = MainRecord::from(row);
        ModulusRecord {
            function_id: m.function_id,
            r: m.r,
            p: m.p,
            alpha: m.alpha,
            t: m.t,
            omega_main: m.omega_main,
            tail_zero: m.tail_zero,
            tail_infinity: m.tail_infinity,
            omega_complete: m.omega_complete,
            status: m.status,
        }
    }
}

impl KRecord {
    pub fn new(function_id: &str, r: usize, p: Exponent, alpha: f64, t: f64, k: &crate::Result<KEstimate>) -> Self {
        let ok = k.as_ref().ok();
        KRecord {
            function_id: function_id.to_string(),
            variant: ok.map_or_else(String::new, |k| k.variant.to_string()),
            r,
            p,
            alpha,
            t,
            value: ok.map(|k| k.value),
            approx_error_term: ok.map(|k| k.approx_error_term),
            seminorm_term: ok.map(|k| k.seminorm_term),
            candidate_id: ok.map(|k| k.candidate_id.to_string()),
            status: match k {
                Ok(_) => "ok".into(),
                Err(e) => format!("error: {e}"),
            },
        }
    }
}

fn k_record(row: &ExperimentRow, variant: &str, k: Option<&KEstimate>) -> KRecord {
    KRecord {
        function_id: row.function_id.clone(),
        variant: variant.to_string(),
        r: row.r,
        p: row.p,
        alpha: row.alpha,
        t: row.t,
        value: k.map(|k| k.value),
        approx_error_term: k.map(|k| k.approx_error_term),
        seminorm_term: k.map(|k| k.seminorm_term),
        candidate_id: k.map(|k| k.candidate_id.to_string()),
        status: if k.is_some() { "ok".into() } else { row.status.clone() },
    }
}

pub const MAIN_HEADER: [&str; 15] = [
    "function_id",
    "r",
    "p",
    "alpha",
    "t",
    "omega_main",
    "tail_zero",
    "tail_infinity",
    "omega_complete",
    "k_restricted",
    "k_full",
    "ratio14",
    "ratio_equiv",
    "ratio_full",
    "status",
];

pub const MODULUS_HEADER: [&str; 10] = [
    "function_id",
    "r",
    "p",
    "alpha",
    "t",
    "omega_main",
    "tail_zero",
    "tail_infinity",
    "omega_complete",
    "status",
];

pub const K_HEADER: [&str; 11] = [
    "function_id",
    "variant",
    "r",
    "p",
    "alpha",
    "t",
    "value",
    "approx_error_term",
    "seminorm_term",
    "candidate_id",
    "status",
];

pub const SUMMARY_HEADER: [&str; 10] = [
    "function_id",
    "r",
    "p",
    "alpha",
    "ratio",
    "count",
    "min",
    "max",
    "spread",
    "trend",
];

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Header line, then one serialized line per record.
pub fn write_records<W: Write, T: Serialize>(out: W, header: &[&str], records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    for rec in records {
        w.serialize(rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_main_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    write_records(out, &MAIN_HEADER, report.rows.iter().map(MainRecord::from))
}

pub fn write_modulus_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    write_records(out, &MODULUS_HEADER, report.rows.iter().map(ModulusRecord::from))
}

pub fn write_k_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let recs = report.rows.iter().flat_map(|row| {
        [
            k_record(row, "restricted", row.k_restricted.as_ref()),
            k_record(row, "full", row.k_full.as_ref()),
        ]
    });
    write_records(out, &K_HEADER, recs)
}

pub fn write_summary_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let recs = report.summaries.iter().map(|s| SummaryRecord {
        function_id: s.function_id.clone(),
        r: s.r,
        p: s.p,
        alpha: s.alpha,
        ratio: s.ratio.name().to_string(),
        count: s.count,
        min: s.min,
        max: s.max,
        spread: s.spread,
        trend: s.trend,
    });
    write_records(out, &SUMMARY_HEADER, recs)
}

pub fn read_main_csv(text: &str) -> Result<Vec<MainRecord>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<MainRecord>, _>>()
        .map_err(csv_error)
}

/// `run.csv` → `run.<tag>.csv`.
pub fn side_path(main: &Path, tag: &str) -> PathBuf {
    let stem = main.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    main.with_file_name(format!("{stem}.{tag}.csv"))
}

/// Writes the main CSV and its `modulus`, `kfunc` and `summary` side files;
/// returns every path written.
pub fn emit_csv(report: &ExperimentReport, main: &Path) -> Result<Vec<PathBuf>> {
    let open = |p: &Path| {
        std::fs::File::create(p)
            .map(std::io::BufWriter::new)
            .map_err(|e| Error::Io(format!("{}: {e}", p.display())))
    };
    let m = side_path(main, "modulus");
    let k = side_path(main, "kfunc");
    let s = side_path(main, "summary");
    write_main_csv(report, open(main)?)?;
    write_modulus_csv(report, open(&m)?)?;
    write_k_csv(report, open(&k)?)?;
    write_summary_csv(report, open(&s)?)?;
    Ok(vec![main.to_path_buf(), m, k, s])
}

/// CSV files and, when asked, the SVG chart drawn from the main CSV.
pub fn emit_reports(report: &ExperimentReport, csv: Option<&Path>, svg: Option<&Path>) -> Result<Vec<PathBuf>> {
    let mut written = match csv {
        Some(p) => emit_csv(report, p)?,
        None => Vec::new(),
    };
    if let Some(p) = svg {
        let mut buf = Vec::new();
        write_main_csv(report, &mut buf)?;
        let text = String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))?;
        let chart = super::svg::render_svg(&read_main_csv(&text)?);
        std::fs::write(p, chart).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        written.push(p.to_path_buf());
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kfunctional::{CandidateId, KVariant};

    fn row() -> ExperimentRow {
        ExperimentRow {
            function_id: "exp_decay".into(),
            r: 1,
            p: Exponent::Infinity,
            alpha: 0.0,
            t: 0.0123456789,
            omega_orders: vec![Some(0.25)],
            modulus: None,
            k_restricted: Some(KEstimate {
                t: 0.0123456789,
                h: 0.01,
                value: 0.125,
                approx_error_term: 0.1,
                seminorm_term: 0.025,
                candidate_id: CandidateId::Steklov,
                variant: KVariant::Restricted,
            }),
            k_full: None,
            ratio14: Some(0.5),
            ratio_equiv: Some(0.5),
            ratio_full: None,
            status: "ok".into(),
        }
    }

    #[test]
    fn empty_report_is_header_only() {
        let mut buf = Vec::new();
        write_main_csv(&ExperimentReport::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", MAIN_HEADER.join(",")));
        let mut buf = Vec::new();
        write_k_csv(&ExperimentReport::default(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", K_HEADER.join(",")));
    }

    #[test]
    fn one_row_round_trips() {
        let rep = ExperimentReport {
            rows: vec![row()],
            summaries: Vec::new(),
        };
        let mut buf = Vec::new();
        write_main_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let back = read_main_csv(&text).unwrap();
        assert_eq!(back, vec![MainRecord::from(&rep.rows[0])]);
        assert_eq!(back[0].p, Exponent::Infinity);
        assert_eq!(back[0].tail_zero, None);

        let mut buf = Vec::new();
        write_k_csv(&rep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        let ks: Vec<KRecord> = rd.deserialize().collect::<std::result::Result<_, _>>().unwrap();
        assert_eq!(ks.len(), 2);
        assert_eq!(ks[0].candidate_id.as_deref(), Some("steklov"));
        assert_eq!(ks[0].value, Some(0.125));
        assert_eq!(ks[1].value, None);
    }

    #[test]
    fn side_paths() {
        assert_eq!(side_path(Path::new("out/run.csv"), "kfunc"), Path::new("out/run.kfunc.csv"));
    }
}
