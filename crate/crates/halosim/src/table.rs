//! CSV tables. Floats are written with 17 significant digits so values
//! survive a round trip bit-for-bit; absent values are blank.

use std::io;
use std::path::Path;

use thiserror::Error;

pub const SWEEP_HEADER: [&str; 11] = [
    "scenario",
    "policy",
    "lambda",
    "rho",
    "analytic_T",
    "simulated_T",
    "ci_halfwidth",
    "jobs_counted",
    "seed",
    "regime",
    "error",
];

pub const ANALYZE_HEADER: [&str; 6] = ["scenario", "lambda", "rho", "T_prop", "T_opt", "regime"];

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad header: expected {expected:?}")]
    Header { expected: Vec<String> },
    #[error("row {row}, column {column}: cannot parse {value:?}")]
    Field {
        row: usize,
        column: &'static str,
        value: String,
    },
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn format_opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// One simulated (policy, lambda) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub policy: String,
    pub lambda: f64,
    pub rho: f64,
    pub analytic_t: Option<f64>,
    pub simulated_t: Option<f64>,
    pub ci_halfwidth: Option<f64>,
    pub jobs_counted: Option<u64>,
    pub seed: u64,
    pub regime: Option<String>,
    pub error: Option<String>,
}

impl SweepRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.scenario.clone(),
            self.policy.clone(),
            format_float(self.lambda),
            format_float(self.rho),
            format_opt(self.analytic_t),
            format_opt(self.simulated_t),
            format_opt(self.ci_halfwidth),
            self.jobs_counted.map(|j| j.to_string()).unwrap_or_default(),
            self.seed.to_string(),
            self.regime.clone().unwrap_or_default(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

/// One row of the analytic comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeRow {
    pub scenario: String,
    pub lambda: f64,
    pub rho: f64,
    /// Mean response time at the capacity-proportional split.
    pub t_prop: f64,
    /// Optimal mean response time (closed form or active-set solver).
    pub t_opt: f64,
    pub regime: String,
}

impl AnalyzeRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.scenario.clone(),
            format_float(self.lambda),
            format_float(self.rho),
            format_float(self.t_prop),
            format_float(self.t_opt),
            self.regime.clone(),
        ]
    }
}

fn write_records<W: io::Write>(
    out: W,
    header: &[&str],
    records: impl Iterator<Item = Vec<String>>,
) -> Result<(), TableError> {
    let mut w = csv::WriterBuilder::new().from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep<W: io::Write>(out: W, rows: &[SweepRow]) -> Result<(), TableError> {
    write_records(out, &SWEEP_HEADER, rows.iter().map(SweepRow::record))
}

pub fn write_analyze<W: io::Write>(out: W, rows: &[AnalyzeRow]) -> Result<(), TableError> {
    write_records(out, &ANALYZE_HEADER, rows.iter().map(AnalyzeRow::record))
}

pub fn sweep_to_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_sweep(&mut buf, rows).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

pub fn analyze_to_string(rows: &[AnalyzeRow]) -> String {
    let mut buf = Vec::new();
    write_analyze(&mut buf, rows).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

fn parse_field<T: std::str::FromStr>(
    row: usize,
    column: &'static str,
    value: &str,
) -> Result<T, TableError> {
    value.parse().map_err(|_| TableError::Field {
        row,
        column,
        value: value.to_string(),
    })
}

fn parse_opt<T: std::str::FromStr>(
    row: usize,
    column: &'static str,
    value: &str,
) -> Result<Option<T>, TableError> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse_field(row, column, value).map(Some)
    }
}

fn opt_string(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

pub fn read_sweep<R: io::Read>(input: R) -> Result<Vec<SweepRow>, TableError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(TableError::Header {
            expected: SWEEP_HEADER.iter().map(|s| s.to_string()).collect(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let r = record?;
        let row = i + 1;
        rows.push(SweepRow {
            scenario: r[0].to_string(),
            policy: r[1].to_string(),
            lambda: parse_field(row, "lambda", &r[2])?,
            rho: parse_field(row, "rho", &r[3])?,
            analytic_t: parse_opt(row, "analytic_T", &r[4])?,
            simulated_t: parse_opt(row, "simulated_T", &r[5])?,
            ci_halfwidth: parse_opt(row, "ci_halfwidth", &r[6])?,
            jobs_counted: parse_opt(row, "jobs_counted", &r[7])?,
            seed: parse_field(row, "seed", &r[8])?,
            regime: opt_string(&r[9]),
            error: opt_string(&r[10]),
        });
    }
    Ok(rows)
}

pub fn read_sweep_file(path: &Path) -> Result<Vec<SweepRow>, TableError> {
    read_sweep(std::fs::File::open(path)?)
}
