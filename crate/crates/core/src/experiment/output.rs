//! CSV and JSON writers. Floats carry 17 significant digits so values
//! round-trip bit-exactly; missing values are `NaN` in CSV and `null` in JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::Result;
use crate::stats::Summary;

use super::config::OutputFormat;
use super::run::{CellSummary, Check, ExperimentRecord};

pub const CSV_HEADER: &str =
    "kind,family,n,d,q,variant,epsilon,theta,replication,seed,statistic_name,value,runtime_ms";

/// `{:.16e}`; non-finite values print as `NaN`, `inf` or `-inf`.
pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub fn to_csv(record: &ExperimentRecord) -> String {
    let spec = &record.spec;
    let mut out = String::with_capacity(64 * (record.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &record.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            spec.kind,
            r.family,
            r.n,
            r.d,
            fmt_float(r.q),
            spec.variant.name(),
            fmt_opt(r.epsilon),
            fmt_opt(r.theta),
            r.replication,
            r.seed,
            r.statistic,
            fmt_float(r.value),
            r.runtime_ms
        );
    }
    out
}

fn num(x: f64) -> Box<RawValue> {
    let s = if x.is_finite() { format!("{x:.16e}") } else { "null".to_string() };
    RawValue::from_string(s).expect("formatted float is valid JSON")
}

fn opt_num(x: Option<f64>) -> Box<RawValue> {
    x.map_or_else(|| num(f64::NAN), num)
}

#[derive(Serialize)]
struct JsonRow<'a> {
    kind: &'static str,
    family: &'static str,
    n: usize,
    d: usize,
    q: Box<RawValue>,
    variant: &'static str,
    epsilon: Box<RawValue>,
    theta: Box<RawValue>,
    replication: usize,
    seed: u64,
    statistic_name: &'a str,
    value: Box<RawValue>,
    runtime_ms: u64,
}

#[derive(Serialize)]
struct JsonSummary {
    count: usize,
    mean: Box<RawValue>,
    std_err: Box<RawValue>,
    q10: Box<RawValue>,
    q50: Box<RawValue>,
    q90: Box<RawValue>,
    min: Box<RawValue>,
    max: Box<RawValue>,
}

impl From<&Summary> for JsonSummary {
    fn from(s: &Summary) -> Self {
        Self {
            count: s.count,
            mean: num(s.mean),
            std_err: num(s.std_err),
            q10: num(s.q10),
            q50: num(s.q50),
            q90: num(s.q90),
            min: num(s.min),
            max: num(s.max),
        }
    }
}

#[derive(Serialize)]
struct JsonCell<'a> {
    family: &'static str,
    n: usize,
    epsilon: Box<RawValue>,
    theta: Box<RawValue>,
    statistic_name: &'a str,
    summary: Option<JsonSummary>,
    missing: usize,
}

impl<'a> From<&'a CellSummary> for JsonCell<'a> {
    fn from(c: &'a CellSummary) -> Self {
        Self {
            family: c.family.name(),
            n: c.n,
            epsilon: opt_num(c.epsilon),
            theta: opt_num(c.theta),
            statistic_name: &c.statistic,
            summary: c.summary.as_ref().map(JsonSummary::from),
            missing: c.missing,
        }
    }
}

#[derive(Serialize)]
struct JsonCheck<'a> {
    name: &'a str,
    value: Box<RawValue>,
    target: &'a str,
    pass: Option<bool>,
}

#[derive(Serialize)]
struct JsonSummaryBlock<'a> {
    cells: Vec<JsonCell<'a>>,
    checks: Vec<JsonCheck<'a>>,
    failures: usize,
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    spec: &'a super::config::ExperimentSpec,
    rows: Vec<JsonRow<'a>>,
    summary: JsonSummaryBlock<'a>,
}

pub fn to_json(record: &ExperimentRecord) -> Result<String> {
    let spec = &record.spec;
    let rows = record
        .rows
        .iter()
        .map(|r| JsonRow {
            kind: spec.kind.name(),
            family: r.family.name(),
            n: r.n,
            d: r.d,
            q: num(r.q),
            variant: spec.variant.name(),
            epsilon: opt_num(r.epsilon),
            theta: opt_num(r.theta),
            replication: r.replication,
            seed: r.seed,
            statistic_name: &r.statistic,
            value: num(r.value),
            runtime_ms: r.runtime_ms,
        })
        .collect();
    let checks = record
        .checks
        .iter()
        .map(|c: &Check| JsonCheck { name: &c.name, value: num(c.value), target: &c.target, pass: c.pass })
        .collect();
    let doc = JsonRecord {
        spec,
        rows,
        summary: JsonSummaryBlock {
            cells: record.summaries.iter().map(JsonCell::from).collect(),
            checks,
            failures: record.failures(),
        },
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

/// Writes `<dir>/<kind>.<ext>` and returns its path.
pub fn emit_results(record: &ExperimentRecord, format: OutputFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let (ext, body) = match format {
        OutputFormat::Csv => ("csv", to_csv(record)),
        OutputFormat::Json => ("json", to_json(record)?),
    };
    let path = dir.join(format!("{}.{ext}", record.spec.kind));
    std::fs::write(&path, body)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{parse_config, ExperimentKind};
    use crate::experiment::run::run_experiment;

    fn record() -> ExperimentRecord {
        let spec = parse_config(
            "[stability]\nfamily = sk\nn = 6\nepsilon = 0.25, 0.5\nreplications = 3\n",
            ExperimentKind::Stability,
        )
        .unwrap();
        run_experiment(&spec).unwrap()
    }

    #[test]
    fn empty_record_is_header_only() {
        let mut r = record();
        r.rows.clear();
        assert_eq!(to_csv(&r), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn csv_row_count_and_newline() {
        let r = record();
        let csv = to_csv(&r);
        assert_eq!(csv.lines().count(), 1 + 3 * 2 * 5);
        assert!(csv.ends_with('\n') && !csv.ends_with("\n\n"));
        assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 13));
    }

    #[test]
    fn json_round_trips_bit_exactly() {
        let r = record();
        let text = to_json(&r).unwrap();
        assert!(text.ends_with("}\n"));
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let rows = v["rows"].as_array().unwrap();
        assert_eq!(rows.len(), r.rows.len());
        for (j, row) in rows.iter().zip(&r.rows) {
            match j["value"].as_f64() {
                Some(x) => assert_eq!(x.to_bits(), row.value.to_bits()),
                None => assert!(row.value.is_nan()),
            }
            assert_eq!(j["theta"].as_f64().unwrap().to_bits(), row.theta.unwrap().to_bits());
        }
    }

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(f64::NAN), "NaN");
        let x = std::f64::consts::PI;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
