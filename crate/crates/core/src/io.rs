//! CSV ingestion and export.
//!
//! Forecast files carry `question_id,expert_id,day,prob,expertise`, outcome
//! files `question_id,horizon,outcome`. An empty outcome field marks an
//! unresolved question. Floating-point output always uses 17 significant
//! digits so that every file written here reads back bit-exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Dataset, QuestionPanel};
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    format!("{x:.16e}")
}

/// One forecast row as read from disk, before censoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawForecast {
    pub question_id: String,
    pub expert_id: String,
    pub day: usize,
    pub prob: f64,
    pub expertise: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRecord {
    pub question_id: String,
    pub horizon: usize,
    pub outcome: Option<bool>,
}

#[derive(Debug, Deserialize)]
struct OutcomeRow {
    question_id: String,
    horizon: usize,
    outcome: Option<String>,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io {
            path: "<csv stream>".into(),
            source: io,
        },
        other => Error::Parse(format!("{other:?}")),
    }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(csv_err)?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Parse(format!(
            "expected header {}, found {}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

pub fn read_forecasts_from<R: Read>(reader: R) -> Result<Vec<RawForecast>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(
        &mut rdr,
        &["question_id", "expert_id", "day", "prob", "expertise"],
    )?;
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::Parse(format!("forecast row: {e}"))))
        .collect()
}

pub fn read_forecasts(path: &Path) -> Result<Vec<RawForecast>> {
    read_forecasts_from(open(path)?)
}

pub fn read_outcomes_from<R: Read>(reader: R) -> Result<Vec<OutcomeRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(&mut rdr, &["question_id", "horizon", "outcome"])?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<OutcomeRow>() {
        let row = row.map_err(|e| Error::Parse(format!("outcome row: {e}")))?;
        let outcome = match row.outcome.as_deref() {
            None | Some("") => None,
            Some("0") => Some(false),
            Some("1") => Some(true),
            Some(other) => {
                return Err(Error::Parse(format!(
                    "question {}: outcome must be 0 or 1, got {other}",
                    row.question_id
                )))
            }
        };
        out.push(OutcomeRecord {
            question_id: row.question_id,
            horizon: row.horizon,
            outcome,
        });
    }
    Ok(out)
}

pub fn read_outcomes(path: &Path) -> Result<Vec<OutcomeRecord>> {
    read_outcomes_from(open(path)?)
}

pub fn write_forecasts_to<W: Write>(writer: W, dataset: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["question_id", "expert_id", "day", "prob", "expertise"])
        .map_err(csv_err)?;
    for panel in dataset.panels() {
        for (t, slice) in panel.slices().iter().enumerate() {
            for obs in slice {
                w.write_record([
                    panel.question_id(),
                    &panel.experts()[obs.expert],
                    &(t + 1).to_string(),
                    &fmt_f64(obs.prob),
                    &(obs.group + 1).to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<csv stream>", e))
}

pub fn write_forecasts(path: &Path, dataset: &Dataset) -> Result<()> {
    write_forecasts_to(create(path)?, dataset)
}

pub fn write_outcomes_to<W: Write>(writer: W, panels: &[QuestionPanel]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["question_id", "horizon", "outcome"])
        .map_err(csv_err)?;
    for p in panels {
        let z = match p.outcome() {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        w.write_record([p.question_id(), &p.horizon().to_string(), z])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv stream>", e))
}

pub fn write_outcomes(path: &Path, panels: &[QuestionPanel]) -> Result<()> {
    write_outcomes_to(create(path)?, panels)
}

/// One row of an aggregate-path export.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub question_id: String,
    pub day: usize,
    pub mean_prob: f64,
    pub lo95: Option<f64>,
    pub hi95: Option<f64>,
}

pub fn write_aggregates_to<W: Write>(writer: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["question_id", "day", "mean_prob", "lo95", "hi95"])
        .map_err(csv_err)?;
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.question_id.clone(),
            r.day.to_string(),
            fmt_f64(r.mean_prob),
            opt(r.lo95),
            opt(r.hi95),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv stream>", e))
}

pub fn write_aggregates(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    write_aggregates_to(create(path)?, rows)
}

pub fn read_aggregates_from<R: Read>(reader: R) -> Result<Vec<AggregateRow>> {
    #[derive(Deserialize)]
    struct Row {
        question_id: String,
        day: usize,
        mean_prob: f64,
        lo95: Option<f64>,
        hi95: Option<f64>,
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    check_header(
        &mut rdr,
        &["question_id", "day", "mean_prob", "lo95", "hi95"],
    )?;
    rdr.deserialize::<Row>()
        .map(|r| {
            r.map(|r| AggregateRow {
                question_id: r.question_id,
                day: r.day,
                mean_prob: r.mean_prob,
                lo95: r.lo95,
                hi95: r.hi95,
            })
            .map_err(|e| Error::Parse(format!("aggregate row: {e}")))
        })
        .collect()
}

pub fn read_aggregates(path: &Path) -> Result<Vec<AggregateRow>> {
    read_aggregates_from(open(path)?)
}

/// Writes a serializable value as one pretty JSON record.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Parse(e.to_string()))?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}
