//! CSV exchange formats and atomic file output.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::AngularPose;
use crate::harness::{SessionRow, TaskKind};
use crate::pointing::{EventKind, MotionTrace, TraceEvent};

/// One row of the results CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub participant: u32,
    pub task_kind: TaskKind,
    pub range_m: f64,
    pub filter_on: bool,
    pub completion_s: f64,
    pub error_count: u32,
    pub timed_out: bool,
    pub seed: u64,
}

impl From<&SessionRow> for ResultRow {
    fn from(row: &SessionRow) -> Self {
        Self {
            participant: row.participant,
            task_kind: row.kind(),
            range_m: row.range_m(),
            filter_on: row.filter_on(),
            completion_s: row.result.completion_s,
            error_count: row.result.error_count,
            timed_out: row.result.timed_out,
            seed: row.result.config.seed,
        }
    }
}

impl ResultRow {
    fn check(&self) -> std::result::Result<(), String> {
        if !(self.range_m.is_finite() && self.range_m > 0.0) {
            return Err(format!("range_m must be positive, got {}", self.range_m));
        }
        if !(self.completion_s.is_finite() && self.completion_s > 0.0) {
            return Err(format!(
                "completion_s must be positive, got {}",
                self.completion_s
            ));
        }
        Ok(())
    }
}

/// One row of the pose trace CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub raw_yaw_deg: f64,
    pub raw_pitch_deg: f64,
    pub filt_yaw_deg: f64,
    pub filt_pitch_deg: f64,
}

impl TraceRow {
    pub fn new(raw: &AngularPose, filtered: &AngularPose) -> Self {
        Self {
            t_s: raw.t,
            raw_yaw_deg: raw.yaw_deg,
            raw_pitch_deg: raw.pitch_deg,
            filt_yaw_deg: filtered.yaw_deg,
            filt_pitch_deg: filtered.pitch_deg,
        }
    }

    pub fn raw(&self) -> AngularPose {
        AngularPose::new(self.t_s, self.raw_yaw_deg, self.raw_pitch_deg)
    }

    pub fn filtered(&self) -> AngularPose {
        AngularPose::new(self.t_s, self.filt_yaw_deg, self.filt_pitch_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub t_s: f64,
    pub kind: EventKind,
    pub detail: String,
}

impl From<&TraceEvent> for EventRow {
    fn from(e: &TraceEvent) -> Self {
        Self {
            t_s: e.t,
            kind: e.kind,
            detail: e.detail.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Off,
    On,
}

impl From<bool> for Arm {
    fn from(filter_on: bool) -> Self {
        if filter_on {
            Arm::On
        } else {
            Arm::Off
        }
    }
}

/// One row of the plot CSV: mean and SD of completion time per arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub kind: TaskKind,
    pub range_m: f64,
    pub arm: Arm,
    pub mean_s: f64,
    pub sd_s: f64,
}

pub fn write_rows<W: Write, T: Serialize>(out: W, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// csv takes the header from the first serialized row, so an empty table
/// gets its header written by hand.
fn write_rows_with_header<W: Write, T: Serialize>(
    out: W,
    header: &[&str],
    rows: &[T],
) -> Result<()> {
    if rows.is_empty() {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header)?;
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        return Ok(());
    }
    write_rows(out, rows)
}

pub const RESULTS_HEADER: [&str; 8] = [
    "participant",
    "task_kind",
    "range_m",
    "filter_on",
    "completion_s",
    "error_count",
    "timed_out",
    "seed",
];
pub const TRACE_HEADER: [&str; 5] = [
    "t_s",
    "raw_yaw_deg",
    "raw_pitch_deg",
    "filt_yaw_deg",
    "filt_pitch_deg",
];
pub const EVENTS_HEADER: [&str; 3] = ["t_s", "kind", "detail"];
pub const PLOT_HEADER: [&str; 5] = ["kind", "range_m", "arm", "mean_s", "sd_s"];

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    write_rows_with_header(out, &RESULTS_HEADER, rows)
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow]) -> Result<()> {
    write_rows_with_header(out, &TRACE_HEADER, rows)
}

pub fn write_events<W: Write>(out: W, rows: &[EventRow]) -> Result<()> {
    write_rows_with_header(out, &EVENTS_HEADER, rows)
}

pub fn write_plot<W: Write>(out: W, rows: &[PlotRow]) -> Result<()> {
    write_rows_with_header(out, &PLOT_HEADER, rows)
}

/// Splits a motion trace into trace and event rows.
pub fn motion_trace_rows(trace: &MotionTrace) -> (Vec<TraceRow>, Vec<EventRow>) {
    let samples = trace
        .samples
        .iter()
        .map(|s| TraceRow::new(&s.raw, &s.filtered))
        .collect();
    let events = trace.events.iter().map(EventRow::from).collect();
    (samples, events)
}

fn read_rows<T: DeserializeOwned>(
    input: impl Read,
    path: &Path,
    header: &[&str],
    check: impl Fn(&T) -> std::result::Result<(), String>,
) -> Result<Vec<T>> {
    let malformed = |line: u64, reason: String| Error::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut rdr = csv::Reader::from_reader(input);
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found != header {
        return Err(malformed(
            1,
            format!(
                "expected header {}, found {}",
                header.join(","),
                found.join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            malformed(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row: T = record
            .deserialize(None)
            .map_err(|e| malformed(line, e.to_string()))?;
        check(&row).map_err(|reason| malformed(line, reason))?;
        out.push(row);
    }
    Ok(out)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    read_results_from(open(path)?, path)
}

pub fn read_results_from(input: impl Read, path: &Path) -> Result<Vec<ResultRow>> {
    read_rows(input, path, &RESULTS_HEADER, ResultRow::check)
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    read_rows(open(path)?, path, &TRACE_HEADER, |r: &TraceRow| {
        let all = [
            r.t_s,
            r.raw_yaw_deg,
            r.raw_pitch_deg,
            r.filt_yaw_deg,
            r.filt_pitch_deg,
        ];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err("non-finite value".into())
        }
    })
}

pub fn read_events(path: &Path) -> Result<Vec<EventRow>> {
    read_rows(open(path)?, path, &EVENTS_HEADER, |_: &EventRow| Ok(()))
}

pub fn read_plot(path: &Path) -> Result<Vec<PlotRow>> {
    read_rows(open(path)?, path, &PLOT_HEADER, |_: &PlotRow| Ok(()))
}

/// Writes `path` through a temporary file in the same directory and
/// renames it into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
