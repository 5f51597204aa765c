//! Analysis of a results table, zone queries and run manifests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{classify_zone, comfort_angles, Zone};
use crate::harness::TaskKind;
use crate::io::{Arm, PlotRow, ResultRow};
use crate::stats::{
    mean_sd, paired_t_test, significance_label, summarize, PairedSamples, Significance, SummaryRow,
    TTestResult,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Paired comparison of the two arms for one (kind, range) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub kind: TaskKind,
    pub range_m: f64,
    pub pairs: usize,
    pub summary: SummaryRow,
    /// Absent with fewer than two pairs.
    pub t_test: Option<TTestResult>,
    pub label: Option<Significance>,
    pub timeouts_off: usize,
    pub timeouts_on: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub alpha: f64,
    pub cells: Vec<CellReport>,
}

impl AnalysisReport {
    pub fn cell(&self, kind: TaskKind, range_m: f64) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.kind == kind && c.range_m == range_m)
    }
}

#[derive(Default)]
struct Cell {
    off: BTreeMap<u32, ResultRow>,
    on: BTreeMap<u32, ResultRow>,
}

fn group(rows: &[ResultRow]) -> Result<BTreeMap<(TaskKind, u64), Cell>> {
    let mut cells: BTreeMap<(TaskKind, u64), Cell> = BTreeMap::new();
    for row in rows {
        // positive floats order like their bit patterns
        let cell = cells
            .entry((row.task_kind, row.range_m.to_bits()))
            .or_default();
        let arm = if row.filter_on {
            &mut cell.on
        } else {
            &mut cell.off
        };
        if arm.insert(row.participant, *row).is_some() {
            return Err(Error::invalid(
                "results",
                format!(
                    "participant {} has two {} rows for {} at {} m",
                    row.participant,
                    if row.filter_on {
                        "filter-on"
                    } else {
                        "filter-off"
                    },
                    row.task_kind,
                    row.range_m
                ),
            ));
        }
    }
    Ok(cells)
}

/// Per-cell summary, paired t-test and significance label, plus the
/// mean/SD plot rows.
pub fn analyze(rows: &[ResultRow], alpha: f64) -> Result<(AnalysisReport, Vec<PlotRow>)> {
    if rows.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut cells = Vec::new();
    let mut plot = Vec::new();
    for ((kind, bits), cell) in group(rows)? {
        let range_m = f64::from_bits(bits);
        let mut pairs = Vec::with_capacity(cell.off.len());
        for (p, off) in &cell.off {
            let on = cell.on.get(p).ok_or_else(|| {
                Error::invalid(
                    "results",
                    format!("participant {p} lacks a filter-on row for {kind} at {range_m} m"),
                )
            })?;
            pairs.push((off.completion_s, on.completion_s));
        }
        if let Some(p) = cell.on.keys().find(|p| !cell.off.contains_key(p)) {
            return Err(Error::invalid(
                "results",
                format!("participant {p} lacks a filter-off row for {kind} at {range_m} m"),
            ));
        }
        let samples = PairedSamples::new(pairs)?;
        let summary = summarize(&samples)?;
        let t_test = (samples.len() >= 2)
            .then(|| paired_t_test(&samples))
            .transpose()?;
        let label = t_test
            .map(|t| significance_label(t.p_two_sided, alpha))
            .transpose()?;
        for (arm, side) in [(Arm::Off, &cell.off), (Arm::On, &cell.on)] {
            let times: Vec<f64> = side.values().map(|r| r.completion_s).collect();
            let (mean_s, sd_s) = mean_sd(&times).expect("cell has at least one row");
            plot.push(PlotRow {
                kind,
                range_m,
                arm,
                mean_s,
                sd_s,
            });
        }
        cells.push(CellReport {
            kind,
            range_m,
            pairs: samples.len(),
            summary,
            t_test,
            label,
            timeouts_off: cell.off.values().filter(|r| r.timed_out).count(),
            timeouts_on: cell.on.values().filter(|r| r.timed_out).count(),
        });
    }
    Ok((
        AnalysisReport {
            schema_version: REPORT_SCHEMA_VERSION,
            alpha,
            cells,
        },
        plot,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneReport {
    pub min_comfort_deg: f64,
    pub max_comfort_deg: f64,
    pub zone: Zone,
}

pub fn zone_report(fov_deg: f64, distance_m: f64) -> Result<ZoneReport> {
    let comfort = comfort_angles(fov_deg)?;
    Ok(ZoneReport {
        min_comfort_deg: comfort.min_comfort_deg,
        max_comfort_deg: comfort.max_comfort_deg,
        zone: classify_zone(distance_m)?,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to simulation outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub config_path: String,
    pub config_sha256: String,
    pub seed_root: u64,
    pub seed_from_env: bool,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<OutputFile>,
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(
        participant: u32,
        kind: TaskKind,
        range_m: f64,
        filter_on: bool,
        completion_s: f64,
    ) -> ResultRow {
        ResultRow {
            participant,
            task_kind: kind,
            range_m,
            filter_on,
            completion_s,
            error_count: 0,
            timed_out: false,
            seed: 1,
        }
    }

    #[test]
    fn identical_arms_accept_null() {
        let mut rows = Vec::new();
        for p in 0..5 {
            for range in [1.0, 5.0, 10.0] {
                let t = 4.0 + p as f64 + range;
                rows.push(row(p, TaskKind::Numpad, range, false, t));
                rows.push(row(p, TaskKind::Numpad, range, true, t));
            }
        }
        let (report, plot) = analyze(&rows, 0.05).unwrap();
        assert_eq!(report.cells.len(), 3);
        for c in &report.cells {
            assert_eq!(c.summary.reduction_pct, 0.0);
            assert_eq!(c.label, Some(Significance::AcceptNull));
            assert_eq!(c.t_test.unwrap().p_two_sided, 1.0);
        }
        assert_eq!(plot.len(), 6);
        let ranges: Vec<f64> = report.cells.iter().map(|c| c.range_m).collect();
        assert_eq!(ranges, vec![1.0, 5.0, 10.0]);
    }

    #[test]
    fn fixture_means_reproduce_difference() {
        // two participants whose arm means are 24.700 and 14.125
        let rows = vec![
            row(0, TaskKind::Slider, 10.0, false, 24.0),
            row(1, TaskKind::Slider, 10.0, false, 25.4),
            row(0, TaskKind::Slider, 10.0, true, 14.0),
            row(1, TaskKind::Slider, 10.0, true, 14.25),
        ];
        let (report, plot) = analyze(&rows, 0.05).unwrap();
        let c = report.cell(TaskKind::Slider, 10.0).unwrap();
        assert!((c.summary.difference - 10.575).abs() < 1e-9);
        assert!((plot[0].mean_s - 24.7).abs() < 1e-9 && plot[0].arm == Arm::Off);
        assert!((plot[1].mean_s - 14.125).abs() < 1e-9 && plot[1].arm == Arm::On);
    }

    #[test]
    fn single_pair_has_no_test() {
        let rows = vec![
            row(0, TaskKind::Numpad, 1.0, false, 5.0),
            row(0, TaskKind::Numpad, 1.0, true, 4.0),
        ];
        let (report, _) = analyze(&rows, 0.05).unwrap();
        assert!(report.cells[0].t_test.is_none());
        assert!(report.cells[0].label.is_none());
    }

    #[test]
    fn unpaired_or_duplicate_rows_rejected() {
        let lone = vec![row(0, TaskKind::Numpad, 1.0, false, 5.0)];
        assert!(analyze(&lone, 0.05).is_err());
        let lone_on = vec![row(0, TaskKind::Numpad, 1.0, true, 5.0)];
        assert!(analyze(&lone_on, 0.05).is_err());
        let dup = vec![
            row(0, TaskKind::Numpad, 1.0, false, 5.0),
            row(0, TaskKind::Numpad, 1.0, false, 6.0),
            row(0, TaskKind::Numpad, 1.0, true, 4.0),
        ];
        assert!(analyze(&dup, 0.05).is_err());
        assert!(analyze(&[], 0.05).is_err());
    }

    #[test]
    fn zone_queries() {
        let r = zone_report(90.0, 0.75).unwrap();
        assert_eq!(
            (r.min_comfort_deg, r.max_comfort_deg, r.zone),
            (75.0, 100.0, Zone::Interaction)
        );
        let r = zone_report(0.0, 25.0).unwrap();
        assert_eq!(
            (r.min_comfort_deg, r.max_comfort_deg, r.zone),
            (30.0, 55.0, Zone::Flat)
        );
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"min_comfort_deg":30.0,"max_comfort_deg":55.0,"zone":"flat"}"#
        );
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
