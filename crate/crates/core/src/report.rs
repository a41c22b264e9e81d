//! Run summaries and their CSV/JSON exports: the per-approach summary table,
//! score-frequency histograms, energy-vs-confidence point clouds and switch
//! timelines.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{RunOutcome, SwitchEvent};
use crate::error::{Error, Result};
use crate::knowledge::{LogRepository, ModelCatalog};
use crate::mapek::{compute_score, PhaseEnergy};

/// Number of unit-width bins before the overflow bin.
pub const UNIT_BINS: usize = 7;

/// Index of the `[7, inf)` bin.
pub const OVERFLOW_BIN: usize = UNIT_BINS;

/// Maps a score to its half-open unit bin `[i, i+1)`, or the overflow bin.
pub fn bin_score(score: f64) -> Result<usize> {
    if score.is_nan() || score < 0.0 {
        return Err(Error::Validation(format!("score {score} must be >= 0")));
    }
    let i = score.floor();
    Ok(if i >= UNIT_BINS as f64 { OVERFLOW_BIN } else { i as usize })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreHistogram {
    pub counts: [u64; UNIT_BINS + 1],
}

impl ScoreHistogram {
    pub fn add(&mut self, score: f64) -> Result<()> {
        self.counts[bin_score(score)?] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(lo, hi)` of bin `i`; the overflow bin has `hi = inf`.
    pub fn edges(i: usize) -> (f64, f64) {
        if i >= OVERFLOW_BIN {
            (UNIT_BINS as f64, f64::INFINITY)
        } else {
            (i as f64, i as f64 + 1.0)
        }
    }
}

/// Aggregate outcome of one approach. Energies are joules per request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub approach: String,
    pub requests: u64,
    pub c_avg: f64,
    pub e_avg: f64,
    pub e_monitor: f64,
    pub e_analyzer: f64,
    pub e_planner: f64,
    pub e_executor: f64,
    pub e_mapek: f64,
    pub e_total: f64,
    pub switches: u64,
    pub mean_score: f64,
    pub histogram: ScoreHistogram,
    pub wraps: u64,
    pub drops: u64,
}

/// Sum of deviations from the first value, so constant series average exactly.
#[derive(Default)]
struct ShiftedMean {
    first: Option<f64>,
    dev: f64,
}

impl ShiftedMean {
    fn push(&mut self, x: f64) {
        let f = *self.first.get_or_insert(x);
        self.dev += x - f;
    }

    fn mean(&self, n: f64) -> f64 {
        self.first.map_or(0.0, |f| f + self.dev / n)
    }
}

pub fn summarize(
    approach: &str,
    log: &LogRepository,
    phases: &PhaseEnergy,
    switches: u64,
) -> Result<RunReport> {
    if log.is_empty() {
        return Err(Error::Validation(format!("{approach}: no processed requests")));
    }
    let n = log.len() as f64;
    let mut histogram = ScoreHistogram::default();
    let (mut c, mut e, mut s) = (ShiftedMean::default(), ShiftedMean::default(), ShiftedMean::default());
    for entry in log {
        let score = compute_score(entry.energy, entry.confidence)?;
        histogram.add(score)?;
        c.push(entry.confidence);
        e.push(entry.energy);
        s.push(score);
    }
    let e_avg = e.mean(n);
    let (e_monitor, e_analyzer, e_planner, e_executor) = (
        phases.monitor / n,
        phases.analyzer / n,
        phases.planner / n,
        phases.executor / n,
    );
    let e_mapek = e_monitor + e_analyzer + e_planner + e_executor;
    Ok(RunReport {
        approach: approach.to_string(),
        requests: log.len() as u64,
        c_avg: c.mean(n),
        e_avg,
        e_monitor,
        e_analyzer,
        e_planner,
        e_executor,
        e_mapek,
        e_total: e_avg + e_mapek,
        switches,
        mean_score: s.mean(n),
        histogram,
        wraps: 0,
        drops: 0,
    })
}

pub fn summarize_outcome(out: &RunOutcome) -> Result<RunReport> {
    let mut r = summarize(&out.approach, &out.log, &out.phases, out.switch_count)?;
    r.wraps = out.wraps;
    r.drops = out.drops;
    Ok(r)
}

// ---------------------------------------------------------------------------
// Exports

#[derive(Debug, Serialize, Deserialize)]
struct SummaryRow {
    approach: String,
    c_avg: f64,
    e_avg: f64,
    e_monitor: f64,
    e_analyzer: f64,
    e_planner: f64,
    e_executor: f64,
    e_mapek: f64,
    e_total: f64,
    switches: u64,
}

impl From<&RunReport> for SummaryRow {
    fn from(r: &RunReport) -> Self {
        SummaryRow {
            approach: r.approach.clone(),
            c_avg: r.c_avg,
            e_avg: r.e_avg,
            e_monitor: r.e_monitor,
            e_analyzer: r.e_analyzer,
            e_planner: r.e_planner,
            e_executor: r.e_executor,
            e_mapek: r.e_mapek,
            e_total: r.e_total,
            switches: r.switches,
        }
    }
}

/// Summary columns as read back from a summary CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub approach: String,
    pub c_avg: f64,
    pub e_avg: f64,
    pub e_monitor: f64,
    pub e_analyzer: f64,
    pub e_planner: f64,
    pub e_executor: f64,
    pub e_mapek: f64,
    pub e_total: f64,
    pub switches: u64,
}

impl From<&RunReport> for SummaryRecord {
    fn from(r: &RunReport) -> Self {
        SummaryRecord {
            approach: r.approach.clone(),
            c_avg: r.c_avg,
            e_avg: r.e_avg,
            e_monitor: r.e_monitor,
            e_analyzer: r.e_analyzer,
            e_planner: r.e_planner,
            e_executor: r.e_executor,
            e_mapek: r.e_mapek,
            e_total: r.e_total,
            switches: r.switches,
        }
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// `approach,c_avg,e_avg,e_monitor,e_analyzer,e_planner,e_executor,e_mapek,e_total,switches`
pub fn write_summary_csv(path: &Path, reports: &[RunReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in reports {
        w.serialize(SummaryRow::from(r)).map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize::<SummaryRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 2,
                msg: e.to_string(),
            })?;
            Ok(SummaryRecord {
                approach: row.approach,
                c_avg: row.c_avg,
                e_avg: row.e_avg,
                e_monitor: row.e_monitor,
                e_analyzer: row.e_analyzer,
                e_planner: row.e_planner,
                e_executor: row.e_executor,
                e_mapek: row.e_mapek,
                e_total: row.e_total,
                switches: row.switches,
            })
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct HistogramRow<'a> {
    approach: &'a str,
    bin_lo: f64,
    bin_hi: f64,
    count: u64,
}

/// `approach,bin_lo,bin_hi,count`; the overflow bin has `bin_hi = inf`.
pub fn write_histogram_csv(path: &Path, reports: &[RunReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in reports {
        for (i, &count) in r.histogram.counts.iter().enumerate() {
            let (bin_lo, bin_hi) = ScoreHistogram::edges(i);
            w.serialize(HistogramRow {
                approach: &r.approach,
                bin_lo,
                bin_hi,
                count,
            })
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    finish(w, path)
}

#[derive(Debug, Serialize)]
struct PointRow<'a> {
    request_id: u64,
    model: &'a str,
    energy_j: f64,
    confidence: f64,
    score: f64,
}

/// `request_id,model,energy_j,confidence,score`, one row per processed request.
pub fn write_point_cloud_csv(path: &Path, log: &LogRepository, catalog: &ModelCatalog) -> Result<()> {
    let mut w = csv_writer(path)?;
    for e in log {
        w.serialize(PointRow {
            request_id: e.request_id,
            model: catalog.name(e.model),
            energy_j: e.energy,
            confidence: e.confidence,
            score: compute_score(e.energy, e.confidence)?,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

#[derive(Debug, Serialize)]
struct EnergyRow {
    request_id: u64,
    cumulative_energy_j: f64,
    cumulative_total_j: f64,
}

/// `request_id,cumulative_energy_j,cumulative_total_j`: running inference
/// energy, and the same with the run's MAPE-K energy spread evenly per request.
pub fn write_cumulative_energy_csv(path: &Path, log: &LogRepository, phases: &PhaseEnergy) -> Result<()> {
    let mut w = csv_writer(path)?;
    let overhead = if log.is_empty() { 0.0 } else { phases.total() / log.len() as f64 };
    let mut acc = 0.0;
    for (i, e) in log.iter().enumerate() {
        acc += e.energy;
        w.serialize(EnergyRow {
            request_id: e.request_id,
            cumulative_energy_j: acc,
            cumulative_total_j: acc + overhead * (i + 1) as f64,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

#[derive(Debug, Serialize)]
struct TimelineRow<'a> {
    tick: u64,
    virtual_time_s: f64,
    from_model: &'a str,
    to_model: &'a str,
    reason: &'a str,
}

/// `tick,virtual_time_s,from_model,to_model,reason`
pub fn write_timeline_csv(path: &Path, timeline: &[SwitchEvent], catalog: &ModelCatalog) -> Result<()> {
    let mut w = csv_writer(path)?;
    // Header even for an empty timeline.
    if timeline.is_empty() {
        w.write_record(["tick", "virtual_time_s", "from_model", "to_model", "reason"])
            .map_err(|e| Error::csv(path, e))?;
    }
    for ev in timeline {
        w.serialize(TimelineRow {
            tick: ev.tick,
            virtual_time_s: ev.virtual_time_s,
            from_model: catalog.name(ev.from),
            to_model: catalog.name(ev.to),
            reason: ev.reason.as_str(),
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    finish(w, path)
}

/// Endpoints of the energy/confidence reference line: the lowest and the
/// highest (E_avg, C_avg) over standalone single-model runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceLine {
    pub low: (f64, f64),
    pub high: (f64, f64),
}

impl ReferenceLine {
    pub fn from_reports<'a>(standalone: impl IntoIterator<Item = &'a RunReport>) -> Option<Self> {
        let mut it = standalone.into_iter().peekable();
        it.peek()?;
        let (mut e_lo, mut e_hi, mut c_lo, mut c_hi) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for r in it {
            e_lo = e_lo.min(r.e_avg);
            e_hi = e_hi.max(r.e_avg);
            c_lo = c_lo.min(r.c_avg);
            c_hi = c_hi.max(r.c_avg);
        }
        Some(ReferenceLine {
            low: (e_lo, c_lo),
            high: (e_hi, c_hi),
        })
    }

    /// Confidence on the line at the given energy.
    pub fn confidence_at(&self, energy: f64) -> f64 {
        let (e0, c0) = self.low;
        let (e1, c1) = self.high;
        if e1 == e0 {
            return c0;
        }
        c0 + (c1 - c0) * (energy - e0) / (e1 - e0)
    }

    /// `endpoint,energy_j,confidence`
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["endpoint", "energy_j", "confidence"])
            .map_err(|e| Error::csv(path, e))?;
        for (name, (e, c)) in [("low", self.low), ("high", self.high)] {
            w.serialize((name, e, c)).map_err(|e| Error::csv(path, e))?;
        }
        finish(w, path)
    }
}

pub fn write_report_json(path: &Path, report: &RunReport) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, report).map_err(|e| Error::Internal(e.to_string()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })
}
