use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_confidence, check_energy, ModelCatalog, ModelId};
use crate::error::{Error, Result};

/// One processed request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestLogEntry {
    pub request_id: u64,
    /// Simulated arrival time, seconds.
    pub arrival_time: f64,
    pub model: ModelId,
    pub energy: f64,
    pub confidence: f64,
    /// Model inference time (t_mp), seconds.
    pub model_proc_time: f64,
    /// Arrival-to-completion time (t_sys), seconds.
    pub system_proc_time: f64,
    /// Detected bounding boxes.
    pub detections: u32,
}

impl RequestLogEntry {
    pub fn validate(&self) -> Result<()> {
        check_energy(self.energy)?;
        check_confidence(self.confidence)?;
        if self.model_proc_time < 0.0 {
            return Err(Error::Validation(format!(
                "request {}: negative model processing time",
                self.request_id
            )));
        }
        if self.system_proc_time < self.model_proc_time {
            return Err(Error::Validation(format!(
                "request {}: system time {} below model time {}",
                self.request_id, self.system_proc_time, self.model_proc_time
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct LogCsvRow<'a> {
    request_id: u64,
    arrival_time: f64,
    model: &'a str,
    energy_j: f64,
    confidence: f64,
    model_proc_time_s: f64,
    system_proc_time_s: f64,
    detections: u32,
}

/// Append-only record of processed requests, in arrival order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LogRepository {
    entries: Vec<RequestLogEntry>,
}

impl LogRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn log_request(&mut self, entry: RequestLogEntry) -> Result<()> {
        if let Some(last) = self.entries.last() {
            if entry.request_id <= last.request_id {
                return Err(Error::Ordering {
                    last: last.request_id,
                    got: entry.request_id,
                });
            }
        }
        entry.validate()?;
        self.entries.push(entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, RequestLogEntry> {
        self.entries.iter()
    }

    pub fn entries(&self) -> &[RequestLogEntry] {
        &self.entries
    }

    pub fn last(&self) -> Option<&RequestLogEntry> {
        self.entries.last()
    }

    pub fn write_csv(&self, path: &Path, catalog: &ModelCatalog) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        for e in &self.entries {
            w.serialize(LogCsvRow {
                request_id: e.request_id,
                arrival_time: e.arrival_time,
                model: catalog.name(e.model),
                energy_j: e.energy,
                confidence: e.confidence,
                model_proc_time_s: e.model_proc_time,
                system_proc_time_s: e.system_proc_time,
                detections: e.detections,
            })
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl<'a> IntoIterator for &'a LogRepository {
    type Item = &'a RequestLogEntry;
    type IntoIter = std::slice::Iter<'a, RequestLogEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}
