//! Sequential, virtual-clock simulation of the serving loop.
//!
//! Requests are served one at a time in FIFO order. A request starts at
//! `max(arrival, previous completion)` and completes after the model's
//! processing time; its system time is waiting time plus processing time.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::knowledge::{LogRepository, ModelCatalog, ModelId, RequestLogEntry, RuntimeRuleRow};
use crate::mapek::{Action, Cadence, Controller, PhaseEnergy, Reason};
use crate::model_sim::ModelBackend;
use crate::workload::{ArrivalTrace, RequestQueue};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchEvent {
    pub tick: u64,
    pub virtual_time_s: f64,
    pub from: ModelId,
    pub to: ModelId,
    pub reason: Reason,
}

/// Everything a finished run leaves behind.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub approach: String,
    pub catalog: ModelCatalog,
    pub log: LogRepository,
    pub phases: PhaseEnergy,
    pub switch_count: u64,
    pub timeline: Vec<SwitchEvent>,
    pub final_rules: Vec<RuntimeRuleRow>,
    pub ticks: u64,
    pub wraps: u64,
    pub drops: u64,
    pub cadence: Cadence,
}

pub struct Simulation {
    backend: Box<dyn ModelBackend>,
    arrivals: ArrivalTrace,
    controller: Controller,
    cadence: Cadence,
    queue: RequestQueue,
    next_arrival: usize,
    free_at: f64,
    next_check: f64,
    log: LogRepository,
    timeline: Vec<SwitchEvent>,
}

impl Simulation {
    pub fn new(
        backend: Box<dyn ModelBackend>,
        arrivals: ArrivalTrace,
        controller: Controller,
        cadence: Cadence,
        queue_capacity: Option<usize>,
    ) -> Result<Self> {
        if backend.catalog().len() != controller.runtime_rules().len() {
            return Err(Error::Config(
                "model backend and rule matrix disagree on the number of models".into(),
            ));
        }
        let queue = match queue_capacity {
            Some(c) => RequestQueue::bounded(c)?,
            None => RequestQueue::unbounded(),
        };
        Ok(Simulation {
            backend,
            arrivals,
            controller,
            cadence,
            queue,
            next_arrival: 0,
            free_at: 0.0,
            next_check: 1.0,
            log: LogRepository::new(),
            timeline: Vec::new(),
        })
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn log(&self) -> &LogRepository {
        &self.log
    }

    pub fn catalog(&self) -> &ModelCatalog {
        self.backend.catalog()
    }

    /// Request ids are 1-based arrival positions.
    fn admit_next(&mut self) {
        let id = self.next_arrival as u64 + 1;
        self.next_arrival += 1;
        self.queue.enqueue(id);
    }

    /// Serves one request. Returns `None` once every arrival is handled.
    pub fn step(&mut self) -> Result<Option<&RequestLogEntry>> {
        if self.queue.is_empty() {
            if self.next_arrival >= self.arrivals.len() {
                return Ok(None);
            }
            self.admit_next();
        }
        while self.next_arrival < self.arrivals.len()
            && self.arrivals.times()[self.next_arrival] <= self.free_at
        {
            self.admit_next();
        }
        let id = self
            .queue
            .dequeue()
            .ok_or_else(|| Error::Internal("queue unexpectedly empty".into()))?;
        let arrival = self.arrivals.times()[(id - 1) as usize];
        let start = self.free_at.max(arrival);
        let model = self.controller.current_model();
        let obs = self.backend.infer(model, id)?;
        let completion = start + obs.proc_time;
        let entry = RequestLogEntry {
            request_id: id,
            arrival_time: arrival,
            model,
            energy: obs.energy,
            confidence: obs.confidence,
            model_proc_time: obs.proc_time,
            system_proc_time: (start - arrival) + obs.proc_time,
            detections: obs.detections,
        };
        self.free_at = completion;
        self.controller.monitor_step(&entry)?;
        self.log.log_request(entry)?;

        let due = match self.cadence {
            Cadence::PerRequest => true,
            Cadence::PerSecond => completion >= self.next_check,
        };
        if due {
            if self.cadence == Cadence::PerSecond {
                self.next_check = completion.floor() + 1.0;
            }
            let out = self.controller.tick()?;
            if let (Action::Switch(to), Some(sel)) = (out.action, out.selection) {
                self.timeline.push(SwitchEvent {
                    tick: self.controller.ticks(),
                    virtual_time_s: completion,
                    from: out.from,
                    to,
                    reason: sel.reason,
                });
            }
        }
        Ok(self.log.last())
    }

    pub fn run(mut self, approach: impl Into<String>) -> Result<RunOutcome> {
        while self.step()?.is_some() {}
        Ok(self.finish(approach))
    }

    pub fn finish(self, approach: impl Into<String>) -> RunOutcome {
        RunOutcome {
            approach: approach.into(),
            catalog: self.backend.catalog().clone(),
            phases: *self.controller.phase_energy(),
            switch_count: self.controller.switch_count(),
            final_rules: self.controller.runtime_rules().to_vec(),
            ticks: self.controller.ticks(),
            wraps: self.backend.wraps(),
            drops: self.queue.dropped(),
            cadence: self.cadence,
            timeline: self.timeline,
            log: self.log,
        }
    }
}
