use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Monitor,
    Analyzer,
    Planner,
    Executor,
}

/// Assigns an energy cost (joules) to one invocation of a controller phase.
pub trait PhaseMeter: Send {
    fn charge(&mut self, phase: Phase, elapsed: Duration) -> f64;

    /// Whether `charge` looks at `elapsed`. When false the controller skips
    /// wall-clock timing and stays fully deterministic.
    fn needs_timing(&self) -> bool {
        false
    }
}

/// Fixed joules per invocation of each phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticCost {
    pub monitor: f64,
    pub analyzer: f64,
    pub planner: f64,
    pub executor: f64,
}

impl Default for SyntheticCost {
    /// Monitoring dominates; the other phases are three orders of magnitude cheaper.
    fn default() -> Self {
        SyntheticCost {
            monitor: 1.25,
            analyzer: 0.001,
            planner: 0.001,
            executor: 0.0005,
        }
    }
}

impl SyntheticCost {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("monitor", self.monitor),
            ("analyzer", self.analyzer),
            ("planner", self.planner),
            ("executor", self.executor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("cost `{name}` must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl PhaseMeter for SyntheticCost {
    fn charge(&mut self, phase: Phase, _elapsed: Duration) -> f64 {
        match phase {
            Phase::Monitor => self.monitor,
            Phase::Analyzer => self.analyzer,
            Phase::Planner => self.planner,
            Phase::Executor => self.executor,
        }
    }
}

/// Charges measured controller time at a constant power draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallClockPower {
    pub watts: f64,
}

impl PhaseMeter for WallClockPower {
    fn charge(&mut self, _phase: Phase, elapsed: Duration) -> f64 {
        self.watts * elapsed.as_secs_f64()
    }

    fn needs_timing(&self) -> bool {
        true
    }
}

/// Meter selection for an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    Synthetic(SyntheticCost),
    WallClock(WallClockPower),
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel::Synthetic(SyntheticCost::default())
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            CostModel::Synthetic(c) => c.validate(),
            CostModel::WallClock(w) if !(w.watts >= 0.0 && w.watts.is_finite()) => Err(
                Error::Config(format!("cost `watts` must be >= 0, got {}", w.watts)),
            ),
            CostModel::WallClock(_) => Ok(()),
        }
    }

    pub fn meter(&self) -> Box<dyn PhaseMeter> {
        match *self {
            CostModel::Synthetic(c) => Box::new(c),
            CostModel::WallClock(w) => Box::new(w),
        }
    }
}

/// Accumulated controller energy per phase, with invocation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseEnergy {
    pub monitor: f64,
    pub analyzer: f64,
    pub planner: f64,
    pub executor: f64,
    pub monitor_calls: u64,
    pub analyzer_calls: u64,
    pub planner_calls: u64,
    pub executor_calls: u64,
}

impl PhaseEnergy {
    pub fn add(&mut self, phase: Phase, joules: f64) {
        let joules = joules.max(0.0);
        match phase {
            Phase::Monitor => {
                self.monitor += joules;
                self.monitor_calls += 1;
            }
            Phase::Analyzer => {
                self.analyzer += joules;
                self.analyzer_calls += 1;
            }
            Phase::Planner => {
                self.planner += joules;
                self.planner_calls += 1;
            }
            Phase::Executor => {
                self.executor += joules;
                self.executor_calls += 1;
            }
        }
    }

    pub fn total(&self) -> f64 {
        self.monitor + self.analyzer + self.planner + self.executor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_ignores_elapsed() {
        let mut c = SyntheticCost::default();
        assert_eq!(c.charge(Phase::Monitor, Duration::from_secs(5)), 1.25);
        assert!(!c.needs_timing());
    }

    #[test]
    fn wall_clock_scales_with_time() {
        let mut w = WallClockPower { watts: 10.0 };
        assert!((w.charge(Phase::Planner, Duration::from_millis(7)) - 0.07).abs() < 1e-12);
    }

    #[test]
    fn accumulator_counts_calls() {
        let mut p = PhaseEnergy::default();
        p.add(Phase::Monitor, 1.0);
        p.add(Phase::Monitor, 1.0);
        p.add(Phase::Executor, 0.5);
        assert_eq!((p.monitor, p.monitor_calls, p.executor_calls), (2.0, 2, 1));
        assert_eq!(p.total(), 2.5);
    }

    #[test]
    fn negative_costs_rejected() {
        let c = SyntheticCost {
            planner: -1.0,
            ..SyntheticCost::default()
        };
        assert!(c.validate().is_err());
    }
}
