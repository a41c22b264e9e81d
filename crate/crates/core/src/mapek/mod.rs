//! The MAPE-K controller: monitor, analyzer, planner and executor over the
//! shared knowledge, plus the baseline policies it is compared against.

mod controller;
mod meter;
mod planner;
mod policy;
mod score;

use serde::{Deserialize, Serialize};

use crate::knowledge::ModelId;

pub use controller::{Cadence, Controller, ControllerConfig, TickOutcome, TriggerSource};
pub use meter::{CostModel, Phase, PhaseEnergy, PhaseMeter, SyntheticCost, WallClockPower};
pub use planner::{exploit, Planner, PlannerConfig, Reason, Selection};
pub use policy::{PolicyKind, UpdateMode};
pub use score::{compute_score, e_avg, needs_adaptation, EnergyBand};

/// Planner output. `NoAdapt` keeps the current model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    NoAdapt,
    Switch(ModelId),
}

impl Action {
    /// Numeric code of the action map: -1 for no adaptation, else the model index.
    pub fn code(self) -> i64 {
        match self {
            Action::NoAdapt => -1,
            Action::Switch(m) => m.index() as i64,
        }
    }
}
