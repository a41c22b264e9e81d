use crate::error::Result;
use crate::knowledge::{check_confidence, check_energy, BaseRuleRow, RuntimeRuleRow};

/// Rows that carry an energy range.
pub trait EnergyBand {
    fn e_min(&self) -> f64;
    fn e_max(&self) -> f64;
}

impl EnergyBand for BaseRuleRow {
    fn e_min(&self) -> f64 {
        self.e_min
    }
    fn e_max(&self) -> f64 {
        self.e_max
    }
}

impl EnergyBand for RuntimeRuleRow {
    fn e_min(&self) -> f64 {
        self.e_min
    }
    fn e_max(&self) -> f64 {
        self.e_max
    }
}

/// Energy reference of a rule row: midpoint of its min and max energy.
pub fn e_avg(row: &impl EnergyBand) -> f64 {
    (row.e_min() + row.e_max()) / 2.0
}

/// `energy * (1 - confidence)`; lower is better.
pub fn compute_score(energy: f64, confidence: f64) -> Result<f64> {
    check_energy(energy)?;
    check_confidence(confidence)?;
    Ok(raw_score(energy, confidence))
}

#[inline]
pub(crate) fn raw_score(energy: f64, confidence: f64) -> f64 {
    energy * (1.0 - confidence)
}

/// True when the monitored score strictly exceeds the row's threshold score.
pub fn needs_adaptation(e_bar: f64, c_bar: f64, row: &RuntimeRuleRow) -> bool {
    raw_score(e_bar, c_bar) > raw_score(e_avg(row), row.c_avg)
}
