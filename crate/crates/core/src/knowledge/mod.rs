//! Knowledge shared by the MAPE-K stages: the request log, the base rules
//! (matrix A, frozen after offline evaluation) and the runtime rules
//! (matrix B, updated online), plus the sliding windows they are built on.

mod log;
mod rules;
mod window;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use log::{LogRepository, RequestLogEntry};
pub use rules::{
    init_runtime_rules, update_runtime_rules, write_base_rules_csv, write_runtime_rules_csv,
    read_base_rules_csv, BaseRuleRow, RuntimeRuleRow,
};
pub use window::{MeanRing, SlidingWindow};

/// Default window length shared by the monitor and every runtime rule row.
pub const DEFAULT_K: usize = 10;

/// 1-based model index. Names live in a [`ModelCatalog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModelId(u32);

impl ModelId {
    pub fn new(index: usize) -> Result<Self> {
        if index == 0 || index > u32::MAX as usize {
            return Err(Error::Validation(format!("model index {index} out of range")));
        }
        Ok(ModelId(index as u32))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Position in 0-based per-model vectors.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    pub(crate) fn from_slot(slot: usize) -> Self {
        ModelId(slot as u32 + 1)
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// Ordered set of model names; position `j-1` names model `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCatalog {
    names: Vec<String>,
}

impl ModelCatalog {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if n.trim().is_empty() {
                return Err(Error::Config(format!("model {} has an empty name", i + 1)));
            }
            if names[..i].contains(n) {
                return Err(Error::Config(format!("duplicate model name `{n}`")));
            }
        }
        Ok(ModelCatalog { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ModelId> + '_ {
        (0..self.names.len()).map(ModelId::from_slot)
    }

    pub fn name(&self, id: ModelId) -> &str {
        &self.names[id.slot()]
    }

    pub fn lookup(&self, name: &str) -> Result<ModelId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(ModelId::from_slot)
            .ok_or_else(|| Error::Config(format!("unknown model `{name}`")))
    }

    pub fn contains(&self, id: ModelId) -> bool {
        id.index() >= 1 && id.index() <= self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

pub(crate) fn check_confidence(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::Validation(format!("confidence {c} outside [0, 1]")))
    }
}

pub(crate) fn check_energy(e: f64) -> Result<()> {
    if e >= 0.0 && e.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!("energy {e} must be finite and >= 0")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_ids_are_one_based() {
        assert!(ModelId::new(0).is_err());
        let m = ModelId::new(3).unwrap();
        assert_eq!(m.index(), 3);
        assert_eq!(m.slot(), 2);
    }

    #[test]
    fn catalog_rejects_duplicates_and_empty() {
        assert!(ModelCatalog::new(vec![]).is_err());
        assert!(ModelCatalog::new(vec!["a".into(), "a".into()]).is_err());
        let c = ModelCatalog::new(vec!["nano".into(), "small".into()]).unwrap();
        assert_eq!(c.lookup("small").unwrap().index(), 2);
        assert!(c.lookup("huge").is_err());
        assert_eq!(c.ids().map(|m| m.index()).collect::<Vec<_>>(), vec![1, 2]);
    }
}
