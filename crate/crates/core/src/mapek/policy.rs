use std::fmt;

use crate::error::{Error, Result};
use crate::knowledge::{ModelCatalog, ModelId};

/// Which runtime-rule fields a policy refreshes from observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// Rules stay at their matrix-A values.
    Frozen,
    /// Only the confidence window and its mean are refreshed.
    ConfidenceOnly,
    /// Confidence window and latest energy are refreshed.
    Full,
}

/// Adaptation policy under comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// A single model for the whole run; the control loop is not run.
    NoSwitch(ModelId),
    /// Exploitation over frozen base-rule values.
    Naive1,
    /// Exploitation with confidence-only rule updates.
    Naive2,
    /// Exploitation with confidence and energy rule updates.
    Naive3,
    /// Naive3 plus epsilon-greedy exploration.
    EcoMls { epsilon: f64 },
}

impl PolicyKind {
    pub fn update_mode(&self) -> UpdateMode {
        match self {
            PolicyKind::NoSwitch(_) | PolicyKind::Naive1 => UpdateMode::Frozen,
            PolicyKind::Naive2 => UpdateMode::ConfidenceOnly,
            PolicyKind::Naive3 | PolicyKind::EcoMls { .. } => UpdateMode::Full,
        }
    }

    pub fn epsilon(&self) -> f64 {
        match self {
            PolicyKind::EcoMls { epsilon } => *epsilon,
            _ => 0.0,
        }
    }

    pub fn adapts(&self) -> bool {
        !matches!(self, PolicyKind::NoSwitch(_))
    }

    /// Parses `no_switch:<model>`, `naive1`, `naive2`, `naive3`, `ecomls`
    /// or `ecomls:<epsilon>`. A bare `ecomls` takes `default_epsilon`.
    pub fn parse(s: &str, catalog: &ModelCatalog, default_epsilon: f64) -> Result<Self> {
        let s = s.trim();
        let kind = match s.split_once(':') {
            Some(("no_switch", model)) => PolicyKind::NoSwitch(catalog.lookup(model)?),
            Some(("ecomls", eps)) => PolicyKind::EcoMls {
                epsilon: eps
                    .parse()
                    .map_err(|_| Error::Config(format!("bad epsilon in policy `{s}`")))?,
            },
            Some(_) => return Err(Error::Config(format!("unknown policy `{s}`"))),
            None => match s {
                "naive1" => PolicyKind::Naive1,
                "naive2" => PolicyKind::Naive2,
                "naive3" => PolicyKind::Naive3,
                "ecomls" => PolicyKind::EcoMls {
                    epsilon: default_epsilon,
                },
                _ => return Err(Error::Config(format!("unknown policy `{s}`"))),
            },
        };
        kind.validate(catalog)?;
        Ok(kind)
    }

    pub fn validate(&self, catalog: &ModelCatalog) -> Result<()> {
        match *self {
            PolicyKind::NoSwitch(m) if !catalog.contains(m) => {
                Err(Error::Config(format!("no_switch model {m} is not registered")))
            }
            PolicyKind::EcoMls { epsilon } if !(0.0..=1.0).contains(&epsilon) => {
                Err(Error::Config(format!("epsilon {epsilon} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Label used in reports and output file names.
    pub fn approach_name(&self, catalog: &ModelCatalog) -> String {
        match *self {
            PolicyKind::NoSwitch(m) => catalog.name(m).to_string(),
            PolicyKind::Naive1 => "naive1".into(),
            PolicyKind::Naive2 => "naive2".into(),
            PolicyKind::Naive3 => "naive3".into(),
            PolicyKind::EcoMls { epsilon } => format!("ecomls_eps{epsilon}"),
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::NoSwitch(m) => write!(f, "no_switch({m})"),
            PolicyKind::Naive1 => f.write_str("naive1"),
            PolicyKind::Naive2 => f.write_str("naive2"),
            PolicyKind::Naive3 => f.write_str("naive3"),
            PolicyKind::EcoMls { epsilon } => write!(f, "ecomls(eps={epsilon})"),
        }
    }
}
