//! TOML experiment configuration.
//!
//! Every key is optional; see [`ExperimentConfig::default`] and the README for
//! the defaults. Relative paths are resolved against the config file's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{Experiment, ModelSource};
use crate::knowledge::{read_base_rules_csv, BaseRuleRow, ModelCatalog, DEFAULT_K};
use crate::learning::{build_base_rules, EvaluationDataset};
use crate::mapek::{Cadence, CostModel, PolicyKind, SyntheticCost, TriggerSource, WallClockPower};
use crate::model_sim::{
    calibrate_profiles, load_profiles, reference_targets, Drift, MetricTrace, ModelProfile, SigmaPolicy,
};
use crate::seed::sub_seed;
use crate::workload::{load_arrival_trace, synth_arrivals, ArrivalTrace};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_EVAL_REQUESTS: usize = 500;
pub const DEFAULT_REQUESTS: usize = 25_000;
pub const DEFAULT_RATE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Monitor window length.
    pub k: usize,
    /// Exploration rate used by a bare `ecomls` policy.
    pub epsilon: f64,
    /// `no_switch:<model>`, `naive1`, `naive2`, `naive3`, `ecomls` or `ecomls:<eps>`.
    pub policy: String,
    pub cadence: Cadence,
    pub trigger: TriggerSource,
    /// Model active at start; the first model when unset.
    pub initial_model: Option<String>,
    /// Evaluation-dataset size for the learning step.
    pub eval_requests: usize,
    pub out_dir: PathBuf,
    pub models: ModelsConfig,
    pub workload: WorkloadConfig,
    pub costs: CostsConfig,
    pub drift: Option<DriftConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: DEFAULT_SEED,
            k: DEFAULT_K,
            epsilon: DEFAULT_EPSILON,
            policy: "ecomls".into(),
            cadence: Cadence::default(),
            trigger: TriggerSource::default(),
            initial_model: None,
            eval_requests: DEFAULT_EVAL_REQUESTS,
            out_dir: PathBuf::from("out"),
            models: ModelsConfig::default(),
            workload: WorkloadConfig::default(),
            costs: CostsConfig::default(),
            drift: None,
        }
    }
}

/// Where model behavior comes from. With neither `profiles` nor `trace`, the
/// four reference profiles are calibrated using the sigma values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsConfig {
    /// TOML file of `[[model]]` profile tables.
    pub profiles: Option<PathBuf>,
    /// Recorded per-request metrics CSV, replayed instead of sampling.
    pub trace: Option<PathBuf>,
    /// Precomputed matrix A; learned from the models when unset.
    pub base_rules: Option<PathBuf>,
    pub sigma_c: f64,
    pub sigma_e_rel: f64,
    pub sigma_t_rel: f64,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        let s = SigmaPolicy::default();
        ModelsConfig {
            profiles: None,
            trace: None,
            base_rules: None,
            sigma_c: s.sigma_c,
            sigma_e_rel: s.sigma_e_rel,
            sigma_t_rel: s.sigma_t_rel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadConfig {
    pub requests: usize,
    /// Mean arrivals per second of the synthetic Poisson workload.
    pub rate: f64,
    /// Arrival-time file; overrides `requests` and `rate`.
    pub trace: Option<PathBuf>,
    /// Unbounded when unset.
    pub queue_capacity: Option<usize>,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            requests: DEFAULT_REQUESTS,
            rate: DEFAULT_RATE,
            trace: None,
            queue_capacity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeterKind {
    #[default]
    Synthetic,
    WallClock,
}

/// Phase cost model. `synthetic` charges fixed joules per call; `wall_clock`
/// charges measured time at `watts` (not reproducible across runs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostsConfig {
    pub meter: MeterKind,
    pub monitor: f64,
    pub analyzer: f64,
    pub planner: f64,
    pub executor: f64,
    pub watts: f64,
}

impl Default for CostsConfig {
    fn default() -> Self {
        let c = SyntheticCost::default();
        CostsConfig {
            meter: MeterKind::Synthetic,
            monitor: c.monitor,
            analyzer: c.analyzer,
            planner: c.planner,
            executor: c.executor,
            watts: 15.0,
        }
    }
}

impl CostsConfig {
    pub fn cost_model(&self) -> CostModel {
        match self.meter {
            MeterKind::Synthetic => CostModel::Synthetic(SyntheticCost {
                monitor: self.monitor,
                analyzer: self.analyzer,
                planner: self.planner,
                executor: self.executor,
            }),
            MeterKind::WallClock => CostModel::WallClock(WallClockPower { watts: self.watts }),
        }
    }
}

/// Mid-run change of model behavior, sampled backends only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    /// First request id served by the drifted profiles.
    pub at_request: u64,
    /// Full replacement profile file.
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    /// Per-model new parent locations, keyed by model name.
    #[serde(default)]
    pub shift: BTreeMap<String, ShiftConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftConfig {
    pub mu_e: Option<f64>,
    pub mu_c: Option<f64>,
}

fn field(name: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("`{name}`: {msg}"))
}

fn require_file(name: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(field(name, format!("file not found: {}", path.display())))
    }
}

impl ExperimentConfig {
    /// Parses and validates a config file; relative paths become relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            self.models.profiles.as_mut(),
            self.models.trace.as_mut(),
            self.models.base_rules.as_mut(),
            self.workload.trace.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(p) = self.drift.as_mut().and_then(|d| d.profiles.as_mut()) {
            fix(p);
        }
        fix(&mut self.out_dir);
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(field("k", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(field("epsilon", format!("must be in [0, 1], got {}", self.epsilon)));
        }
        if self.eval_requests == 0 {
            return Err(field("eval_requests", "must be >= 1"));
        }
        let m = &self.models;
        if m.profiles.is_some() && m.trace.is_some() {
            return Err(field("models", "set at most one of `profiles` and `trace`"));
        }
        for (name, v) in [
            ("models.sigma_c", m.sigma_c),
            ("models.sigma_e_rel", m.sigma_e_rel),
            ("models.sigma_t_rel", m.sigma_t_rel),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(field(name, format!("must be >= 0, got {v}")));
            }
        }
        if let Some(p) = &m.profiles {
            require_file("models.profiles", p)?;
        }
        if let Some(p) = &m.trace {
            require_file("models.trace", p)?;
        }
        if let Some(p) = &m.base_rules {
            require_file("models.base_rules", p)?;
        }
        let w = &self.workload;
        match &w.trace {
            Some(p) => require_file("workload.trace", p)?,
            None => {
                if w.requests == 0 {
                    return Err(field("workload.requests", "must be >= 1"));
                }
                if !(w.rate > 0.0 && w.rate.is_finite()) {
                    return Err(field("workload.rate", format!("must be > 0, got {}", w.rate)));
                }
            }
        }
        if w.queue_capacity == Some(0) {
            return Err(field("workload.queue_capacity", "must be >= 1"));
        }
        self.costs
            .cost_model()
            .validate()
            .map_err(|e| field("costs", e))?;
        if let Some(d) = &self.drift {
            if m.trace.is_some() {
                return Err(field("drift", "only applies to sampled models, not a trace"));
            }
            if d.at_request == 0 {
                return Err(field("drift.at_request", "must be >= 1"));
            }
            if let Some(p) = &d.profiles {
                require_file("drift.profiles", p)?;
            }
        }
        Ok(())
    }

    fn sigma(&self) -> SigmaPolicy {
        SigmaPolicy {
            sigma_c: self.models.sigma_c,
            sigma_e_rel: self.models.sigma_e_rel,
            sigma_t_rel: self.models.sigma_t_rel,
        }
    }

    /// Catalog and profiles for sampled backends.
    pub fn profiles(&self) -> Result<(ModelCatalog, Vec<ModelProfile>)> {
        match &self.models.profiles {
            Some(p) => load_profiles(p),
            None => calibrate_profiles(&reference_targets(), self.sigma()),
        }
    }

    pub fn models_seed(&self) -> u64 {
        sub_seed(self.seed, "models")
    }

    pub fn learn_seed(&self) -> u64 {
        sub_seed(self.seed, "learn")
    }

    fn drift(&self, catalog: &ModelCatalog, profiles: &[ModelProfile]) -> Result<Option<Drift>> {
        let Some(d) = &self.drift else {
            return Ok(None);
        };
        let mut drifted = match &d.profiles {
            Some(p) => {
                let (cat, prof) = load_profiles(p)?;
                if cat != *catalog {
                    return Err(field("drift.profiles", "must list the same models in the same order"));
                }
                prof
            }
            None => profiles.to_vec(),
        };
        for (name, s) in &d.shift {
            let id = catalog
                .lookup(name)
                .map_err(|e| field(&format!("drift.shift.{name}"), e))?;
            let p = &drifted[id.slot()];
            let mu_e = s.mu_e.unwrap_or(p.energy.mu);
            let mu_c = s.mu_c.unwrap_or(p.confidence.mu);
            drifted[id.slot()] = p
                .shifted(mu_e, mu_c)
                .map_err(|e| field(&format!("drift.shift.{name}"), e))?;
        }
        Ok(Some(Drift {
            at_request: d.at_request,
            profiles: drifted,
        }))
    }

    fn arrivals(&self) -> Result<ArrivalTrace> {
        match &self.workload.trace {
            Some(p) => load_arrival_trace(p),
            None => synth_arrivals(self.workload.requests, self.workload.rate, self.seed),
        }
    }

    /// Matrix A: read from `models.base_rules`, aggregated from a trace, or
    /// learned from the profiles over `eval_requests` evaluation requests.
    fn base_rules(&self, catalog: &ModelCatalog, source: &ModelSource) -> Result<Vec<BaseRuleRow>> {
        if let Some(p) = &self.models.base_rules {
            return read_base_rules_csv(p, catalog);
        }
        match source {
            ModelSource::Sampled { profiles, .. } => build_base_rules(
                profiles,
                &EvaluationDataset::sequential(self.eval_requests)?,
                self.learn_seed(),
            ),
            ModelSource::Trace(t) => crate::learning::base_rules_from_trace(t),
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let (catalog, source) = match &self.models.trace {
            Some(p) => {
                let trace = MetricTrace::load(p, None)?;
                (trace.catalog().clone(), ModelSource::Trace(trace))
            }
            None => {
                let (catalog, profiles) = self.profiles()?;
                let drift = self.drift(&catalog, &profiles)?;
                (
                    catalog,
                    ModelSource::Sampled {
                        profiles,
                        seed: self.models_seed(),
                        drift,
                    },
                )
            }
        };
        let initial_model = match &self.initial_model {
            Some(name) => catalog.lookup(name).map_err(|e| field("initial_model", e))?,
            None => catalog.ids().next().ok_or_else(|| field("models", "no models"))?,
        };
        let base_rules = self.base_rules(&catalog, &source)?;
        Ok(Experiment {
            base_rules,
            arrivals: self.arrivals()?,
            k: self.k,
            cadence: self.cadence,
            trigger: self.trigger,
            initial_model,
            costs: self.costs.cost_model(),
            seed: self.seed,
            queue_capacity: self.workload.queue_capacity,
            source,
            catalog,
        })
    }

    pub fn policy(&self, catalog: &ModelCatalog) -> Result<PolicyKind> {
        PolicyKind::parse(&self.policy, catalog, self.epsilon).map_err(|e| field("policy", e))
    }
}
