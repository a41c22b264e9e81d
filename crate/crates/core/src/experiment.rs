//! Experiment assembly: one fully specified setup that can run any policy on
//! an identical workload, plus the artifact writers used by the CLI.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::engine::{RunOutcome, Simulation};
use crate::error::{Error, Result};
use crate::knowledge::{BaseRuleRow, ModelCatalog, ModelId};
use crate::mapek::{Cadence, Controller, ControllerConfig, CostModel, PolicyKind, TriggerSource};
use crate::model_sim::{Drift, MetricTrace, ModelBackend, ModelProfile, SampledModels, TraceReplay};
use crate::report::{self, ReferenceLine, RunReport};
use crate::seed::sub_seed;
use crate::workload::ArrivalTrace;

/// Epsilon values of the default comparison.
pub const DEFAULT_EPSILONS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];

#[derive(Debug, Clone)]
pub enum ModelSource {
    Sampled {
        profiles: Vec<ModelProfile>,
        seed: u64,
        drift: Option<Drift>,
    },
    Trace(MetricTrace),
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub catalog: ModelCatalog,
    pub source: ModelSource,
    pub base_rules: Vec<BaseRuleRow>,
    pub arrivals: ArrivalTrace,
    pub k: usize,
    pub cadence: Cadence,
    pub trigger: TriggerSource,
    pub initial_model: ModelId,
    pub costs: CostModel,
    pub seed: u64,
    pub queue_capacity: Option<usize>,
}

impl Experiment {
    fn backend(&self) -> Result<Box<dyn ModelBackend>> {
        Ok(match &self.source {
            ModelSource::Sampled {
                profiles,
                seed,
                drift,
            } => {
                let mut b = SampledModels::new(self.catalog.clone(), profiles.clone(), *seed)?;
                if let Some(d) = drift {
                    b = b.with_drift(d.clone())?;
                }
                Box::new(b)
            }
            ModelSource::Trace(t) => Box::new(TraceReplay::new(t.clone())),
        })
    }

    /// Seed of the planner stream for one approach. Derived from the approach
    /// name alone, so adding approaches never perturbs existing ones.
    pub fn planner_seed(&self, approach: &str) -> u64 {
        sub_seed(self.seed, &format!("planner:{approach}"))
    }

    pub fn simulation(&self, policy: PolicyKind) -> Result<Simulation> {
        policy.validate(&self.catalog)?;
        self.costs.validate()?;
        let approach = policy.approach_name(&self.catalog);
        let controller = Controller::new(
            ControllerConfig {
                k: self.k,
                policy,
                initial_model: self.initial_model,
                planner_seed: self.planner_seed(&approach),
                trigger: self.trigger,
            },
            &self.base_rules,
            self.costs.meter(),
        )?;
        Simulation::new(
            self.backend()?,
            self.arrivals.clone(),
            controller,
            self.cadence,
            self.queue_capacity,
        )
    }

    pub fn run(&self, policy: PolicyKind) -> Result<RunOutcome> {
        let approach = policy.approach_name(&self.catalog);
        self.simulation(policy)?.run(approach)
    }

    /// Runs every policy on its own engine, in parallel; results keep input order.
    pub fn run_all(&self, policies: &[PolicyKind]) -> Result<Vec<RunOutcome>> {
        policies.par_iter().map(|&p| self.run(p)).collect()
    }
}

/// Standalone runs of every model, then EcoMLS per epsilon, then naive 1-3.
pub fn comparison_policies(catalog: &ModelCatalog, epsilons: &[f64]) -> Vec<PolicyKind> {
    catalog
        .ids()
        .map(PolicyKind::NoSwitch)
        .chain(epsilons.iter().map(|&epsilon| PolicyKind::EcoMls { epsilon }))
        .chain([PolicyKind::Naive1, PolicyKind::Naive2, PolicyKind::Naive3])
        .collect()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `<approach>_{summary,histogram,points,energy,timeline}.csv` and
/// `<approach>_report.json` into `dir`.
pub fn write_run_artifacts(dir: &Path, out: &RunOutcome) -> Result<RunReport> {
    ensure_dir(dir)?;
    let rep = report::summarize_outcome(out)?;
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{}_{suffix}", out.approach)) };
    report::write_summary_csv(&file("summary.csv"), std::slice::from_ref(&rep))?;
    report::write_histogram_csv(&file("histogram.csv"), std::slice::from_ref(&rep))?;
    report::write_point_cloud_csv(&file("points.csv"), &out.log, &out.catalog)?;
    report::write_cumulative_energy_csv(&file("energy.csv"), &out.log, &out.phases)?;
    report::write_timeline_csv(&file("timeline.csv"), &out.timeline, &out.catalog)?;
    report::write_report_json(&file("report.json"), &rep)?;
    Ok(rep)
}

/// Per-run artifacts plus the combined `summary.csv`, `histogram.csv` and,
/// when standalone runs are present, `reference_line.csv`.
pub fn write_comparison(dir: &Path, outcomes: &[RunOutcome]) -> Result<Vec<RunReport>> {
    ensure_dir(dir)?;
    let reports = outcomes
        .iter()
        .map(|o| write_run_artifacts(dir, o))
        .collect::<Result<Vec<_>>>()?;
    report::write_summary_csv(&dir.join("summary.csv"), &reports)?;
    report::write_histogram_csv(&dir.join("histogram.csv"), &reports)?;
    let standalone = outcomes
        .iter()
        .zip(&reports)
        .filter(|(o, _)| o.switch_count == 0 && o.ticks == 0)
        .map(|(_, r)| r);
    if let Some(line) = ReferenceLine::from_reports(standalone) {
        line.write_csv(&dir.join("reference_line.csv"))?;
    }
    Ok(reports)
}
