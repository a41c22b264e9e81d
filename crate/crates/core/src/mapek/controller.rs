use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::meter::{Phase, PhaseEnergy, PhaseMeter};
use super::planner::{Planner, PlannerConfig, Selection};
use super::policy::{PolicyKind, UpdateMode};
use super::score::needs_adaptation;
use super::Action;
use crate::error::{Error, Result};
use crate::knowledge::{
    init_runtime_rules, update_runtime_rules, BaseRuleRow, ModelId, RequestLogEntry,
    RuntimeRuleRow, SlidingWindow,
};

/// When the analyzer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cadence {
    /// After every processed request.
    #[default]
    PerRequest,
    /// At most once per simulated second.
    PerSecond,
}

/// Which monitored values feed the trigger and planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerSource {
    /// Window means over the last k requests.
    #[default]
    WindowMean,
    /// The most recent request only.
    LatestSample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerConfig {
    pub k: usize,
    pub policy: PolicyKind,
    pub initial_model: ModelId,
    pub planner_seed: u64,
    pub trigger: TriggerSource,
}

/// Result of one analyzer tick (and the execution that followed it, if any).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub action: Action,
    pub selection: Option<Selection>,
    pub triggered: bool,
    /// Active model when the tick started.
    pub from: ModelId,
}

impl TickOutcome {
    fn idle(from: ModelId) -> Self {
        TickOutcome {
            action: Action::NoAdapt,
            selection: None,
            triggered: false,
            from,
        }
    }

    pub fn planned(&self) -> bool {
        self.triggered
    }
}

/// Controller state: active model, monitor window, runtime rules (matrix B),
/// switch counter and per-phase energy.
pub struct Controller {
    policy: PolicyKind,
    update_mode: UpdateMode,
    planner: Planner,
    trigger: TriggerSource,
    current: ModelId,
    window: SlidingWindow,
    rules: Vec<RuntimeRuleRow>,
    /// Observations of the current model not yet folded into `rules`.
    pending: Vec<(f64, f64)>,
    switch_count: u64,
    ticks: u64,
    phases: PhaseEnergy,
    meter: Box<dyn PhaseMeter>,
}

impl std::fmt::Debug for Controller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Controller")
            .field("policy", &self.policy)
            .field("current", &self.current)
            .field("switch_count", &self.switch_count)
            .field("phases", &self.phases)
            .finish_non_exhaustive()
    }
}

impl Controller {
    pub fn new(cfg: ControllerConfig, base: &[BaseRuleRow], meter: Box<dyn PhaseMeter>) -> Result<Self> {
        let rules = init_runtime_rules(base, cfg.k)?;
        if rules.iter().enumerate().any(|(i, r)| r.model.slot() != i) {
            return Err(Error::Config("base rules must be in model index order".into()));
        }
        let initial = match cfg.policy {
            PolicyKind::NoSwitch(m) => m,
            _ => cfg.initial_model,
        };
        if initial.slot() >= rules.len() {
            return Err(Error::Config(format!("initial model {initial} is not registered")));
        }
        let planner = Planner::new(PlannerConfig::new(cfg.policy.epsilon(), cfg.planner_seed)?);
        Ok(Controller {
            policy: cfg.policy,
            update_mode: cfg.policy.update_mode(),
            planner,
            trigger: cfg.trigger,
            current: initial,
            window: SlidingWindow::new(cfg.k)?,
            rules,
            pending: Vec::new(),
            switch_count: 0,
            ticks: 0,
            phases: PhaseEnergy::default(),
            meter,
        })
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn current_model(&self) -> ModelId {
        self.current
    }

    pub fn runtime_rules(&self) -> &[RuntimeRuleRow] {
        &self.rules
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    pub fn switch_count(&self) -> u64 {
        self.switch_count
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn phase_energy(&self) -> &PhaseEnergy {
        &self.phases
    }

    fn start_timer(&self) -> Option<Instant> {
        self.meter.needs_timing().then(Instant::now)
    }

    fn charge(&mut self, phase: Phase, started: Option<Instant>) {
        let elapsed = started.map_or(Duration::ZERO, |t| t.elapsed());
        let joules = self.meter.charge(phase, elapsed);
        self.phases.add(phase, joules);
    }

    /// Buffers one processed request into the monitor window.
    pub fn monitor_step(&mut self, entry: &RequestLogEntry) -> Result<()> {
        if entry.model != self.current {
            return Err(Error::Internal(format!(
                "request {} was served by {} while {} is active",
                entry.request_id, entry.model, self.current
            )));
        }
        if !self.policy.adapts() {
            return Ok(());
        }
        let t = self.start_timer();
        self.window.push(entry.energy, entry.confidence);
        self.pending.push((entry.energy, entry.confidence));
        self.charge(Phase::Monitor, t);
        Ok(())
    }

    fn monitored(&self) -> Result<(f64, f64)> {
        match self.trigger {
            TriggerSource::WindowMean => self.window.stats(),
            TriggerSource::LatestSample => self.window.latest().ok_or(Error::NoData),
        }
    }

    fn fold_pending(&mut self) -> Result<()> {
        let slot = self.current.slot();
        for (e, c) in std::mem::take(&mut self.pending) {
            match self.update_mode {
                UpdateMode::Frozen => {}
                UpdateMode::ConfidenceOnly => self.rules[slot].observe_confidence(c)?,
                UpdateMode::Full => {
                    let row = self.rules[slot].clone();
                    self.rules[slot] = update_runtime_rules(row, e, c)?;
                }
            }
        }
        Ok(())
    }

    /// Analyzer stage: snapshots the rules, folds the new observations into
    /// the current model's row, checks the trigger against the snapshot and,
    /// when it fires, asks the planner for an action on that snapshot.
    pub fn analyzer_tick(&mut self) -> Result<TickOutcome> {
        let from = self.current;
        if !self.policy.adapts() {
            return Ok(TickOutcome::idle(from));
        }
        self.ticks += 1;
        let t = self.start_timer();
        let (e_bar, c_bar) = match self.monitored() {
            Ok(v) => v,
            Err(Error::NoData) => {
                self.charge(Phase::Analyzer, t);
                return Ok(TickOutcome::idle(from));
            }
            Err(e) => return Err(e),
        };
        let snapshot = self.rules.clone();
        self.fold_pending()?;
        let triggered = needs_adaptation(e_bar, c_bar, &snapshot[from.slot()]);
        self.charge(Phase::Analyzer, t);
        if !triggered {
            return Ok(TickOutcome::idle(from));
        }

        let t = self.start_timer();
        let (action, selection) = self.planner.plan(&snapshot, from, e_bar, c_bar);
        self.charge(Phase::Planner, t);
        Ok(TickOutcome {
            action,
            selection,
            triggered,
            from,
        })
    }

    /// Executor stage. Only a switch to a different model changes state.
    pub fn execute(&mut self, action: Action) -> Result<()> {
        let t = self.start_timer();
        if let Action::Switch(target) = action {
            if target.slot() >= self.rules.len() {
                return Err(Error::Validation(format!("switch target {target} is not registered")));
            }
            if target != self.current {
                self.current = target;
                self.switch_count += 1;
            }
        }
        self.charge(Phase::Executor, t);
        Ok(())
    }

    /// One full analyze-plan-execute pass.
    pub fn tick(&mut self) -> Result<TickOutcome> {
        let outcome = self.analyzer_tick()?;
        if outcome.planned() {
            self.execute(outcome.action)?;
        }
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapek::{Reason, SyntheticCost};

    fn m(i: usize) -> ModelId {
        ModelId::new(i).unwrap()
    }

    fn base() -> Vec<BaseRuleRow> {
        [(1.61, 0.536), (4.327, 0.611), (8.918, 0.652), (17.705, 0.675)]
            .iter()
            .enumerate()
            .map(|(i, &(e, c))| BaseRuleRow::new(m(i + 1), e, e, c).unwrap())
            .collect()
    }

    fn controller(policy: PolicyKind, initial: usize, k: usize) -> Controller {
        Controller::new(
            ControllerConfig {
                k,
                policy,
                initial_model: m(initial),
                planner_seed: 7,
                trigger: TriggerSource::WindowMean,
            },
            &base(),
            Box::new(SyntheticCost::default()),
        )
        .unwrap()
    }

    fn entry(id: u64, model: ModelId, energy: f64, confidence: f64) -> RequestLogEntry {
        RequestLogEntry {
            request_id: id,
            arrival_time: 0.0,
            model,
            energy,
            confidence,
            model_proc_time: 0.01,
            system_proc_time: 0.01,
            detections: 4,
        }
    }

    #[test]
    fn monitor_window_means() {
        let mut c = controller(PolicyKind::Naive3, 1, 3);
        for (i, e) in [1.0, 2.0, 3.0].into_iter().enumerate() {
            c.monitor_step(&entry(i as u64 + 1, m(1), e, 0.5)).unwrap();
        }
        assert_eq!(c.window().stats().unwrap().0, 2.0);

        let mut c = controller(PolicyKind::Naive3, 1, 3);
        c.monitor_step(&entry(1, m(1), 1.0, 0.4)).unwrap();
        c.monitor_step(&entry(2, m(1), 1.0, 0.6)).unwrap();
        assert!((c.window().stats().unwrap().1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monitor_rejects_foreign_model() {
        let mut c = controller(PolicyKind::Naive3, 1, 3);
        assert!(c.monitor_step(&entry(1, m(2), 1.0, 0.5)).is_err());
    }

    #[test]
    fn below_trigger_still_updates_rules() {
        let mut c = controller(PolicyKind::Naive3, 1, 3);
        c.monitor_step(&entry(1, m(1), 1.0, 0.9)).unwrap();
        let out = c.tick().unwrap();
        assert!(!out.triggered);
        assert_eq!(out.action, Action::NoAdapt);
        let row = &c.runtime_rules()[0];
        assert_eq!(row.e_latest, 1.0);
        assert_eq!(row.c_avg, 0.9);
        assert_eq!(c.phase_energy().planner_calls, 0);
    }

    #[test]
    fn above_trigger_on_large_switches_to_nano() {
        let mut c = controller(PolicyKind::Naive3, 4, 3);
        c.monitor_step(&entry(1, m(4), 20.0, 0.6)).unwrap();
        let out = c.tick().unwrap();
        assert!(out.triggered);
        assert_eq!(out.action, Action::Switch(m(1)));
        assert_eq!(out.selection.unwrap().reason, Reason::EnergyBranch);
        assert_eq!(c.current_model(), m(1));
        assert_eq!(c.switch_count(), 1);
    }

    #[test]
    fn planner_sees_pre_update_snapshot() {
        // After folding, large's row would score min(17.705, 0.5) * 0.8 = 0.4 and
        // win; the snapshot still scores it 5.75, so nano is chosen.
        let mut c = controller(PolicyKind::Naive3, 4, 2);
        c.monitor_step(&entry(1, m(4), 30.0, 0.2)).unwrap();
        c.monitor_step(&entry(2, m(4), 0.5, 0.2)).unwrap();
        let out = c.tick().unwrap();
        assert_eq!(out.selection.unwrap().reason, Reason::ConfidenceBranch);
        assert_eq!(out.action, Action::Switch(m(1)));
        assert_eq!(c.runtime_rules()[3].e_latest, 0.5);
        assert!((c.runtime_rules()[3].c_avg - 0.2).abs() < 1e-12);
    }

    #[test]
    fn execute_semantics() {
        let mut c = controller(PolicyKind::Naive3, 1, 3);
        c.execute(Action::Switch(m(2))).unwrap();
        assert_eq!((c.current_model(), c.switch_count()), (m(2), 1));
        c.execute(Action::NoAdapt).unwrap();
        assert_eq!((c.current_model(), c.switch_count()), (m(2), 1));
        c.execute(Action::Switch(m(2))).unwrap();
        assert_eq!(c.switch_count(), 1);
        assert_eq!(c.phase_energy().executor_calls, 3);
        assert!(c.execute(Action::Switch(ModelId::new(9).unwrap())).is_err());
    }

    #[test]
    fn empty_window_tick_is_no_adapt() {
        let mut c = controller(PolicyKind::Naive3, 1, 3);
        assert_eq!(c.tick().unwrap().action, Action::NoAdapt);
    }

    #[test]
    fn no_switch_runs_no_loop() {
        let mut c = controller(PolicyKind::NoSwitch(m(3)), 1, 3);
        assert_eq!(c.current_model(), m(3));
        c.monitor_step(&entry(1, m(3), 100.0, 0.0)).unwrap();
        assert_eq!(c.tick().unwrap().action, Action::NoAdapt);
        assert_eq!(c.phase_energy().total(), 0.0);
    }

    #[test]
    fn naive1_keeps_rules_frozen() {
        let mut c = controller(PolicyKind::Naive1, 2, 3);
        let before = c.runtime_rules().to_vec();
        for i in 1..50 {
            let cur = c.current_model();
            c.monitor_step(&entry(i, cur, 0.3 * i as f64, 0.5)).unwrap();
            c.tick().unwrap();
        }
        assert_eq!(c.runtime_rules(), &before[..]);
    }

    #[test]
    fn naive2_refreshes_confidence_only() {
        let mut c = controller(PolicyKind::Naive2, 1, 3);
        c.monitor_step(&entry(1, m(1), 0.2, 0.9)).unwrap();
        c.tick().unwrap();
        let row = &c.runtime_rules()[0];
        assert_eq!(row.c_avg, 0.9);
        assert_eq!(row.e_latest, 1.61);
    }

    #[test]
    fn identical_observations_identical_decisions() {
        let run = || {
            let mut c = controller(PolicyKind::EcoMls { epsilon: 0.3 }, 2, 3);
            (1..40)
                .map(|i| {
                    let cur = c.current_model();
                    c.monitor_step(&entry(i, cur, 5.0, 0.5)).unwrap();
                    c.tick().unwrap().action
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
