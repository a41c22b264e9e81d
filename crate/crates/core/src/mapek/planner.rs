use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::score::{e_avg, raw_score};
use super::Action;
use crate::error::{Error, Result};
use crate::knowledge::{ModelId, RuntimeRuleRow};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Exploration probability.
    pub epsilon: f64,
    pub rng_seed: u64,
}

impl PlannerConfig {
    pub fn new(epsilon: f64, rng_seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon {epsilon} outside [0, 1]")));
        }
        Ok(PlannerConfig { epsilon, rng_seed })
    }
}

/// Why the planner picked a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Explore,
    EnergyBranch,
    ConfidenceBranch,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::Explore => "explore",
            Reason::EnergyBranch => "energy_branch",
            Reason::ConfidenceBranch => "confidence_branch",
        }
    }
}

/// A chosen model before the "same as current" rule is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub target: ModelId,
    pub reason: Reason,
}

impl Selection {
    pub fn action(self, current: ModelId) -> Action {
        if self.target == current {
            Action::NoAdapt
        } else {
            Action::Switch(self.target)
        }
    }
}

/// Exploitation step of the planner.
///
/// Every model is scored as `min(e_avg, e_latest) * (1 - c_avg)`. If the
/// monitored energy is above the current model's `e_avg`, the candidates are
/// the models whose `e_avg` is below the monitored energy; otherwise they are
/// the models whose `c_avg` is above the monitored confidence. The lowest
/// score wins, ties going to the lowest model index. No candidates, no
/// selection.
pub fn exploit(
    rules: &[RuntimeRuleRow],
    current: ModelId,
    e_bar: f64,
    c_bar: f64,
) -> Option<Selection> {
    let cur = &rules[current.slot()];
    let energy_branch = e_bar > e_avg(cur);
    let mut best: Option<(f64, usize)> = None;
    for (slot, row) in rules.iter().enumerate() {
        let eligible = if energy_branch {
            e_avg(row) < e_bar
        } else {
            row.c_avg > c_bar
        };
        if !eligible {
            continue;
        }
        let score = raw_score(e_avg(row).min(row.e_latest), row.c_avg);
        if best.is_none_or(|(s, _)| score < s) {
            best = Some((score, slot));
        }
    }
    best.map(|(_, slot)| Selection {
        target: ModelId::from_slot(slot),
        reason: if energy_branch {
            Reason::EnergyBranch
        } else {
            Reason::ConfidenceBranch
        },
    })
}

/// Epsilon-greedy model selection.
#[derive(Debug, Clone)]
pub struct Planner {
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl Planner {
    pub fn new(cfg: PlannerConfig) -> Self {
        Planner {
            epsilon: cfg.epsilon,
            rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Draws `p` in [0, 1); below epsilon a uniformly random model is
    /// explored, otherwise [`exploit`] decides.
    pub fn select(
        &mut self,
        rules: &[RuntimeRuleRow],
        current: ModelId,
        e_bar: f64,
        c_bar: f64,
    ) -> Option<Selection> {
        let p: f64 = self.rng.random();
        if p < self.epsilon {
            let slot = self.rng.random_range(0..rules.len());
            return Some(Selection {
                target: ModelId::from_slot(slot),
                reason: Reason::Explore,
            });
        }
        exploit(rules, current, e_bar, c_bar)
    }

    pub fn plan(
        &mut self,
        rules: &[RuntimeRuleRow],
        current: ModelId,
        e_bar: f64,
        c_bar: f64,
    ) -> (Action, Option<Selection>) {
        let sel = self.select(rules, current, e_bar, c_bar);
        let action = sel.map_or(Action::NoAdapt, |s| s.action(current));
        (action, sel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::{init_runtime_rules, BaseRuleRow};

    fn m(i: usize) -> ModelId {
        ModelId::new(i).unwrap()
    }

    /// Rows seeded with a single energy value per model (e_min = e_max = e_latest).
    fn rules(rows: &[(f64, f64)]) -> Vec<RuntimeRuleRow> {
        let a: Vec<_> = rows
            .iter()
            .enumerate()
            .map(|(i, &(e, c))| BaseRuleRow::new(m(i + 1), e, e, c).unwrap())
            .collect();
        init_runtime_rules(&a, 10).unwrap()
    }

    fn table_rows() -> Vec<RuntimeRuleRow> {
        rules(&[(1.61, 0.536), (4.327, 0.611), (8.918, 0.652), (17.705, 0.675)])
    }

    #[test]
    fn energy_branch_from_large_picks_nano() {
        // nano 0.747, small 1.683, medium 3.103 are the candidates.
        let sel = exploit(&table_rows(), m(4), 17.705 + 1e-9, 0.675).unwrap();
        assert_eq!(sel, Selection { target: m(1), reason: Reason::EnergyBranch });
    }

    #[test]
    fn energy_branch_from_lowest_model_keeps_it() {
        // Taking the energy branch on the lowest-e_avg model always admits that
        // model itself, so the outcome is no adaptation rather than an empty set.
        let r = table_rows();
        let sel = exploit(&r, m(1), 1.61 + 1e-9, 0.5).unwrap();
        assert_eq!(sel, Selection { target: m(1), reason: Reason::EnergyBranch });
        assert_eq!(sel.action(m(1)), Action::NoAdapt);
    }

    #[test]
    fn confidence_branch_empty_candidates() {
        let r = table_rows();
        // No model's c_avg exceeds 0.675.
        assert_eq!(exploit(&r, m(4), 10.0, 0.675), None);
        let mut p = Planner::new(PlannerConfig::new(0.0, 3).unwrap());
        assert_eq!(p.plan(&r, m(4), 10.0, 0.675).0, Action::NoAdapt);
    }

    #[test]
    fn confidence_branch_all_candidates_picks_nano() {
        let r = table_rows();
        let sel = exploit(&r, m(2), 1.0, 0.5).unwrap();
        assert_eq!(sel, Selection { target: m(1), reason: Reason::ConfidenceBranch });
        assert_eq!(sel.action(m(1)), Action::NoAdapt);
        assert_eq!(sel.action(m(2)), Action::Switch(m(1)));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let r = rules(&[(2.0, 0.5), (1.0, 0.0), (4.0, 0.75)]); // all score 1.0
        let sel = exploit(&r, m(3), 0.5, 0.0).unwrap();
        assert_eq!(sel.target, m(1));
    }

    #[test]
    fn e_latest_lowers_score() {
        let mut r = table_rows();
        r[1].e_latest = 1.0; // small: min(4.327, 1.0) * 0.389 = 0.389 < 0.747
        assert_eq!(exploit(&r, m(4), 20.0, 0.6).unwrap().target, m(2));
    }

    #[test]
    fn epsilon_zero_is_deterministic() {
        let r = table_rows();
        let mut a = Planner::new(PlannerConfig::new(0.0, 1).unwrap());
        let mut b = Planner::new(PlannerConfig::new(0.0, 999).unwrap());
        for (e, c) in [(20.0, 0.6), (1.0, 0.3), (5.0, 0.7)] {
            assert_eq!(a.plan(&r, m(3), e, c), b.plan(&r, m(3), e, c));
        }
    }

    #[test]
    fn epsilon_one_always_explores() {
        let r = table_rows();
        let mut p = Planner::new(PlannerConfig::new(1.0, 4).unwrap());
        for _ in 0..100 {
            assert_eq!(p.select(&r, m(1), 1.0, 0.5).unwrap().reason, Reason::Explore);
        }
    }

    #[test]
    fn epsilon_out_of_range() {
        assert!(PlannerConfig::new(1.5, 0).is_err());
        assert!(PlannerConfig::new(-0.1, 0).is_err());
    }

    #[test]
    fn action_codes() {
        assert_eq!(Action::NoAdapt.code(), -1);
        assert_eq!(Action::Switch(m(3)).code(), 3);
    }
}
