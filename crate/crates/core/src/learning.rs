//! Offline evaluation: run every model over an evaluation dataset, keep the
//! per-request metrics (one performance matrix per model) and aggregate them
//! into the base rules.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::{check_confidence, check_energy, BaseRuleRow, ModelId};
use crate::model_sim::{infer, MetricTrace, ModelProfile};

/// Ordered, unique request ids. In simulation an id only seeds the sampler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationDataset {
    ids: Vec<u64>,
}

impl EvaluationDataset {
    pub fn new(ids: Vec<u64>) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::Config("evaluation dataset is empty".into()));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        if let Some(dup) = ids.iter().find(|id| !seen.insert(**id)) {
            return Err(Error::Config(format!("duplicate evaluation request id {dup}")));
        }
        Ok(EvaluationDataset { ids })
    }

    /// Ids `1..=r`.
    pub fn sequential(r: usize) -> Result<Self> {
        Self::new((1..=r as u64).collect())
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub request_id: u64,
    #[serde(rename = "energy_j")]
    pub energy: f64,
    pub confidence: f64,
    #[serde(rename = "proc_time_s")]
    pub proc_time: f64,
}

/// Per-request metrics of one model over the evaluation dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceMatrix {
    pub model: ModelId,
    rows: Vec<PerformanceRow>,
}

impl PerformanceMatrix {
    pub fn new(model: ModelId, rows: Vec<PerformanceRow>) -> Result<Self> {
        for r in &rows {
            check_energy(r.energy)?;
            check_confidence(r.confidence)?;
        }
        Ok(PerformanceMatrix { model, rows })
    }

    /// Builds the matrix from the recorded trace of one model.
    pub fn from_trace(trace: &MetricTrace, model: ModelId) -> Result<Self> {
        let rows = trace
            .records(model)?
            .iter()
            .enumerate()
            .map(|(i, r)| PerformanceRow {
                request_id: i as u64 + 1,
                energy: r.energy,
                confidence: r.confidence,
                proc_time: r.proc_time,
            })
            .collect();
        PerformanceMatrix::new(model, rows)
    }

    pub fn rows(&self) -> &[PerformanceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, model: ModelId) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let rows = r
            .deserialize()
            .enumerate()
            .map(|(i, rec)| {
                rec.map_err(|e: csv::Error| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 2,
                    msg: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PerformanceMatrix::new(model, rows)
    }
}

pub fn evaluate_model(
    profile: &ModelProfile,
    dataset: &EvaluationDataset,
    seed: u64,
) -> Result<PerformanceMatrix> {
    if dataset.is_empty() {
        return Err(Error::Config("evaluation dataset is empty".into()));
    }
    let rows = dataset
        .ids()
        .iter()
        .map(|&id| {
            let o = infer(profile, id, seed);
            PerformanceRow {
                request_id: id,
                energy: o.energy,
                confidence: o.confidence,
                proc_time: o.proc_time,
            }
        })
        .collect();
    PerformanceMatrix::new(profile.model, rows)
}

/// Minimum energy, maximum energy and mean confidence of a matrix.
pub fn aggregate_rules(p: &PerformanceMatrix) -> Result<BaseRuleRow> {
    if p.is_empty() {
        return Err(Error::Validation(format!(
            "performance matrix for {} has no rows",
            p.model
        )));
    }
    let (mut e_min, mut e_max, mut c_sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    // Sum confidences in a fixed order so row permutations give identical bits.
    let mut confs: Vec<f64> = Vec::with_capacity(p.len());
    for r in p.rows() {
        e_min = e_min.min(r.energy);
        e_max = e_max.max(r.energy);
        confs.push(r.confidence);
    }
    confs.sort_by(f64::total_cmp);
    for c in confs {
        c_sum += c;
    }
    let c_avg = (c_sum / p.len() as f64).clamp(0.0, 1.0);
    BaseRuleRow::new(p.model, e_min, e_max, c_avg)
}

/// Evaluates every profile and returns (matrices, matrix A), both in model order.
pub fn evaluate_all(
    profiles: &[ModelProfile],
    dataset: &EvaluationDataset,
    seed: u64,
) -> Result<(Vec<PerformanceMatrix>, Vec<BaseRuleRow>)> {
    if profiles.is_empty() {
        return Err(Error::Config("at least one model is required".into()));
    }
    let matrices = profiles
        .par_iter()
        .map(|p| evaluate_model(p, dataset, seed))
        .collect::<Result<Vec<_>>>()?;
    let rules = matrices.iter().map(aggregate_rules).collect::<Result<Vec<_>>>()?;
    Ok((matrices, rules))
}

pub fn build_base_rules(
    profiles: &[ModelProfile],
    dataset: &EvaluationDataset,
    seed: u64,
) -> Result<Vec<BaseRuleRow>> {
    evaluate_all(profiles, dataset, seed).map(|(_, rules)| rules)
}

/// Matrix A straight from a recorded trace: each model's records form its matrix.
pub fn base_rules_from_trace(trace: &MetricTrace) -> Result<Vec<BaseRuleRow>> {
    trace
        .catalog()
        .ids()
        .map(|id| aggregate_rules(&PerformanceMatrix::from_trace(trace, id)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_sim::{calibrate_profiles, reference_targets, ProfileParams, SigmaPolicy};

    fn m(i: usize) -> ModelId {
        ModelId::new(i).unwrap()
    }

    fn matrix(rows: &[(f64, f64)]) -> PerformanceMatrix {
        PerformanceMatrix::new(
            m(1),
            rows.iter()
                .enumerate()
                .map(|(i, &(e, c))| PerformanceRow {
                    request_id: i as u64 + 1,
                    energy: e,
                    confidence: c,
                    proc_time: 0.01,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn aggregate_min_max_mean() {
        let a = aggregate_rules(&matrix(&[(2.0, 0.5), (4.0, 0.7), (3.0, 0.6)])).unwrap();
        assert_eq!((a.e_min, a.e_max), (2.0, 4.0));
        assert!((a.c_avg - 0.6).abs() < 1e-12);
    }

    #[test]
    fn aggregate_single_row() {
        let a = aggregate_rules(&matrix(&[(5.0, 0.9)])).unwrap();
        assert_eq!((a.e_min, a.e_max, a.c_avg), (5.0, 5.0, 0.9));
    }

    #[test]
    fn aggregate_running_example_bounds() {
        let a = aggregate_rules(&matrix(&[(2.0, 0.457), (9.0, 0.6), (16.0, 0.689)])).unwrap();
        assert_eq!((a.e_min, a.e_max), (2.0, 16.0));
    }

    #[test]
    fn aggregate_empty_is_error() {
        assert!(aggregate_rules(&matrix(&[])).is_err());
    }

    #[test]
    fn evaluate_shape_and_determinism() {
        let (_, profiles) = calibrate_profiles(&reference_targets(), SigmaPolicy::default()).unwrap();
        let ds = EvaluationDataset::sequential(100).unwrap();
        let p = evaluate_model(&profiles[0], &ds, 5).unwrap();
        assert_eq!(p.len(), 100);
        assert_eq!(p, evaluate_model(&profiles[0], &ds, 5).unwrap());
    }

    #[test]
    fn evaluate_degenerate_profile() {
        let profile = ModelProfile::from_params(
            m(1),
            &ProfileParams {
                name: "c".into(),
                mu_e: 2.0,
                sigma_e: 0.0,
                mu_c: 0.5,
                sigma_c: 0.0,
                mu_t: 0.01,
                sigma_t: 0.0,
                b_lo: 0,
                b_hi: 0,
            },
        )
        .unwrap();
        let ds = EvaluationDataset::new(vec![9, 4, 77]).unwrap();
        let p = evaluate_model(&profile, &ds, 1).unwrap();
        for r in p.rows() {
            assert_eq!((r.energy, r.confidence, r.proc_time), (2.0, 0.5, 0.01));
        }
    }

    #[test]
    fn empty_and_duplicate_datasets_rejected() {
        assert!(EvaluationDataset::new(vec![]).is_err());
        assert!(EvaluationDataset::new(vec![1, 2, 1]).is_err());
    }

    #[test]
    fn base_rules_one_row_per_model_in_order() {
        let (_, profiles) = calibrate_profiles(&reference_targets(), SigmaPolicy::default()).unwrap();
        let ds = EvaluationDataset::sequential(50).unwrap();
        let a = build_base_rules(&profiles, &ds, 3).unwrap();
        assert_eq!(a.iter().map(|r| r.model.index()).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(a, build_base_rules(&profiles, &ds, 3).unwrap());
    }
}
