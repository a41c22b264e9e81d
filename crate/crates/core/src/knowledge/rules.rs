use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_confidence, check_energy, MeanRing, ModelCatalog, ModelId};
use crate::error::{Error, Result};

/// One row of the base-rule matrix A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseRuleRow {
    pub model: ModelId,
    pub e_min: f64,
    pub e_max: f64,
    pub c_avg: f64,
}

impl BaseRuleRow {
    pub fn new(model: ModelId, e_min: f64, e_max: f64, c_avg: f64) -> Result<Self> {
        check_energy(e_min)?;
        check_energy(e_max)?;
        check_confidence(c_avg)?;
        if e_min > e_max {
            return Err(Error::Validation(format!(
                "{model}: e_min {e_min} exceeds e_max {e_max}"
            )));
        }
        Ok(BaseRuleRow {
            model,
            e_min,
            e_max,
            c_avg,
        })
    }

    pub fn e_avg(&self) -> f64 {
        (self.e_min + self.e_max) / 2.0
    }
}

/// One row of the runtime-rule matrix B.
///
/// `c_avg` tracks the mean of `c_window`. Before the model has been observed
/// the window is empty and `c_avg` holds the value seeded from matrix A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRuleRow {
    pub model: ModelId,
    pub e_min: f64,
    pub e_max: f64,
    pub e_latest: f64,
    pub c_avg: f64,
    pub c_window: MeanRing,
}

impl RuntimeRuleRow {
    pub fn e_avg(&self) -> f64 {
        (self.e_min + self.e_max) / 2.0
    }

    pub fn observe_energy(&mut self, energy: f64) -> Result<()> {
        check_energy(energy)?;
        self.e_latest = energy;
        Ok(())
    }

    pub fn observe_confidence(&mut self, confidence: f64) -> Result<()> {
        check_confidence(confidence)?;
        self.c_window.push(confidence);
        if let Some(m) = self.c_window.mean() {
            self.c_avg = m;
        }
        Ok(())
    }
}

/// Seeds matrix B from matrix A: bounds copied, `e_latest` at the midpoint of
/// the bounds, `c_avg` from A with an empty confidence window of length `k`.
pub fn init_runtime_rules(base: &[BaseRuleRow], k: usize) -> Result<Vec<RuntimeRuleRow>> {
    if k < 1 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if base.is_empty() {
        return Err(Error::Config("base rules are empty".into()));
    }
    base.iter()
        .map(|a| {
            Ok(RuntimeRuleRow {
                model: a.model,
                e_min: a.e_min,
                e_max: a.e_max,
                e_latest: a.e_avg(),
                c_avg: a.c_avg,
                c_window: MeanRing::new(k)?,
            })
        })
        .collect()
}

/// Applies one observation to a B row: `e_latest` replaced, confidence pushed
/// into the window and `c_avg` recomputed. Bounds are never touched.
pub fn update_runtime_rules(
    mut row: RuntimeRuleRow,
    energy: f64,
    confidence: f64,
) -> Result<RuntimeRuleRow> {
    check_energy(energy)?;
    check_confidence(confidence)?;
    row.observe_energy(energy)?;
    row.observe_confidence(confidence)?;
    Ok(row)
}

#[derive(Debug, Serialize, Deserialize)]
struct BaseCsvRow {
    model: String,
    e_min: f64,
    e_max: f64,
    c_avg: f64,
}

#[derive(Debug, Serialize)]
struct RuntimeCsvRow<'a> {
    model: &'a str,
    e_min: f64,
    e_max: f64,
    e_latest: f64,
    c_avg: f64,
}

pub fn write_base_rules_csv(path: &Path, rows: &[BaseRuleRow], catalog: &ModelCatalog) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(BaseCsvRow {
            model: catalog.name(r.model).to_string(),
            e_min: r.e_min,
            e_max: r.e_max,
            c_avg: r.c_avg,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_base_rules_csv(path: &Path, catalog: &ModelCatalog) -> Result<Vec<BaseRuleRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize::<BaseCsvRow>().enumerate() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            msg: e.to_string(),
        })?;
        let model = catalog.lookup(&rec.model)?;
        rows.push(BaseRuleRow::new(model, rec.e_min, rec.e_max, rec.c_avg)?);
    }
    rows.sort_by_key(|r| r.model);
    if rows.len() != catalog.len() || rows.iter().zip(catalog.ids()).any(|(r, id)| r.model != id) {
        return Err(Error::Config(format!(
            "{}: expected exactly one row per model ({} models)",
            path.display(),
            catalog.len()
        )));
    }
    Ok(rows)
}

pub fn write_runtime_rules_csv(
    path: &Path,
    rows: &[RuntimeRuleRow],
    catalog: &ModelCatalog,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for r in rows {
        w.serialize(RuntimeCsvRow {
            model: catalog.name(r.model),
            e_min: r.e_min,
            e_max: r.e_max,
            e_latest: r.e_latest,
            c_avg: r.c_avg,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(i: usize) -> ModelId {
        ModelId::new(i).unwrap()
    }

    fn row_with(window: &[f64], k: usize) -> RuntimeRuleRow {
        let a = BaseRuleRow::new(m(1), 1.0, 3.0, 0.5).unwrap();
        let mut row = init_runtime_rules(&[a], k).unwrap().remove(0);
        for &c in window {
            row.observe_confidence(c).unwrap();
        }
        row
    }

    #[test]
    fn init_uses_midpoint_and_seeded_confidence() {
        let a = BaseRuleRow::new(m(1), 2.0, 16.0, 0.5).unwrap();
        let b = init_runtime_rules(&[a], 5).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!((b[0].e_min, b[0].e_max, b[0].e_latest, b[0].c_avg), (2.0, 16.0, 9.0, 0.5));
        assert!(b[0].c_window.is_empty());
    }

    #[test]
    fn init_rejects_empty_base_and_zero_k() {
        assert!(matches!(init_runtime_rules(&[], 5), Err(Error::Config(_))));
        let a = BaseRuleRow::new(m(1), 2.0, 16.0, 0.5).unwrap();
        assert!(matches!(init_runtime_rules(&[a], 0), Err(Error::Config(_))));
    }

    #[test]
    fn init_keeps_model_order() {
        let a: Vec<_> = (1..=4)
            .map(|i| BaseRuleRow::new(m(i), i as f64, 2.0 * i as f64, 0.5).unwrap())
            .collect();
        let b = init_runtime_rules(&a, 10).unwrap();
        assert_eq!(b.iter().map(|r| r.model.index()).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn update_two_element_mean() {
        let row = row_with(&[0.6], 2);
        let row = update_runtime_rules(row, 3.0, 0.8).unwrap();
        assert_eq!(row.e_latest, 3.0);
        assert!((row.c_avg - 0.7).abs() < 1e-12);
    }

    #[test]
    fn update_evicts_oldest() {
        let row = row_with(&[0.5, 0.5], 2);
        let row = update_runtime_rules(row, 1.0, 0.9).unwrap();
        assert_eq!(row.c_window.iter().collect::<Vec<_>>(), vec![0.5, 0.9]);
        assert!((row.c_avg - 0.7).abs() < 1e-12);
        assert_eq!((row.e_min, row.e_max), (1.0, 3.0));
    }

    #[test]
    fn update_rejects_bad_confidence() {
        let row = row_with(&[], 2);
        assert!(matches!(
            update_runtime_rules(row, 1.0, 1.5),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn base_rule_validation() {
        assert!(BaseRuleRow::new(m(1), 3.0, 2.0, 0.5).is_err());
        assert!(BaseRuleRow::new(m(1), -1.0, 2.0, 0.5).is_err());
        assert!(BaseRuleRow::new(m(1), 1.0, 2.0, 1.1).is_err());
    }

    #[test]
    fn base_rules_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let catalog = ModelCatalog::new(vec!["nano".into(), "small".into()]).unwrap();
        let rows = vec![
            BaseRuleRow::new(m(1), 0.4, 2.9, 0.536).unwrap(),
            BaseRuleRow::new(m(2), 1.1, 7.5, 0.611).unwrap(),
        ];
        write_base_rules_csv(&path, &rows, &catalog).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("model,e_min,e_max,c_avg\n"));
        assert_eq!(read_base_rules_csv(&path, &catalog).unwrap(), rows);
    }
}
