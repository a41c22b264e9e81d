//! Simulated models: per-request generators of energy, confidence,
//! processing time and detection count, or replay of recorded metrics.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::knowledge::{check_confidence, ModelCatalog, ModelId};
use crate::seed::draw_seed;

fn std_normal() -> Normal {
    Normal::standard()
}

/// Normal distribution with location `mu` and scale `sigma`, restricted to `[lo, hi]`.
///
/// `mu` is the location of the parent normal, not the post-truncation mean;
/// see [`TruncatedNormal::mean`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedNormal {
    pub mu: f64,
    pub sigma: f64,
    pub lo: f64,
    pub hi: f64,
}

impl TruncatedNormal {
    pub fn new(mu: f64, sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Validation(format!(
                "invalid normal parameters mu={mu} sigma={sigma}"
            )));
        }
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Validation(format!("invalid truncation bounds [{lo}, {hi}]")));
        }
        if sigma == 0.0 && !(lo..=hi).contains(&mu) {
            return Err(Error::Validation(format!(
                "degenerate distribution at {mu} lies outside [{lo}, {hi}]"
            )));
        }
        Ok(TruncatedNormal { mu, sigma, lo, hi })
    }

    fn standardized(&self) -> (f64, f64) {
        ((self.lo - self.mu) / self.sigma, (self.hi - self.mu) / self.sigma)
    }

    /// Mean after truncation.
    pub fn mean(&self) -> f64 {
        if self.sigma == 0.0 {
            return self.mu.clamp(self.lo, self.hi);
        }
        let n = std_normal();
        let (a, b) = self.standardized();
        let (pa, pb) = (n.pdf(a), n.pdf(b));
        // Work in whichever tail keeps the mass difference well conditioned.
        let mass = if a > 0.0 { n.sf(a) - n.sf(b) } else { n.cdf(b) - n.cdf(a) };
        if mass <= 0.0 {
            return if a > 0.0 { self.lo } else { self.hi };
        }
        (self.mu + self.sigma * (pa - pb) / mass).clamp(self.lo, self.hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if self.sigma == 0.0 {
            return self.mu;
        }
        let n = std_normal();
        let (a, b) = self.standardized();
        let z = if a > 0.0 {
            // Upper tail: invert through the survival function.
            let (sa, sb) = (n.sf(a), n.sf(b));
            let q = sa - u * (sa - sb);
            -n.inverse_cdf(q)
        } else {
            let (fa, fb) = (n.cdf(a), n.cdf(b));
            n.inverse_cdf(fa + u * (fb - fa))
        };
        let x = self.mu + self.sigma * z;
        if x.is_finite() {
            x.clamp(self.lo, self.hi)
        } else if z > 0.0 {
            self.hi.min(self.mu.max(self.lo))
        } else {
            self.lo
        }
    }
}

/// Outputs of one simulated inference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub energy: f64,
    pub confidence: f64,
    pub proc_time: f64,
    pub detections: u32,
}

/// Stochastic stand-in for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub model: ModelId,
    pub name: String,
    pub energy: TruncatedNormal,
    pub confidence: TruncatedNormal,
    pub proc_time: TruncatedNormal,
    pub b_lo: u32,
    pub b_hi: u32,
}

/// Flat parameter set as it appears in a profile file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileParams {
    pub name: String,
    pub mu_e: f64,
    pub sigma_e: f64,
    pub mu_c: f64,
    pub sigma_c: f64,
    pub mu_t: f64,
    pub sigma_t: f64,
    pub b_lo: u32,
    pub b_hi: u32,
}

impl ModelProfile {
    pub fn from_params(model: ModelId, p: &ProfileParams) -> Result<Self> {
        let ctx = |e: Error| Error::Validation(format!("profile `{}`: {e}", p.name));
        check_confidence(p.mu_c).map_err(ctx)?;
        if p.b_lo > p.b_hi {
            return Err(Error::Validation(format!(
                "profile `{}`: b_lo {} exceeds b_hi {}",
                p.name, p.b_lo, p.b_hi
            )));
        }
        Ok(ModelProfile {
            model,
            name: p.name.clone(),
            energy: TruncatedNormal::new(p.mu_e, p.sigma_e, 0.0, f64::INFINITY).map_err(ctx)?,
            confidence: TruncatedNormal::new(p.mu_c, p.sigma_c, 0.0, 1.0).map_err(ctx)?,
            proc_time: TruncatedNormal::new(p.mu_t, p.sigma_t, 0.0, f64::INFINITY).map_err(ctx)?,
            b_lo: p.b_lo,
            b_hi: p.b_hi,
        })
    }

    pub fn params(&self) -> ProfileParams {
        ProfileParams {
            name: self.name.clone(),
            mu_e: self.energy.mu,
            sigma_e: self.energy.sigma,
            mu_c: self.confidence.mu,
            sigma_c: self.confidence.sigma,
            mu_t: self.proc_time.mu,
            sigma_t: self.proc_time.sigma,
            b_lo: self.b_lo,
            b_hi: self.b_hi,
        }
    }

    /// Same profile with location parameters replaced, bounds and spreads kept.
    pub fn shifted(&self, mu_e: f64, mu_c: f64) -> Result<Self> {
        let mut p = self.params();
        p.mu_e = mu_e;
        p.mu_c = mu_c;
        ModelProfile::from_params(self.model, &p)
    }
}

/// One simulated inference, a pure function of `(profile, request_id, seed)`.
pub fn infer(profile: &ModelProfile, request_id: u64, seed: u64) -> Observation {
    let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(seed, profile.model.index(), request_id));
    let energy = profile.energy.sample(&mut rng);
    let confidence = profile.confidence.sample(&mut rng);
    let proc_time = profile.proc_time.sample(&mut rng);
    let detections = rng.random_range(profile.b_lo..=profile.b_hi);
    Observation {
        energy,
        confidence,
        proc_time,
        detections,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileFile {
    model: Vec<ProfileParams>,
}

/// Reads a TOML profile file: one `[[model]]` table per model, in index order.
pub fn load_profiles(path: &Path) -> Result<(ModelCatalog, Vec<ModelProfile>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ProfileFile = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let catalog = ModelCatalog::new(file.model.iter().map(|p| p.name.clone()).collect())?;
    let profiles = file
        .model
        .iter()
        .zip(catalog.ids())
        .map(|(p, id)| ModelProfile::from_params(id, p))
        .collect::<Result<Vec<_>>>()?;
    Ok((catalog, profiles))
}

pub fn save_profiles(path: &Path, profiles: &[ModelProfile]) -> Result<()> {
    let file = ProfileFile {
        model: profiles.iter().map(ModelProfile::params).collect(),
    };
    let text = toml::to_string(&file).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Calibration

/// What a calibrated profile should reproduce when run on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub name: String,
    pub c_avg: f64,
    pub e_avg: f64,
    /// Mean inference time, seconds.
    pub mu_t: f64,
    pub b_lo: u32,
    pub b_hi: u32,
}

impl CalibrationTarget {
    pub fn new(name: &str, c_avg: f64, e_avg: f64, mu_t: f64, b_lo: u32, b_hi: u32) -> Self {
        CalibrationTarget {
            name: name.to_string(),
            c_avg,
            e_avg,
            mu_t,
            b_lo,
            b_hi,
        }
    }
}

/// Standalone (C_avg, E_avg) of the four YOLOv5 variants measured in the
/// reference experiment. Times and detection ranges are illustrative.
pub fn reference_targets() -> Vec<CalibrationTarget> {
    vec![
        CalibrationTarget::new("nano", 0.536, 1.61, 0.025, 0, 6),
        CalibrationTarget::new("small", 0.611, 4.327, 0.045, 0, 8),
        CalibrationTarget::new("medium", 0.652, 8.918, 0.085, 1, 10),
        CalibrationTarget::new("large", 0.675, 17.705, 0.16, 1, 12),
    ]
}

/// Spread used when building profiles from aggregate targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPolicy {
    /// Absolute confidence spread.
    pub sigma_c: f64,
    /// Energy spread relative to the target mean.
    pub sigma_e_rel: f64,
    /// Processing-time spread relative to the target mean.
    pub sigma_t_rel: f64,
}

impl Default for SigmaPolicy {
    fn default() -> Self {
        SigmaPolicy {
            sigma_c: 0.12,
            sigma_e_rel: 0.25,
            sigma_t_rel: 0.2,
        }
    }
}

impl SigmaPolicy {
    pub fn zero() -> Self {
        SigmaPolicy {
            sigma_c: 0.0,
            sigma_e_rel: 0.0,
            sigma_t_rel: 0.0,
        }
    }
}

/// Finds the parent location whose truncated mean equals `target`.
pub fn solve_location(target: f64, sigma: f64, lo: f64, hi: f64) -> Result<f64> {
    if sigma == 0.0 {
        return if (lo..=hi).contains(&target) {
            Ok(target)
        } else {
            Err(Error::Calibration(format!("target {target} outside [{lo}, {hi}]")))
        };
    }
    if !(target > lo && target < hi) {
        return Err(Error::Calibration(format!(
            "target {target} unreachable inside ({lo}, {hi}) with sigma {sigma}"
        )));
    }
    let mean_at = |mu: f64| TruncatedNormal { mu, sigma, lo, hi }.mean();
    // Beyond ~35 sigma past a bound the tail mass underflows.
    let limit = 35.0 * sigma;
    let mut width = sigma;
    let (mut a, mut b) = (target - width, target + width);
    while mean_at(a) > target || mean_at(b) < target {
        width *= 2.0;
        a = target - width;
        b = target + width;
        if a < lo - limit && b > hi + limit {
            return Err(Error::Calibration(format!(
                "could not bracket location for target {target} in ({lo}, {hi})"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mean_at(mid) < target {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-13 * (1.0 + target.abs()) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// Builds one profile per target, in order, whose post-truncation means hit
/// the targets.
pub fn calibrate_profiles(
    targets: &[CalibrationTarget],
    policy: SigmaPolicy,
) -> Result<(ModelCatalog, Vec<ModelProfile>)> {
    if policy.sigma_c < 0.0 || policy.sigma_e_rel < 0.0 || policy.sigma_t_rel < 0.0 {
        return Err(Error::Config("sigma policy values must be >= 0".into()));
    }
    let catalog = ModelCatalog::new(targets.iter().map(|t| t.name.clone()).collect())?;
    let profiles = targets
        .iter()
        .zip(catalog.ids())
        .map(|(t, id)| {
            if !(0.0..=1.0).contains(&t.c_avg) {
                return Err(Error::Calibration(format!(
                    "`{}`: confidence target {} outside [0, 1]",
                    t.name, t.c_avg
                )));
            }
            if t.e_avg < 0.0 || t.mu_t < 0.0 {
                return Err(Error::Calibration(format!(
                    "`{}`: energy and time targets must be >= 0",
                    t.name
                )));
            }
            let sigma_e = policy.sigma_e_rel * t.e_avg;
            let sigma_t = policy.sigma_t_rel * t.mu_t;
            let ctx = |e: Error| Error::Calibration(format!("`{}`: {e}", t.name));
            let params = ProfileParams {
                name: t.name.clone(),
                mu_e: solve_location(t.e_avg, sigma_e, 0.0, f64::INFINITY).map_err(ctx)?,
                sigma_e,
                mu_c: solve_location(t.c_avg, policy.sigma_c, 0.0, 1.0).map_err(ctx)?,
                sigma_c: policy.sigma_c,
                mu_t: solve_location(t.mu_t, sigma_t, 0.0, f64::INFINITY).map_err(ctx)?,
                sigma_t,
                b_lo: t.b_lo,
                b_hi: t.b_hi,
            };
            // The solved confidence location may sit slightly past 1 for
            // targets near the bound; the parameter check only applies to
            // hand-written profiles.
            Ok(ModelProfile {
                model: id,
                name: params.name.clone(),
                energy: TruncatedNormal::new(params.mu_e, sigma_e, 0.0, f64::INFINITY)?,
                confidence: TruncatedNormal::new(params.mu_c, policy.sigma_c, 0.0, 1.0)?,
                proc_time: TruncatedNormal::new(params.mu_t, sigma_t, 0.0, f64::INFINITY)?,
                b_lo: t.b_lo,
                b_hi: t.b_hi,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((catalog, profiles))
}

// ---------------------------------------------------------------------------
// Trace replay

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub model: ModelId,
    pub energy: f64,
    pub confidence: f64,
    pub proc_time: f64,
    pub detections: u32,
}

impl TraceRecord {
    pub fn observation(&self) -> Observation {
        Observation {
            energy: self.energy,
            confidence: self.confidence,
            proc_time: self.proc_time,
            detections: self.detections,
        }
    }
}

#[derive(Debug, Deserialize)]
struct TraceCsvRow {
    model: String,
    energy_j: f64,
    confidence: f64,
    proc_time_s: f64,
    detections: u32,
}

/// Recorded per-request metrics, replayed per model in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrace {
    catalog: ModelCatalog,
    per_model: Vec<Vec<TraceRecord>>,
}

impl MetricTrace {
    pub fn new(catalog: ModelCatalog, records: Vec<TraceRecord>) -> Result<Self> {
        let mut per_model = vec![Vec::new(); catalog.len()];
        for r in records {
            if !catalog.contains(r.model) {
                return Err(Error::Config(format!("trace references unknown model {}", r.model)));
            }
            check_confidence(r.confidence)?;
            if r.energy < 0.0 || r.proc_time < 0.0 {
                return Err(Error::Validation("trace energy and time must be >= 0".into()));
            }
            per_model[r.model.slot()].push(r);
        }
        if let Some(id) = catalog.ids().find(|id| per_model[id.slot()].is_empty()) {
            return Err(Error::Config(format!(
                "trace has no records for registered model `{}`",
                catalog.name(id)
            )));
        }
        Ok(MetricTrace { catalog, per_model })
    }

    /// Loads `model,energy_j,confidence,proc_time_s,detections`. Models are
    /// numbered in order of first appearance unless a catalog is given.
    pub fn load(path: &Path, catalog: Option<&ModelCatalog>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut names: Vec<String> = catalog.map(|c| c.names().to_vec()).unwrap_or_default();
        let mut rows = Vec::new();
        for (i, rec) in reader.deserialize::<TraceCsvRow>().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: e.to_string(),
            })?;
            let slot = match names.iter().position(|n| *n == rec.model) {
                Some(s) => s,
                None if catalog.is_none() => {
                    names.push(rec.model.clone());
                    names.len() - 1
                }
                None => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        line,
                        msg: format!("unknown model `{}`", rec.model),
                    })
                }
            };
            if !(0.0..=1.0).contains(&rec.confidence) || rec.energy_j < 0.0 || rec.proc_time_s < 0.0 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    msg: "values out of range".into(),
                });
            }
            rows.push(TraceRecord {
                model: ModelId::from_slot(slot),
                energy: rec.energy_j,
                confidence: rec.confidence,
                proc_time: rec.proc_time_s,
                detections: rec.detections,
            });
        }
        MetricTrace::new(ModelCatalog::new(names)?, rows)
    }

    pub fn catalog(&self) -> &ModelCatalog {
        &self.catalog
    }

    pub fn records(&self, model: ModelId) -> Result<&[TraceRecord]> {
        self.per_model
            .get(model.slot())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("model {model} is not in the trace")))
    }
}

/// Per-model replay cursors over a [`MetricTrace`]. Cursors wrap to the start
/// when exhausted; every wrap is counted.
#[derive(Debug, Clone)]
pub struct TraceReplay {
    trace: MetricTrace,
    cursors: Vec<usize>,
    wraps: u64,
}

impl TraceReplay {
    pub fn new(trace: MetricTrace) -> Self {
        let n = trace.catalog.len();
        TraceReplay {
            trace,
            cursors: vec![0; n],
            wraps: 0,
        }
    }

    pub fn replay_infer(&mut self, model: ModelId) -> Result<TraceRecord> {
        let records = self.trace.records(model)?;
        let cursor = &mut self.cursors[model.slot()];
        if *cursor == records.len() {
            *cursor = 0;
            self.wraps += 1;
        }
        let rec = records[*cursor];
        *cursor += 1;
        Ok(rec)
    }

    pub fn wraps(&self) -> u64 {
        self.wraps
    }

    pub fn trace(&self) -> &MetricTrace {
        &self.trace
    }
}

// ---------------------------------------------------------------------------
// Backends

/// Source of per-request model outputs for the simulation engine.
pub trait ModelBackend: Send {
    fn catalog(&self) -> &ModelCatalog;

    fn infer(&mut self, model: ModelId, request_id: u64) -> Result<Observation>;

    /// Number of times a replay cursor wrapped around.
    fn wraps(&self) -> u64 {
        0
    }
}

/// Profile parameters that take over from a given request id onwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub at_request: u64,
    pub profiles: Vec<ModelProfile>,
}

/// Sampled backend: outputs are pure functions of (profile, request id, seed),
/// so every policy sees the same draw for the same (model, request).
#[derive(Debug, Clone)]
pub struct SampledModels {
    catalog: ModelCatalog,
    profiles: Vec<ModelProfile>,
    seed: u64,
    drift: Option<Drift>,
}

impl SampledModels {
    pub fn new(catalog: ModelCatalog, profiles: Vec<ModelProfile>, seed: u64) -> Result<Self> {
        check_profiles(&catalog, &profiles)?;
        Ok(SampledModels {
            catalog,
            profiles,
            seed,
            drift: None,
        })
    }

    pub fn with_drift(mut self, drift: Drift) -> Result<Self> {
        check_profiles(&self.catalog, &drift.profiles)?;
        self.drift = Some(drift);
        Ok(self)
    }

    pub fn profiles(&self) -> &[ModelProfile] {
        &self.profiles
    }

    pub fn profile_for(&self, model: ModelId, request_id: u64) -> &ModelProfile {
        match &self.drift {
            Some(d) if request_id >= d.at_request => &d.profiles[model.slot()],
            _ => &self.profiles[model.slot()],
        }
    }
}

fn check_profiles(catalog: &ModelCatalog, profiles: &[ModelProfile]) -> Result<()> {
    if profiles.len() != catalog.len()
        || profiles.iter().zip(catalog.ids()).any(|(p, id)| p.model != id)
    {
        return Err(Error::Config(
            "profiles must list every model exactly once, in index order".into(),
        ));
    }
    Ok(())
}

impl ModelBackend for SampledModels {
    fn catalog(&self) -> &ModelCatalog {
        &self.catalog
    }

    fn infer(&mut self, model: ModelId, request_id: u64) -> Result<Observation> {
        if !self.catalog.contains(model) {
            return Err(Error::Config(format!("unknown model {model}")));
        }
        Ok(infer(self.profile_for(model, request_id), request_id, self.seed))
    }
}

impl ModelBackend for TraceReplay {
    fn catalog(&self) -> &ModelCatalog {
        &self.trace.catalog
    }

    fn infer(&mut self, model: ModelId, _request_id: u64) -> Result<Observation> {
        self.replay_infer(model).map(|r| r.observation())
    }

    fn wraps(&self) -> u64 {
        self.wraps
    }
}
