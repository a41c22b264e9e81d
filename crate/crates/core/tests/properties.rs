use ecomls::engine::Simulation;
use ecomls::knowledge::{
    init_runtime_rules, BaseRuleRow, LogRepository, ModelCatalog, ModelId, RequestLogEntry, SlidingWindow,
};
use ecomls::learning::{aggregate_rules, PerformanceMatrix, PerformanceRow};
use ecomls::mapek::{
    exploit, Cadence, Controller, ControllerConfig, CostModel, PhaseEnergy, PolicyKind, Reason, TriggerSource,
};
use ecomls::model_sim::{infer, ModelProfile, ProfileParams, SampledModels, TruncatedNormal};
use ecomls::report::summarize;
use ecomls::workload::ArrivalTrace;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn m(i: usize) -> ModelId {
    ModelId::new(i).unwrap()
}

fn rows_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((0.0..20.0f64, 0.0..10.0f64, 0.0..=1.0f64, 0.0..30.0f64), 2..6)
}

fn build_rules(raw: &[(f64, f64, f64, f64)], scale: f64) -> Vec<ecomls::knowledge::RuntimeRuleRow> {
    let base: Vec<BaseRuleRow> = raw
        .iter()
        .enumerate()
        .map(|(i, &(lo, span, c, _))| BaseRuleRow::new(m(i + 1), lo * scale, (lo + span) * scale, c).unwrap())
        .collect();
    let mut rules = init_runtime_rules(&base, 5).unwrap();
    for (r, &(_, _, _, latest)) in rules.iter_mut().zip(raw) {
        r.e_latest = latest * scale;
    }
    rules
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn branch_invariants(raw in rows_strategy(), cur in 0usize..6, e_bar in 0.0..40.0f64, c_bar in 0.0..=1.0f64) {
        let rules = build_rules(&raw, 1.0);
        let cur = m(cur % rules.len() + 1);
        if let Some(sel) = exploit(&rules, cur, e_bar, c_bar) {
            let row = &rules[sel.target.slot()];
            match sel.reason {
                Reason::EnergyBranch => prop_assert!(row.e_avg() < e_bar),
                Reason::ConfidenceBranch => prop_assert!(row.c_avg > c_bar),
                Reason::Explore => prop_assert!(false, "exploit never explores"),
            }
        }
    }

    #[test]
    fn argmin_invariant_under_energy_scaling(raw in rows_strategy(), cur in 0usize..6, e_bar in 0.0..40.0f64, c_bar in 0.0..=1.0f64, pow in -3i32..4) {
        // Powers of two scale every energy exactly.
        let s = 2f64.powi(pow);
        let a = build_rules(&raw, 1.0);
        let b = build_rules(&raw, s);
        let cur = m(cur % a.len() + 1);
        prop_assert_eq!(exploit(&a, cur, e_bar, c_bar), exploit(&b, cur, e_bar * s, c_bar));
    }

    #[test]
    fn aggregate_is_permutation_invariant(rows in prop::collection::vec((0.0..50.0f64, 0.0..=1.0f64), 1..60), seed in any::<u64>()) {
        let mk = |rows: &[(f64, f64)]| {
            PerformanceMatrix::new(m(1), rows.iter().enumerate().map(|(i, &(e, c))| PerformanceRow {
                request_id: i as u64 + 1, energy: e, confidence: c, proc_time: 0.01,
            }).collect()).unwrap()
        };
        let a = aggregate_rules(&mk(&rows)).unwrap();
        let mut shuffled = rows.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let b = aggregate_rules(&mk(&shuffled)).unwrap();
        prop_assert_eq!(a, b);
        let mean = rows.iter().map(|r| r.0).sum::<f64>() / rows.len() as f64;
        prop_assert!(a.e_min <= mean + 1e-9 && mean <= a.e_max + 1e-9);
    }

    #[test]
    fn constant_window_is_exact(e in 0.0..100.0f64, c in 0.0..=1.0f64, k in 1usize..20, n in 1usize..100) {
        let mut w = SlidingWindow::new(k).unwrap();
        for _ in 0..n {
            w.push(e, c);
        }
        prop_assert_eq!(w.stats().unwrap(), (e, c));
    }

    #[test]
    fn truncated_samples_respect_bounds(mu in -2.0..3.0f64, sigma in 0.0..2.0f64, seed in any::<u64>()) {
        let d = TruncatedNormal::new(mu, sigma, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..2000 {
            let x = d.sample(&mut rng);
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn histogram_conserves_requests(points in prop::collection::vec((0.0..40.0f64, 0.0..=1.0f64), 1..300)) {
        let mut log = LogRepository::new();
        for (i, &(e, c)) in points.iter().enumerate() {
            log.log_request(RequestLogEntry {
                request_id: i as u64 + 1, arrival_time: 0.0, model: m(1), energy: e, confidence: c,
                model_proc_time: 0.0, system_proc_time: 0.0, detections: 0,
            }).unwrap();
        }
        let r = summarize("p", &log, &PhaseEnergy::default(), 0).unwrap();
        prop_assert_eq!(r.histogram.total(), points.len() as u64);
        prop_assert_eq!(r, summarize("p", &log, &PhaseEnergy::default(), 0).unwrap());
    }

    #[test]
    fn log_rejects_non_increasing_ids(ids in prop::collection::vec(1u64..50, 1..40)) {
        let mut log = LogRepository::new();
        let mut last = 0;
        for id in ids {
            let res = log.log_request(RequestLogEntry {
                request_id: id, arrival_time: 0.0, model: m(1), energy: 1.0, confidence: 0.5,
                model_proc_time: 0.0, system_proc_time: 0.0, detections: 0,
            });
            prop_assert_eq!(res.is_ok(), id > last);
            if id > last { last = id; }
        }
        let ids: Vec<u64> = log.iter().map(|e| e.request_id).collect();
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }
}

fn profile(i: usize, e: f64, c: f64, t: f64) -> ModelProfile {
    ModelProfile::from_params(
        m(i),
        &ProfileParams {
            name: format!("m{i}"),
            mu_e: e,
            sigma_e: 0.3 * e,
            mu_c: c,
            sigma_c: 0.15,
            mu_t: t,
            sigma_t: 0.3 * t,
            b_lo: 0,
            b_hi: 5,
        },
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn engine_serves_every_request_once(
        gaps in prop::collection::vec(0.0..0.3f64, 1..400),
        policy in 0usize..5,
        per_second in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let catalog = ModelCatalog::new((1..=3).map(|i| format!("m{i}")).collect()).unwrap();
        let profiles = vec![profile(1, 1.0, 0.5, 0.02), profile(2, 3.0, 0.6, 0.08), profile(3, 8.0, 0.7, 0.2)];
        let base: Vec<BaseRuleRow> = profiles.iter().map(|p| {
            let o: Vec<_> = (1..=50).map(|id| infer(p, id, seed)).collect();
            let lo = o.iter().map(|x| x.energy).fold(f64::INFINITY, f64::min);
            let hi = o.iter().map(|x| x.energy).fold(0.0, f64::max);
            let c = o.iter().map(|x| x.confidence).sum::<f64>() / 50.0;
            BaseRuleRow::new(p.model, lo, hi, c).unwrap()
        }).collect();
        let mut t = 0.0;
        let times: Vec<f64> = gaps.iter().map(|g| { t += g; t }).collect();
        let n = times.len();
        let policy = [PolicyKind::NoSwitch(m(2)), PolicyKind::Naive1, PolicyKind::Naive2, PolicyKind::Naive3,
            PolicyKind::EcoMls { epsilon: 0.5 }][policy];
        let ctl = Controller::new(ControllerConfig {
            k: 4, policy, initial_model: m(1), planner_seed: seed, trigger: TriggerSource::WindowMean,
        }, &base, CostModel::default().meter()).unwrap();
        let cadence = if per_second { Cadence::PerSecond } else { Cadence::PerRequest };
        let sim = Simulation::new(
            Box::new(SampledModels::new(catalog, profiles, seed).unwrap()),
            ArrivalTrace::new(times).unwrap(), ctl, cadence, None,
        ).unwrap();
        let out = sim.run("p").unwrap();
        let ids: Vec<u64> = out.log.iter().map(|e| e.request_id).collect();
        prop_assert_eq!(ids, (1..=n as u64).collect::<Vec<_>>());
        let mut free = 0.0f64;
        for e in out.log.iter() {
            prop_assert!(e.system_proc_time >= e.model_proc_time);
            let start = e.arrival_time + e.system_proc_time - e.model_proc_time;
            prop_assert!(start + 1e-9 >= free);
            free = start + e.model_proc_time;
        }
        prop_assert_eq!(out.switch_count, out.timeline.len() as u64);
        let phases = out.phases;
        prop_assert!(phases.monitor >= 0.0 && phases.analyzer >= 0.0 && phases.planner >= 0.0 && phases.executor >= 0.0);
        if !policy.adapts() {
            prop_assert_eq!(phases.total(), 0.0);
            prop_assert!(out.log.iter().all(|e| e.model == m(2)));
        }
    }
}
