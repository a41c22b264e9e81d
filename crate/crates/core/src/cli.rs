//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{comparison_policies, write_comparison, write_run_artifacts, DEFAULT_EPSILONS};
use crate::knowledge::write_base_rules_csv;
use crate::learning::{evaluate_all, EvaluationDataset, PerformanceMatrix};
use crate::mapek::PolicyKind;
use crate::model_sim::MetricTrace;
use crate::report::{write_summary_csv, RunReport};

const DEFAULTS: &str = "\
Config defaults (TOML; every key optional):
  seed = 42            k = 10              epsilon = 0.1
  policy = \"ecomls\"    cadence = \"per_request\" (or \"per_second\")
  trigger = \"window_mean\" (or \"latest_sample\")
  initial_model = first model            eval_requests = 500
  out_dir = \"out\"
  [models]   profiles/trace/base_rules unset (calibrated reference models),
             sigma_c = 0.12, sigma_e_rel = 0.25, sigma_t_rel = 0.2
  [workload] requests = 25000, rate = 5.0, trace unset, queue_capacity unset
  [costs]    meter = \"synthetic\", monitor = 1.25, analyzer = 0.001,
             planner = 0.001, executor = 0.0005 (joules per call);
             meter = \"wall_clock\" uses watts = 15.0
  [drift]    unset; at_request plus profiles file or shift.<model> = { mu_e, mu_c }

Exit codes: 0 ok, 2 usage/validation, 3 I/O, 4 internal.";

#[derive(Debug, Parser)]
#[command(name = "ecomls", version, about = "Energy-aware runtime model switching simulator")]
#[command(after_help = DEFAULTS)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every model offline and write P_j matrices and matrix A.
    Learn,
    /// Run one policy over the workload.
    Run {
        /// Policy override, e.g. `naive3`, `no_switch:nano`, `ecomls:0.2`.
        #[arg(long)]
        policy: Option<String>,
        /// Epsilon override for `ecomls`.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run EcoMLS once per epsilon on the same workload.
    Sweep {
        /// Comma-separated epsilon values.
        #[arg(long = "epsilons", value_delimiter = ',', required = true, num_args = 1..)]
        epsilons: Vec<f64>,
    },
    /// Run all standalone models, EcoMLS per epsilon and naive 1-3.
    Compare {
        #[arg(long = "epsilons", value_delimiter = ',', default_values_t = DEFAULT_EPSILONS.to_vec())]
        epsilons: Vec<f64>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn check_epsilon(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::Validation(format!("`epsilon`: must be in [0, 1], got {eps}")))
    }
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `P_<model>.csv` for every model and `matrix_a.csv`.
pub fn cmd_learn(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = &cfg.out_dir;
    mkdir(dir)?;
    let (catalog, matrices, rules) = match &cfg.models.trace {
        Some(p) => {
            let trace = MetricTrace::load(p, None)?;
            let matrices = trace
                .catalog()
                .ids()
                .map(|id| PerformanceMatrix::from_trace(&trace, id))
                .collect::<Result<Vec<_>>>()?;
            let rules = matrices
                .iter()
                .map(crate::learning::aggregate_rules)
                .collect::<Result<Vec<_>>>()?;
            (trace.catalog().clone(), matrices, rules)
        }
        None => {
            let (catalog, profiles) = cfg.profiles()?;
            let dataset = EvaluationDataset::sequential(cfg.eval_requests)?;
            let (m, r) = evaluate_all(&profiles, &dataset, cfg.learn_seed())?;
            (catalog, m, r)
        }
    };
    let mut written = Vec::new();
    for m in &matrices {
        let path = dir.join(format!("P_{}.csv", catalog.name(m.model)));
        m.write_csv(&path)?;
        written.push(path);
    }
    let a = dir.join("matrix_a.csv");
    write_base_rules_csv(&a, &rules, &catalog)?;
    written.push(a);
    Ok(written)
}

pub fn cmd_run(cfg: &ExperimentConfig, policy: Option<&str>, epsilon: Option<f64>) -> Result<RunReport> {
    if let Some(e) = epsilon {
        check_epsilon(e)?;
    }
    let exp = cfg.experiment()?;
    let policy = match policy {
        Some(p) => PolicyKind::parse(p, &exp.catalog, epsilon.unwrap_or(cfg.epsilon))?,
        None => match (cfg.policy(&exp.catalog)?, epsilon) {
            (PolicyKind::EcoMls { .. }, Some(epsilon)) => PolicyKind::EcoMls { epsilon },
            (p, _) => p,
        },
    };
    let out = exp.run(policy)?;
    write_run_artifacts(&cfg.out_dir, &out)
}

/// One artifact set per epsilon plus a combined `sweep_summary.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig, epsilons: &[f64]) -> Result<Vec<RunReport>> {
    if epsilons.is_empty() {
        return Err(Error::Validation("`epsilons`: at least one value is required".into()));
    }
    for &e in epsilons {
        check_epsilon(e)?;
    }
    let exp = cfg.experiment()?;
    let policies: Vec<_> = epsilons.iter().map(|&epsilon| PolicyKind::EcoMls { epsilon }).collect();
    let outcomes = exp.run_all(&policies)?;
    let reports = outcomes
        .iter()
        .map(|o| write_run_artifacts(&cfg.out_dir, o))
        .collect::<Result<Vec<_>>>()?;
    write_summary_csv(&cfg.out_dir.join("sweep_summary.csv"), &reports)?;
    Ok(reports)
}

pub fn cmd_compare(cfg: &ExperimentConfig, epsilons: &[f64]) -> Result<Vec<RunReport>> {
    for &e in epsilons {
        check_epsilon(e)?;
    }
    let exp = cfg.experiment()?;
    let outcomes = exp.run_all(&comparison_policies(&exp.catalog, epsilons))?;
    write_comparison(&cfg.out_dir, &outcomes)
}

fn print_reports(reports: &[RunReport]) {
    println!(
        "{:<16} {:>8} {:>9} {:>9} {:>9} {:>9}",
        "approach", "c_avg", "e_avg", "e_mapek", "e_total", "switches"
    );
    for r in reports {
        println!(
            "{:<16} {:>8.4} {:>9.4} {:>9.4} {:>9.4} {:>9}",
            r.approach, r.c_avg, r.e_avg, r.e_mapek, r.e_total, r.switches
        );
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Learn => {
            for p in cmd_learn(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Run { policy, epsilon } => {
            print_reports(&[cmd_run(&cfg, policy.as_deref(), *epsilon)?]);
        }
        Command::Sweep { epsilons } => print_reports(&cmd_sweep(&cfg, epsilons)?),
        Command::Compare { epsilons } => print_reports(&cmd_compare(&cfg, epsilons)?),
    }
    Ok(())
}
