//! Seeded trials on a worker pool, percentile aggregation and run
//! artifacts.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{EnvName, ExperimentConfig};
use super::oracle::{ProductMdp, TIE_TOL};
use super::stats::{aggregate, AggregateRow, PERCENTILE_METHOD};
use super::svg::curve_svg;
use crate::deep::ddpg_train;
use crate::envs::{ContinuousEnv, FiveRoad, FiveRoom, NoiseSpec, Office, TabularEnv, Toy1d, TwoTank};
use crate::error::{Error, Result};
use crate::product::Product;
use crate::shaping::PotentialTable;
use crate::tabular::{train_tabular, MetricPoint, QTable};

/// Convergence threshold of the product value iteration.
pub const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    #[serde(skip)]
    pub metrics: Vec<MetricPoint>,
    pub runtime_secs: f64,
    pub error: Option<String>,
}

impl TrialResult {
    pub fn completed(&self) -> bool {
        self.error.is_none()
    }
}

/// Exact optimum of the enumerated office product.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub states: usize,
    /// `V*` at the initial product state.
    pub value: f64,
    /// Reward per step of the optimal policy restarted after each episode.
    pub reward_rate: f64,
    #[serde(skip)]
    pub mdp: ProductMdp,
    #[serde(skip)]
    pub v: Vec<f64>,
    #[serde(skip)]
    pub greedy: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialResult>,
    pub aggregate: Vec<AggregateRow>,
    pub warnings: Vec<String>,
    pub oracle: Option<OracleReport>,
    /// Final table of trial 0 for tabular algorithms.
    pub qtable: Option<QTable>,
}

pub fn office_env(cfg: &ExperimentConfig) -> Result<Office> {
    match &cfg.env.map {
        Some(p) => Office::parse(&fs::read_to_string(p)?),
        None => Ok(Office::default_map()),
    }
}

fn noise(cfg: &ExperimentConfig, default: NoiseSpec) -> NoiseSpec {
    if cfg.env.noise {
        default
    } else {
        NoiseSpec::off()
    }
}

/// Builds the office product of a config.
pub fn office_product(cfg: &ExperimentConfig) -> Result<Product<Office>> {
    let env = office_env(cfg)?;
    let machines = cfg.load_machines(crate::envs::Env::props(&env))?;
    Product::new(env, machines)
}

/// Exact value iteration on the office product of `cfg`.
pub fn oracle_product_vi(cfg: &ExperimentConfig) -> Result<OracleReport> {
    if cfg.env.name != EnvName::Office {
        return Err(Error::Config("the oracle needs the enumerable office environment".into()));
    }
    let product = office_product(cfg)?;
    let lambda = cfg.tabular.lambda;
    let mdp = ProductMdp::build(&product, None, lambda, cfg.oracle_state_limit)?;
    let sol = mdp.solve(lambda, ORACLE_TOL)?;
    let greedy = mdp.greedy_policy(&sol, TIE_TOL);
    let reward_rate = mdp.reward_rate(&greedy, cfg.tabular.episode_step_cap as usize)?;
    Ok(OracleReport {
        states: mdp.len(),
        value: sol.v[mdp.start()],
        reward_rate,
        v: sol.v,
        greedy,
        mdp,
    })
}

/// CSV with columns `state,cell,machine,value,greedy_actions`; actions are
/// `;`-separated and empty at terminal states.
pub fn write_oracle_csv<W: Write>(report: &OracleReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "cell", "machine", "value", "greedy_actions"])?;
    let n_machine = report.mdp.n_machine();
    for (s, acts) in report.greedy.iter().enumerate() {
        let acts: Vec<String> = acts.iter().map(usize::to_string).collect();
        w.write_record([
            s.to_string(),
            (s / n_machine).to_string(),
            (s % n_machine).to_string(),
            report.v[s].to_string(),
            acts.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct TrialOutput {
    metrics: Vec<MetricPoint>,
    qtable: Option<QTable>,
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

fn run_trials(cfg: &ExperimentConfig, jobs: usize, trial: &(dyn Fn(u64, bool) -> Result<TrialOutput> + Sync)) -> Result<(Vec<TrialResult>, Option<QTable>)> {
    let outputs: Vec<(TrialResult, Option<QTable>)> = pool(jobs)?.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.base_seed.wrapping_add(i as u64);
                let start = Instant::now();
                let out = trial(seed, i == 0);
                let runtime_secs = start.elapsed().as_secs_f64();
                match out {
                    Ok(o) => (
                        TrialResult {
                            trial: i,
                            seed,
                            metrics: o.metrics,
                            runtime_secs,
                            error: None,
                        },
                        o.qtable,
                    ),
                    Err(e) => (
                        TrialResult {
                            trial: i,
                            seed,
                            metrics: Vec::new(),
                            runtime_secs,
                            error: Some(e.to_string()),
                        },
                        None,
                    ),
                }
            })
            .collect()
    });
    let mut qtable = None;
    let mut trials = Vec::with_capacity(outputs.len());
    for (t, q) in outputs {
        if q.is_some() {
            qtable = q;
        }
        trials.push(t);
    }
    Ok((trials, qtable))
}

fn tabular_trials<E: TabularEnv>(cfg: &ExperimentConfig, env: E, jobs: usize) -> Result<(Vec<TrialResult>, Option<QTable>)> {
    let machines = cfg.load_machines(env.props())?;
    let potentials = cfg.potentials(&machines)?;
    let product = Product::new(env, machines)?;
    run_trials(cfg, jobs, &|seed, keep| {
        let run = train_tabular(&product, potentials.as_deref(), &cfg.tabular, seed, &mut |_, _| {})?;
        Ok(TrialOutput {
            metrics: run.metrics,
            qtable: keep.then_some(run.q),
        })
    })
}

fn deep_trials<E: ContinuousEnv>(cfg: &ExperimentConfig, env: E, jobs: usize) -> Result<(Vec<TrialResult>, Option<QTable>)> {
    let machines = cfg.load_machines(env.props())?;
    let potentials: Option<Vec<PotentialTable>> = cfg.potentials(&machines)?;
    let product = Product::new(env, machines)?;
    run_trials(cfg, jobs, &|seed, _| {
        let run = ddpg_train(&product, potentials.as_deref(), &cfg.ddpg, seed)?;
        Ok(TrialOutput {
            metrics: run.metrics,
            qtable: None,
        })
    })
}

/// Runs every trial of a validated config without touching the disk.
pub fn execute(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutput> {
    cfg.validate()?;
    let tabular = cfg.algorithm.is_tabular();
    let (trials, qtable) = match cfg.env.name {
        EnvName::Office => tabular_trials(cfg, office_env(cfg)?, jobs)?,
        EnvName::TwoTank => {
            let mut env = TwoTank::default();
            env.noise = noise(cfg, env.noise);
            if tabular {
                tabular_trials(cfg, env, jobs)?
            } else {
                deep_trials(cfg, env, jobs)?
            }
        }
        EnvName::FiveRoom => {
            let mut env = FiveRoom::default();
            env.noise = noise(cfg, env.noise);
            deep_trials(cfg, env, jobs)?
        }
        EnvName::FiveRoad => {
            let mut env = FiveRoad::default();
            env.noise = noise(cfg, env.noise);
            deep_trials(cfg, env, jobs)?
        }
        EnvName::Toy1d => {
            let mut env = Toy1d::default();
            env.noise = noise(cfg, env.noise);
            deep_trials(cfg, env, jobs)?
        }
    };

    let mut warnings = Vec::new();
    let failed: Vec<&TrialResult> = trials.iter().filter(|t| !t.completed()).collect();
    if failed.len() == trials.len() {
        let first = failed.first().and_then(|t| t.error.clone()).unwrap_or_default();
        return Err(Error::Numeric(format!("all {} trials failed; first error: {first}", trials.len())));
    }
    for t in &failed {
        warnings.push(format!(
            "trial {} (seed {}) failed and is excluded from aggregation: {}",
            t.trial,
            t.seed,
            t.error.as_deref().unwrap_or("")
        ));
    }
    let series: Vec<Vec<MetricPoint>> = trials.iter().filter(|t| t.completed()).map(|t| t.metrics.clone()).collect();
    let aggregate = aggregate(&series);
    if series.iter().any(|s| s.len() != aggregate.len()) {
        warnings.push(format!("trials differ in length; aggregated over the first {} checkpoints", aggregate.len()));
    }

    let oracle = if cfg.env.name == EnvName::Office {
        match oracle_product_vi(cfg) {
            Ok(r) => Some(r),
            Err(e) => {
                warnings.push(format!("oracle skipped: {e}"));
                None
            }
        }
    } else {
        None
    };
    Ok(RunOutput {
        config: cfg.clone(),
        trials,
        aggregate,
        warnings,
        oracle,
        qtable,
    })
}

/// `step,trial,avg_reward` rows for every completed trial.
pub fn write_metrics_csv<W: Write>(trials: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "trial", "avg_reward"])?;
    for t in trials.iter().filter(|t| t.completed()) {
        for p in &t.metrics {
            w.serialize((p.step, t.trial, p.avg_reward))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(rows: &[AggregateRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `metrics.csv` back into per-trial series ordered by trial.
pub fn read_metrics_csv<R: std::io::Read>(input: R) -> Result<Vec<Vec<MetricPoint>>> {
    let mut by_trial: std::collections::BTreeMap<usize, Vec<MetricPoint>> = Default::default();
    for rec in csv::Reader::from_reader(input).deserialize() {
        let (step, trial, avg_reward): (u64, usize, f64) = rec?;
        by_trial.entry(trial).or_default().push(MetricPoint { step, avg_reward });
    }
    Ok(by_trial.into_values().collect())
}

/// Run metadata: the resolved config and everything needed to read the
/// other artifacts.
pub fn metadata(run: &RunOutput) -> serde_json::Value {
    let (window, every) = if run.config.algorithm.is_tabular() {
        (run.config.tabular.metric_window, run.config.tabular.metric_every)
    } else {
        (run.config.ddpg.metric_window, run.config.ddpg.metric_every)
    };
    serde_json::json!({
        "config": run.config,
        "percentile_method": PERCENTILE_METHOD,
        "metric": "mean environment-step reward over a sliding window",
        "metric_window": window,
        "metric_every": every,
        "completed_trials": run.trials.iter().filter(|t| t.completed()).count(),
        "trials": run.trials,
        "warnings": run.warnings,
        "oracle": run.oracle,
        "version": env!("CARGO_PKG_VERSION"),
    })
}

/// Writes `metrics.csv`, `aggregate.csv`, `curve.svg`, `run.json` and,
/// for tabular runs, `qtable.csv` into `dir`.
pub fn write_artifacts(run: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_metrics_csv(&run.trials, fs::File::create(dir.join("metrics.csv"))?)?;
    write_aggregate_csv(&run.aggregate, fs::File::create(dir.join("aggregate.csv"))?)?;
    let title = format!(
        "{} on {:?}: median and 25th to 75th percentile",
        run.config.algorithm.name(),
        run.config.env.name
    );
    let reference = run.oracle.as_ref().map(|o| o.reward_rate);
    fs::write(dir.join("curve.svg"), curve_svg(&run.aggregate, &title, reference))?;
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&metadata(run))? + "\n")?;
    if let Some(q) = &run.qtable {
        q.write_csv(fs::File::create(dir.join("qtable.csv"))?)?;
    }
    Ok(())
}

/// Runs a config and writes its artifacts to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<RunOutput> {
    let run = execute(cfg, jobs)?;
    write_artifacts(&run, &cfg.output_dir)?;
    Ok(run)
}
