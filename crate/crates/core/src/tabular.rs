//! Q-learning over the product of a finite environment with discretized
//! machines, optionally replaying counterfactual experiences and shaping
//! rewards with machine potentials.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::envs::TabularEnv;
use crate::error::{Error, Result};
use crate::product::{Experience, Product, ProductState};
use crate::shaping::{shaped_reward, PotentialTable};
use crate::{seeded_rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TabularParams {
    pub lambda: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub optimistic_init: f64,
    pub max_training_steps: u64,
    pub episode_step_cap: u64,
    pub use_prme: bool,
    pub use_shaping: bool,
    /// `None` selects the product's default cap.
    pub counterfactual_cap: Option<usize>,
    /// Width of the sliding reward window.
    pub metric_window: usize,
    /// Training steps between metric samples.
    pub metric_every: u64,
}

impl Default for TabularParams {
    fn default() -> Self {
        Self {
            lambda: 0.9,
            kappa: 0.5,
            epsilon: 0.1,
            optimistic_init: 2.0,
            max_training_steps: 50_000,
            episode_step_cap: 1000,
            use_prme: false,
            use_shaping: false,
            counterfactual_cap: None,
            metric_window: 100,
            metric_every: 100,
        }
    }
}

impl TabularParams {
    pub fn check(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("kappa", self.kappa)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon must lie in [0, 1], got {}", self.epsilon)));
        }
        if !self.optimistic_init.is_finite() {
            return Err(Error::Config("optimistic_init must be finite".into()));
        }
        if self.episode_step_cap == 0 || self.metric_window == 0 || self.metric_every == 0 {
            return Err(Error::Config("episode cap, metric window and cadence must be positive".into()));
        }
        if self.counterfactual_cap == Some(0) {
            return Err(Error::Config("counterfactual_cap must be at least 1".into()));
        }
        Ok(())
    }
}

/// `q(x, ρ̃, u)` over environment cells, joint machine cells and actions.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_cells: usize,
    n_machine: usize,
    n_actions: usize,
    values: Vec<f64>,
    visits: Vec<u32>,
}

impl QTable {
    pub fn new(n_cells: usize, n_machine: usize, n_actions: usize, init: f64) -> Self {
        let n = n_cells * n_machine * n_actions;
        Self {
            n_cells,
            n_machine,
            n_actions,
            values: vec![init; n],
            visits: vec![0; n],
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_machine(&self) -> usize {
        self.n_machine
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn offset(&self, cell: usize, machine: usize) -> usize {
        (cell * self.n_machine + machine) * self.n_actions
    }

    pub fn row(&self, cell: usize, machine: usize) -> &[f64] {
        let o = self.offset(cell, machine);
        &self.values[o..o + self.n_actions]
    }

    pub fn get(&self, cell: usize, machine: usize, action: usize) -> f64 {
        self.values[self.offset(cell, machine) + action]
    }

    pub fn visits(&self, cell: usize, machine: usize, action: usize) -> u32 {
        self.visits[self.offset(cell, machine) + action]
    }

    pub fn max(&self, cell: usize, machine: usize) -> f64 {
        self.row(cell, machine).iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Actions within `tol` of the row maximum.
    pub fn greedy_set(&self, cell: usize, machine: usize, tol: f64) -> Vec<usize> {
        argmax_set(self.row(cell, machine), tol)
    }

    /// One Bellman update; `next` is `None` for terminal successors.
    pub fn update(
        &mut self,
        cell: usize,
        machine: usize,
        action: usize,
        r: f64,
        next: Option<(usize, usize)>,
        lambda: f64,
        kappa: f64,
    ) {
        let max_next = next.map(|(c, m)| self.max(c, m));
        let i = self.offset(cell, machine) + action;
        self.values[i] = q_update(self.values[i], r, max_next, lambda, kappa);
        self.visits[i] = self.visits[i].saturating_add(1);
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Table with the given entries in `(cell, machine, action)` order and
    /// no recorded visits.
    pub fn from_values(n_cells: usize, n_machine: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_cells * n_machine * n_actions {
            return Err(Error::Config(format!(
                "expected {} q-values, got {}",
                n_cells * n_machine * n_actions,
                values.len()
            )));
        }
        Ok(Self {
            n_cells,
            n_machine,
            n_actions,
            visits: vec![0; values.len()],
            values,
        })
    }

    /// CSV with columns `cell,machine,action,value`, one row per entry.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["cell", "machine", "action", "value"])?;
        for c in 0..self.n_cells {
            for m in 0..self.n_machine {
                for a in 0..self.n_actions {
                    w.serialize((c, m, a, self.get(c, m, a)))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format of [`QTable::write_csv`].
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rows: Vec<(usize, usize, usize, f64)> = Vec::new();
        for rec in csv::Reader::from_reader(input).deserialize() {
            rows.push(rec?);
        }
        let dims = rows.iter().fold((0, 0, 0), |(c, m, a), r| (c.max(r.0 + 1), m.max(r.1 + 1), a.max(r.2 + 1)));
        let mut q = Self::new(dims.0, dims.1, dims.2, f64::NAN);
        for &(c, m, a, v) in &rows {
            let i = q.offset(c, m) + a;
            q.values[i] = v;
        }
        if rows.len() != q.values.len() || q.values.iter().any(|v| v.is_nan()) {
            return Err(Error::Config("q-table csv does not cover every entry exactly once".into()));
        }
        Ok(q)
    }
}

/// `q + κ(r + λ·max_next − q)`, or `q + κ(r − q)` without a successor.
pub fn q_update(q: f64, r: f64, max_next: Option<f64>, lambda: f64, kappa: f64) -> f64 {
    let target = r + max_next.map_or(0.0, |m| lambda * m);
    q + kappa * (target - q)
}

pub fn argmax_set(values: &[f64], tol: f64) -> Vec<usize> {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&i| values[i] >= best - tol).collect()
}

/// With probability `ε` a uniform action, otherwise a uniformly chosen
/// maximizer of `values`.
pub fn epsilon_greedy(values: &[f64], epsilon: f64, rng: &mut Rng) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Config("empty action set".into()));
    }
    if rng.random::<f64>() < epsilon {
        return Ok(rng.random_range(0..values.len()));
    }
    let best = argmax_set(values, 0.0);
    Ok(if best.len() == 1 {
        best[0]
    } else {
        best[rng.random_range(0..best.len())]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPoint {
    pub step: u64,
    pub avg_reward: f64,
}

/// Mean of the last `window` rewards, sampled every `every` steps.
#[derive(Debug, Clone)]
pub struct RewardWindow {
    window: Vec<f64>,
    next: usize,
    filled: usize,
    sum_steps: u64,
    every: u64,
    pub points: Vec<MetricPoint>,
}

impl RewardWindow {
    pub fn new(window: usize, every: u64) -> Self {
        Self {
            window: vec![0.0; window],
            next: 0,
            filled: 0,
            sum_steps: 0,
            every,
            points: Vec::new(),
        }
    }

    pub fn push(&mut self, r: f64) {
        self.window[self.next] = r;
        self.next = (self.next + 1) % self.window.len();
        self.filled = (self.filled + 1).min(self.window.len());
        self.sum_steps += 1;
        if self.sum_steps % self.every == 0 {
            let avg = self.window.iter().sum::<f64>() / self.filled as f64;
            self.points.push(MetricPoint {
                step: self.sum_steps,
                avg_reward: avg,
            });
        }
    }
}

/// Result of one tabular training run.
#[derive(Debug, Clone)]
pub struct TabularRun {
    pub q: QTable,
    pub metrics: Vec<MetricPoint>,
    pub episodes: u64,
    pub updates: u64,
}

/// Potentials used for shaping, one per attached machine.
pub type Potentials = [PotentialTable];

/// Product-level indices of a state: `(environment cell, joint machine cell)`.
pub fn product_index<E: TabularEnv>(product: &Product<E>, env: &E::State, machines: &[crate::prm::HybridState]) -> Result<(usize, usize)> {
    Ok((product.env.cell(env), product.joint_index(machines)?))
}

/// Reward fed to the update: the mean of the per-machine rewards, each
/// shaped by its machine's potential when `potentials` is given.
pub fn update_reward<S, A>(e: &Experience<S, A>, potentials: Option<&Potentials>, lambda: f64) -> Result<f64> {
    match potentials {
        None => Ok(e.r),
        Some(p) => {
            let mut sum = 0.0;
            for i in 0..e.rewards.len() {
                sum += shaped_reward(e.rewards[i], &e.rho[i], &e.rho_next[i], &p[i], lambda)?;
            }
            Ok(sum / e.rewards.len() as f64)
        }
    }
}

/// Runs Q-learning for `params.max_training_steps` environment steps.
///
/// `on_checkpoint` is called after every `params.metric_every` steps with
/// the step count and the current table.
pub fn train_tabular<E: TabularEnv>(
    product: &Product<E>,
    potentials: Option<&Potentials>,
    params: &TabularParams,
    seed: u64,
    on_checkpoint: &mut dyn FnMut(u64, &QTable),
) -> Result<TabularRun> {
    params.check()?;
    let potentials = if params.use_shaping {
        let p = potentials.ok_or_else(|| Error::Config("shaping requested without potentials".into()))?;
        if p.len() != product.machines.len() {
            return Err(Error::Config("one potential table per machine is required".into()));
        }
        Some(p)
    } else {
        None
    };
    let mut rng = seeded_rng(seed);
    let env = &product.env;
    let n_actions = env.num_actions();
    let mut q = QTable::new(env.num_cells(), product.joint_len(), n_actions, params.optimistic_init);
    let mut window = RewardWindow::new(params.metric_window, params.metric_every);
    let cap = params.counterfactual_cap.unwrap_or_else(|| product.default_cap());
    let mut steps = 0u64;
    let mut episodes = 0u64;
    let mut updates = 0u64;

    while steps < params.max_training_steps {
        let mut state: ProductState<E::State> = product.initial_state();
        episodes += 1;
        let mut ep_steps = 0;
        while ep_steps < params.episode_step_cap && steps < params.max_training_steps {
            let (cell, m) = product_index(product, &state.env, &state.machines)?;
            let a = epsilon_greedy(q.row(cell, m), params.epsilon, &mut rng)?;
            let action = env.action(a);
            let outcome = product.step(&state, &action, &mut rng)?;
            let batch = if params.use_prme {
                product.counterfactuals(&state.env, &state.machines, &action, &outcome.next.env, cap, &mut rng)?
            } else {
                vec![Experience {
                    x: state.env.clone(),
                    rho: state.machines.clone(),
                    u: action.clone(),
                    r: outcome.reward,
                    rewards: outcome.rewards.clone(),
                    x_next: outcome.next.env.clone(),
                    rho_next: outcome.next.machines.clone(),
                    done: outcome.done,
                }]
            };
            for e in &batch {
                let r = update_reward(e, potentials, params.lambda)?;
                let (c, mi) = product_index(product, &e.x, &e.rho)?;
                let next = if e.done {
                    None
                } else {
                    Some(product_index(product, &e.x_next, &e.rho_next)?)
                };
                q.update(c, mi, a, r, next, params.lambda, params.kappa);
            }
            updates += batch.len() as u64;
            window.push(outcome.reward);
            steps += 1;
            ep_steps += 1;
            if steps % params.metric_every == 0 {
                on_checkpoint(steps, &q);
            }
            let done = outcome.done;
            state = outcome.next;
            if done {
                break;
            }
        }
    }
    Ok(TabularRun {
        q,
        metrics: window.points,
        episodes,
        updates,
    })
}
