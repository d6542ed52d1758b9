//! Actor-critic training over the product of a continuous environment with
//! machines, with counterfactual experiences injected into the replay
//! buffer.

use ndarray::{s, Array2};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::mlp::{mse_gradients, Mlp, OutputActivation};
use super::replay::ReplayBuffer;
use crate::envs::ContinuousEnv;
use crate::error::{Error, Result};
use crate::prm::HybridState;
use crate::product::Product;
use crate::tabular::{update_reward, MetricPoint, Potentials, RewardWindow};
use crate::{seeded_rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DdpgParams {
    pub lambda: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Rate of the soft target update `θ′ ← θ′ + ι(θ − θ′)`.
    pub target_rate: f64,
    /// Gradient steps between target updates.
    pub target_every: u64,
    pub hidden: Vec<usize>,
    /// Exploration noise standard deviation as a fraction of each action
    /// half-width.
    pub noise_sigma: f64,
    /// Initial steps that act uniformly at random over the action box.
    pub warmup_steps: u64,
    /// Replay capacity per unit of `h`.
    pub buffer_base: usize,
    /// Mini-batch size per unit of `h`.
    pub batch_base: usize,
    pub batch_cap: usize,
    pub use_prme: bool,
    pub use_shaping: bool,
    pub counterfactual_cap: Option<usize>,
    pub max_training_steps: u64,
    pub episode_step_cap: u64,
    pub metric_window: usize,
    pub metric_every: u64,
}

impl Default for DdpgParams {
    fn default() -> Self {
        Self {
            lambda: 0.99,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            target_rate: 1e-4,
            target_every: 300,
            hidden: vec![64, 64],
            noise_sigma: 0.1,
            warmup_steps: 0,
            buffer_base: 50_000,
            batch_base: 128,
            batch_cap: 1024,
            use_prme: false,
            use_shaping: false,
            counterfactual_cap: None,
            max_training_steps: 20_000,
            episode_step_cap: 1000,
            metric_window: 100,
            metric_every: 100,
        }
    }
}

impl DdpgParams {
    pub fn check(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda < 1.0) {
            return Err(Error::Config(format!("lambda must lie in [0, 1), got {}", self.lambda)));
        }
        for (name, v) in [("actor_lr", self.actor_lr), ("critic_lr", self.critic_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.target_rate) {
            return Err(Error::Config(format!("target_rate must lie in [0, 1], got {}", self.target_rate)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be a nonnegative number".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if self.target_every == 0
            || self.buffer_base == 0
            || self.batch_base == 0
            || self.batch_cap == 0
            || self.episode_step_cap == 0
            || self.metric_window == 0
            || self.metric_every == 0
        {
            return Err(Error::Config("sizes, cadences and caps must be positive".into()));
        }
        if self.counterfactual_cap == Some(0) {
            return Err(Error::Config("counterfactual_cap must be at least 1".into()));
        }
        Ok(())
    }

    /// `h`: the number of non-terminal joint machine cells with pRME on,
    /// otherwise 1.
    pub fn multiplier<E: ContinuousEnv>(&self, product: &Product<E>) -> usize {
        if self.use_prme {
            product.joint_nonterminal_count().max(1)
        } else {
            1
        }
    }

    pub fn batch_size(&self, h: usize) -> usize {
        self.batch_base.saturating_mul(h).min(self.batch_cap)
    }

    pub fn buffer_capacity(&self, h: usize) -> usize {
        self.buffer_base.saturating_mul(h)
    }
}

/// Network input encoding of `(x, ρ̃)`: the environment state scaled to
/// `[0, 1]` by its nominal box, then per machine a one-hot mode followed
/// by `ψ` scaled to `[0, 1]` by the variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    state_box: Vec<(f64, f64)>,
    machines: Vec<(usize, Vec<(f64, f64)>)>,
    action_box: Vec<(f64, f64)>,
}

impl FeatureMap {
    pub fn new<E: ContinuousEnv>(product: &Product<E>) -> Self {
        Self {
            state_box: product.env.state_box(),
            machines: product
                .machines
                .iter()
                .map(|m| {
                    let prm = m.prm();
                    (prm.modes.len(), prm.vars.iter().map(|v| (v.lo, v.hi)).collect())
                })
                .collect(),
            action_box: product.env.action_box(),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.state_box.len() + self.machines.iter().map(|(n, v)| n + v.len()).sum::<usize>()
    }

    pub fn action_dim(&self) -> usize {
        self.action_box.len()
    }

    pub fn action_box(&self) -> &[(f64, f64)] {
        &self.action_box
    }

    pub fn encode(&self, x: &[f64], rho: &[HybridState]) -> Vec<f64> {
        let mut f = Vec::with_capacity(self.state_dim());
        f.extend(x.iter().zip(&self.state_box).map(|(&v, &b)| unit(v, b)));
        for ((n_modes, bounds), s) in self.machines.iter().zip(rho) {
            f.extend((0..*n_modes).map(|m| if m == s.mode { 1.0 } else { 0.0 }));
            f.extend(s.psi.iter().zip(bounds).map(|(&v, &b)| unit(v, b)));
        }
        f
    }

    /// Action rescaled from its box to `[−1, 1]`.
    pub fn encode_action(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.action_box).map(|(&v, &b)| 2.0 * unit(v, b) - 1.0).collect()
    }
}

fn unit(v: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        (v - lo) / (hi - lo)
    } else {
        0.0
    }
}

/// Replay entry with network inputs precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Action in `[−1, 1]` coordinates.
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub done: bool,
}

/// `y = r̂` for terminal experiences, else `r̂ + λ q′(x′, ρ̂′, μ′(x′, ρ̂′))`.
pub fn critic_target(t: &Transition, target_actor: &Mlp, target_critic: &Mlp, features: &FeatureMap, lambda: f64) -> Result<f64> {
    if t.done {
        return Ok(t.reward);
    }
    let a = target_actor.forward(&t.next_state)?;
    let mut input = t.next_state.clone();
    input.extend(features.encode_action(&a));
    Ok(t.reward + lambda * target_critic.forward(&input)?[0])
}

#[derive(Debug, Clone)]
pub struct DdpgRun {
    pub actor: Mlp,
    pub critic: Mlp,
    pub features: FeatureMap,
    pub metrics: Vec<MetricPoint>,
    pub episodes: u64,
    /// Replay inserts per environment step.
    pub inserts_per_step: Vec<usize>,
}

pub struct DdpgNets {
    pub actor: Mlp,
    pub critic: Mlp,
    pub target_actor: Mlp,
    pub target_critic: Mlp,
}

impl DdpgNets {
    pub fn new(features: &FeatureMap, hidden: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut a_sizes = vec![features.state_dim()];
        a_sizes.extend(hidden);
        a_sizes.push(features.action_dim());
        let mut c_sizes = vec![features.state_dim() + features.action_dim()];
        c_sizes.extend(hidden);
        c_sizes.push(1);
        let actor = Mlp::new(&a_sizes, OutputActivation::Squash(features.action_box.clone()), rng)?;
        let critic = Mlp::new(&c_sizes, OutputActivation::Identity, rng)?;
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        })
    }
}

fn rows(batch: &[&Transition], f: impl Fn(&Transition) -> &[f64]) -> Array2<f64> {
    let cols = f(batch[0]).len();
    let mut m = Array2::zeros((batch.len(), cols));
    for (i, t) in batch.iter().enumerate() {
        for (j, &v) in f(t).iter().enumerate() {
            m[[i, j]] = v;
        }
    }
    m
}

fn concat(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut m = Array2::zeros((a.nrows(), a.ncols() + b.ncols()));
    m.slice_mut(s![.., ..a.ncols()]).assign(a);
    m.slice_mut(s![.., a.ncols()..]).assign(b);
    m
}

fn normalize_actions(a: &Array2<f64>, features: &FeatureMap) -> Array2<f64> {
    let mut out = a.clone();
    for (j, &(lo, hi)) in features.action_box.iter().enumerate() {
        out.column_mut(j).mapv_inplace(|v| 2.0 * unit(v, (lo, hi)) - 1.0);
    }
    out
}

/// One critic step and one actor step on a sampled mini-batch.
pub fn train_step(nets: &mut DdpgNets, opt: &mut (Adam, Adam), batch: &[&Transition], features: &FeatureMap, lambda: f64) -> Result<f64> {
    let s = rows(batch, |t| &t.state);
    let u = rows(batch, |t| &t.action);
    let s2 = rows(batch, |t| &t.next_state);
    let a2 = nets.target_actor.forward_batch(s2.view())?;
    let q2 = nets.target_critic.forward_batch(concat(&s2, &normalize_actions(&a2, features)).view())?;
    let y: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| if t.done { t.reward } else { t.reward + lambda * q2[[i, 0]] })
        .collect();
    let (loss, g) = mse_gradients(&nets.critic, concat(&s, &u), &y)?;
    opt.1.step(&mut nets.critic, &g);

    // Ascend (1/N) Σ q(x, ρ̂, μ(x, ρ̂)) by descending its negation.
    let n = batch.len() as f64;
    let actor_trace = nets.actor.forward_trace(s.clone())?;
    let a = &actor_trace.output;
    let critic_trace = nets.critic.forward_trace(concat(&s, &normalize_actions(a, features)))?;
    let grad_q = Array2::from_elem((batch.len(), 1), -1.0 / n);
    let (_, grad_in) = nets.critic.backward(&critic_trace, grad_q.view());
    let sd = features.state_dim();
    let mut grad_a = grad_in.slice(s![.., sd..]).to_owned();
    for (j, &(lo, hi)) in features.action_box.iter().enumerate() {
        grad_a.column_mut(j).mapv_inplace(|g| g * 2.0 / (hi - lo));
    }
    let (ga, _) = nets.actor.backward(&actor_trace, grad_a.view());
    opt.0.step(&mut nets.actor, &ga);
    Ok(loss)
}

/// Gaussian exploration around `mean`, clipped to the action box.
fn explore(mean: &[f64], features: &FeatureMap, sigma: f64, rng: &mut Rng) -> Vec<f64> {
    mean.iter()
        .zip(&features.action_box)
        .map(|(&m, &(lo, hi))| {
            let sd = sigma * (hi - lo) / 2.0;
            let noise = if sd > 0.0 {
                Normal::new(0.0, sd).map(|d| d.sample(rng)).unwrap_or(0.0)
            } else {
                0.0
            };
            (m + noise).clamp(lo, hi)
        })
        .collect()
}

/// Trains an actor and critic for `params.max_training_steps` steps.
pub fn ddpg_train<E: ContinuousEnv>(
    product: &Product<E>,
    potentials: Option<&Potentials>,
    params: &DdpgParams,
    seed: u64,
) -> Result<DdpgRun> {
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
    let features = FeatureMap::new(product);
    let mut nets = DdpgNets::new(&features, &params.hidden, &mut rng)?;
    let mut opt = (Adam::new(&nets.actor, params.actor_lr), Adam::new(&nets.critic, params.critic_lr));
    let h = params.multiplier(product);
    let batch_size = params.batch_size(h);
    let mut buffer = ReplayBuffer::new(params.buffer_capacity(h))?;
    let cap = params.counterfactual_cap.unwrap_or_else(|| product.default_cap());
    let mut window = RewardWindow::new(params.metric_window, params.metric_every);
    let mut inserts_per_step = Vec::with_capacity(params.max_training_steps as usize);
    let mut steps = 0u64;
    let mut episodes = 0u64;

    while steps < params.max_training_steps {
        let mut state = product.initial_state();
        episodes += 1;
        let mut ep_steps = 0;
        while ep_steps < params.episode_step_cap && steps < params.max_training_steps {
            let input = features.encode(&state.env, &state.machines);
            let u = if steps < params.warmup_steps {
                features.action_box.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
            } else {
                let mean = nets.actor.forward(&input)?;
                explore(&mean, &features, params.noise_sigma, &mut rng)
            };
            let outcome = product.step(&state, &u, &mut rng)?;
            let experiences = if params.use_prme {
                product.counterfactuals(&state.env, &state.machines, &u, &outcome.next.env, cap, &mut rng)?
            } else {
                vec![crate::product::Experience {
                    x: state.env.clone(),
                    rho: state.machines.clone(),
                    u: u.clone(),
                    r: outcome.reward,
                    rewards: outcome.rewards.clone(),
                    x_next: outcome.next.env.clone(),
                    rho_next: outcome.next.machines.clone(),
                    done: outcome.done,
                }]
            };
            inserts_per_step.push(experiences.len());
            let action = features.encode_action(&u);
            for e in &experiences {
                buffer.push(Transition {
                    state: features.encode(&e.x, &e.rho),
                    action: action.clone(),
                    reward: update_reward(e, potentials, params.lambda)?,
                    next_state: features.encode(&e.x_next, &e.rho_next),
                    done: e.done,
                });
            }
            let batch = buffer.sample(batch_size, &mut rng)?;
            train_step(&mut nets, &mut opt, &batch, &features, params.lambda)?;
            steps += 1;
            ep_steps += 1;
            if steps % params.target_every == 0 {
                nets.target_actor.soft_update(&nets.actor, params.target_rate);
                nets.target_critic.soft_update(&nets.critic, params.target_rate);
            }
            window.push(outcome.reward);
            let done = outcome.done;
            state = outcome.next;
            if done {
                break;
            }
        }
    }
    Ok(DdpgRun {
        actor: nets.actor,
        critic: nets.critic,
        features,
        metrics: window.points,
        episodes,
        inserts_per_step,
    })
}

/// Mean reward per step of `policy` over `episodes` runs of at most
/// `horizon` steps; episodes that end early contribute their own length.
pub fn average_reward<E: ContinuousEnv>(
    product: &Product<E>,
    policy: &mut dyn FnMut(&[f64], &[HybridState], &mut Rng) -> Result<Vec<f64>>,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = seeded_rng(seed);
    let (mut total, mut steps) = (0.0, 0usize);
    for _ in 0..episodes {
        let mut state = product.initial_state();
        for _ in 0..horizon {
            let u = policy(&state.env, &state.machines, &mut rng)?;
            let o = product.step(&state, &u, &mut rng)?;
            total += o.reward;
            steps += 1;
            state = o.next;
            if o.done {
                break;
            }
        }
    }
    Ok(if steps > 0 { total / steps as f64 } else { 0.0 })
}

/// Average reward of the noise-free actor.
pub fn greedy_average_reward<E: ContinuousEnv>(
    product: &Product<E>,
    run: &DdpgRun,
    episodes: usize,
    horizon: usize,
    seed: u64,
) -> Result<f64> {
    average_reward(
        product,
        &mut |x, rho, _| run.actor.forward(&run.features.encode(x, rho)),
        episodes,
        horizon,
        seed,
    )
}

/// Average reward of actions drawn uniformly from the action box.
pub fn random_average_reward<E: ContinuousEnv>(product: &Product<E>, episodes: usize, horizon: usize, seed: u64) -> Result<f64> {
    let bounds = product.env.action_box();
    average_reward(
        product,
        &mut |_, _, rng| Ok(bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()),
        episodes,
        horizon,
        seed,
    )
}
