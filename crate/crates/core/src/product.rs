//! Synchronous product of an environment with one or more machines, and
//! counterfactual experience generation.
//!
//! Every attached machine reads the environment label of the successor
//! state through its own label map and steps in lockstep. The product
//! reward is the mean of the machine rewards; an episode ends as soon as
//! any machine is terminal.

use std::sync::Arc;

use rand::seq::index;

use crate::envs::Env;
use crate::error::{Error, Result};
use crate::label::{Label, PropositionSet};
use crate::prm::{DiscreteMachine, HybridState, PrmDefinition};
use crate::Rng;

/// Samples per mode in the default counterfactual cap.
pub const CAP_SAMPLES_PER_MODE: usize = 32;

/// A discretized machine together with the map from its propositions to
/// the environment's.
#[derive(Debug, Clone)]
pub struct AttachedMachine {
    pub machine: Arc<DiscreteMachine>,
    map: Vec<usize>,
}

impl AttachedMachine {
    /// Machine symbols are matched to environment symbols by name, except
    /// where `renames` gives `(machine symbol, environment symbol)` pairs.
    pub fn new(machine: Arc<DiscreteMachine>, env_props: &PropositionSet, renames: &[(String, String)]) -> Result<Self> {
        let props = &machine.prm().props;
        for (from, _) in renames {
            if props.index_of(from).is_none() {
                return Err(Error::Config(format!("label map renames unknown machine symbol `{from}`")));
            }
        }
        let map = props
            .symbols()
            .iter()
            .map(|s| {
                let target = renames.iter().find(|(from, _)| from == s).map_or(s.as_str(), |(_, to)| to.as_str());
                env_props.index_of(target).ok_or_else(|| {
                    Error::Config(format!(
                        "machine symbol `{s}` maps to `{target}`, which the environment does not provide"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { machine, map })
    }

    pub fn prm(&self) -> &PrmDefinition {
        self.machine.prm()
    }

    /// Translates an environment label into this machine's alphabet.
    pub fn translate(&self, env_label: Label) -> Label {
        self.map
            .iter()
            .enumerate()
            .filter(|(_, &j)| env_label.contains(j))
            .fold(Label::EMPTY, |l, (i, _)| l.with(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductState<S> {
    pub env: S,
    pub machines: Vec<HybridState>,
}

/// `(x, ρ̃, u, r, x′, ρ̃′)` with per-machine rewards kept for shaping.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience<S, A> {
    pub x: S,
    pub rho: Vec<HybridState>,
    pub u: A,
    /// Mean of `rewards`.
    pub r: f64,
    pub rewards: Vec<f64>,
    pub x_next: S,
    pub rho_next: Vec<HybridState>,
    /// Some machine in `rho_next` is terminal.
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub next: ProductState<S>,
    pub reward: f64,
    pub rewards: Vec<f64>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Product<E: Env> {
    pub env: E,
    pub machines: Vec<AttachedMachine>,
}

impl<E: Env> Product<E> {
    pub fn new(env: E, machines: Vec<AttachedMachine>) -> Result<Self> {
        if machines.is_empty() {
            return Err(Error::Config("a product needs at least one machine".into()));
        }
        Ok(Self { env, machines })
    }

    /// Attaches a single machine, matching symbols by name.
    pub fn single(env: E, machine: Arc<DiscreteMachine>) -> Result<Self> {
        let m = AttachedMachine::new(machine, env.props(), &[])?;
        Self::new(env, vec![m])
    }

    pub fn initial_state(&self) -> ProductState<E::State> {
        ProductState {
            env: self.env.initial_state(),
            machines: self.machines.iter().map(|m| m.prm().initial_state()).collect(),
        }
    }

    pub fn is_done(&self, machines: &[HybridState]) -> bool {
        self.machines.iter().zip(machines).any(|(m, s)| m.prm().is_terminal(s))
    }

    /// Advances every machine on the label of `x_next`.
    pub fn advance_machines(&self, machines: &[HybridState], x_next: &E::State) -> Result<(Vec<HybridState>, Vec<f64>)> {
        let label = self.env.label(x_next);
        let mut next = Vec::with_capacity(machines.len());
        let mut rewards = Vec::with_capacity(machines.len());
        for (m, s) in self.machines.iter().zip(machines) {
            let (n, r) = m.prm().step(s, m.translate(label))?;
            next.push(n);
            rewards.push(r);
        }
        Ok((next, rewards))
    }

    pub fn step(&self, state: &ProductState<E::State>, action: &E::Action, rng: &mut Rng) -> Result<StepOutcome<E::State>> {
        if state.machines.len() != self.machines.len() {
            return Err(Error::Definition(format!(
                "product state has {} machine states for {} machines",
                state.machines.len(),
                self.machines.len()
            )));
        }
        let x_next = self.env.step(&state.env, action, rng);
        let (machines, rewards) = self.advance_machines(&state.machines, &x_next)?;
        let done = self.is_done(&machines);
        Ok(StepOutcome {
            next: ProductState { env: x_next, machines },
            reward: mean(&rewards),
            rewards,
            done,
        })
    }

    /// Default counterfactual cap: 32 samples per joint mode.
    pub fn default_cap(&self) -> usize {
        self.machines
            .iter()
            .map(|m| m.prm().modes.len())
            .product::<usize>()
            .saturating_mul(CAP_SAMPLES_PER_MODE)
    }

    /// Number of joint discretized machine states, terminal ones included.
    pub fn joint_len(&self) -> usize {
        self.machines.iter().map(|m| m.machine.grid().len()).product()
    }

    /// Mixed-radix index of the joint discretized cell of live states.
    pub fn joint_index(&self, machines: &[HybridState]) -> Result<usize> {
        let mut idx = 0;
        for (m, s) in self.machines.iter().zip(machines) {
            let grid = m.machine.grid();
            idx = idx * grid.len() + grid.index_of(s)?;
        }
        Ok(idx)
    }

    /// Per-machine discretized indices of a joint index.
    pub fn split_joint(&self, mut joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.machines.len()];
        for (i, m) in self.machines.iter().enumerate().rev() {
            let n = m.machine.grid().len();
            out[i] = joint % n;
            joint /= n;
        }
        out
    }

    /// Number of non-terminal joint discretized machine states.
    pub fn joint_nonterminal_count(&self) -> usize {
        self.machines
            .iter()
            .map(|m| m.machine.grid().nonterminal_indices().len())
            .product()
    }

    /// The actual experience followed by counterfactual ones.
    ///
    /// The candidates are every combination of non-terminal discretized
    /// machine states, each carrying the actual step counter; the
    /// combination of cells holding the actual machine states is
    /// represented by the actual experience itself. With more candidates
    /// than `cap`, `cap − 1` of the others are drawn uniformly without
    /// replacement and kept in enumeration order.
    pub fn counterfactuals(
        &self,
        x: &E::State,
        rho: &[HybridState],
        u: &E::Action,
        x_next: &E::State,
        cap: usize,
        rng: &mut Rng,
    ) -> Result<Vec<Experience<E::State, E::Action>>> {
        if cap == 0 {
            return Err(Error::Config("counterfactual cap must be at least 1".into()));
        }
        let label = self.env.label(x_next);
        let labels: Vec<Label> = self.machines.iter().map(|m| m.translate(label)).collect();
        let mut lists = Vec::with_capacity(self.machines.len());
        let mut actual_pos = Some(Vec::with_capacity(self.machines.len()));
        for (m, s) in self.machines.iter().zip(rho) {
            let grid = m.machine.grid();
            let list = grid.nonterminal_indices();
            if list.is_empty() {
                return Err(Error::Config(format!("machine `{}` has no non-terminal states", m.prm().name)));
            }
            let own = if m.prm().is_terminal(s) {
                None
            } else {
                grid.index_of(s).ok().and_then(|i| list.binary_search(&i).ok())
            };
            match (own, actual_pos.as_mut()) {
                (Some(p), Some(pos)) => pos.push(p),
                _ => actual_pos = None,
            }
            lists.push(list);
        }
        let total: usize = lists.iter().map(|l| l.len()).product();
        let actual_index = actual_pos.map(|pos| mixed_radix(&pos, &lists));
        let others = total - actual_index.is_some() as usize;

        let make = |joint: &[HybridState]| -> Result<Experience<E::State, E::Action>> {
            let mut next = Vec::with_capacity(joint.len());
            let mut rewards = Vec::with_capacity(joint.len());
            for ((m, s), l) in self.machines.iter().zip(joint).zip(&labels) {
                let (n, r) = m.prm().step(s, *l)?;
                next.push(n);
                rewards.push(r);
            }
            Ok(Experience {
                x: x.clone(),
                rho: joint.to_vec(),
                u: u.clone(),
                r: mean(&rewards),
                done: self.is_done(&next),
                rewards,
                x_next: x_next.clone(),
                rho_next: next,
            })
        };

        let mut out = Vec::with_capacity(cap.min(others + 1));
        out.push(make(rho)?);
        let chosen: Vec<usize> = if others + 1 <= cap {
            (0..others).collect()
        } else {
            let mut v = index::sample(rng, others, cap - 1).into_vec();
            v.sort_unstable();
            v
        };
        let step = rho.first().map_or(0, |s| s.step);
        let mut joint = Vec::with_capacity(lists.len());
        for k in chosen {
            // Skip over the actual combination in the enumeration.
            let j = match actual_index {
                Some(a) if k >= a => k + 1,
                _ => k,
            };
            joint.clear();
            let mut rest = j;
            let mut digits = vec![0; lists.len()];
            for d in (0..lists.len()).rev() {
                digits[d] = rest % lists[d].len();
                rest /= lists[d].len();
            }
            for ((m, list), digit) in self.machines.iter().zip(&lists).zip(&digits) {
                let mut s = m.machine.grid().state(list[*digit]).clone();
                s.step = step;
                joint.push(s);
            }
            out.push(make(&joint)?);
        }
        Ok(out)
    }
}

fn mixed_radix(pos: &[usize], lists: &[&[usize]]) -> usize {
    pos.iter().zip(lists).fold(0, |acc, (p, l)| acc * l.len() + p)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// One step of the product: `(next state, mean reward, done)`.
pub fn product_step<E: Env>(
    product: &Product<E>,
    state: &ProductState<E::State>,
    action: &E::Action,
    rng: &mut Rng,
) -> Result<(ProductState<E::State>, f64, bool)> {
    let o = product.step(state, action, rng)?;
    Ok((o.next, o.reward, o.done))
}

/// Single-machine counterfactual set for one observed transition.
pub fn counterfactual_experiences<E: Env>(
    product: &Product<E>,
    x: &E::State,
    rho: &HybridState,
    u: &E::Action,
    x_next: &E::State,
    cap: usize,
    rng: &mut Rng,
) -> Result<Vec<Experience<E::State, E::Action>>> {
    if product.machines.len() != 1 {
        return Err(Error::Config("single-machine counterfactuals on a multi-machine product".into()));
    }
    product.counterfactuals(x, std::slice::from_ref(rho), u, x_next, cap, rng)
}
