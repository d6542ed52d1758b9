//! Exact dynamic programming on the product of an enumerable environment
//! with discretized machines.

use crate::envs::EnumerableEnv;
use crate::error::{Error, Result};
use crate::product::Product;
use crate::tabular::{argmax_set, Potentials, QTable};

/// Tie tolerance for greedy-action sets.
pub const TIE_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Succ {
    state: usize,
    p: f64,
    r: f64,
}

/// Enumerated product MDP. States are `cell · n_machine + joint machine
/// cell`; a state is terminal when some machine component is terminal.
#[derive(Debug, Clone)]
pub struct ProductMdp {
    n_cells: usize,
    n_machine: usize,
    n_actions: usize,
    terminal: Vec<bool>,
    /// Successor lists indexed by `state · n_actions + action`.
    succ: Vec<Vec<Succ>>,
    start: usize,
}

/// Optimal values and action values of a [`ProductMdp`].
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub n_actions: usize,
    pub sweeps: usize,
}

impl OracleSolution {
    pub fn greedy_set(&self, state: usize, tol: f64) -> Vec<usize> {
        argmax_set(&self.q[state * self.n_actions..(state + 1) * self.n_actions], tol)
    }
}

impl ProductMdp {
    /// Enumerates the product. With `potentials`, every transition pays
    /// the mean over machines of the shaped reward `r − λΦ(ρ′) + Φ(ρ)`.
    pub fn build<E: EnumerableEnv>(
        product: &Product<E>,
        potentials: Option<&Potentials>,
        lambda: f64,
        max_states: usize,
    ) -> Result<Self> {
        let env = &product.env;
        let n_cells = env.num_cells();
        let n_machine = product.joint_len();
        let n_actions = env.num_actions();
        let n = n_cells
            .checked_mul(n_machine)
            .filter(|&n| n <= max_states)
            .ok_or_else(|| Error::Config(format!("product has more than {max_states} states")))?;
        if let Some(p) = potentials {
            if p.len() != product.machines.len() {
                return Err(Error::Config("one potential table per machine is required".into()));
            }
        }
        let labels: Vec<_> = (0..n_cells).map(|c| env.label(&env.state_of_cell(c))).collect();
        let parts: Vec<Vec<usize>> = (0..n_machine).map(|m| product.split_joint(m)).collect();
        let terminal_m: Vec<bool> = parts
            .iter()
            .map(|idx| {
                product
                    .machines
                    .iter()
                    .zip(idx)
                    .any(|(m, &i)| m.machine.grid().is_terminal_index(i))
            })
            .collect();
        let mut terminal = vec![false; n];
        let mut succ = vec![Vec::new(); n * n_actions];
        let machine_len: Vec<usize> = product.machines.iter().map(|m| m.machine.grid().len()).collect();
        for c in 0..n_cells {
            let kernels: Vec<Vec<(usize, f64)>> = (0..n_actions).map(|a| env.kernel(c, a)).collect();
            for m in 0..n_machine {
                let s = c * n_machine + m;
                if terminal_m[m] {
                    terminal[s] = true;
                    continue;
                }
                for (a, kernel) in kernels.iter().enumerate() {
                    let list = &mut succ[s * n_actions + a];
                    for &(c2, p) in kernel {
                        let mut joint = 0;
                        let mut r_sum = 0.0;
                        for (i, am) in product.machines.iter().enumerate() {
                            let idx = parts[m][i];
                            let (next, r) = am.machine.transition(idx, am.translate(labels[c2]));
                            joint = joint * machine_len[i] + next;
                            r_sum += match potentials {
                                Some(pt) => r - lambda * pt[i].potential_index(next) + pt[i].potential_index(idx),
                                None => r,
                            };
                        }
                        list.push(Succ {
                            state: c2 * n_machine + joint,
                            p,
                            r: r_sum / product.machines.len() as f64,
                        });
                    }
                }
            }
        }
        let init = product.initial_state();
        let (c0, m0) = (env.cell(&init.env), product.joint_index(&init.machines)?);
        Ok(Self {
            n_cells,
            n_machine,
            n_actions,
            terminal,
            succ,
            start: c0 * n_machine + m0,
        })
    }

    pub fn len(&self) -> usize {
        self.terminal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminal.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_machine(&self) -> usize {
        self.n_machine
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn state(&self, cell: usize, machine: usize) -> usize {
        cell * self.n_machine + machine
    }

    pub fn is_terminal(&self, state: usize) -> bool {
        self.terminal[state]
    }

    fn backup(&self, v: &[f64], s: usize, a: usize, lambda: f64) -> f64 {
        self.succ[s * self.n_actions + a]
            .iter()
            .map(|t| t.p * (t.r + lambda * v[t.state]))
            .sum()
    }

    /// Value iteration until no value changes by `tol` or more.
    pub fn solve(&self, lambda: f64, tol: f64) -> Result<OracleSolution> {
        if !(0.0..1.0).contains(&lambda) {
            return Err(Error::Config(format!("discount must lie in [0, 1), got {lambda}")));
        }
        let n = self.len();
        let mut v = vec![0.0; n];
        let mut sweeps = 0;
        loop {
            let mut err: f64 = 0.0;
            for s in 0..n {
                if self.terminal[s] {
                    continue;
                }
                let best = (0..self.n_actions)
                    .map(|a| self.backup(&v, s, a, lambda))
                    .fold(f64::NEG_INFINITY, f64::max);
                err = err.max((best - v[s]).abs());
                v[s] = best;
            }
            sweeps += 1;
            if err < tol {
                break;
            }
            if sweeps >= MAX_SWEEPS {
                return Err(Error::Numeric("product value iteration did not converge".into()));
            }
        }
        let mut q = vec![0.0; n * self.n_actions];
        for s in 0..n {
            if !self.terminal[s] {
                for a in 0..self.n_actions {
                    q[s * self.n_actions + a] = self.backup(&v, s, a, lambda);
                }
            }
        }
        Ok(OracleSolution {
            v,
            q,
            n_actions: self.n_actions,
            sweeps,
        })
    }

    /// Value of a stochastic policy that mixes uniformly over the action
    /// set given for each state.
    pub fn evaluate(&self, policy: &[Vec<usize>], lambda: f64, tol: f64) -> Result<Vec<f64>> {
        self.check_policy(policy)?;
        let n = self.len();
        let mut v = vec![0.0; n];
        for _ in 0..MAX_SWEEPS {
            let mut err: f64 = 0.0;
            for s in 0..n {
                if self.terminal[s] {
                    continue;
                }
                let acts = &policy[s];
                let val = acts.iter().map(|&a| self.backup(&v, s, a, lambda)).sum::<f64>() / acts.len() as f64;
                err = err.max((val - v[s]).abs());
                v[s] = val;
            }
            if err < tol {
                return Ok(v);
            }
        }
        Err(Error::Numeric("policy evaluation did not converge".into()))
    }

    /// Expected undiscounted episode reward and length from the start
    /// state, with episodes cut after `horizon` steps.
    pub fn episode_stats(&self, policy: &[Vec<usize>], horizon: usize) -> Result<(f64, f64)> {
        self.check_policy(policy)?;
        let n = self.len();
        let mut reward = vec![0.0; n];
        let mut length = vec![0.0; n];
        for _ in 0..horizon {
            let mut r2 = vec![0.0; n];
            let mut l2 = vec![0.0; n];
            for s in 0..n {
                if self.terminal[s] {
                    continue;
                }
                let acts = &policy[s];
                let w = 1.0 / acts.len() as f64;
                let mut r = 0.0;
                let mut l = 1.0;
                for &a in acts {
                    for t in &self.succ[s * self.n_actions + a] {
                        r += w * t.p * (t.r + reward[t.state]);
                        l += w * t.p * length[t.state];
                    }
                }
                r2[s] = r;
                l2[s] = l;
            }
            reward = r2;
            length = l2;
        }
        Ok((reward[self.start], length[self.start]))
    }

    /// Long-run reward per step of a policy restarted at the start state
    /// after every episode.
    pub fn reward_rate(&self, policy: &[Vec<usize>], horizon: usize) -> Result<f64> {
        let (r, l) = self.episode_stats(policy, horizon)?;
        Ok(if l > 0.0 { r / l } else { 0.0 })
    }

    /// Greedy-action sets of an oracle solution.
    pub fn greedy_policy(&self, sol: &OracleSolution, tol: f64) -> Vec<Vec<usize>> {
        (0..self.len())
            .map(|s| if self.terminal[s] { Vec::new() } else { sol.greedy_set(s, tol) })
            .collect()
    }

    /// Greedy-action sets of a learned table, exact ties kept.
    pub fn table_policy(&self, q: &QTable) -> Vec<Vec<usize>> {
        (0..self.len())
            .map(|s| {
                if self.terminal[s] {
                    Vec::new()
                } else {
                    q.greedy_set(s / self.n_machine, s % self.n_machine, 0.0)
                }
            })
            .collect()
    }

    fn check_policy(&self, policy: &[Vec<usize>]) -> Result<()> {
        if policy.len() != self.len() {
            return Err(Error::Config("policy does not cover the product".into()));
        }
        for (s, acts) in policy.iter().enumerate() {
            if !self.terminal[s] && (acts.is_empty() || acts.iter().any(|&a| a >= self.n_actions)) {
                return Err(Error::Config(format!("policy has no valid action at state {s}")));
            }
        }
        Ok(())
    }

    /// Total outgoing probability of `(state, action)`.
    pub fn outgoing_mass(&self, state: usize, action: usize) -> f64 {
        self.succ[state * self.n_actions + action].iter().map(|t| t.p).sum()
    }
}
