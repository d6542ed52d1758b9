//! Potential-based reward shaping over a discretized machine.
//!
//! Value iteration treats the machine as a deterministic decision process
//! whose actions are labels: `V(ρ) = max_φ δ_r(ρ, φ) + λ V(δ_ρ(ρ, φ))`.
//! The potential is `Φ = −V*`, so the shaped reward
//! `r − λΦ(ρ′) + Φ(ρ)` pays `λV*(ρ′) − V*(ρ)` on top of `r`.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::label::Label;
use crate::prm::{DiscreteMachine, HybridState};

pub const DEFAULT_TOL: f64 = 1e-6;

/// Hard stop for value iteration; contraction makes it unreachable for
/// sensible `λ` and `tol`.
const MAX_SWEEPS: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct PotentialTable {
    machine: Arc<DiscreteMachine>,
    v_star: Vec<f64>,
    pub lambda: f64,
    /// Bellman residual `max |TV − V|` of the returned values.
    pub residual: f64,
    pub sweeps: usize,
}

/// In-place (Gauss-Seidel) value iteration over the non-terminal
/// discretized states, stopping when a sweep changes no value by
/// `(1 − λ)/λ · tol` or more.
pub fn value_iteration(machine: Arc<DiscreteMachine>, lambda: f64, tol: f64) -> Result<PotentialTable> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Config(format!("discount must lie in (0, 1), got {lambda}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Config(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let grid = machine.grid();
    let n_labels = machine.n_labels();
    for &s in grid.nonterminal_indices() {
        for l in 0..n_labels {
            let (_, r) = machine.transition(s, Label(l as u64));
            if !r.is_finite() {
                return Err(Error::Numeric(format!("non-finite reward {r} from discretized state {s}")));
            }
        }
    }
    let threshold = (1.0 - lambda) / lambda * tol;
    let backup = |v: &[f64], s: usize| {
        (0..n_labels)
            .map(|l| {
                let (next, r) = machine.transition(s, Label(l as u64));
                r + lambda * v[next]
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut v = vec![0.0; grid.len()];
    let mut sweeps = 0;
    loop {
        let mut err: f64 = 0.0;
        for &s in grid.nonterminal_indices() {
            let new = backup(&v, s);
            err = err.max((new - v[s]).abs());
            v[s] = new;
        }
        sweeps += 1;
        if err < threshold {
            let residual = grid
                .nonterminal_indices()
                .iter()
                .map(|&s| (backup(&v, s) - v[s]).abs())
                .fold(0.0, f64::max);
            if residual < threshold {
                return Ok(PotentialTable {
                    machine,
                    v_star: v,
                    lambda,
                    residual,
                    sweeps,
                });
            }
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::Numeric(format!("value iteration did not converge in {MAX_SWEEPS} sweeps")));
        }
    }
}

impl PotentialTable {
    pub fn machine(&self) -> &Arc<DiscreteMachine> {
        &self.machine
    }

    /// `V*` indexed by discretized state.
    pub fn values(&self) -> &[f64] {
        &self.v_star
    }

    /// `Φ = −V*` of a discretized state.
    pub fn potential_index(&self, index: usize) -> f64 {
        0.0 - self.v_star[index]
    }

    /// `Φ` of a live machine state; terminal states have potential 0.
    pub fn potential(&self, state: &HybridState) -> Result<f64> {
        if self.machine.prm().is_terminal(state) {
            return Ok(0.0);
        }
        Ok(self.potential_index(self.machine.grid().index_of(state)?))
    }

    /// Writes `state,mode,psi,value` rows; `psi` is the cell center with
    /// components separated by `;`, `value` is `Φ`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "mode", "psi", "value"])?;
        let prm = self.machine.prm();
        for (i, s) in self.machine.grid().states().iter().enumerate() {
            let psi: Vec<String> = s.psi.iter().map(|x| x.to_string()).collect();
            w.write_record([
                i.to_string(),
                prm.modes[s.mode].name.clone(),
                psi.join(";"),
                self.potential_index(i).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `r − λΦ(ρ′) + Φ(ρ)`.
pub fn shaped_reward(r: f64, rho: &HybridState, rho_next: &HybridState, table: &PotentialTable, lambda: f64) -> Result<f64> {
    Ok(r - lambda * table.potential(rho_next)? + table.potential(rho)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{load_prm, SourceDocument};
    use crate::prm::Discretization;

    fn machine(src: &str) -> Arc<DiscreteMachine> {
        let prm = Arc::new(load_prm(&SourceDocument::inline(src)).unwrap());
        let grid = Discretization::coarse(&prm).unwrap();
        Arc::new(DiscreteMachine::new(prm, grid).unwrap())
    }

    const TWO_STATE: &str = "machine two\nalphabet { b }\n\
        mode q0 init { on b -> q1 reward 1 else -> q0 reward 0 }\nmode q1 { }\nterminal q1\n";

    #[test]
    fn two_state_example() {
        let t = value_iteration(machine(TWO_STATE), 0.9, DEFAULT_TOL).unwrap();
        assert_eq!(t.values(), &[1.0, 0.0]);
        assert_eq!(t.potential_index(0), -1.0);
        let s0 = t.machine().grid().state(0).clone();
        let s1 = t.machine().grid().state(1).clone();
        assert_eq!(shaped_reward(1.0, &s0, &s1, &t, 0.9).unwrap(), 0.0);
        assert!((shaped_reward(0.0, &s0, &s0, &t, 0.9).unwrap() + 0.1).abs() < 1e-15);
    }

    #[test]
    fn chain_example() {
        let src = "machine chain\nalphabet { b }\n\
            mode q0 init { on b -> q1 reward 0 else -> q0 reward 0 }\n\
            mode q1 { on b -> q2 reward 1 else -> q1 reward 0 }\nmode q2 { }\nterminal q2\n";
        let t = value_iteration(machine(src), 0.9, DEFAULT_TOL).unwrap();
        assert!((t.values()[1] - 1.0).abs() < 1e-12);
        assert!((t.values()[0] - 0.9).abs() < 1e-12);
        assert_eq!(t.values()[2], 0.0);
    }

    #[test]
    fn zero_rewards_give_zero_potential() {
        let src = "machine z\nalphabet { b }\nmode q0 init { on b -> q1 reward 0 else -> q0 reward 0 }\n\
            mode q1 { else -> q0 reward 0 }\n";
        let t = value_iteration(machine(src), 0.9, DEFAULT_TOL).unwrap();
        assert!(t.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(value_iteration(machine(TWO_STATE), 1.0, DEFAULT_TOL).is_err());
        assert!(value_iteration(machine(TWO_STATE), 0.9, 0.0).is_err());
    }

    #[test]
    fn csv_export() {
        let t = value_iteration(machine(TWO_STATE), 0.9, DEFAULT_TOL).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "state,mode,psi,value\n0,q0,,-1\n1,q1,,0\n");
    }
}
