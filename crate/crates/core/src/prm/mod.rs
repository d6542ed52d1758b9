//! Machine definitions and their hybrid step semantics.
//!
//! A step from a non-terminal state first integrates the continuous
//! variables over one sampling interval under the current mode's flow,
//! then evaluates the outgoing guards against the observed label, the new
//! `ψ` and the incremented step counter, and follows the unique enabled
//! edge. Terminal states absorb every label with zero reward.

mod discretize;
mod flow;
mod guard;

pub use discretize::{DiscreteMachine, Discretization};
pub use flow::{flow_step, FlowSpec, RK4_SUBSTEPS};
pub use guard::{AffineExpr, Guard, Interval};

use crate::error::{Error, Result};
use crate::label::{Label, PropositionSet};

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub init: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EdgeGuard {
    When(Guard),
    /// Enabled exactly when no `When` edge of the mode is enabled.
    Otherwise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub guard: EdgeGuard,
    pub target: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub name: String,
    pub flow: FlowSpec,
    pub edges: Vec<Edge>,
}

/// Member of the terminal set: a mode, optionally restricted by a
/// continuous predicate (no propositions).
#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    pub mode: usize,
    pub when: Option<Guard>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrmDefinition {
    pub name: String,
    pub props: PropositionSet,
    pub vars: Vec<Variable>,
    /// Named constants kept for documentation and serialization.
    pub params: Vec<(String, f64)>,
    pub modes: Vec<Mode>,
    pub initial_mode: usize,
    pub terminals: Vec<Terminal>,
    /// Flow sampling interval.
    pub tau: f64,
}

/// `(mode, ψ, k)`: the machine's hybrid configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    pub mode: usize,
    pub psi: Vec<f64>,
    pub step: u64,
}

impl HybridState {
    /// Bit-exact key, usable in hash sets.
    pub fn key(&self) -> (usize, Vec<u64>, u64) {
        (
            self.mode,
            self.psi.iter().map(|x| x.to_bits()).collect(),
            self.step,
        )
    }
}

impl PrmDefinition {
    pub fn psi_dim(&self) -> usize {
        self.vars.len()
    }

    pub fn psi_init(&self) -> Vec<f64> {
        self.vars.iter().map(|v| v.init).collect()
    }

    pub fn psi_bounds(&self) -> Vec<(f64, f64)> {
        self.vars.iter().map(|v| (v.lo, v.hi)).collect()
    }

    pub fn mode_index(&self, name: &str) -> Option<usize> {
        self.modes.iter().position(|m| m.name == name)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn initial_state(&self) -> HybridState {
        HybridState {
            mode: self.initial_mode,
            psi: self.psi_init(),
            step: 0,
        }
    }

    /// Structural checks that every machine must satisfy before it can be
    /// stepped. Guard totality is a separate, sampled check
    /// ([`crate::dsl::validate_prm`]).
    pub fn check_structure(&self) -> Result<()> {
        let dim = self.psi_dim();
        if self.modes.is_empty() {
            return Err(Error::Definition("machine has no modes".into()));
        }
        if self.initial_mode >= self.modes.len() {
            return Err(Error::Definition("initial mode does not exist".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Definition(format!("sampling interval must be positive, got {}", self.tau)));
        }
        for v in &self.vars {
            if v.lo.is_nan() || v.hi.is_nan() || v.lo > v.hi {
                return Err(Error::Definition(format!("variable `{}` has empty bounds", v.name)));
            }
            if !v.init.is_finite() || v.init < v.lo || v.init > v.hi {
                return Err(Error::Definition(format!(
                    "variable `{}` initial value {} is outside its bounds",
                    v.name, v.init
                )));
            }
        }
        for m in &self.modes {
            if m.flow.dim() != dim
                || m.flow.matrix.len() != dim
                || m.flow.matrix.iter().any(|r| r.len() != dim)
            {
                return Err(Error::Definition(format!(
                    "flow of mode `{}` does not match {} variables",
                    m.name, dim
                )));
            }
            if m.flow.matrix.iter().flatten().chain(&m.flow.offset).any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("flow of mode `{}` is not finite", m.name)));
            }
            let mut otherwise = 0;
            for e in &m.edges {
                if e.target >= self.modes.len() {
                    return Err(Error::Definition(format!("edge of mode `{}` targets a missing mode", m.name)));
                }
                if !e.reward.is_finite() {
                    return Err(Error::Numeric(format!("edge of mode `{}` has reward {}", m.name, e.reward)));
                }
                match &e.guard {
                    EdgeGuard::Otherwise => otherwise += 1,
                    EdgeGuard::When(g) => self.check_guard(g, &m.name)?,
                }
            }
            if otherwise > 1 {
                return Err(Error::Definition(format!("mode `{}` has more than one `else` edge", m.name)));
            }
        }
        for t in &self.terminals {
            if t.mode >= self.modes.len() {
                return Err(Error::Definition("terminal entry names a missing mode".into()));
            }
            if let Some(g) = &t.when {
                if g.mentions_propositions() {
                    return Err(Error::Definition("terminal predicates may not mention propositions".into()));
                }
                self.check_guard(g, &self.modes[t.mode].name)?;
            }
        }
        if self.is_terminal(&self.initial_state()) {
            return Err(Error::Definition("initial state is terminal".into()));
        }
        Ok(())
    }

    fn check_guard(&self, g: &Guard, mode: &str) -> Result<()> {
        let mut err = None;
        g.walk(&mut |node| match node {
            Guard::Prop(i) if *i >= self.props.len() => {
                err = Some(format!("guard in mode `{mode}` uses an unknown proposition"))
            }
            Guard::Within { expr, interval } => {
                if expr.dim() != self.psi_dim() {
                    err = Some(format!("guard in mode `{mode}` has wrong dimension"));
                }
                if interval.lo.is_nan() || interval.hi.is_nan() {
                    err = Some(format!("guard in mode `{mode}` has a NaN bound"));
                }
            }
            _ => {}
        });
        match err {
            Some(e) => Err(Error::Definition(e)),
            None => Ok(()),
        }
    }

    /// Membership in the terminal set.
    pub fn is_terminal(&self, state: &HybridState) -> bool {
        self.terminals.iter().any(|t| {
            t.mode == state.mode
                && t.when
                    .as_ref()
                    .is_none_or(|g| g.eval(Label::EMPTY, &state.psi, state.step))
        })
    }

    /// Indices of the edges of `mode` enabled for `(label, ψ, k)`.
    pub fn enabled_edges(&self, mode: usize, label: Label, psi: &[f64], step: u64) -> Vec<usize> {
        let edges = &self.modes[mode].edges;
        let explicit: Vec<usize> = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| matches!(&e.guard, EdgeGuard::When(g) if g.eval(label, psi, step)))
            .map(|(i, _)| i)
            .collect();
        if explicit.is_empty() {
            edges
                .iter()
                .position(|e| e.guard == EdgeGuard::Otherwise)
                .into_iter()
                .collect()
        } else {
            explicit
        }
    }

    /// One synchronous step: flow, then guarded jump.
    pub fn step(&self, state: &HybridState, label: Label) -> Result<(HybridState, f64)> {
        if self.is_terminal(state) {
            return Ok((state.clone(), 0.0));
        }
        let mode = self
            .modes
            .get(state.mode)
            .ok_or_else(|| Error::Definition(format!("mode index {} out of range", state.mode)))?;
        let psi = flow_step(&mode.flow, &state.psi, self.tau, &self.psi_bounds())?;
        let step = state.step + 1;
        let enabled = self.enabled_edges(state.mode, label, &psi, step);
        if enabled.len() != 1 {
            return Err(Error::Totality {
                mode: mode.name.clone(),
                label: self.props.display(label),
                psi,
                enabled: enabled.len(),
            });
        }
        let edge = &mode.edges[enabled[0]];
        Ok((
            HybridState {
                mode: edge.target,
                psi,
                step,
            },
            edge.reward,
        ))
    }
}

/// Free-function form of [`PrmDefinition::step`].
pub fn prm_step(prm: &PrmDefinition, state: &HybridState, label: Label) -> Result<(HybridState, f64)> {
    prm.step(state, label)
}

/// Free-function form of [`PrmDefinition::is_terminal`].
pub fn is_terminal(prm: &PrmDefinition, state: &HybridState) -> bool {
    prm.is_terminal(state)
}
