use std::sync::Arc;

use super::{HybridState, PrmDefinition};
use crate::error::{Error, Result};
use crate::label::Label;

const EDGE_TOL: f64 = 1e-9;

/// Uniform grid over the continuous box of a machine, crossed with its modes.
///
/// Cells are half-open `[lo + i·w, lo + (i+1)·w)`, except that the upper
/// bound of the box belongs to the last cell. Discretized states are the
/// cell centers with step counter 0, indexed mode-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    lows: Vec<f64>,
    highs: Vec<f64>,
    widths: Vec<f64>,
    counts: Vec<usize>,
    cells_per_mode: usize,
    states: Vec<HybridState>,
    terminal: Vec<bool>,
    nonterminal: Vec<usize>,
}

impl Discretization {
    pub fn new(prm: &PrmDefinition, widths: &[f64]) -> Result<Self> {
        if widths.len() != prm.psi_dim() {
            return Err(Error::Config(format!(
                "{} grid widths for {} variables",
                widths.len(),
                prm.psi_dim()
            )));
        }
        let mut lows = Vec::new();
        let mut highs = Vec::new();
        let mut counts = Vec::new();
        for (v, &w) in prm.vars.iter().zip(widths) {
            if !v.lo.is_finite() || !v.hi.is_finite() {
                return Err(Error::Config(format!("variable `{}` is unbounded", v.name)));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("grid width for `{}` must be positive", v.name)));
            }
            let n = (((v.hi - v.lo) / w) - EDGE_TOL).ceil().max(1.0) as usize;
            lows.push(v.lo);
            highs.push(v.hi);
            counts.push(n);
        }
        let cells_per_mode: usize = counts.iter().product();
        let mut grid = Self {
            lows,
            highs,
            widths: widths.to_vec(),
            counts,
            cells_per_mode,
            states: Vec::new(),
            terminal: Vec::new(),
            nonterminal: Vec::new(),
        };
        for mode in 0..prm.modes.len() {
            for cell in 0..cells_per_mode {
                let s = HybridState {
                    mode,
                    psi: grid.center(cell),
                    step: 0,
                };
                let t = prm.is_terminal(&s);
                if !t {
                    grid.nonterminal.push(grid.states.len());
                }
                grid.terminal.push(t);
                grid.states.push(s);
            }
        }
        Ok(grid)
    }

    /// One cell per variable.
    pub fn coarse(prm: &PrmDefinition) -> Result<Self> {
        let widths: Vec<f64> = prm
            .vars
            .iter()
            .map(|v| if v.hi > v.lo { v.hi - v.lo } else { 1.0 })
            .collect();
        Self::new(prm, &widths)
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn cells_per_mode(&self) -> usize {
        self.cells_per_mode
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[HybridState] {
        &self.states
    }

    pub fn state(&self, index: usize) -> &HybridState {
        &self.states[index]
    }

    pub fn is_terminal_index(&self, index: usize) -> bool {
        self.terminal[index]
    }

    pub fn nonterminal_indices(&self) -> &[usize] {
        &self.nonterminal
    }

    pub fn terminal_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.terminal[i]).collect()
    }

    fn center(&self, mut cell: usize) -> Vec<f64> {
        let mut psi = vec![0.0; self.counts.len()];
        for d in (0..self.counts.len()).rev() {
            let i = cell % self.counts[d];
            cell /= self.counts[d];
            psi[d] = self.lows[d] + (i as f64 + 0.5) * self.widths[d];
        }
        psi
    }

    /// Cell index within a mode for an in-bounds `ψ`.
    pub fn cell_of(&self, psi: &[f64]) -> Result<usize> {
        if psi.len() != self.counts.len() {
            return Err(Error::Lookup(format!("psi has {} components, grid has {}", psi.len(), self.counts.len())));
        }
        let mut cell = 0;
        for d in 0..psi.len() {
            let x = psi[d];
            let span = (self.highs[d] - self.lows[d]).abs().max(1.0);
            if !x.is_finite() || x < self.lows[d] - EDGE_TOL * span || x > self.highs[d] + EDGE_TOL * span {
                return Err(Error::Lookup(format!(
                    "psi[{d}] = {x} outside [{}, {}]",
                    self.lows[d], self.highs[d]
                )));
            }
            let i = ((x - self.lows[d]) / self.widths[d]).floor().max(0.0) as usize;
            cell = cell * self.counts[d] + i.min(self.counts[d] - 1);
        }
        Ok(cell)
    }

    /// Center of the cell containing `ψ`.
    pub fn lookup(&self, psi: &[f64]) -> Result<Vec<f64>> {
        Ok(self.center(self.cell_of(psi)?))
    }

    /// Index of the discretized state containing a live state.
    pub fn index_of(&self, state: &HybridState) -> Result<usize> {
        let n_modes = self.states.len() / self.cells_per_mode.max(1);
        if state.mode >= n_modes {
            return Err(Error::Lookup(format!("mode {} out of range", state.mode)));
        }
        Ok(state.mode * self.cells_per_mode + self.cell_of(&state.psi)?)
    }
}

/// A machine together with its discretization and the precomputed
/// deterministic transition table over discretized states and all labels.
#[derive(Debug, Clone)]
pub struct DiscreteMachine {
    prm: Arc<PrmDefinition>,
    grid: Discretization,
    n_labels: usize,
    table: Vec<(usize, f64)>,
}

impl DiscreteMachine {
    pub fn new(prm: Arc<PrmDefinition>, grid: Discretization) -> Result<Self> {
        let n_labels = 1usize << prm.props.len();
        let mut table = Vec::with_capacity(grid.len() * n_labels);
        for (i, s) in grid.states().iter().enumerate() {
            for l in 0..n_labels {
                if grid.is_terminal_index(i) {
                    table.push((i, 0.0));
                } else {
                    let (next, r) = prm.step(s, Label(l as u64))?;
                    table.push((grid.index_of(&next)?, r));
                }
            }
        }
        Ok(Self {
            prm,
            grid,
            n_labels,
            table,
        })
    }

    pub fn prm(&self) -> &Arc<PrmDefinition> {
        &self.prm
    }

    pub fn grid(&self) -> &Discretization {
        &self.grid
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    /// `(successor index, reward)` of the discretized machine.
    pub fn transition(&self, index: usize, label: Label) -> (usize, f64) {
        self.table[index * self.n_labels + label.0 as usize]
    }
}
