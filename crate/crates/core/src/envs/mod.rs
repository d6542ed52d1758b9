//! Environments behind a common stepping interface.
//!
//! Every environment exposes its proposition set and a labeling function
//! so that it can be composed with reward machines. Discrete (or
//! discretized) environments additionally implement [`TabularEnv`];
//! real-valued ones implement [`ContinuousEnv`].

mod office;
mod room;
mod tank;
mod toy;
mod traffic;

pub use office::{Direction, Office, OfficeCell, OFFICE_PROPS};
pub use room::FiveRoom;
pub use tank::TwoTank;
pub use toy::{toy_machine, Toy1d};
pub use traffic::FiveRoad;

use std::fmt::Debug;

use rand_distr::{Distribution, Normal};

use crate::label::{Label, PropositionSet};
use crate::Rng;

/// A stochastic environment with a labeling function.
pub trait Env: Send + Sync {
    type State: Clone + Debug + PartialEq + Send + Sync;
    type Action: Clone + Debug + Send + Sync;

    fn name(&self) -> &str;
    fn props(&self) -> &PropositionSet;
    fn initial_state(&self) -> Self::State;
    fn step(&self, state: &Self::State, action: &Self::Action, rng: &mut Rng) -> Self::State;
    fn label(&self, state: &Self::State) -> Label;
}

/// Environment with finitely many state cells and actions.
pub trait TabularEnv: Env {
    fn num_cells(&self) -> usize;
    fn cell(&self, state: &Self::State) -> usize;
    fn num_actions(&self) -> usize;
    fn action(&self, index: usize) -> Self::Action;
}

/// Finite environment whose transition probabilities are known exactly.
pub trait EnumerableEnv: TabularEnv {
    fn state_of_cell(&self, cell: usize) -> Self::State;
    /// `(successor cell, probability)` pairs, summing to one.
    fn kernel(&self, cell: usize, action: usize) -> Vec<(usize, f64)>;
}

/// Environment over real vectors with box-shaped action sets.
pub trait ContinuousEnv: Env<State = Vec<f64>, Action = Vec<f64>> {
    /// Nominal state box, used for labeling and input normalization.
    fn state_box(&self) -> Vec<(f64, f64)>;
    fn action_box(&self) -> Vec<(f64, f64)>;
}

/// Additive zero-mean Gaussian noise `scale · ϖ`, `ϖ ~ N(0, variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub scale: f64,
    pub variance: f64,
    pub enabled: bool,
}

impl NoiseSpec {
    pub fn new(scale: f64, variance: f64) -> Self {
        Self {
            scale,
            variance,
            enabled: true,
        }
    }

    pub fn off() -> Self {
        Self {
            scale: 0.0,
            variance: 0.0,
            enabled: false,
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        if !self.enabled || self.scale == 0.0 || self.variance <= 0.0 {
            return 0.0;
        }
        let normal = Normal::new(0.0, self.variance.sqrt()).expect("finite variance");
        self.scale * normal.sample(rng)
    }
}

/// True when every component lies in `[lo, hi]` with the given openness.
pub(crate) fn all_within(x: &[f64], lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> bool {
    x.iter().all(|&v| {
        (if lo_closed { v >= lo } else { v > lo }) && (if hi_closed { v <= hi } else { v < hi })
    })
}

pub(crate) fn clamp_box(x: &mut [f64], lo: f64, hi: f64) {
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

/// Index of the uniform grid cell of `x` over `[lo, hi]^n` with `per_dim`
/// cells along each axis; out-of-box values go to the nearest cell.
pub(crate) fn grid_cell(x: &[f64], lo: f64, hi: f64, per_dim: usize) -> usize {
    let w = (hi - lo) / per_dim as f64;
    x.iter().fold(0, |acc, &v| {
        let i = ((v - lo) / w).floor().clamp(0.0, (per_dim - 1) as f64) as usize;
        acc * per_dim + i
    })
}
