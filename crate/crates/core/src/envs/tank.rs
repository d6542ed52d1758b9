use super::{all_within, clamp_box, grid_cell, ContinuousEnv, Env, NoiseSpec, TabularEnv};
use crate::label::{Label, PropositionSet};
use crate::Rng;

/// Two tanks in cascade with inflow control on the upper tank.
///
/// `x1' = (√(β² + x1 + τu) − β)² + ϖ1`,
/// `x2' = (√(β² + x2 + τ√x1') − β)² + ϖ2`, clamped to `[0, 100]²`.
#[derive(Debug, Clone)]
pub struct TwoTank {
    pub tau: f64,
    pub beta: f64,
    pub noise: NoiseSpec,
    pub initial: [f64; 2],
    pub actions: Vec<f64>,
    /// Cell width of the grid used by tabular learners.
    pub cell_width: f64,
    props: PropositionSet,
}

pub const TANK_MAX: f64 = 100.0;

impl Default for TwoTank {
    fn default() -> Self {
        let tau = 10.0;
        Self {
            tau,
            beta: 0.5 * tau,
            noise: NoiseSpec::new(0.01, 0.01),
            initial: [10.0, 10.0],
            actions: vec![0.0, 1.5, 4.5, 7.5, 9.0],
            cell_width: 5.0,
            props: PropositionSet::new(["a", "b"]).expect("static proposition set"),
        }
    }
}

impl TwoTank {
    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    fn level(&self, x: f64, inflow: f64) -> f64 {
        let b = self.beta;
        ((b * b + x + self.tau * inflow).max(0.0).sqrt() - b).powi(2)
    }

    fn cells_per_dim(&self) -> usize {
        (TANK_MAX / self.cell_width).ceil().max(1.0) as usize
    }
}

impl Env for TwoTank {
    type State = Vec<f64>;
    type Action = Vec<f64>;

    fn name(&self) -> &str {
        "two_tank"
    }

    fn props(&self) -> &PropositionSet {
        &self.props
    }

    fn initial_state(&self) -> Vec<f64> {
        self.initial.to_vec()
    }

    fn step(&self, x: &Vec<f64>, u: &Vec<f64>, rng: &mut Rng) -> Vec<f64> {
        let x1 = (self.level(x[0], u[0]) + self.noise.sample(rng)).clamp(0.0, TANK_MAX);
        let x2 = self.level(x[1], x1.sqrt()) + self.noise.sample(rng);
        let mut out = vec![x1, x2];
        clamp_box(&mut out, 0.0, TANK_MAX);
        out
    }

    fn label(&self, x: &Vec<f64>) -> Label {
        let mut l = Label::EMPTY;
        if all_within(x, 0.0, 0.5, true, true) || all_within(x, 80.0, 100.0, true, true) {
            l = l.with(0);
        }
        if all_within(x, 20.0, 70.0, true, true) {
            l = l.with(1);
        }
        l
    }
}

impl TabularEnv for TwoTank {
    fn num_cells(&self) -> usize {
        self.cells_per_dim().pow(2)
    }

    fn cell(&self, x: &Vec<f64>) -> usize {
        grid_cell(x, 0.0, TANK_MAX, self.cells_per_dim())
    }

    fn num_actions(&self) -> usize {
        self.actions.len()
    }

    fn action(&self, index: usize) -> Vec<f64> {
        vec![self.actions[index]]
    }
}

impl ContinuousEnv for TwoTank {
    fn state_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, TANK_MAX); 2]
    }

    fn action_box(&self) -> Vec<(f64, f64)> {
        let lo = self.actions.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.actions.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        vec![(lo, hi)]
    }
}
