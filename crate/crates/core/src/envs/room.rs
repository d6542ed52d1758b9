use super::{all_within, clamp_box, ContinuousEnv, Env, NoiseSpec};
use crate::label::{Label, PropositionSet};
use crate::Rng;

/// Cyclic network of five rooms, heaters in rooms 1 and 3.
#[derive(Debug, Clone)]
pub struct FiveRoom {
    /// Conduction to the heater.
    pub varsigma: f64,
    /// Conduction to the outside.
    pub beta: f64,
    /// Conduction between neighbouring rooms.
    pub xi: f64,
    pub t_heater: f64,
    pub t_ambient: f64,
    pub noise: NoiseSpec,
    pub initial: [f64; 5],
    props: PropositionSet,
}

pub const ROOM_LO: f64 = 15.0;
pub const ROOM_HI: f64 = 25.0;
const HEATED: [Option<usize>; 5] = [Some(0), None, Some(1), None, None];

impl Default for FiveRoom {
    fn default() -> Self {
        Self {
            varsigma: 0.05,
            beta: 0.022,
            xi: 0.3,
            t_heater: 50.0,
            t_ambient: -1.0,
            noise: NoiseSpec::new(0.01, 0.01),
            initial: [20.0; 5],
            props: PropositionSet::new(["a", "b", "c", "d"]).expect("static proposition set"),
        }
    }
}

impl FiveRoom {
    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }
}

impl Env for FiveRoom {
    type State = Vec<f64>;
    type Action = Vec<f64>;

    fn name(&self) -> &str {
        "five_room"
    }

    fn props(&self) -> &PropositionSet {
        &self.props
    }

    fn initial_state(&self) -> Vec<f64> {
        self.initial.to_vec()
    }

    fn step(&self, x: &Vec<f64>, u: &Vec<f64>, rng: &mut Rng) -> Vec<f64> {
        let n = x.len();
        let mut out: Vec<f64> = (0..n)
            .map(|i| {
                let gamma = x[(i + 1) % n] + x[(i + n - 1) % n];
                let phi = 1.0 - self.beta - 2.0 * self.xi;
                let drift = self.xi * gamma + self.beta * self.t_ambient;
                let heated = match HEATED[i] {
                    Some(j) => {
                        let ui = u[j].clamp(0.0, 1.0);
                        (phi - self.varsigma * ui) * x[i] + self.varsigma * self.t_heater * ui
                    }
                    None => phi * x[i],
                };
                heated + drift + self.noise.sample(rng)
            })
            .collect();
        clamp_box(&mut out, ROOM_LO, ROOM_HI);
        out
    }

    fn label(&self, x: &Vec<f64>) -> Label {
        let mut l = Label::EMPTY;
        if all_within(x, 15.0, 18.5, true, true) || all_within(x, 21.5, 25.0, true, true) {
            l = l.with(0);
        }
        if all_within(x, 19.5, 20.5, true, true) {
            l = l.with(1);
        }
        if all_within(x, 18.5, 19.5, false, false) {
            l = l.with(2);
        }
        if all_within(x, 20.5, 21.5, false, false) {
            l = l.with(3);
        }
        l
    }
}

impl ContinuousEnv for FiveRoom {
    fn state_box(&self) -> Vec<(f64, f64)> {
        vec![(ROOM_LO, ROOM_HI); 5]
    }

    fn action_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); 2]
    }
}
