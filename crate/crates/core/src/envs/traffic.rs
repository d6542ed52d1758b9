use super::{all_within, ContinuousEnv, Env, NoiseSpec};
use crate::label::{Label, PropositionSet};
use crate::Rng;

/// Five-cell cyclic road with traffic-light entries at cells 1 and 3.
///
/// Densities are not clamped: leaving `[0, 10]^5` is the `a` event.
#[derive(Debug, Clone)]
pub struct FiveRoad {
    /// Sampling time in hours.
    pub tau: f64,
    /// Flow speed in km/h.
    pub speed: f64,
    /// Cell length in km.
    pub length: f64,
    /// Exit ratio of cells 2 and 4.
    pub q: f64,
    pub entry: [f64; 2],
    pub noise: NoiseSpec,
    pub initial: [f64; 5],
    props: PropositionSet,
}

pub const ROAD_LO: f64 = 0.0;
pub const ROAD_HI: f64 = 10.0;

impl Default for FiveRoad {
    fn default() -> Self {
        Self {
            tau: 6.48 / 3600.0,
            speed: 100.0,
            length: 0.5,
            q: 0.25,
            entry: [6.0, 8.0],
            noise: NoiseSpec::new(0.7, 0.7),
            initial: [5.0; 5],
            props: PropositionSet::new(["a", "b", "c", "d"]).expect("static proposition set"),
        }
    }
}

impl FiveRoad {
    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn t_v(&self) -> f64 {
        self.tau * self.speed / self.length
    }
}

impl Env for FiveRoad {
    type State = Vec<f64>;
    type Action = Vec<f64>;

    fn name(&self) -> &str {
        "five_road"
    }

    fn props(&self) -> &PropositionSet {
        &self.props
    }

    fn initial_state(&self) -> Vec<f64> {
        self.initial.to_vec()
    }

    fn step(&self, x: &Vec<f64>, u: &Vec<f64>, rng: &mut Rng) -> Vec<f64> {
        let tv = self.t_v();
        let n = x.len();
        (0..n)
            .map(|i| {
                let upstream = x[(i + n - 1) % n];
                let keep = match i {
                    1 | 3 => 1.0 - tv - self.q,
                    _ => 1.0 - tv,
                };
                let inflow = match i {
                    0 => self.entry[0] * u[0].clamp(0.0, 1.0),
                    2 => self.entry[1] * u[1].clamp(0.0, 1.0),
                    _ => 0.0,
                };
                keep * x[i] + tv * upstream + inflow + self.noise.sample(rng)
            })
            .collect()
    }

    fn label(&self, x: &Vec<f64>) -> Label {
        let mut l = Label::EMPTY;
        if x.iter().any(|&v| !(ROAD_LO..=ROAD_HI).contains(&v)) {
            l = l.with(0);
        }
        if all_within(x, 1.0, 8.0, true, true) {
            l = l.with(1);
        }
        if all_within(x, 0.0, 1.0, false, false) {
            l = l.with(2);
        }
        if all_within(x, 8.0, 10.0, false, false) {
            l = l.with(3);
        }
        l
    }
}

impl ContinuousEnv for FiveRoad {
    fn state_box(&self) -> Vec<(f64, f64)> {
        vec![(ROAD_LO, ROAD_HI); 5]
    }

    fn action_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); 2]
    }
}
