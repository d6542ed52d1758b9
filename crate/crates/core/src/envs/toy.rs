use super::{ContinuousEnv, Env, NoiseSpec};
use crate::dsl::{load_prm, SourceDocument};
use crate::label::{Label, PropositionSet};
use crate::prm::PrmDefinition;
use crate::Rng;

/// One-dimensional point whose position drifts by the action.
///
/// `x' = clamp(x + u + ϖ, 0, 10)` with `u ∈ [−1, 1]`; `b` holds on `[4, 6]`.
#[derive(Debug, Clone)]
pub struct Toy1d {
    pub noise: NoiseSpec,
    pub initial: f64,
    props: PropositionSet,
}

impl Default for Toy1d {
    fn default() -> Self {
        Self {
            noise: NoiseSpec::new(0.1, 0.01),
            initial: 0.0,
            props: PropositionSet::new(["b"]).expect("static proposition set"),
        }
    }
}

impl Env for Toy1d {
    type State = Vec<f64>;
    type Action = Vec<f64>;

    fn name(&self) -> &str {
        "toy_1d"
    }

    fn props(&self) -> &PropositionSet {
        &self.props
    }

    fn initial_state(&self) -> Vec<f64> {
        vec![self.initial]
    }

    fn step(&self, x: &Vec<f64>, u: &Vec<f64>, rng: &mut Rng) -> Vec<f64> {
        vec![(x[0] + u[0].clamp(-1.0, 1.0) + self.noise.sample(rng)).clamp(0.0, 10.0)]
    }

    fn label(&self, x: &Vec<f64>) -> Label {
        if (4.0..=6.0).contains(&x[0]) {
            Label::EMPTY.with(0)
        } else {
            Label::EMPTY
        }
    }
}

impl ContinuousEnv for Toy1d {
    fn state_box(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 10.0)]
    }

    fn action_box(&self) -> Vec<(f64, f64)> {
        vec![(-1.0, 1.0)]
    }
}

const TOY_MACHINE: &str = "\
# Reward 1 for every step spent in b; n counts elapsed steps.
machine toy
alphabet { b }
var n : real init 0 bounds [0, 50]

mode away init {
  flow { n' = 1; }
  on b -> inside reward 1
  else -> away reward 0
}

mode inside {
  flow { n' = 1; }
  on b -> inside reward 1
  else -> away reward 0
}
";

/// Two-mode machine paired with [`Toy1d`].
pub fn toy_machine() -> PrmDefinition {
    load_prm(&SourceDocument::new(TOY_MACHINE, "toy.prm")).expect("toy machine is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn drift_and_clamp() {
        let env = Toy1d {
            noise: NoiseSpec::off(),
            ..Toy1d::default()
        };
        let mut rng = seeded_rng(0);
        assert_eq!(env.step(&vec![0.0], &vec![-1.0], &mut rng), vec![0.0]);
        assert_eq!(env.step(&vec![4.5], &vec![0.5], &mut rng), vec![5.0]);
        assert_eq!(env.label(&vec![5.0]), Label::EMPTY.with(0));
        assert_eq!(env.label(&vec![3.9]), Label::EMPTY);
    }

    #[test]
    fn machine_shape() {
        let m = toy_machine();
        assert_eq!(m.modes.len(), 2);
        assert!(m.terminals.is_empty());
    }
}
