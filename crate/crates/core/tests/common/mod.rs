//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng as _;

use prmrl::deep::{Mlp, OutputActivation};
use prmrl::dsl::{parse_prm, serialize_prm, SourceDocument};
use prmrl::envs::Env;
use prmrl::prm::{DiscreteMachine, Discretization, HybridState, PrmDefinition};
use prmrl::product::{counterfactual_experiences, Experience, Product};
use prmrl::{seeded_rng, Rng};

pub fn discretized(prm: PrmDefinition, widths: &[f64]) -> Arc<DiscreteMachine> {
    let prm = Arc::new(prm);
    let grid = Discretization::new(&prm, widths).unwrap();
    Arc::new(DiscreteMachine::new(prm, grid).unwrap())
}

pub fn key<S: std::fmt::Debug, A: std::fmt::Debug>(e: &Experience<S, A>) -> String {
    format!(
        "{:?}|{:?}|{:?}|{:?}|{:?}|{:?}",
        e.x,
        e.rho.iter().map(HybridState::key).collect::<Vec<_>>(),
        e.u,
        e.r.to_bits(),
        e.x_next,
        e.rho_next.iter().map(HybridState::key).collect::<Vec<_>>()
    )
}

/// Every non-terminal discretized state, at the actual step counter,
/// stepped on the label of `x_next`.
pub fn brute_force<E: Env>(product: &Product<E>, x: &E::State, step: u64, u: &E::Action, x_next: &E::State) -> Vec<String> {
    let m = &product.machines[0];
    let label = m.translate(product.env.label(x_next));
    let grid = m.machine.grid();
    let mut out: Vec<String> = grid
        .nonterminal_indices()
        .iter()
        .map(|&i| {
            let mut s = grid.state(i).clone();
            s.step = step;
            let (next, r) = m.prm().step(&s, label).unwrap();
            key(&Experience {
                x: x.clone(),
                rho: vec![s],
                u: u.clone(),
                r,
                rewards: vec![r],
                x_next: x_next.clone(),
                rho_next: vec![next],
                done: false,
            })
        })
        .collect();
    out.sort();
    out
}

pub fn check_set_equality<E: Env>(product: &Product<E>, sample: impl Fn(&mut Rng) -> (E::State, E::Action, E::State)) {
    let mut rng = seeded_rng(2024);
    let grid = product.machines[0].machine.grid();
    for _ in 0..100 {
        let (x, u, x_next) = sample(&mut rng);
        let idx = grid.nonterminal_indices()[rng.random_range(0..grid.nonterminal_indices().len())];
        let mut rho = grid.state(idx).clone();
        rho.step = rng.random_range(0..50);
        let got = counterfactual_experiences(product, &x, &rho, &u, &x_next, usize::MAX, &mut rng).unwrap();
        assert_eq!(got[0].rho[0], rho, "actual experience comes first");
        let mut keys: Vec<String> = got.iter().map(key).collect();
        keys.sort();
        assert_eq!(keys, brute_force(product, &x, rho.step, &u, &x_next));
        for e in &got {
            assert_eq!(e.done, product.machines[0].prm().is_terminal(&e.rho_next[0]));
            assert_eq!(e.rewards, vec![e.r]);
        }
    }
}

pub const STEP: f64 = 1e-5;
pub const REL_TOL: f64 = 1e-4;

/// `J = Σ c ⊙ f(x)`, a linear readout of the batch outputs.
pub fn objective(net: &Mlp, x: &Array2<f64>, c: &Array2<f64>) -> f64 {
    (net.forward_batch(x.view()).unwrap() * c).sum()
}

/// Largest relative error, in norm, between backpropagated and central
/// difference parameter gradients.
pub fn gradient_error(net: &mut Mlp, x: &Array2<f64>, c: &Array2<f64>) -> f64 {
    let trace = net.forward_trace(x.clone()).unwrap();
    let (grads, _) = net.backward(&trace, c.view());
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for l in 0..net.weights().len() {
        let shape = net.weights()[l].dim();
        for i in 0..shape.0 {
            for j in 0..shape.1 {
                let w0 = net.weights()[l][[i, j]];
                net.weights_mut()[l][[i, j]] = w0 + STEP;
                let up = objective(net, x, c);
                net.weights_mut()[l][[i, j]] = w0 - STEP;
                let down = objective(net, x, c);
                net.weights_mut()[l][[i, j]] = w0;
                numeric.push((up - down) / (2.0 * STEP));
                analytic.push(grads.weights[l][[i, j]]);
            }
        }
        for i in 0..net.biases()[l].len() {
            let b0 = net.biases()[l][i];
            net.biases_mut()[l][i] = b0 + STEP;
            let up = objective(net, x, c);
            net.biases_mut()[l][i] = b0 - STEP;
            let down = objective(net, x, c);
            net.biases_mut()[l][i] = b0;
            numeric.push((up - down) / (2.0 * STEP));
            analytic.push(grads.biases[l][i]);
        }
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt() + numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Worst error over `nets` random networks with random biases and an
/// output layer scaled up from its small initialization.
pub fn check_shape(sizes: &[usize], output: OutputActivation, nets: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..nets {
        let mut rng = seeded_rng(seed);
        let mut net = Mlp::new(sizes, output.clone(), &mut rng).unwrap();
        let last = net.weights().len() - 1;
        net.weights_mut()[last].mapv_inplace(|v| v * 100.0);
        for b in net.biases_mut() {
            b.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        }
        let batch = 4;
        let x = Array2::from_shape_fn((batch, sizes[0]), |_| rng.random_range(-1.0..1.0));
        let c = Array2::from_shape_fn((batch, *sizes.last().unwrap()), |_| rng.random_range(-1.0..1.0));
        worst = worst.max(gradient_error(&mut net, &x, &c));
    }
    worst
}

pub fn round_trip(src: &str) {
    let p1 = parse_prm(&SourceDocument::inline(src)).unwrap_or_else(|d| panic!("{d:?}\n{src}"));
    let s1 = serialize_prm(&p1);
    let p2 = parse_prm(&s1).unwrap_or_else(|d| panic!("{d:?}\n{}", s1.text));
    assert_eq!(p1, p2, "{}", s1.text);
    assert_eq!(serialize_prm(&p2).text, s1.text);
}

#[derive(Debug, Clone)]
pub struct Shape {
    pub props: usize,
    pub vars: Vec<(f64, f64, f64)>,
    pub modes: Vec<ModeShape>,
    pub terminal: Vec<(usize, Option<usize>)>,
    pub tau: f64,
}

#[derive(Debug, Clone)]
pub struct ModeShape {
    pub flow: Vec<(f64, f64)>,
    pub edges: Vec<(u8, usize, f64, Option<(usize, f64, f64, bool)>)>,
    pub else_target: usize,
    pub else_reward: f64,
}

pub fn literal(x: f64) -> String {
    format!("{x:?}")
}

/// Renders a machine whose edges are made deterministic and total by
/// guarding each `on` edge with the negation of every earlier one and
/// ending with `else`.
pub fn render(s: &Shape) -> String {
    let props: Vec<String> = (0..s.props).map(|i| format!("p{i}")).collect();
    let mut out = format!("machine rand\nalphabet {{ {} }}\nparam unused = 1.5\n", props.join(", "));
    for (i, (init, lo, hi)) in s.vars.iter().enumerate() {
        out += &format!("var v{i} : real init {} bounds [{}, {}]\n", literal(*init), literal(*lo), literal(*hi));
    }
    out += &format!("tau {}\n", literal(s.tau));
    for (i, m) in s.modes.iter().enumerate() {
        out += &format!("mode m{i}{} {{\n", if i == 0 { " init" } else { "" });
        let flows: Vec<String> = m
            .flow
            .iter()
            .enumerate()
            .map(|(j, (a, b))| format!("v{j}' = {} * v{j} + {};", literal(*a), literal(*b)))
            .collect();
        if !flows.is_empty() {
            out += &format!("  flow {{ {} }}\n", flows.join(" "));
        }
        let mut earlier: Vec<String> = Vec::new();
        for (mask, target, reward, cont) in &m.edges {
            let mut terms: Vec<String> = (0..s.props)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| props[b].clone())
                .collect();
            if terms.is_empty() {
                terms.push(format!("!{}", props[0]));
            }
            if let Some((v, lo, hi, with_k)) = cont {
                if !s.vars.is_empty() {
                    let v = v % s.vars.len();
                    let e = if *with_k { format!("k - v{v}") } else { format!("v{v}") };
                    terms.push(format!("({e} in [{}, {}])", literal(*lo), literal(*lo + *hi)));
                }
            }
            let own = terms.join(" & ");
            let guard = if earlier.is_empty() {
                own.clone()
            } else {
                format!("({own}) & !({})", earlier.join(" | "))
            };
            out += &format!("  on {guard} -> m{} reward {}\n", target % s.modes.len(), literal(*reward));
            earlier.push(own);
        }
        out += &format!("  else -> m{} reward {}\n}}\n", m.else_target % s.modes.len(), literal(m.else_reward));
    }
    for (mode, when) in &s.terminal {
        let mode = 1 + mode % (s.modes.len() - 1);
        match when {
            Some(v) if !s.vars.is_empty() => {
                let (_, lo, hi) = s.vars[v % s.vars.len()];
                out += &format!("terminal m{mode} when v{} in [{}, {}]\n", v % s.vars.len(), literal(lo), literal((lo + hi) / 2.0));
            }
            _ => out += &format!("terminal m{mode}\n"),
        }
    }
    out
}

pub fn shape() -> impl Strategy<Value = Shape> {
    (1usize..=3, 0usize..=3, 2usize..=4).prop_flat_map(|(props, n_vars, n_modes)| {
        let var = (0.0..5.0f64, -10.0..0.0f64, 5.0..20.0f64).prop_map(|(init, lo, hi)| (init, lo, hi));
        let edge = (0u8..8, 0usize..8, -5.0..5.0f64, proptest::option::of((0usize..3, -3.0..3.0f64, 0.5..4.0f64, any::<bool>())));
        let mode = (
            proptest::collection::vec((-0.5..0.5f64, -2.0..2.0f64), n_vars),
            proptest::collection::vec(edge, 0..3),
            0usize..8,
            -5.0..5.0f64,
        )
            .prop_map(|(flow, edges, else_target, else_reward)| ModeShape {
                flow,
                edges,
                else_target,
                else_reward,
            });
        (
            Just(props),
            proptest::collection::vec(var, n_vars),
            proptest::collection::vec(mode, n_modes),
            proptest::collection::vec((0usize..4, proptest::option::of(0usize..3)), 0..2),
            prop_oneof![Just(1.0), 0.1..2.0f64],
        )
            .prop_map(|(props, vars, modes, terminal, tau)| Shape {
                props,
                vars,
                modes,
                terminal,
                tau,
            })
    })
}

