use std::collections::BTreeSet;

use super::Diagnostic;
use crate::label::Label;
use crate::prm::{EdgeGuard, HybridState, PrmDefinition};

/// Sampling used by [`validate_prm_with`].
///
/// Exhaustiveness over a continuous `ψ` cannot be decided in general; the
/// check sweeps every label against a uniform grid of `ψ` values (box
/// corners included) and, when guards mention `k`, a set of step values.
#[derive(Debug, Clone)]
pub struct ValidationOptions {
    pub samples_per_dim: usize,
    pub step_samples: Vec<u64>,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            samples_per_dim: 8,
            step_samples: vec![0, 1, 2, 4, 8, 16, 32, 64],
        }
    }
}

pub fn validate_prm(prm: &PrmDefinition) -> Vec<Diagnostic> {
    validate_prm_with(prm, &ValidationOptions::default())
}

/// Checks that every non-terminal mode has exactly one enabled edge for
/// every sampled `(label, ψ, k)`, that the initial state is not terminal
/// and that rewards are finite. Unreachable modes produce warnings.
pub fn validate_prm_with(prm: &PrmDefinition, opts: &ValidationOptions) -> Vec<Diagnostic> {
    if let Err(e) = prm.check_structure() {
        return vec![Diagnostic::error(e.to_string(), None)];
    }
    let mut diags = Vec::new();
    let grid = psi_samples(prm, opts.samples_per_dim.max(1));
    let uses_step = prm.modes.iter().any(|m| {
        m.edges
            .iter()
            .any(|e| matches!(&e.guard, EdgeGuard::When(g) if g.references_step()))
    }) || prm
        .terminals
        .iter()
        .any(|t| t.when.as_ref().is_some_and(|g| g.references_step()));
    let steps: Vec<u64> = if uses_step { opts.step_samples.clone() } else { vec![1] };

    for (mi, mode) in prm.modes.iter().enumerate() {
        let mut gap: Option<(Label, Vec<f64>, u64)> = None;
        let mut overlap: Option<(Label, Vec<f64>, u64, usize)> = None;
        'sweep: for psi in &grid {
            for &step in &steps {
                let state = HybridState {
                    mode: mi,
                    psi: psi.clone(),
                    step,
                };
                if prm.is_terminal(&state) {
                    continue;
                }
                for label in prm.props.all_labels() {
                    let n = prm.enabled_edges(mi, label, psi, step).len();
                    if n == 0 && gap.is_none() {
                        gap = Some((label, psi.clone(), step));
                    }
                    if n > 1 && overlap.is_none() {
                        overlap = Some((label, psi.clone(), step, n));
                    }
                    if gap.is_some() && overlap.is_some() {
                        break 'sweep;
                    }
                }
            }
        }
        if let Some((label, psi, step)) = gap {
            diags.push(Diagnostic::error(
                format!(
                    "mode `{}` is not total: no edge enabled for label {} at psi {:?}, k = {}",
                    mode.name,
                    prm.props.display(label),
                    psi,
                    step
                ),
                None,
            ));
        }
        if let Some((label, psi, step, n)) = overlap {
            diags.push(Diagnostic::error(
                format!(
                    "mode `{}` is not deterministic: {n} edges enabled for label {} at psi {:?}, k = {}",
                    mode.name,
                    prm.props.display(label),
                    psi,
                    step
                ),
                None,
            ));
        }
    }

    let mut reachable = BTreeSet::from([prm.initial_mode]);
    let mut frontier = vec![prm.initial_mode];
    while let Some(m) = frontier.pop() {
        for e in &prm.modes[m].edges {
            if reachable.insert(e.target) {
                frontier.push(e.target);
            }
        }
    }
    for (i, m) in prm.modes.iter().enumerate() {
        if !reachable.contains(&i) {
            diags.push(Diagnostic::warning(format!("mode `{}` is unreachable from the initial mode", m.name)));
        }
    }
    diags
}

fn psi_samples(prm: &PrmDefinition, n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = prm
        .vars
        .iter()
        .map(|v| {
            let (lo, hi) = (v.lo.max(-1e6), v.hi.min(1e6));
            if n == 1 || hi == lo {
                vec![0.5 * (lo + hi)]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |x| {
                    let mut q = p.clone();
                    q.push(*x);
                    q
                })
            })
            .collect();
    }
    out
}
