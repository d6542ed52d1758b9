use std::fmt::Write;

use super::SourceDocument;
use crate::prm::{AffineExpr, EdgeGuard, Guard, Interval, PrmDefinition};

/// Canonical text form. Parameters are emitted for reference, but every
/// expression is written with resolved numeric coefficients, so
/// `parse_prm(serialize_prm(p)) == p`.
pub fn serialize_prm(prm: &PrmDefinition) -> SourceDocument {
    let mut out = String::new();
    let names: Vec<&str> = prm.vars.iter().map(|v| v.name.as_str()).collect();
    let props: Vec<&str> = prm.props.symbols().iter().map(|s| s.as_str()).collect();

    writeln!(out, "machine {}", prm.name).unwrap();
    writeln!(out, "alphabet {{ {} }}", props.join(", ")).unwrap();
    for (n, v) in &prm.params {
        writeln!(out, "param {n} = {}", num(*v)).unwrap();
    }
    for v in &prm.vars {
        writeln!(
            out,
            "var {} : real init {} bounds [{}, {}]",
            v.name,
            num(v.init),
            num(v.lo),
            num(v.hi)
        )
        .unwrap();
    }
    writeln!(out, "tau {}", num(prm.tau)).unwrap();
    for (i, m) in prm.modes.iter().enumerate() {
        writeln!(out).unwrap();
        let init = if i == prm.initial_mode { " init" } else { "" };
        writeln!(out, "mode {}{init} {{", m.name).unwrap();
        let rows: Vec<String> = (0..names.len())
            .filter_map(|r| {
                let e = AffineExpr {
                    constant: m.flow.offset[r],
                    coeffs: m.flow.matrix[r].clone(),
                    step_coeff: 0.0,
                };
                (!(e.is_constant() && e.constant == 0.0))
                    .then(|| format!("{}' = {};", names[r], expr(&e, &names)))
            })
            .collect();
        if !rows.is_empty() {
            writeln!(out, "  flow {{ {} }}", rows.join(" ")).unwrap();
        }
        for e in &m.edges {
            let target = &prm.modes[e.target].name;
            match &e.guard {
                EdgeGuard::When(g) => writeln!(
                    out,
                    "  on {} -> {target} reward {}",
                    guard(g, 0, &names, &props),
                    num(e.reward)
                ),
                EdgeGuard::Otherwise => writeln!(out, "  else -> {target} reward {}", num(e.reward)),
            }
            .unwrap();
        }
        writeln!(out, "}}").unwrap();
    }
    if !prm.terminals.is_empty() {
        writeln!(out).unwrap();
    }
    for t in &prm.terminals {
        let m = &prm.modes[t.mode].name;
        match &t.when {
            Some(g) => writeln!(out, "terminal {m} when {}", guard(g, 0, &names, &props)),
            None => writeln!(out, "terminal {m}"),
        }
        .unwrap();
    }
    SourceDocument::new(out, format!("<serialized {}>", prm.name))
}

/// Shortest decimal text that parses back to the same `f64`.
fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:?}")
    }
}

fn term(coeff: f64, name: &str) -> String {
    if coeff == 1.0 {
        name.to_string()
    } else if coeff == -1.0 {
        format!("-{name}")
    } else {
        format!("{}*{name}", num(coeff))
    }
}

fn expr(e: &AffineExpr, names: &[&str]) -> String {
    let mut parts: Vec<String> = e
        .coeffs
        .iter()
        .zip(names)
        .filter(|(c, _)| **c != 0.0)
        .map(|(c, n)| term(*c, n))
        .collect();
    if e.step_coeff != 0.0 {
        parts.push(term(e.step_coeff, "k"));
    }
    if e.constant != 0.0 || parts.is_empty() {
        parts.push(num(e.constant));
    }
    parts.join(" + ")
}

fn interval(i: &Interval) -> String {
    format!(
        "{}{}, {}{}",
        if i.lo_closed { '[' } else { '(' },
        num(i.lo),
        num(i.hi),
        if i.hi_closed { ']' } else { ')' }
    )
}

// Precedence: 1 = `|`, 2 = `&`, 3 = `!`, 4 = atom. Binary operators are
// left-associative, so a right operand of equal precedence is parenthesized.
fn guard(g: &Guard, min_prec: u8, names: &[&str], props: &[&str]) -> String {
    let (prec, text) = match g {
        Guard::True => (4, "true".to_string()),
        Guard::Prop(i) => (4, props[*i].to_string()),
        Guard::Within { expr: e, interval: i } => (4, format!("{} in {}", expr(e, names), interval(i))),
        Guard::Not(inner) => (3, format!("!{}", guard(inner, 3, names, props))),
        Guard::And(a, b) => (
            2,
            format!("{} & {}", guard(a, 2, names, props), guard(b, 3, names, props)),
        ),
        Guard::Or(a, b) => (
            1,
            format!("{} | {}", guard(a, 1, names, props), guard(b, 2, names, props)),
        ),
    };
    // Interval atoms start with an expression; wrap them under `!` so the
    // negation cannot be read as part of the arithmetic.
    if prec < min_prec || (min_prec == 3 && matches!(g, Guard::Within { .. })) {
        format!("({text})")
    } else {
        text
    }
}
