use crate::label::Label;

/// `constant + Σ coeffs[i]·ψ[i] + step_coeff·k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub coeffs: Vec<f64>,
    pub step_coeff: f64,
}

impl AffineExpr {
    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            constant: value,
            coeffs: vec![0.0; dim],
            step_coeff: 0.0,
        }
    }

    pub fn var(index: usize, dim: usize) -> Self {
        let mut e = Self::constant(0.0, dim);
        e.coeffs[index] = 1.0;
        e
    }

    pub fn step(dim: usize) -> Self {
        let mut e = Self::constant(0.0, dim);
        e.step_coeff = 1.0;
        e
    }

    pub fn dim(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_constant(&self) -> bool {
        self.step_coeff == 0.0 && self.coeffs.iter().all(|c| *c == 0.0)
    }

    pub fn references_step(&self) -> bool {
        self.step_coeff != 0.0
    }

    pub fn eval(&self, psi: &[f64], step: u64) -> f64 {
        let mut v = self.constant + self.step_coeff * step as f64;
        for (c, x) in self.coeffs.iter().zip(psi) {
            v += c * x;
        }
        v
    }

    pub fn add(&self, other: &Self) -> Self {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Self, sign: f64) -> Self {
        Self {
            constant: self.constant + sign * other.constant,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + sign * b)
                .collect(),
            step_coeff: self.step_coeff + sign * other.step_coeff,
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            constant: self.constant * factor,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            step_coeff: self.step_coeff * factor,
        }
    }
}

/// Interval with independently open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_closed { v >= self.lo } else { v > self.lo };
        let below = if self.hi_closed { v <= self.hi } else { v < self.hi };
        above && below
    }
}

/// Boolean formula over atomic propositions and interval predicates on
/// the continuous variables and the global step counter `k`.
#[derive(Debug, Clone, PartialEq)]
pub enum Guard {
    True,
    Prop(usize),
    Within { expr: AffineExpr, interval: Interval },
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    pub fn eval(&self, label: Label, psi: &[f64], step: u64) -> bool {
        match self {
            Guard::True => true,
            Guard::Prop(i) => label.contains(*i),
            Guard::Within { expr, interval } => interval.contains(expr.eval(psi, step)),
            Guard::Not(g) => !g.eval(label, psi, step),
            Guard::And(a, b) => a.eval(label, psi, step) && b.eval(label, psi, step),
            Guard::Or(a, b) => a.eval(label, psi, step) || b.eval(label, psi, step),
        }
    }

    pub fn and(self, other: Guard) -> Guard {
        Guard::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Guard) -> Guard {
        Guard::Or(Box::new(self), Box::new(other))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Guard {
        Guard::Not(Box::new(self))
    }

    /// Visits every node, depth first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Guard)) {
        f(self);
        match self {
            Guard::Not(g) => g.walk(f),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            _ => {}
        }
    }

    pub fn mentions_propositions(&self) -> bool {
        let mut found = false;
        self.walk(&mut |g| found |= matches!(g, Guard::Prop(_)));
        found
    }

    pub fn references_step(&self) -> bool {
        let mut found = false;
        self.walk(&mut |g| {
            if let Guard::Within { expr, .. } = g {
                found |= expr.references_step();
            }
        });
        found
    }
}
