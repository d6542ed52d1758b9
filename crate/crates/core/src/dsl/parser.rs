use super::lexer::{lex, Tok, Token};
use super::{Diagnostic, Location, SourceDocument};
use crate::label::PropositionSet;
use crate::prm::{AffineExpr, Edge, EdgeGuard, FlowSpec, Guard, Interval, Mode, PrmDefinition, Terminal, Variable};

type PResult<T> = Result<T, Diagnostic>;

/// Parses a `.prm` document.
///
/// Succeeds only with a structurally valid machine; otherwise returns at
/// least one error diagnostic, each with a source location.
pub fn parse_prm(doc: &SourceDocument) -> Result<PrmDefinition, Vec<Diagnostic>> {
    let toks = lex(&doc.text).map_err(|d| vec![d])?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        props: Vec::new(),
        params: Vec::new(),
        vars: Vec::new(),
    };
    let raw = p.document().map_err(|d| vec![d])?;
    raw.resolve()
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    props: Vec<String>,
    params: Vec<(String, f64)>,
    vars: Vec<Variable>,
}

struct RawEdge {
    guard: EdgeGuard,
    target: (String, Location),
    reward: f64,
}

struct RawMode {
    name: String,
    loc: Location,
    init: bool,
    flow: FlowSpec,
    edges: Vec<RawEdge>,
}

struct RawMachine {
    name: String,
    loc: Location,
    props: Vec<String>,
    params: Vec<(String, f64)>,
    vars: Vec<Variable>,
    tau: f64,
    modes: Vec<RawMode>,
    terminals: Vec<((String, Location), Option<Guard>)>,
}

impl RawMachine {
    fn resolve(self) -> Result<PrmDefinition, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let mut undefined = Vec::new();
        let names: Vec<&str> = self.modes.iter().map(|m| m.name.as_str()).collect();
        let mut lookup = |(name, loc): &(String, Location)| match names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                undefined.push(Diagnostic::error(format!("undefined mode `{name}`"), Some(*loc)));
                0
            }
        };
        let mut modes = Vec::new();
        let mut initial = None;
        for (i, m) in self.modes.iter().enumerate() {
            if m.init {
                if initial.is_some() {
                    diags.push(Diagnostic::error("more than one initial mode", Some(m.loc)));
                }
                initial = Some(i);
            }
            let edges = m
                .edges
                .iter()
                .map(|e| Edge {
                    guard: e.guard.clone(),
                    target: lookup(&e.target),
                    reward: e.reward,
                })
                .collect();
            modes.push(Mode {
                name: m.name.clone(),
                flow: m.flow.clone(),
                edges,
            });
        }
        let terminals = self
            .terminals
            .iter()
            .map(|(m, g)| Terminal {
                mode: lookup(m),
                when: g.clone(),
            })
            .collect();
        diags.append(&mut undefined);
        if !diags.is_empty() {
            return Err(diags);
        }
        let props = PropositionSet::new(self.props.clone())
            .map_err(|e| vec![Diagnostic::error(e.to_string(), Some(self.loc))])?;
        let prm = PrmDefinition {
            name: self.name,
            props,
            vars: self.vars,
            params: self.params,
            modes,
            initial_mode: initial.unwrap_or(0),
            terminals,
            tau: self.tau,
        };
        prm.check_structure()
            .map_err(|e| vec![Diagnostic::error(e.to_string(), Some(self.loc))])?;
        Ok(prm)
    }
}

enum Name {
    Prop(usize),
    Var(usize),
    Param(f64),
    Step,
    Unknown,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn loc(&self) -> Location {
        self.peek().loc
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(&self.peek().tok, Tok::Punct(q) if *q == p)
    }

    fn at_word(&self, w: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == w)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(Diagnostic::error(msg, Some(self.loc())))
    }

    fn describe(&self) -> String {
        match &self.peek().tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.at_punct(p) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.at_word(w) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected `{w}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> PResult<(String, Location)> {
        let loc = self.loc();
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok((s, loc))
            }
            _ => self.err(format!("expected a name, found {}", self.describe())),
        }
    }

    fn classify(&self, name: &str) -> Name {
        if name == "k" {
            return Name::Step;
        }
        if let Some(i) = self.vars.iter().position(|v| v.name == name) {
            return Name::Var(i);
        }
        if let Some((_, v)) = self.params.iter().find(|(n, _)| n == name) {
            return Name::Param(*v);
        }
        if let Some(i) = self.props.iter().position(|p| p == name) {
            return Name::Prop(i);
        }
        Name::Unknown
    }

    fn fresh_name(&self, name: &str, loc: Location) -> PResult<()> {
        const RESERVED: [&str; 16] = [
            "k", "machine", "alphabet", "param", "var", "real", "init", "bounds", "tau", "mode", "flow", "on",
            "else", "reward", "terminal", "when",
        ];
        if RESERVED.contains(&name) || name == "in" || name == "true" {
            return Err(Diagnostic::error(format!("`{name}` is a reserved word"), Some(loc)));
        }
        if !matches!(self.classify(name), Name::Unknown) {
            return Err(Diagnostic::error(format!("`{name}` is already declared"), Some(loc)));
        }
        Ok(())
    }

    fn document(&mut self) -> PResult<RawMachine> {
        let loc = self.loc();
        self.expect_word("machine")?;
        let (name, _) = self.ident()?;
        let mut m = RawMachine {
            name,
            loc,
            props: Vec::new(),
            params: Vec::new(),
            vars: Vec::new(),
            tau: 1.0,
            modes: Vec::new(),
            terminals: Vec::new(),
        };
        let mut seen_alphabet = false;
        loop {
            let kw_loc = self.loc();
            let kw = match &self.peek().tok {
                Tok::Eof => break,
                Tok::Ident(s) => s.clone(),
                _ => return self.err(format!("expected a declaration, found {}", self.describe())),
            };
            self.bump();
            match kw.as_str() {
                "alphabet" => {
                    if seen_alphabet {
                        return Err(Diagnostic::error("duplicate alphabet", Some(kw_loc)));
                    }
                    if !m.modes.is_empty() {
                        return Err(Diagnostic::error("alphabet must precede modes", Some(kw_loc)));
                    }
                    seen_alphabet = true;
                    self.expect_punct("{")?;
                    while !self.at_punct("}") {
                        let (p, ploc) = self.ident()?;
                        self.fresh_name(&p, ploc)?;
                        self.props.push(p);
                        if !self.at_punct("}") {
                            self.expect_punct(",")?;
                        }
                    }
                    self.expect_punct("}")?;
                }
                "param" => {
                    let (n, nloc) = self.ident()?;
                    self.fresh_name(&n, nloc)?;
                    self.expect_punct("=")?;
                    let v = self.constant()?;
                    self.params.push((n, v));
                }
                "var" => {
                    if !m.modes.is_empty() {
                        return Err(Diagnostic::error("variables must be declared before modes", Some(kw_loc)));
                    }
                    let (n, nloc) = self.ident()?;
                    self.fresh_name(&n, nloc)?;
                    self.expect_punct(":")?;
                    self.expect_word("real")?;
                    self.expect_word("init")?;
                    let init = self.constant()?;
                    self.expect_word("bounds")?;
                    self.expect_punct("[")?;
                    let lo = self.constant()?;
                    self.expect_punct(",")?;
                    let hi = self.constant()?;
                    self.expect_punct("]")?;
                    if !(lo <= hi) || init < lo || init > hi {
                        return Err(Diagnostic::error(
                            format!("variable `{n}` needs lo <= init <= hi"),
                            Some(nloc),
                        ));
                    }
                    self.vars.push(Variable { name: n, init, lo, hi });
                }
                "tau" => {
                    let l = self.loc();
                    m.tau = self.constant()?;
                    if !(m.tau > 0.0 && m.tau.is_finite()) {
                        return Err(Diagnostic::error("tau must be positive", Some(l)));
                    }
                }
                "mode" => {
                    let mode = self.mode()?;
                    if m.modes.iter().any(|o| o.name == mode.name) {
                        return Err(Diagnostic::error(format!("duplicate mode `{}`", mode.name), Some(mode.loc)));
                    }
                    m.modes.push(mode);
                }
                "terminal" => {
                    let target = self.ident()?;
                    let when = if self.at_word("when") {
                        self.bump();
                        let gloc = self.loc();
                        let g = self.guard()?;
                        if g.mentions_propositions() {
                            return Err(Diagnostic::error(
                                "terminal predicates may only constrain variables",
                                Some(gloc),
                            ));
                        }
                        Some(g)
                    } else {
                        None
                    };
                    m.terminals.push((target, when));
                }
                other => return Err(Diagnostic::error(format!("unknown declaration `{other}`"), Some(kw_loc))),
            }
        }
        m.props = self.props.clone();
        m.params = self.params.clone();
        m.vars = self.vars.clone();
        Ok(m)
    }

    fn mode(&mut self) -> PResult<RawMode> {
        let (name, loc) = self.ident()?;
        if name == "else" || name == "k" {
            return Err(Diagnostic::error(format!("`{name}` is a reserved word"), Some(loc)));
        }
        let init = if self.at_word("init") {
            self.bump();
            true
        } else {
            false
        };
        self.expect_punct("{")?;
        let dim = self.vars.len();
        let mut flow = FlowSpec::zero(dim);
        let mut seen_flow = false;
        let mut edges = Vec::new();
        while !self.at_punct("}") {
            if self.at_word("flow") {
                if seen_flow {
                    return self.err("duplicate flow block");
                }
                seen_flow = true;
                self.bump();
                self.expect_punct("{")?;
                let mut assigned = vec![false; dim];
                while !self.at_punct("}") {
                    let (v, vloc) = self.ident()?;
                    let i = match self.classify(&v) {
                        Name::Var(i) => i,
                        _ => return Err(Diagnostic::error(format!("`{v}` is not a variable"), Some(vloc))),
                    };
                    if assigned[i] {
                        return Err(Diagnostic::error(format!("derivative of `{v}` given twice"), Some(vloc)));
                    }
                    assigned[i] = true;
                    self.expect_punct("'")?;
                    self.expect_punct("=")?;
                    let eloc = self.loc();
                    let e = self.expr()?;
                    if e.references_step() {
                        return Err(Diagnostic::error("flows may not depend on `k`", Some(eloc)));
                    }
                    flow.matrix[i] = e.coeffs;
                    flow.offset[i] = e.constant;
                    if self.at_punct(";") {
                        self.bump();
                    } else if !self.at_punct("}") {
                        return self.err(format!("expected `;` or `}}`, found {}", self.describe()));
                    }
                }
                self.expect_punct("}")?;
            } else if self.at_word("on") || self.at_word("else") {
                let guard = if self.at_word("on") {
                    self.bump();
                    EdgeGuard::When(self.guard()?)
                } else {
                    self.bump();
                    EdgeGuard::Otherwise
                };
                self.expect_punct("->")?;
                let target = self.ident()?;
                self.expect_word("reward")?;
                let reward = self.constant()?;
                edges.push(RawEdge { guard, target, reward });
            } else {
                return self.err(format!("expected `flow`, `on`, `else` or `}}`, found {}", self.describe()));
            }
        }
        self.expect_punct("}")?;
        Ok(RawMode {
            name,
            loc,
            init,
            flow,
            edges,
        })
    }

    fn constant(&mut self) -> PResult<f64> {
        let loc = self.loc();
        let e = self.expr()?;
        if !e.is_constant() {
            return Err(Diagnostic::error("expected a constant expression", Some(loc)));
        }
        if e.constant.is_nan() {
            return Err(Diagnostic::error("expression is not a number", Some(loc)));
        }
        Ok(e.constant)
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> PResult<AffineExpr> {
        let mut acc = self.term()?;
        loop {
            if self.at_punct("+") {
                self.bump();
                acc = acc.add(&self.term()?);
            } else if self.at_punct("-") {
                self.bump();
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> PResult<AffineExpr> {
        let mut acc = self.unary()?;
        loop {
            let loc = self.loc();
            if self.at_punct("*") {
                self.bump();
                let rhs = self.unary()?;
                acc = if acc.is_constant() {
                    rhs.scale(acc.constant)
                } else if rhs.is_constant() {
                    acc.scale(rhs.constant)
                } else {
                    return Err(Diagnostic::error("product of two non-constant terms is not affine", Some(loc)));
                };
            } else if self.at_punct("/") {
                self.bump();
                let rhs = self.unary()?;
                if !rhs.is_constant() || rhs.constant == 0.0 {
                    return Err(Diagnostic::error("division must be by a non-zero constant", Some(loc)));
                }
                acc = acc.scale(1.0 / rhs.constant);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> PResult<AffineExpr> {
        if self.at_punct("-") {
            self.bump();
            return Ok(self.unary()?.scale(-1.0));
        }
        if self.at_punct("+") {
            self.bump();
            return self.unary();
        }
        let dim = self.vars.len();
        let loc = self.loc();
        match self.peek().tok.clone() {
            Tok::Number(v) => {
                self.bump();
                Ok(AffineExpr::constant(v, dim))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match self.classify(&name) {
                    Name::Var(i) => Ok(AffineExpr::var(i, dim)),
                    Name::Param(v) => Ok(AffineExpr::constant(v, dim)),
                    Name::Step => Ok(AffineExpr::step(dim)),
                    Name::Prop(_) => Err(Diagnostic::error(
                        format!("proposition `{name}` cannot appear in an arithmetic expression"),
                        Some(loc),
                    )),
                    Name::Unknown => Err(Diagnostic::error(format!("unknown name `{name}`"), Some(loc))),
                }
            }
            _ => self.err(format!("expected an expression, found {}", self.describe())),
        }
    }

    // guard := conj ('|' conj)*
    fn guard(&mut self) -> PResult<Guard> {
        let mut g = self.conj()?;
        while self.at_punct("|") {
            self.bump();
            g = g.or(self.conj()?);
        }
        Ok(g)
    }

    // conj := neg ('&' neg)*
    fn conj(&mut self) -> PResult<Guard> {
        let mut g = self.neg()?;
        while self.at_punct("&") {
            self.bump();
            g = g.and(self.neg()?);
        }
        Ok(g)
    }

    fn neg(&mut self) -> PResult<Guard> {
        if self.at_punct("!") {
            self.bump();
            return Ok(self.neg()?.not());
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Guard> {
        if self.at_word("true") {
            self.bump();
            return Ok(Guard::True);
        }
        // An interval predicate `<expr> in <interval>`; otherwise backtrack.
        let start = self.pos;
        if let Ok(expr) = self.expr() {
            if self.at_word("in") {
                self.bump();
                let interval = self.interval()?;
                return Ok(Guard::Within { expr, interval });
            }
        }
        self.pos = start;
        let loc = self.loc();
        match self.peek().tok.clone() {
            Tok::Punct("(") => {
                self.bump();
                let g = self.guard()?;
                self.expect_punct(")")?;
                Ok(g)
            }
            Tok::Ident(name) => match self.classify(&name) {
                Name::Prop(i) => {
                    self.bump();
                    Ok(Guard::Prop(i))
                }
                Name::Unknown => Err(Diagnostic::error(format!("unknown proposition `{name}`"), Some(loc))),
                _ => {
                    // Re-run to surface the expression error at the right place.
                    self.expr()?;
                    self.err(format!("expected `in` after expression, found {}", self.describe()))
                }
            },
            _ => self.err(format!("expected a guard, found {}", self.describe())),
        }
    }

    fn interval(&mut self) -> PResult<Interval> {
        let lo_closed = if self.at_punct("[") {
            true
        } else if self.at_punct("(") {
            false
        } else {
            return self.err(format!("expected `[` or `(`, found {}", self.describe()));
        };
        self.bump();
        let lo = self.constant()?;
        self.expect_punct(",")?;
        let hi = self.constant()?;
        let hi_closed = if self.at_punct("]") {
            true
        } else if self.at_punct(")") {
            false
        } else {
            return self.err(format!("expected `]` or `)`, found {}", self.describe()));
        };
        self.bump();
        Ok(Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;

    const MINIMAL: &str = "machine minimal
alphabet { b }
mode q0 init {
  on b -> q1 reward 1
  else -> q0 reward 0
}
mode q1 { }
terminal q1
";

    #[test]
    fn minimal_machine() {
        let prm = parse_prm(&SourceDocument::inline(MINIMAL)).unwrap();
        assert_eq!(prm.modes.len(), 2);
        assert_eq!(prm.psi_dim(), 0);
        assert_eq!(prm.initial_mode, 0);
        assert_eq!(prm.modes[0].edges[0].target, 1);
        let (next, r) = prm.step(&prm.initial_state(), Label(1)).unwrap();
        assert_eq!((next.mode, r), (1, 1.0));
        assert!(prm.is_terminal(&next));
    }

    #[test]
    fn undefined_mode_is_reported_once_with_location() {
        let src = MINIMAL.replace("on b -> q1", "on b -> q9");
        let diags = parse_prm(&SourceDocument::inline(src)).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("q9"));
        assert_eq!(diags[0].location, Some(Location { line: 4, column: 11 }));
    }

    #[test]
    fn unknown_proposition() {
        let src = MINIMAL.replace("on b ->", "on z ->");
        let diags = parse_prm(&SourceDocument::inline(src)).unwrap_err();
        assert!(diags[0].message.contains("unknown proposition `z`"));
    }

    #[test]
    fn affine_expressions_fold_params() {
        let src = "machine cool
alphabet { }
param alpha = 3.3e-4
param Te = 20
var T : real init 98 bounds [20, 98]
mode q init {
  flow { T' = -alpha * (T - Te); }
  else -> q reward 0
}
";
        let prm = parse_prm(&SourceDocument::inline(src)).unwrap();
        assert_eq!(prm.modes[0].flow.matrix, vec![vec![-3.3e-4]]);
        assert!((prm.modes[0].flow.offset[0] - 3.3e-4 * 20.0).abs() < 1e-18);
        assert_eq!(prm.params, vec![("alpha".to_string(), 3.3e-4), ("Te".to_string(), 20.0)]);
    }

    #[test]
    fn rejects_nonlinear_and_step_dependent_flows() {
        let base = "machine m\nvar x : real init 0 bounds [0, 1]\nmode q init { flow { x' = EXPR; } else -> q reward 0 }\n";
        for bad in ["x * x", "k", "1 / 0"] {
            let src = base.replace("EXPR", bad);
            assert!(parse_prm(&SourceDocument::inline(src)).is_err(), "{bad}");
        }
    }

    #[test]
    fn guard_grammar() {
        let src = "machine g
alphabet { b, c }
var x : real init 0 bounds [0, 10]
mode q init {
  on b & (k - x in [0, 10]) -> q reward 1
  on !b & (c | x in (5, 10]) -> q reward 0
  else -> q reward 0
}
";
        let prm = parse_prm(&SourceDocument::inline(src)).unwrap();
        let EdgeGuard::When(g) = &prm.modes[0].edges[0].guard else { panic!() };
        assert!(g.eval(Label(1), &[2.0], 5));
        assert!(!g.eval(Label(1), &[2.0], 50));
        let EdgeGuard::When(g) = &prm.modes[0].edges[1].guard else { panic!() };
        assert!(g.eval(Label(0), &[6.0], 0));
        assert!(!g.eval(Label(0), &[5.0], 0));
        assert!(g.eval(Label(2), &[5.0], 0));
    }

    #[test]
    fn structural_errors_become_diagnostics() {
        let src = "machine m\nalphabet { b }\nmode q init { }\nterminal q\n";
        let diags = parse_prm(&SourceDocument::inline(src)).unwrap_err();
        assert!(diags[0].message.contains("initial state is terminal"));
    }
}
