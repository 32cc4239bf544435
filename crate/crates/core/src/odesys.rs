//! Parametric ODE systems and their text format.
//!
//! ```text
//! model verhulst;          # optional
//! time t;                  # optional, defaults to t
//! state x;
//! param a, b, c;
//! d/dt x = x*(a - b*x) - c*x;
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::expr::parse::{lex, ExprParser, ParseError, Pos, Tok, Token};
use crate::expr::{DagBuilder, ExprDag, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{line}:{col}: `{name}` is declared twice")]
    DuplicateSymbol { line: usize, col: usize, name: String },
    #[error("{line}:{col}: second equation for state `{name}`")]
    DuplicateEquation { line: usize, col: usize, name: String },
    #[error("no equation for state `{0}`")]
    MissingEquation(String),
    #[error("{line}:{col}: `{name}` is not a state variable")]
    NotAState { line: usize, col: usize, name: String },
    #[error("{line}:{col}: control variables unsupported")]
    ControlUnsupported { line: usize, col: usize },
    #[error("a model needs at least one state variable")]
    NoStates,
    #[error("right-hand side of `{state}` uses unknown symbol `{name}`")]
    UnknownSymbol { state: String, name: String },
}

/// The system x' = F(t, X, Θ) with constant parameters Θ.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    name: String,
    time: Symbol,
    states: Vec<Symbol>,
    params: Vec<Symbol>,
    rhs: Vec<ExprDag>,
}

impl Model {
    /// Builds a model, checking that symbols are distinct and that every
    /// right-hand side only mentions t, X and Θ.
    pub fn new(
        name: impl Into<String>,
        time: Symbol,
        states: Vec<Symbol>,
        params: Vec<Symbol>,
        rhs: Vec<ExprDag>,
    ) -> Result<Model, ModelError> {
        if states.is_empty() {
            return Err(ModelError::NoStates);
        }
        assert_eq!(states.len(), rhs.len(), "one right-hand side per state");
        let mut seen = BTreeSet::new();
        for s in std::iter::once(&time).chain(&states).chain(&params) {
            if !seen.insert(s.clone()) {
                return Err(ModelError::DuplicateSymbol { line: 0, col: 0, name: s.to_string() });
            }
        }
        for (x, f) in states.iter().zip(&rhs) {
            if let Some(u) = f.variables().into_iter().find(|v| !seen.contains(v)) {
                return Err(ModelError::UnknownSymbol { state: x.to_string(), name: u.to_string() });
            }
        }
        Ok(Model { name: name.into(), time, states, params, rhs })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn time(&self) -> &Symbol {
        &self.time
    }

    pub fn states(&self) -> &[Symbol] {
        &self.states
    }

    pub fn params(&self) -> &[Symbol] {
        &self.params
    }

    pub fn rhs(&self) -> &[ExprDag] {
        &self.rhs
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn l(&self) -> usize {
        self.params.len()
    }

    /// Length of the coordinate vector (t, X, Θ).
    pub fn dim(&self) -> usize {
        1 + self.n() + self.l()
    }

    /// The coordinates in canonical order (t, x1..xn, θ1..θl). Exponent
    /// vectors are indexed against this order.
    pub fn coordinates(&self) -> Vec<Symbol> {
        std::iter::once(self.time.clone())
            .chain(self.states.iter().cloned())
            .chain(self.params.iter().cloned())
            .collect()
    }

    pub fn coordinate_index(&self, s: &Symbol) -> Option<usize> {
        if *s == self.time {
            return Some(0);
        }
        if let Some(i) = self.states.iter().position(|x| x == s) {
            return Some(1 + i);
        }
        self.params.iter().position(|x| x == s).map(|i| 1 + self.n() + i)
    }

    pub fn is_param(&self, s: &Symbol) -> bool {
        self.params.contains(s)
    }

    /// Total arithmetic length of the right-hand sides.
    pub fn length(&self) -> usize {
        self.rhs.iter().map(ExprDag::len).sum()
    }

    /// Text in the model-file format; `parse_model` reads it back.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            out.push_str(&format!("model {};\n", self.name));
        }
        out.push_str(&format!("time {};\n", self.time));
        out.push_str(&format!("state {};\n", join(&self.states)));
        if !self.params.is_empty() {
            out.push_str(&format!("param {};\n", join(&self.params)));
        }
        for (x, f) in self.states.iter().zip(&self.rhs) {
            out.push_str(&format!("d/d{} {} = {};\n", self.time, x, f.to_infix()));
        }
        out
    }
}

fn join(syms: &[Symbol]) -> String {
    syms.iter().map(Symbol::as_str).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn ident_list(toks: &[Token], start: Pos) -> Result<Vec<(String, Pos)>, ParseError> {
    let mut out = Vec::new();
    let mut expect_name = true;
    for t in toks {
        match (&t.tok, expect_name) {
            (Tok::Ident(s), true) => out.push((s.clone(), t.pos)),
            (Tok::Comma, false) => {}
            _ => return Err(ParseError::syntax(t.pos, "expected a comma-separated list of names")),
        }
        expect_name = !expect_name;
    }
    if expect_name {
        let pos = toks.last().map(|t| t.pos).unwrap_or(start);
        return Err(ParseError::syntax(pos, "expected a name"));
    }
    Ok(out)
}

/// Parses and validates a model file.
pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let (toks, end) = lex(text)?;

    // Split into `;`-terminated statements.
    let mut stmts: Vec<&[Token]> = Vec::new();
    let mut from = 0;
    for (i, t) in toks.iter().enumerate() {
        if t.tok == Tok::Semi {
            stmts.push(&toks[from..i]);
            from = i + 1;
        }
    }
    if from < toks.len() {
        return Err(ParseError::syntax(end, "expected `;`").into());
    }

    let mut name = String::new();
    let mut time: Option<(String, Pos)> = None;
    let mut states: Vec<(String, Pos)> = Vec::new();
    let mut params: Vec<(String, Pos)> = Vec::new();
    let mut equations = Vec::new();

    for stmt in stmts.iter().filter(|s| !s.is_empty()) {
        let head = &stmt[0];
        let body = &stmt[1..];
        let keyword = match &head.tok {
            Tok::Ident(k) => k.as_str(),
            _ => return Err(ParseError::syntax(head.pos, "expected a declaration or an equation").into()),
        };
        let is_equation = matches!(body.first().map(|t| &t.tok), Some(Tok::Slash)) && keyword == "d";
        if is_equation {
            equations.push(*stmt);
            continue;
        }
        match keyword {
            "model" => match body {
                [Token { tok: Tok::Ident(n), .. }] => name = n.clone(),
                _ => return Err(ParseError::syntax(head.pos, "expected `model <name>;`").into()),
            },
            "time" => match body {
                [Token { tok: Tok::Ident(n), pos }] => {
                    if time.is_some() {
                        return Err(ModelError::DuplicateSymbol { line: pos.line, col: pos.col, name: n.clone() });
                    }
                    time = Some((n.clone(), *pos));
                }
                _ => return Err(ParseError::syntax(head.pos, "expected `time <name>;`").into()),
            },
            "state" => states.extend(ident_list(body, head.pos)?),
            "param" => params.extend(ident_list(body, head.pos)?),
            "input" | "control" => {
                return Err(ModelError::ControlUnsupported { line: head.pos.line, col: head.pos.col })
            }
            _ => return Err(ParseError::syntax(head.pos, format!("unknown statement `{keyword}`")).into()),
        }
    }

    let time = time.unwrap_or_else(|| ("t".to_string(), Pos { line: 1, col: 1 }));
    let mut declared: BTreeSet<String> = BTreeSet::new();
    for (n, pos) in std::iter::once(&time).chain(&states).chain(&params) {
        if !declared.insert(n.clone()) {
            return Err(ModelError::DuplicateSymbol { line: pos.line, col: pos.col, name: n.clone() });
        }
    }
    if states.is_empty() {
        return Err(ModelError::NoStates);
    }

    let dt = format!("d{}", time.0);
    let mut rhs: Vec<Option<ExprDag>> = vec![None; states.len()];
    for stmt in equations {
        // d / d<time> <state> = <expr>
        let pos = stmt[0].pos;
        let target = match stmt.get(2).map(|t| &t.tok) {
            Some(Tok::Ident(s)) if *s == dt => stmt.get(3),
            _ => return Err(ParseError::syntax(pos, format!("expected `d/{dt} <state> = ...`")).into()),
        };
        let (x, xpos) = match target {
            Some(Token { tok: Tok::Ident(x), pos }) => (x.clone(), *pos),
            _ => return Err(ParseError::syntax(pos, "expected a state name").into()),
        };
        if !matches!(stmt.get(4).map(|t| &t.tok), Some(Tok::Eq)) {
            let p = stmt.get(4).map(|t| t.pos).unwrap_or(xpos);
            return Err(ParseError::syntax(p, "expected `=`").into());
        }
        let Some(i) = states.iter().position(|(s, _)| *s == x) else {
            return Err(ModelError::NotAState { line: xpos.line, col: xpos.col, name: x });
        };
        if rhs[i].is_some() {
            return Err(ModelError::DuplicateEquation { line: pos.line, col: pos.col, name: x });
        }
        let expr_toks = &stmt[5..];
        let stop = expr_toks.first().map(|t| t.pos).unwrap_or(xpos);
        let mut b = DagBuilder::new();
        let mut p = ExprParser::new(expr_toks, stop, |n: &str| declared.contains(n));
        let root = p.expr(&mut b)?;
        if p.position() != expr_toks.len() {
            let t = &expr_toks[p.position()];
            return Err(ParseError::syntax(t.pos, "expected an operator or `;`").into());
        }
        rhs[i] = Some(b.finish(root));
    }

    let mut fs = Vec::with_capacity(states.len());
    for ((x, _), f) in states.iter().zip(rhs) {
        fs.push(f.ok_or_else(|| ModelError::MissingEquation(x.clone()))?);
    }
    Model::new(
        name,
        Symbol::from(time.0),
        states.into_iter().map(|(s, _)| Symbol::from(s)).collect(),
        params.into_iter().map(|(s, _)| Symbol::from(s)).collect(),
        fs,
    )
}
