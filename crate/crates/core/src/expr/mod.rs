//! Rational expressions as hash-consed straight-line programs.
//!
//! An [`ExprDag`] is parsed from text, evaluated exactly at rational
//! points, differentiated in reverse mode, rewritten by substitution and
//! expanded into a canonical polynomial fraction.

mod dag;
mod diff;
mod eval;
pub(crate) mod parse;
mod poly;
mod render;
mod subst;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use dag::{DagBuilder, ExprDag, Node};
pub use diff::derivative;
pub use eval::{evaluate, evaluate_in, evaluate_nodes, gradient, EvalError, Gradient, RationalField, SlpAlgebra};
pub use parse::{parse_expr, ParseError};
pub use poly::{normalize, normalize_with_limit, Monomial, NormalizeError, Poly, RationalFunction, DEFAULT_SIZE_LIMIT};
pub use subst::substitute;

use crate::num::Rational;

/// A variable name. Cheap to clone and ordered by its text.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Serialize for Symbol {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Symbol {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d).map(Symbol::from)
    }
}

impl AsRef<str> for Symbol {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl From<String> for Symbol {
    fn from(s: String) -> Self {
        Symbol(Arc::from(s))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Values bound to symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment(BTreeMap<Symbol, Rational>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, s: impl Into<Symbol>, v: Rational) {
        self.0.insert(s.into(), v);
    }

    pub fn get(&self, s: &Symbol) -> Option<&Rational> {
        self.0.get(s)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, &Rational)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<Symbol>> FromIterator<(S, Rational)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (S, Rational)>>(iter: I) -> Self {
        Assignment(iter.into_iter().map(|(s, v)| (s.into(), v)).collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(s, v)| format!("{}={}", s, crate::num::fmt_rational(v)))
            .collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
