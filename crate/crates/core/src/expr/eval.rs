use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use super::{Assignment, ExprDag, Node, Symbol};
use crate::num::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    /// Raised when a divisor evaluates to zero; `node` is the index of
    /// the offending division in the DAG.
    #[error("division by zero at node {node}")]
    DivisionByZero { node: usize },
    #[error("no value bound for `{0}`")]
    Unbound(Symbol),
}

/// A domain in which a straight-line program can be interpreted.
pub trait SlpAlgebra {
    type Value: Clone;
    type Error: From<EvalError>;

    fn constant(&self, c: &Rational) -> Result<Self::Value, Self::Error>;
    fn add(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, Self::Error>;
    fn sub(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, Self::Error>;
    fn mul(&self, a: &Self::Value, b: &Self::Value) -> Result<Self::Value, Self::Error>;
    /// Returns `Ok(None)` when `b` is not invertible.
    fn div(&self, a: &Self::Value, b: &Self::Value) -> Result<Option<Self::Value>, Self::Error>;
}

/// Plain exact arithmetic in ℚ.
pub struct RationalField;

impl SlpAlgebra for RationalField {
    type Value = Rational;
    type Error = EvalError;

    fn constant(&self, c: &Rational) -> Result<Rational, EvalError> {
        Ok(c.clone())
    }
    fn add(&self, a: &Rational, b: &Rational) -> Result<Rational, EvalError> {
        Ok(a + b)
    }
    fn sub(&self, a: &Rational, b: &Rational) -> Result<Rational, EvalError> {
        Ok(a - b)
    }
    fn mul(&self, a: &Rational, b: &Rational) -> Result<Rational, EvalError> {
        Ok(a * b)
    }
    fn div(&self, a: &Rational, b: &Rational) -> Result<Option<Rational>, EvalError> {
        Ok(if b.is_zero() { None } else { Some(a / b) })
    }
}

/// Interprets every node of `dag` in `alg`; returns all node values.
pub fn evaluate_nodes_in<A: SlpAlgebra>(
    dag: &ExprDag,
    alg: &A,
    mut bind: impl FnMut(&Symbol) -> Result<A::Value, A::Error>,
) -> Result<Vec<A::Value>, A::Error> {
    let mut vals: Vec<A::Value> = Vec::with_capacity(dag.size());
    for (i, node) in dag.nodes().iter().enumerate() {
        let v = match node {
            Node::Const(c) => alg.constant(c)?,
            Node::Var(s) => bind(s)?,
            Node::Add(a, b) => alg.add(&vals[*a], &vals[*b])?,
            Node::Sub(a, b) => alg.sub(&vals[*a], &vals[*b])?,
            Node::Mul(a, b) => alg.mul(&vals[*a], &vals[*b])?,
            Node::Div(a, b) => match alg.div(&vals[*a], &vals[*b])? {
                Some(v) => v,
                None => return Err(EvalError::DivisionByZero { node: i }.into()),
            },
        };
        vals.push(v);
    }
    Ok(vals)
}

pub fn evaluate_in<A: SlpAlgebra>(
    dag: &ExprDag,
    alg: &A,
    bind: impl FnMut(&Symbol) -> Result<A::Value, A::Error>,
) -> Result<A::Value, A::Error> {
    let mut vals = evaluate_nodes_in(dag, alg, bind)?;
    Ok(vals.swap_remove(dag.root()))
}

fn bind_point(point: &Assignment) -> impl FnMut(&Symbol) -> Result<Rational, EvalError> + '_ {
    move |s| point.get(s).cloned().ok_or_else(|| EvalError::Unbound(s.clone()))
}

pub fn evaluate_nodes(dag: &ExprDag, point: &Assignment) -> Result<Vec<Rational>, EvalError> {
    evaluate_nodes_in(dag, &RationalField, bind_point(point))
}

pub fn evaluate(dag: &ExprDag, point: &Assignment) -> Result<Rational, EvalError> {
    evaluate_in(dag, &RationalField, bind_point(point))
}

/// Value and exact gradient of an expression at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub value: Rational,
    /// One entry per symbol bound in the point (zero if absent from the DAG).
    pub partials: BTreeMap<Symbol, Rational>,
    /// Arithmetic operations spent, forward and reverse sweeps together.
    pub ops: usize,
}

impl Gradient {
    pub fn partial(&self, s: &Symbol) -> Rational {
        self.partials.get(s).cloned().unwrap_or_else(Rational::zero)
    }
}

/// Adds `delta` into an adjoint slot. Writing into an empty slot is a
/// move, not an arithmetic operation.
fn accumulate(slot: &mut Option<Rational>, delta: Rational, ops: &mut usize) {
    match slot {
        Some(v) => {
            *v += delta;
            *ops += 1;
        }
        None => *slot = Some(delta),
    }
}

fn accumulate_neg(slot: &mut Option<Rational>, delta: Rational, ops: &mut usize) {
    match slot {
        Some(v) => *v -= delta,
        None => *slot = Some(-delta),
    }
    *ops += 1;
}

/// Reverse-mode gradient. Each node costs at most five operations in
/// total (one forward, at most four backward), so `ops <= 5 * dag.len()`.
pub fn gradient(dag: &ExprDag, point: &Assignment) -> Result<Gradient, EvalError> {
    let vals = evaluate_nodes(dag, point)?;
    let mut ops = dag.len();
    let nodes = dag.nodes();
    let mut adj: Vec<Option<Rational>> = vec![None; nodes.len()];
    adj[dag.root()] = Some(Rational::from_integer(1.into()));

    for i in (0..nodes.len()).rev() {
        let Some(g) = adj[i].take() else { continue };
        match nodes[i] {
            Node::Add(a, b) => {
                accumulate(&mut adj[a], g.clone(), &mut ops);
                accumulate(&mut adj[b], g, &mut ops);
            }
            Node::Sub(a, b) => {
                accumulate(&mut adj[a], g.clone(), &mut ops);
                accumulate_neg(&mut adj[b], g, &mut ops);
            }
            Node::Mul(a, b) => {
                let da = &g * &vals[b];
                let db = &g * &vals[a];
                ops += 2;
                accumulate(&mut adj[a], da, &mut ops);
                accumulate(&mut adj[b], db, &mut ops);
            }
            Node::Div(a, b) => {
                // c = a / b:  da = g / b,  db = -(g / b) * c
                let q = &g / &vals[b];
                let db = &q * &vals[i];
                ops += 2;
                accumulate(&mut adj[a], q, &mut ops);
                accumulate_neg(&mut adj[b], db, &mut ops);
            }
            Node::Const(_) => {}
            Node::Var(_) => adj[i] = Some(g),
        }
    }

    let mut partials: BTreeMap<Symbol, Rational> =
        point.iter().map(|(s, _)| (s.clone(), Rational::zero())).collect();
    for (i, node) in nodes.iter().enumerate() {
        if let Node::Var(s) = node {
            partials.insert(s.clone(), adj[i].take().unwrap_or_else(Rational::zero));
        }
    }
    Ok(Gradient { value: vals[dag.root()].clone(), partials, ops })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::num::{rat, ratio};

    fn pt(pairs: &[(&str, i64)]) -> Assignment {
        pairs.iter().map(|&(s, v)| (s, rat(v))).collect()
    }

    #[test]
    fn verhulst_equilibrium() {
        let f = parse_expr("x*(a-b*x) - c*x", &["x", "a", "b", "c"]).unwrap();
        assert_eq!(evaluate(&f, &pt(&[("x", 1), ("a", 2), ("b", 1), ("c", 1)])).unwrap(), rat(0));
    }

    #[test]
    fn michaelis_menten_value_and_pole() {
        let f = parse_expr("k1*x/(k2+x)", &["x", "k1", "k2"]).unwrap();
        assert_eq!(evaluate(&f, &pt(&[("x", -2), ("k1", 10), ("k2", -2)])).unwrap(), rat(5));
        let err = evaluate(&f, &pt(&[("x", -2), ("k1", 10), ("k2", 2)])).unwrap_err();
        assert!(matches!(err, EvalError::DivisionByZero { .. }));
    }

    #[test]
    fn michaelis_menten_gradient() {
        // d/dx = k1 k2/(k2+x)^2, d/dk1 = x/(k2+x), d/dk2 = -k1 x/(k2+x)^2
        let f = parse_expr("k1*x/(k2+x)", &["x", "k1", "k2"]).unwrap();
        let g = gradient(&f, &pt(&[("x", -2), ("k1", 10), ("k2", -2)])).unwrap();
        assert_eq!(g.value, rat(5));
        assert_eq!(g.partial(&"x".into()), ratio(-5, 4));
        assert_eq!(g.partial(&"k1".into()), ratio(1, 2));
        assert_eq!(g.partial(&"k2".into()), ratio(5, 4));
    }

    #[test]
    fn constant_gradient_is_zero() {
        let f = parse_expr("7/3", &["x"]).unwrap();
        let g = gradient(&f, &pt(&[("x", 4)])).unwrap();
        assert_eq!(g.value, ratio(7, 3));
        assert_eq!(g.partial(&"x".into()), rat(0));
        assert_eq!(g.ops, 0);
    }

    #[test]
    fn fifth_power_gradient() {
        let f = parse_expr("(x+1)^5", &["x"]).unwrap();
        let g = gradient(&f, &pt(&[("x", 1)])).unwrap();
        assert_eq!(g.value, rat(32));
        assert_eq!(g.partial(&"x".into()), rat(80));
        assert!(g.ops <= 5 * f.len());
    }

    #[test]
    fn unbound_variable() {
        let f = parse_expr("x+y", &["x", "y"]).unwrap();
        assert_eq!(evaluate(&f, &pt(&[("x", 1)])), Err(EvalError::Unbound("y".into())));
    }
}
