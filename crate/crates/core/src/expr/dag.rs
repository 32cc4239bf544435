use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Zero};

use super::Symbol;
use crate::num::Rational;

/// One instruction of a straight-line program. Operands always refer to
/// strictly earlier nodes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Const(Rational),
    Var(Symbol),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
}

impl Node {
    pub fn is_arithmetic(&self) -> bool {
        !matches!(self, Node::Const(_) | Node::Var(_))
    }

    pub fn operands(&self) -> Option<(usize, usize)> {
        match *self {
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => Some((a, b)),
            _ => None,
        }
    }
}

/// Immutable, hash-consed rational expression.
///
/// The node list holds exactly the ancestors of `root`, in topological
/// order, so `len()` is the straight-line program length.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExprDag {
    nodes: Arc<[Node]>,
    root: usize,
}

impl ExprDag {
    pub fn constant(c: Rational) -> Self {
        let mut b = DagBuilder::new();
        let r = b.constant(c);
        b.finish(r)
    }

    pub fn var(s: impl Into<Symbol>) -> Self {
        let mut b = DagBuilder::new();
        let r = b.var(s.into());
        b.finish(r)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Number of arithmetic operations.
    pub fn len(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_arithmetic()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total node count, including constants and variables.
    pub fn size(&self) -> usize {
        self.nodes.len()
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Var(s) => Some(s.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn as_constant(&self) -> Option<&Rational> {
        match &self.nodes[self.root] {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_var(&self) -> Option<&Symbol> {
        match &self.nodes[self.root] {
            Node::Var(s) => Some(s),
            _ => None,
        }
    }

    /// Infix text accepted by the expression parser.
    pub fn to_infix(&self) -> String {
        super::render::infix(self)
    }
}

impl fmt::Display for ExprDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix())
    }
}

impl fmt::Debug for ExprDag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExprDag(L={}, {})", self.len(), self.to_infix())
    }
}

/// Append-only arena with structural sharing. Constant-only operations
/// are folded, as are the identities x+0, x-0, x*1 and x/1.
#[derive(Default)]
pub struct DagBuilder {
    nodes: Vec<Node>,
    index: HashMap<Node, usize>,
}

impl DagBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, node: Node) -> usize {
        if let Some(&i) = self.index.get(&node) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(node.clone());
        self.index.insert(node, i);
        i
    }

    pub fn node(&self, i: usize) -> &Node {
        &self.nodes[i]
    }

    fn const_of(&self, i: usize) -> Option<&Rational> {
        match &self.nodes[i] {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn constant(&mut self, c: Rational) -> usize {
        self.intern(Node::Const(c))
    }

    pub fn int(&mut self, n: i64) -> usize {
        self.constant(Rational::from_integer(n.into()))
    }

    pub fn var(&mut self, s: Symbol) -> usize {
        self.intern(Node::Var(s))
    }

    pub fn add(&mut self, a: usize, b: usize) -> usize {
        match (self.const_of(a), self.const_of(b)) {
            (Some(x), Some(y)) => {
                let c = x + y;
                self.constant(c)
            }
            (Some(x), _) if x.is_zero() => b,
            (_, Some(y)) if y.is_zero() => a,
            _ => self.intern(Node::Add(a.min(b), a.max(b))),
        }
    }

    pub fn sub(&mut self, a: usize, b: usize) -> usize {
        match (self.const_of(a), self.const_of(b)) {
            (Some(x), Some(y)) => {
                let c = x - y;
                self.constant(c)
            }
            (_, Some(y)) if y.is_zero() => a,
            _ => self.intern(Node::Sub(a, b)),
        }
    }

    pub fn mul(&mut self, a: usize, b: usize) -> usize {
        match (self.const_of(a), self.const_of(b)) {
            (Some(x), Some(y)) => {
                let c = x * y;
                self.constant(c)
            }
            (Some(x), _) if x.is_one() => b,
            (_, Some(y)) if y.is_one() => a,
            _ => self.intern(Node::Mul(a.min(b), a.max(b))),
        }
    }

    /// Division by a literal zero is kept as a node so that evaluation
    /// reports it.
    pub fn div(&mut self, a: usize, b: usize) -> usize {
        match (self.const_of(a), self.const_of(b)) {
            (Some(x), Some(y)) if !y.is_zero() => {
                let c = x / y;
                self.constant(c)
            }
            (_, Some(y)) if y.is_one() => a,
            _ => self.intern(Node::Div(a, b)),
        }
    }

    pub fn neg(&mut self, a: usize) -> usize {
        if let Some(x) = self.const_of(a) {
            let c = -x;
            return self.constant(c);
        }
        let z = self.int(0);
        self.sub(z, a)
    }

    /// Integer power by left-to-right binary powering; negative exponents
    /// become a reciprocal.
    pub fn powi(&mut self, a: usize, k: i64) -> usize {
        if k == 0 {
            return self.int(1);
        }
        if k < 0 {
            let p = self.powi(a, -k);
            let one = self.int(1);
            return self.div(one, p);
        }
        let k = k as u64;
        let top = 63 - k.leading_zeros();
        let mut r = a;
        for bit in (0..top).rev() {
            r = self.mul(r, r);
            if (k >> bit) & 1 == 1 {
                r = self.mul(r, a);
            }
        }
        r
    }

    /// Copies `dag` into this arena. Variables for which `map` returns an
    /// index are replaced by that node.
    pub fn import(&mut self, dag: &ExprDag, mut map: impl FnMut(&mut Self, &Symbol) -> Option<usize>) -> usize {
        let mut remap = Vec::with_capacity(dag.size());
        for node in dag.nodes() {
            let i = match node {
                Node::Const(c) => self.constant(c.clone()),
                Node::Var(s) => match map(self, s) {
                    Some(i) => i,
                    None => self.var(s.clone()),
                },
                Node::Add(a, b) => self.add(remap[*a], remap[*b]),
                Node::Sub(a, b) => self.sub(remap[*a], remap[*b]),
                Node::Mul(a, b) => self.mul(remap[*a], remap[*b]),
                Node::Div(a, b) => self.div(remap[*a], remap[*b]),
            };
            remap.push(i);
        }
        remap[dag.root()]
    }

    /// Extracts the sub-program reachable from `root`.
    pub fn finish(&self, root: usize) -> ExprDag {
        let mut live = vec![false; root + 1];
        live[root] = true;
        for i in (0..=root).rev() {
            if live[i] {
                if let Some((a, b)) = self.nodes[i].operands() {
                    live[a] = true;
                    live[b] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; root + 1];
        let mut out = Vec::new();
        for i in 0..=root {
            if !live[i] {
                continue;
            }
            let n = match &self.nodes[i] {
                Node::Add(a, b) => Node::Add(remap[*a], remap[*b]),
                Node::Sub(a, b) => Node::Sub(remap[*a], remap[*b]),
                Node::Mul(a, b) => Node::Mul(remap[*a], remap[*b]),
                Node::Div(a, b) => Node::Div(remap[*a], remap[*b]),
                other => other.clone(),
            };
            remap[i] = out.len();
            out.push(n);
        }
        ExprDag { nodes: out.into(), root: remap[root] }
    }
}
