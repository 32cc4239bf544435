use num_traits::{Signed, Zero};

use super::{ExprDag, Node};
use crate::num::fmt_rational;

const ADD: u8 = 1;
const MUL: u8 = 2;
const ATOM: u8 = 3;

fn prec(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => ADD,
        Node::Mul(..) | Node::Div(..) => MUL,
        _ => ATOM,
    }
}

fn wrap(s: String, parens: bool) -> String {
    if parens {
        format!("({s})")
    } else {
        s
    }
}

/// Tree rendering with minimal parentheses. Shared nodes are printed
/// once per use.
pub(super) fn infix(dag: &ExprDag) -> String {
    render(dag.nodes(), dag.root(), true)
}

fn render(nodes: &[Node], i: usize, top: bool) -> String {
    let side = |j: usize, op: u8, right_strict: bool| {
        let p = prec(&nodes[j]);
        let s = render(nodes, j, false);
        wrap(s, p < op || (right_strict && p == op))
    };
    // a negation opening a sum needs no parentheses
    let lead = |j: usize| match negated(nodes, j) {
        Some(k) => minus(nodes, k),
        None => side(j, ADD, false),
    };
    match &nodes[i] {
        Node::Const(c) => {
            let s = fmt_rational(c);
            wrap(s, !top && (c.is_negative() || !c.is_integer()))
        }
        Node::Var(s) => s.to_string(),
        Node::Add(a, b) => format!("{} + {}", lead(*a), side(*b, ADD, false)),
        Node::Sub(a, b) => match negated(nodes, i) {
            Some(j) => wrap(minus(nodes, j), !top),
            None => format!("{} - {}", lead(*a), side(*b, ADD, true)),
        },
        Node::Mul(..) => {
            let mut factors = Vec::new();
            collect_product(nodes, i, 1, &mut factors);
            let parts: Vec<String> = factors
                .into_iter()
                .map(|(j, k)| {
                    if k == 1 {
                        side(j, MUL, false)
                    } else {
                        let p = prec(&nodes[j]);
                        format!("{}^{k}", wrap(render(nodes, j, false), p < ATOM))
                    }
                })
                .collect();
            parts.join("*")
        }
        Node::Div(a, b) => format!("{}/{}", side(*a, MUL, false), side(*b, MUL, true)),
    }
}

fn negated(nodes: &[Node], i: usize) -> Option<usize> {
    match &nodes[i] {
        Node::Sub(a, b) if matches!(&nodes[*a], Node::Const(c) if c.is_zero()) => Some(*b),
        _ => None,
    }
}

fn minus(nodes: &[Node], j: usize) -> String {
    format!("-{}", wrap(render(nodes, j, false), prec(&nodes[j]) < MUL))
}

/// Flattens a product tree into (factor, multiplicity) pairs in first-seen
/// order. Squares are visited once with doubled weight.
fn collect_product(nodes: &[Node], i: usize, k: u64, out: &mut Vec<(usize, u64)>) {
    match nodes[i] {
        Node::Mul(a, b) if a == b => collect_product(nodes, a, 2 * k, out),
        Node::Mul(a, b) => {
            collect_product(nodes, a, k, out);
            collect_product(nodes, b, k, out);
        }
        _ => match out.iter_mut().find(|(j, _)| *j == i) {
            Some((_, m)) => *m += k,
            None => out.push((i, k)),
        },
    }
}
