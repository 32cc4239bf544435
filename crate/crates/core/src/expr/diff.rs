use super::{DagBuilder, ExprDag, Node, Symbol};

/// Symbolic derivative with respect to `var`, built by forward
/// propagation of derivative nodes.
pub fn derivative(dag: &ExprDag, var: &Symbol) -> ExprDag {
    let mut b = DagBuilder::new();
    let mut val = Vec::with_capacity(dag.size());
    let mut der: Vec<Option<usize>> = Vec::with_capacity(dag.size());
    for node in dag.nodes() {
        let (v, d) = match node {
            Node::Const(c) => (b.constant(c.clone()), None),
            Node::Var(s) => {
                let v = b.var(s.clone());
                (v, (s == var).then(|| b.int(1)))
            }
            Node::Add(x, y) | Node::Sub(x, y) => {
                let is_add = matches!(node, Node::Add(..));
                let v = if is_add { b.add(val[*x], val[*y]) } else { b.sub(val[*x], val[*y]) };
                let d = match (der[*x], der[*y]) {
                    (None, None) => None,
                    (Some(dx), None) => Some(dx),
                    (None, Some(dy)) => Some(if is_add { dy } else { b.neg(dy) }),
                    (Some(dx), Some(dy)) => Some(if is_add { b.add(dx, dy) } else { b.sub(dx, dy) }),
                };
                (v, d)
            }
            Node::Mul(x, y) => {
                let v = b.mul(val[*x], val[*y]);
                let t1 = der[*x].map(|dx| b.mul(dx, val[*y]));
                let t2 = der[*y].map(|dy| b.mul(val[*x], dy));
                let d = match (t1, t2) {
                    (Some(p), Some(q)) => Some(b.add(p, q)),
                    (p, q) => p.or(q),
                };
                (v, d)
            }
            Node::Div(x, y) => {
                let v = b.div(val[*x], val[*y]);
                // (dx - v*dy) / y
                let num = match (der[*x], der[*y]) {
                    (None, None) => None,
                    (Some(dx), None) => Some(dx),
                    (dx, Some(dy)) => {
                        let t = b.mul(v, dy);
                        Some(match dx {
                            Some(dx) => b.sub(dx, t),
                            None => b.neg(t),
                        })
                    }
                };
                (v, num.map(|n| b.div(n, val[*y])))
            }
        };
        val.push(v);
        der.push(d);
    }
    match der[dag.root()] {
        Some(d) => b.finish(d),
        None => ExprDag::constant(num_traits::Zero::zero()),
    }
}
