//! Independent reference code for the integration tests: a plain
//! expression tree with its own evaluator and symbolic derivative, and a
//! generator of models with a planted scaling.
#![allow(dead_code)]

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

#[derive(Clone, Debug)]
pub enum Tree {
    Num(i64),
    Var(usize),
    Add(Box<Tree>, Box<Tree>),
    Sub(Box<Tree>, Box<Tree>),
    Mul(Box<Tree>, Box<Tree>),
    Div(Box<Tree>, Box<Tree>),
    Pow(Box<Tree>, u32),
}

use Tree::*;

fn bx(t: Tree) -> Box<Tree> {
    Box::new(t)
}

impl Tree {
    pub fn eval(&self, v: &[Q]) -> Option<Q> {
        Some(match self {
            Num(n) => q(*n),
            Var(i) => v[*i].clone(),
            Add(a, b) => a.eval(v)? + b.eval(v)?,
            Sub(a, b) => a.eval(v)? - b.eval(v)?,
            Mul(a, b) => a.eval(v)? * b.eval(v)?,
            Div(a, b) => {
                let d = b.eval(v)?;
                if d.is_zero() {
                    return None;
                }
                a.eval(v)? / d
            }
            Pow(a, k) => {
                let x = a.eval(v)?;
                (0..*k).fold(Q::one(), |acc, _| acc * &x)
            }
        })
    }

    /// Textbook differentiation rules, no simplification.
    pub fn diff(&self, x: usize) -> Tree {
        match self {
            Num(_) => Num(0),
            Var(i) => Num(if *i == x { 1 } else { 0 }),
            Add(a, b) => Add(bx(a.diff(x)), bx(b.diff(x))),
            Sub(a, b) => Sub(bx(a.diff(x)), bx(b.diff(x))),
            Mul(a, b) => Add(bx(Mul(bx(a.diff(x)), b.clone())), bx(Mul(a.clone(), bx(b.diff(x))))),
            Div(a, b) => Div(
                bx(Sub(bx(Mul(bx(a.diff(x)), b.clone())), bx(Mul(a.clone(), bx(b.diff(x)))))),
                bx(Pow(b.clone(), 2)),
            ),
            Pow(a, k) => {
                if *k == 0 {
                    Num(0)
                } else {
                    Mul(bx(Mul(bx(Num(*k as i64)), bx(Pow(a.clone(), k - 1)))), bx(a.diff(x)))
                }
            }
        }
    }

    /// Fully parenthesized text.
    pub fn text(&self, names: &[&str]) -> String {
        match self {
            Num(n) => format!("({n})"),
            Var(i) => names[*i].to_string(),
            Add(a, b) => format!("({} + {})", a.text(names), b.text(names)),
            Sub(a, b) => format!("({} - {})", a.text(names), b.text(names)),
            Mul(a, b) => format!("({} * {})", a.text(names), b.text(names)),
            Div(a, b) => format!("({} / {})", a.text(names), b.text(names)),
            Pow(a, k) => format!("({}^{k})", a.text(names)),
        }
    }

    /// Same value, different shape: operands of + and * swapped and
    /// powers written as products.
    pub fn rewritten(&self) -> Tree {
        match self {
            Num(n) => Num(*n),
            Var(i) => Var(*i),
            Add(a, b) => Add(bx(b.rewritten()), bx(a.rewritten())),
            Sub(a, b) => Add(bx(a.rewritten()), bx(Mul(bx(Num(-1)), bx(b.rewritten())))),
            Mul(a, b) => Mul(bx(b.rewritten()), bx(a.rewritten())),
            Div(a, b) => Mul(bx(a.rewritten()), bx(Div(bx(Num(1)), bx(b.rewritten())))),
            Pow(a, k) => {
                let base = a.rewritten();
                (0..*k).fold(Num(1), |acc, _| Mul(bx(acc), bx(base.clone())))
            }
        }
    }
}

pub fn random_tree<R: Rng>(rng: &mut R, vars: usize, depth: u32) -> Tree {
    if depth == 0 || rng.random_range(0..4) == 0 {
        return if rng.random_bool(0.7) { Var(rng.random_range(0..vars)) } else { Num(rng.random_range(-5..=5)) };
    }
    let a = bx(random_tree(rng, vars, depth - 1));
    match rng.random_range(0..6) {
        0 | 1 => Add(a, bx(random_tree(rng, vars, depth - 1))),
        2 => Sub(a, bx(random_tree(rng, vars, depth - 1))),
        3 | 4 => Mul(a, bx(random_tree(rng, vars, depth - 1))),
        _ => {
            if rng.random_bool(0.5) {
                Div(a, bx(random_tree(rng, vars, depth - 1)))
            } else {
                Pow(a, rng.random_range(2..=3))
            }
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A model whose right-hand sides are sums of Laurent monomials that all
/// have the weight required by a planted scaling. Coordinates are
/// t, x1..xn, p1..pl; p1 has weight 1 and absorbs the mismatch of each
/// term.
pub struct Planted {
    pub text: String,
    pub weights: Vec<i64>,
    pub n: usize,
    pub l: usize,
}

pub fn planted_model<R: Rng>(rng: &mut R, n: usize, l: usize) -> Planted {
    let names: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .chain((1..=l).map(|i| format!("p{i}")))
        .collect();
    let dim = 1 + n + l;
    let mut w: Vec<i64> = (0..dim).map(|_| rng.random_range(-2..=2)).collect();
    w[1 + n] = 1;
    let mut eqs = Vec::new();
    for i in 0..n {
        let target = w[1 + i] - w[0];
        let terms = rng.random_range(1..=3);
        let mut parts = Vec::new();
        for _ in 0..terms {
            let mut e = vec![0i64; dim];
            for (y, ey) in e.iter_mut().enumerate().skip(1) {
                if y != 1 + n && rng.random_range(0..3) == 0 {
                    *ey = rng.random_range(-1..=2);
                }
            }
            let weight: i64 = e.iter().zip(&w).map(|(a, b)| a * b).sum();
            e[1 + n] = target - weight;
            let c = rng.random_range(1..=4) * if rng.random_bool(0.5) { 1 } else { -1 };
            let mut s = format!("{c}");
            for (y, &k) in e.iter().enumerate() {
                if k != 0 {
                    s.push_str(&format!("*{}^({k})", names[y]).replace("^(1)", ""));
                }
            }
            parts.push(s);
        }
        eqs.push(format!("d/dt {} = {};", names[1 + i], parts.join(" + ")));
    }
    let text = format!(
        "model planted;\nstate {};\nparam {};\n{}\n",
        names[1..=n].join(", "),
        names[1 + n..].join(", "),
        eqs.join("\n")
    );
    Planted { text, weights: w, n, l }
}

/// Exponent vectors of the monomials of each right-hand side, for
/// polynomial-like text produced by [`planted_model`].
pub fn weights_map(names: &[String], w: &[i64]) -> BTreeMap<String, i64> {
    names.iter().cloned().zip(w.iter().copied()).collect()
}
