use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use super::eval::{evaluate_in, EvalError, SlpAlgebra};
use super::{Assignment, DagBuilder, ExprDag, Symbol};
use crate::num::{fmt_rational, Rational};

/// Default bound on DAG nodes and on polynomial terms during expansion.
pub const DEFAULT_SIZE_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormalizeError {
    #[error("expression too large to normalize (limit {limit})")]
    TooLarge { limit: usize },
    #[error("division by the zero rational function")]
    DivisionByZero,
    #[error("no value bound for `{0}`")]
    Unbound(Symbol),
}

impl From<EvalError> for NormalizeError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::DivisionByZero { .. } => NormalizeError::DivisionByZero,
            EvalError::Unbound(s) => NormalizeError::Unbound(s),
        }
    }
}

/// Power product of symbols, stored sorted by symbol with positive
/// exponents. Ordered by total degree, then lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Symbol, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(s: Symbol, k: u32) -> Self {
        if k == 0 {
            Monomial::one()
        } else {
            Monomial(vec![(s, k)])
        }
    }

    pub fn factors(&self) -> &[(Symbol, u32)] {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, k)| k).sum()
    }

    pub fn exponent(&self, s: &Symbol) -> u32 {
        self.0.iter().find(|(v, _)| v == s).map(|(_, k)| *k).unwrap_or(0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out: Vec<(Symbol, u32)> = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    /// Splits off the power of `s`.
    fn split(&self, s: &Symbol) -> (u32, Monomial) {
        let mut k = 0;
        let rest = self
            .0
            .iter()
            .filter(|(v, e)| {
                if v == s {
                    k = *e;
                    false
                } else {
                    true
                }
            })
            .cloned()
            .collect();
        (k, Monomial(rest))
    }

    fn gcd(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|(s, k)| {
                    let e = (*k).min(other.exponent(s));
                    (e > 0).then(|| (s.clone(), e))
                })
                .collect(),
        )
    }

    fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::new();
        for (s, k) in &self.0 {
            let e = other.exponent(s);
            match k.cmp(&e) {
                Ordering::Less => return None,
                Ordering::Equal => {}
                Ordering::Greater => out.push((s.clone(), k - e)),
            }
        }
        if other.0.iter().any(|(s, _)| self.exponent(s) == 0) {
            return None;
        }
        Some(Monomial(out))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            for (a, b) in self.0.iter().zip(&other.0) {
                if a.0 != b.0 {
                    // the earlier symbol is the larger variable
                    return b.0.cmp(&a.0);
                }
                if a.1 != b.1 {
                    return a.1.cmp(&b.1);
                }
            }
            self.0.len().cmp(&other.0.len())
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|(s, k)| if *k == 1 { s.to_string() } else { format!("{s}^{k}") })
            .collect();
        f.write_str(&parts.join("*"))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Sparse multivariate polynomial over ℚ.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn var(s: Symbol) -> Self {
        Self::term(Monomial::var(s, 1), Rational::one())
    }

    pub fn term(m: Monomial, c: Rational) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Poly { terms }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = Poly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    /// Terms in increasing monomial order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    /// Greatest term in the monomial order.
    pub fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        self.terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(s, _)| s.clone()))
            .collect()
    }

    pub fn degree_in(&self, s: &Symbol) -> u32 {
        self.terms.keys().map(|m| m.exponent(s)).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly { terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect() }
    }

    pub fn evaluate(&self, point: &Assignment) -> Result<Rational, Symbol> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (s, k) in m.factors() {
                let v = point.get(s).ok_or_else(|| s.clone())?;
                t *= num_traits::pow(v.clone(), *k as usize);
            }
            acc += t;
        }
        Ok(acc)
    }

    /// Coefficients with respect to `s`, keyed by exponent.
    fn coeffs_in(&self, s: &Symbol) -> BTreeMap<u32, Poly> {
        let mut out: BTreeMap<u32, Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let (k, rest) = m.split(s);
            out.entry(k).or_default().add_term(rest, c.clone());
        }
        out
    }

    fn lc_in(&self, s: &Symbol) -> (u32, Poly) {
        self.coeffs_in(s).into_iter().next_back().unwrap_or((0, Poly::zero()))
    }

    /// `self = factor * prim` with `prim` integer-primitive and a positive
    /// leading coefficient.
    pub fn integer_primitive(&self) -> (Rational, Poly) {
        if self.is_zero() {
            return (Rational::one(), Poly::zero());
        }
        let lcm = self.terms.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let g = self
            .terms
            .values()
            .fold(BigInt::zero(), |acc, c| acc.gcd(&(c.numer() * (&lcm / c.denom()))));
        let mut factor = Rational::new(g, lcm);
        if self.leading().is_some_and(|(_, c)| c.is_negative()) {
            factor = -factor;
        }
        let inv = factor.recip();
        (factor, self.scale(&inv))
    }

    pub fn primitive(&self) -> Poly {
        self.integer_primitive().1
    }

    /// Exact quotient, or `None` when `d` does not divide `self`.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&c.recip()));
        }
        if d.len() == 1 {
            let (m, c) = d.leading().expect("nonzero");
            let inv = c.recip();
            let mut out = Poly::zero();
            for (n, v) in &self.terms {
                out.terms.insert(n.div(m)?, v * &inv);
            }
            return Some(out);
        }
        let x = d.variables().into_iter().next().expect("nonconstant");
        let (dd, lcd) = d.lc_in(&x);
        let mut r = self.clone();
        let mut q = Poly::zero();
        while !r.is_zero() {
            let (n, lcr) = r.lc_in(&x);
            if n < dd {
                return None;
            }
            let c = lcr.exact_div(&lcd)?;
            let t = &c * &Poly::term(Monomial::var(x.clone(), n - dd), Rational::one());
            r = &r - &(&t * d);
            q = &q + &t;
        }
        Some(q)
    }

    /// Gcd over ℚ of the coefficients with respect to `x`.
    fn content_in(&self, x: &Symbol) -> Poly {
        let mut g = Poly::zero();
        for c in self.coeffs_in(x).values() {
            g = Poly::gcd(&g, c);
            if g.as_constant().is_some() && !g.is_zero() {
                return Poly::one();
            }
        }
        g
    }

    /// Pseudo-remainder of `a` by `b` in `x`.
    fn prem(a: &Poly, b: &Poly, x: &Symbol) -> Poly {
        let (db, lcb) = b.lc_in(x);
        let mut r = a.clone();
        loop {
            let (n, lcr) = r.lc_in(x);
            if r.is_zero() || n < db {
                return r;
            }
            let shift = &lcr * &Poly::term(Monomial::var(x.clone(), n - db), Rational::one());
            r = &(&lcb * &r) - &(&shift * b);
        }
    }

    /// Greatest common divisor, integer-primitive with positive leading
    /// coefficient. Recursive primitive remainder sequences.
    pub fn gcd(a: &Poly, b: &Poly) -> Poly {
        if a.is_zero() {
            return b.primitive();
        }
        if b.is_zero() {
            return a.primitive();
        }
        if a.as_constant().is_some() || b.as_constant().is_some() {
            return Poly::one();
        }
        if a.len() == 1 || b.len() == 1 {
            let (single, other) = if a.len() == 1 { (a, b) } else { (b, a) };
            let m = other
                .terms
                .keys()
                .fold(single.leading().expect("nonzero").0.clone(), |g, n| g.gcd(n));
            return Poly::term(m, Rational::one());
        }
        let vars: BTreeSet<Symbol> = a.variables().union(&b.variables()).cloned().collect();
        let x = vars.into_iter().next().expect("nonconstant");
        let ca = a.content_in(&x);
        let cb = b.content_in(&x);
        let c = Poly::gcd(&ca, &cb);
        if a.degree_in(&x) == 0 || b.degree_in(&x) == 0 {
            return c;
        }
        let mut p = a.exact_div(&ca).expect("content divides");
        let mut q = b.exact_div(&cb).expect("content divides");
        if p.degree_in(&x) < q.degree_in(&x) {
            std::mem::swap(&mut p, &mut q);
        }
        loop {
            let r = Poly::prem(&p, &q, &x);
            if r.is_zero() {
                break;
            }
            if r.degree_in(&x) == 0 {
                return c;
            }
            p = q;
            q = r.exact_div(&r.content_in(&x)).expect("content divides");
        }
        let g = q.exact_div(&q.content_in(&x)).expect("content divides");
        (&c * &g).primitive()
    }

    pub fn to_dag(&self) -> ExprDag {
        let mut b = DagBuilder::new();
        let r = self.build(&mut b);
        b.finish(r)
    }

    fn build(&self, b: &mut DagBuilder) -> usize {
        // open with a positive term when there is one
        let first = self.terms.iter().position(|(_, c)| c.is_positive()).unwrap_or(0);
        let order = self.terms.iter().skip(first).take(1).chain(self.terms.iter().take(first)).chain(self.terms.iter().skip(first + 1));
        let mut acc: Option<usize> = None;
        for (m, c) in order {
            let mut t = b.constant(c.abs());
            for (s, k) in m.factors() {
                let v = b.var(s.clone());
                let p = b.powi(v, *k as i64);
                t = b.mul(t, p);
            }
            acc = Some(match (acc, c.is_negative()) {
                (None, false) => t,
                (None, true) => b.neg(t),
                (Some(a), false) => b.add(a, t),
                (Some(a), true) => b.sub(a, t),
            });
        }
        acc.unwrap_or_else(|| b.int(0))
    }
}

impl std::ops::Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl std::ops::Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

impl std::ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if let Some(c) = self.as_constant() {
            return rhs.scale(&c);
        }
        if let Some(c) = rhs.as_constant() {
            return self.scale(&c);
        }
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            for (n, d) in &rhs.terms {
                out.add_term(m.mul(n), c * d);
            }
        }
        out
    }
}

impl std::ops::Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly { terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect() }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        for (i, (m, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() { "-" } else { "+" };
            match (i, sign) {
                (0, "-") => f.write_str("-")?,
                (0, _) => {}
                _ => write!(f, " {sign} ")?,
            }
            let a = c.abs();
            if m.is_one() {
                f.write_str(&fmt_rational(&a))?;
            } else if a.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", fmt_rational(&a))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Reduced fraction of polynomials. The denominator is integer-primitive
/// with a positive leading coefficient, and shares no factor with the
/// numerator, so equal rational functions have equal representations.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
}

impl RationalFunction {
    pub fn new(num: Poly, den: Poly) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        if num.is_zero() {
            return Some(RationalFunction { num, den: Poly::one() });
        }
        let (num, den) = if den.as_constant().is_some() {
            (num, den)
        } else {
            let g = Poly::gcd(&num, &den);
            if g.is_one() {
                (num, den)
            } else {
                (num.exact_div(&g).expect("gcd divides"), den.exact_div(&g).expect("gcd divides"))
            }
        };
        let (f, den) = den.integer_primitive();
        Some(RationalFunction { num: num.scale(&f.recip()), den })
    }

    pub fn from_poly(p: Poly) -> Self {
        RationalFunction { num: p, den: Poly::one() }
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn variables(&self) -> BTreeSet<Symbol> {
        let mut v = self.num.variables();
        v.extend(self.den.variables());
        v
    }

    pub fn to_dag(&self) -> ExprDag {
        let mut b = DagBuilder::new();
        let n = self.num.build(&mut b);
        let d = self.den.build(&mut b);
        let r = b.div(n, d);
        b.finish(r)
    }

    fn add(&self, other: &Self) -> Self {
        if self.den == other.den {
            return Self::new(&self.num + &other.num, self.den.clone()).expect("nonzero");
        }
        let n = &(&self.num * &other.den) + &(&other.num * &self.den);
        Self::new(n, &self.den * &other.den).expect("nonzero")
    }

    fn neg(&self) -> Self {
        RationalFunction { num: -&self.num, den: self.den.clone() }
    }

    fn mul(&self, other: &Self) -> Self {
        Self::new(&self.num * &other.num, &self.den * &other.den).expect("nonzero")
    }

    fn recip(&self) -> Option<Self> {
        Self::new(self.den.clone(), self.num.clone())
    }

    fn size(&self) -> usize {
        self.num.len() + self.den.len()
    }
}

fn needs_parens(p: &Poly) -> bool {
    p.len() > 1
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        if needs_parens(&self.num) {
            write!(f, "({})", self.num)?;
        } else {
            write!(f, "{}", self.num)?;
        }
        let simple_den = self.den.len() == 1 && self.den.leading().is_some_and(|(m, c)| c.is_one() && m.factors().len() == 1);
        if simple_den {
            write!(f, "/{}", self.den)
        } else {
            write!(f, "/({})", self.den)
        }
    }
}

struct FractionField {
    limit: usize,
}

impl FractionField {
    fn check(&self, r: RationalFunction) -> Result<RationalFunction, NormalizeError> {
        if r.size() > self.limit {
            Err(NormalizeError::TooLarge { limit: self.limit })
        } else {
            Ok(r)
        }
    }
}

impl SlpAlgebra for FractionField {
    type Value = RationalFunction;
    type Error = NormalizeError;

    fn constant(&self, c: &Rational) -> Result<RationalFunction, NormalizeError> {
        Ok(RationalFunction::from_poly(Poly::constant(c.clone())))
    }
    fn add(&self, a: &RationalFunction, b: &RationalFunction) -> Result<RationalFunction, NormalizeError> {
        self.check(a.add(b))
    }
    fn sub(&self, a: &RationalFunction, b: &RationalFunction) -> Result<RationalFunction, NormalizeError> {
        self.check(a.add(&b.neg()))
    }
    fn mul(&self, a: &RationalFunction, b: &RationalFunction) -> Result<RationalFunction, NormalizeError> {
        self.check(a.mul(b))
    }
    fn div(&self, a: &RationalFunction, b: &RationalFunction) -> Result<Option<RationalFunction>, NormalizeError> {
        match b.recip() {
            None => Ok(None),
            Some(inv) => self.check(a.mul(&inv)).map(Some),
        }
    }
}

/// Expands `dag` into its canonical reduced fraction.
pub fn normalize(dag: &ExprDag) -> Result<RationalFunction, NormalizeError> {
    normalize_with_limit(dag, DEFAULT_SIZE_LIMIT)
}

/// As [`normalize`], failing once the DAG or any intermediate fraction
/// exceeds `limit` nodes or terms.
pub fn normalize_with_limit(dag: &ExprDag, limit: usize) -> Result<RationalFunction, NormalizeError> {
    if dag.size() > limit {
        return Err(NormalizeError::TooLarge { limit });
    }
    evaluate_in(dag, &FractionField { limit }, |s| {
        Ok(RationalFunction::from_poly(Poly::var(s.clone())))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn nf(text: &str, syms: &[&str]) -> RationalFunction {
        normalize(&parse_expr(text, syms).unwrap()).unwrap()
    }

    #[test]
    fn polynomial_input() {
        let r = nf("x*(a-b*x) - c*x", &["x", "a", "b", "c"]);
        assert!(r.den().is_one());
        assert_eq!(r, nf("a*x - b*x^2 - c*x", &["x", "a", "b", "c"]));
        assert_eq!(r.num().len(), 3);
    }

    #[test]
    fn common_factor_cancels() {
        let r = nf("(x^2-1)/(x-1)", &["x"]);
        assert_eq!(r.to_string(), "1 + x");
        assert!(r.den().is_one());
    }

    #[test]
    fn logistic_forms_agree() {
        assert_eq!(nf("x*(1-x)", &["x"]), nf("x - x^2", &["x"]));
        assert_eq!(nf("x*(1-x)", &["x"]).to_string(), "x - x^2");
    }

    #[test]
    fn multivariate_gcd() {
        let r = nf("((a+b)*(a-c)*x)/((a-c)*(x+b)*(a+b)^2)", &["a", "b", "c", "x"]);
        assert_eq!(r, nf("x/((a+b)*(x+b))", &["a", "b", "c", "x"]));
        assert_eq!(r.den().len(), 4);
    }

    #[test]
    fn denominator_sign_and_content() {
        let r = nf("x/(-2*y - 4)", &["x", "y"]);
        assert_eq!(r.to_string(), "-1/2*x/(2 + y)");
        let again = nf(&r.to_string(), &["x", "y"]);
        assert_eq!(r, again);
    }

    #[test]
    fn division_by_zero_function() {
        let d = parse_expr("1/(x-x)", &["x"]).unwrap();
        assert_eq!(normalize(&d), Err(NormalizeError::DivisionByZero));
    }

    #[test]
    fn size_limit() {
        let d = parse_expr("(a+b+c+d)^12", &["a", "b", "c", "d"]).unwrap();
        assert!(matches!(normalize_with_limit(&d, 50), Err(NormalizeError::TooLarge { .. })));
    }

    #[test]
    fn to_dag_round_trip() {
        let r = nf("k1*x/(k2+x) - 3/7*x^2", &["x", "k1", "k2"]);
        assert_eq!(normalize(&r.to_dag()).unwrap(), r);
    }
}
