//! Exact rational helpers shared by every module.

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;
pub type Integer = BigInt;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `"-3"` or `"21/5"`.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                None
            } else {
                Some(Rational::new(n, d))
            }
        }
        None => s.parse::<BigInt>().ok().map(Rational::from_integer),
    }
}

pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Scales a rational vector to a primitive integer vector whose first
/// nonzero entry is positive. The zero vector maps to zeros.
pub fn primitive_integer_vector(v: &[Rational]) -> Vec<Integer> {
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let mut ints: Vec<BigInt> = v
        .iter()
        .map(|x| (x * Rational::from_integer(lcm.clone())).to_integer())
        .collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if g.is_zero() {
        return ints;
    }
    let flip = ints
        .iter()
        .find(|x| !x.is_zero())
        .map(|x| x.is_negative())
        .unwrap_or(false);
    for x in ints.iter_mut() {
        *x = &*x / &g;
        if flip {
            *x = -&*x;
        }
    }
    ints
}

pub fn to_rational_vector(v: &[Integer]) -> Vec<Rational> {
    v.iter().cloned().map(Rational::from_integer).collect()
}

/// Exact `q`-th root of an integer, if one exists. Negative inputs only
/// have roots for odd `q`.
pub fn exact_root(n: &BigInt, q: u32) -> Option<BigInt> {
    if q == 1 {
        return Some(n.clone());
    }
    if n.is_negative() {
        if q.is_multiple_of(2) {
            return None;
        }
        return exact_root(&-n, q).map(|r| -r);
    }
    let r = n.nth_root(q);
    if num_traits::pow(r.clone(), q as usize) == *n {
        Some(r)
    } else {
        None
    }
}

/// `base^exp` for a rational exponent, when the result is rational.
pub fn rational_pow(base: &Rational, exp: &Rational) -> Option<Rational> {
    if exp.is_zero() {
        return Some(Rational::one());
    }
    if base.is_zero() {
        return if exp.is_positive() { Some(Rational::zero()) } else { None };
    }
    let q = exp.denom().to_u32()?;
    let p = exp.numer().to_i64()?;
    let root = Rational::new(exact_root(base.numer(), q)?, exact_root(base.denom(), q)?);
    Some(pow_i64(&root, p))
}

pub fn pow_i64(base: &Rational, p: i64) -> Rational {
    let mag = num_traits::pow(base.clone(), p.unsigned_abs() as usize);
    if p < 0 {
        mag.recip()
    } else {
        mag
    }
}
