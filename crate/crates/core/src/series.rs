//! Truncated Taylor expansions of solutions and of their sensitivities
//! to the initial point, and the jet-order symmetry conditions built
//! from them.

use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::expr::{evaluate_in, Assignment, EvalError, SlpAlgebra, Symbol};
use crate::linalg::Matrix;
use crate::num::Rational;
use crate::odesys::Model;
use crate::symfind::{canonical_kernel, Generator, Kind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("series division by a series with zero constant term")]
    ZeroConstantTerm,
    #[error("no value bound for `{0}`")]
    Unbound(Symbol),
    #[error("jet order {wanted} needs series order {needed}, have {have}")]
    OrderTooLow { wanted: usize, needed: usize, have: usize },
}

impl From<EvalError> for SeriesError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::DivisionByZero { .. } => SeriesError::ZeroConstantTerm,
            EvalError::Unbound(s) => SeriesError::Unbound(s),
        }
    }
}

/// Dense power series c0 + c1 t + ... + ck t^k, truncated at order k.
#[derive(Clone, PartialEq, Eq)]
pub struct Series(Vec<Rational>);

impl Series {
    pub fn zero(order: usize) -> Self {
        Series(vec![Rational::zero(); order + 1])
    }

    pub fn constant(c: Rational, order: usize) -> Self {
        let mut s = Series::zero(order);
        s.0[0] = c;
        s
    }

    pub fn from_coeffs(c: Vec<Rational>) -> Self {
        assert!(!c.is_empty());
        Series(c)
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.0
    }

    pub fn coeff(&self, j: usize) -> &Rational {
        &self.0[j]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn add(&self, o: &Series) -> Series {
        Series(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, o: &Series) -> Series {
        Series(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    pub fn mul(&self, o: &Series) -> Series {
        let k = self.order();
        let mut out = Series::zero(k);
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0[..=k - i].iter().enumerate() {
                if !b.is_zero() {
                    out.0[i + j] += a * b;
                }
            }
        }
        out
    }

    /// Quotient, defined when `d` has a nonzero constant term.
    pub fn div(&self, d: &Series) -> Option<Series> {
        if d.0[0].is_zero() {
            return None;
        }
        let inv = d.0[0].recip();
        let mut q: Vec<Rational> = Vec::with_capacity(self.0.len());
        for j in 0..self.0.len() {
            let mut acc = self.0[j].clone();
            for i in 1..=j {
                if !d.0[i].is_zero() {
                    acc -= &d.0[i] * &q[j - i];
                }
            }
            q.push(acc * &inv);
        }
        Some(Series(q))
    }

    /// Term-by-term derivative; the top coefficient is lost.
    pub fn derivative(&self) -> Vec<Rational> {
        self.0.iter().enumerate().skip(1).map(|(j, c)| c * Rational::from_integer(j.into())).collect()
    }
}

impl fmt::Debug for Series {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(crate::num::fmt_rational).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// A series together with its derivatives along a fixed set of
/// directions.
#[derive(Clone, Debug)]
struct Jet {
    v: Series,
    d: Vec<Series>,
}

struct JetAlgebra {
    order: usize,
    dirs: usize,
}

impl SlpAlgebra for JetAlgebra {
    type Value = Jet;
    type Error = SeriesError;

    fn constant(&self, c: &Rational) -> Result<Jet, SeriesError> {
        Ok(Jet { v: Series::constant(c.clone(), self.order), d: vec![Series::zero(self.order); self.dirs] })
    }
    fn add(&self, a: &Jet, b: &Jet) -> Result<Jet, SeriesError> {
        Ok(Jet { v: a.v.add(&b.v), d: a.d.iter().zip(&b.d).map(|(x, y)| x.add(y)).collect() })
    }
    fn sub(&self, a: &Jet, b: &Jet) -> Result<Jet, SeriesError> {
        Ok(Jet { v: a.v.sub(&b.v), d: a.d.iter().zip(&b.d).map(|(x, y)| x.sub(y)).collect() })
    }
    fn mul(&self, a: &Jet, b: &Jet) -> Result<Jet, SeriesError> {
        let d = a
            .d
            .iter()
            .zip(&b.d)
            .map(|(da, db)| {
                let x = if da.is_zero() { Series::zero(self.order) } else { da.mul(&b.v) };
                if db.is_zero() {
                    x
                } else {
                    x.add(&a.v.mul(db))
                }
            })
            .collect();
        Ok(Jet { v: a.v.mul(&b.v), d })
    }
    fn div(&self, a: &Jet, b: &Jet) -> Result<Option<Jet>, SeriesError> {
        let Some(q) = a.v.div(&b.v) else { return Ok(None) };
        // (a/b)' = (a' - q b') / b
        let d = a
            .d
            .iter()
            .zip(&b.d)
            .map(|(da, db)| {
                let num = if db.is_zero() { da.clone() } else { da.sub(&q.mul(db)) };
                num.div(&b.v).expect("checked above")
            })
            .collect();
        Ok(Some(Jet { v: q, d }))
    }
}

/// Expansion of the solution through a point and of its first
/// derivatives with respect to the initial time, state and parameters.
#[derive(Clone, Debug)]
pub struct SeriesSolution {
    pub order: usize,
    pub point: Assignment,
    /// Coordinates (t, X, Θ), the directions of the sensitivities.
    pub coordinates: Vec<Symbol>,
    pub n: usize,
    /// xi[i]: Taylor coefficients D^j x_i / j! of state i.
    pub xi: Vec<Series>,
    /// Sensitivity of xi[i] to the initial time.
    pub dxi_dt0: Vec<Series>,
    /// dxi_dx[i][k]: sensitivity of xi[i] to the initial value of x_k.
    pub dxi_dx: Vec<Vec<Series>>,
    /// dxi_dtheta[i][k]: sensitivity of xi[i] to parameter k.
    pub dxi_dtheta: Vec<Vec<Series>>,
}

impl SeriesSolution {
    /// Sensitivity of state `i` to coordinate `y` (index in (t, X, Θ)).
    pub fn sensitivity(&self, i: usize, y: usize) -> &Series {
        if y == 0 {
            &self.dxi_dt0[i]
        } else if y <= self.n {
            &self.dxi_dx[i][y - 1]
        } else {
            &self.dxi_dtheta[i][y - 1 - self.n]
        }
    }
}

/// Integrates the system and its variational equations order by order,
/// starting from `point` (which binds t, X and Θ).
pub fn variational_series(model: &Model, point: &Assignment, order: usize) -> Result<SeriesSolution, SeriesError> {
    let coords = model.coordinates();
    let dim = coords.len();
    let n = model.n();
    let alg = JetAlgebra { order, dirs: dim };
    let value = |y: &Symbol| point.get(y).cloned().ok_or_else(|| SeriesError::Unbound(y.clone()));

    // t = t0 + s along the solution; X and Θ start at the point.
    let mut jets: Vec<Jet> = Vec::with_capacity(dim);
    for (k, y) in coords.iter().enumerate() {
        let mut v = Series::constant(value(y)?, order);
        if k == 0 && order >= 1 {
            v.0[1] = Rational::one();
        }
        let mut d = vec![Series::zero(order); dim];
        d[k].0[0] = Rational::one();
        jets.push(Jet { v, d });
    }

    for j in 0..order {
        let mut next = Vec::with_capacity(n);
        for f in model.rhs() {
            let out = evaluate_in(f, &alg, |s| {
                coords
                    .iter()
                    .position(|y| y == s)
                    .map(|k| jets[k].clone())
                    .ok_or_else(|| SeriesError::Unbound(s.clone()))
            })?;
            next.push(out);
        }
        let scale = Rational::from_integer((j + 1).into()).recip();
        for (i, out) in next.into_iter().enumerate() {
            let x = &mut jets[1 + i];
            x.v.0[j + 1] = out.v.coeff(j) * &scale;
            for (dx, dout) in x.d.iter_mut().zip(&out.d) {
                dx.0[j + 1] = dout.coeff(j) * &scale;
            }
        }
    }

    let states = &jets[1..=n];
    Ok(SeriesSolution {
        order,
        point: point.clone(),
        coordinates: coords,
        n,
        xi: states.iter().map(|x| x.v.clone()).collect(),
        dxi_dt0: states.iter().map(|x| x.d[0].clone()).collect(),
        dxi_dx: states.iter().map(|x| x.d[1..=n].to_vec()).collect(),
        dxi_dtheta: states.iter().map(|x| x.d[1 + n..].to_vec()).collect(),
    })
}

fn factorial(k: usize) -> Rational {
    (1..=k).fold(Rational::one(), |acc, i| acc * Rational::from_integer(i.into()))
}

/// Jet conditions of orders 0..=up_to. The order-j row for state i is
/// built from D^{j+1} x_i, the (j+1)-th derivative along the flow, and
/// weights the state exponent by (j + 1) times the time exponent. Order 0
/// coincides with the order-0 conditions of `symfind`.
pub fn jet_condition_rows(sol: &SeriesSolution, kind: Kind, up_to: usize) -> Result<Vec<Vec<Rational>>, SeriesError> {
    if up_to + 1 > sol.order {
        return Err(SeriesError::OrderTooLow { wanted: up_to, needed: up_to + 1, have: sol.order });
    }
    let dim = sol.coordinates.len();
    let mut rows = Vec::new();
    for j in 0..=up_to {
        let k = j + 1;
        let fact = factorial(k);
        for i in 0..sol.n {
            let d = sol.xi[i].coeff(k) * &fact;
            let partial = |y: usize| sol.sensitivity(i, y).coeff(k) * &fact;
            let row: Vec<Rational> = match kind {
                Kind::Translation => (0..dim).map(partial).collect(),
                Kind::Scale => (0..dim)
                    .map(|y| {
                        let v = sol.point.get(&sol.coordinates[y]).expect("bound");
                        let mut e = v * partial(y);
                        if y == 0 {
                            e += &d * Rational::from_integer(k.into());
                        }
                        if y == 1 + i {
                            e -= &d;
                        }
                        e
                    })
                    .collect(),
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Jet condition rows of orders 0..=up_to at one point.
pub fn jet_rows_at(model: &Model, kind: Kind, point: &Assignment, up_to: usize) -> Result<Vec<Vec<Rational>>, SeriesError> {
    let sol = variational_series(model, point, up_to + 1)?;
    jet_condition_rows(&sol, kind, up_to)
}

/// Kernel of the jet conditions at a single point, canonicalized like
/// the point-based kernel.
pub fn jet_span(model: &Model, kind: Kind, point: &Assignment, up_to: usize) -> Result<Vec<Generator>, SeriesError> {
    let rows = jet_rows_at(model, kind, point, up_to)?;
    Ok(canonical_kernel(kind, &Matrix::from_rows(model.dim(), rows)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, ratio};
    use crate::odesys::parse_model;

    fn r(v: &[(i64, i64)]) -> Vec<Rational> {
        v.iter().map(|&(a, b)| ratio(a, b)).collect()
    }

    fn mm_solution(order: usize) -> SeriesSolution {
        let m = parse_model("state x; param k1, k2; d/dt x = k1*x/(k2+x);").unwrap();
        let p: Assignment = [("t", rat(0)), ("x", rat(3)), ("k1", rat(7)), ("k2", rat(2))].into_iter().collect();
        variational_series(&m, &p, order).unwrap()
    }

    #[test]
    fn michaelis_menten_series() {
        let s = mm_solution(4);
        assert_eq!(s.xi[0].coeffs(), r(&[(3, 1), (21, 5), (147, 125), (-1372, 3125), (2401, 31250)]));
        assert_eq!(s.dxi_dtheta[0][0].coeffs(), r(&[(0, 1), (3, 5), (42, 125), (-588, 3125), (686, 15625)]));
        assert_eq!(s.dxi_dtheta[0][1].coeffs(), r(&[(0, 1), (-21, 25), (-147, 1250), (1029, 3125), (-69629, 312500)]));
        assert_eq!(s.dxi_dx[0][0].coeffs(), r(&[(1, 1), (14, 25), (-196, 625), (686, 9375), (16807, 234375)]));
        assert!(s.dxi_dt0[0].is_zero());
    }

    #[test]
    fn order_zero_is_the_initial_point() {
        let s = mm_solution(0);
        assert_eq!(s.xi[0].coeffs(), &[rat(3)]);
        assert_eq!(s.dxi_dx[0][0].coeffs(), &[rat(1)]);
        assert!(s.dxi_dtheta[0].iter().all(Series::is_zero));
    }

    #[test]
    fn jet_rows_of_michaelis_menten() {
        let s = mm_solution(4);
        let rows = jet_condition_rows(&s, Kind::Scale, 2).unwrap();
        assert_eq!(rows[0], r(&[(21, 5), (-63, 25), (21, 5), (-42, 25)]));
        assert_eq!(rows[1], r(&[(588, 125), (-2646, 625), (588, 125), (-294, 625)]));
        assert_eq!(rows[2], r(&[(-24696, 3125), (12348, 3125), (-24696, 3125), (12348, 3125)]));
        assert!(jet_condition_rows(&s, Kind::Scale, 4).is_err());
    }

    #[test]
    fn series_division() {
        let a = Series::from_coeffs(vec![rat(1), rat(0), rat(0)]);
        let b = Series::from_coeffs(vec![rat(1), rat(-1), rat(0)]);
        assert_eq!(a.div(&b).unwrap().coeffs(), &[rat(1), rat(1), rat(1)]);
        assert!(a.div(&Series::zero(2)).is_none());
    }
}
