//! Rational invariants of a scaling or translation group and the
//! substitution that normalizes chosen parameters to 1 or 0.

use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::expr::{Assignment, Symbol};
use crate::linalg::Matrix;
use crate::num::{fmt_rational, primitive_integer_vector, rational_pow, Integer, Rational};
use crate::odesys::Model;
use crate::symfind::{Kind, SymmetryBasis};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvarError {
    #[error("cannot normalize onto parameters only: the {m} generators have rank {rank} on the parameters")]
    CannotNormalize { m: usize, rank: usize },
    #[error("`{0}` is not a parameter")]
    NotAParameter(String),
    #[error("the chosen pivots do not give an invertible block")]
    SingularPivots,
}

/// Generator exponents restricted to the parameters: row θ holds
/// (a_{θ,1}, ..., a_{θ,m}).
#[derive(Clone, Debug)]
pub struct ExponentMatrix {
    pub kind: Kind,
    pub params: Vec<Symbol>,
    pub a: Matrix,
}

impl ExponentMatrix {
    pub fn from_basis(model: &Model, basis: &SymmetryBasis) -> Self {
        let off = 1 + model.n();
        let rows = (0..model.l()).map(|k| basis.generators.iter().map(|g| Rational::from_integer(g.alpha[off + k].clone())).collect());
        ExponentMatrix { kind: basis.kind, params: model.params().to_vec(), a: Matrix::from_rows(basis.m(), rows) }
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    pub fn rank(&self) -> usize {
        self.a.rank()
    }

    fn row_of(&self, s: &Symbol) -> Option<usize> {
        self.params.iter().position(|p| p == s)
    }
}

/// Chooses m parameters with an invertible exponent block. Preferred
/// parameters are taken first, in the given order; the rest are tried
/// from the last declared backwards. Returned in declaration order.
pub fn select_pivots(em: &ExponentMatrix, prefer: &[Symbol]) -> Result<Vec<Symbol>, InvarError> {
    let m = em.m();
    let mut order: Vec<usize> = prefer.iter().filter_map(|s| em.row_of(s)).collect();
    for k in (0..em.params.len()).rev() {
        if !order.contains(&k) {
            order.push(k);
        }
    }
    let mut chosen: Vec<usize> = Vec::new();
    let mut block = Matrix::zeros(0, m);
    for k in order {
        if chosen.len() == m {
            break;
        }
        let mut trial = block.clone();
        trial.push_row(em.a.row(k).to_vec());
        if trial.rank() > chosen.len() {
            block = trial;
            chosen.push(k);
        }
    }
    if chosen.len() < m {
        return Err(InvarError::CannotNormalize { m, rank: chosen.len() });
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|k| em.params[k].clone()).collect())
}

#[derive(Clone, Debug)]
pub struct EliminationResult {
    pub params: Vec<Symbol>,
    pub pivots: Vec<Symbol>,
    /// m × l: row h is the inverse pivot block spread over the parameter
    /// columns, so λ̂_h = ∏_j θ̂_j^(-gamma[h][θ̂_j]).
    pub gamma: Matrix,
    /// (l − m) × l: exponent vector of the invariant attached to each
    /// non-pivot parameter (coefficient 1 on that parameter).
    pub beta: Matrix,
    pub nonpivots: Vec<Symbol>,
}

/// Gaussian elimination of [A | I] over the first m columns, with the
/// pivot rows placed first.
pub fn eliminate(em: &ExponentMatrix, pivots: &[Symbol]) -> Result<EliminationResult, InvarError> {
    let m = em.m();
    let l = em.params.len();
    let mut order = Vec::with_capacity(l);
    for p in pivots {
        order.push(em.row_of(p).ok_or_else(|| InvarError::NotAParameter(p.to_string()))?);
    }
    let nonpivot_rows: Vec<usize> = (0..l).filter(|k| !order.contains(k)).collect();
    order.extend(&nonpivot_rows);

    let mut aug = Matrix::zeros(l, m + l);
    for (r, &k) in order.iter().enumerate() {
        for h in 0..m {
            aug[(r, h)] = em.a[(k, h)].clone();
        }
        aug[(r, m + k)] = Rational::one();
    }
    if aug.rref_in_place(m).len() < m {
        return Err(InvarError::SingularPivots);
    }
    let right = |r: usize| (0..l).map(|c| aug[(r, m + c)].clone()).collect::<Vec<_>>();
    let gamma = Matrix::from_rows(l, (0..m).map(right));
    let beta = Matrix::from_rows(l, (m..l).map(right));
    // rows of beta come out in the permuted order; scale each to 1 on its
    // own parameter
    let beta = Matrix::from_rows(
        l,
        beta.row_vecs().into_iter().zip(&nonpivot_rows).map(|(row, &k)| {
            let inv = row[k].recip();
            row.into_iter().map(|x| x * &inv).collect()
        }),
    );
    Ok(EliminationResult {
        params: em.params.clone(),
        pivots: pivots.to_vec(),
        gamma,
        beta,
        nonpivots: nonpivot_rows.into_iter().map(|k| em.params[k].clone()).collect(),
    })
}

/// Image of one coordinate under the normalizing group element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Image {
    /// ∏ s^e over the listed symbols; empty means the constant 1.
    Monomial(Vec<(Symbol, Rational)>),
    /// Σ c·s over the listed symbols; empty means the constant 0.
    Linear(Vec<(Symbol, Rational)>),
}

impl Image {
    pub fn terms(&self) -> &[(Symbol, Rational)] {
        match self {
            Image::Monomial(t) | Image::Linear(t) => t,
        }
    }

    pub fn is_identity_of(&self, y: &Symbol) -> bool {
        let t = self.terms();
        t.len() == 1 && t[0].0 == *y && t[0].1.is_one()
    }

    /// True for the group identity value (1 or 0).
    pub fn is_normalized(&self) -> bool {
        self.terms().is_empty()
    }

    pub fn evaluate(&self, p: &Assignment) -> Option<Rational> {
        match self {
            Image::Monomial(t) => t.iter().try_fold(Rational::one(), |acc, (s, e)| Some(acc * rational_pow(p.get(s)?, e)?)),
            Image::Linear(t) => t.iter().try_fold(Rational::zero(), |acc, (s, c)| Some(acc + c * p.get(s)?)),
        }
    }

    /// Largest exponent denominator (1 for linear forms).
    pub fn root_degree(&self, s: &Symbol) -> u32 {
        match self {
            Image::Monomial(t) => t
                .iter()
                .filter(|(v, _)| v == s)
                .map(|(_, e)| num_traits::ToPrimitive::to_u32(e.denom()).unwrap_or(1))
                .max()
                .unwrap_or(1),
            Image::Linear(_) => 1,
        }
    }
}

fn power(s: &Symbol, e: &Rational) -> String {
    if e.is_one() {
        s.to_string()
    } else if e.is_integer() {
        format!("{s}^{}", e.numer())
    } else {
        format!("{s}^({})", fmt_rational(e))
    }
}

impl fmt::Display for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Image::Monomial(t) => {
                let num: Vec<String> = t.iter().filter(|(_, e)| e.is_positive()).map(|(s, e)| power(s, e)).collect();
                let den: Vec<String> = t.iter().filter(|(_, e)| e.is_negative()).map(|(s, e)| power(s, &-e)).collect();
                let top = if num.is_empty() { "1".to_string() } else { num.join("*") };
                match den.len() {
                    0 => write!(f, "{top}"),
                    1 => write!(f, "{top}/{}", den[0]),
                    _ => write!(f, "{top}/({})", den.join("*")),
                }
            }
            Image::Linear(t) => {
                if t.is_empty() {
                    return f.write_str("0");
                }
                for (i, (s, c)) in t.iter().enumerate() {
                    let a = c.abs();
                    let body = if a.is_one() { s.to_string() } else { format!("{}*{s}", fmt_rational(&a)) };
                    match (i, c.is_negative()) {
                        (0, false) => write!(f, "{body}")?,
                        (0, true) => write!(f, "-{body}")?,
                        (_, false) => write!(f, " + {body}")?,
                        (_, true) => write!(f, " - {body}")?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// Invariant coordinates of one stage.
#[derive(Clone, Debug)]
pub struct InvariantSet {
    pub kind: Kind,
    pub coordinates: Vec<Symbol>,
    pub pivots: Vec<Symbol>,
    /// Image of every coordinate (t, X, Θ), in coordinate order.
    pub images: Vec<Image>,
    /// Each non-pivot parameter with the exponent vector (over Θ) of its
    /// invariant.
    pub param_invariants: Vec<(Symbol, Vec<Rational>)>,
    pub assumptions: Vec<String>,
    pub elimination: EliminationResult,
}

impl InvariantSet {
    pub fn image_of(&self, s: &Symbol) -> Option<&Image> {
        self.coordinates.iter().position(|c| c == s).map(|k| &self.images[k])
    }

    /// Parameter invariants as primitive integer exponent vectors with a
    /// positive first entry.
    pub fn canonical_beta(&self) -> Vec<Vec<Integer>> {
        self.param_invariants.iter().map(|(_, b)| primitive_integer_vector(b)).collect()
    }

    /// Root degree needed for each symbol to evaluate all images exactly.
    pub fn root_degrees(&self) -> Vec<(Symbol, u32)> {
        let mut out = Vec::new();
        for s in &self.coordinates {
            let q = self.images.iter().map(|im| im.root_degree(s)).fold(1, num_integer::lcm);
            if q > 1 {
                out.push((s.clone(), q));
            }
        }
        out
    }
}

/// Applies the normalizing group element to every coordinate. Pivots map
/// to 1 (scale) or 0 (translation).
pub fn normalizing_substitution(model: &Model, basis: &SymmetryBasis, el: &EliminationResult) -> InvariantSet {
    let coords = model.coordinates();
    let m = basis.m();
    let param_col = |s: &Symbol| el.params.iter().position(|p| p == s).expect("pivot is a parameter");

    let mut images = Vec::with_capacity(coords.len());
    for (yi, y) in coords.iter().enumerate() {
        // weight of each pivot: sum_h a_{y,h} gamma_{h, pivot}
        let mut terms: Vec<(Symbol, Rational)> = vec![(y.clone(), Rational::one())];
        for p in &el.pivots {
            let c = param_col(p);
            let w = (0..m).fold(Rational::zero(), |acc, h| {
                acc + Rational::from_integer(basis.generators[h].alpha[yi].clone()) * &el.gamma[(h, c)]
            });
            if w.is_zero() {
                continue;
            }
            let e = -w;
            match terms.iter_mut().find(|(s, _)| s == p) {
                Some((_, v)) => *v += e,
                None => terms.push((p.clone(), e)),
            }
        }
        terms.retain(|(_, e)| !e.is_zero());
        terms.sort_by_key(|(s, _)| model.coordinate_index(s));
        images.push(match basis.kind {
            Kind::Scale => Image::Monomial(terms),
            Kind::Translation => Image::Linear(terms),
        });
    }

    let param_invariants: Vec<(Symbol, Vec<Rational>)> = el.nonpivots.iter().cloned().zip(el.beta.row_vecs()).collect();

    let mut assumptions = Vec::new();
    if basis.kind == Kind::Scale {
        for p in &el.pivots {
            assumptions.push(format!("{p} != 0"));
        }
        for s in model.params() {
            let fractional = images.iter().any(|im| im.root_degree(s) > 1);
            if fractional {
                assumptions.push(format!("{s} > 0"));
            }
        }
    }

    InvariantSet {
        kind: basis.kind,
        coordinates: coords,
        pivots: el.pivots.clone(),
        images,
        param_invariants,
        assumptions,
        elimination: el.clone(),
    }
}

/// Pivot selection, elimination and substitution in one step.
pub fn invariants(model: &Model, basis: &SymmetryBasis, prefer: &[Symbol]) -> Result<InvariantSet, InvarError> {
    let em = ExponentMatrix::from_basis(model, basis);
    let pivots = select_pivots(&em, prefer)?;
    let el = eliminate(&em, &pivots)?;
    Ok(normalizing_substitution(model, basis, &el))
}

/// Largest sub-basis whose parameter parts are independent, taken
/// greedily in basis order.
pub fn parameter_independent(model: &Model, basis: &SymmetryBasis) -> SymmetryBasis {
    let off = 1 + model.n();
    let mut kept = Vec::new();
    let mut block = Matrix::zeros(0, model.l());
    for g in &basis.generators {
        let row: Vec<Rational> = g.alpha[off..].iter().cloned().map(Rational::from_integer).collect();
        let mut trial = block.clone();
        trial.push_row(row);
        if trial.rank() > kept.len() {
            block = trial;
            kept.push(g.clone());
        }
    }
    SymmetryBasis { verified: vec![true; kept.len()], generators: kept, ..basis.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::rat;
    use crate::odesys::parse_model;
    use crate::symfind::Generator;
    use num_bigint::BigInt;

    fn basis(model: &Model, kind: Kind, rows: &[&[i64]]) -> SymmetryBasis {
        let generators: Vec<Generator> =
            rows.iter().map(|r| Generator::new(kind, r.iter().map(|&x| BigInt::from(x)).collect())).collect();
        SymmetryBasis {
            kind,
            coordinates: model.coordinates(),
            verified: vec![true; generators.len()],
            generators,
            points: vec![],
        }
    }

    fn syms(names: &[&str]) -> Vec<Symbol> {
        names.iter().map(|&s| Symbol::from(s)).collect()
    }

    fn mm() -> Model {
        parse_model("state x; param k1, k2; d/dt x = k1*x/(k2+x);").unwrap()
    }

    #[test]
    fn michaelis_menten_invariants() {
        let m = mm();
        let b = basis(&m, Kind::Scale, &[&[1, 0, -1, 0], &[0, 1, 1, 1]]);
        let inv = invariants(&m, &b, &[]).unwrap();
        assert_eq!(inv.pivots, syms(&["k1", "k2"]));
        assert_eq!(inv.images[0].to_string(), "t*k1/k2");
        assert_eq!(inv.images[1].to_string(), "x/k2");
        assert!(inv.images[2].is_normalized() && inv.images[3].is_normalized());
        assert!(inv.param_invariants.is_empty());
        assert_eq!(inv.assumptions, vec!["k1 != 0", "k2 != 0"]);
    }

    #[test]
    fn verhulst_translation() {
        let m = parse_model("state x; param a, b, c; d/dt x = x*(a-b*x) - c*x;").unwrap();
        let b = basis(&m, Kind::Translation, &[&[0, 0, 1, 0, 1]]);
        let inv = invariants(&m, &b, &[]).unwrap();
        assert_eq!(inv.pivots, syms(&["c"]));
        let shown: Vec<String> = inv.images.iter().map(ToString::to_string).collect();
        assert_eq!(shown, vec!["t", "x", "a - c", "b", "0"]);
        assert!(inv.assumptions.is_empty());
    }

    #[test]
    fn empty_and_full_elimination() {
        let m = mm();
        let none = basis(&m, Kind::Scale, &[]);
        let em = ExponentMatrix::from_basis(&m, &none);
        let el = eliminate(&em, &select_pivots(&em, &[]).unwrap()).unwrap();
        assert_eq!(el.beta.row_vecs(), vec![vec![rat(1), rat(0)], vec![rat(0), rat(1)]]);
        let full = basis(&m, Kind::Scale, &[&[1, 0, -1, 0], &[0, 1, 1, 1]]);
        let em = ExponentMatrix::from_basis(&m, &full);
        let el = eliminate(&em, &select_pivots(&em, &[]).unwrap()).unwrap();
        assert_eq!(el.beta.rows(), 0);
    }

    #[test]
    fn fractional_exponents_and_evaluation() {
        let m = parse_model("state x; param a, b; d/dt x = a*b*x;").unwrap();
        let b = basis(&m, Kind::Scale, &[&[0, 0, 2, -2]]);
        let inv = invariants(&m, &b, &syms(&["a"])).unwrap();
        assert_eq!(inv.pivots, syms(&["a"]));
        assert_eq!(inv.param_invariants[0].1, vec![rat(1), rat(1)]);
        let b2 = basis(&m, Kind::Scale, &[&[-1, 0, 2, 0]]);
        let inv = invariants(&m, &b2, &[]).unwrap();
        assert_eq!(inv.images[0].to_string(), "t*a^(1/2)");
        assert!(inv.assumptions.contains(&"a > 0".to_string()));
        let p: Assignment = [("t", rat(3)), ("x", rat(1)), ("a", rat(4)), ("b", rat(1))].into_iter().collect();
        assert_eq!(inv.images[0].evaluate(&p), Some(rat(6)));
        assert_eq!(inv.root_degrees(), vec![(Symbol::from("a"), 2)]);
    }

    #[test]
    fn generators_acting_only_on_states() {
        let m = parse_model("state x; param a; d/dt x = a*x;").unwrap();
        let b = basis(&m, Kind::Scale, &[&[0, 1, 0]]);
        let em = ExponentMatrix::from_basis(&m, &b);
        assert_eq!(select_pivots(&em, &[]), Err(InvarError::CannotNormalize { m: 1, rank: 0 }));
        assert_eq!(parameter_independent(&m, &b).m(), 0);
    }
}
