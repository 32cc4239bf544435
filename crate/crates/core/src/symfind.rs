//! Scaling and translation symmetries from order-0 infinitesimal
//! conditions evaluated at random integer points.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{
    derivative, evaluate, gradient, normalize, Assignment, DagBuilder, EvalError, ExprDag, NormalizeError, Symbol,
};
use crate::lattice;
use crate::linalg::{dot, Matrix};
use crate::num::{primitive_integer_vector, to_rational_vector, Rational};
use crate::odesys::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Scale,
    Translation,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Scale => "scale",
            Kind::Translation => "translation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymError {
    #[error("no pole-free point found in {retries} attempts; the denominators may vanish identically")]
    SamplingExhausted { retries: usize },
    #[error("verification did not stabilise after {rounds} rounds; the input is probably degenerate")]
    Unstable { rounds: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
    #[error("series backend: {0}")]
    Series(String),
}

/// One infinitesimal generator: exponents (scale) or shifts
/// (translation) over the coordinates (t, X, Θ).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Generator {
    pub kind: Kind,
    pub alpha: Vec<BigInt>,
}

impl Generator {
    pub fn new(kind: Kind, alpha: Vec<BigInt>) -> Self {
        Generator { kind, alpha }
    }

    pub fn rational(&self) -> Vec<Rational> {
        to_rational_vector(&self.alpha)
    }

    pub fn alpha_i64(&self) -> Vec<i64> {
        self.alpha.iter().map(|a| a.to_i64().expect("small exponent")).collect()
    }

    /// `y ∂/∂y` terms for a scaling, `∂/∂y` for a translation.
    pub fn describe(&self, coords: &[Symbol]) -> String {
        let mut parts = Vec::new();
        for (a, y) in self.alpha.iter().zip(coords) {
            if a.is_zero() {
                continue;
            }
            let term = match self.kind {
                Kind::Scale => format!("{y} d/d{y}"),
                Kind::Translation => format!("d/d{y}"),
            };
            let coef = if a.is_one() {
                String::new()
            } else if *a == -BigInt::one() {
                "-".into()
            } else {
                format!("{a} ")
            };
            parts.push(format!("{coef}{term}"));
        }
        parts.join(" + ").replace("+ -", "- ")
    }
}

/// Stacked condition rows from several specializations.
#[derive(Clone, Debug)]
pub struct ConditionMatrix {
    pub kind: Kind,
    pub matrix: Matrix,
    pub points: Vec<Assignment>,
}

#[derive(Clone, Debug)]
pub struct SymmetryBasis {
    pub kind: Kind,
    pub coordinates: Vec<Symbol>,
    pub generators: Vec<Generator>,
    pub verified: Vec<bool>,
    /// Specializations whose rows determined the kernel.
    pub points: Vec<Assignment>,
}

impl SymmetryBasis {
    pub fn m(&self) -> usize {
        self.generators.len()
    }

    pub fn rational_rows(&self) -> Vec<Vec<Rational>> {
        self.generators.iter().map(Generator::rational).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Points,
    Series,
}

#[derive(Clone, Debug)]
pub struct FindConfig {
    pub seed: u64,
    /// Coordinates are drawn from [-bound, bound] without 0.
    pub bound: u64,
    /// Fresh points per generator in verification.
    pub trials: usize,
    /// Sampling attempts before giving up on a pole-free point.
    pub retries: usize,
    pub rounds: usize,
    /// Full LLL instead of size reduction.
    pub lll: bool,
    /// Also verify each generator symbolically.
    pub exact: bool,
    pub backend: Backend,
    /// Highest jet order for the series backend; defaults to n + l + 1.
    pub jet_order: Option<usize>,
}

impl Default for FindConfig {
    fn default() -> Self {
        FindConfig {
            seed: 0,
            bound: 1 << 16,
            trials: 8,
            retries: 64,
            rounds: 3,
            lll: false,
            exact: false,
            backend: Backend::Points,
            jet_order: None,
        }
    }
}

/// Deterministic source of independent random streams derived from one
/// seed, so that results do not depend on evaluation order.
#[derive(Clone, Debug)]
pub struct Sampler {
    seed: u64,
    stream: u64,
    pub bound: u64,
    pub retries: usize,
}

impl Sampler {
    pub fn new(seed: u64, bound: u64, retries: usize) -> Self {
        Sampler { seed, stream: 0, bound: bound.max(1), retries }
    }

    pub fn from_config(config: &FindConfig) -> Self {
        Sampler::new(config.seed, config.bound, config.retries)
    }

    /// Independent generator for the next specialization.
    pub fn next_rng(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        self.stream += 1;
        rng
    }

    pub fn point(&mut self, model: &Model) -> Result<Assignment, SymError> {
        let mut rng = self.next_rng();
        sample_point(model, &mut rng, self.bound, self.retries)
    }

    /// A point on which `accept` holds. Symbols listed in `powers` get
    /// positive perfect q-th powers.
    pub fn point_where(
        &mut self,
        coords: &[Symbol],
        powers: &BTreeMap<Symbol, u32>,
        accept: impl Fn(&Assignment) -> bool,
    ) -> Result<Assignment, SymError> {
        let mut rng = self.next_rng();
        for _ in 0..self.retries {
            let p = draw(coords, powers, &mut rng, self.bound);
            if accept(&p) {
                return Ok(p);
            }
        }
        Err(SymError::SamplingExhausted { retries: self.retries })
    }
}

fn nonzero<R: Rng>(rng: &mut R, bound: u64) -> BigInt {
    let r = rng.random_range(1..=2 * bound);
    if r <= bound {
        BigInt::from(r)
    } else {
        -BigInt::from(r - bound)
    }
}

fn draw<R: Rng>(coords: &[Symbol], powers: &BTreeMap<Symbol, u32>, rng: &mut R, bound: u64) -> Assignment {
    coords
        .iter()
        .map(|s| {
            let v = match powers.get(s) {
                Some(&q) if q > 1 => {
                    let top = BigInt::from(bound).nth_root(q).to_u64().unwrap_or(2).max(2);
                    num_traits::pow(BigInt::from(rng.random_range(1..=top)), q as usize)
                }
                _ => nonzero(rng, bound),
            };
            (s.clone(), Rational::from_integer(v))
        })
        .collect()
}

/// Every right-hand side evaluates without a pole at `p`. The reverse
/// sweep only divides by values already checked here.
pub fn pole_free(model: &Model, p: &Assignment) -> bool {
    model.rhs().iter().all(|f| evaluate(f, p).is_ok())
}

/// Draws t, X and Θ as nonzero integers in [-bound, bound], retrying on
/// poles.
pub fn sample_point<R: Rng>(model: &Model, rng: &mut R, bound: u64, retries: usize) -> Result<Assignment, SymError> {
    let coords = model.coordinates();
    for _ in 0..retries {
        let p = draw(&coords, &BTreeMap::new(), rng, bound);
        if pole_free(model, &p) {
            return Ok(p);
        }
    }
    Err(SymError::SamplingExhausted { retries })
}

/// Order-0 conditions at one point, one row per equation, columns over
/// (t, X, Θ).
pub fn condition_rows(model: &Model, kind: Kind, point: &Assignment) -> Result<Vec<Vec<Rational>>, EvalError> {
    let coords = model.coordinates();
    let mut rows = Vec::with_capacity(model.n());
    for (i, f) in model.rhs().iter().enumerate() {
        let g = gradient(f, point)?;
        let row: Vec<Rational> = match kind {
            Kind::Translation => coords.iter().map(|y| g.partial(y)).collect(),
            Kind::Scale => {
                let mut r: Vec<Rational> = coords
                    .iter()
                    .map(|y| {
                        let v = point.get(y).ok_or_else(|| EvalError::Unbound(y.clone()))?;
                        Ok(v * g.partial(y))
                    })
                    .collect::<Result<_, EvalError>>()?;
                r[0] += &g.value;
                r[1 + i] -= &g.value;
                r
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn condition_matrix(model: &Model, kind: Kind, points: &[Assignment]) -> Result<ConditionMatrix, EvalError> {
    let mut matrix = Matrix::zeros(0, model.dim());
    for p in points {
        for r in condition_rows(model, kind, p)? {
            matrix.push_row(r);
        }
    }
    Ok(ConditionMatrix { kind, matrix, points: points.to_vec() })
}

/// For translations, a vanishing time column means every equation is
/// autonomous; the bare time shift is then dropped by pinning α_t = 0.
fn pin_time(kind: Kind, m: &Matrix) -> Matrix {
    let mut m = m.clone();
    if kind == Kind::Translation && (0..m.rows()).all(|i| m[(i, 0)].is_zero()) {
        let mut e = vec![Rational::zero(); m.cols()];
        e[0] = Rational::one();
        m.push_row(e);
    }
    m
}

pub(crate) fn canonical_kernel(kind: Kind, m: &Matrix) -> Vec<Generator> {
    pin_time(kind, m)
        .kernel()
        .iter()
        .map(|v| Generator::new(kind, primitive_integer_vector(v)))
        .collect()
}

/// Exact right kernel of the conditions as primitive integer vectors.
pub fn kernel_basis(model: &Model, cm: &ConditionMatrix) -> SymmetryBasis {
    let generators = canonical_kernel(cm.kind, &cm.matrix);
    SymmetryBasis {
        kind: cm.kind,
        coordinates: model.coordinates(),
        verified: vec![false; generators.len()],
        generators,
        points: cm.points.clone(),
    }
}

fn annihilates(rows: &[Vec<Rational>], alpha: &[Rational]) -> bool {
    rows.iter().all(|r| dot(r, alpha).is_zero())
}

/// Checks `g` against the condition rows at `trials` fresh points.
pub fn verify_generator(model: &Model, g: &Generator, sampler: &mut Sampler, trials: usize) -> Result<bool, SymError> {
    Ok(verify_with_witness(model, g, sampler, trials)?.is_none())
}

/// A refuting point and its condition rows.
type Witness = (Assignment, Vec<Vec<Rational>>);

/// Like [`verify_generator`], returning the rows of the first point that
/// refutes `g`.
fn verify_with_witness(
    model: &Model,
    g: &Generator,
    sampler: &mut Sampler,
    trials: usize,
) -> Result<Option<Witness>, SymError> {
    let alpha = g.rational();
    for _ in 0..trials {
        let p = sampler.point(model)?;
        let rows = condition_rows(model, g.kind, &p)?;
        if !annihilates(&rows, &alpha) {
            return Ok(Some((p, rows)));
        }
    }
    Ok(None)
}

/// Symbolic check: each condition expression normalizes to zero.
pub fn verify_generator_exact(model: &Model, g: &Generator) -> Result<bool, SymError> {
    let coords = model.coordinates();
    for (i, f) in model.rhs().iter().enumerate() {
        // scale:       sum_y a_y y df/dy + (a_t - a_xi) f
        // translation: sum_y a_y df/dy
        let mut b = DagBuilder::new();
        let mut acc = b.int(0);
        for (a, y) in g.alpha.iter().zip(&coords) {
            if a.is_zero() {
                continue;
            }
            let df = derivative(f, y);
            let mut term = b.import(&df, |_, _| None);
            if g.kind == Kind::Scale {
                let yv = b.var(y.clone());
                term = b.mul(yv, term);
            }
            let c = b.constant(Rational::from_integer(a.clone()));
            let t = b.mul(c, term);
            acc = b.add(acc, t);
        }
        if g.kind == Kind::Scale {
            let w = b.constant(Rational::from_integer(&g.alpha[0] - &g.alpha[1 + i]));
            let fi = b.import(f, |_, _| None);
            let t = b.mul(w, fi);
            acc = b.add(acc, t);
        }
        let expr: ExprDag = b.finish(acc);
        if !normalize(&expr)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Size-reduces (or LLL-reduces) the integer basis. The spanned lattice
/// is unchanged.
pub fn reduce_exponents(basis: &SymmetryBasis, lll: bool) -> SymmetryBasis {
    let vecs: Vec<Vec<BigInt>> = basis.generators.iter().map(|g| g.alpha.clone()).collect();
    let reduced = if lll { lattice::lll(&vecs) } else { lattice::size_reduce(&vecs) };
    SymmetryBasis {
        generators: reduced.into_iter().map(|a| Generator::new(basis.kind, a)).collect(),
        ..basis.clone()
    }
}

/// Number of specializations taken: enough rows to pin down the
/// (n + l + 1) unknowns, plus one.
pub fn specialization_count(model: &Model) -> usize {
    model.dim().div_ceil(model.n()) + 1
}

/// Verified basis of the scaling or translation exponent space.
pub fn find_symmetries(model: &Model, kind: Kind, config: &FindConfig) -> Result<SymmetryBasis, SymError> {
    let mut sampler = Sampler::from_config(config);
    let mut cm = match config.backend {
        Backend::Points => {
            let points = (0..specialization_count(model))
                .map(|_| sampler.point(model))
                .collect::<Result<Vec<_>, _>>()?;
            condition_matrix(model, kind, &points)?
        }
        Backend::Series => {
            let p = sampler.point(model)?;
            let order = config.jet_order.unwrap_or(model.dim());
            let rows = crate::series::jet_rows_at(model, kind, &p, order).map_err(|e| SymError::Series(e.to_string()))?;
            ConditionMatrix { kind, matrix: Matrix::from_rows(model.dim(), rows), points: vec![p] }
        }
    };
    for _ in 0..config.rounds {
        let basis = kernel_basis(model, &cm);
        let mut refuted = false;
        for g in &basis.generators {
            if let Some((p, rows)) = verify_with_witness(model, g, &mut sampler, config.trials)? {
                for r in rows {
                    cm.matrix.push_row(r);
                }
                cm.points.push(p);
                refuted = true;
            } else if config.exact && !verify_generator_exact(model, g)? {
                return Err(SymError::Unstable { rounds: config.rounds });
            }
        }
        if !refuted {
            let mut out = reduce_exponents(&basis, config.lll);
            out.verified = vec![true; out.m()];
            return Ok(out);
        }
    }
    Err(SymError::Unstable { rounds: config.rounds })
}
