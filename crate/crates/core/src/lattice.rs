//! Integer basis reduction for exponent lattices.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::linalg::dot;
use crate::num::{ratio, to_rational_vector, Rational};

fn gram_schmidt(b: &[Vec<BigInt>]) -> (Vec<Vec<Rational>>, Vec<Rational>, Vec<Vec<Rational>>) {
    let k = b.len();
    let mut star: Vec<Vec<Rational>> = Vec::with_capacity(k);
    let mut norms: Vec<Rational> = Vec::with_capacity(k);
    let mut mu = vec![vec![Rational::zero(); k]; k];
    for i in 0..k {
        let bi = to_rational_vector(&b[i]);
        let mut v = bi.clone();
        for j in 0..i {
            if norms[j].is_zero() {
                continue;
            }
            let m = dot(&bi, &star[j]) / &norms[j];
            for (x, s) in v.iter_mut().zip(&star[j]) {
                *x -= &m * s;
            }
            mu[i][j] = m;
        }
        norms.push(dot(&v, &v));
        star.push(v);
    }
    (star, norms, mu)
}

fn sub_multiple(target: &mut [BigInt], q: &BigInt, src: &[BigInt]) {
    for (t, s) in target.iter_mut().zip(src) {
        *t -= q * s;
    }
}

/// Makes the first nonzero entry of each vector positive.
pub fn canonical_sign(basis: &mut [Vec<BigInt>]) {
    for v in basis.iter_mut() {
        if v.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
            for x in v.iter_mut() {
                *x = -&*x;
            }
        }
    }
}

/// Pairwise size reduction: each vector has multiples of the earlier ones
/// removed so every Gram-Schmidt coefficient lies in [-1/2, 1/2]. Ties
/// round away from zero. The generated lattice is unchanged.
pub fn size_reduce(basis: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut b = basis.to_vec();
    for i in 1..b.len() {
        for j in (0..i).rev() {
            let (_, _, mu) = gram_schmidt(&b);
            let q = mu[i][j].round().to_integer();
            if !q.is_zero() {
                let src = b[j].clone();
                sub_multiple(&mut b[i], &q, &src);
            }
        }
    }
    canonical_sign(&mut b);
    b
}

/// Exact LLL reduction with parameter 3/4.
pub fn lll(basis: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut b = basis.to_vec();
    let delta = ratio(3, 4);
    let mut k = 1;
    while k < b.len() {
        for j in (0..k).rev() {
            let (_, _, mu) = gram_schmidt(&b);
            let q = mu[k][j].round().to_integer();
            if !q.is_zero() {
                let src = b[j].clone();
                sub_multiple(&mut b[k], &q, &src);
            }
        }
        let (_, norms, mu) = gram_schmidt(&b);
        let m = &mu[k][k - 1];
        if norms[k] >= (&delta - m * m) * &norms[k - 1] {
            k += 1;
        } else {
            b.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    canonical_sign(&mut b);
    b
}

/// Largest absolute entry over the basis.
pub fn max_norm(basis: &[Vec<BigInt>]) -> BigInt {
    basis.iter().flatten().map(|x| x.abs()).max().unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect()
    }

    #[test]
    fn size_reduction_of_two_vectors() {
        let b = ints(&[&[1, 0, -1, 0], &[1, 1, 0, 1]]);
        assert_eq!(size_reduce(&b), ints(&[&[1, 0, -1, 0], &[0, 1, 1, 1]]));
    }

    #[test]
    fn trivial_inputs() {
        assert!(size_reduce(&[]).is_empty());
        assert!(lll(&[]).is_empty());
        let one = ints(&[&[0, 2, -1]]);
        assert_eq!(size_reduce(&one), one);
        assert_eq!(lll(&one), one);
    }

    #[test]
    fn lll_shortens_skewed_basis() {
        let b = ints(&[&[1, 1, 1], &[-1, 0, 2], &[3, 5, 6]]);
        let r = lll(&b);
        assert!(max_norm(&r) <= max_norm(&b));
        assert_eq!(r, ints(&[&[0, 1, 0], &[1, 0, 1], &[2, 0, -1]]));
        // Gram determinant is preserved by a unimodular change of basis
        let gram = |m: &[Vec<BigInt>]| gram_schmidt(m).1.iter().fold(ratio(1, 1), |a, n| a * n);
        assert_eq!(gram(&b), gram(&r));
    }
}
