//! Exact dense linear algebra for small matrices: rank, congruence
//! diagonalization, integer determinants, and an independent
//! characteristic-polynomial route to the signature used for
//! cross-verification of certificates.

use num::{BigInt, BigRational};
use num_traits::{One, Signed, Zero};

use crate::scalar::{Rational, Scalar};

pub type Matrix<S> = Vec<Vec<S>>;

/// Rank by row echelon reduction. Exact whenever `S::tolerance()` is zero.
pub fn rank<S: Scalar>(mat: &Matrix<S>) -> usize {
    let rows = mat.len();
    if rows == 0 {
        return 0;
    }
    let cols = mat[0].len();
    let mut m = mat.clone();
    let mut r = 0;
    for c in 0..cols {
        // largest pivot for numeric stability; any nonzero works in exact mode
        let pivot = (r..rows).max_by(|&a, &b| {
            m[a][c].abs().partial_cmp(&m[b][c].abs()).unwrap_or(std::cmp::Ordering::Equal)
        });
        let Some(p) = pivot else { break };
        if m[p][c].is_negligible() {
            continue;
        }
        m.swap(r, p);
        for i in r + 1..rows {
            if m[i][c].is_negligible() {
                continue;
            }
            let f = m[i][c].clone() / m[r][c].clone();
            for j in c..cols {
                let sub = f.clone() * m[r][j].clone();
                m[i][j] = m[i][j].clone() - sub;
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

/// Signature `(p, q)` of a symmetric matrix by congruence diagonalization:
/// clear below a nonzero diagonal pivot simultaneously in rows and columns,
/// swapping in a nonzero diagonal entry or manufacturing one from an
/// off-diagonal entry when necessary.
pub fn symmetric_signature<S: Scalar>(mat: &Matrix<S>) -> (usize, usize) {
    let n = mat.len();
    let mut m = mat.clone();
    let mut pos = 0;
    let mut neg = 0;
    for k in 0..n {
        if m[k][k].is_negligible() {
            if let Some(i) = (k + 1..n).find(|&i| !m[i][i].is_negligible()) {
                swap_sym(&mut m, k, i);
            } else if let Some((i, j)) = find_offdiag(&m, k) {
                // diag is zero here, so adding row/col j into i puts 2*m[i][j] on the diagonal
                for c in 0..n {
                    let v = m[j][c].clone();
                    m[i][c] = m[i][c].clone() + v;
                }
                for r in 0..n {
                    let v = m[r][j].clone();
                    m[r][i] = m[r][i].clone() + v;
                }
                if i != k {
                    swap_sym(&mut m, k, i);
                }
            } else {
                break;
            }
        }
        let pivot = m[k][k].clone();
        if pivot.is_positive() {
            pos += 1;
        } else {
            neg += 1;
        }
        for i in k + 1..n {
            if m[i][k].is_negligible() {
                continue;
            }
            let f = m[i][k].clone() / pivot.clone();
            for c in 0..n {
                let v = f.clone() * m[k][c].clone();
                m[i][c] = m[i][c].clone() - v;
            }
            for r in 0..n {
                let v = f.clone() * m[r][k].clone();
                m[r][i] = m[r][i].clone() - v;
            }
        }
    }
    (pos, neg)
}

fn swap_sym<S: Scalar>(m: &mut Matrix<S>, a: usize, b: usize) {
    m.swap(a, b);
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

fn find_offdiag<S: Scalar>(m: &Matrix<S>, k: usize) -> Option<(usize, usize)> {
    let n = m.len();
    for i in k..n {
        for j in i + 1..n {
            if !m[i][j].is_negligible() {
                return Some((i, j));
            }
        }
    }
    None
}

/// Exact determinant of an integer matrix by fraction-free Bareiss elimination.
pub fn integer_determinant(mat: &[Vec<i64>]) -> BigInt {
    let n = mat.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut m: Vec<Vec<BigInt>> = mat.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let num = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = num / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * m[n - 1][n - 1].clone()
}

/// Characteristic polynomial coefficients `c_0 + c_1 λ + ... + c_n λ^n` of a
/// rational matrix, by the Faddeev–LeVerrier recurrence.
pub fn char_poly(mat: &Matrix<Rational>) -> Vec<Rational> {
    let n = mat.len();
    let zero = Rational::zero();
    let mut coeffs = vec![zero.clone(); n + 1];
    coeffs[n] = Rational::one();
    let mut aux: Matrix<Rational> = vec![vec![zero.clone(); n]; n];
    let mut prod: Matrix<Rational>;
    for step in 1..=n {
        // aux <- A * (aux + c_{n-step+1} I)
        let mut shifted = aux.clone();
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] = row[i].clone() + coeffs[n - step + 1].clone();
        }
        prod = mat_mul(mat, &shifted);
        let trace: Rational = (0..n).fold(zero.clone(), |acc, i| acc + prod[i][i].clone());
        coeffs[n - step] = -trace / Rational::from_integer(BigInt::from(step as i64));
        aux = prod;
    }
    coeffs
}

fn mat_mul(a: &Matrix<Rational>, b: &Matrix<Rational>) -> Matrix<Rational> {
    let n = a.len();
    let mut out = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                if b[k][j].is_zero() {
                    continue;
                }
                out[i][j] = out[i][j].clone() + a[i][k].clone() * b[k][j].clone();
            }
        }
    }
    out
}

/// Signature of a symmetric rational matrix via its characteristic polynomial.
///
/// All eigenvalues are real, so Descartes' rule is exact: the number of
/// positive roots equals the sign variations of `p(λ)`, negative roots those
/// of `p(-λ)`, with zero eigenvalues accounted for by trailing zero
/// coefficients. Independent of the congruence route.
pub fn signature_via_char_poly(mat: &Matrix<Rational>) -> (usize, usize) {
    let coeffs = char_poly(mat);
    let pos = sign_variations(coeffs.iter());
    let flipped: Vec<Rational> = coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| if i % 2 == 1 { -c.clone() } else { c.clone() })
        .collect();
    let neg = sign_variations(flipped.iter());
    (pos, neg)
}

fn sign_variations<'a>(coeffs: impl Iterator<Item = &'a Rational>) -> usize {
    let mut last: Option<bool> = None;
    let mut count = 0;
    for c in coeffs {
        if c.is_zero() {
            continue;
        }
        let s = c.is_positive();
        if let Some(prev) = last {
            if prev != s {
                count += 1;
            }
        }
        last = Some(s);
    }
    count
}

/// Rank of an integer matrix over the prime field F_p; a lower bound for the
/// rational rank, with equality for all but finitely many primes.
pub fn rank_mod_p(mat: &[Vec<i64>], p: i64) -> usize {
    let rows = mat.len();
    if rows == 0 {
        return 0;
    }
    let cols = mat[0].len();
    let mut m: Vec<Vec<i64>> = mat.iter().map(|r| r.iter().map(|&v| v.rem_euclid(p)).collect()).collect();
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..rows).find(|&i| m[i][c] % p != 0) else { continue };
        m.swap(r, piv);
        let inv = mod_inverse(m[r][c], p);
        for i in 0..rows {
            if i == r || m[i][c] == 0 {
                continue;
            }
            let f = m[i][c] * inv % p;
            for j in c..cols {
                m[i][j] = (m[i][j] - f * m[r][j]).rem_euclid(p);
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

fn mod_inverse(a: i64, p: i64) -> i64 {
    // extended Euclid
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (p, a.rem_euclid(p));
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    assert_eq!(r, 1, "not invertible mod p");
    t.rem_euclid(p)
}

/// Convert an integer matrix to rational entries.
pub fn to_rational(mat: &[Vec<i64>]) -> Matrix<Rational> {
    mat.iter()
        .map(|r| r.iter().map(|&v| Rational::from_integer(v.into())).collect())
        .collect()
}

/// Rationals to f64, for handing exact data to numeric code.
pub fn to_f64(mat: &Matrix<Rational>) -> Vec<Vec<f64>> {
    use num_traits::ToPrimitive;
    mat.iter().map(|r| r.iter().map(|v| v.to_f64().unwrap()).collect()).collect()
}

/// BigRational from an exact `BigInt` pair.
pub fn big_ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}
