//! Exact substitution check of a common Lyapunov certificate.
//!
//! Every `f64` is a dyadic rational, so the matrices the certificate actually
//! stores can be checked without rounding: the Lyapunov differences are formed
//! in `BigRational` and positive definiteness is decided by the signs of the
//! pivots of an exact symmetric elimination.

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::numerics::Matrix;

type RMatrix = Vec<Vec<BigRational>>;

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

fn to_exact(m: &Matrix) -> RMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| exact(m[(i, j)])).collect())
        .collect()
}

fn mul(a: &RMatrix, b: &RMatrix) -> RMatrix {
    let (n, k, p) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| {
            (0..p)
                .map(|j| {
                    (0..k).fold(BigRational::zero(), |acc, l| {
                        if a[i][l].is_zero() || b[l][j].is_zero() {
                            acc
                        } else {
                            acc + &a[i][l] * &b[l][j]
                        }
                    })
                })
                .collect()
        })
        .collect()
}

fn transpose(a: &RMatrix) -> RMatrix {
    (0..a[0].len())
        .map(|j| a.iter().map(|row| row[j].clone()).collect())
        .collect()
}

/// Symmetric elimination without pivoting: a symmetric matrix is positive
/// definite iff every pivot is positive.
#[allow(clippy::needless_range_loop)]
pub fn is_positive_definite(mut m: RMatrix) -> bool {
    let n = m.len();
    for k in 0..n {
        if !m[k][k].is_positive() {
            return false;
        }
        for i in k + 1..n {
            if m[i][k].is_zero() {
                continue;
            }
            let factor = &m[i][k] / &m[k][k];
            for j in k + 1..n {
                if !m[k][j].is_zero() {
                    let d = &factor * &m[k][j];
                    m[i][j] -= d;
                }
            }
        }
    }
    true
}

/// `P - slack I > 0` and `P - M_i^T P M_i - slack I > 0` for every
/// `M_i = A + B_i K`, decided exactly. `p` must be exactly symmetric.
pub fn verify_common_lyapunov(a: &Matrix, bs: &[&Matrix], k: &[f64], p: &Matrix, slack: f64) -> bool {
    let n = a.nrows();
    if p != &p.transpose() {
        return false;
    }
    let pe = to_exact(p);
    let s = exact(slack);
    let shifted = |mut m: RMatrix| {
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= &s;
        }
        m
    };
    if !is_positive_definite(shifted(pe.clone())) {
        return false;
    }
    let ke: Vec<BigRational> = k.iter().map(|&x| exact(x)).collect();
    let ae = to_exact(a);
    bs.iter().all(|b| {
        let be: Vec<BigRational> = (0..n).map(|i| exact(b[(i, 0)])).collect();
        let closed: RMatrix = (0..n)
            .map(|i| (0..n).map(|j| &ae[i][j] + &be[i] * &ke[j]).collect())
            .collect();
        let mtpm = mul(&transpose(&closed), &mul(&pe, &closed));
        let diff: RMatrix = (0..n)
            .map(|i| (0..n).map(|j| &pe[i][j] - &mtpm[i][j]).collect())
            .collect();
        is_positive_definite(shifted(diff))
    })
}
