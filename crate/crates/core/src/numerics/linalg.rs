use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Above this dimension the gains of the hard family grow like `(r/v)^n`
/// and double precision starts to lose meaningful digits.
pub const CONDITIONING_WARN_DIM: usize = 12;

const SCHUR_MAX_ITER: usize = 10_000;

pub fn matrix_from_row_major(rows: usize, cols: usize, entries: &[f64]) -> Result<Matrix> {
    if entries.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "{} entries for a {rows}x{cols} matrix",
            entries.len()
        )));
    }
    let m = Matrix::from_row_slice(rows, cols, entries);
    ensure_finite(&m, "matrix")?;
    Ok(m)
}

pub fn ensure_finite(m: &Matrix, what: &'static str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn ensure_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Parlett–Reinsch balancing: a diagonal similarity by powers of two (exact
/// in floating point) that equalizes row and column norms. Graded matrices
/// such as pole-placed closed loops of the hard family lose far less
/// eigenvalue accuracy after it.
pub fn balance(m: &Matrix) -> Matrix {
    const RADIX: f64 = 2.0;
    let n = m.nrows();
    let mut b = m.clone();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            let (mut cs, rs) = (c, r);
            while cs < rs / RADIX {
                cs *= RADIX * RADIX;
                f *= RADIX;
            }
            while cs >= rs * RADIX {
                cs /= RADIX * RADIX;
                f /= RADIX;
            }
            if (c * f + r / f) < 0.95 * total {
                converged = false;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    b
}

/// All eigenvalues of a real square matrix, via the real Schur form of the
/// balanced matrix.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    ensure_square(m, "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n > CONDITIONING_WARN_DIM {
        log::warn!("eigenvalues of a {n}x{n} matrix: expect degraded accuracy beyond n = {CONDITIONING_WARN_DIM}");
    }
    let schur = Schur::try_new(balance(m), f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::EigenNotConverged(n))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues(m)?.into_iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_symmetric_eigenvalue(m: &Matrix) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// 2-norm condition number from the singular values; infinite when singular.
pub fn condition_number(m: &Matrix) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}
