use nalgebra::LU;

use super::linalg::{ensure_finite, spectral_radius, Matrix};
use crate::error::{Error, Result};

/// Accepted relative residual `||P - F(P)||_F / max(1, ||P||_F)`.
pub const RESIDUAL_TOL: f64 = 1e-9;

const FIXED_POINT_CAP: usize = 100_000;
const DOUBLING_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DareMethod {
    /// Structure-preserving doubling of the Riccati recursion. Iterate `k`
    /// equals step `2^k - 1` of the plain recursion started at `P = Q`.
    #[default]
    Doubling,
    /// Plain recursion `P <- A'PA - A'PB (R + B'PB)^-1 B'PA + Q` from `P = Q`.
    FixedPoint,
}

#[derive(Debug, Clone)]
pub struct DareSolution {
    pub p: Matrix,
    /// Optimal gain for `u = K x`, closed loop `A + B K`.
    pub k: Matrix,
    pub iterations: usize,
    pub residual: f64,
    pub closed_loop_radius: f64,
}

pub fn solve_dare(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<DareSolution> {
    solve_dare_with(a, b, q, r, DareMethod::default())
}

pub fn solve_dare_with(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, method: DareMethod) -> Result<DareSolution> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::Dimension(format!(
            "DARE shapes A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    for (m, what) in [(a, "A"), (b, "B"), (q, "Q"), (r, "R")] {
        ensure_finite(m, what)?;
    }
    let (p, iterations) = match method {
        DareMethod::Doubling => doubling(a, b, q, r)?,
        DareMethod::FixedPoint => fixed_point(a, b, q, r)?,
    };
    let residual = dare_residual(a, b, q, r, &p)?;
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::RiccatiNotConverged { iterations, residual });
    }
    let k = gain(a, b, r, &p)?;
    let closed_loop_radius = spectral_radius(&(a + b * &k))?;
    if !(closed_loop_radius < 1.0) {
        return Err(Error::NotStabilizable(closed_loop_radius));
    }
    Ok(DareSolution {
        p,
        k,
        iterations,
        residual,
        closed_loop_radius,
    })
}

fn riccati_map(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let pa = p * a;
    let bt_pa = b.transpose() * &pa;
    let s = r + b.transpose() * p * b;
    let solved = LU::new(s).solve(&bt_pa).ok_or(Error::Singular("R + B'PB"))?;
    let next = a.transpose() * &pa - bt_pa.transpose() * solved + q;
    Ok((&next + next.transpose()) * 0.5)
}

/// Relative residual of the Riccati fixed point at `p`.
pub fn dare_residual(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix, p: &Matrix) -> Result<f64> {
    let next = riccati_map(a, b, q, r, p)?;
    Ok((p - next).norm() / p.norm().max(1.0))
}

fn gain(a: &Matrix, b: &Matrix, r: &Matrix, p: &Matrix) -> Result<Matrix> {
    let s = r + b.transpose() * p * b;
    let rhs = b.transpose() * p * a;
    let k = LU::new(s).solve(&rhs).ok_or(Error::Singular("R + B'PB"))?;
    Ok(-k)
}

fn fixed_point(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<(Matrix, usize)> {
    let mut p = q.clone();
    for it in 1..=FIXED_POINT_CAP {
        let next = riccati_map(a, b, q, r, &p)?;
        let step = (&next - &p).norm() / next.norm().max(1.0);
        p = next;
        if step <= 1e-15 {
            return Ok((p, it));
        }
    }
    let residual = dare_residual(a, b, q, r, &p)?;
    if residual <= RESIDUAL_TOL {
        Ok((p, FIXED_POINT_CAP))
    } else {
        Err(Error::RiccatiNotConverged {
            iterations: FIXED_POINT_CAP,
            residual,
        })
    }
}

fn doubling(a: &Matrix, b: &Matrix, q: &Matrix, r: &Matrix) -> Result<(Matrix, usize)> {
    let n = a.nrows();
    let eye = Matrix::identity(n, n);
    let r_inv_bt = LU::new(r.clone()).solve(&b.transpose()).ok_or(Error::Singular("R"))?;
    let mut ak = a.clone();
    let mut gk = b * r_inv_bt;
    let mut hk = q.clone();
    for it in 1..=DOUBLING_CAP {
        let w = LU::new(&eye + &gk * &hk);
        let w_a = w.solve(&ak).ok_or(Error::Singular("I + GH"))?;
        let w_g = w.solve(&gk).ok_or(Error::Singular("I + GH"))?;
        let h_next = &hk + ak.transpose() * &hk * &w_a;
        let g_next = &gk + &ak * w_g * ak.transpose();
        let a_next = &ak * w_a;
        let h_next = (&h_next + h_next.transpose()) * 0.5;
        let g_next = (&g_next + g_next.transpose()) * 0.5;
        let step = (&h_next - &hk).norm() / h_next.norm().max(1.0);
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if hk.iter().any(|x| !x.is_finite()) {
            return Err(Error::RiccatiNotConverged {
                iterations: it,
                residual: f64::INFINITY,
            });
        }
        if step <= 1e-15 || ak.norm() <= 1e-300 {
            return Ok((hk, it));
        }
    }
    let residual = dare_residual(a, b, q, r, &hk)?;
    if residual <= RESIDUAL_TOL {
        Ok((hk, DOUBLING_CAP))
    } else {
        Err(Error::RiccatiNotConverged {
            iterations: DOUBLING_CAP,
            residual,
        })
    }
}
