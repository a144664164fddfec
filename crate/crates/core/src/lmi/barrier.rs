//! Log-determinant barrier path following for
//!
//! ```text
//!     maximize x[obj]  subject to  F_b(x) = F_b0 + sum_j x_j F_bj  > 0  for every block b
//! ```
//!
//! Small and dense: the co-stabilizability problem has at most a few dozen
//! variables and blocks of size at most 2n.

use nalgebra::Cholesky;

use crate::numerics::{Matrix, Vector};

/// One affine matrix inequality `F0 + sum_j x_j F_j > 0`.
#[derive(Debug, Clone)]
pub struct AffineBlock {
    pub f0: Matrix,
    pub fj: Vec<Matrix>,
}

impl AffineBlock {
    pub fn size(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, x: &Vector) -> Matrix {
        let mut f = self.f0.clone();
        for (xj, fj) in x.iter().zip(&self.fj) {
            if *xj != 0.0 {
                f += fj * *xj;
            }
        }
        f
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierOptions {
    /// Objective value that counts as success.
    pub threshold: f64,
    /// Stop early once the objective reaches this (>= threshold).
    pub target: f64,
    pub max_newton: usize,
    /// Consecutive Newton steps without improvement of the best objective
    /// (below `threshold`) after which the problem is declared infeasible.
    pub stall_limit: usize,
    pub barrier_growth: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            threshold: 1e-6,
            target: 1e-5,
            max_newton: 3000,
            stall_limit: 50,
            barrier_growth: 12.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarrierStatus {
    /// Objective reached the threshold.
    Reached,
    /// Certified or stalled below the threshold.
    BelowThreshold,
    /// Iteration cap or numerical breakdown.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct BarrierOutcome {
    pub status: BarrierStatus,
    pub x: Vector,
    pub best_objective: f64,
    /// Upper bound on the optimum from the last centred point, if any.
    pub upper_bound: Option<f64>,
    pub iterations: usize,
}

struct Factored {
    chol: Vec<Cholesky<f64, nalgebra::Dyn>>,
    logdet: f64,
}

fn factor(blocks: &[AffineBlock], x: &Vector) -> Option<Factored> {
    let mut chol = Vec::with_capacity(blocks.len());
    let mut logdet = 0.0;
    for b in blocks {
        let f = b.eval(x);
        let c = Cholesky::new(f)?;
        logdet += 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        chol.push(c);
    }
    logdet.is_finite().then_some(Factored { chol, logdet })
}

/// Gradient and Hessian of `-sum_b log det F_b(x)`.
fn barrier_derivatives(blocks: &[AffineBlock], fac: &Factored, dim: usize) -> (Vector, Matrix) {
    let mut g = Vector::zeros(dim);
    let mut h = Matrix::zeros(dim, dim);
    for (b, c) in blocks.iter().zip(&fac.chol) {
        let l = c.l();
        // S_j = L^-1 F_j L^-T
        let s: Vec<Matrix> =
            b.fj.iter()
                .map(|fj| {
                    let w = l.solve_lower_triangular(fj).expect("cholesky factor is nonsingular");
                    l.solve_lower_triangular(&w.transpose())
                        .expect("cholesky factor is nonsingular")
                })
                .collect();
        for j in 0..dim {
            g[j] -= s[j].trace();
            for k in 0..=j {
                let v = s[j].dot(&s[k]);
                h[(j, k)] += v;
                if k != j {
                    h[(k, j)] += v;
                }
            }
        }
    }
    (g, h)
}

/// Newton direction for `H d = -g`, with Jacobi scaling and a small ridge if
/// the Hessian is numerically singular.
fn newton_direction(g: &Vector, h: &Matrix) -> Option<Vector> {
    let d: Vector = h.diagonal().map(|v| if v > 0.0 { 1.0 / v.sqrt() } else { 1.0 });
    let mut scaled = h.clone();
    for i in 0..scaled.nrows() {
        for j in 0..scaled.ncols() {
            scaled[(i, j)] *= d[i] * d[j];
        }
    }
    let rhs = -g.component_mul(&d);
    let mut ridge = 0.0;
    for _ in 0..8 {
        let mut m = scaled.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::new(m) {
            return Some(c.solve(&rhs).component_mul(&d));
        }
        ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
    }
    None
}

/// Maximizes `x[obj]` from the strictly feasible start `x0`.
pub fn maximize(blocks: &[AffineBlock], obj: usize, x0: Vector, opts: &BarrierOptions) -> BarrierOutcome {
    let dim = x0.len();
    let nu: f64 = blocks.iter().map(|b| b.size() as f64).sum();
    let mut x = x0;
    let Some(mut fac) = factor(blocks, &x) else {
        return BarrierOutcome {
            status: BarrierStatus::Inconclusive,
            best_objective: f64::NEG_INFINITY,
            x,
            upper_bound: None,
            iterations: 0,
        };
    };
    let mut s = 1.0;
    let mut best = x[obj];
    let mut stalled = 0;
    let mut iterations = 0;
    let mut upper_bound = None;
    let outcome = |status, x: Vector, best, upper_bound, iterations| BarrierOutcome {
        status,
        x,
        best_objective: best,
        upper_bound,
        iterations,
    };

    loop {
        // centring at barrier weight s
        loop {
            if iterations >= opts.max_newton {
                return outcome(BarrierStatus::Inconclusive, x, best, upper_bound, iterations);
            }
            iterations += 1;
            let (mut g, h) = barrier_derivatives(blocks, &fac, dim);
            g[obj] -= s;
            let Some(dir) = newton_direction(&g, &h) else {
                return outcome(BarrierStatus::Inconclusive, x, best, upper_bound, iterations);
            };
            let decrement = -g.dot(&dir);
            if decrement < 1e-7 {
                break;
            }
            let phi = -s * x[obj] - fac.logdet;
            let mut alpha = 1.0;
            let accepted = loop {
                if alpha < 1e-14 {
                    break None;
                }
                let trial = &x + &dir * alpha;
                if let Some(f) = factor(blocks, &trial) {
                    let phi_t = -s * trial[obj] - f.logdet;
                    if phi_t <= phi - 0.25 * alpha * decrement {
                        break Some((trial, f));
                    }
                }
                alpha *= 0.5;
            };
            let Some((nx, nf)) = accepted else {
                if decrement > 1e-3 {
                    return outcome(BarrierStatus::Inconclusive, x, best, upper_bound, iterations);
                }
                // rounding-limited but close to centred
                break;
            };
            x = nx;
            fac = nf;
            if x[obj] > best + 1e-3 * opts.threshold {
                stalled = 0;
            } else {
                stalled += 1;
            }
            best = best.max(x[obj]);
            if x[obj] >= opts.target {
                return outcome(BarrierStatus::Reached, x, best, upper_bound, iterations);
            }
            if stalled >= opts.stall_limit && best < opts.threshold {
                return outcome(BarrierStatus::BelowThreshold, x, best, upper_bound, iterations);
            }
        }
        // approximately centred: the optimum lies below x[obj] + nu / s; the
        // factor 1.5 covers the residual centring error
        let bound = x[obj] + 1.5 * nu / s;
        upper_bound = Some(upper_bound.map_or(bound, |u: f64| u.min(bound)));
        if bound < opts.threshold {
            return outcome(BarrierStatus::BelowThreshold, x, best, upper_bound, iterations);
        }
        if x[obj] >= opts.threshold && nu / s < 0.1 * opts.threshold {
            return outcome(BarrierStatus::Reached, x, best, upper_bound, iterations);
        }
        if nu / s < 1e-3 * opts.threshold {
            // converged onto the threshold without deciding
            return outcome(BarrierStatus::Inconclusive, x, best, upper_bound, iterations);
        }
        s *= opts.barrier_growth;
    }
}
