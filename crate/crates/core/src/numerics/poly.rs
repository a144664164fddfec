use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Real polynomial with coefficients in ascending order: `coeffs[k]`
/// multiplies `z^k`. Trailing zeros are trimmed on construction, so the last
/// stored coefficient is the leading one (except for the zero polynomial,
/// stored as `[0.0]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficients"));
        }
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Ok(Self { coeffs })
    }

    /// Monic polynomial with the given roots. The roots must be closed under
    /// conjugation for the product to be real; imaginary residue is dropped
    /// after checking it is at rounding level.
    pub fn from_roots(roots: &[Complex64]) -> Result<Self> {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &root in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * root;
            }
            acc = next;
        }
        let scale = acc.iter().map(|c| c.norm()).fold(1.0, f64::max);
        if acc.iter().any(|c| c.im.abs() > 1e-9 * scale) {
            return Err(Error::Argument("roots are not closed under complex conjugation".into()));
        }
        Self::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn is_monic(&self) -> bool {
        self.leading() == 1.0
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    fn derivative_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, (k, &c)| acc * z + c * k as f64)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out).expect("product of finite polynomials")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            if first {
                write!(f, "{c}")?;
                first = false;
            } else if c < 0.0 {
                write!(f, " - {}", -c)?;
            } else {
                write!(f, " + {c}")?;
            }
            match k {
                0 => {}
                1 => write!(f, " z")?,
                _ => write!(f, " z^{k}")?,
            }
        }
        Ok(())
    }
}

const MAX_ITER: usize = 500;
const STEP_TOL: f64 = 1e-12;
const RESIDUAL_TOL: f64 = 1e-8;
// Fixed angular offset keeps the starting circle off the real axis symmetry.
const START_PHASE: f64 = 0.4;

/// `|p(z)|` is within a few ulps of the evaluation's own rounding error
/// `eps * sum |a_k| |z|^k`, so further steps only chase noise.
fn at_rounding_floor(p: &Polynomial, z: Complex64) -> bool {
    let r = z.norm();
    let scale = p.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs());
    p.eval_complex(z).norm() <= 8.0 * f64::EPSILON * scale
}

/// All complex roots of `p` by simultaneous (Durand–Kerner) iteration.
///
/// Exact zero roots are deflated first. The remaining roots start on a circle
/// of radius `1 + max |a_k / a_n|`, which encloses every root.
pub fn poly_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    let n = p.degree();
    if n < 1 {
        return Err(Error::Argument(format!(
            "root finding needs degree >= 1, got constant {p}"
        )));
    }
    let zero_roots = p.coeffs.iter().take_while(|&&c| c == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zero_roots];
    let reduced = Polynomial::new(p.coeffs[zero_roots..].to_vec())?;
    let m = reduced.degree();
    if m == 0 {
        return Ok(roots);
    }
    let lead = reduced.leading();
    let monic: Vec<f64> = reduced.coeffs.iter().map(|c| c / lead).collect();
    let monic = Polynomial { coeffs: monic };

    if m == 1 {
        roots.push(Complex64::new(-monic.coeffs[0], 0.0));
        return Ok(roots);
    }

    let radius = 1.0 + monic.coeffs[..m].iter().fold(0.0, |a: f64, c| a.max(c.abs()));
    let mut z: Vec<Complex64> = (0..m)
        .map(|k| {
            let theta = START_PHASE + std::f64::consts::TAU * k as f64 / m as f64;
            Complex64::from_polar(radius, theta)
        })
        .collect();

    for _ in 0..MAX_ITER {
        let mut max_step: f64 = 0.0;
        for k in 0..m {
            let zk = z[k];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in z.iter().enumerate() {
                if j != k {
                    denom *= zk - zj;
                }
            }
            if denom.norm() == 0.0 {
                // coincident iterates: nudge apart
                z[k] += Complex64::new(1e-10, 1e-10);
                max_step = f64::INFINITY;
                continue;
            }
            let step = monic.eval_complex(zk) / denom;
            z[k] = zk - step;
            max_step = max_step.max(step.norm() / zk.norm().max(1.0));
        }
        if max_step < STEP_TOL || z.iter().all(|&zk| at_rounding_floor(&monic, zk)) {
            break;
        }
    }

    // Newton polish, accepted only when the residual decreases.
    for zk in z.iter_mut() {
        for _ in 0..2 {
            let val = monic.eval_complex(*zk);
            let der = monic.derivative_complex(*zk);
            if der.norm() == 0.0 {
                break;
            }
            let cand = *zk - val / der;
            if monic.eval_complex(cand).norm() < val.norm() {
                *zk = cand;
            } else {
                break;
            }
        }
    }

    let scale = p.max_abs_coeff();
    for zk in &z {
        let bound = RESIDUAL_TOL * scale * zk.norm().max(1.0).powi(n as i32);
        if p.eval_complex(*zk).norm() > bound {
            return Err(Error::RootsNotConverged {
                poly: p.to_string(),
                iterations: MAX_ITER,
            });
        }
    }
    roots.extend(z);
    Ok(roots)
}
