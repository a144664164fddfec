//! Gain synthesis and stability analysis for the hard family: pole placement,
//! closed-loop characteristic polynomials, the two Jury necessary conditions
//! and the co-stabilizability ceiling.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{condition_number, poly_roots, solve_dare, spectral_radius, Matrix, Polynomial};
use crate::systems::{controllability_matrix, HardFamilyParams, LtiSystem};

/// Controllability matrices above this condition estimate are rejected.
pub const MAX_CTR_CONDITION: f64 = 1e12;

const REAL_POLE_TOL: f64 = 1e-12;
const CONJUGATE_TOL: f64 = 1e-9;

/// Row gain `K` with `u = K x`, and the poles it was placed at, if known.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackGain {
    pub k: Vec<f64>,
    pub designed_poles: Option<Vec<Complex64>>,
}

impl FeedbackGain {
    pub fn new(k: Vec<f64>) -> Self {
        Self {
            k,
            designed_poles: None,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.k
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostabBoundReport {
    /// `v^n prod (1 + p_i) / (r - p_i)`.
    pub bound: f64,
    /// `(2v / (r - 1))^n`.
    pub sup_bound: f64,
    /// `2 * sup_bound`.
    pub theorem_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JuryReport {
    /// `p(1)`.
    pub at_one: f64,
    /// `(-1)^n p(-1)`.
    pub at_minus_one: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub stabilizing: bool,
    pub spectral_radius: f64,
}

/// Real factor of a characteristic polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Factor {
    /// `z - p`
    Linear(f64),
    /// `z^2 - 2 re z + abs2`
    Quadratic { re: f64, abs2: f64 },
}

/// Groups poles into real factors, failing if the set is not conjugate
/// closed.
fn real_factors(poles: &[Complex64]) -> Result<Vec<Factor>> {
    let mut used = vec![false; poles.len()];
    let mut factors = Vec::with_capacity(poles.len());
    for i in 0..poles.len() {
        if used[i] {
            continue;
        }
        let p = poles[i];
        if !p.re.is_finite() || !p.im.is_finite() {
            return Err(Error::Argument(format!("pole {p} is not finite")));
        }
        used[i] = true;
        let scale = p.norm().max(1.0);
        if p.im.abs() <= REAL_POLE_TOL * scale {
            factors.push(Factor::Linear(p.re));
            continue;
        }
        let partner = (i + 1..poles.len())
            .filter(|&j| !used[j])
            .map(|j| (j, (poles[j] - p.conj()).norm()))
            .filter(|&(_, d)| d <= CONJUGATE_TOL * scale)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        match partner {
            Some((j, _)) => {
                used[j] = true;
                factors.push(Factor::Quadratic {
                    re: p.re,
                    abs2: p.norm_sqr(),
                });
            }
            None => {
                return Err(Error::Argument(format!(
                    "pole {p} has no conjugate partner; a real gain needs conjugate-closed poles"
                )))
            }
        }
    }
    Ok(factors)
}

fn check_stable_poles(poles: &[Complex64], n: usize) -> Result<()> {
    if poles.len() != n {
        return Err(Error::Dimension(format!("{} poles for dimension {n}", poles.len())));
    }
    if let Some(p) = poles.iter().find(|p| !(p.norm() < 1.0)) {
        return Err(Error::Argument(format!(
            "pole {p} is not strictly inside the unit circle"
        )));
    }
    Ok(())
}

/// Evaluates `prod (A - p_i I)` with conjugate pairs merged into real
/// quadratics.
fn charpoly_at_matrix(a: &Matrix, factors: &[Factor]) -> Matrix {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let mut acc = id.clone();
    let a2 = a * a;
    for f in factors {
        let term = match *f {
            Factor::Linear(p) => a - &id * p,
            Factor::Quadratic { re, abs2 } => &a2 - a * (2.0 * re) + &id * abs2,
        };
        acc *= term;
    }
    acc
}

/// Pole placement: the unique `K` with `spec(A + BK)` equal to `poles`.
///
/// Solves `Ctr^T y = e_n` for the last row of `Ctr^{-1}` and returns
/// `K = -y^T Delta(A)`.
pub fn ackermann_gain(sys: &LtiSystem, poles: &[Complex64]) -> Result<FeedbackGain> {
    let n = sys.dim();
    if poles.len() != n {
        return Err(Error::Dimension(format!("{} poles for dimension {n}", poles.len())));
    }
    let factors = real_factors(poles)?;
    let ctr = controllability_matrix(sys);
    let cond = condition_number(&ctr);
    if !(cond <= MAX_CTR_CONDITION) {
        return Err(Error::IllConditioned(cond));
    }
    let mut e_n = Matrix::zeros(n, 1);
    e_n[(n - 1, 0)] = 1.0;
    let y = ctr
        .transpose()
        .lu()
        .solve(&e_n)
        .ok_or(Error::Singular("controllability matrix"))?;
    let delta = charpoly_at_matrix(sys.a(), &factors);
    let k = -(y.transpose() * delta);
    Ok(FeedbackGain {
        k: k.iter().copied().collect(),
        designed_poles: Some(poles.to_vec()),
    })
}

/// `k_1 = -prod (r - p_i) / v^n` for the `b1 = 0` member.
pub fn k1_closed_form(params: &HardFamilyParams, poles: &[Complex64]) -> Result<f64> {
    check_stable_poles(poles, params.n)?;
    real_factors(poles)?;
    let prod = poles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, p| acc * (params.r - p));
    Ok(-prod.re / params.v.powi(params.n as i32))
}

/// Characteristic polynomial of `A + B_1 K` for the `b1 = 0` member, from its
/// closed-form coefficients.
pub fn closed_loop_charpoly(params: &HardFamilyParams, gain: &FeedbackGain) -> Result<Polynomial> {
    let n = params.n;
    if gain.len() != n {
        return Err(Error::Dimension(format!("gain length {} for n = {n}", gain.len())));
    }
    let (r, v, k) = (params.r, params.v, &gain.k);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    c[n - 1] = -(r + v * k[n - 1]);
    for j in 0..n - 1 {
        c[j] = v.powi((n - j - 1) as i32) * (r * k[j + 1] - v * k[j]);
    }
    Polynomial::new(c)
}

/// Adds the effect of a first-entry input perturbation `m` on a monic
/// closed-loop polynomial: the `z^{n-1}` coefficient moves by `-m k1`.
pub fn perturbed_charpoly(base: &Polynomial, m: f64, k1: f64) -> Result<Polynomial> {
    if !base.is_monic() || base.degree() < 1 {
        return Err(Error::Argument(format!("base polynomial must be monic, got {base}")));
    }
    let mut c = base.coeffs().to_vec();
    let n = base.degree();
    c[n - 1] -= m * k1;
    Polynomial::new(c)
}

/// The two necessary conditions for all roots to lie inside the unit
/// circle: `p(1) > 0` and `(-1)^n p(-1) > 0`.
pub fn jury_necessary(p: &Polynomial) -> Result<JuryReport> {
    if !(p.leading() > 0.0) {
        return Err(Error::Argument(format!(
            "leading coefficient must be positive, got {}",
            p.leading()
        )));
    }
    let at_one = p.eval(1.0);
    let sign = if p.degree().is_multiple_of(2) { 1.0 } else { -1.0 };
    let at_minus_one = sign * p.eval(-1.0);
    Ok(JuryReport {
        at_one,
        at_minus_one,
        pass: at_one > 0.0 && at_minus_one > 0.0,
    })
}

/// Largest perturbation a common stabilizing gain with these closed-loop
/// poles can tolerate, plus the pole-independent ceiling.
pub fn costab_bound(params: &HardFamilyParams, poles: &[Complex64]) -> Result<CostabBoundReport> {
    check_stable_poles(poles, params.n)?;
    real_factors(poles)?;
    let ratio = poles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, p| acc * (1.0 + p) / (params.r - p));
    let sup_bound = params.sup_bound();
    Ok(CostabBoundReport {
        bound: params.v.powi(params.n as i32) * ratio.re,
        sup_bound,
        theorem_m: 2.0 * sup_bound,
    })
}

/// Like [`costab_bound`], recovering the closed-loop poles of `S_1` from the
/// gain when it carries none. Recovered poles inherit root-finding error.
pub fn costab_bound_for_gain(
    params: &HardFamilyParams,
    gain: &FeedbackGain,
) -> Result<(CostabBoundReport, Vec<Complex64>)> {
    let poles = match &gain.designed_poles {
        Some(p) => p.clone(),
        None => poly_roots(&closed_loop_charpoly(params, gain)?)?,
    };
    Ok((costab_bound(params, &poles)?, poles))
}

/// `rho(A + BK) < 1`, strict, with the spectral radius reported.
pub fn is_stabilizing(sys: &LtiSystem, gain: &FeedbackGain) -> Result<StabilityReport> {
    let rho = spectral_radius(&sys.closed_loop(&gain.k)?)?;
    Ok(StabilityReport {
        stabilizing: rho < 1.0,
        spectral_radius: rho,
    })
}

/// Certainty-equivalent LQR gain: the Riccati gain for `(A, B(b1_hat))` with
/// `Q = I`, `R = 1`. `b1_hat` may be any finite estimate, including negative.
pub fn ce_lqr_gain(params: &HardFamilyParams, b1_hat: f64) -> Result<FeedbackGain> {
    if !b1_hat.is_finite() {
        return Err(Error::NonFinite("b1 estimate"));
    }
    let n = params.n;
    let a = params.a_matrix();
    let b = params.b_column(b1_hat);
    let sol = solve_dare(&a, &b, &Matrix::identity(n, n), &Matrix::identity(1, 1))?;
    Ok(FeedbackGain::new(sol.k.iter().copied().collect()))
}
