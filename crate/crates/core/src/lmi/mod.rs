//! Common-Lyapunov co-stabilizability test and the bisection over the
//! perturbation size `m`.
//!
//! A gain `K` and `P > 0` with `(A + B_i K)^T P (A + B_i K) < P` for both
//! systems of the pair certify co-stabilizability. With `Q = P^-1` and
//! `Y = K Q` this becomes the linear matrix inequalities
//!
//! ```text
//!     | Q              (A Q + B_i Y)^T |
//!     | A Q + B_i Y    Q               |  > 0,   i = 1, 2.
//! ```
//!
//! In the original coordinates the hard family makes these blocks badly
//! scaled (the certificate's `Q` spans many orders of magnitude), so the
//! solver works in the controller-canonical basis of `S_1`, where the same
//! problem is well conditioned. A certificate is mapped back, rescaled and
//! then checked by exact rational substitution before it is returned.

mod barrier;
mod verify;

pub use barrier::{AffineBlock, BarrierOptions, BarrierStatus};
pub use verify::verify_common_lyapunov;

use crate::error::{Error, Result};
use crate::numerics::{min_symmetric_eigenvalue, Matrix, Vector};
use crate::synthesis::{is_stabilizing, FeedbackGain};
use crate::systems::{controllability_matrix, make_hard_pair, HardFamilyParams, HardPair};

/// Default strictness margin of the inequalities.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// The co-stabilizability inequalities for one pair, in solver form.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub pair: HardPair,
    /// Columns of the working basis `T`; working coordinates are `T^-1 x`.
    basis: Matrix,
    basis_inv: Matrix,
    a_w: Matrix,
    b_w: [Matrix; 2],
    blocks: Vec<AffineBlock>,
}

/// Index of the packed symmetric entry `(i, j)`, `i <= j`.
fn svec_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

fn sym_unit(n: usize, i: usize, j: usize) -> Matrix {
    let mut e = Matrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

/// `[[Q, M^T], [M, Q]]`.
fn schur_block(q: &Matrix, m: &Matrix) -> Matrix {
    let n = q.nrows();
    let mut g = Matrix::zeros(2 * n, 2 * n);
    g.view_mut((0, 0), (n, n)).copy_from(q);
    g.view_mut((n, n), (n, n)).copy_from(q);
    g.view_mut((n, 0), (n, n)).copy_from(m);
    g.view_mut((0, n), (n, n)).copy_from(&m.transpose());
    g
}

impl LmiProblem {
    pub fn n(&self) -> usize {
        self.pair.params.n
    }

    /// Two `2n x 2n` Lyapunov blocks, then `Q - tI` and `I - Q`.
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.size()).collect()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// `(T^-1 A T, [T^-1 B_1, T^-1 B_2])`.
    pub fn working_system(&self) -> (&Matrix, &[Matrix; 2]) {
        (&self.a_w, &self.b_w)
    }

    /// The two Schur-complement blocks at `(Q, Y)` in original coordinates.
    pub fn lmi_blocks(&self, q: &Matrix, y: &Matrix) -> [Matrix; 2] {
        let a = self.pair.s1.a();
        [self.pair.s1.b(), self.pair.s2.b()].map(|b| schur_block(q, &(a * q + b * y)))
    }

    fn n_vars(&self) -> usize {
        let n = self.n();
        n * (n + 1) / 2 + n + 1
    }

    fn unpack(&self, x: &Vector) -> (Matrix, Matrix, f64) {
        let n = self.n();
        let mut q = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = x[svec_index(n, i, j)];
                q[(i, j)] = v;
                q[(j, i)] = v;
            }
        }
        let off = n * (n + 1) / 2;
        let y = Matrix::from_iterator(1, n, x.rows(off, n).iter().copied());
        (q, y, x[off + n])
    }

    /// Strictly feasible start: `Q = I/2`, the deadbeat gain of `S_1` and a
    /// margin variable below every block's smallest eigenvalue.
    fn start(&self) -> Vector {
        let n = self.n();
        let mut x = Vector::zeros(self.n_vars());
        for i in 0..n {
            x[svec_index(n, i, i)] = 0.5;
        }
        let off = n * (n + 1) / 2;
        for j in 0..n {
            // B_1 = e_n in the working basis; cancel the companion row
            x[off + j] = -0.5 * self.a_w[(n - 1, j)];
        }
        let lowest = self.blocks[..2]
            .iter()
            .map(|b| min_symmetric_eigenvalue(&b.eval(&x)))
            .fold(0.5, f64::min);
        x[off + n] = lowest - 1.0;
        x
    }

    /// Maps a working-basis point to a certificate in original coordinates.
    fn recover(&self, x: &Vector) -> Result<(Matrix, Matrix, FeedbackGain, Matrix)> {
        let (q_w, y_w, _) = self.unpack(x);
        let q_w_inv = q_w.clone().try_inverse().ok_or(Error::Singular("certificate Q"))?;
        let k_w = &y_w * &q_w_inv;
        let k = &k_w * &self.basis_inv;
        // scaling by sigma_max(T)^2 keeps lambda_min(P) >= 1 and the
        // Lyapunov margin at least the working-basis margin
        let smax = self.basis.singular_values().max();
        let mut p = self.basis_inv.transpose() * q_w_inv * &self.basis_inv * (smax * smax);
        p = (&p + p.transpose()) * 0.5;
        let q = p.clone().try_inverse().ok_or(Error::Singular("certificate P"))?;
        let q = (&q + q.transpose()) * 0.5;
        let y = &k * &q;
        Ok((q, y, FeedbackGain::new(k.iter().copied().collect()), p))
    }
}

/// Builds the inequalities for `pair`.
pub fn build_costab_lmi(pair: &HardPair) -> Result<LmiProblem> {
    let params = pair.params;
    let n = params.n;
    if n > crate::numerics::CONDITIONING_WARN_DIM {
        log::warn!("co-stabilizability LMI at n = {n}: expect lost precision");
    }
    // T = Ctr(S_1) W with W the Hankel matrix of the characteristic
    // polynomial z^{n-1} (z - r) of A; then T^-1 A T is a companion matrix
    // and T^-1 B_1 = e_n.
    let mut charpoly = vec![0.0; n + 1];
    charpoly[n] = 1.0;
    charpoly[n - 1] = -params.r;
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n - i {
            w[(i, j)] = charpoly[i + j + 1];
        }
    }
    let basis = controllability_matrix(&pair.s1) * w;
    let basis_inv = basis.clone().try_inverse().ok_or(Error::Singular("working basis"))?;
    let a_w = &basis_inv * pair.s1.a() * &basis;
    let b_w = [&basis_inv * pair.s1.b(), &basis_inv * pair.s2.b()];

    let nq = n * (n + 1) / 2;
    let dim = nq + n + 1;
    let mut blocks = Vec::with_capacity(4);
    for b in &b_w {
        let mut fj = Vec::with_capacity(dim);
        for i in 0..n {
            for j in i..n {
                let e = sym_unit(n, i, j);
                fj.push(schur_block(&e, &(&a_w * &e)));
            }
        }
        for k in 0..n {
            let mut row = Matrix::zeros(1, n);
            row[(0, k)] = 1.0;
            fj.push(schur_block(&Matrix::zeros(n, n), &(b * row)));
        }
        fj.push(-Matrix::identity(2 * n, 2 * n));
        blocks.push(AffineBlock {
            f0: Matrix::zeros(2 * n, 2 * n),
            fj,
        });
    }
    let q_terms = |sign: f64| -> Vec<Matrix> {
        let mut fj: Vec<Matrix> = Vec::with_capacity(dim);
        for i in 0..n {
            for j in i..n {
                fj.push(sym_unit(n, i, j) * sign);
            }
        }
        fj.extend((0..n).map(|_| Matrix::zeros(n, n)));
        fj
    };
    let mut lower = q_terms(1.0);
    lower.push(-Matrix::identity(n, n));
    blocks.push(AffineBlock {
        f0: Matrix::zeros(n, n),
        fj: lower,
    });
    let mut upper = q_terms(-1.0);
    upper.push(Matrix::zeros(n, n));
    blocks.push(AffineBlock {
        f0: Matrix::identity(n, n),
        fj: upper,
    });

    Ok(LmiProblem {
        pair: pair.clone(),
        basis,
        basis_inv,
        a_w,
        b_w,
        blocks,
    })
}

/// A verified common Lyapunov certificate.
#[derive(Debug, Clone)]
pub struct LmiCertificate {
    /// `P^-1`.
    pub q: Matrix,
    /// `K Q`.
    pub y: Matrix,
    pub recovered_k: FeedbackGain,
    pub recovered_p: Matrix,
    /// Smallest eigenvalue over `P` and both `P - M_i^T P M_i` (f64 estimate;
    /// the exact check already passed at half the tolerance).
    pub margin: f64,
    /// Margin reached by the solver in the working basis.
    pub solver_margin: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(LmiCertificate),
    /// No certificate with margin >= tolerance exists (certified by the
    /// barrier bound or by stalled progress).
    Infeasible {
        best_margin: f64,
        /// Barrier-certified upper bound on the best margin, when available.
        upper_bound: Option<f64>,
        iterations: usize,
    },
    /// The solver could not decide (iteration cap, numerical breakdown, or a
    /// certificate that failed exact substitution).
    Inconclusive {
        best_margin: f64,
        iterations: usize,
        reason: String,
    },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::Feasible(_))
    }

    pub fn iterations(&self) -> usize {
        match self {
            Self::Feasible(c) => c.iterations,
            Self::Infeasible { iterations, .. } | Self::Inconclusive { iterations, .. } => *iterations,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Feasible(_) => "feasible",
            Self::Infeasible { .. } => "infeasible",
            Self::Inconclusive { .. } => "inconclusive",
        }
    }
}

/// Searches for a certificate with margin at least `tolerance`.
pub fn check_feasible(problem: &LmiProblem, tolerance: f64) -> Result<Feasibility> {
    if !(tolerance > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tolerance}")));
    }
    let opts = BarrierOptions {
        threshold: tolerance,
        target: 10.0 * tolerance,
        ..BarrierOptions::default()
    };
    let obj = problem.n_vars() - 1;
    let out = barrier::maximize(&problem.blocks, obj, problem.start(), &opts);
    let iterations = out.iterations;
    match out.status {
        BarrierStatus::BelowThreshold => {
            return Ok(Feasibility::Infeasible {
                best_margin: out.best_objective,
                upper_bound: out.upper_bound,
                iterations,
            })
        }
        BarrierStatus::Inconclusive => {
            return Ok(Feasibility::Inconclusive {
                best_margin: out.best_objective,
                iterations,
                reason: "solver stopped before reaching a decision".into(),
            })
        }
        BarrierStatus::Reached => {}
    }
    let inconclusive = |reason: &str| Feasibility::Inconclusive {
        best_margin: out.best_objective,
        iterations,
        reason: reason.to_string(),
    };
    let (q, y, gain, p) = match problem.recover(&out.x) {
        Ok(c) => c,
        Err(e) => return Ok(inconclusive(&e.to_string())),
    };
    let s1 = &problem.pair.s1;
    let s2 = &problem.pair.s2;
    if !verify_common_lyapunov(s1.a(), &[s1.b(), s2.b()], &gain.k, &p, 0.5 * tolerance) {
        return Ok(inconclusive("certificate failed exact substitution"));
    }
    let mut margin = min_symmetric_eigenvalue(&p);
    for sys in [s1, s2] {
        let m = sys.closed_loop(&gain.k)?;
        let d = &p - m.transpose() * &p * &m;
        margin = margin.min(min_symmetric_eigenvalue(&((&d + d.transpose()) * 0.5)));
    }
    Ok(Feasibility::Feasible(LmiCertificate {
        q,
        y,
        recovered_k: gain,
        recovered_p: p,
        margin,
        solver_margin: out.x[obj],
        iterations,
    }))
}

/// Convenience: build and check the pair with perturbation `m`.
pub fn probe(params: &HardFamilyParams, m: f64, tolerance: f64) -> Result<Feasibility> {
    check_feasible(&build_costab_lmi(&make_hard_pair(*params, m)?)?, tolerance)
}

#[derive(Debug, Clone, Copy)]
pub struct BisectionOptions {
    /// Strictness margin handed to [`check_feasible`].
    pub lmi_tolerance: f64,
    /// Stop once `hi - lo <= relative_tolerance * hi`.
    pub relative_tolerance: f64,
    pub max_probes: usize,
    /// Extra probes at `lo / 2, lo / 4, ...` after convergence, to catch
    /// non-monotone feasibility.
    pub monotonicity_probes: usize,
}

impl Default for BisectionOptions {
    fn default() -> Self {
        Self {
            lmi_tolerance: DEFAULT_TOLERANCE,
            relative_tolerance: 1e-3,
            max_probes: 200,
            monotonicity_probes: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeStatus {
    Feasible,
    Infeasible,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub m: f64,
    pub status: ProbeStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct BisectionResult {
    pub largest_feasible_m: f64,
    pub bracket: (f64, f64),
    /// Number of feasibility probes.
    pub iterations: usize,
    pub newton_iterations: usize,
    /// Certificate at `largest_feasible_m`.
    pub certificate: LmiCertificate,
    /// Some probe was inconclusive and was treated as infeasible.
    pub conservative: bool,
    pub trace: Vec<Probe>,
}

impl BisectionResult {
    pub fn status(&self) -> &'static str {
        if self.conservative {
            "conservative"
        } else {
            "ok"
        }
    }
}

/// Largest `m` in `[0, theorem_m]` for which the inequalities are feasible,
/// to relative precision `tolerance`.
pub fn bisect_largest_m(params: &HardFamilyParams, tolerance: f64) -> Result<BisectionResult> {
    bisect_largest_m_with(
        params,
        &BisectionOptions {
            relative_tolerance: tolerance,
            ..BisectionOptions::default()
        },
    )
}

pub fn bisect_largest_m_with(params: &HardFamilyParams, opts: &BisectionOptions) -> Result<BisectionResult> {
    if !(opts.relative_tolerance > 0.0) || !(opts.lmi_tolerance > 0.0) {
        return Err(Error::Argument("bisection tolerances must be positive".into()));
    }
    let params = params.with_b1(0.0)?;
    let mut trace = Vec::new();
    let mut newton = 0;
    let mut conservative = false;
    let mut run = |m: f64, trace: &mut Vec<Probe>| -> Result<Feasibility> {
        let f = probe(&params, m, opts.lmi_tolerance)?;
        newton += f.iterations();
        let status = match &f {
            Feasibility::Feasible(_) => ProbeStatus::Feasible,
            Feasibility::Infeasible { .. } => ProbeStatus::Infeasible,
            Feasibility::Inconclusive { reason, .. } => {
                log::warn!("inconclusive probe at m = {m:e} ({reason}); treated as infeasible");
                ProbeStatus::Inconclusive
            }
        };
        trace.push(Probe {
            m,
            status,
            iterations: f.iterations(),
        });
        Ok(f)
    };

    let mut certificate = match run(0.0, &mut trace)? {
        Feasibility::Feasible(c) => c,
        other => return Err(Error::BaseInfeasible(other.label().to_string())),
    };
    let (mut lo, mut hi) = (0.0, params.theorem_m());
    match run(hi, &mut trace)? {
        Feasibility::Feasible(_) => {
            return Err(Error::NonMonotone {
                feasible: hi,
                infeasible: f64::NAN,
            })
        }
        Feasibility::Inconclusive { .. } => conservative = true,
        Feasibility::Infeasible { .. } => {}
    }
    while hi - lo > opts.relative_tolerance * hi {
        if trace.len() >= opts.max_probes {
            log::warn!("bisection stopped at the probe cap with bracket [{lo:e}, {hi:e}]");
            conservative = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        match run(mid, &mut trace)? {
            Feasibility::Feasible(c) => {
                lo = mid;
                certificate = c;
            }
            Feasibility::Inconclusive { .. } => {
                conservative = true;
                hi = mid;
            }
            Feasibility::Infeasible { .. } => hi = mid,
        }
    }
    let mut below = lo;
    for _ in 0..opts.monotonicity_probes {
        below *= 0.5;
        if below == 0.0 {
            break;
        }
        run(below, &mut trace)?;
    }
    check_monotone(&trace)?;
    Ok(BisectionResult {
        largest_feasible_m: lo,
        bracket: (lo, hi),
        iterations: trace.len(),
        newton_iterations: newton,
        certificate,
        conservative,
        trace,
    })
}

/// Fails if a feasible probe sits above a probe that was decided infeasible.
pub fn check_monotone(trace: &[Probe]) -> Result<()> {
    let top_feasible = trace
        .iter()
        .filter(|p| p.status == ProbeStatus::Feasible)
        .map(|p| p.m)
        .fold(f64::NEG_INFINITY, f64::max);
    match trace
        .iter()
        .filter(|p| p.status == ProbeStatus::Infeasible && p.m < top_feasible)
        .map(|p| p.m)
        .reduce(f64::min)
    {
        Some(infeasible) => Err(Error::NonMonotone {
            feasible: top_feasible,
            infeasible,
        }),
        None => Ok(()),
    }
}

/// Both closed loops of a certificate's gain are stable.
pub fn certificate_stabilizes(pair: &HardPair, cert: &LmiCertificate) -> Result<bool> {
    Ok(is_stabilizing(&pair.s1, &cert.recovered_k)?.stabilizing
        && is_stabilizing(&pair.s2, &cert.recovered_k)?.stabilizing)
}
