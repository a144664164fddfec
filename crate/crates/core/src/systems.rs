//! The parametric hard family, the close pair built from it, trajectory
//! simulation and the least-squares estimate of the unknown input gain.
//!
//! Every system here is single input and starts from `x_0 = 0`. Noise is
//! isotropic Gaussian, `w_t ~ N(0, noise_variance * I)`.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{ensure_finite, fmt_f64, Matrix, Prng, Vector};

/// States beyond this magnitude count as a diverged rollout.
pub const DIVERGENCE_LIMIT: f64 = 1e300;

/// Channel of a trial's [`Prng`] that feeds the input policy. Noise
/// coordinate `j` (1-based) draws from channel `j`.
pub const INPUT_CHANNEL: u16 = 0;

/// Parameters `(n, r, v, b1)` of the family
///
/// ```text
///     | r v 0 ... 0 |        | b1 |
///     | 0 0 v ... 0 |        | 0  |
/// A = |     ...     |,   B = | .. |
///     | 0 0 0 ... v |        | 0  |
///     | 0 0 0 ... 0 |        | v  |
/// ```
///
/// with `n >= 2`, `r > 1`, `0 < v < (r - 1) / 2` and `b1 >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardFamilyParams {
    pub n: usize,
    pub r: f64,
    pub v: f64,
    pub b1: f64,
}

impl HardFamilyParams {
    pub fn new(n: usize, r: f64, v: f64, b1: f64) -> Result<Self> {
        let p = Self { n, r, v, b1 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let Self { n, r, v, b1 } = *self;
        if n < 2 {
            return Err(Error::Parameter(format!("n must be at least 2, got {n}")));
        }
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::Parameter(format!("r must exceed 1, got {r}")));
        }
        if !(v > 0.0 && v < (r - 1.0) / 2.0) {
            return Err(Error::Parameter(format!(
                "v must lie in (0, {}), got {v}",
                (r - 1.0) / 2.0
            )));
        }
        if !(b1 >= 0.0) || !b1.is_finite() {
            return Err(Error::Parameter(format!("b1 must be non-negative, got {b1}")));
        }
        if n > crate::numerics::CONDITIONING_WARN_DIM {
            log::warn!(
                "n = {n}: stabilizing gains grow like (r/v)^n = {:e}, expect lost precision",
                (r / v).powi(n as i32)
            );
        }
        Ok(())
    }

    pub fn with_b1(&self, b1: f64) -> Result<Self> {
        Self::new(self.n, self.r, self.v, b1)
    }

    pub fn a_matrix(&self) -> Matrix {
        let n = self.n;
        let mut a = Matrix::zeros(n, n);
        a[(0, 0)] = self.r;
        for i in 0..n - 1 {
            a[(i, i + 1)] = self.v;
        }
        a
    }

    /// Input column with first entry `b1` and last entry `v`. `b1` is not
    /// range checked here so tests can reach the uncontrollable point.
    pub fn b_column(&self, b1: f64) -> Matrix {
        let mut b = Matrix::zeros(self.n, 1);
        b[(0, 0)] = b1;
        b[(self.n - 1, 0)] += self.v;
        b
    }

    pub fn system(&self, noise_variance: f64) -> Result<LtiSystem> {
        LtiSystem::new(self.a_matrix(), self.b_column(self.b1), noise_variance)
    }

    /// `(2v / (r - 1))^n`, the supremum of the co-stabilizability ceiling.
    pub fn sup_bound(&self) -> f64 {
        (2.0 * self.v / (self.r - 1.0)).powi(self.n as i32)
    }

    /// Perturbation size `2 (2v / (r - 1))^n` at which no common gain exists.
    pub fn theorem_m(&self) -> f64 {
        2.0 * self.sup_bound()
    }
}

/// `x_{t+1} = A x_t + B u_t + w_t`, single input.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: Matrix,
    b: Matrix,
    noise_variance: f64,
}

impl LtiSystem {
    pub fn new(a: Matrix, b: Matrix, noise_variance: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if b.shape() != (a.nrows(), 1) {
            return Err(Error::Dimension(format!(
                "B must be {}x1, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        if !(noise_variance >= 0.0) || !noise_variance.is_finite() {
            return Err(Error::Argument(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        Ok(Self { a, b, noise_variance })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn with_noise_variance(&self, noise_variance: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), noise_variance)
    }

    /// `max(||A||_2, ||B||_2)`. Reported as metadata only; nothing downstream
    /// enforces a norm bound.
    pub fn norm_bound(&self) -> f64 {
        let sa = self.a.singular_values().max();
        self.b.norm().max(sa)
    }

    pub fn closed_loop(&self, gain: &[f64]) -> Result<Matrix> {
        if gain.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "gain has {} entries for a system of dimension {}",
                gain.len(),
                self.dim()
            )));
        }
        let k = Matrix::from_row_slice(1, gain.len(), gain);
        Ok(&self.a + &self.b * k)
    }
}

/// Systems `S1 = (A, B(b1 = 0))` and `S2 = (A, B(b1 = m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct HardPair {
    pub s1: LtiSystem,
    pub s2: LtiSystem,
    pub m: f64,
    pub params: HardFamilyParams,
}

impl HardPair {
    pub fn with_noise_variance(self, noise_variance: f64) -> Result<Self> {
        Ok(Self {
            s1: self.s1.with_noise_variance(noise_variance)?,
            s2: self.s2.with_noise_variance(noise_variance)?,
            ..self
        })
    }
}

/// Builds the pair; `params.b1` is ignored (S1 always has `b1 = 0`).
/// Both systems start noiseless; see [`HardPair::with_noise_variance`].
pub fn make_hard_pair(params: HardFamilyParams, m: f64) -> Result<HardPair> {
    let base = params.with_b1(0.0)?;
    if !(m >= 0.0) || !m.is_finite() {
        return Err(Error::Parameter(format!("m must be non-negative, got {m}")));
    }
    let a = base.a_matrix();
    Ok(HardPair {
        s1: LtiSystem::new(a.clone(), base.b_column(0.0), 0.0)?,
        s2: LtiSystem::new(a, base.b_column(m), 0.0)?,
        m,
        params: base,
    })
}

/// `[B, AB, ..., A^{n-1} B]`.
pub fn controllability_matrix(sys: &LtiSystem) -> Matrix {
    let n = sys.dim();
    let mut ctr = Matrix::zeros(n, n);
    let mut col = sys.b.clone();
    for k in 0..n {
        ctr.set_column(k, &col.column(0));
        col = &sys.a * col;
    }
    ctr
}

/// Input-state sample path `u_{0:N-1}`, `x_{0:N}`, with the stream that
/// produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub inputs: Vec<f64>,
    pub states: Vec<Vector>,
    pub seed: u64,
    pub stream: u64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.inputs.len()
    }

    pub const fn csv_header_prefix() -> &'static str {
        "t,u"
    }

    /// CSV with header `t,u,x1,...,xn`; row `t` holds `u_t` and `x_t`. The
    /// last row has an empty input field.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states.first().map_or(0, |x| x.len());
        write!(w, "{}", Self::csv_header_prefix())?;
        for i in 1..=n {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for (t, x) in self.states.iter().enumerate() {
            write!(w, "{t},")?;
            if let Some(&u) = self.inputs.get(t) {
                write!(w, "{}", fmt_f64(u))?;
            }
            for xi in x.iter() {
                write!(w, ",{}", fmt_f64(*xi))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// What a policy sees when choosing `u_t`.
pub struct History<'a> {
    pub t: usize,
    /// `u_0..u_{t-1}`; empty in lean rollouts.
    pub inputs: &'a [f64],
    /// `x_0..=x_t`; only `x_t` in lean rollouts, empty on the innovation
    /// path.
    pub states: &'a [Vector],
}

pub type HistoryMap = Arc<dyn Fn(&History<'_>, &mut Prng) -> f64 + Send + Sync>;

/// Exploration policy `pi_t`: maps the history so far to the next input.
#[derive(Clone)]
pub enum InputPolicy {
    /// `u_t ~ N(0, variance)` i.i.d.; meets the second-moment budget with
    /// equality.
    IidGaussian {
        variance: f64,
    },
    Zero,
    Impulse {
        time: usize,
        amplitude: f64,
    },
    /// `u_t = K x_t`.
    StateFeedback(Vec<f64>),
    Custom {
        map: HistoryMap,
        reads_state: bool,
    },
}

impl InputPolicy {
    pub fn iid_gaussian(variance: f64) -> Result<Self> {
        if !(variance >= 0.0) || !variance.is_finite() {
            return Err(Error::Argument(format!(
                "input variance must be non-negative, got {variance}"
            )));
        }
        Ok(Self::IidGaussian { variance })
    }

    pub fn custom(map: HistoryMap) -> Self {
        Self::Custom { map, reads_state: true }
    }

    /// Custom policy promising not to read `History::states`.
    pub fn open_loop(map: HistoryMap) -> Self {
        Self::Custom {
            map,
            reads_state: false,
        }
    }

    pub fn reads_state(&self) -> bool {
        match self {
            Self::StateFeedback(_) => true,
            Self::Custom { reads_state, .. } => *reads_state,
            _ => false,
        }
    }

    pub fn next_input(&self, history: &History<'_>, rng: &mut Prng) -> f64 {
        match self {
            Self::IidGaussian { variance } => rng.normal(0.0, variance.sqrt()),
            Self::Zero => 0.0,
            Self::Impulse { time, amplitude } => {
                if history.t == *time {
                    *amplitude
                } else {
                    0.0
                }
            }
            Self::StateFeedback(k) => {
                let x = history.states.last().expect("history holds the current state");
                k.iter().zip(x.iter()).map(|(ki, xi)| ki * xi).sum()
            }
            Self::Custom { map, .. } => map(history, rng),
        }
    }
}

impl fmt::Debug for InputPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::IidGaussian { variance } => write!(f, "IidGaussian({variance})"),
            Self::Zero => write!(f, "Zero"),
            Self::Impulse { time, amplitude } => write!(f, "Impulse({time}, {amplitude})"),
            Self::StateFeedback(k) => write!(f, "StateFeedback({k:?})"),
            Self::Custom { reads_state, .. } => write!(f, "Custom(reads_state = {reads_state})"),
        }
    }
}

pub type TerminalMap = Arc<dyn Fn(&Trajectory) -> Result<Vec<f64>> + Send + Sync>;

/// A learning-to-stabilize algorithm: explore for `N` steps, then map the
/// collected trajectory to a gain.
#[derive(Clone)]
pub struct LearningAlgorithm {
    pub exploration: InputPolicy,
    pub terminal: TerminalMap,
}

impl LearningAlgorithm {
    pub fn run(&self, sys: &LtiSystem, horizon: usize, rng: &Prng) -> Result<(Trajectory, Vec<f64>)> {
        let traj = simulate(sys, &self.exploration, horizon, rng)?;
        let gain = (self.terminal)(&traj)?;
        Ok((traj, gain))
    }
}

/// Step-by-step rollout from `x_0 = 0`.
///
/// Inputs come from channel [`INPUT_CHANNEL`] of the `Prng`, noise coordinate
/// `j` from channel `j`, so prefixes of a long run equal shorter runs.
#[derive(Clone)]
pub struct Rollout<'a> {
    sys: &'a LtiSystem,
    policy: &'a InputPolicy,
    input_rng: Prng,
    noise_rngs: Vec<Prng>,
    noise_sd: f64,
    inputs: Vec<f64>,
    states: Vec<Vector>,
    seed: u64,
    stream: u64,
    lean: bool,
    steps: usize,
}

impl<'a> Rollout<'a> {
    /// Keeps the whole trajectory.
    pub fn new(sys: &'a LtiSystem, policy: &'a InputPolicy, rng: &Prng) -> Self {
        Self::build(sys, policy, rng, false)
    }

    /// Keeps only the current state and last input. Policies then see a
    /// history holding just `x_t`.
    pub fn lean(sys: &'a LtiSystem, policy: &'a InputPolicy, rng: &Prng) -> Self {
        Self::build(sys, policy, rng, true)
    }

    fn build(sys: &'a LtiSystem, policy: &'a InputPolicy, rng: &Prng, lean: bool) -> Self {
        let n = sys.dim();
        Self {
            sys,
            policy,
            input_rng: rng.channel(INPUT_CHANNEL),
            noise_rngs: (1..=n).map(|j| rng.channel(j as u16)).collect(),
            noise_sd: sys.noise_variance.sqrt(),
            inputs: Vec::new(),
            states: vec![Vector::zeros(n)],
            seed: rng.seed(),
            stream: rng.stream(),
            lean,
            steps: 0,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn current_state(&self) -> &Vector {
        self.states.last().expect("rollout always holds a state")
    }

    pub fn last_input(&self) -> Option<f64> {
        self.inputs.last().copied()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn states(&self) -> &[Vector] {
        &self.states
    }

    /// Applies one input and noise draw; fails once any state entry leaves
    /// [`DIVERGENCE_LIMIT`].
    pub fn step(&mut self) -> Result<()> {
        let t = self.steps;
        let history = History {
            t,
            inputs: if self.lean { &[] } else { &self.inputs },
            states: &self.states,
        };
        let u = self.policy.next_input(&history, &mut self.input_rng);
        let mut next = self.sys.a() * self.current_state() + self.sys.b().column(0) * u;
        for (xj, nrng) in next.iter_mut().zip(self.noise_rngs.iter_mut()) {
            *xj += self.noise_sd * nrng.standard_normal();
        }
        if !u.is_finite() || next.iter().any(|x| !(x.abs() <= DIVERGENCE_LIMIT)) {
            return Err(Error::Diverged { step: t + 1 });
        }
        if self.lean {
            self.inputs.clear();
            self.states.clear();
        }
        self.inputs.push(u);
        self.states.push(next);
        self.steps += 1;
        Ok(())
    }

    /// The recorded path; for lean rollouts only the final step.
    pub fn into_trajectory(self) -> Trajectory {
        Trajectory {
            inputs: self.inputs,
            states: self.states,
            seed: self.seed,
            stream: self.stream,
        }
    }
}

/// Rolls the system forward from `x_0 = 0` for `horizon` steps.
pub fn simulate(sys: &LtiSystem, policy: &InputPolicy, horizon: usize, rng: &Prng) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let mut rollout = Rollout::new(sys, policy, rng);
    for _ in 0..horizon {
        rollout.step()?;
    }
    Ok(rollout.into_trajectory())
}

/// Running sufficient statistics of the one-parameter regression
/// `innovation_t = b1 * u_{t-1} + noise`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct B1Regression {
    cross: f64,
    energy: f64,
    samples: usize,
}

impl B1Regression {
    pub fn push(&mut self, u_prev: f64, innovation: f64) {
        self.cross += u_prev * innovation;
        self.energy += u_prev * u_prev;
        self.samples += 1;
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Exact minimizer of `sum (innovation - b u)^2`.
    pub fn estimate(&self) -> Result<f64> {
        if self.energy == 0.0 {
            Err(Error::NoExcitation)
        } else {
            Ok(self.cross / self.energy)
        }
    }
}

/// Least-squares estimate of `b1` from a trajectory, with `r` and `v` known.
///
/// Uses the residuals `x_t^(1) - r x_{t-1}^(1) - v x_{t-1}^(2)`. The
/// open-loop family grows like `r^t`, so once `|x^(1)|` passes about 2^52 the
/// stored states no longer resolve the residual; long horizons should use
/// [`InnovationStream`] instead.
pub fn ls_estimate_b1(traj: &Trajectory, params: &HardFamilyParams) -> Result<f64> {
    if traj.states.len() != traj.inputs.len() + 1 {
        return Err(Error::Dimension(format!(
            "{} states for {} inputs",
            traj.states.len(),
            traj.inputs.len()
        )));
    }
    if traj.states.first().is_none_or(|x| x.len() != params.n) {
        return Err(Error::Dimension("state dimension differs from params.n".into()));
    }
    let mut reg = B1Regression::default();
    let mut peak: f64 = 0.0;
    for t in 1..traj.states.len() {
        let prev = &traj.states[t - 1];
        let res = traj.states[t][0] - params.r * prev[0] - params.v * prev[1];
        peak = peak.max(prev[0].abs());
        reg.push(traj.inputs[t - 1], res);
    }
    if peak > (1u64 << 52) as f64 {
        log::warn!("least squares on states up to {peak:e}: residuals are rounding-limited");
    }
    reg.estimate()
}

/// First-coordinate one-step innovations `x_{t+1}^(1) - (A x_t)^(1)` of an
/// open-loop rollout, generated without forming the states.
///
/// The innovation equals `B^(1) u_t + w_t^(1)` exactly, and the input and
/// noise draws come from the same channels [`simulate`] uses, so the stream
/// reproduces what an exact-arithmetic rollout with the same `Prng` would
/// give. Unlike the states themselves it never overflows.
#[derive(Clone)]
pub struct InnovationStream {
    b_first: f64,
    noise_sd: f64,
    policy: InputPolicy,
    input_rng: Prng,
    noise_rng: Prng,
    inputs: Vec<f64>,
    keep_inputs: bool,
    t: usize,
}

impl InnovationStream {
    pub fn new(sys: &LtiSystem, policy: &InputPolicy, rng: &Prng) -> Result<Self> {
        if policy.reads_state() {
            return Err(Error::StateDependentPolicy);
        }
        Ok(Self {
            b_first: sys.b[(0, 0)],
            noise_sd: sys.noise_variance.sqrt(),
            keep_inputs: matches!(policy, InputPolicy::Custom { .. }),
            policy: policy.clone(),
            input_rng: rng.channel(INPUT_CHANNEL),
            noise_rng: rng.channel(1),
            inputs: Vec::new(),
            t: 0,
        })
    }

    /// Steps taken so far.
    pub fn position(&self) -> usize {
        self.t
    }

    /// Returns `(u_t, innovation_{t+1})` and advances by one step.
    pub fn step(&mut self) -> (f64, f64) {
        let history = History {
            t: self.t,
            inputs: &self.inputs,
            states: &[],
        };
        let u = self.policy.next_input(&history, &mut self.input_rng);
        let w = self.noise_sd * self.noise_rng.standard_normal();
        if self.keep_inputs {
            self.inputs.push(u);
        }
        self.t += 1;
        (u, self.b_first * u + w)
    }
}

impl Iterator for InnovationStream {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.step())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(n: usize) -> HardFamilyParams {
        HardFamilyParams::new(n, 3.2, 1.01, 0.0).unwrap()
    }

    #[test]
    fn pair_structure_n2() {
        let pair = make_hard_pair(params(2), 0.1).unwrap();
        assert_eq!(pair.s1.a(), &Matrix::from_row_slice(2, 2, &[3.2, 1.01, 0.0, 0.0]));
        assert_eq!(pair.s1.b(), &Matrix::from_row_slice(2, 1, &[0.0, 1.01]));
        assert_eq!(pair.s2.b(), &Matrix::from_row_slice(2, 1, &[0.1, 1.01]));
        assert_eq!(pair.s1.a(), pair.s2.a());
    }

    #[test]
    fn a_nonzeros_n3() {
        let a = params(3).a_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let expect = match (i, j) {
                    (0, 0) => 3.2,
                    (0, 1) | (1, 2) => 1.01,
                    _ => 0.0,
                };
                assert_eq!(a[(i, j)], expect);
            }
        }
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            HardFamilyParams::new(2, 3.2, 1.2, 0.0),
            Err(Error::Parameter(_))
        ));
        assert!(HardFamilyParams::new(2, 1.0, 0.1, 0.0).is_err());
        assert!(HardFamilyParams::new(1, 3.2, 0.5, 0.0).is_err());
        assert!(HardFamilyParams::new(2, 3.2, 0.5, -0.1).is_err());
        assert!(make_hard_pair(params(2), -1.0).is_err());
    }

    #[test]
    fn controllability_n2() {
        let sys = params(2).system(0.0).unwrap();
        let ctr = controllability_matrix(&sys);
        assert_eq!(ctr, Matrix::from_row_slice(2, 2, &[0.0, 1.01 * 1.01, 1.01, 0.0]));
    }

    #[test]
    fn uncontrollable_point_has_singular_ctr() {
        for n in 2..=8 {
            let p = params(n);
            let b1 = -p.v.powi(n as i32) / p.r.powi(n as i32 - 1);
            let sys = LtiSystem::new(p.a_matrix(), p.b_column(b1), 0.0).unwrap();
            let ctr = controllability_matrix(&sys);
            let det = ctr.clone().determinant();
            assert!(det.abs() <= 1e-9 * ctr.norm(), "n={n} det={det}");
        }
    }

    #[test]
    fn last_row_of_inverse_ctr() {
        for n in 2..=10 {
            for (r, v) in [(3.2, 1.01), (2.0, 0.3), (5.0, 1.9)] {
                let p = HardFamilyParams::new(n, r, v, 0.0).unwrap();
                let ctr = controllability_matrix(&p.system(0.0).unwrap());
                let inv = ctr.try_inverse().unwrap();
                let expect = v.powi(-(n as i32));
                assert_relative_eq!(inv[(n - 1, 0)], expect, max_relative = 1e-10);
                for j in 1..n {
                    assert!(inv[(n - 1, j)].abs() <= 1e-10 * expect);
                }
            }
        }
    }

    #[test]
    fn noiseless_zero_input_stays_at_origin() {
        let sys = params(3).system(0.0).unwrap();
        let traj = simulate(&sys, &InputPolicy::Zero, 20, &Prng::new(1, 0)).unwrap();
        assert!(traj.states.iter().all(|x| x.iter().all(|&v| v == 0.0)));
        assert_eq!(traj.states.len(), traj.inputs.len() + 1);
    }

    #[test]
    fn impulse_response() {
        let sys = params(3).with_b1(0.2).unwrap().system(0.0).unwrap();
        let policy = InputPolicy::Impulse {
            time: 0,
            amplitude: 1.0,
        };
        let traj = simulate(&sys, &policy, 3, &Prng::new(1, 0)).unwrap();
        assert_eq!(traj.states[1], sys.b().column(0).into_owned());
        assert_eq!(traj.states[2], (sys.a() * sys.b()).column(0).into_owned());
    }

    #[test]
    fn reproducible_noisy_rollout() {
        let sys = params(4).system(0.005).unwrap();
        let policy = InputPolicy::iid_gaussian(32.0).unwrap();
        let a = simulate(&sys, &policy, 50, &Prng::new(77, 3)).unwrap();
        let b = simulate(&sys, &policy, 50, &Prng::new(77, 3)).unwrap();
        assert_eq!(a, b);
        let prefix = simulate(&sys, &policy, 20, &Prng::new(77, 3)).unwrap();
        assert_eq!(&a.states[..=20], &prefix.states[..]);
        assert_eq!(&a.inputs[..20], &prefix.inputs[..]);
    }

    #[test]
    fn replayed_inputs_match_recursion() {
        let sys = params(3).with_b1(0.3).unwrap().system(0.0).unwrap();
        let policy = InputPolicy::iid_gaussian(1.0).unwrap();
        let traj = simulate(&sys, &policy, 15, &Prng::new(3, 0)).unwrap();
        let mut x = Vector::zeros(3);
        for (t, &u) in traj.inputs.iter().enumerate() {
            x = sys.a() * &x + sys.b().column(0) * u;
            assert_eq!(x, traj.states[t + 1]);
        }
    }

    #[test]
    fn lean_rollout_tracks_full_rollout() {
        let sys = params(3).with_b1(0.2).unwrap().system(0.005).unwrap();
        let policy = InputPolicy::iid_gaussian(32.0).unwrap();
        let rng = Prng::new(12, 4);
        let traj = simulate(&sys, &policy, 25, &rng).unwrap();
        let mut lean = Rollout::lean(&sys, &policy, &rng);
        for t in 0..25 {
            lean.step().unwrap();
            assert_eq!(lean.current_state(), &traj.states[t + 1]);
            assert_eq!(lean.last_input(), Some(traj.inputs[t]));
        }
        assert_eq!(lean.steps(), 25);
    }

    #[test]
    fn divergence_is_reported() {
        let sys = params(2).system(0.0).unwrap();
        let policy = InputPolicy::Impulse {
            time: 0,
            amplitude: 1.0,
        };
        match simulate(&sys, &policy, 2000, &Prng::new(0, 0)) {
            Err(Error::Diverged { step }) => assert!(step > 500 && step < 700, "step {step}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn noiseless_estimate_is_exact() {
        let sys = params(3).with_b1(0.1).unwrap().system(0.0).unwrap();
        let policy = InputPolicy::iid_gaussian(32.0).unwrap();
        let traj = simulate(&sys, &policy, 10, &Prng::new(11, 0)).unwrap();
        let b = ls_estimate_b1(&traj, &params(3)).unwrap();
        assert_relative_eq!(b, 0.1, max_relative = 1e-9);
    }

    #[test]
    fn zero_input_has_no_excitation() {
        let sys = params(3).system(0.005).unwrap();
        let traj = simulate(&sys, &InputPolicy::Zero, 10, &Prng::new(11, 0)).unwrap();
        assert!(matches!(ls_estimate_b1(&traj, &params(3)), Err(Error::NoExcitation)));
    }

    #[test]
    fn innovation_path_matches_states_on_short_runs() {
        let p = params(3).with_b1(0.05).unwrap();
        let sys = p.system(0.005).unwrap();
        let policy = InputPolicy::iid_gaussian(32.0).unwrap();
        let rng = Prng::new(8, 2);
        let traj = simulate(&sys, &policy, 12, &rng).unwrap();
        let from_states = ls_estimate_b1(&traj, &p).unwrap();

        let mut reg = B1Regression::default();
        let mut stream = InnovationStream::new(&sys, &policy, &rng).unwrap();
        for t in 0..12 {
            let (u, innov) = stream.step();
            assert_eq!(u, traj.inputs[t]);
            let x0 = &traj.states[t];
            let direct = traj.states[t + 1][0] - p.r * x0[0] - p.v * x0[1];
            assert!((innov - direct).abs() <= 1e-12 * x0[0].abs().max(1.0) * 10.0);
            reg.push(u, innov);
        }
        assert!((reg.estimate().unwrap() - from_states).abs() < 1e-9);
    }

    #[test]
    fn least_squares_is_unbiased_over_trials() {
        let p = params(2).with_b1(0.1).unwrap();
        let sys = p.system(0.005).unwrap();
        let policy = InputPolicy::iid_gaussian(32.0).unwrap();
        let trials = 10_000u64;
        let estimates: Vec<f64> = (0..trials)
            .map(|i| {
                let stream = InnovationStream::new(&sys, &policy, &Prng::new(5, i)).unwrap();
                let mut reg = B1Regression::default();
                for (u, innov) in stream.take(100) {
                    reg.push(u, innov);
                }
                reg.estimate().unwrap()
            })
            .collect();
        let mean = estimates.iter().sum::<f64>() / trials as f64;
        let var = estimates.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 0.1).abs() <= 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn innovation_rejects_feedback_policies() {
        let sys = params(2).system(0.1).unwrap();
        let policy = InputPolicy::StateFeedback(vec![0.0, 0.0]);
        assert!(InnovationStream::new(&sys, &policy, &Prng::new(0, 0)).is_err());
    }

    #[test]
    fn noise_only_variance() {
        let n = 3;
        let sys = params(n).system(0.005).unwrap();
        let trials = 10_000;
        let mut sum = vec![0.0; n];
        let mut sumsq = vec![0.0; n];
        for i in 0..trials {
            let traj = simulate(&sys, &InputPolicy::Zero, 1, &Prng::new(99, i)).unwrap();
            for j in 0..n {
                sum[j] += traj.states[1][j];
                sumsq[j] += traj.states[1][j].powi(2);
            }
        }
        for j in 0..n {
            let mean = sum[j] / trials as f64;
            let var = sumsq[j] / trials as f64 - mean * mean;
            assert!((var - 0.005).abs() < 0.05 * 0.005, "coordinate {j}: {var}");
        }
    }

    #[test]
    fn csv_layout() {
        let sys = params(2).system(0.0).unwrap();
        let policy = InputPolicy::Impulse {
            time: 0,
            amplitude: 1.0,
        };
        let traj = simulate(&sys, &policy, 2, &Prng::new(0, 0)).unwrap();
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,u,x1,x2");
        assert_eq!(lines[1], "0,1.0000000000000000e0,0,0");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("2,,"));
    }

    #[test]
    fn learning_algorithm_runs_terminal_map() {
        let p = params(2);
        let sys = p.system(0.0).unwrap();
        let algo = LearningAlgorithm {
            exploration: InputPolicy::iid_gaussian(1.0).unwrap(),
            terminal: Arc::new(move |traj: &Trajectory| {
                let b = ls_estimate_b1(traj, &p)?;
                Ok(vec![b, 0.0])
            }),
        };
        let (traj, gain) = algo.run(&sys, 5, &Prng::new(1, 1)).unwrap();
        assert_eq!(traj.horizon(), 5);
        assert!(gain[0].abs() < 1e-12);
    }
}
