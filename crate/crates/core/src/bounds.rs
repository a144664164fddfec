//! Information-theoretic quantities for the hard pair: the KL divergence
//! bound between trajectory laws, a Monte-Carlo estimate of the same
//! divergence, and the sample-complexity lower bound it implies.
//!
//! All divergences are in nats.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numerics::{fmt_f64, Prng};
use crate::systems::{simulate, HardFamilyParams, HardPair, InnovationStream, InputPolicy};

/// Fewest trials accepted by [`kl_monte_carlo`].
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KlReport {
    pub horizon: usize,
    pub m: f64,
    /// Input variance used in the analytic bound: the policy's own variance
    /// for i.i.d. Gaussian inputs, otherwise the empirical second moment.
    pub sigma_u2: f64,
    pub sigma_w2: f64,
    pub analytic_bound: f64,
    pub mc_estimate: Option<f64>,
    pub mc_std_error: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl KlReport {
    pub const CSV_HEADER: &'static str = "horizon,m,sigma_u2,sigma_w2,analytic,mc,mc_se,trials,seed";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.horizon,
            fmt_f64(self.m),
            fmt_f64(self.sigma_u2),
            fmt_f64(self.sigma_w2),
            fmt_f64(self.analytic_bound),
            opt(self.mc_estimate),
            opt(self.mc_std_error),
            self.trials,
            self.seed
        )
    }
}

/// `N m^2 sigma_u2 / (2 sigma_w2)`.
pub fn kl_upper_bound(horizon: usize, m: f64, sigma_u2: f64, sigma_w2: f64) -> Result<f64> {
    if sigma_w2 == 0.0 {
        return Err(Error::DegenerateNoise);
    }
    if !(sigma_w2 > 0.0) || !(sigma_u2 >= 0.0) || !m.is_finite() {
        return Err(Error::Argument(format!(
            "need sigma_w2 > 0, sigma_u2 >= 0 and finite m (got {sigma_w2}, {sigma_u2}, {m})"
        )));
    }
    Ok(horizon as f64 * m * m * sigma_u2 / (2.0 * sigma_w2))
}

/// Pairwise (cascade) summation; the split points depend only on the length,
/// so the result does not depend on how the terms were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Per-trajectory log-likelihood ratio and input energy.
fn trial_log_ratio(pair: &HardPair, policy: &InputPolicy, horizon: usize, rng: &Prng) -> Result<(f64, f64)> {
    let s1 = &pair.s1;
    let m = pair.m;
    let two_var = 2.0 * s1.noise_variance();
    let mut llr = 0.0;
    let mut energy = 0.0;
    // Residual w of the first coordinate under S1; the S2 mean is shifted by
    // m u, so the log ratio is ((w - m u)^2 - w^2) / (2 sigma_w2).
    let mut add = |u: f64, w: f64| {
        llr += m * u * (m * u - 2.0 * w) / two_var;
        energy += u * u;
    };
    if policy.reads_state() {
        let traj = simulate(s1, policy, horizon, rng)?;
        let a = s1.a();
        for t in 0..horizon {
            let pred = (a.row(0) * &traj.states[t])[(0, 0)] + s1.b()[(0, 0)] * traj.inputs[t];
            add(traj.inputs[t], traj.states[t + 1][0] - pred);
        }
    } else {
        for (u, w) in InnovationStream::new(s1, policy, rng)?.take(horizon) {
            add(u, w);
        }
    }
    Ok((llr, energy))
}

/// Monte-Carlo estimate of `KL(P_{S1}^N || P_{S2}^N)` from trajectories of
/// `S1`. Trial `i` uses stream `i` of `rng`'s seed.
///
/// Only the first coordinate's transition density differs between the two
/// systems, so each trajectory contributes the sum of per-step log ratios of
/// that coordinate. Open-loop policies are evaluated on the innovation path
/// and never overflow; state-feedback policies roll the states out and fail
/// on divergence.
pub fn kl_monte_carlo(
    pair: &HardPair,
    policy: &InputPolicy,
    horizon: usize,
    trials: usize,
    rng: &Prng,
) -> Result<KlReport> {
    if trials < MIN_TRIALS {
        return Err(Error::Argument(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let sigma_w2 = pair.s1.noise_variance();
    if sigma_w2 == 0.0 {
        return Err(Error::DegenerateNoise);
    }
    let seed = rng.seed();
    let per_trial: Vec<(f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|i| trial_log_ratio(pair, policy, horizon, &Prng::new(seed, i)))
        .collect::<Result<_>>()?;
    let (llrs, energies): (Vec<f64>, Vec<f64>) = per_trial.into_iter().unzip();

    let nt = trials as f64;
    let mean = pairwise_sum(&llrs) / nt;
    let dev: Vec<f64> = llrs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (nt - 1.0);
    let sigma_u2 = match policy {
        InputPolicy::IidGaussian { variance } => *variance,
        _ => pairwise_sum(&energies) / (nt * horizon as f64),
    };
    Ok(KlReport {
        horizon,
        m: pair.m,
        sigma_u2,
        sigma_w2,
        analytic_bound: kl_upper_bound(horizon, pair.m, sigma_u2, sigma_w2)?,
        mc_estimate: Some(mean),
        mc_std_error: Some((var / nt).sqrt()),
        trials,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirgeSpec {
    pub delta: f64,
    pub params: HardFamilyParams,
    pub sigma_u2: f64,
    pub sigma_w2: f64,
}

impl BirgeSpec {
    pub fn new(delta: f64, params: HardFamilyParams, sigma_u2: f64, sigma_w2: f64) -> Result<Self> {
        check_delta(delta)?;
        params.validate()?;
        if !(sigma_u2 > 0.0 && sigma_w2 > 0.0) || !sigma_u2.is_finite() || !sigma_w2.is_finite() {
            return Err(Error::Argument(format!(
                "variances must be positive, got sigma_u2 = {sigma_u2}, sigma_w2 = {sigma_w2}"
            )));
        }
        Ok(Self {
            delta,
            params,
            sigma_u2,
            sigma_w2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirgeBound {
    /// Real-valued right-hand side; negative when `delta > 1/3`.
    pub min_samples: f64,
    pub theorem_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirgeThreshold {
    /// `(1 - d) ln((1 - d) / d) + d ln(d / (1 - d))`.
    pub exact: f64,
    /// `ln(1 / (3 d))`.
    pub relaxed: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(Error::Argument(format!("delta must lie in (0, 1/2), got {delta}")))
    }
}

/// `(sigma_w2 / (2 sigma_u2)) ((r - 1) / (2v))^{2n} ln(1 / (3 delta))`: the
/// horizon below which no algorithm stabilizes every system of the family
/// with probability at least `1 - delta`.
pub fn birge_min_samples(spec: &BirgeSpec) -> Result<BirgeBound> {
    check_delta(spec.delta)?;
    let p = &spec.params;
    let growth = ((p.r - 1.0) / (2.0 * p.v)).powi(2 * p.n as i32);
    Ok(BirgeBound {
        min_samples: spec.sigma_w2 / (2.0 * spec.sigma_u2) * growth * birge_kl_threshold(spec.delta)?.relaxed,
        theorem_m: p.theorem_m(),
    })
}

/// KL divergence two laws must exceed for a test to tell them apart with
/// error at most `delta`, and its logarithmic relaxation.
pub fn birge_kl_threshold(delta: f64) -> Result<BirgeThreshold> {
    check_delta(delta)?;
    let q = 1.0 - delta;
    let l = (q / delta).ln();
    Ok(BirgeThreshold {
        exact: q * l - delta * l,
        relaxed: -(3.0 * delta).ln(),
    })
}
