//! Minimum-sample search for certainty-equivalent LQR.
//!
//! Each trial explores the true system with i.i.d. Gaussian inputs, fits the
//! unknown first input entry by least squares on the first `N'` samples,
//! designs the Riccati gain for the fitted model and checks it on the true
//! system. `min_N` is the smallest `N'` at which at least `success_threshold`
//! of the trials stabilize.
//!
//! `N'` runs over a geometric grid (ratio 1.2 from `n + 1`), then a linear
//! scan between the last failing and the first passing grid point recovers
//! the exact minimum in that bracket. Every trial extends one trajectory, so
//! all probe lengths share prefixes.

use std::io::Write;
use std::time::Instant;

use hardstab_core::synthesis::{ce_lqr_gain, is_stabilizing};
use hardstab_core::systems::{B1Regression, InnovationStream, Rollout};
use hardstab_core::{fmt_f64, HardFamilyParams, InputPolicy, LtiSystem, Prng};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EstimationPath {
    /// Regress on the exact first-coordinate innovations `b1 u_t + w_t`
    /// generated from the trial's noise streams; needs no state and cannot
    /// overflow.
    #[default]
    Innovation,
    /// Roll the states out in `f64` and regress on their residuals; trials
    /// overflow after a few hundred steps and then count as failures.
    StateRollout,
}

impl std::str::FromStr for EstimationPath {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "innovation" => Ok(Self::Innovation),
            "state" | "state-rollout" => Ok(Self::StateRollout),
            other => Err(format!("unknown estimation path `{other}` (innovation | state)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub ratio: f64,
    /// Largest probe length; beyond it the row is reported as saturated.
    pub cap: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            ratio: 1.2,
            cap: 1_000_000,
        }
    }
}

impl GridSpec {
    pub fn next(&self, g: usize) -> usize {
        ((g as f64 * self.ratio).ceil() as usize).max(g + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeLqrConfig {
    pub n_values: Vec<usize>,
    pub r: f64,
    pub v: f64,
    pub true_b1: f64,
    pub sigma_u2: f64,
    pub sigma_w2: f64,
    pub trials: usize,
    pub success_threshold: f64,
    pub grid: GridSpec,
    pub seed: u64,
    pub path: EstimationPath,
}

impl Default for CeLqrConfig {
    fn default() -> Self {
        Self {
            n_values: (2..=8).collect(),
            r: 3.2,
            v: 1.01,
            true_b1: 0.0,
            sigma_u2: 32.0,
            sigma_w2: 0.005,
            trials: 200,
            success_threshold: 0.9,
            grid: GridSpec::default(),
            seed: 0,
            path: EstimationPath::Innovation,
        }
    }
}

impl CeLqrConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Experiment(m));
        if self.n_values.is_empty() {
            return bad("no dimensions requested".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if !(self.success_threshold > 0.0 && self.success_threshold <= 1.0) {
            return bad(format!("success threshold {} outside (0, 1]", self.success_threshold));
        }
        if !(self.grid.ratio > 1.0) || self.grid.cap == 0 {
            return bad("grid ratio must exceed 1 and the cap must be positive".into());
        }
        if !(self.sigma_u2 > 0.0) || !(self.sigma_w2 >= 0.0) {
            return bad("need sigma_u2 > 0 and sigma_w2 >= 0".into());
        }
        for &n in &self.n_values {
            HardFamilyParams::new(n, self.r, self.v, self.true_b1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Saturated,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Saturated => "saturated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeLqrRow {
    pub n: usize,
    pub v: f64,
    /// `None` when no probe up to the cap reached the threshold.
    pub min_n: Option<usize>,
    /// Rate at `min_n`, or the best rate seen when saturated.
    pub rate: f64,
    pub status: RowStatus,
    /// Trials counted as failures at the reported length because their
    /// rollout overflowed or gain synthesis failed.
    pub diverged: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeLqrResult {
    pub rows: Vec<CeLqrRow>,
}

pub const CE_LQR_HEADER: [&str; 7] = ["n", "v", "min_n", "rate", "status", "diverged", "wall_time_s"];

impl CeLqrResult {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CE_LQR_HEADER)?;
        for row in &self.rows {
            out.write_record([
                row.n.to_string(),
                fmt_f64(row.v),
                row.min_n.map(|m| m.to_string()).unwrap_or_default(),
                fmt_f64(row.rate),
                row.status.as_str().to_string(),
                row.diverged.to_string(),
                fmt_f64(row.wall_time_s),
            ])?;
        }
        out.flush().map_err(crate::error::io_err("csv output"))?;
        Ok(())
    }
}

/// Stream index of trial `i` at dimension `n`.
pub fn trial_stream(n: usize, i: usize) -> u64 {
    ((n as u64) << 32) | i as u64
}

#[derive(Clone)]
enum Source<'a> {
    Innovation(Box<InnovationStream>),
    State { rollout: Box<Rollout<'a>>, r: f64, v: f64 },
}

#[derive(Clone)]
struct Trial<'a> {
    source: Source<'a>,
    reg: B1Regression,
    steps: usize,
    overflowed: bool,
}

enum Outcome {
    Stable,
    Unstable,
    Failed,
}

impl<'a> Trial<'a> {
    fn advance_to(&mut self, len: usize) {
        while self.steps < len && !self.overflowed {
            match &mut self.source {
                Source::Innovation(s) => {
                    let (u, innov) = s.step();
                    self.reg.push(u, innov);
                }
                Source::State { rollout, r, v } => {
                    let prev = rollout.current_state().clone();
                    if rollout.step().is_err() {
                        self.overflowed = true;
                        break;
                    }
                    let x = rollout.current_state();
                    let res = x[0] - *r * prev[0] - *v * prev[1];
                    self.reg.push(rollout.last_input().unwrap_or(0.0), res);
                }
            }
            self.steps += 1;
        }
    }

    fn evaluate(&self, params: &HardFamilyParams, truth: &LtiSystem) -> Outcome {
        if self.overflowed {
            return Outcome::Failed;
        }
        let stable = self
            .reg
            .estimate()
            .and_then(|b| ce_lqr_gain(params, b))
            .and_then(|k| is_stabilizing(truth, &k));
        match stable {
            Ok(rep) if rep.stabilizing => Outcome::Stable,
            Ok(_) => Outcome::Unstable,
            Err(e) => {
                log::debug!("trial failed: {e}");
                Outcome::Failed
            }
        }
    }
}

/// `(success rate, failures)` over all trials at their current length.
fn score(trials: &[Trial<'_>], params: &HardFamilyParams, truth: &LtiSystem) -> (f64, usize) {
    let outcomes: Vec<Outcome> = trials.par_iter().map(|t| t.evaluate(params, truth)).collect();
    let stable = outcomes.iter().filter(|o| matches!(o, Outcome::Stable)).count();
    let failed = outcomes.iter().filter(|o| matches!(o, Outcome::Failed)).count();
    (stable as f64 / trials.len() as f64, failed)
}

fn advance_all(trials: &mut [Trial<'_>], len: usize) {
    trials.par_iter_mut().for_each(|t| t.advance_to(len));
}

/// Runs the search for one dimension.
pub fn run_ce_lqr_for(config: &CeLqrConfig, n: usize) -> Result<CeLqrRow> {
    let start = Instant::now();
    let params = HardFamilyParams::new(n, config.r, config.v, 0.0)?;
    let truth = params.with_b1(config.true_b1)?.system(config.sigma_w2)?;
    let policy = InputPolicy::iid_gaussian(config.sigma_u2)?;

    let mut trials: Vec<Trial<'_>> = (0..config.trials)
        .map(|i| {
            let rng = Prng::new(config.seed, trial_stream(n, i));
            let source = match config.path {
                EstimationPath::Innovation => {
                    Source::Innovation(Box::new(InnovationStream::new(&truth, &policy, &rng)?))
                }
                EstimationPath::StateRollout => Source::State {
                    rollout: Box::new(Rollout::lean(&truth, &policy, &rng)),
                    r: config.r,
                    v: config.v,
                },
            };
            Ok(Trial {
                source,
                reg: B1Regression::default(),
                steps: 0,
                overflowed: false,
            })
        })
        .collect::<Result<_>>()?;

    let threshold = config.success_threshold;
    let mut best_rate: f64 = 0.0;
    let mut best_failed = 0;
    let mut prev_grid = n;
    let mut g = n + 1;
    while g <= config.grid.cap {
        let snapshot = trials.clone();
        advance_all(&mut trials, g);
        let (rate, failed) = score(&trials, &params, &truth);
        log::debug!("n = {n}: N' = {g} rate {rate}");
        if rate > best_rate {
            best_rate = rate;
            best_failed = failed;
        }
        if rate >= threshold {
            // linear refinement over (prev_grid, g)
            let mut scan = snapshot;
            let mut found = (g, rate, failed);
            for len in prev_grid + 1..g {
                advance_all(&mut scan, len);
                let (r, f) = score(&scan, &params, &truth);
                if r >= threshold {
                    found = (len, r, f);
                    break;
                }
            }
            return Ok(CeLqrRow {
                n,
                v: config.v,
                min_n: Some(found.0),
                rate: found.1,
                status: RowStatus::Ok,
                diverged: found.2,
                wall_time_s: start.elapsed().as_secs_f64(),
            });
        }
        prev_grid = g;
        g = config.grid.next(g);
    }
    log::warn!("n = {n}: no probe up to {} reached rate {threshold}", config.grid.cap);
    Ok(CeLqrRow {
        n,
        v: config.v,
        min_n: None,
        rate: best_rate,
        status: RowStatus::Saturated,
        diverged: best_failed,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs the search for every requested dimension, rows in request order.
pub fn run_ce_lqr(config: &CeLqrConfig) -> Result<CeLqrResult> {
    config.validate()?;
    let rows = config
        .n_values
        .par_iter()
        .map(|&n| run_ce_lqr_for(config, n))
        .collect::<Result<Vec<_>>>()?;
    Ok(CeLqrResult { rows })
}

/// Least-squares slope, intercept and R^2 of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}
