//! Largest co-stabilizable perturbation across dimensions.

use std::io::Write;

use hardstab_core::lmi::{bisect_largest_m_with, BisectionOptions};
use hardstab_core::{fmt_f64, HardFamilyParams};
use rayon::prelude::*;

use crate::error::Result;

pub const SWEEP_HEADER: [&str; 8] = [
    "n",
    "r",
    "v",
    "largest_m",
    "log10_largest_m",
    "sup_bound",
    "iterations",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub r: f64,
    pub v: f64,
    /// `None` when the bisection itself failed; `status` then holds the error.
    pub largest_m: Option<f64>,
    pub sup_bound: f64,
    pub iterations: usize,
    pub status: String,
}

impl SweepRow {
    pub fn log10_largest_m(&self) -> Option<f64> {
        self.largest_m.filter(|m| *m > 0.0).map(f64::log10)
    }
}

/// One bisection per dimension, run in parallel; rows come back in the order
/// of `n_values`. Per-dimension failures become a status string instead of
/// aborting the sweep.
pub fn run_lmi_sweep(n_values: &[usize], r: f64, v: f64, opts: &BisectionOptions) -> Result<Vec<SweepRow>> {
    // reject bad (r, v) up front rather than once per row
    for &n in n_values {
        HardFamilyParams::new(n, r, v, 0.0)?;
    }
    Ok(n_values
        .par_iter()
        .map(|&n| {
            let params = HardFamilyParams::new(n, r, v, 0.0).expect("validated above");
            let sup_bound = params.sup_bound();
            match bisect_largest_m_with(&params, opts) {
                Ok(res) => {
                    log::info!(
                        "n = {n}: largest m {:.6e} ({} probes)",
                        res.largest_feasible_m,
                        res.iterations
                    );
                    SweepRow {
                        n,
                        r,
                        v,
                        largest_m: Some(res.largest_feasible_m),
                        sup_bound,
                        iterations: res.iterations,
                        status: res.status().to_string(),
                    }
                }
                Err(e) => {
                    log::warn!("n = {n}: {e}");
                    SweepRow {
                        n,
                        r,
                        v,
                        largest_m: None,
                        sup_bound,
                        iterations: 0,
                        status: format!("error: {e}"),
                    }
                }
            }
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SWEEP_HEADER)?;
    for row in rows {
        out.write_record([
            row.n.to_string(),
            fmt_f64(row.r),
            fmt_f64(row.v),
            row.largest_m.map(fmt_f64).unwrap_or_default(),
            row.log10_largest_m().map(fmt_f64).unwrap_or_default(),
            fmt_f64(row.sup_bound),
            row.iterations.to_string(),
            row.status.clone(),
        ])?;
    }
    out.flush().map_err(crate::error::io_err("csv output"))?;
    Ok(())
}
