use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use hardstab_core::bounds::{
    birge_kl_threshold, birge_min_samples, kl_monte_carlo, kl_upper_bound, BirgeSpec, KlReport,
};
use hardstab_core::lmi::{bisect_largest_m_with, BisectionOptions, DEFAULT_TOLERANCE};
use hardstab_core::synthesis::{
    ackermann_gain, closed_loop_charpoly, costab_bound, is_stabilizing, jury_necessary, k1_closed_form,
    perturbed_charpoly,
};
use hardstab_core::systems::{make_hard_pair, simulate};
use hardstab_core::{fmt_f64, Complex64, HardFamilyParams, InputPolicy, Matrix, Prng};
use hardstab_harness::ce_lqr::{run_ce_lqr, CeLqrConfig, EstimationPath, GridSpec};
use hardstab_harness::parse::{parse_n_values, parse_poles};
use hardstab_harness::sweep::{run_lmi_sweep, write_sweep_csv};
use hardstab_harness::{render_plot, ConfigFile};

#[derive(Parser)]
#[command(
    name = "hardstab",
    version,
    about = "Easy-to-identify, hard-to-stabilize linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// State dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Unstable diagonal entry (default 3.2).
    #[arg(long)]
    r: Option<f64>,
    /// Superdiagonal coupling (default 1.01).
    #[arg(long)]
    v: Option<f64>,
    /// Perturbation of the first input entry.
    #[arg(long)]
    m: Option<f64>,
    /// First input entry of the simulated system.
    #[arg(long)]
    b1: Option<f64>,
    /// Input variance (default 32).
    #[arg(long = "sigma-u2")]
    sigma_u2: Option<f64>,
    /// Process-noise variance (default 0.005).
    #[arg(long = "sigma-w2")]
    sigma_w2: Option<f64>,
    /// Failure probability (default 0.1).
    #[arg(long)]
    delta: Option<f64>,
    /// Independent trials (default 200).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render an SVG chart of the main result.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// `key = value` file of defaults; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the A matrix and both input columns of the pair.
    Pair(Common),
    /// Simulate one trajectory under i.i.d. Gaussian input.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Pole-placement gain for the b1 = 0 system.
    Ackermann {
        #[command(flatten)]
        common: Common,
        /// Comma-separated closed-loop poles, e.g. `0.5,0.2+0.1i,0.2-0.1i` (default all 0).
        #[arg(long, allow_hyphen_values = true)]
        poles: Option<String>,
    },
    /// Jury necessary conditions for the perturbed closed loop.
    Jury {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        poles: Option<String>,
    },
    /// Largest perturbation the pole-placement gain tolerates.
    CostabBound {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        poles: Option<String>,
    },
    /// Analytic KL divergence between the pair's trajectory laws.
    KlBound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Monte-Carlo KL estimate under i.i.d. Gaussian input.
    KlMc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Sample-size lower bound and the KL thresholds.
    Birge(Common),
    /// Largest co-stabilizable perturbation for one dimension.
    LmiBisect {
        #[command(flatten)]
        common: Common,
        /// Relative bisection tolerance (default 1e-3).
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Minimum sample size for certainty-equivalent LQR across dimensions.
    ExpCeLqr {
        #[command(flatten)]
        common: Common,
        /// Dimensions, `2..8` or `2,4,6` (default 2..8).
        #[arg(long = "n-values")]
        n_values: Option<String>,
        /// Required stabilizing fraction (default 0.9).
        #[arg(long = "success-threshold")]
        success_threshold: Option<f64>,
        /// Largest probe length (default 1e6).
        #[arg(long)]
        cap: Option<usize>,
        /// `innovation` (default) or `state`.
        #[arg(long)]
        path: Option<EstimationPath>,
    },
    /// Largest co-stabilizable perturbation across dimensions.
    ExpLmiSweep {
        #[command(flatten)]
        common: Common,
        /// Dimensions (default 2..10).
        #[arg(long = "n-values")]
        n_values: Option<String>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Line chart of two CSV columns.
    Plot {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        svg: PathBuf,
    },
}

/// Flags merged with the config file.
struct Resolved {
    common: Common,
    file: ConfigFile,
}

impl Resolved {
    fn new(common: Common) -> anyhow::Result<Self> {
        let file = match &common.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Ok(Self { common, file })
    }

    fn n(&self, default: usize) -> anyhow::Result<usize> {
        Ok(self.file.resolve(self.common.n, "n", default)?)
    }
    fn r(&self) -> anyhow::Result<f64> {
        Ok(self.file.resolve(self.common.r, "r", 3.2)?)
    }
    fn v(&self) -> anyhow::Result<f64> {
        Ok(self.file.resolve(self.common.v, "v", 1.01)?)
    }
    fn m(&self) -> anyhow::Result<Option<f64>> {
        Ok(self.file.resolve_opt(self.common.m, "m")?)
    }
    fn b1(&self) -> anyhow::Result<f64> {
        Ok(self.file.resolve(self.common.b1, "b1", 0.0)?)
    }
    fn sigma_u2(&self) -> anyhow::Result<f64> {
        Ok(self.file.resolve(self.common.sigma_u2, "sigma-u2", 32.0)?)
    }
    fn sigma_w2(&self) -> anyhow::Result<f64> {
        Ok(self.file.resolve(self.common.sigma_w2, "sigma-w2", 0.005)?)
    }
    fn delta(&self) -> anyhow::Result<f64> {
        Ok(self.file.resolve(self.common.delta, "delta", 0.1)?)
    }
    fn trials(&self) -> anyhow::Result<usize> {
        Ok(self.file.resolve(self.common.trials, "trials", 200)?)
    }
    fn seed(&self) -> anyhow::Result<u64> {
        Ok(self.file.resolve(self.common.seed, "seed", 0)?)
    }
    fn str_opt(&self, flag: Option<String>, key: &str) -> anyhow::Result<Option<String>> {
        Ok(self.file.resolve_opt(flag, key)?)
    }
    fn params(&self, default_n: usize) -> anyhow::Result<HardFamilyParams> {
        Ok(HardFamilyParams::new(self.n(default_n)?, self.r()?, self.v()?, 0.0)?)
    }
    fn poles(&self, flag: Option<String>, n: usize) -> anyhow::Result<Vec<Complex64>> {
        match self.str_opt(flag, "poles")? {
            Some(s) => parse_poles(&s).map_err(anyhow::Error::msg),
            None => Ok(vec![Complex64::new(0.0, 0.0); n]),
        }
    }
    fn out(&self) -> anyhow::Result<Option<PathBuf>> {
        Ok(self.file.resolve_opt(self.common.out.clone(), "out")?)
    }
    fn svg(&self) -> anyhow::Result<Option<PathBuf>> {
        Ok(self.file.resolve_opt(self.common.svg.clone(), "svg")?)
    }
}

fn open_out(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn fmt_row(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter().map(fmt_f64).collect::<Vec<_>>().join(" ")
}

fn print_matrix(label: &str, m: &Matrix) {
    println!("{label} =");
    for row in m.row_iter() {
        println!("  [{}]", fmt_row(row.iter().copied()));
    }
}

fn fmt_complex(z: &Complex64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else {
        format!("{}{:+}i", fmt_f64(z.re), z.im)
    }
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Pair(common) => {
            let cfg = Resolved::new(common)?;
            let params = cfg.params(2)?;
            let m = cfg.m()?.unwrap_or(params.theorem_m());
            let pair = make_hard_pair(params, m)?;
            println!(
                "n = {}, r = {}, v = {}, m = {}",
                params.n,
                fmt_f64(params.r),
                fmt_f64(params.v),
                fmt_f64(m)
            );
            print_matrix("A", pair.s1.a());
            print_matrix("B1", &pair.s1.b().transpose());
            print_matrix("B2", &pair.s2.b().transpose());
            println!("sup_bound = {}", fmt_f64(params.sup_bound()));
            println!("theorem_m = {}", fmt_f64(params.theorem_m()));
        }
        Command::Simulate { common, horizon } => {
            let cfg = Resolved::new(common)?;
            let horizon = cfg.file.resolve(horizon, "horizon", 20)?;
            let params = cfg.params(2)?.with_b1(cfg.b1()?)?;
            let sys = params.system(cfg.sigma_w2()?)?;
            let policy = InputPolicy::iid_gaussian(cfg.sigma_u2()?)?;
            let traj = simulate(&sys, &policy, horizon, &Prng::new(cfg.seed()?, 0))?;
            let out = cfg.out()?;
            let mut w = open_out(out.as_deref())?;
            traj.write_csv(&mut w)?;
            w.flush()?;
        }
        Command::Ackermann { common, poles } => {
            let cfg = Resolved::new(common)?;
            let params = cfg.params(2)?;
            let poles = cfg.poles(poles, params.n)?;
            let k = ackermann_gain(&params.system(0.0)?, &poles)?;
            println!(
                "poles = [{}]",
                poles.iter().map(fmt_complex).collect::<Vec<_>>().join(", ")
            );
            println!("K = [{}]", fmt_row(k.k.iter().copied()));
            println!("k1_closed_form = {}", fmt_f64(k1_closed_form(&params, &poles)?));
        }
        Command::Jury { common, poles } => {
            let cfg = Resolved::new(common)?;
            let params = cfg.params(2)?;
            let poles = cfg.poles(poles, params.n)?;
            let m = cfg.m()?.context("--m is required")?;
            let k = ackermann_gain(&params.system(0.0)?, &poles)?;
            let base = closed_loop_charpoly(&params, &k)?;
            let p = perturbed_charpoly(&base, m, k.k[0])?;
            let jury = jury_necessary(&p)?;
            let s2 = params.with_b1(m)?.system(0.0)?;
            let stab = is_stabilizing(&s2, &k)?;
            println!("charpoly (ascending) = [{}]", fmt_row(p.coeffs().iter().copied()));
            println!("p(1) = {}", fmt_f64(jury.at_one));
            println!("(-1)^n p(-1) = {}", fmt_f64(jury.at_minus_one));
            println!("jury_necessary = {}", if jury.pass { "pass" } else { "fail" });
            println!("spectral_radius = {}", fmt_f64(stab.spectral_radius));
            println!("stabilizing = {}", stab.stabilizing);
        }
        Command::CostabBound { common, poles } => {
            let cfg = Resolved::new(common)?;
            let params = cfg.params(2)?;
            let poles = cfg.poles(poles, params.n)?;
            let rep = costab_bound(&params, &poles)?;
            println!("bound = {}", fmt_f64(rep.bound));
            println!("sup_bound = {}", fmt_f64(rep.sup_bound));
            println!("theorem_m = {}", fmt_f64(rep.theorem_m));
        }
        Command::KlBound { common, horizon } => {
            let cfg = Resolved::new(common)?;
            let horizon = cfg.file.resolve(horizon, "horizon", 50)?;
            let m = cfg.m()?.context("--m is required")?;
            let kl = kl_upper_bound(horizon, m, cfg.sigma_u2()?, cfg.sigma_w2()?)?;
            println!("kl_nats = {}", fmt_f64(kl));
        }
        Command::KlMc { common, horizon } => {
            let cfg = Resolved::new(common)?;
            let horizon = cfg.file.resolve(horizon, "horizon", 50)?;
            let m = cfg.m()?.context("--m is required")?;
            let pair = make_hard_pair(cfg.params(2)?, m)?.with_noise_variance(cfg.sigma_w2()?)?;
            let policy = InputPolicy::iid_gaussian(cfg.sigma_u2()?)?;
            let rep = kl_monte_carlo(&pair, &policy, horizon, cfg.trials()?, &Prng::new(cfg.seed()?, 0))?;
            let out = cfg.out()?;
            let mut w = open_out(out.as_deref())?;
            writeln!(w, "{}", KlReport::CSV_HEADER)?;
            writeln!(w, "{}", rep.csv_row())?;
            w.flush()?;
        }
        Command::Birge(common) => {
            let cfg = Resolved::new(common)?;
            let delta = cfg.delta()?;
            let th = birge_kl_threshold(delta)?;
            let spec = BirgeSpec::new(delta, cfg.params(2)?, cfg.sigma_u2()?, cfg.sigma_w2()?)?;
            let bound = birge_min_samples(&spec)?;
            println!("kl_threshold_exact = {}", fmt_f64(th.exact));
            println!("kl_threshold_relaxed = {}", fmt_f64(th.relaxed));
            println!("theorem_m = {}", fmt_f64(bound.theorem_m));
            println!("min_samples = {}", fmt_f64(bound.min_samples));
        }
        Command::LmiBisect { common, tolerance } => {
            let cfg = Resolved::new(common)?;
            let params = cfg.params(2)?;
            let opts = BisectionOptions {
                relative_tolerance: cfg.file.resolve(tolerance, "tolerance", 1e-3)?,
                lmi_tolerance: DEFAULT_TOLERANCE,
                ..BisectionOptions::default()
            };
            let res = bisect_largest_m_with(&params, &opts)?;
            println!("largest_m = {}", fmt_f64(res.largest_feasible_m));
            println!("bracket = [{}, {}]", fmt_f64(res.bracket.0), fmt_f64(res.bracket.1));
            println!("sup_bound = {}", fmt_f64(params.sup_bound()));
            println!("probes = {}", res.iterations);
            println!("newton_iterations = {}", res.newton_iterations);
            println!("status = {}", res.status());
            println!("K = [{}]", fmt_row(res.certificate.recovered_k.k.iter().copied()));
        }
        Command::ExpCeLqr {
            common,
            n_values,
            success_threshold,
            cap,
            path,
        } => {
            let cfg = Resolved::new(common)?;
            let defaults = CeLqrConfig::default();
            let n_values = match cfg.str_opt(n_values, "n-values")? {
                Some(s) => parse_n_values(&s).map_err(anyhow::Error::msg)?,
                None => defaults.n_values.clone(),
            };
            let config = CeLqrConfig {
                n_values,
                r: cfg.r()?,
                v: cfg.v()?,
                true_b1: cfg.b1()?,
                sigma_u2: cfg.sigma_u2()?,
                sigma_w2: cfg.sigma_w2()?,
                trials: cfg.trials()?,
                success_threshold: cfg.file.resolve(success_threshold, "success-threshold", 0.9)?,
                grid: GridSpec {
                    cap: cfg.file.resolve(cap, "cap", defaults.grid.cap)?,
                    ..defaults.grid
                },
                seed: cfg.seed()?,
                path: cfg.file.resolve(path, "path", defaults.path)?,
            };
            let res = run_ce_lqr(&config)?;
            let out = cfg.out()?;
            {
                let mut w = open_out(out.as_deref())?;
                res.write_csv(&mut w)?;
            }
            if let Some(svg) = cfg.svg()? {
                let Some(csv) = out else {
                    bail!("--svg needs --out so the chart can be read back from the CSV");
                };
                render_plot(&csv, "n", "min_n", &svg)?;
            }
        }
        Command::ExpLmiSweep {
            common,
            n_values,
            tolerance,
        } => {
            let cfg = Resolved::new(common)?;
            let n_values = match cfg.str_opt(n_values, "n-values")? {
                Some(s) => parse_n_values(&s).map_err(anyhow::Error::msg)?,
                None => (2..=10).collect(),
            };
            let opts = BisectionOptions {
                relative_tolerance: cfg.file.resolve(tolerance, "tolerance", 1e-3)?,
                ..BisectionOptions::default()
            };
            let rows = run_lmi_sweep(&n_values, cfg.r()?, cfg.v()?, &opts)?;
            let out = cfg.out()?;
            {
                let w = open_out(out.as_deref())?;
                write_sweep_csv(&rows, w)?;
            }
            if let Some(svg) = cfg.svg()? {
                let Some(csv) = out else {
                    bail!("--svg needs --out so the chart can be read back from the CSV");
                };
                render_plot(&csv, "n", "log10_largest_m", &svg)?;
            }
        }
        Command::Plot { csv, x, y, svg } => {
            render_plot(&csv, &x, &y, &svg)?;
        }
    }
    Ok(())
}
