//! SNR sweep driver: per sweep point, optimize the covariance, evaluate the
//! deterministic EMI of the isotropic and optimized inputs, and validate
//! both by Monte-Carlo.

use std::time::Instant;

use anyhow::Context;
use ergocap::canonical::solve_canonical;
use ergocap::channel::{build_channel_stats, ChannelStats};
use ergocap::emi::{emi_approx, emi_monte_carlo, Covariance};
use ergocap::optimizer::{optimize_covariance, OptimizationResult, StopReason};
use ergocap::stream::derive_seed;
use rayon::prelude::*;

use crate::config::ExperimentConfig;

/// Stream tags so every Monte-Carlo run draws from its own substream.
const STREAM_IDENTITY_MC: u64 = 0;
const STREAM_OPT_MC: u64 = 1;
const STREAM_OPTIMIZER: u64 = 2;

/// One sweep point. EMI values are stored in nats; unit conversion happens
/// at emission time.
#[derive(Debug, Clone)]
pub struct ExperimentRow {
    pub snr_db: f64,
    pub emi_identity_mc: f64,
    pub emi_identity_stderr: f64,
    pub emi_opt_mc: f64,
    pub emi_opt_stderr: f64,
    pub emi_identity_approx: f64,
    pub emi_opt_approx: f64,
    pub iterations: usize,
    /// Wall-clock seconds spent in the optimizer alone (Monte-Carlo and
    /// bookkeeping excluded); zeroed under `--no-timing`.
    pub time_s: f64,
    pub rho_m: f64,
    pub stop_reason: StopReason,
    pub emi_monotone: bool,
    /// Full optimizer output, kept for covariance emission.
    pub result: OptimizationResult,
}

impl ExperimentRow {
    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Converged
    }

    /// Row-level soft invariants: finite non-negative EMI values and a
    /// monotone EMI ascent.
    pub fn passes_soft_checks(&self) -> bool {
        let values = [
            self.emi_identity_mc,
            self.emi_opt_mc,
            self.emi_identity_approx,
            self.emi_opt_approx,
        ];
        values.iter().all(|v| v.is_finite() && *v >= 0.0) && self.emi_monotone
    }
}

pub struct ExperimentOverrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub snr_db: Option<Vec<f64>>,
    pub suppress_timing: bool,
}

/// Runs every sweep point. Points are processed in parallel; the output
/// order follows the config order and all random streams derive from
/// `(seed, point index)`, so results do not depend on scheduling.
pub fn run_experiment(
    config: &ExperimentConfig,
    overrides: &ExperimentOverrides,
) -> anyhow::Result<Vec<ExperimentRow>> {
    let seed = overrides.seed.unwrap_or(config.seed);
    let trials = overrides.trials.unwrap_or(config.trials);
    let snr_db = overrides.snr_db.clone().unwrap_or_else(|| config.snr_db.clone());
    if snr_db.is_empty() || snr_db.iter().any(|x| !x.is_finite()) {
        anyhow::bail!("SNR sweep must be non-empty and finite");
    }
    if trials == 0 {
        anyhow::bail!("trials must be at least 1");
    }

    let specs = config.path_specs()?;
    // Noise power is swept per point; build the correlation structure once.
    let base = build_channel_stats(&specs, config.t, config.r, 1.0, config.spacing_wavelengths)
        .context("cannot build channel statistics")?;

    snr_db
        .par_iter()
        .enumerate()
        .map(|(index, &snr)| {
            run_point(&base, snr, index as u64, seed, trials, overrides.suppress_timing, config)
                .with_context(|| format!("sweep point {index} ({snr} dB) failed"))
        })
        .collect()
}

fn run_point(
    base: &ChannelStats,
    snr_db: f64,
    index: u64,
    seed: u64,
    trials: u64,
    suppress_timing: bool,
    config: &ExperimentConfig,
) -> anyhow::Result<ExperimentRow> {
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    let stats = base.with_sigma2(sigma2)?;
    let identity = Covariance::identity(config.t);

    let opts = config
        .tolerances
        .optimizer_options(derive_seed(seed, &[index, STREAM_OPTIMIZER]));
    let started = Instant::now();
    let result = optimize_covariance(&stats, &opts)?;
    let time_s = if suppress_timing {
        0.0
    } else {
        started.elapsed().as_secs_f64()
    };

    let inner_tol = opts.canonical_tol.min(opts.tol_delta / 100.0);
    let sol_identity = solve_canonical(&stats, &identity, inner_tol, opts.canonical_max_iter)?;
    let emi_identity_approx = emi_approx(&stats, &identity, &sol_identity)?;
    let sol_star = solve_canonical(&stats, &result.q_star, inner_tol, opts.canonical_max_iter)?;
    let emi_opt_approx = emi_approx(&stats, &result.q_star, &sol_star)?;

    let mc_identity = emi_monte_carlo(
        &stats,
        &identity,
        trials,
        derive_seed(seed, &[index, STREAM_IDENTITY_MC]),
    )?;
    let mc_opt = emi_monte_carlo(
        &stats,
        &result.q_star,
        trials,
        derive_seed(seed, &[index, STREAM_OPT_MC]),
    )?;

    Ok(ExperimentRow {
        snr_db,
        emi_identity_mc: mc_identity.mean,
        emi_identity_stderr: mc_identity.std_error,
        emi_opt_mc: mc_opt.mean,
        emi_opt_stderr: mc_opt.std_error,
        emi_identity_approx,
        emi_opt_approx,
        iterations: result.iterations(),
        time_s,
        rho_m: sol_star.rho_m,
        stop_reason: result.stop_reason,
        emi_monotone: result.emi_monotone,
        result,
    })
}
