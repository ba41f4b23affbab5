//! Iterative waterfilling maximization of the EMI approximation over the
//! unit-normalized-trace covariance set.
//!
//! Each outer iteration solves the canonical system at the current iterate
//! `Q_{k-1}` and then maximizes `log|I + Q C̃(δ^{(k)})|` in closed form by
//! waterfilling on the eigenmodes of the transmit mixture
//! `C̃(δ) = Σ_l δ_l C_t(l)`. The loop stops when both the canonical vectors
//! and the covariance stop moving; a stalled run is restarted from a
//! perturbed initial point.

use nalgebra::DVector;

use crate::canonical::{solve_canonical, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::channel::ChannelStats;
use crate::emi::{directional_derivative, emi_approx, transmit_mixture, Covariance};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_defect, hermitian_eigen_desc, sup_norm_diff, CMatrix};
use crate::stream::seeded_rng;

/// Eigenvalues at or below this fraction of the largest are treated as zero
/// modes and never receive power.
const ZERO_MODE_REL: f64 = 1e-14;

// ---------------------------------------------------------------------------
// Waterfilling
// ---------------------------------------------------------------------------

/// Solution of `max log|I + Q C̃|` over the trace budget `Tr Q = t`.
#[derive(Debug, Clone)]
pub struct WaterfillSolution {
    /// Optimal covariance `U diag(p) Uᴴ` in the eigenbasis of `C̃`.
    pub q: Covariance,
    /// Water level `μ`; every active mode carries power `μ − 1/λ_i`.
    pub water_level: f64,
    /// Indices of the powered modes, in descending-eigenvalue order.
    pub active_set: Vec<usize>,
    /// Set when `C̃ = 0`: the direction is undefined and the solution falls
    /// back to the isotropic covariance by convention.
    pub degenerate: bool,
}

/// Classical waterfilling on the eigenmodes of a Hermitian PSD matrix with
/// power budget equal to the side `t`. The water level is found by an exact
/// active-set search: with `1/λ` sorted ascending, the largest mode count
/// `k` whose tentative level `μ_k = (t + Σ_{i≤k} 1/λ_i)/k` clears its own
/// threshold is optimal.
pub fn waterfill(c_tilde: &CMatrix) -> Result<WaterfillSolution> {
    let t = c_tilde.nrows();
    if t == 0 || c_tilde.ncols() != t {
        return Err(Error::DimensionMismatch(
            "waterfilling needs a non-empty square matrix".into(),
        ));
    }
    if c_tilde.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::InvalidParameter("matrix entries must be finite".into()));
    }
    let defect = hermitian_defect(c_tilde);
    if defect > 1e-10 {
        return Err(Error::NotHermitian {
            defect,
            tol: 1e-10,
        });
    }
    let (eigenvalues, basis) = hermitian_eigen_desc(c_tilde);
    let lambda_max = eigenvalues[0];
    if lambda_max <= 0.0 {
        return Ok(WaterfillSolution {
            q: Covariance::identity(t),
            water_level: 1.0,
            active_set: Vec::new(),
            degenerate: true,
        });
    }

    let usable = eigenvalues
        .iter()
        .take_while(|&&l| l > ZERO_MODE_REL * lambda_max)
        .count();
    let inverse: Vec<f64> = eigenvalues.iter().take(usable).map(|&l| 1.0 / l).collect();
    let budget = t as f64;

    let mut level = 0.0;
    let mut active = 0;
    for k in (1..=usable).rev() {
        let mu = (budget + inverse[..k].iter().sum::<f64>()) / k as f64;
        if mu > inverse[k - 1] {
            level = mu;
            active = k;
            break;
        }
    }
    debug_assert!(active >= 1, "k = 1 always clears its threshold");
    debug_assert!(active == usable || level <= inverse[active]);

    let powers: Vec<f64> = (0..t)
        .map(|i| if i < active { level - inverse[i] } else { 0.0 })
        .collect();
    Ok(WaterfillSolution {
        q: Covariance::from_eigen_basis(&basis, &powers),
        water_level: level,
        active_set: (0..active).collect(),
        degenerate: false,
    })
}

// ---------------------------------------------------------------------------
// Outer optimization
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Both canonical vectors and the covariance stopped moving.
    Converged,
    /// Outer iteration cap reached without meeting the tolerances.
    MaxIterations,
    /// Every restart stalled.
    RestartExhausted,
}

/// One outer iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    /// Global iteration index, monotone across restarts.
    pub iteration: usize,
    /// EMI approximation of the iterate the canonical system was solved at.
    pub emi: f64,
    /// Frobenius distance between consecutive covariance iterates.
    pub q_change: f64,
    /// Sup-norm change of `δ` against the previous outer iteration.
    pub delta_change: f64,
    /// Sup-norm change of `δ̃`.
    pub delta_tilde_change: f64,
}

/// Result of the outer waterfilling loop.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub q_star: Covariance,
    /// Canonical vectors of the final solve.
    pub delta_star: DVector<f64>,
    pub delta_tilde_star: DVector<f64>,
    pub trajectory: Vec<TrajectoryPoint>,
    pub stop_reason: StopReason,
    /// Restarts consumed by the stall detector.
    pub restarts: usize,
    /// False if the EMI approximation ever decreased along the trajectory
    /// beyond rounding slack (a soft diagnostic, not an error).
    pub emi_monotone: bool,
    /// Worst forward directional derivative over the post-convergence
    /// probes, when probing was enabled.
    pub worst_probe_derivative: Option<f64>,
}

impl OptimizationResult {
    pub fn converged(&self) -> bool {
        self.stop_reason == StopReason::Converged
    }

    pub fn iterations(&self) -> usize {
        self.trajectory.len()
    }
}

/// Stopping thresholds and limits for [`optimize_covariance`].
#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    /// Sup-norm threshold on consecutive `δ` and `δ̃` changes.
    pub tol_delta: f64,
    /// Frobenius threshold on consecutive covariance changes.
    pub tol_q: f64,
    pub max_outer: usize,
    /// Cap on the inner canonical tolerance; the effective value is
    /// `min(canonical_tol, tol_delta / 100)` so outer stopping is not
    /// dominated by inner noise.
    pub canonical_tol: f64,
    pub canonical_max_iter: usize,
    /// Restart when the `δ` change has not decreased for this many
    /// consecutive iterations.
    pub stall_window: usize,
    pub max_restarts: usize,
    /// Post-convergence random probes of the first-order optimality
    /// inequality (0 disables probing).
    pub probe_count: usize,
    /// Forward-difference step for the probes.
    pub probe_step: f64,
    /// Seed for restart perturbations and probe directions.
    pub seed: u64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            tol_delta: 1e-8,
            tol_q: 1e-8,
            max_outer: 200,
            canonical_tol: DEFAULT_TOL,
            canonical_max_iter: DEFAULT_MAX_ITER,
            stall_window: 15,
            max_restarts: 5,
            probe_count: 0,
            probe_step: 1e-4,
            seed: 0x0e5_c0de,
        }
    }
}

/// Maximizes the EMI approximation over the unit-normalized-trace set by
/// alternating canonical solves with waterfilling, starting from `Q₀ = I`.
///
/// Convergence requires `‖δ^{(k)} − δ^{(k-1)}‖_∞ ≤ tol_delta`, the same for
/// `δ̃`, and `‖Q_k − Q_{k-1}‖_F ≤ tol_q`. If the `δ` change stalls, the run
/// restarts from a perturbed initial point (convex mix with a random
/// unit-trace element) up to `max_restarts` times.
pub fn optimize_covariance(stats: &ChannelStats, opts: &OptimizerOptions) -> Result<OptimizationResult> {
    if !(opts.tol_delta > 0.0 && opts.tol_q > 0.0) {
        return Err(Error::InvalidParameter("tolerances must be positive".into()));
    }
    let t = stats.transmit_count();
    let paths = stats.path_count();
    let inner_tol = opts.canonical_tol.min(opts.tol_delta / 100.0);
    let mut rng = seeded_rng(opts.seed, &[0]);

    let mut q_init = Covariance::identity(t);
    let mut restarts = 0;
    let mut trajectory: Vec<TrajectoryPoint> = Vec::new();
    let mut emi_monotone = true;
    let mut last_state: Option<(Covariance, DVector<f64>, DVector<f64>)> = None;
    let mut stop_reason = StopReason::MaxIterations;

    'runs: loop {
        let mut q_prev = q_init.clone();
        let mut delta_prev = DVector::from_element(paths, 0.0);
        let mut delta_tilde_prev = DVector::from_element(paths, 0.0);
        let mut last_emi = f64::NEG_INFINITY;
        let mut stall = 0usize;
        let mut last_change = f64::INFINITY;

        for _ in 0..opts.max_outer {
            let iteration = trajectory.len() + 1;
            let sol = solve_canonical(stats, &q_prev, inner_tol, opts.canonical_max_iter)
                .map_err(|e| Error::OptimizerInnerSolve {
                    iteration,
                    source: Box::new(e),
                })?;
            let emi = emi_approx(stats, &q_prev, &sol)?;
            if emi < last_emi - 1e-9 * (1.0 + last_emi.abs()) {
                emi_monotone = false;
            }
            last_emi = emi;

            let wf = waterfill(&transmit_mixture(stats, &sol.delta))?;
            let q_next = wf.q;
            let q_change = q_next.frobenius_distance(&q_prev);
            let delta_change = sup_norm_diff(&sol.delta, &delta_prev);
            let delta_tilde_change = sup_norm_diff(&sol.delta_tilde, &delta_tilde_prev);
            trajectory.push(TrajectoryPoint {
                iteration,
                emi,
                q_change,
                delta_change,
                delta_tilde_change,
            });

            let converged = delta_change <= opts.tol_delta
                && delta_tilde_change <= opts.tol_delta
                && q_change <= opts.tol_q;
            last_state = Some((q_next.clone(), sol.delta.clone(), sol.delta_tilde.clone()));
            if converged {
                stop_reason = StopReason::Converged;
                break 'runs;
            }

            // Stall detector on the canonical-vector changes.
            if delta_change >= last_change {
                stall += 1;
            } else {
                stall = 0;
            }
            last_change = delta_change;
            if stall >= opts.stall_window {
                if restarts >= opts.max_restarts {
                    stop_reason = StopReason::RestartExhausted;
                    break 'runs;
                }
                restarts += 1;
                let random = Covariance::random_in_c1(t, &mut rng);
                q_init = q_init.convex_mix(&random, 0.1);
                continue 'runs;
            }

            delta_prev = sol.delta;
            delta_tilde_prev = sol.delta_tilde;
            q_prev = q_next;
        }

        if stop_reason == StopReason::MaxIterations {
            break 'runs;
        }
    }

    let (q_star, delta_star, delta_tilde_star) = last_state.ok_or_else(|| {
        Error::InvalidParameter("optimizer ran zero iterations; raise max_outer".into())
    })?;

    let worst_probe_derivative = if stop_reason == StopReason::Converged && opts.probe_count > 0 {
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..opts.probe_count {
            let p = Covariance::random_in_c1(t, &mut rng);
            worst = worst.max(directional_derivative(stats, &q_star, &p, opts.probe_step)?);
        }
        Some(worst)
    } else {
        None
    };

    Ok(OptimizationResult {
        q_star,
        delta_star,
        delta_tilde_star,
        trajectory,
        stop_reason,
        restarts,
        emi_monotone,
        worst_probe_derivative,
    })
}

/// First-order optimality audit at a converged result: the worst forward
/// directional derivative of the EMI approximation over `n_probe` random
/// unit-trace covariances plus the `t` vertex directions `t e_i e_iᴴ`. A
/// value at or below the probe tolerance certifies the maximizer within
/// finite-difference accuracy.
pub fn optimality_check(
    stats: &ChannelStats,
    result: &OptimizationResult,
    n_probe: usize,
    h: f64,
    seed: u64,
) -> Result<f64> {
    let t = stats.transmit_count();
    let mut rng = seeded_rng(seed, &[1]);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..(n_probe + t) {
        let p = if i < n_probe {
            Covariance::random_in_c1(t, &mut rng)
        } else {
            // Vertex of the constraint set: all power on one antenna.
            let mut m = CMatrix::zeros(t, t);
            m[(i - n_probe, i - n_probe)] = num_complex::Complex64::new(t as f64, 0.0);
            Covariance::new(m)?
        };
        worst = worst.max(directional_derivative(stats, &result.q_star, &p, h)?);
    }
    Ok(worst)
}
