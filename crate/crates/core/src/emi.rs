//! Ergodic-mutual-information functionals.
//!
//! Three views of the same quantity live here: the deterministic
//! large-system approximation `Ī(Q)` evaluated from a canonical solution,
//! the auxiliary function `V(Q, κ, κ̃)` whose stationary point in `(κ, κ̃)`
//! recovers `Ī`, and a seeded Monte-Carlo estimate of the true ergodic
//! mutual information `E log|I + H Q Hᴴ / σ²|`. All values are in nats.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::canonical::{self, DeltaSolution};
use crate::channel::{draw_channel, ChannelStats};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_defect, hermitian_eigen_desc, hermitize, logdet_one_plus_hpsd, psd_sqrt,
    sup_norm_diff, CMatrix,
};
use crate::stream::seeded_rng;

/// Relative trace tolerance for membership in the unit-normalized-trace set.
pub const TRACE_TOL: f64 = 1e-12;
/// Hermitian tolerance on covariance construction.
const HERMITIAN_TOL: f64 = 1e-12;
/// Canonical-solver tolerance used inside finite-difference derivatives.
const DERIVATIVE_SOLVE_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Covariance
// ---------------------------------------------------------------------------

/// Hermitian PSD transmit covariance. Construction symmetrizes rounding
/// noise and clips eigenvalues in `[-1e-10·λ_max, 0)` to zero; anything more
/// negative is rejected. Membership in the power-constraint set (trace
/// equal to the side) is a property, not an invariant: intermediate objects
/// like `Q = 0` are representable.
#[derive(Debug, Clone)]
pub struct Covariance {
    m: CMatrix,
}

impl Covariance {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("covariance entries must be finite".into()));
        }
        let defect = hermitian_defect(&m);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                defect,
                tol: HERMITIAN_TOL,
            });
        }
        let h = hermitize(&m);
        let (values, vectors) = hermitian_eigen_desc(&h);
        let max_eig = values[0].max(0.0);
        let min_eig = values[values.len() - 1];
        if min_eig < -1e-10 * max_eig.max(1.0) {
            return Err(Error::NotPositiveSemidefinite { min_eig, max_eig });
        }
        if min_eig < 0.0 {
            let clipped = crate::linalg::apply_spectral(&values, &vectors, |l| l.max(0.0));
            Ok(Self {
                m: hermitize(&clipped),
            })
        } else {
            Ok(Self { m: h })
        }
    }

    /// Scales a PSD matrix onto the constraint set `(1/t) Tr Q = 1`.
    pub fn normalized(m: CMatrix) -> Result<Self> {
        let q = Self::new(m)?;
        let trace = q.m.trace().re;
        if trace <= 0.0 {
            return Err(Error::InvalidParameter(
                "cannot trace-normalize a zero covariance".into(),
            ));
        }
        let t = q.side() as f64;
        Ok(Self {
            m: q.m * Complex64::new(t / trace, 0.0),
        })
    }

    pub fn identity(t: usize) -> Self {
        Self {
            m: CMatrix::identity(t, t),
        }
    }

    pub fn zero(t: usize) -> Self {
        Self {
            m: CMatrix::zeros(t, t),
        }
    }

    /// Rebuilds `U diag(powers) Uᴴ` from an orthonormal basis and
    /// non-negative mode powers (the waterfilling output path).
    pub fn from_eigen_basis(vectors: &CMatrix, powers: &[f64]) -> Self {
        let values = DVector::from_iterator(powers.len(), powers.iter().copied());
        Self {
            m: hermitize(&crate::linalg::apply_spectral(&values, vectors, |l| l.max(0.0))),
        }
    }

    /// Random element of the constraint set: trace-normalized complex
    /// Wishart matrix, almost surely positive definite.
    pub fn random_in_c1<R: Rng + ?Sized>(t: usize, rng: &mut R) -> Self {
        let g = CMatrix::from_fn(t, t, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * FRAC_1_SQRT_2
        });
        let w = hermitize(&(&g * g.adjoint()));
        let trace = w.trace().re;
        Self {
            m: w * Complex64::new(t as f64 / trace, 0.0),
        }
    }

    pub fn side(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }

    /// True when `(1/t) Tr Q = 1` within [`TRACE_TOL`].
    pub fn is_unit_normalized(&self) -> bool {
        (self.trace() / self.side() as f64 - 1.0).abs() <= TRACE_TOL
    }

    /// Hermitian PSD square root.
    pub fn sqrt(&self) -> CMatrix {
        psd_sqrt(&self.m)
    }

    /// Convex combination `(1-λ) Q + λ P`; stays in the constraint set.
    pub fn convex_mix(&self, other: &Covariance, lambda: f64) -> Covariance {
        Covariance {
            m: hermitize(
                &(&self.m * Complex64::new(1.0 - lambda, 0.0)
                    + &other.m * Complex64::new(lambda, 0.0)),
            ),
        }
    }

    pub fn frobenius_distance(&self, other: &Covariance) -> f64 {
        (&self.m - &other.m).norm()
    }
}

// ---------------------------------------------------------------------------
// Deterministic approximation
// ---------------------------------------------------------------------------

fn weighted_sum(mats: &[CMatrix], coeffs: &DVector<f64>) -> CMatrix {
    let n = mats[0].nrows();
    let mut acc = CMatrix::zeros(n, n);
    for (m, &c) in mats.iter().zip(coeffs.iter()) {
        acc += m * Complex64::new(c, 0.0);
    }
    acc
}

/// Transmit-side mixture `C̃(κ) = Σ_l κ_l C_t(l)`.
pub fn transmit_mixture(stats: &ChannelStats, coeffs: &DVector<f64>) -> CMatrix {
    weighted_sum(stats.transmit_correlations(), coeffs)
}

fn check_solution_consistency(stats: &ChannelStats, q: &Covariance, sol: &DeltaSolution) -> Result<()> {
    let (f, f_tilde) = canonical::f_maps(stats, q, &sol.delta, &sol.delta_tilde)?;
    let defect =
        sup_norm_diff(&f, &sol.delta).max(sup_norm_diff(&f_tilde, &sol.delta_tilde));
    let limit = (10.0 * sol.tol).max(1e-8);
    if defect > limit {
        return Err(Error::NotConverged { defect, limit });
    }
    Ok(())
}

/// Large-system approximation of the ergodic mutual information:
///
/// ```text
/// Ī(Q) = log|I_r + Σ_l δ̃_l C_r(l)| + log|I_t + Q Σ_l δ_l C_t(l)|
///        − σ² t Σ_l δ_l δ̃_l
/// ```
///
/// `sol` must solve the canonical system for exactly `(stats, q)`; the
/// defect is re-verified and a stale or foreign solution is rejected.
pub fn emi_approx(stats: &ChannelStats, q: &Covariance, sol: &DeltaSolution) -> Result<f64> {
    check_solution_consistency(stats, q, sol)?;
    let receive_term = logdet_one_plus_hpsd(&weighted_sum(
        stats.receive_correlations(),
        &sol.delta_tilde,
    ));
    // |I + Q C̃| = |I + Q^{1/2} C̃ Q^{1/2}| keeps the argument Hermitian.
    let qs = q.sqrt();
    let transmit_term =
        logdet_one_plus_hpsd(&hermitize(&(&qs * transmit_mixture(stats, &sol.delta) * &qs)));
    let coupling = stats.sigma2() * stats.transmit_count() as f64 * sol.delta.dot(&sol.delta_tilde);
    Ok(receive_term + transmit_term - coupling)
}

// ---------------------------------------------------------------------------
// Auxiliary function V and its derivatives
// ---------------------------------------------------------------------------

/// Auxiliary function
/// `V(Q, κ, κ̃) = log|I + Σ κ̃_l C_r(l)| + log|I + Q Σ κ_l C_t(l)| − σ² t Σ κ_l κ̃_l`.
/// At the canonical solution `V(Q, δ(Q), δ̃(Q)) = Ī(Q)`.
pub fn v_function(
    stats: &ChannelStats,
    q: &Covariance,
    kappa: &DVector<f64>,
    kappa_tilde: &DVector<f64>,
) -> Result<f64> {
    if kappa.len() != stats.path_count() || kappa_tilde.len() != stats.path_count() {
        return Err(Error::DimensionMismatch(
            "kappa vectors must have one entry per path".into(),
        ));
    }
    if kappa.iter().chain(kappa_tilde.iter()).any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "kappa vectors must be non-negative and finite".into(),
        ));
    }
    let receive_term =
        logdet_one_plus_hpsd(&weighted_sum(stats.receive_correlations(), kappa_tilde));
    let qs = q.sqrt();
    let transmit_term =
        logdet_one_plus_hpsd(&hermitize(&(&qs * transmit_mixture(stats, kappa) * &qs)));
    let coupling = stats.sigma2() * stats.transmit_count() as f64 * kappa.dot(kappa_tilde);
    Ok(receive_term + transmit_term - coupling)
}

/// Analytic partial derivatives of `V` at `(κ, κ̃)`:
///
/// ```text
/// ∂V/∂κ_l  = σ² t (f̃_l(κ, Q) − κ̃_l)
/// ∂V/∂κ̃_l = σ² t (f_l(κ̃) − κ_l)
/// ```
///
/// Both vanish exactly at the canonical solution.
pub fn v_gradient(
    stats: &ChannelStats,
    q: &Covariance,
    kappa: &DVector<f64>,
    kappa_tilde: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (f, f_tilde) = canonical::f_maps(stats, q, kappa, kappa_tilde)?;
    let scale = stats.sigma2() * stats.transmit_count() as f64;
    Ok(((f_tilde - kappa_tilde) * scale, (f - kappa) * scale))
}

/// Derivative defect of the auxiliary function at a canonical solution: the
/// two analytic gradient vectors evaluated at `(δ, δ̃)`. Both must vanish
/// within solver tolerance scaled by `σ² t`.
pub fn stationarity_defect(
    stats: &ChannelStats,
    q: &Covariance,
    sol: &DeltaSolution,
) -> Result<(DVector<f64>, DVector<f64>)> {
    v_gradient(stats, q, &sol.delta, &sol.delta_tilde)
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimate
// ---------------------------------------------------------------------------

/// Monte-Carlo estimate of the ergodic mutual information.
#[derive(Debug, Clone, PartialEq)]
pub struct EmiEstimate {
    /// Sample mean of `log|I + H Q Hᴴ / σ²|` in nats.
    pub mean: f64,
    /// `sample_std / √trials`; zero for a single trial.
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

/// Estimates `E log|I_r + H Q Hᴴ / σ²|` over independent channel draws.
///
/// Trials run in parallel on per-trial substreams derived from
/// `(seed, trial index)` and are reduced in trial order, so the result is
/// bit-identical for a given `(seed, trials)` regardless of thread count.
pub fn emi_monte_carlo(
    stats: &ChannelStats,
    q: &Covariance,
    trials: u64,
    seed: u64,
) -> Result<EmiEstimate> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if q.side() != stats.transmit_count() {
        return Err(Error::DimensionMismatch(format!(
            "covariance side {} does not match transmit count {}",
            q.side(),
            stats.transmit_count()
        )));
    }
    let qs = q.sqrt();
    let inv_sigma2 = Complex64::new(1.0 / stats.sigma2(), 0.0);
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seeded_rng(seed, &[trial]);
            let h = draw_channel(stats, &mut rng);
            let g = h.matrix() * &qs;
            let m = hermitize(&(&g * g.adjoint())) * inv_sigma2;
            logdet_one_plus_hpsd(&m)
        })
        .collect();

    // Fixed-order reduction keeps the estimate independent of scheduling.
    let n = trials as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if trials > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(EmiEstimate {
        mean,
        std_error,
        trials,
        seed,
    })
}

// ---------------------------------------------------------------------------
// Directional derivative (test oracle)
// ---------------------------------------------------------------------------

/// Forward-difference directional derivative of `Ī` along `P − Q`:
/// `[Ī(Q + h (P − Q)) − Ī(Q)] / h` with fresh canonical solves at both
/// points. For concave `Ī` the forward difference lower-bounds the true
/// derivative. Used as a first-order optimality oracle.
pub fn directional_derivative(
    stats: &ChannelStats,
    q: &Covariance,
    p: &Covariance,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidParameter("step must lie in (0, 1)".into()));
    }
    if p.side() != q.side() {
        return Err(Error::DimensionMismatch(
            "probe covariance has a different side".into(),
        ));
    }
    let sol_q = canonical::solve_canonical(stats, q, DERIVATIVE_SOLVE_TOL, canonical::DEFAULT_MAX_ITER)?;
    let base = emi_approx(stats, q, &sol_q)?;
    let shifted = q.convex_mix(p, h);
    let sol_h =
        canonical::solve_canonical(stats, &shifted, DERIVATIVE_SOLVE_TOL, canonical::DEFAULT_MAX_ITER)?;
    let moved = emi_approx(stats, &shifted, &sol_h)?;
    Ok((moved - base) / h)
}
