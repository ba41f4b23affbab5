//! Solver for the coupled system of 2L trace equations behind the
//! large-system EMI approximation.
//!
//! For a covariance `Q` the system couples two positive vectors through the
//! resolvents
//!
//! ```text
//! T(δ̃)    = [σ² (I_r + Σ_j δ̃_j C_r(j))]⁻¹
//! T̃(δ, Q) = [σ² (I_t + Σ_j δ_j Q^{1/2} C_t(j) Q^{1/2})]⁻¹
//! δ_l  = f_l(δ̃)    = (1/t) Tr[C_r(l) T(δ̃)]
//! δ̃_l  = f̃_l(δ, Q) = (1/t) Tr[Q^{1/2} C_t(l) Q^{1/2} T̃(δ, Q)]
//! ```
//!
//! A Jacobi fixed-point iteration from a strictly positive start converges
//! to the unique positive solution; uniqueness is certified a posteriori by
//! the spectral radius of `σ⁴ Ã(T̃) A(T)` staying below one.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelStats;
use crate::emi::Covariance;
use crate::error::{Error, Result};
use crate::linalg::{hermitize, hpd_inverse, spectral_radius, sup_norm_diff, trace_product_re, CMatrix};

/// Default sup-norm tolerance on the fixed-point update.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap.
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Conditioning guard for the resolvent arguments.
const CONDITION_LIMIT: f64 = 1e14;

/// Converged solution of the canonical system together with its resolvents
/// and the uniqueness certificate.
#[derive(Debug, Clone)]
pub struct DeltaSolution {
    /// Receive-side trace parameters `δ`, strictly positive.
    pub delta: DVector<f64>,
    /// Transmit-side trace parameters `δ̃`, strictly positive (up to modes
    /// annihilated by a rank-deficient `Q`).
    pub delta_tilde: DVector<f64>,
    /// `T(δ̃)`, Hermitian positive definite, `r×r`.
    pub t_matrix: CMatrix,
    /// `T̃(δ, Q)`, Hermitian positive definite, `t×t`.
    pub t_tilde_matrix: CMatrix,
    /// Sup-norm fixed-point defect of the returned point.
    pub residual: f64,
    /// Jacobi iterations performed.
    pub iterations: usize,
    /// Spectral radius of `σ⁴ Ã(T̃) A(T)`; below one at any true solution.
    pub rho_m: f64,
    /// Tolerance the solve was run with.
    pub tol: f64,
}

/// `Q^{1/2} C_t(l) Q^{1/2}` for every path; fixed across an entire solve.
pub(crate) fn conjugated_transmit(stats: &ChannelStats, q: &Covariance) -> Vec<CMatrix> {
    let qs = q.sqrt();
    stats
        .transmit_correlations()
        .iter()
        .map(|c| hermitize(&(&qs * c * &qs)))
        .collect()
}

/// `[σ² (I + Σ_l coeffs_l mats_l)]⁻¹` with a cheap conditioning guard: the
/// argument dominates `σ² I`, so `‖·‖_∞ / σ²` bounds its condition number.
fn resolvent_from_parts(mats: &[CMatrix], coeffs: &DVector<f64>, side: usize, sigma2: f64) -> Result<CMatrix> {
    if coeffs.len() != mats.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} matrices",
            coeffs.len(),
            mats.len()
        )));
    }
    if coeffs.iter().any(|&c| !c.is_finite() || c < 0.0) {
        return Err(Error::InvalidParameter(
            "resolvent coefficients must be finite and non-negative".into(),
        ));
    }
    let mut arg = CMatrix::identity(side, side);
    for (m, &c) in mats.iter().zip(coeffs.iter()) {
        arg += m * Complex64::new(c, 0.0);
    }
    arg *= Complex64::new(sigma2, 0.0);
    let row_norm = (0..side)
        .map(|i| (0..side).map(|j| arg[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let estimate = row_norm / sigma2;
    if estimate > CONDITION_LIMIT {
        return Err(Error::IllConditioned {
            estimate,
            limit: CONDITION_LIMIT,
        });
    }
    hpd_inverse(&arg).ok_or(Error::NotPositiveSemidefinite {
        min_eig: f64::NAN,
        max_eig: row_norm,
    })
}

/// Receive-side resolvent `T(δ̃)`.
pub fn resolvent_t(stats: &ChannelStats, delta_tilde: &DVector<f64>) -> Result<CMatrix> {
    resolvent_from_parts(
        stats.receive_correlations(),
        delta_tilde,
        stats.receive_count(),
        stats.sigma2(),
    )
}

/// Transmit-side resolvent `T̃(δ, Q)`.
pub fn resolvent_t_tilde(stats: &ChannelStats, delta: &DVector<f64>, q: &Covariance) -> Result<CMatrix> {
    check_covariance_side(stats, q)?;
    resolvent_from_parts(
        &conjugated_transmit(stats, q),
        delta,
        stats.transmit_count(),
        stats.sigma2(),
    )
}

fn check_covariance_side(stats: &ChannelStats, q: &Covariance) -> Result<()> {
    if q.side() != stats.transmit_count() {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {}x{}, transmit side is {}",
            q.side(),
            q.side(),
            stats.transmit_count()
        )));
    }
    Ok(())
}

fn trace_map(mats: &[CMatrix], resolvent: &CMatrix, t: usize) -> DVector<f64> {
    DVector::from_iterator(
        mats.len(),
        mats.iter().map(|m| trace_product_re(m, resolvent) / t as f64),
    )
}

/// Evaluates both trace maps: `f_l(δ̃) = (1/t) Tr[C_r(l) T(δ̃)]` and
/// `f̃_l(δ, Q) = (1/t) Tr[Q^{1/2} C_t(l) Q^{1/2} T̃(δ, Q)]`.
pub fn f_maps(
    stats: &ChannelStats,
    q: &Covariance,
    delta: &DVector<f64>,
    delta_tilde: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_covariance_side(stats, q)?;
    let t = stats.transmit_count();
    let t_mat = resolvent_t(stats, delta_tilde)?;
    let s = conjugated_transmit(stats, q);
    let tt_mat = resolvent_from_parts(&s, delta, t, stats.sigma2())?;
    Ok((
        trace_map(stats.receive_correlations(), &t_mat, t),
        trace_map(&s, &tt_mat, t),
    ))
}

/// Solves the canonical system by Jacobi fixed-point iteration from the
/// all-ones start.
pub fn solve_canonical(
    stats: &ChannelStats,
    q: &Covariance,
    tol: f64,
    max_iter: usize,
) -> Result<DeltaSolution> {
    let ones = DVector::from_element(stats.path_count(), 1.0);
    solve_canonical_from(stats, q, &ones, &ones, tol, max_iter)
}

/// Same as [`solve_canonical`] with an explicit strictly positive
/// initialization, exposed so solution uniqueness can be probed.
pub fn solve_canonical_from(
    stats: &ChannelStats,
    q: &Covariance,
    delta0: &DVector<f64>,
    delta_tilde0: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<DeltaSolution> {
    check_covariance_side(stats, q)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let paths = stats.path_count();
    if delta0.len() != paths || delta_tilde0.len() != paths {
        return Err(Error::DimensionMismatch(format!(
            "initialization length must equal the path count {paths}"
        )));
    }
    if delta0.iter().chain(delta_tilde0.iter()).any(|&x| x <= 0.0 || !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "initialization must be strictly positive".into(),
        ));
    }

    let t = stats.transmit_count();
    let sigma2 = stats.sigma2();
    let s = conjugated_transmit(stats, q);
    let cr = stats.receive_correlations();

    let mut delta = delta0.clone();
    let mut delta_tilde = delta_tilde0.clone();
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < max_iter {
        iterations += 1;
        let t_mat = resolvent_from_parts(cr, &delta_tilde, stats.receive_count(), sigma2)?;
        let tt_mat = resolvent_from_parts(&s, &delta, t, sigma2)?;
        // Jacobi update: both new vectors from the previous iterate.
        let next_delta = trace_map(cr, &t_mat, t);
        let next_delta_tilde = trace_map(&s, &tt_mat, t);
        if next_delta.iter().chain(next_delta_tilde.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { iteration: iterations });
        }
        residual = sup_norm_diff(&next_delta, &delta).max(sup_norm_diff(&next_delta_tilde, &delta_tilde));
        delta = next_delta;
        delta_tilde = next_delta_tilde;
        if residual <= tol {
            break;
        }
    }
    if residual > tol {
        return Err(Error::MaxIterationsExceeded { max_iter, residual });
    }

    // Resolvents and defect at the returned point.
    let t_mat = resolvent_from_parts(cr, &delta_tilde, stats.receive_count(), sigma2)?;
    let tt_mat = resolvent_from_parts(&s, &delta, t, sigma2)?;
    let f = trace_map(cr, &t_mat, t);
    let f_tilde = trace_map(&s, &tt_mat, t);
    let defect = sup_norm_diff(&f, &delta).max(sup_norm_diff(&f_tilde, &delta_tilde));

    let rho_m = certificate_from_parts(cr, &s, &t_mat, &tt_mat, sigma2, t);
    Ok(DeltaSolution {
        delta,
        delta_tilde,
        t_matrix: t_mat,
        t_tilde_matrix: tt_mat,
        residual: defect,
        iterations,
        rho_m,
        tol,
    })
}

/// `ρ(σ⁴ Ã(T̃) A(T))` with `A_kl = (1/t) Tr[C_r(k) T C_r(l) T]` and
/// `Ã_kl = (1/t) Tr[S_k T̃ S_l T̃]`, `S_l = Q^{1/2} C_t(l) Q^{1/2}`. A value
/// below one certifies that the canonical solution is the unique one.
pub fn uniqueness_certificate(stats: &ChannelStats, q: &Covariance, sol: &DeltaSolution) -> f64 {
    let s = conjugated_transmit(stats, q);
    certificate_from_parts(
        stats.receive_correlations(),
        &s,
        &sol.t_matrix,
        &sol.t_tilde_matrix,
        stats.sigma2(),
        stats.transmit_count(),
    )
}

fn certificate_from_parts(
    cr: &[CMatrix],
    s: &[CMatrix],
    t_mat: &CMatrix,
    tt_mat: &CMatrix,
    sigma2: f64,
    t: usize,
) -> f64 {
    let paths = cr.len();
    let tf = t as f64;
    // X_k = C_r(k) T and Y_k = S_k T̃, so A_kl = Tr(X_k X_l)/t etc. Traces of
    // products of PSD pairs are real and non-negative.
    let x: Vec<CMatrix> = cr.iter().map(|c| c * t_mat).collect();
    let y: Vec<CMatrix> = s.iter().map(|m| m * tt_mat).collect();
    let mut a = DMatrix::<f64>::zeros(paths, paths);
    let mut a_tilde = DMatrix::<f64>::zeros(paths, paths);
    for k in 0..paths {
        for l in 0..paths {
            a[(k, l)] = (trace_product_re(&x[k], &x[l]) / tf).max(0.0);
            a_tilde[(k, l)] = (trace_product_re(&y[k], &y[l]) / tf).max(0.0);
        }
    }
    let m = a_tilde * a * sigma2.powi(2);
    spectral_radius(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_channel_stats, five_cluster_scenario, ChannelStats, CorrelationMatrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Positive root of σ² δ (1 + δ) = 1, the scalar reduction of the
    /// canonical system in the i.i.d. case with t = r and Q = I.
    fn iid_delta(sigma2: f64) -> f64 {
        ((1.0 + 4.0 / sigma2).sqrt() - 1.0) / 2.0
    }

    fn random_stats(t: usize, r: usize, paths: usize, sigma2: f64, seed: u64) -> ChannelStats {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ct = (0..paths)
            .map(|_| CorrelationMatrix::random_unit_diagonal(t, &mut rng).matrix().clone())
            .collect();
        let cr = (0..paths)
            .map(|_| CorrelationMatrix::random_unit_diagonal(r, &mut rng).matrix().clone())
            .collect();
        ChannelStats::from_parts(ct, cr, sigma2).unwrap()
    }

    #[test]
    fn resolvent_scalar_cases() {
        let stats = ChannelStats::iid(3, 3, 1, 0.5).unwrap();
        let t = resolvent_t(&stats, &DVector::from_vec(vec![1.0])).unwrap();
        // T = I / (σ² (1 + δ̃)) = I / (0.5 · 2) = I
        assert!((t - CMatrix::identity(3, 3)).norm() < 1e-12);

        let t0 = resolvent_t(&stats, &DVector::from_vec(vec![0.0])).unwrap();
        assert!((t0 - CMatrix::identity(3, 3) * Complex64::new(2.0, 0.0)).norm() < 1e-12);

        let q = Covariance::identity(3);
        let tt = resolvent_t_tilde(&stats, &DVector::from_vec(vec![1.0]), &q).unwrap();
        assert!((tt - CMatrix::identity(3, 3)).norm() < 1e-12);

        let qz = Covariance::zero(3);
        let ttz = resolvent_t_tilde(&stats, &DVector::from_vec(vec![1.0]), &qz).unwrap();
        assert!((ttz - CMatrix::identity(3, 3) * Complex64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn resolvent_multiplies_back_to_identity() {
        let stats = random_stats(4, 3, 3, 0.7, 3);
        let dt = DVector::from_vec(vec![0.4, 1.3, 0.2]);
        let t_mat = resolvent_t(&stats, &dt).unwrap();
        let mut arg = CMatrix::identity(3, 3);
        for (c, &coeff) in stats.receive_correlations().iter().zip(dt.iter()) {
            arg += c * Complex64::new(coeff, 0.0);
        }
        arg *= Complex64::new(0.7, 0.0);
        assert!(((&t_mat * &arg) - CMatrix::identity(3, 3)).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let q = Covariance::random_in_c1(4, &mut rng);
        let d = DVector::from_vec(vec![0.9, 0.1, 2.0]);
        let tt = resolvent_t_tilde(&stats, &d, &q).unwrap();
        let mut arg_t = CMatrix::identity(4, 4);
        for (m, &coeff) in conjugated_transmit(&stats, &q).iter().zip(d.iter()) {
            arg_t += m * Complex64::new(coeff, 0.0);
        }
        arg_t *= Complex64::new(0.7, 0.0);
        assert!(((&tt * &arg_t) - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn rejects_negative_coefficients() {
        let stats = ChannelStats::iid(2, 2, 1, 1.0).unwrap();
        assert!(resolvent_t(&stats, &DVector::from_vec(vec![-0.1])).is_err());
    }

    #[test]
    fn f_maps_scalar_reduction() {
        // i.i.d., L = 1, t = r: f(δ̃) = 1/(σ²(1+δ̃)), f̃(δ) = 1/(σ²(1+δ)).
        let sigma2 = 0.8;
        let stats = ChannelStats::iid(4, 4, 1, sigma2).unwrap();
        let q = Covariance::identity(4);
        let delta = DVector::from_vec(vec![0.7]);
        let delta_tilde = DVector::from_vec(vec![1.9]);
        let (f, ft) = f_maps(&stats, &q, &delta, &delta_tilde).unwrap();
        assert!((f[0] - 1.0 / (sigma2 * 2.9)).abs() < 1e-13);
        assert!((ft[0] - 1.0 / (sigma2 * 1.7)).abs() < 1e-13);
    }

    #[test]
    fn f_maps_at_zero_are_scaled_traces() {
        let stats = random_stats(3, 4, 2, 1.3, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = Covariance::random_in_c1(3, &mut rng);
        let zero = DVector::from_vec(vec![0.0, 0.0]);
        let (f, ft) = f_maps(&stats, &q, &zero, &zero).unwrap();
        let s = conjugated_transmit(&stats, &q);
        for l in 0..2 {
            let expect_f = stats.receive_correlations()[l].trace().re / (3.0 * 1.3);
            let expect_ft = s[l].trace().re / (3.0 * 1.3);
            assert!((f[l] - expect_f).abs() < 1e-12);
            assert!((ft[l] - expect_ft).abs() < 1e-12);
            assert!(f[l] > 0.0 && ft[l] > 0.0);
        }
    }

    #[test]
    fn iid_solution_hits_the_golden_ratio_root() {
        let stats = ChannelStats::iid(4, 4, 1, 1.0).unwrap();
        let q = Covariance::identity(4);
        let sol = solve_canonical(&stats, &q, 1e-12, DEFAULT_MAX_ITER).unwrap();
        let expected = (5.0_f64.sqrt() - 1.0) / 2.0;
        assert!((sol.delta[0] - expected).abs() < 1e-9, "delta {}", sol.delta[0]);
        assert!((sol.delta_tilde[0] - expected).abs() < 1e-9);
        assert!(sol.residual <= 10.0 * sol.tol);
    }

    #[test]
    fn high_noise_first_order_expansion() {
        let stats = random_stats(4, 3, 3, 1e6, 12);
        let q = Covariance::identity(4);
        let sol = solve_canonical(&stats, &q, 1e-14, DEFAULT_MAX_ITER).unwrap();
        for l in 0..3 {
            let leading = stats.receive_correlations()[l].trace().re / (4.0 * 1e6);
            assert!(
                (sol.delta[l] / leading - 1.0).abs() < 0.01,
                "path {l}: {} vs {leading}",
                sol.delta[l]
            );
        }
    }

    #[test]
    fn five_cluster_solution_converges_with_certificate() {
        let stats = build_channel_stats(&five_cluster_scenario(), 4, 4, 0.1, 0.5).unwrap();
        let q = Covariance::identity(4);
        let sol = solve_canonical(&stats, &q, 1e-10, DEFAULT_MAX_ITER).unwrap();
        assert!(sol.residual <= 1e-10 * 10.0);
        assert!(sol.rho_m < 1.0, "rho_m = {}", sol.rho_m);
        assert!(sol.delta.iter().all(|&d| d > 0.0));
        assert!(sol.delta_tilde.iter().all(|&d| d > 0.0));
        // Resolvent consistency at the solution.
        let t_direct = resolvent_t(&stats, &sol.delta_tilde).unwrap();
        assert!((&sol.t_matrix - &t_direct).norm() < 1e-10);
        let tt_direct = resolvent_t_tilde(&stats, &sol.delta, &q).unwrap();
        assert!((&sol.t_tilde_matrix - &tt_direct).norm() < 1e-10);
    }

    #[test]
    fn certificate_scalar_closed_form() {
        // i.i.d. t = r, σ² = 1: ρ(M) = 1/(1+δ)⁴ with δ the golden-ratio root.
        let stats = ChannelStats::iid(4, 4, 1, 1.0).unwrap();
        let q = Covariance::identity(4);
        let sol = solve_canonical(&stats, &q, 1e-13, DEFAULT_MAX_ITER).unwrap();
        let delta = iid_delta(1.0);
        let expected = (1.0 + delta).powi(-4);
        assert!((sol.rho_m - expected).abs() < 1e-9, "rho {}", sol.rho_m);
        assert!(sol.rho_m < 1.0);
        let recomputed = uniqueness_certificate(&stats, &q, &sol);
        assert!((recomputed - sol.rho_m).abs() < 1e-14);
    }

    #[test]
    fn certificate_vanishes_at_high_noise() {
        let stats = random_stats(3, 3, 2, 1e6, 30);
        let q = Covariance::identity(3);
        let sol = solve_canonical(&stats, &q, 1e-14, DEFAULT_MAX_ITER).unwrap();
        assert!(sol.rho_m < 1e-3, "rho {}", sol.rho_m);
    }

    #[test]
    fn different_initializations_agree() {
        let stats = random_stats(4, 4, 3, 0.3, 44);
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let q = Covariance::random_in_c1(4, &mut rng);
        let tol = 1e-11;
        let a = solve_canonical(&stats, &q, tol, DEFAULT_MAX_ITER).unwrap();
        let small = DVector::from_element(3, 0.1);
        let b = solve_canonical_from(&stats, &q, &small, &small, tol, DEFAULT_MAX_ITER).unwrap();
        assert!(sup_norm_diff(&a.delta, &b.delta) < 100.0 * tol);
        assert!(sup_norm_diff(&a.delta_tilde, &b.delta_tilde) < 100.0 * tol);
    }

    #[test]
    fn residual_shrinks_after_burn_in() {
        let stats = build_channel_stats(&five_cluster_scenario(), 4, 4, 0.05, 0.5).unwrap();
        let q = Covariance::identity(4);
        // Drive the Jacobi map by hand through the public trace maps and
        // watch the update norms.
        let mut delta = DVector::from_element(5, 1.0);
        let mut delta_tilde = DVector::from_element(5, 1.0);
        let mut history = Vec::new();
        for _ in 0..60 {
            let (f, ft) = f_maps(&stats, &q, &delta, &delta_tilde).unwrap();
            let step = sup_norm_diff(&f, &delta).max(sup_norm_diff(&ft, &delta_tilde));
            history.push(step);
            delta = f;
            delta_tilde = ft;
        }
        for w in history[10..].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "residuals not decreasing: {w:?}");
        }
    }

    #[test]
    fn solver_reports_iteration_budget_exhaustion() {
        let stats = random_stats(4, 4, 2, 0.5, 77);
        let q = Covariance::identity(4);
        match solve_canonical(&stats, &q, 1e-12, 3) {
            Err(Error::MaxIterationsExceeded { max_iter, residual }) => {
                assert_eq!(max_iter, 3);
                assert!(residual > 1e-12);
            }
            other => panic!("expected MaxIterationsExceeded, got {other:?}"),
        }
    }

    #[test]
    fn unitary_conjugation_leaves_deltas_unchanged() {
        let stats = random_stats(4, 3, 2, 0.4, 50);
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let q = Covariance::random_in_c1(4, &mut rng);
        let tol = 1e-12;
        let base = solve_canonical(&stats, &q, tol, DEFAULT_MAX_ITER).unwrap();

        // Haar-ish unitary from the QR of a Gaussian matrix.
        let g = CMatrix::from_fn(4, 4, |_, _| {
            Complex64::new(
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
            )
        });
        let u = g.qr().q();
        let ct_rot: Vec<CMatrix> = stats
            .transmit_correlations()
            .iter()
            .map(|c| hermitize(&(&u * c * u.adjoint())))
            .collect();
        let stats_rot =
            ChannelStats::from_parts(ct_rot, stats.receive_correlations().to_vec(), stats.sigma2()).unwrap();
        let q_rot = Covariance::new(hermitize(&(&u * q.matrix() * u.adjoint()))).unwrap();
        let rotated = solve_canonical(&stats_rot, &q_rot, tol, DEFAULT_MAX_ITER).unwrap();

        assert!(sup_norm_diff(&base.delta, &rotated.delta) < 1e-9);
        assert!(sup_norm_diff(&base.delta_tilde, &rotated.delta_tilde) < 1e-9);
    }
}
