//! Multipath MIMO channel statistics and random channel realizations.
//!
//! Each propagation path models a scatterer cluster seen from a uniform
//! linear array: a mean angle and an angular spread at the transmit side, a
//! second pair at the receive side, and a relative power. Per-path
//! correlation matrices are angular integrals of the array response against
//! a Gaussian density; a channel draw combines the correlation square roots
//! with i.i.d. complex circular Gaussian coefficient matrices, one per path,
//! so the frequency-flat matrix is `H = Σ_l (1/√t) C_r(l)^{1/2} W_l C_t(l)^{1/2}`.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{
    gauss_legendre_on, hermitian_defect, hermitian_eigenvalues, hermitize, psd_sqrt, CMatrix,
};

/// Antenna spacing in carrier wavelengths for all built-in scenarios.
pub const DEFAULT_SPACING_WAVELENGTHS: f64 = 0.5;
/// Gauss-Legendre order for the angular integrals. Doubling it moves
/// entries by less than 1e-10 for spreads down to ~0.03 rad.
pub const QUADRATURE_ORDER: usize = 64;
/// Gaussian angular density is truncated at this many standard deviations.
const DENSITY_TRUNCATION_SIGMAS: f64 = 4.0;
/// Smallest admissible correlation eigenvalue; anything below is lifted.
const PSD_FLOOR: f64 = 1e-9;
/// Relative Hermitian defect accepted on externally supplied matrices.
const HERMITIAN_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Path description
// ---------------------------------------------------------------------------

/// Angular description of one scatterer cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAngularSpec {
    /// Mean departure angle in radians.
    pub mean_departure_angle: f64,
    /// Departure angle spread (standard deviation) in radians.
    pub departure_spread: f64,
    /// Mean arrival angle in radians.
    pub mean_arrival_angle: f64,
    /// Arrival angle spread in radians.
    pub arrival_spread: f64,
    /// Relative path power; paths with equal values share the power budget.
    pub relative_power: f64,
}

impl PathAngularSpec {
    pub fn new(
        mean_departure_angle: f64,
        departure_spread: f64,
        mean_arrival_angle: f64,
        arrival_spread: f64,
        relative_power: f64,
    ) -> Result<Self> {
        let spec = Self {
            mean_departure_angle,
            departure_spread,
            mean_arrival_angle,
            arrival_spread,
            relative_power,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Equal-power cluster (`relative_power = 1`), the usual configuration.
    pub fn equal_power(
        mean_departure_angle: f64,
        departure_spread: f64,
        mean_arrival_angle: f64,
        arrival_spread: f64,
    ) -> Result<Self> {
        Self::new(
            mean_departure_angle,
            departure_spread,
            mean_arrival_angle,
            arrival_spread,
            1.0,
        )
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            self.mean_departure_angle,
            self.departure_spread,
            self.mean_arrival_angle,
            self.arrival_spread,
            self.relative_power,
        ];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "path angular parameters must be finite".into(),
            ));
        }
        if self.departure_spread < 0.0 || self.arrival_spread < 0.0 {
            return Err(Error::InvalidParameter(
                "angle spreads must be non-negative".into(),
            ));
        }
        if self.relative_power <= 0.0 {
            return Err(Error::InvalidParameter(
                "relative path power must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Five-cluster reference scenario used by the bundled demo config, the
/// benchmarks and most integration tests (angles in radians, equal powers).
pub fn five_cluster_scenario() -> Vec<PathAngularSpec> {
    let rows = [
        (6.15, 0.06, 4.85, 0.06),
        (3.52, 0.09, 3.48, 0.08),
        (4.04, 0.05, 1.71, 0.05),
        (2.58, 0.05, 5.31, 0.02),
        (2.66, 0.03, 0.06, 0.11),
    ];
    rows.iter()
        .map(|&(md, ds, ma, sa)| {
            PathAngularSpec::equal_power(md, ds, ma, sa).expect("static scenario is valid")
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Correlation matrices
// ---------------------------------------------------------------------------

/// Hermitian PSD antenna correlation matrix with unit diagonal.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    entries: CMatrix,
}

impl CorrelationMatrix {
    /// Validates and wraps an externally supplied matrix. The input must be
    /// Hermitian to `1e-12` relative tolerance and have min eigenvalue
    /// `≥ -1e-10 · max`; eigenvalues below the PSD floor are lifted and the
    /// diagonal renormalized to one.
    pub fn from_matrix(entries: CMatrix) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "correlation matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter(
                "correlation entries must be finite".into(),
            ));
        }
        let defect = hermitian_defect(&entries);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian {
                defect,
                tol: HERMITIAN_TOL,
            });
        }
        let m = hermitize(&entries);
        let eigs = hermitian_eigenvalues(&m);
        let (min_eig, max_eig) = (eigs[0], eigs[eigs.len() - 1]);
        if min_eig < -1e-10 * max_eig.max(1.0) {
            return Err(Error::NotPositiveSemidefinite { min_eig, max_eig });
        }
        Ok(Self::regularized(m, min_eig))
    }

    /// Lifts the spectrum onto `[PSD_FLOOR, ·]` when needed and pins the
    /// diagonal back to exactly one.
    fn regularized(mut m: CMatrix, min_eig: f64) -> Self {
        let n = m.nrows();
        if min_eig < PSD_FLOOR {
            let lift = PSD_FLOOR - min_eig;
            for i in 0..n {
                m[(i, i)] += Complex64::new(lift, 0.0);
            }
            let scale = Complex64::new(1.0 / (1.0 + lift), 0.0);
            m *= scale;
        }
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        Self { entries: m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: CMatrix::identity(n, n),
        }
    }

    /// Random unit-diagonal positive-definite correlation, for synthetic
    /// scenarios and tests. Built from a complex Wishart matrix with a small
    /// diagonal load, then diagonally normalized.
    pub fn random_unit_diagonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = CMatrix::from_fn(n, n, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * FRAC_1_SQRT_2
        });
        let mut w = hermitize(&(&g * g.adjoint()));
        for i in 0..n {
            w[(i, i)] += Complex64::new(0.5 * n as f64, 0.0);
        }
        // D^{-1/2} W D^{-1/2} keeps positive definiteness and sets unit diagonal.
        let d: Vec<f64> = (0..n).map(|i| w[(i, i)].re.sqrt()).collect();
        let normalized = CMatrix::from_fn(n, n, |i, j| w[(i, j)] / (d[i] * d[j]));
        Self::regularized(hermitize(&normalized), PSD_FLOOR)
    }

    pub fn side(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    /// Copy of the matrix scaled so its trace equals `target`.
    pub fn scaled_to_trace(&self, target: f64) -> CMatrix {
        let trace = self.entries.trace().re;
        &self.entries * Complex64::new(target / trace, 0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.entries)[0]
    }
}

/// Array response of an `n`-element uniform linear array towards angle `θ`:
/// `a_p(θ) = exp(i 2π d p sin θ)` with `d` in wavelengths.
fn steering_vector(n: usize, spacing_wavelengths: f64, theta: f64) -> DVector<Complex64> {
    let phase = 2.0 * PI * spacing_wavelengths * theta.sin();
    DVector::from_iterator(
        n,
        (0..n).map(|p| Complex64::from_polar(1.0, phase * p as f64)),
    )
}

/// Accumulates `Σ_i w_i a(θ_i) a(θ_i)ᴴ` with weights normalized to sum to
/// one, then symmetrizes and pins the diagonal to exactly one.
fn correlation_from_density(
    n: usize,
    spacing_wavelengths: f64,
    angles: &[f64],
    raw_weights: &[f64],
) -> Result<CorrelationMatrix> {
    let total: f64 = raw_weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::InvalidParameter(
            "angular density integrates to zero; check the spread".into(),
        ));
    }
    let mut c = CMatrix::zeros(n, n);
    for (&theta, &w) in angles.iter().zip(raw_weights) {
        let a = steering_vector(n, spacing_wavelengths, theta);
        let weight = Complex64::new(w / total, 0.0);
        c += (&a * a.adjoint()) * weight;
    }
    let mut c = hermitize(&c);
    for i in 0..n {
        c[(i, i)] = Complex64::new(1.0, 0.0);
    }
    let min_eig = hermitian_eigenvalues(&c)[0];
    Ok(CorrelationMatrix::regularized(c, min_eig))
}

fn validate_array_args(n: usize, spacing_wavelengths: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("antenna count must be ≥ 1".into()));
    }
    if !spacing_wavelengths.is_finite() || spacing_wavelengths <= 0.0 {
        return Err(Error::InvalidParameter(
            "antenna spacing must be positive and finite".into(),
        ));
    }
    Ok(())
}

/// Correlation matrix of an `n`-element uniform linear array facing a
/// cluster with Gaussian angular density (`mean_angle`, `spread`), truncated
/// at ±4 standard deviations and integrated by 64-point Gauss-Legendre
/// quadrature. `spread = 0` degenerates to the rank-one outer product of the
/// steering vector (before the PSD floor lifts the null space).
pub fn build_ula_correlation(
    mean_angle: f64,
    spread: f64,
    n: usize,
    spacing_wavelengths: f64,
) -> Result<CorrelationMatrix> {
    validate_array_args(n, spacing_wavelengths)?;
    if !mean_angle.is_finite() || !spread.is_finite() || spread < 0.0 {
        return Err(Error::InvalidParameter(
            "mean angle must be finite and spread non-negative".into(),
        ));
    }
    if spread == 0.0 {
        let a = steering_vector(n, spacing_wavelengths, mean_angle);
        let mut c = hermitize(&(&a * a.adjoint()));
        for i in 0..n {
            c[(i, i)] = Complex64::new(1.0, 0.0);
        }
        let min_eig = hermitian_eigenvalues(&c)[0];
        return Ok(CorrelationMatrix::regularized(c, min_eig));
    }
    build_ula_correlation_with_order(mean_angle, spread, n, spacing_wavelengths, QUADRATURE_ORDER)
}

/// Same as [`build_ula_correlation`] with an explicit quadrature order,
/// exposed so convergence of the default order can be checked.
pub fn build_ula_correlation_with_order(
    mean_angle: f64,
    spread: f64,
    n: usize,
    spacing_wavelengths: f64,
    order: usize,
) -> Result<CorrelationMatrix> {
    validate_array_args(n, spacing_wavelengths)?;
    if spread <= 0.0 {
        return Err(Error::InvalidParameter(
            "quadrature path requires a positive spread".into(),
        ));
    }
    let lo = mean_angle - DENSITY_TRUNCATION_SIGMAS * spread;
    let hi = mean_angle + DENSITY_TRUNCATION_SIGMAS * spread;
    let (angles, weights) = gauss_legendre_on(order, lo, hi);
    // Unnormalized Gaussian density; the constant factor cancels in the
    // weight normalization.
    let raw: Vec<f64> = angles
        .iter()
        .zip(&weights)
        .map(|(&theta, &w)| {
            let z = (theta - mean_angle) / spread;
            w * (-0.5 * z * z).exp()
        })
        .collect();
    correlation_from_density(n, spacing_wavelengths, &angles, &raw)
}

/// Limit of an infinitely wide cluster: uniform angular density over
/// `[-π, π]`. With half-wavelength spacing the entries follow the Bessel
/// profile `C[p][q] = J₀(π (p−q))`.
pub fn build_ula_correlation_uniform(n: usize, spacing_wavelengths: f64) -> Result<CorrelationMatrix> {
    validate_array_args(n, spacing_wavelengths)?;
    let (angles, weights) = gauss_legendre_on(4 * QUADRATURE_ORDER, -PI, PI);
    correlation_from_density(n, spacing_wavelengths, &angles, &weights)
}

// ---------------------------------------------------------------------------
// Channel statistics
// ---------------------------------------------------------------------------

/// Second-order description of the multipath channel: per-path transmit and
/// receive correlations (transmit side carries the power scaling), antenna
/// counts and noise power. Immutable after construction; the correlation
/// square roots are cached for the Monte-Carlo path.
#[derive(Debug, Clone)]
pub struct ChannelStats {
    t: usize,
    r: usize,
    sigma2: f64,
    ct: Vec<CMatrix>,
    cr: Vec<CMatrix>,
    ct_sqrt: Vec<CMatrix>,
    cr_sqrt: Vec<CMatrix>,
}

impl ChannelStats {
    /// Assembles statistics from explicit per-path matrices. `ct[l]` must be
    /// `t×t`, `cr[l]` `r×r`, and every matrix Hermitian positive definite.
    pub fn from_parts(ct: Vec<CMatrix>, cr: Vec<CMatrix>, sigma2: f64) -> Result<Self> {
        if ct.is_empty() || ct.len() != cr.len() {
            return Err(Error::DimensionMismatch(format!(
                "need matching non-empty path lists, got {} transmit / {} receive",
                ct.len(),
                cr.len()
            )));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(
                "noise power sigma2 must be positive".into(),
            ));
        }
        let t = ct[0].nrows();
        let r = cr[0].nrows();
        let mut ct_h = Vec::with_capacity(ct.len());
        let mut cr_h = Vec::with_capacity(cr.len());
        for (label, list, side, out) in [
            ("transmit", &ct, t, &mut ct_h),
            ("receive", &cr, r, &mut cr_h),
        ] {
            for (l, m) in list.iter().enumerate() {
                if m.nrows() != side || m.ncols() != side {
                    return Err(Error::DimensionMismatch(format!(
                        "{label} correlation {l} is {}x{}, expected {side}x{side}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
                let defect = hermitian_defect(m);
                if defect > HERMITIAN_TOL {
                    return Err(Error::NotHermitian {
                        defect,
                        tol: HERMITIAN_TOL,
                    });
                }
                let h = hermitize(m);
                let eigs = hermitian_eigenvalues(&h);
                if eigs[0] <= 0.0 {
                    return Err(Error::NotPositiveSemidefinite {
                        min_eig: eigs[0],
                        max_eig: eigs[eigs.len() - 1],
                    });
                }
                out.push(h);
            }
        }
        let ct_sqrt = ct_h.iter().map(psd_sqrt).collect();
        let cr_sqrt = cr_h.iter().map(psd_sqrt).collect();
        Ok(Self {
            t,
            r,
            sigma2,
            ct: ct_h,
            cr: cr_h,
            ct_sqrt,
            cr_sqrt,
        })
    }

    /// Uncorrelated (i.i.d.) channel: identity correlations on both sides
    /// for every path.
    pub fn iid(t: usize, r: usize, paths: usize, sigma2: f64) -> Result<Self> {
        if t == 0 || r == 0 || paths == 0 {
            return Err(Error::InvalidParameter(
                "antenna and path counts must be ≥ 1".into(),
            ));
        }
        Self::from_parts(
            vec![CMatrix::identity(t, t); paths],
            vec![CMatrix::identity(r, r); paths],
            sigma2,
        )
    }

    /// Same statistics at a different noise power (used by SNR sweeps).
    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(
                "noise power sigma2 must be positive".into(),
            ));
        }
        let mut copy = self.clone();
        copy.sigma2 = sigma2;
        Ok(copy)
    }

    pub fn transmit_count(&self) -> usize {
        self.t
    }

    pub fn receive_count(&self) -> usize {
        self.r
    }

    pub fn path_count(&self) -> usize {
        self.ct.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Transmit correlations including the per-path power scaling.
    pub fn transmit_correlations(&self) -> &[CMatrix] {
        &self.ct
    }

    pub fn receive_correlations(&self) -> &[CMatrix] {
        &self.cr
    }
}

/// Builds the channel statistics for a list of clusters: arrival correlations
/// keep unit diagonal (trace `r`), departure correlations are scaled so path
/// `l` carries trace `t·L·p_l / Σ_m p_m`, which reduces to trace `t` per path
/// for equal powers and keeps the SNR definition `1/σ²` comparable across
/// path counts.
pub fn build_channel_stats(
    specs: &[PathAngularSpec],
    t: usize,
    r: usize,
    sigma2: f64,
    spacing_wavelengths: f64,
) -> Result<ChannelStats> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    for spec in specs {
        spec.validate()?;
    }
    let total_power: f64 = specs.iter().map(|s| s.relative_power).sum();
    let count = specs.len() as f64;
    let mut ct = Vec::with_capacity(specs.len());
    let mut cr = Vec::with_capacity(specs.len());
    for spec in specs {
        let departure =
            build_ula_correlation(spec.mean_departure_angle, spec.departure_spread, t, spacing_wavelengths)?;
        let arrival =
            build_ula_correlation(spec.mean_arrival_angle, spec.arrival_spread, r, spacing_wavelengths)?;
        let target_trace = spec.relative_power * t as f64 * count / total_power;
        ct.push(departure.scaled_to_trace(target_trace));
        cr.push(arrival.matrix().clone());
    }
    ChannelStats::from_parts(ct, cr, sigma2)
}

// ---------------------------------------------------------------------------
// Channel realizations
// ---------------------------------------------------------------------------

/// One frequency-flat channel draw `H = Σ_l H_l`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    h: CMatrix,
}

impl ChannelRealization {
    pub fn matrix(&self) -> &CMatrix {
        &self.h
    }
}

/// Draws one channel realization. Each path contributes
/// `(1/√t) C_r(l)^{1/2} W_l C_t(l)^{1/2}` with `W_l` filled with independent
/// complex circular Gaussians of unit variance (real and imaginary parts
/// `N(0, 1/2)`), independent across paths. Pure function of `(stats, rng
/// state)`: a cloned generator reproduces the draw.
pub fn draw_channel<R: Rng + ?Sized>(stats: &ChannelStats, rng: &mut R) -> ChannelRealization {
    let (t, r) = (stats.t, stats.r);
    let scale = Complex64::new(1.0 / (t as f64).sqrt(), 0.0);
    let mut h = CMatrix::zeros(r, t);
    for l in 0..stats.path_count() {
        let w = CMatrix::from_fn(r, t, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * FRAC_1_SQRT_2
        });
        h += &stats.cr_sqrt[l] * w * &stats.ct_sqrt[l] * scale;
    }
    ChannelRealization { h }
}
