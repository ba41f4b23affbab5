//! Complex Hermitian linear-algebra helpers shared by the model and solver
//! modules: eigendecompositions sorted by eigenvalue, PSD square roots,
//! `log det` of well-conditioned Hermitian matrices, spectral radii and
//! Gauss-Legendre quadrature rules.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = DMatrix<Complex64>;

/// Relative Frobenius defect `‖M − Mᴴ‖ / ‖M‖` (0 for the zero matrix).
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let norm = m.norm();
    if norm == 0.0 {
        return 0.0;
    }
    (m - m.adjoint()).norm() / norm
}

/// Symmetrizes rounding noise: returns `(M + Mᴴ)/2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order. Returns `(eigenvalues, eigenvectors)` with eigenvectors
/// stored as columns matching the sorted order.
pub fn hermitian_eigen_desc(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> DVector<f64> {
    let mut vals: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    DVector::from_vec(vals)
}

/// Hermitian PSD square root. Eigenvalues below zero (rounding noise from
/// upstream projections) are clipped to zero before taking the square root.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen_desc(m);
    let scaled = apply_spectral(&values, &vectors, |l| l.max(0.0).sqrt());
    hermitize(&scaled)
}

/// Rebuilds `U f(Λ) Uᴴ` from a spectral factorization.
pub fn apply_spectral(values: &DVector<f64>, vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = values.len();
    let diag = CMatrix::from_diagonal(&DVector::from_iterator(
        n,
        values.iter().map(|&l| Complex64::new(f(l), 0.0)),
    ));
    vectors * diag * vectors.adjoint()
}

/// Inverse of a Hermitian positive-definite matrix via Cholesky.
pub fn hpd_inverse(m: &CMatrix) -> Option<CMatrix> {
    Cholesky::new(m.clone()).map(|ch| ch.inverse())
}

/// `ln det(I + M)` for Hermitian PSD `M`. The argument `I + M` has all
/// eigenvalues at least one, so the Cholesky route is stable; the eigenvalue
/// fallback only fires if rounding pushed the factorization over the edge.
pub fn logdet_one_plus_hpsd(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let a = CMatrix::identity(n, n) + m;
    match Cholesky::new(a.clone()) {
        Some(ch) => 2.0 * ch.l().diagonal().iter().map(|z| z.re.ln()).sum::<f64>(),
        None => hermitian_eigenvalues(&a)
            .iter()
            .map(|&l| l.max(f64::MIN_POSITIVE).ln())
            .sum(),
    }
}

/// `Re Tr(A B)` without forming the product.
pub fn trace_product_re(a: &CMatrix, b: &CMatrix) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

/// Spectral radius of a real square matrix (largest eigenvalue modulus).
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Sup-norm of the difference of two equally sized vectors.
pub fn sup_norm_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, computed by Newton
/// iteration on the Legendre recurrence.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1, "quadrature order must be positive");
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        // Tricomi initial guess for the i-th positive root.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped onto `[a, b]`.
pub fn gauss_legendre_on(order: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let scale = 0.5 * (b - a);
    (
        nodes.iter().map(|&x| mid + scale * x).collect(),
        weights.iter().map(|&w| w * scale).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = CMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        hermitize(&g)
    }

    #[test]
    fn eigen_sorted_and_reconstructs() {
        let m = random_hermitian(6, 1);
        let (vals, vecs) = hermitian_eigen_desc(&m);
        for i in 1..vals.len() {
            assert!(vals[i - 1] >= vals[i]);
        }
        let rebuilt = apply_spectral(&vals, &vecs, |l| l);
        assert!((rebuilt - m).norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let g = random_hermitian(5, 2);
        let psd = hermitize(&(&g * g.adjoint()));
        let s = psd_sqrt(&psd);
        assert!(((&s * &s) - &psd).norm() < 1e-10 * (1.0 + psd.norm()));
    }

    #[test]
    fn logdet_matches_eigenvalues() {
        let g = random_hermitian(5, 3);
        let psd = hermitize(&(&g * g.adjoint()));
        let direct: f64 = hermitian_eigenvalues(
            &(CMatrix::identity(5, 5) + &psd),
        )
        .iter()
        .map(|l| l.ln())
        .sum();
        assert!((logdet_one_plus_hpsd(&psd) - direct).abs() < 1e-12);
    }

    #[test]
    fn trace_product_agrees_with_full_product() {
        let a = random_hermitian(4, 4);
        let b = random_hermitian(4, 5);
        let full = (&a * &b).trace().re;
        assert!((trace_product_re(&a, &b) - full).abs() < 1e-13);
    }

    #[test]
    fn spectral_radius_of_known_matrix() {
        // Eigenvalues of [[1,2],[3,2]] are 4 and -1.
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 2.0]);
        assert!((spectral_radius(&m) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        // Degree-14 monomial is exact for an 8-point rule.
        let integral: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(14)).sum();
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
        let odd: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(7)).sum();
        assert!(odd.abs() < 1e-15);
    }

    #[test]
    fn mapped_quadrature_integrates_cosine() {
        let (x, w) = gauss_legendre_on(32, 0.0, PI);
        let integral: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.sin()).sum();
        assert!((integral - 2.0).abs() < 1e-13);
    }
}
