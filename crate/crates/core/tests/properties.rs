//! Property tests for the construction invariants: correlation builders,
//! covariance normalization, waterfilling budgets and resolvent identities.

use ergocap::channel::{build_ula_correlation, ChannelStats, CorrelationMatrix};
use ergocap::emi::Covariance;
use ergocap::linalg::{hermitian_defect, hermitian_eigenvalues, CMatrix};
use ergocap::optimizer::waterfill;
use ergocap::{resolvent_t, resolvent_t_tilde};
use nalgebra::DVector;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_hpd(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CorrelationMatrix::random_unit_diagonal(n, &mut rng)
        .matrix()
        .clone()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn ula_correlations_are_valid(
        mean in -7.0f64..7.0,
        spread in 0.0f64..1.5,
        n in 1usize..6,
        spacing in 0.1f64..1.0,
    ) {
        let c = build_ula_correlation(mean, spread, n, spacing).unwrap();
        prop_assert!(hermitian_defect(c.matrix()) < 1e-13);
        for p in 0..n {
            prop_assert_eq!(c.matrix()[(p, p)], Complex64::new(1.0, 0.0));
        }
        prop_assert!(c.min_eigenvalue() >= -1e-12);
    }

    #[test]
    fn normalized_covariances_live_on_the_constraint_set(seed in 0u64..1_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = Covariance::random_in_c1(4, &mut rng);
        prop_assert!(q.is_unit_normalized());
        prop_assert!(hermitian_eigenvalues(q.matrix())[0] >= -1e-12);

        // Convex mixes stay on the set.
        let p = Covariance::random_in_c1(4, &mut rng);
        let mixed = q.convex_mix(&p, 0.3);
        prop_assert!(mixed.is_unit_normalized());
    }

    #[test]
    fn waterfilling_respects_budget_and_slackness(seed in 0u64..1_000, scale in 0.05f64..20.0) {
        let base = random_hpd(4, seed);
        let c = &base * Complex64::new(scale, 0.0);
        let wf = waterfill(&c).unwrap();
        prop_assert!(!wf.degenerate);
        prop_assert!((wf.q.trace() - 4.0).abs() < 1e-10);
        prop_assert!(wf.water_level > 0.0);

        let eigs = hermitian_eigenvalues(&c);
        let mut descending: Vec<f64> = eigs.iter().copied().collect();
        descending.reverse();
        for (i, &lambda) in descending.iter().enumerate() {
            let active = wf.active_set.contains(&i);
            let headroom = wf.water_level - 1.0 / lambda;
            if active {
                prop_assert!(headroom > 0.0, "active mode {i} has no headroom");
            } else {
                prop_assert!(headroom <= 1e-12, "inactive mode {i} has headroom {headroom}");
            }
        }
    }

    #[test]
    fn resolvents_multiply_back(seed in 0u64..500, sigma2 in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ct: Vec<CMatrix> = (0..2).map(|_| {
            CorrelationMatrix::random_unit_diagonal(3, &mut rng).matrix().clone()
        }).collect();
        let cr: Vec<CMatrix> = (0..2).map(|_| {
            CorrelationMatrix::random_unit_diagonal(3, &mut rng).matrix().clone()
        }).collect();
        let stats = ChannelStats::from_parts(ct, cr, sigma2).unwrap();
        let coeffs = DVector::from_fn(2, |i, _| 0.1 + i as f64);

        let t_mat = resolvent_t(&stats, &coeffs).unwrap();
        let mut arg = CMatrix::identity(3, 3);
        for (c, &k) in stats.receive_correlations().iter().zip(coeffs.iter()) {
            arg += c * Complex64::new(k, 0.0);
        }
        arg *= Complex64::new(sigma2, 0.0);
        prop_assert!(((&t_mat * &arg) - CMatrix::identity(3, 3)).norm() < 1e-12);

        let q = Covariance::random_in_c1(3, &mut rng);
        let tt = resolvent_t_tilde(&stats, &coeffs, &q).unwrap();
        prop_assert!(hermitian_defect(&tt) < 1e-12);
        prop_assert!(hermitian_eigenvalues(&tt)[0] > 0.0);
    }
}
