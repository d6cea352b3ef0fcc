use std::f64::consts::PI;

use mincon::exterior::{volume_excess, KForm};
use mincon::field::{FormField, Scheme, TorusGrid};
use mincon::fourier_mukai::{fm_delta_check, GraphMap};
use mincon::monotonicity::{check_sequence, theta, theta_closed};
use mincon::pointwise::{skew_canonical, xi, PointData, TwoFormPoint};
use nalgebra::DVector;
use proptest::prelude::*;

fn two_form() -> impl Strategy<Value = TwoFormPoint> {
    (2usize..=8).prop_flat_map(|n| {
        prop::collection::vec(-4.0..4.0f64, n * (n - 1) / 2)
            .prop_map(move |c| KForm::from_coeffs(n, 2, c).unwrap().to_two_form_point().unwrap())
    })
}

proptest! {
    #[test]
    fn pointwise_bounds(beta in two_form()) {
        let n = beta.dim();
        let p = PointData::of(&beta);
        prop_assert!(p.volume >= 1.0);
        prop_assert!(p.trace_g_inverse() <= n as f64 + 1e-12);
        let eig = p.g_inv.clone().symmetric_eigen().eigenvalues;
        prop_assert!(eig.iter().all(|&l| l > 0.0 && l <= 1.0 + 1e-12));
        let series = 1.0 + volume_excess(&KForm::from_two_form_point(&beta)).unwrap();
        prop_assert!((p.volume - series).abs() <= 1e-10 * series);
        let s = skew_canonical(&beta).unwrap();
        prop_assert!((s.volume() - p.volume).abs() <= 1e-9 * p.volume);
    }

    #[test]
    fn xi_is_nonnegative(beta in two_form(), seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let n = beta.dim();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        prop_assume!(v.norm() > 1e-3);
        prop_assert!(xi(&beta, &v.normalize()).unwrap() >= -1e-12);
    }

    #[test]
    fn exterior_derivative_squares_to_zero(seed in any::<u64>(), k in 0usize..=1) {
        let g = TorusGrid::cube(3, 8, 2.0 * PI).unwrap();
        let s = Scheme::fourth();
        let f = FormField::band_limited(&g, k, 1, 1.0, seed).unwrap();
        let dd = s.ext_d(&s.ext_d(&f).unwrap()).unwrap();
        prop_assert!(dd.max_abs() <= 1e-12);
    }

    #[test]
    fn codifferential_is_the_lattice_adjoint(seed in any::<u64>()) {
        let g = TorusGrid::cube(2, 12, 2.0 * PI).unwrap();
        let s = Scheme::second();
        let a = FormField::band_limited(&g, 1, 2, 1.0, seed).unwrap();
        let b = FormField::band_limited(&g, 2, 2, 1.0, seed.wrapping_add(1)).unwrap();
        let lhs = s.ext_d(&a).unwrap().l2_inner(&b).unwrap();
        let rhs = a.l2_inner(&s.codifferential(&b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn nondecreasing_sequences_pass(mut xs in prop::collection::vec(-10.0..10.0f64, 2..30)) {
        xs.sort_by(f64::total_cmp);
        let zeros = vec![0.0; xs.len()];
        prop_assert!(check_sequence(&xs, &zeros, 0.0).unwrap().pass);
        xs.reverse();
        let strict = xs.windows(2).any(|w| w[1] < w[0] - 1e-6 * (1.0 + w[0].abs()));
        prop_assert_eq!(check_sequence(&xs, &zeros, 1e-9).unwrap().pass, !strict);
    }

    #[test]
    fn theta_closed_forms_track_quadrature(n in prop::sample::select(vec![1usize, 3, 5, 7]), a in 0.0..5.0f64, tau in 0.01..2.0f64) {
        let c = theta_closed(a, n, tau).unwrap();
        let q = theta(a, n, tau).unwrap();
        prop_assert!((c - q).abs() <= 1e-10 * q.abs());
    }

    #[test]
    fn delta_identity_on_random_quadratic_graphs(coeffs in prop::collection::vec(-1.0..1.0f64, 12), x in prop::collection::vec(-0.5..0.5f64, 2)) {
        // p = 2, q = 2: six coefficients per fiber direction
        let g = GraphMap::custom(2, 2, &coeffs, 1.0).unwrap();
        let d = fm_delta_check(&g, &x).unwrap();
        prop_assert!(d.residual <= 1e-12 && d.base_leak <= 1e-12, "{d:?}");
    }
}
