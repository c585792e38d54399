use approx::assert_relative_eq;
use proptest::prelude::*;

use czolab::potentials::potential;
use czolab::{AtomicMeasure, KernelSpec};

fn kernel(choice: u8, s: f64) -> KernelSpec {
    match choice % 4 {
        0 => KernelSpec::cauchy(),
        1 => KernelSpec::conj_cauchy_squared(),
        2 => KernelSpec::riesz(2, s, 1.0).unwrap(),
        _ => KernelSpec::riesz(3, 2.0 * s, 0.5).unwrap(),
    }
}

fn nonzero_point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, d).prop_filter("away from origin", |x| x.iter().map(|c| c * c).sum::<f64>() > 1e-4)
}

fn cloud(d: usize) -> impl Strategy<Value = AtomicMeasure> {
    (1usize..40).prop_flat_map(move |n| {
        (prop::collection::vec(-2.0..2.0f64, n * d), prop::collection::vec(0.01..1.0f64, n))
            .prop_map(move |(c, w)| AtomicMeasure::from_atoms(d, c, w).unwrap())
    })
}

proptest! {
    #[test]
    fn kernels_are_odd_and_homogeneous(choice in 0u8..4, s in 0.3..1.4f64, x in nonzero_point(3), lam in 0.1..10.0f64) {
        let k = kernel(choice, s);
        let x = &x[..k.d];
        prop_assume!(x.iter().map(|c| c * c).sum::<f64>() > 1e-4);
        let kx = k.eval(x).unwrap();
        let neg: Vec<f64> = x.iter().map(|c| -c).collect();
        let scaled: Vec<f64> = x.iter().map(|c| lam * c).collect();
        let kn = k.eval(&neg).unwrap();
        let ks = k.eval(&scaled).unwrap();
        for i in 0..kx.lanes().len() {
            prop_assert!((kx.lanes()[i] + kn.lanes()[i]).abs() <= 1e-12 * kx.norm().max(1.0));
            prop_assert!((ks.lanes()[i] - kx.lanes()[i] * lam.powf(-k.s)).abs() <= 1e-10 * kx.norm().max(1e-300) + 1e-300);
        }
    }

    #[test]
    fn truncation_splits_the_kernel(choice in 0u8..4, s in 0.3..1.4f64, x in nonzero_point(3), delta in 0.01..8.0f64) {
        let k = kernel(choice, s);
        let x = &x[..k.d];
        prop_assume!(x.iter().map(|c| c * c).sum::<f64>() > 1e-4);
        let full = k.eval(x).unwrap();
        let reg = k.eval_regularized(delta, x).unwrap();
        let loc = k.eval_localized(delta, x).unwrap();
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        prop_assert!(reg.norm() <= full.norm() * (1.0 + 1e-12));
        prop_assert!(reg.norm() <= delta.powf(-k.s) * full.norm() * r.powf(k.s) * (1.0 + 1e-9));
        if r >= delta {
            prop_assert!(loc.is_zero());
        }
        let sum = reg + loc;
        for i in 0..full.lanes().len() {
            prop_assert!((sum.lanes()[i] - full.lanes()[i]).abs() <= 1e-12 * full.norm());
        }
    }

    #[test]
    fn rescaling_composes(mu in cloud(2), x in prop::collection::vec(-1.0..1.0f64, 2), r1 in 0.1..4.0f64, r2 in 0.1..4.0f64, s in 0.5..1.5f64) {
        let twice = mu.rescale(&x, r1, s).unwrap().rescale(&[0.0, 0.0], r2, s).unwrap();
        let once = mu.rescale(&x, r1 * r2, s).unwrap();
        for (a, b) in twice.coords().iter().zip(once.coords()) {
            assert_relative_eq!(a, b, epsilon = 1e-12, max_relative = 1e-12);
        }
        for (a, b) in twice.weights().iter().zip(once.weights()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn rescaled_potential_scales_with_homogeneity(mu in cloud(2), r in 0.2..5.0f64) {
        let k = KernelSpec::conj_cauchy_squared();
        let x = [3.0, -2.5];
        let nu = mu.to_signed();
        let direct = potential(&k, &nu, &x, 0.0).unwrap().value;
        let moved = mu.rescale(&[0.0, 0.0], r, 1.0).unwrap().to_signed();
        let y = [x[0] / r, x[1] / r];
        let scaled = potential(&k, &moved, &y, 0.0).unwrap().value;
        for i in 0..direct.lanes().len() {
            prop_assert!((scaled.lanes()[i] - direct.lanes()[i]).abs() <= 1e-9 * direct.norm().max(1e-12));
        }
    }

    #[test]
    fn diffuseness_is_monotone_in_proximity(mu in cloud(2), s in 0.5..1.5f64, r in 0.05..1.0f64) {
        let small = mu.diffuseness_integral(s, 3.0, r).unwrap();
        let large = mu.diffuseness_integral(s, 3.0, 2.0 * r).unwrap();
        prop_assert!(small >= 0.0);
        prop_assert!(large >= small * (1.0 - 1e-12));
    }

    #[test]
    fn ball_mass_is_monotone_and_bounded(mu in cloud(3), r in 0.0..3.0f64) {
        let c = [0.1, -0.2, 0.3];
        let inner = mu.ball_mass(&c, r);
        let outer = mu.ball_mass(&c, r + 0.5);
        prop_assert!(0.0 <= inner && inner <= outer);
        prop_assert!(outer <= mu.total_mass() * (1.0 + 1e-12));
    }
}
