use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::kernels::KernelSpec;
use crate::measures::{make_measure, AtomicMeasure, MeasureDescriptor, SignedAtomicMeasure};

fn disk(h: f64) -> AtomicMeasure {
    make_measure(&MeasureDescriptor::Disk { center: [0.0, 0.0], radius: 1.0, h }).unwrap()
}

fn close(a: CVec, b: CVec, scale: f64, tol: f64) -> bool {
    (a - b).norm() <= tol * scale.max(a.norm()).max(b.norm())
}

fn random_cloud(n: usize, seed: u64) -> AtomicMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weights = (0..n).map(|_| rng.gen_range(0.1..1.0) / n as f64).collect();
    AtomicMeasure::from_atoms(2, coords, weights).unwrap()
}

#[test]
fn potential_examples() {
    let c = KernelSpec::cauchy();
    let v = potential(&c, &SignedAtomicMeasure::dirac(&[0.0, 0.0]), &[1.0, 0.0], 0.0).unwrap();
    assert_eq!(v.value, CVec::from_complex(1.0, 0.0));
    assert_eq!(v.skipped, 0);

    let r = KernelSpec::riesz(2, 1.0, 1.0).unwrap();
    let nu = SignedAtomicMeasure::from_atoms(2, vec![1.0, 0.0, -1.0, 0.0], vec![1.0, 1.0]).unwrap();
    assert!(potential(&r, &nu, &[0.0, 0.0], 0.0).unwrap().value.is_zero());

    let seg = make_measure(&MeasureDescriptor::Segment { a: -1.0, b: 1.0, h: 1e-4 }).unwrap();
    let v = potential(&c, &seg.to_signed(), &[2.0, 0.0], 0.0).unwrap().value;
    assert!((v.re(0) - 3f64.ln()).abs() < 1e-3 && v.im(0).abs() < 1e-12);

    let on = potential(&c, &seg.to_signed(), &[0.0, 0.0], 0.01005).unwrap();
    assert_eq!(on.skipped, 201);
}

#[test]
fn potential_reg_examples() {
    let c = KernelSpec::conj_cauchy_squared();
    let m = disk(0.1).to_signed();
    let x = [3.0, 1.0];
    let a = potential_reg(&c, 0.5, &m, &x).unwrap();
    let b = potential(&c, &m, &x, 0.0).unwrap().value;
    assert!(close(a, b, 0.0, 1e-14));
    assert!(potential_reg(&c, 0.5, &SignedAtomicMeasure::dirac(&x), &x).unwrap().is_zero());

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let fast = potential_reg(&c, 0.1, &m, &x).unwrap();
        let mut slow = c.zero();
        for i in (0..m.len()).rev() {
            let p = m.point(i);
            slow += c.eval_regularized(0.1, &[x[0] - p[0], x[1] - p[1]]).unwrap() * m.weight(i);
        }
        assert!(close(fast, slow, 0.0, 1e-12));
    }
}

#[test]
fn smooth_form_examples() {
    let k = KernelSpec::conj_cauchy_squared();
    let mu = random_cloud(200, 7);
    let f = LipFn::radial_plateau(&[0.2, 0.1], 0.1, 0.6).unwrap();
    let phi = LipFn::hat(&[-0.3, 0.0], 0.8).unwrap();
    for g in [Gauge::Full, Gauge::Regularized(0.2), Gauge::Localized(0.2)] {
        assert!(bilinear_smooth(&k, &mu, &f, &f, g).unwrap().is_zero());
        let a = bilinear_smooth(&k, &mu, &f, &phi, g).unwrap();
        let b = bilinear_smooth(&k, &mu, &phi, &f, g).unwrap();
        assert_eq!(a, -b);
        assert!(!a.is_zero());
    }
    assert!(matches!(
        bilinear_smooth(&k, &mu, &LipFn::One, &f, Gauge::Full),
        Err(crate::CzError::Precondition(_))
    ));
}

#[test]
fn smooth_form_matches_enumeration_for_disjoint_supports() {
    let k = KernelSpec::cauchy();
    let mu = AtomicMeasure::from_atoms(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 2.0], vec![0.5, 1.0, 2.0]).unwrap();
    let f = LipFn::radial_plateau(&[0.0, 0.0], 0.1, 0.2).unwrap();
    let phi = LipFn::radial_plateau(&[1.0, 0.0], 0.1, 0.2).unwrap();
    let got = bilinear_smooth(&k, &mu, &f, &phi, Gauge::Full).unwrap();
    let mut want = k.zero();
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                let (x, y) = (mu.point(i), mu.point(j));
                let kv = k.eval(&[x[0] - y[0], x[1] - y[1]]).unwrap();
                want += kv * (f.eval(y) * phi.eval(x) * mu.weight(i) * mu.weight(j));
            }
        }
    }
    assert!(close(got, want, 0.0, 1e-14));
}

#[test]
fn tilde_form_examples() {
    let k = KernelSpec::conj_cauchy_squared();
    let mu = disk(0.1);
    let bal = BalancingMeasure::default_for(&mu).unwrap();
    assert_relative_eq!(bal.mass(&mu), 1.0, max_relative = 1e-12);
    let phi = LipFn::hat(&[0.3, 0.0], 0.9).unwrap();

    let nu = SignedAtomicMeasure::from_atoms(2, vec![0.31, 0.2, -0.5, 0.13], vec![1.0, -1.0]).unwrap();
    let t = bilinear_tilde(&k, &mu, &nu, &phi, &bal).unwrap();
    let a: Vec<f64> = phi.values_at(&mu).iter().zip(mu.weights()).map(|(p, w)| p * w).collect();
    let raw = super::forms::cross_form(&k, Gauge::Full, mu.coords(), &a, nu.coords(), nu.weights());
    assert_eq!(t.value, raw);

    let (xs, ws) = bal.atoms(&mu);
    let nu0 = SignedAtomicMeasure::from_atoms(2, xs, ws).unwrap();
    let t0 = bilinear_tilde(&k, &mu, &nu0, &phi, &bal).unwrap();
    assert!(t0.value.norm() < 1e-12, "{:?}", t0.value);
    assert_eq!(t0.skipped, nu0.len());

    let x = [0.123, -0.217];
    let field = TbarField::new(&k, &mu, LipFn::One, &bal).unwrap();
    let t = bilinear_tilde(&k, &mu, &SignedAtomicMeasure::dirac(&x), &LipFn::One, &bal).unwrap();
    for delta in [0.05, 0.3] {
        let rebuilt = field.tbar_delta(&x, delta).unwrap() + field.localized_at(&x, delta).unwrap();
        assert!(close(t.value, rebuilt, field.balance_term().norm(), 1e-10));
    }
}

#[test]
fn g_tilde_vanishes_at_degenerate_balancing_atom() {
    let k = KernelSpec::cauchy();
    let mu = random_cloud(100, 11);
    let bal = BalancingMeasure::at_atom(&mu, 17).unwrap();
    let phi = LipFn::hat(&[0.0, 0.0], 1.0).unwrap();
    let field = TbarField::new(&k, &mu, phi, &bal).unwrap();
    let y = mu.point(17).to_vec();
    let g = field.g_tilde(&y, 0.1).unwrap();
    assert!(g.norm() <= 1e-12 * field.field(&y, Gauge::Regularized(0.1)).norm().max(1.0));
}

#[test]
fn disk_center_vanishes_by_symmetry() {
    let k = KernelSpec::conj_cauchy_squared();
    let mu = disk(0.05);
    let bal = BalancingMeasure::default_for(&mu).unwrap();
    let field = TbarField::new(&k, &mu, LipFn::One, &bal).unwrap();
    for delta in geometric_ladder(1e-3, 10.0, 2.0).unwrap() {
        assert!(field.tbar_delta(&[0.0, 0.0], delta).unwrap().norm() <= 1e-12);
        assert!(field.g_tilde(&[0.0, 0.0], delta).unwrap().norm() <= 1e-12);
    }
}

fn rel(terms: &[CVec]) -> f64 {
    let total = terms.iter().fold(CVec::zeros(terms[0].components()), |a, b| a + *b);
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    if scale == 0.0 {
        0.0
    } else {
        total.norm() / scale
    }
}

#[test]
fn discrete_identities_hold() {
    let kernels = [
        KernelSpec::cauchy(),
        KernelSpec::conj_cauchy_squared(),
        KernelSpec::riesz(2, 1.0, 1.0).unwrap(),
        KernelSpec::riesz(2, 1.5, 0.5).unwrap(),
    ];
    for (n, k) in kernels.iter().enumerate() {
        let mu = random_cloud(300, 100 + n as u64);
        let bal = BalancingMeasure::default_for(&mu).unwrap();
        let phi = LipFn::combination(vec![(1.0, LipFn::One), (0.5, LipFn::hat(&[0.1, 0.2], 0.7).unwrap())]);
        let field = TbarField::new(k, &mu, phi, &bal).unwrap();
        let (x, xp) = ([0.113, 0.271], [-0.412, 0.05]);
        let (delta, big) = (0.07, 0.4);

        // G̃_δ(y) − G̃_Δ(z) − Σ[K_δ(a−y) − K_Δ(a−z)]φw − ⟨T^δν₀,φ⟩ + ⟨T^Δν₀,φ⟩ = 0
        let terms = [
            field.g_tilde(&x, delta).unwrap(),
            -field.g_tilde(&xp, big).unwrap(),
            -field.field(&x, Gauge::Regularized(delta)),
            field.field(&xp, Gauge::Regularized(big)),
            -field.localized_balance(delta).unwrap(),
            field.localized_balance(big).unwrap(),
        ];
        assert!(rel(&terms) < 1e-10, "deltaDelta {}", rel(&terms));

        // fast and literal routes agree
        let fast = field.tbar_delta(&x, delta).unwrap();
        let lit = field.tbar_delta_literal(&x, delta).unwrap();
        assert!(rel(&[fast, -lit]) < 1e-10);

        // T̄ = T̄_δ + ⟨T^δδ_x, φ⟩
        let t = field.tbar(&x).unwrap();
        let terms = [t, -fast, -field.localized_at(&x, delta).unwrap()];
        assert!(rel(&terms) < 1e-10);

        // differences
        let terms = [
            field.tbar_delta(&x, delta).unwrap(),
            -field.tbar_delta(&xp, delta).unwrap(),
            -(field.field(&x, Gauge::Regularized(delta)) - field.field(&xp, Gauge::Regularized(delta))),
        ];
        assert!(rel(&terms) < 1e-10);
        let terms = [
            field.tbar(&x).unwrap(),
            -field.tbar(&xp).unwrap(),
            -(field.field(&x, Gauge::Full) - field.field(&xp, Gauge::Full)),
        ];
        assert!(rel(&terms) < 1e-10);

        // F_{δ,Δ} = T̄_δ − T̄_Δ and its bound
        let f = field.f_delta_delta(&x, delta, big).unwrap();
        let terms = [f, -field.tbar_delta(&x, delta).unwrap(), field.tbar_delta(&x, big).unwrap()];
        assert!(rel(&terms) < 1e-10);
        assert!(f.norm() <= field.f_bound(&x, delta, big));
        assert!(field.f_delta_delta(&x, big, big).unwrap().is_zero());
        assert!(field.f_delta_delta(&x, big, delta).is_err());
    }
}

#[test]
fn tbar_rejects_atoms() {
    let k = KernelSpec::cauchy();
    let mu = disk(0.2);
    let bal = BalancingMeasure::default_for(&mu).unwrap();
    let field = TbarField::new(&k, &mu, LipFn::One, &bal).unwrap();
    assert!(matches!(field.tbar(&[0.0, 0.0]), Err(crate::CzError::Domain(_))));
    assert!(field.tbar_delta(&[0.0, 0.0], 0.1).is_ok());
}

#[test]
fn tbar_ladder_converges_off_atoms() {
    let k = KernelSpec::cauchy();
    let mu = disk(0.05);
    let bal = BalancingMeasure::default_for(&mu).unwrap();
    let field = TbarField::new(&k, &mu, LipFn::One, &bal).unwrap();
    let x = [0.3137, 0.1311];
    let (v, d) = tbar_limit(&field, &x, 1.0, 1e-4, 1e-12).unwrap();
    assert!(d <= 0.0233, "{d}");
    assert!(close(v, field.tbar(&x).unwrap(), 1.0, 1e-12));
}

#[test]
fn line_poisson_oracle() {
    // ∫ dt/(x + i y − t) over a long segment: imaginary part → −π for y > 0
    let k = KernelSpec::cauchy();
    let mu = make_measure(&MeasureDescriptor::Segment { a: -200.0, b: 200.0, h: 0.01 }).unwrap();
    let nu = mu.to_signed();
    let v = potential(&k, &nu, &[0.3, 0.5], 0.0).unwrap().value;
    assert!((v.im(0) + std::f64::consts::PI).abs() < 0.01, "{v:?}");
}

#[test]
fn localization_ignores_far_values_of_phi() {
    let k = KernelSpec::riesz(2, 1.0, 1.0).unwrap();
    let mu = random_cloud(300, 5);
    let f = LipFn::radial_plateau(&[0.0, 0.0], 0.1, 0.3).unwrap();
    let delta = 0.2;
    let phi = LipFn::hat(&[0.2, 0.2], 2.0).unwrap();
    // agrees with phi on B(0, 0.5) ⊃ [supp f]_δ
    let cut = LipFn::radial_plateau(&[0.0, 0.0], 0.55, 0.7).unwrap();
    let phi2 = LipFn::combination(vec![
        (1.0, phi.clone()),
        (3.0, LipFn::combination(vec![(1.0, LipFn::One), (-1.0, cut)])),
    ]);
    let a = bilinear_smooth(&k, &mu, &f, &phi, Gauge::Localized(delta)).unwrap();
    let b = bilinear_smooth(&k, &mu, &f, &phi2, Gauge::Localized(delta)).unwrap();
    assert!(close(a, b, 0.0, 1e-12));
    let a = bilinear_smooth(&k, &mu, &f, &phi, Gauge::Full).unwrap();
    let b = bilinear_smooth(&k, &mu, &f, &phi2, Gauge::Full).unwrap();
    assert!(!close(a, b, 0.0, 1e-6));
}

#[test]
fn rescaling_covariance() {
    for k in [KernelSpec::cauchy(), KernelSpec::riesz(2, 1.3, 0.7).unwrap()] {
        let mu = random_cloud(200, 21);
        let f = LipFn::radial_plateau(&[0.1, -0.1], 0.2, 0.5).unwrap();
        let phi = LipFn::hat(&[0.0, 0.3], 1.2).unwrap();
        let (x, r) = ([0.25, -0.4], 0.37);
        let lhs = bilinear_smooth(&k, &mu, &f, &phi, Gauge::Full).unwrap();
        let mu_r = mu.rescale(&x, r, k.s).unwrap();
        let rhs = bilinear_smooth(&k, &mu_r, &f.clone().rescaled(&x, r), &phi.clone().rescaled(&x, r), Gauge::Full)
            .unwrap()
            * r.powf(k.s);
        assert!(close(lhs, rhs, 0.0, 1e-10));
    }
}

#[test]
fn forms_are_thread_count_independent() {
    let k = KernelSpec::conj_cauchy_squared();
    let mu = random_cloud(1500, 9);
    let f = LipFn::radial_plateau(&[0.0, 0.0], 0.2, 0.6).unwrap();
    let run = |t: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .unwrap()
            .install(|| bilinear_smooth(&k, &mu, &f, &LipFn::One, Gauge::Full).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn cotlar_on_zero_measure_is_zero() {
    let k = KernelSpec::cauchy();
    let mu = AtomicMeasure::empty(2);
    let bal = BalancingMeasure {
        eta: LipFn::radial_plateau(&[0.0, 0.0], 0.0, 1.0).unwrap(),
    };
    let field = TbarField::new(&k, &mu, LipFn::One, &bal).unwrap();
    let rep = field.cotlar_sup(&[0.5, 0.5], &geometric_ladder(1e-3, 10.0, 2.0).unwrap()).unwrap();
    assert_eq!(rep.sup, 0.0);
}

#[test]
fn cotlar_tail_bound() {
    // for δ beyond diam + |x| the potential is the plain tail sum
    let k = KernelSpec::conj_cauchy_squared();
    let mu = disk(0.1);
    let bal = BalancingMeasure::default_for(&mu).unwrap();
    let field = TbarField::new(&k, &mu, LipFn::One, &bal).unwrap();
    let x = [0.4, 0.1];
    let big = 5.0;
    let v = field.tbar_delta(&x, big).unwrap();
    let bound = mu.total_mass() / big + field.balance_term().norm();
    assert!(v.norm() <= bound);
}
