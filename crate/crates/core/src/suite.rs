//! Machine-checkable battery of identities and invariants, run by the
//! `invariant-suite` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collapse::{self, CollapseParams};
use crate::error::Result;
use crate::kernels::{check_axioms, KernelSpec};
use crate::measures::{make_measure, AtomicMeasure, MeasureDescriptor};
use crate::potentials::{
    bilinear_smooth, geometric_ladder, wolff, BalancingMeasure, Gauge, LipFn, TbarField,
};
use crate::reflectionless::{defect, mean_zero_adjust};
use crate::value::CVec;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn run(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    let (passed, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
    Check {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Normalized residual `|Σ terms| / Σ|terms|`.
pub fn residual(terms: &[CVec]) -> f64 {
    let total = terms.iter().fold(CVec::zeros(terms[0].components()), |a, b| a + *b);
    let scale: f64 = terms.iter().map(|t| t.norm()).sum();
    if scale == 0.0 {
        0.0
    } else {
        total.norm() / scale
    }
}

/// Seeded planar cloud of `n` atoms in `[−1, 1]²`.
pub fn random_cloud(n: usize, seed: u64) -> AtomicMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let weights = (0..n).map(|_| rng.gen_range(0.1..1.0) / n as f64).collect();
    AtomicMeasure::from_atoms(2, coords, weights).expect("finite cloud")
}

/// Worst normalized residuals of the discrete identities on one instance.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub two_gauge_difference: f64,
    pub fast_vs_literal: f64,
    pub localized_correction: f64,
    pub regularized_difference: f64,
    pub full_difference: f64,
    pub truncation_difference: f64,
    pub antisymmetry: f64,
    pub rescaling: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [
            self.two_gauge_difference,
            self.fast_vs_literal,
            self.localized_correction,
            self.regularized_difference,
            self.full_difference,
            self.truncation_difference,
            self.antisymmetry,
            self.rescaling,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluate every identity on a seeded instance: a random cloud of `n`
/// atoms, random test functions, points and gauges.
pub fn identity_instance(k: &KernelSpec, n: usize, seed: u64) -> Result<IdentityResiduals> {
    let mu = random_cloud(n, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut pt = || [rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)];
    let (c1, c2, x, xp, y) = (pt(), pt(), pt(), pt(), pt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead);
    let delta = rng.gen_range(0.02..0.2);
    let big = delta * rng.gen_range(1.5..8.0);
    let r = rng.gen_range(0.2..3.0);
    let bal = BalancingMeasure::default_for(&mu)?;
    let phi = LipFn::combination(vec![(1.0, LipFn::One), (0.5, LipFn::hat(&c1, 0.7)?)]);
    let field = TbarField::new(k, &mu, phi, &bal)?;

    let mut out = IdentityResiduals {
        two_gauge_difference: residual(&[
            field.g_tilde(&x, delta)?,
            -field.g_tilde(&xp, big)?,
            -field.field(&x, Gauge::Regularized(delta)),
            field.field(&xp, Gauge::Regularized(big)),
            -field.localized_balance(delta)?,
            field.localized_balance(big)?,
        ]),
        ..Default::default()
    };
    let fast = field.tbar_delta(&x, delta)?;
    out.fast_vs_literal = residual(&[fast, -field.tbar_delta_literal(&x, delta)?]);
    out.localized_correction = residual(&[field.tbar(&x)?, -fast, -field.localized_at(&x, delta)?]);
    out.regularized_difference = residual(&[
        fast,
        -field.tbar_delta(&xp, delta)?,
        -(field.field(&x, Gauge::Regularized(delta)) - field.field(&xp, Gauge::Regularized(delta))),
    ]);
    out.full_difference = residual(&[
        field.tbar(&x)?,
        -field.tbar(&xp)?,
        -(field.field(&x, Gauge::Full) - field.field(&xp, Gauge::Full)),
    ]);
    out.truncation_difference = residual(&[
        field.f_delta_delta(&x, delta, big)?,
        -fast,
        field.tbar_delta(&x, big)?,
    ]);

    let f = LipFn::radial_plateau(&c2, 0.2, 0.5)?;
    let g = LipFn::hat(&y, 0.8)?;
    let fg = bilinear_smooth(k, &mu, &f, &g, Gauge::Full)?;
    let gf = bilinear_smooth(k, &mu, &g, &f, Gauge::Full)?;
    out.antisymmetry = residual(&[fg, gf]);

    let mu_r = mu.rescale(&x, r, k.s)?;
    let scaled = bilinear_smooth(k, &mu_r, &f.clone().rescaled(&x, r), &g.clone().rescaled(&x, r), Gauge::Full)?;
    out.rescaling = residual(&[fg, -(scaled * r.powf(k.s))]);
    Ok(out)
}

/// Run the full battery. `seed` drives every randomized instance.
pub fn invariant_suite(seed: u64) -> Vec<Check> {
    let kernels = [
        KernelSpec::cauchy(),
        KernelSpec::conj_cauchy_squared(),
        KernelSpec::riesz(2, 1.0, 1.0).expect("valid"),
        KernelSpec::riesz(2, 1.5, 0.5).expect("valid"),
    ];
    let mut out = Vec::new();

    out.push(run("kernel axioms", || {
        let mut worst = String::new();
        let mut ok = true;
        for k in kernels.iter().chain([KernelSpec::riesz(3, 2.0, 1.0)?].iter()) {
            let rep = check_axioms(k, 2000, seed);
            ok &= rep.passes();
            worst = format!("{worst}{:?}: growth {:.3e}; ", k.family, rep.growth);
        }
        Ok((ok, worst))
    }));

    out.push(run("discrete identities", || {
        let mut worst = 0.0f64;
        for (i, k) in kernels.iter().enumerate() {
            for j in 0..3 {
                let r = identity_instance(k, 200, seed.wrapping_add(10 * i as u64 + j))?;
                worst = worst.max(r.max());
            }
        }
        Ok((worst < 1e-10, format!("max residual {worst:.3e}")))
    }));

    out.push(run("thread-count independence", || {
        let k = KernelSpec::conj_cauchy_squared();
        let mu = random_cloud(1000, seed);
        let f = LipFn::radial_plateau(&[0.0, 0.0], 0.2, 0.6)?;
        let go = |t: usize| -> Result<CVec> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| crate::CzError::Io(e.to_string()))?;
            pool.install(|| bilinear_smooth(&k, &mu, &f, &LipFn::One, Gauge::Full))
        };
        let (a, b) = (go(1)?, go(3)?);
        Ok((a == b, format!("{:?} vs {:?}", a.lanes(), b.lanes())))
    }));

    out.push(run("disk center symmetry", || {
        let k = KernelSpec::conj_cauchy_squared();
        let mu = make_measure(&MeasureDescriptor::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
            h: 0.05,
        })?;
        let bal = BalancingMeasure::default_for(&mu)?;
        let field = TbarField::new(&k, &mu, LipFn::One, &bal)?;
        let mut worst = 0.0f64;
        for d in geometric_ladder(1e-3, 10.0, 2.0)? {
            worst = worst.max(field.tbar_delta(&[0.0, 0.0], d)?.norm());
        }
        Ok((worst <= 1e-12, format!("max |Tbar_delta(1)(0)| = {worst:.3e}")))
    }));

    out.push(run("segment defect decreases with h", || {
        let k = KernelSpec::cauchy();
        let hat = LipFn::hat(&[0.0, 0.0], 0.5)?;
        let rho = LipFn::radial_plateau(&[0.0, 0.0], 0.1, 0.3)?;
        let mut defects = Vec::new();
        for h in [8e-3, 4e-3] {
            let mu = make_measure(&MeasureDescriptor::Segment { a: -1.0, b: 1.0, h })?;
            let f = mean_zero_adjust(&mu, &hat, &rho)?;
            defects.push(defect(&k, &mu, &f)?);
        }
        Ok((defects[1] * 1.5 <= defects[0], format!("{:.3e} then {:.3e}", defects[0], defects[1])))
    }));

    out.push(run("wolff closed form", || {
        let mu = AtomicMeasure::from_atoms(2, vec![0.0, 0.0], vec![1.0])?;
        let (s, p, lo, hi): (f64, f64, f64, f64) = (1.0, 2.0, 0.1, 10.0);
        let exact = (lo.powf(-s * p) - hi.powf(-s * p)) / (s * p);
        let got = wolff(&mu, s, p, &[0.0, 0.0], [lo, hi], 200)?;
        let rel = (got - exact).abs() / exact;
        Ok((rel < 0.01, format!("relative error {rel:.3e}")))
    }));

    out.push(run("collapse certificate", || {
        let p = CollapseParams {
            epsilon: 0.1,
            d: 2,
            s: 1.0,
            alpha: 1.0,
            lambda_nice: 2.0,
            c1: 1.0,
            c4: 1.0,
            c6: 1.0,
            c8: 10.0,
            c9: 1e-6,
            beta: 2.0,
            t0: 1.5,
            kappa0: None,
        };
        let rep = collapse::feasible_kappa(&p)?;
        let tr = collapse::run_recursion(&CollapseParams { kappa0: Some(rep.kappa), ..p.clone() }, rep.m0, 2000)?;
        let bigger = collapse::feasible_kappa(&CollapseParams { c1: 2.0, ..p })?;
        let ok = tr.first_violation.is_none() && tr.geometric_certificate && bigger.kappa <= rep.kappa;
        Ok((ok, format!("kappa {:.3e}, m0 {:.3e}", rep.kappa, rep.m0)))
    }));

    out.push(run("E-set sign exclusivity", || {
        let k = KernelSpec::conj_cauchy_squared();
        let mu = make_measure(&MeasureDescriptor::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
            h: 0.1,
        })?;
        let bal = BalancingMeasure::default_for(&mu)?;
        let mesh = collapse::Mesh::ball(&[0.0, 0.0], 2.0, 0.4)?;
        let ladder = collapse::e_set_ladder(0.05, 1.0)?;
        let e = CVec::from_complex(1.0, 0.0);
        let a = collapse::e_set_density(&k, &mu, &bal, &e, 1e-3, 1.0, &mesh, &ladder)?;
        let b = collapse::e_set_density(&k, &mu, &bal, &(-e), 1e-3, 1.0, &mesh, &ladder)?;
        let overlap = a.in_set.iter().zip(&b.in_set).filter(|(x, y)| **x && **y).count();
        Ok((overlap == 0, format!("overlap {overlap}")))
    }));

    out.push(run("porosity", || {
        let seg = make_measure(&MeasureDescriptor::Segment { a: -1.0, b: 1.0, h: 0.01 })?;
        let disk = make_measure(&MeasureDescriptor::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
            h: 0.01,
        })?;
        let found = collapse::porosity_search(&seg, &[0.0, 0.0], 1.0, 0.1)?;
        let none = collapse::porosity_search(&disk, &[0.0, 0.0], 0.5, 0.1)?;
        Ok((found.is_some() && none.is_none(), format!("segment {found:?}, disk {none:?}")))
    }));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        for c in invariant_suite(1) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
