//! Numerical tests of the reflectionless property.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CzError, Result};
use crate::kernels::KernelSpec;
use crate::measures::{AtomicMeasure, SignedAtomicMeasure};
use crate::potentials::{bilinear_smooth, bilinear_tilde, BalancingMeasure, Gauge, LipFn, TbarField};
use crate::sum::{block_argmax, block_sum, Accumulator};
use crate::value::CVec;

/// `f − λρ` with `λ = ∫f dμ / ∫ρ dμ`.
pub fn mean_zero_adjust(mu: &AtomicMeasure, f: &LipFn, rho: &LipFn) -> Result<LipFn> {
    let zr = rho.integrate(mu);
    if zr == 0.0 || !zr.is_finite() {
        return Err(CzError::precondition("degenerate normalizer: ∫ρ dμ = 0"));
    }
    let mean = f.integrate(mu);
    let mass = block_sum(0.0, mu.len(), |i| (f.eval(mu.point(i)) * mu.weight(i)).abs());
    // already mean-zero up to round-off
    if mean.abs() <= 1e-14 * mass {
        return Ok(f.clone());
    }
    Ok(LipFn::MeanZeroAdjusted {
        f: Box::new(f.clone()),
        rho: Box::new(rho.clone()),
        lambda: mean / zr,
    })
}

fn check_mean_zero(mu: &AtomicMeasure, fv: &[f64]) -> Result<()> {
    let mean = block_sum(0.0, mu.len(), |i| fv[i] * mu.weight(i));
    let mass = block_sum(0.0, mu.len(), |i| (fv[i] * mu.weight(i)).abs());
    if mean.abs() > 1e-9 * mass {
        return Err(CzError::precondition(format!(
            "test function is not mean-zero: ∫f dμ = {mean:e}, ∫|f| dμ = {mass:e}"
        )));
    }
    Ok(())
}

/// `|⟨T(fμ), 1⟩_μ|` through the symmetrized form.
pub fn defect(k: &KernelSpec, mu: &AtomicMeasure, f: &LipFn) -> Result<f64> {
    check_mean_zero(mu, &f.values_at(mu))?;
    Ok(bilinear_smooth(k, mu, f, &LipFn::One, Gauge::Full)?.norm())
}

/// `S(y) = Σ_{x ≠ y} K(x − y) w_x` at every atom, so that
/// `⟨T(fμ), 1⟩_μ = Σ_y f(y) w_y S(y)` for any `f`.
pub struct SelfField {
    values: Vec<CVec>,
}

impl SelfField {
    pub fn new(k: &KernelSpec, mu: &AtomicMeasure) -> Result<Self> {
        if k.d != mu.dim() {
            return Err(CzError::argument("kernel and measure dimensions differ"));
        }
        let d = k.d;
        let n = mu.len();
        let coords = mu.coords();
        let weights = mu.weights();
        let values = (0..n)
            .into_par_iter()
            .map(|j| {
                let y = mu.point(j);
                if k.dprime() == 1 && d == 2 {
                    // scalar-valued planar kernels: two compensated lanes
                    let (mut re, mut im) = (Accumulator::new(0.0), Accumulator::new(0.0));
                    for i in 0..n {
                        let (zx, zy) = (coords[2 * i] - y[0], coords[2 * i + 1] - y[1]);
                        if zx == 0.0 && zy == 0.0 {
                            continue;
                        }
                        let v = k.eval_nonzero(&[zx, zy]);
                        re.add(v.re(0) * weights[i]);
                        im.add(v.im(0) * weights[i]);
                    }
                    return CVec::from_complex(re.value(), im.value());
                }
                let mut acc = Accumulator::new(k.zero());
                for i in 0..n {
                    let x = mu.point(i);
                    let mut z = [0.0; 3];
                    let mut r2 = 0.0;
                    for c in 0..d {
                        z[c] = x[c] - y[c];
                        r2 += z[c] * z[c];
                    }
                    if r2 != 0.0 {
                        acc.add(k.eval_nonzero(&z[..d]) * weights[i]);
                    }
                }
                acc.value()
            })
            .collect();
        Ok(SelfField { values })
    }

    pub fn at(&self, i: usize) -> CVec {
        self.values[i]
    }

    /// `⟨T(fμ), 1⟩_μ` from atom values of `f`.
    pub fn pairing(&self, mu: &AtomicMeasure, fv: &[f64]) -> CVec {
        let zero = CVec::zeros(self.values.first().map_or(1, |v| v.components()));
        block_sum(zero, mu.len(), |i| {
            if fv[i] == 0.0 {
                zero
            } else {
                self.values[i] * (fv[i] * mu.weight(i))
            }
        })
    }

    pub fn defect(&self, mu: &AtomicMeasure, f: &LipFn) -> Result<f64> {
        let fv = f.values_at(mu);
        check_mean_zero(mu, &fv)?;
        Ok(self.pairing(mu, &fv).norm())
    }
}

/// Seeded family of mean-zero test functions: differences of two radial
/// plateaus at random centres and scales inside a ball, adjusted against a
/// fixed central plateau `ρ`. Member `i` depends only on `(seed, i)`, so a
/// longer family extends a shorter one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestFamily {
    pub center: Vec<f64>,
    pub radius: f64,
    pub seed: u64,
}

impl TestFamily {
    pub fn new(center: &[f64], radius: f64, seed: u64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(CzError::argument("family radius must be positive"));
        }
        Ok(TestFamily {
            center: center.to_vec(),
            radius,
            seed,
        })
    }

    /// A family on the smallest centroid ball containing `supp μ`.
    pub fn for_measure(mu: &AtomicMeasure, seed: u64) -> Result<Self> {
        let c = mu.centroid();
        let r = mu
            .points()
            .map(|p| p.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Self::new(&c, if r > 0.0 { r } else { 1.0 }, seed)
    }

    pub fn rho(&self) -> LipFn {
        LipFn::RadialPlateau {
            center: self.center.clone(),
            r_inner: self.radius / 4.0,
            r_outer: self.radius / 2.0,
        }
    }

    /// The raw (unadjusted) member `i`.
    pub fn raw(&self, i: usize) -> LipFn {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64);
        let big = self.radius;
        let plateau = |rng: &mut ChaCha8Rng| {
            let r_out = big * rng.gen_range(0.1..0.5);
            let r_in = r_out * rng.gen_range(0.0..0.8);
            let reach = (0.9 * big - r_out).max(0.0);
            let dir: Vec<f64> = (0..self.center.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            let t = reach * rng.gen_range(0.0f64..1.0).sqrt();
            let c: Vec<f64> = self.center.iter().zip(&dir).map(|(c0, v)| c0 + t * v / n).collect();
            LipFn::RadialPlateau {
                center: c,
                r_inner: r_in,
                r_outer: r_out,
            }
        };
        let a = plateau(&mut rng);
        let b = plateau(&mut rng);
        let w = rng.gen_range(0.25..2.0);
        LipFn::combination(vec![(1.0, a), (-w, b)])
    }

    /// Member `i`, mean-zero against `mu`.
    pub fn member(&self, mu: &AtomicMeasure, i: usize) -> Result<LipFn> {
        mean_zero_adjust(mu, &self.raw(i), &self.rho())
    }
}

/// Power-law defect thresholds `c·h^p` fitted from a convergence study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProfile {
    pub coefficient: f64,
    pub exponent: f64,
    pub safety: f64,
}

impl ThresholdProfile {
    /// Least-squares fit of `log defect` against `log h`.
    pub fn from_study(hs: &[f64], defects: &[f64], safety: f64) -> Result<Self> {
        let pts: Vec<(f64, f64)> = hs
            .iter()
            .zip(defects)
            .filter(|(h, d)| **h > 0.0 && **d > 0.0)
            .map(|(h, d)| (h.ln(), d.ln()))
            .collect();
        if pts.len() < 2 {
            return Err(CzError::argument("need at least two positive (h, defect) points"));
        }
        let (slope, intercept, _) = linear_fit(&pts);
        Ok(ThresholdProfile {
            coefficient: intercept.exp(),
            exponent: slope,
            safety,
        })
    }

    pub fn threshold(&self, h: f64) -> f64 {
        self.safety * self.coefficient * h.powf(self.exponent)
    }
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, R²)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let b = my - a * mx;
    let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    (a, b, r2)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DefectReport {
    /// Largest defect over the family.
    pub defect: f64,
    pub worst_fn: String,
    pub worst_index: usize,
    pub resolution_h: f64,
    pub family_size: usize,
    pub defects: Vec<f64>,
    pub threshold: Option<f64>,
    pub passes: Option<bool>,
    /// A finite family only bounds the true defect from below.
    pub note: String,
}

/// Maximum defect over the first `size` members of `family`.
pub fn defect_suite(k: &KernelSpec, mu: &AtomicMeasure, family: &TestFamily, size: usize) -> Result<DefectReport> {
    if size == 0 {
        return Err(CzError::argument("family size must be at least 1"));
    }
    let field = SelfField::new(k, mu)?;
    defect_suite_with(&field, mu, family, size)
}

/// [`defect_suite`] against a precomputed self-field.
pub fn defect_suite_with(
    field: &SelfField,
    mu: &AtomicMeasure,
    family: &TestFamily,
    size: usize,
) -> Result<DefectReport> {
    let members: Vec<LipFn> = (0..size).map(|i| family.member(mu, i)).collect::<Result<_>>()?;
    let defects: Vec<f64> = members
        .par_iter()
        .map(|f| field.defect(mu, f))
        .collect::<Result<_>>()?;
    let (worst, value) = block_argmax(defects.len(), |i| defects[i]).unwrap_or((0, 0.0));
    Ok(DefectReport {
        defect: value,
        worst_fn: members[worst].describe(),
        worst_index: worst,
        resolution_h: mu.resolution_h,
        family_size: size,
        defects,
        threshold: None,
        passes: None,
        note: "lower bound: the defect is a supremum over all mean-zero Lipschitz f, \
               probed here on a finite family"
            .into(),
    })
}

impl DefectReport {
    pub fn with_threshold(mut self, profile: &ThresholdProfile) -> Self {
        let t = profile.threshold(self.resolution_h);
        self.threshold = Some(t);
        self.passes = Some(self.defect <= t);
        self
    }
}

/// `|⟨T̃ν, 1⟩_{η₁} − ⟨T̃ν, 1⟩_{η₂}|`.
pub fn balancing_independence(
    k: &KernelSpec,
    mu: &AtomicMeasure,
    nu: &SignedAtomicMeasure,
    eta1: &BalancingMeasure,
    eta2: &BalancingMeasure,
) -> Result<f64> {
    let a = bilinear_tilde(k, mu, nu, &LipFn::One, eta1)?.value;
    let b = bilinear_tilde(k, mu, nu, &LipFn::One, eta2)?.value;
    Ok((a - b).norm())
}

/// `|Σ_a T̄_{μ,δ}(1)(a) f(a) w_a + ⟨T^δ(fμ), 1⟩_μ|`.
pub fn inout_identity_residual(
    k: &KernelSpec,
    mu: &AtomicMeasure,
    delta: f64,
    f: &LipFn,
    bal: &BalancingMeasure,
) -> Result<f64> {
    let loc = bilinear_smooth(k, mu, f, &LipFn::One, Gauge::Localized(delta))?;
    let field = TbarField::new(k, mu, LipFn::One, bal)?;
    let fv = f.values_at(mu);
    let tb: Vec<CVec> = (0..mu.len())
        .map(|i| {
            if fv[i] == 0.0 {
                Ok(k.zero())
            } else {
                field.tbar_delta(mu.point(i), delta).map(|v| v * (fv[i] * mu.weight(i)))
            }
        })
        .collect::<Result<_>>()?;
    let inner = block_sum(k.zero(), tb.len(), |i| tb[i]);
    Ok((inner + loc).norm())
}

/// `|Σ_{0<|a−x|<r} |x−a|^s K(x−a) w_a|` at an atom `x`.
pub fn symmetric_defect(k: &KernelSpec, mu: &AtomicMeasure, x: &[f64], r: f64) -> Result<f64> {
    if mu.atom_at(x).is_none() {
        return Err(CzError::precondition("symmetric defect is evaluated at atoms of μ"));
    }
    if !(r > 0.0) {
        return Err(CzError::argument("radius must be positive"));
    }
    let d = k.d;
    Ok(block_sum(k.zero(), mu.len(), |i| {
        let a = mu.point(i);
        let mut z = [0.0; 3];
        let mut r2 = 0.0;
        for c in 0..d {
            z[c] = x[c] - a[c];
            r2 += z[c] * z[c];
        }
        if r2 == 0.0 || r2 >= r * r {
            k.zero()
        } else {
            k.eval_nonzero(&z[..d]) * (r2.sqrt().powf(k.s) * mu.weight(i))
        }
    })
    .norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{make_measure, MeasureDescriptor};
    use approx::assert_relative_eq;

    fn disk(h: f64) -> AtomicMeasure {
        make_measure(&MeasureDescriptor::Disk { center: [0.0, 0.0], radius: 1.0, h }).unwrap()
    }

    fn segment(h: f64) -> AtomicMeasure {
        make_measure(&MeasureDescriptor::Segment { a: -1.0, b: 1.0, h }).unwrap()
    }

    #[test]
    fn mean_zero_adjust_examples() {
        let mu = disk(0.05);
        let rho = LipFn::radial_plateau(&[0.0, 0.0], 0.2, 0.5).unwrap();
        let f = LipFn::hat(&[0.3, -0.2], 0.4).unwrap();
        let g = mean_zero_adjust(&mu, &f, &rho).unwrap();
        assert!(g.integrate(&mu).abs() < 1e-12);
        assert_eq!(mean_zero_adjust(&mu, &g, &rho).unwrap(), g);
        let z = mean_zero_adjust(&mu, &rho, &rho).unwrap();
        assert!(mu.points().all(|p| z.eval(p) == 0.0));
        let off = LipFn::radial_plateau(&[5.0, 5.0], 0.1, 0.2).unwrap();
        assert!(matches!(mean_zero_adjust(&mu, &f, &off), Err(CzError::Precondition(_))));
    }

    #[test]
    fn defect_requires_mean_zero() {
        let mu = disk(0.1);
        let k = KernelSpec::cauchy();
        let f = LipFn::hat(&[0.0, 0.0], 0.5).unwrap();
        assert!(matches!(defect(&k, &mu, &f), Err(CzError::Precondition(_))));
        assert_eq!(defect(&k, &mu, &f.clone().scaled(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn self_field_matches_symmetrized_form() {
        let mu = disk(0.08);
        let k = KernelSpec::conj_cauchy_squared();
        let fam = TestFamily::new(&[0.0, 0.0], 1.0, 4).unwrap();
        let field = SelfField::new(&k, &mu).unwrap();
        for i in 0..5 {
            let f = fam.member(&mu, i).unwrap();
            let a = defect(&k, &mu, &f).unwrap();
            let b = field.defect(&mu, &f).unwrap();
            assert!((a - b).abs() <= 1e-10 * f.sup_norm() * mu.total_mass(), "{a} {b}");
        }
    }

    #[test]
    fn defect_is_homogeneous() {
        let mu = disk(0.08);
        let k = KernelSpec::cauchy();
        let f = TestFamily::new(&[0.0, 0.0], 1.0, 1).unwrap().member(&mu, 3).unwrap();
        let base = defect(&k, &mu, &f).unwrap();
        assert_eq!(defect(&k, &mu, &f.clone().scaled(2.0)).unwrap(), 2.0 * base);
        assert_eq!(defect(&k, &mu, &f.clone().scaled(-0.5)).unwrap(), 0.5 * base);
        assert_relative_eq!(defect(&k, &mu, &f.clone().scaled(1.7)).unwrap(), 1.7 * base, max_relative = 1e-12);
    }

    #[test]
    fn defect_rescales_by_r_to_the_s() {
        let mu = disk(0.08);
        for k in [KernelSpec::cauchy(), KernelSpec::riesz(2, 1.4, 0.5).unwrap()] {
            let f = TestFamily::new(&[0.0, 0.0], 1.0, 2).unwrap().member(&mu, 0).unwrap();
            let (x, r) = ([0.2, 0.1], 0.6);
            let mu_r = mu.rescale(&x, r, k.s).unwrap();
            let a = defect(&k, &mu, &f).unwrap();
            let b = defect(&k, &mu_r, &f.clone().rescaled(&x, r)).unwrap();
            assert_relative_eq!(b, a / r.powf(k.s), max_relative = 1e-10);
        }
    }

    #[test]
    fn single_atom_family_is_degenerate() {
        let mu = AtomicMeasure::from_atoms(2, vec![0.1, 0.2], vec![1.0]).unwrap();
        let fam = TestFamily::for_measure(&mu, 3).unwrap();
        let rep = defect_suite(&KernelSpec::cauchy(), &mu, &fam, 10).unwrap();
        assert_eq!(rep.defect, 0.0);
    }

    #[test]
    fn suite_is_monotone_in_size() {
        let mu = disk(0.1);
        let k = KernelSpec::cauchy();
        let fam = TestFamily::new(&[0.0, 0.0], 1.0, 8).unwrap();
        let a = defect_suite(&k, &mu, &fam, 5).unwrap();
        let b = defect_suite(&k, &mu, &fam, 12).unwrap();
        assert_eq!(&b.defects[..5], &a.defects[..]);
        assert!(b.defect >= a.defect);
        assert!(a.defects.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn balancing_independence_examples() {
        let mu = disk(0.1);
        let k = KernelSpec::cauchy();
        let e1 = BalancingMeasure::default_for(&mu).unwrap();
        let e2 = BalancingMeasure::new(&mu, LipFn::hat(&[0.3, 0.0], 0.4).unwrap()).unwrap();
        let dirac = SignedAtomicMeasure::dirac(&[0.55, 0.37]);
        assert_eq!(balancing_independence(&k, &mu, &dirac, &e1, &e1).unwrap(), 0.0);
        let bal_nu = SignedAtomicMeasure::from_atoms(2, vec![0.1, 0.1, 0.6, -0.3], vec![2.0, -2.0]).unwrap();
        assert_eq!(balancing_independence(&k, &mu, &bal_nu, &e1, &e2).unwrap(), 0.0);
        // general case: |ν(ℝ^d)|·|⟨T[(η₂−η₁)μ],1⟩_μ|
        let got = balancing_independence(&k, &mu, &dirac.clone().plus_scaled(2.0, &dirac), &e1, &e2).unwrap();
        let diff = LipFn::combination(vec![(1.0, e2.eta.clone()), (-1.0, e1.eta.clone())]);
        let want = 3.0 * bilinear_smooth(&k, &mu, &diff, &LipFn::One, Gauge::Full).unwrap().norm();
        assert_relative_eq!(got, want, max_relative = 1e-9);
    }

    #[test]
    fn inout_residual_examples() {
        let mu = disk(0.1);
        let k = KernelSpec::conj_cauchy_squared();
        let bal = BalancingMeasure::default_for(&mu).unwrap();
        let zero = LipFn::hat(&[0.0, 0.0], 0.5).unwrap().scaled(0.0);
        assert_eq!(inout_identity_residual(&k, &mu, 0.1, &zero, &bal).unwrap(), 0.0);
        // with mean-zero f the residual equals the full defect
        let f = TestFamily::new(&[0.0, 0.0], 1.0, 6).unwrap().member(&mu, 1).unwrap();
        let r = inout_identity_residual(&k, &mu, 0.1, &f, &bal).unwrap();
        let d = defect(&k, &mu, &f).unwrap();
        assert!((r - d).abs() <= 1e-9 * mu.total_mass(), "{r} {d}");
    }

    #[test]
    fn symmetric_defect_examples() {
        let seg = segment(1e-2);
        let k = KernelSpec::cauchy();
        let x = seg.point(100).to_vec();
        assert!(symmetric_defect(&k, &seg, &x, 0.3005).unwrap() < 1e-12);
        let two = AtomicMeasure::from_atoms(2, vec![0.0, 0.0, 0.3, 0.4], vec![1.0, 0.7]).unwrap();
        let r = KernelSpec::riesz(2, 1.0, 1.0).unwrap();
        assert_relative_eq!(symmetric_defect(&r, &two, &[0.0, 0.0], 10.0).unwrap(), 0.7, max_relative = 1e-14);
        let mu = disk(0.05);
        let c = KernelSpec::conj_cauchy_squared();
        assert!(symmetric_defect(&c, &mu, &[0.0, 0.0], 0.5).unwrap() < 1e-14);
        assert!(symmetric_defect(&c, &mu, &[0.01, 0.0], 0.5).is_err());
    }

    #[test]
    fn threshold_profile_fit() {
        let p = ThresholdProfile::from_study(&[0.04, 0.02, 0.01], &[4e-3, 1e-3, 2.5e-4], 2.0).unwrap();
        assert_relative_eq!(p.exponent, 2.0, max_relative = 1e-12);
        assert_relative_eq!(p.threshold(0.02), 2e-3, max_relative = 1e-10);
    }
}
