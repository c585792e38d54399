//! s-dimensional Calderón–Zygmund kernels and their regularized and
//! localized variants.
//!
//! A kernel maps ℝ^d∖{0} to ℂ^{d′}. Built-in families are odd, satisfy
//! `|K(x)| ≤ |x|^{-s}` and are homogeneous of degree `-s`. The regularized
//! kernel is `K_δ(x) = K(x)·(|x|/max(δ,|x|))^{s+α}` with `K_δ(0) = 0`, and
//! the localized kernel is `K^δ = K − K_δ`, supported in the closed δ-ball.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{CzError, Result};
use crate::value::{CVec, MAX_LANES};

/// Largest ambient dimension handled by the Riesz family.
pub const MAX_DIM: usize = MAX_LANES / 2;

/// Angularly tabulated planar kernel `Ω(θ)/|x|^s`, linearly interpolated
/// between equally spaced nodes on `[0, 2π)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularTable {
    nodes: Vec<CVec>,
}

impl AngularTable {
    pub fn new(nodes: Vec<CVec>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(CzError::argument("angular table needs at least one node"));
        }
        let c = nodes[0].components();
        if nodes.iter().any(|v| v.components() != c) {
            return Err(CzError::argument("angular table rows differ in width"));
        }
        Ok(AngularTable { nodes })
    }

    pub fn components(&self) -> usize {
        self.nodes[0].components()
    }

    fn at(&self, theta: f64) -> CVec {
        let n = self.nodes.len();
        let t = theta.rem_euclid(TAU) / TAU * n as f64;
        let i = (t.floor() as usize) % n;
        let frac = t - t.floor();
        let a = self.nodes[i];
        let b = self.nodes[(i + 1) % n];
        a * (1.0 - frac) + b * frac
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelFamily {
    /// `x/|x|^{s+1}` in ℝ^d, viewed in ℂ^d with zero imaginary parts.
    Riesz,
    /// `1/z` on ℂ ≅ ℝ².
    Cauchy,
    /// `z̄/z²` on ℂ ≅ ℝ².
    ConjCauchySquared,
    CustomTable(Arc<AngularTable>),
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Riesz => "riesz",
            KernelFamily::Cauchy => "cauchy",
            KernelFamily::ConjCauchySquared => "conj_cauchy_squared",
            KernelFamily::CustomTable(_) => "custom-table",
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, KernelFamily::CustomTable(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub d: usize,
    pub s: f64,
    pub alpha: f64,
    /// Bound on ‖K‖_* if known; empirical estimates are stored here by callers.
    pub holder_bound: Option<f64>,
    pub homogeneous: bool,
}

impl KernelSpec {
    pub fn riesz(d: usize, s: f64, alpha: f64) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&d) {
            return Err(CzError::argument(format!(
                "riesz kernel needs 2 <= d <= {MAX_DIM}, got {d}"
            )));
        }
        Self::validated(KernelFamily::Riesz, d, s, alpha, true)
    }

    pub fn cauchy() -> Self {
        Self::validated(KernelFamily::Cauchy, 2, 1.0, 1.0, true).expect("valid")
    }

    pub fn conj_cauchy_squared() -> Self {
        Self::validated(KernelFamily::ConjCauchySquared, 2, 1.0, 1.0, true).expect("valid")
    }

    pub fn custom_table(table: AngularTable, s: f64, alpha: f64) -> Result<Self> {
        Self::validated(KernelFamily::CustomTable(Arc::new(table)), 2, s, alpha, true)
    }

    /// Build from config-style fields (`kernel.family`, `kernel.d`, ...).
    pub fn from_parts(family: &str, d: usize, s: f64, alpha: f64) -> Result<Self> {
        let planar = match family {
            "riesz" => return Self::riesz(d, s, alpha),
            "cauchy" => Self::cauchy(),
            "conj_cauchy_squared" => Self::conj_cauchy_squared(),
            other => {
                return Err(CzError::argument(format!("unknown kernel family '{other}'")))
            }
        };
        if d != 2 || s != 1.0 {
            return Err(CzError::argument(format!(
                "{} is planar with s = 1 (got d = {d}, s = {s})",
                planar.family.name()
            )));
        }
        KernelSpec { alpha, ..planar }.check_alpha()
    }

    fn validated(family: KernelFamily, d: usize, s: f64, alpha: f64, homogeneous: bool) -> Result<Self> {
        if !(s > 0.0 && s < d as f64) {
            return Err(CzError::argument(format!("s must lie in (0, {d}), got {s}")));
        }
        KernelSpec {
            family,
            d,
            s,
            alpha,
            holder_bound: None,
            homogeneous,
        }
        .check_alpha()
    }

    fn check_alpha(self) -> Result<Self> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CzError::argument(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        Ok(self)
    }

    /// Output dimension d′ (number of complex components).
    pub fn dprime(&self) -> usize {
        match &self.family {
            KernelFamily::Riesz => self.d,
            KernelFamily::Cauchy | KernelFamily::ConjCauchySquared => 1,
            KernelFamily::CustomTable(t) => t.components(),
        }
    }

    pub fn zero(&self) -> CVec {
        CVec::zeros(self.dprime())
    }

    /// Evaluate `K(x)`; errors at the origin.
    pub fn eval(&self, x: &[f64]) -> Result<CVec> {
        self.check_point(x)?;
        if x.iter().all(|&c| c == 0.0) {
            return Err(CzError::Domain("kernel singular at origin".into()));
        }
        Ok(self.eval_nonzero(x))
    }

    /// Evaluate `K(x)` for `x ≠ 0`; callers guarantee the precondition.
    #[inline]
    pub fn eval_nonzero(&self, x: &[f64]) -> CVec {
        match &self.family {
            KernelFamily::Riesz => {
                let r2: f64 = x.iter().map(|c| c * c).sum();
                let denom = if self.s == 1.0 {
                    r2
                } else {
                    r2.powf(0.5 * (self.s + 1.0))
                };
                let mut lanes = [0.0; MAX_LANES];
                for (k, &c) in x.iter().enumerate() {
                    lanes[2 * k] = c / denom;
                }
                CVec::from_lanes(&lanes[..2 * self.d])
            }
            KernelFamily::Cauchy => {
                let (a, b) = (x[0], x[1]);
                let r2 = a * a + b * b;
                CVec::from_complex(a / r2, -b / r2)
            }
            KernelFamily::ConjCauchySquared => {
                let (a, b) = (x[0], x[1]);
                let r2 = a * a + b * b;
                let r4 = r2 * r2;
                CVec::from_complex(a * (a * a - 3.0 * b * b) / r4, -(b * (3.0 * a * a - b * b)) / r4)
            }
            KernelFamily::CustomTable(t) => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                let theta = x[1].atan2(x[0]);
                t.at(theta) * r2.powf(-0.5 * self.s)
            }
        }
    }

    /// Multiplier `(|x|/max(δ,|x|))^{s+α}` turning `K` into `K_δ`.
    #[inline]
    pub fn cutoff_factor(&self, delta: f64, r2: f64) -> f64 {
        let d2 = delta * delta;
        if r2 >= d2 {
            return 1.0;
        }
        let p = self.s + self.alpha;
        if p == 2.0 {
            r2 / d2
        } else {
            (r2 / d2).powf(0.5 * p)
        }
    }

    /// `K_δ(x)`, continuous on all of ℝ^d with value 0 at the origin.
    pub fn eval_regularized(&self, delta: f64, x: &[f64]) -> Result<CVec> {
        check_gauge(delta)?;
        self.check_point(x)?;
        Ok(self.regularized_unchecked(delta, x))
    }

    #[inline]
    pub fn regularized_unchecked(&self, delta: f64, x: &[f64]) -> CVec {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        if r2 == 0.0 {
            return self.zero();
        }
        let f = self.cutoff_factor(delta, r2);
        let k = self.eval_nonzero(x);
        if f == 1.0 {
            k
        } else {
            k * f
        }
    }

    /// `K^δ(x) = K(x) − K_δ(x)`; zero for `|x| ≥ δ`.
    pub fn eval_localized(&self, delta: f64, x: &[f64]) -> Result<CVec> {
        check_gauge(delta)?;
        let k = self.eval(x)?;
        Ok(self.localized_from(delta, x, k))
    }

    #[inline]
    pub fn localized_unchecked(&self, delta: f64, x: &[f64]) -> CVec {
        let k = self.eval_nonzero(x);
        self.localized_from(delta, x, k)
    }

    #[inline]
    fn localized_from(&self, delta: f64, x: &[f64], k: CVec) -> CVec {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        let f = self.cutoff_factor(delta, r2);
        if f == 1.0 {
            self.zero()
        } else {
            k - k * f
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(CzError::argument(format!(
                "point has dimension {}, kernel expects {}",
                x.len(),
                self.d
            )));
        }
        Ok(())
    }
}

pub(crate) fn check_gauge(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(CzError::argument(format!("gauge must be positive, got {delta}")))
    }
}

/// Quasi-random pair sampling stratified by `log|x|`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub pairs: usize,
    pub r_min: f64,
    pub r_max: f64,
    /// Offset into the low-discrepancy sequence.
    pub seed: u64,
}

impl SamplingPlan {
    pub fn new(pairs: usize, seed: u64) -> Self {
        SamplingPlan {
            pairs,
            r_min: 1e-3,
            r_max: 1e3,
            seed,
        }
    }

    /// The i-th sample pair. Sample sets for `n` pairs are prefixes of those
    /// for any larger `n`, so estimated suprema grow monotonically.
    pub fn pair(&self, d: usize, i: usize) -> (Vec<f64>, Vec<f64>) {
        let idx = i + 1 + self.seed as usize;
        let lr = self.r_min.ln() + halton::number(2, idx) * (self.r_max / self.r_min).ln();
        let r = lr.exp();
        let x = direction(d, idx, 0).into_iter().map(|c| c * r).collect::<Vec<_>>();
        if i % 8 == 7 {
            // pair with the origin, where F is extended by 0
            return (x, vec![0.0; d]);
        }
        let rho = (1e-3f64.ln() + halton::number(5, idx) * (2e3f64).ln()).exp();
        let u = direction(d, idx, 1);
        let y = x.iter().zip(&u).map(|(a, b)| a + r * rho * b).collect();
        (x, y)
    }
}

const BASES: [u8; 6] = [3, 7, 11, 13, 17, 19];

/// Unit vector from Halton coordinates (spherical angles for d = 3).
fn direction(d: usize, idx: usize, which: usize) -> Vec<f64> {
    let b = &BASES[3 * which..3 * which + 3];
    let phi = TAU * halton::number(b[0], idx);
    match d {
        1 => vec![if halton::number(b[1], idx) < 0.5 { -1.0 } else { 1.0 }],
        2 => vec![phi.cos(), phi.sin()],
        _ => {
            let z = 2.0 * halton::number(b[1], idx) - 1.0;
            let rxy = (1.0 - z * z).sqrt();
            vec![rxy * phi.cos(), rxy * phi.sin(), z]
        }
    }
}

/// Empirical α-Hölder seminorm of `x ↦ K(x)|x|^{s+α}` (or of the same map
/// built from `K_δ` when a gauge is given), extended by zero at the origin.
pub fn holder_seminorm_estimate(k: &KernelSpec, delta: Option<f64>, plan: &SamplingPlan) -> Result<f64> {
    if plan.pairs == 0 {
        return Err(CzError::argument("sampling plan is empty"));
    }
    if let Some(dl) = delta {
        check_gauge(dl)?;
    }
    let weighted = |x: &[f64]| -> CVec {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        if r2 == 0.0 {
            return k.zero();
        }
        let kv = match delta {
            Some(dl) => k.regularized_unchecked(dl, x),
            None => k.eval_nonzero(x),
        };
        kv * r2.powf(0.5 * (k.s + k.alpha))
    };
    let mut best = 0.0f64;
    for i in 0..plan.pairs {
        let (x, y) = plan.pair(k.d, i);
        let dist: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if dist == 0.0 {
            continue;
        }
        let q = (weighted(&x) - weighted(&y)).norm() / dist.powf(k.alpha);
        best = best.max(q);
    }
    Ok(best)
}

/// Sampled maxima of the three kernel axioms.
#[derive(Clone, Debug, Serialize)]
pub struct AxiomReport {
    /// max of `|K(x)|·|x|^s`; axiom (i) asks for ≤ 1.
    pub growth: f64,
    /// max of `|K(−x) + K(x)|`; zero for odd kernels.
    pub antisymmetry: f64,
    /// max relative deviation of `λ^s K(λx)` from `K(x)`.
    pub homogeneity: f64,
    pub samples: usize,
}

impl AxiomReport {
    pub fn passes(&self) -> bool {
        self.growth <= 1.0 + 1e-12 && self.antisymmetry == 0.0 && self.homogeneity <= 1e-12
    }
}

/// Check the growth, antisymmetry and homogeneity axioms on `n` sample
/// points. Failures are reported, never raised.
pub fn check_axioms(k: &KernelSpec, n: usize, seed: u64) -> AxiomReport {
    let plan = SamplingPlan::new(n, seed);
    let mut rep = AxiomReport {
        growth: 0.0,
        antisymmetry: 0.0,
        homogeneity: 0.0,
        samples: n,
    };
    for i in 0..n {
        let (x, _) = plan.pair(k.d, i);
        let r = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let kx = k.eval_nonzero(&x);
        rep.growth = rep.growth.max(kx.norm() * r.powf(k.s));
        let neg: Vec<f64> = x.iter().map(|c| -c).collect();
        rep.antisymmetry = rep.antisymmetry.max((k.eval_nonzero(&neg) + kx).max_abs());
        if k.homogeneous {
            let lam = (halton::number(23, i + 1) * 6.0 - 3.0).exp();
            let scaled: Vec<f64> = x.iter().map(|c| c * lam).collect();
            let ks = k.eval_nonzero(&scaled) * lam.powf(k.s);
            let scale = kx.norm().max(f64::MIN_POSITIVE);
            rep.homogeneity = rep.homogeneity.max((ks - kx).norm() / scale);
        }
    }
    rep
}
