//! Potentials of atomic measures and the bilinear forms built from them.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::lipfn::LipFn;
use crate::error::{CzError, Result};
use crate::kernels::{check_gauge, KernelSpec};
use crate::measures::{AtomicMeasure, SignedAtomicMeasure};
use crate::sum::{block_reduce, block_sum, Accumulator};
use crate::value::CVec;

/// Which part of the kernel a form integrates against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gauge", content = "delta", rename_all = "snake_case")]
pub enum Gauge {
    /// `K` itself; coincident atoms are treated as diagonal and skipped.
    Full,
    /// `K_δ`.
    Regularized(f64),
    /// `K^δ = K − K_δ`, supported in `B(0, δ)`.
    Localized(f64),
}

impl Gauge {
    fn validate(self) -> Result<Self> {
        match self {
            Gauge::Full => {}
            Gauge::Regularized(d) | Gauge::Localized(d) => check_gauge(d)?,
        }
        Ok(self)
    }

    /// `K_gauge(z)` for `z ≠ 0`.
    #[inline]
    pub(crate) fn eval(self, k: &KernelSpec, z: &[f64]) -> CVec {
        match self {
            Gauge::Full => k.eval_nonzero(z),
            Gauge::Regularized(d) => k.regularized_unchecked(d, z),
            Gauge::Localized(d) => k.localized_unchecked(d, z),
        }
    }
}

/// A potential value with the number of atoms the evaluation skipped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormValue {
    pub value: CVec,
    pub skipped: usize,
}

#[inline]
pub(crate) fn diff(a: &[f64], b: &[f64], out: &mut [f64; 3]) -> f64 {
    let mut r2 = 0.0;
    for k in 0..a.len() {
        out[k] = a[k] - b[k];
        r2 += out[k] * out[k];
    }
    r2
}

fn check_dims(k: &KernelSpec, d: usize) -> Result<()> {
    if k.d != d {
        return Err(CzError::argument(format!(
            "measure lives in dimension {d}, kernel in dimension {}",
            k.d
        )));
    }
    Ok(())
}

/// `Tν(x) = Σ_{|a−x| > pv_epsilon} K(x−a) w_a`. Atoms inside the exclusion
/// radius, including one sitting at `x`, are skipped and counted.
pub fn potential(k: &KernelSpec, nu: &SignedAtomicMeasure, x: &[f64], pv_epsilon: f64) -> Result<FormValue> {
    check_dims(k, nu.dim())?;
    if x.len() != k.d || !(pv_epsilon >= 0.0) {
        return Err(CzError::argument("bad evaluation point or exclusion radius"));
    }
    let e2 = pv_epsilon * pv_epsilon;
    let skipped = nu
        .points()
        .filter(|a| {
            let mut z = [0.0; 3];
            let r2 = diff(x, a, &mut z);
            r2 == 0.0 || r2 <= e2
        })
        .count();
    let value = block_sum(k.zero(), nu.len(), |i| {
        let mut z = [0.0; 3];
        let r2 = diff(x, nu.point(i), &mut z);
        if r2 == 0.0 || r2 <= e2 {
            k.zero()
        } else {
            k.eval_nonzero(&z[..k.d]) * nu.weight(i)
        }
    });
    Ok(FormValue { value, skipped })
}

/// `T_δν(x) = Σ_a K_δ(x−a) w_a`, continuous in `x`.
pub fn potential_reg(k: &KernelSpec, delta: f64, nu: &SignedAtomicMeasure, x: &[f64]) -> Result<CVec> {
    check_gauge(delta)?;
    check_dims(k, nu.dim())?;
    if x.len() != k.d {
        return Err(CzError::argument("evaluation point has the wrong dimension"));
    }
    Ok(block_sum(k.zero(), nu.len(), |i| {
        let mut z = [0.0; 3];
        diff(x, nu.point(i), &mut z);
        k.regularized_unchecked(delta, &z[..k.d]) * nu.weight(i)
    }))
}

/// Symmetrized form `⟨T_gauge(fμ), φ⟩_μ`: the sum over ordered pairs of
/// distinct atoms of `K(x−y)·½[f(y)φ(x) − f(x)φ(y)]·w_x w_y`.
///
/// Only pairs touching `supp f` (and `supp φ` when that is compact) are
/// visited; all others contribute zero. The visited set and order do not
/// depend on argument order, which makes `(f, φ) ↦ −(φ, f)` bitwise exact.
pub fn bilinear_smooth(k: &KernelSpec, mu: &AtomicMeasure, f: &LipFn, phi: &LipFn, gauge: Gauge) -> Result<CVec> {
    if !f.is_compact() {
        return Err(CzError::precondition(
            "the first function of a symmetrized form must have compact support",
        ));
    }
    let fv = f.values_at(mu);
    let pv = phi.values_at(mu);
    bilinear_smooth_values(k, mu, &fv, &pv, phi.is_compact(), gauge)
}

/// [`bilinear_smooth`] on precomputed atom values.
pub fn bilinear_smooth_values(
    k: &KernelSpec,
    mu: &AtomicMeasure,
    fv: &[f64],
    pv: &[f64],
    phi_compact: bool,
    gauge: Gauge,
) -> Result<CVec> {
    check_dims(k, mu.dim())?;
    let gauge = gauge.validate()?;
    let n = mu.len();
    let in_u: Vec<bool> = (0..n).map(|i| fv[i] != 0.0 || (phi_compact && pv[i] != 0.0)).collect();
    let u_list: Vec<usize> = (0..n).filter(|&i| in_u[i]).collect();
    let d = k.d;
    let term = |i: usize, j: usize, acc: &mut Accumulator<CVec>| {
        if i == j {
            return;
        }
        let c = 0.5 * (fv[j] * pv[i] - fv[i] * pv[j]) * mu.weight(i) * mu.weight(j);
        if c == 0.0 {
            return;
        }
        let mut z = [0.0; 3];
        if diff(mu.point(i), mu.point(j), &mut z) == 0.0 {
            return;
        }
        acc.add(gauge.eval(k, &z[..d]) * c);
    };
    // Each ordered pair with at least one end in U is visited exactly once,
    // from its U end.
    let visit = |u: usize, j: usize, acc: &mut Accumulator<CVec>| {
        term(u, j, acc);
        if !in_u[j] {
            term(j, u, acc);
        }
    };
    let value = match gauge {
        Gauge::Localized(delta) => {
            let idx = mu.index(delta);
            block_reduce(k.zero(), u_list.len(), |range| {
                let mut acc = Accumulator::new(k.zero());
                for &u in &u_list[range] {
                    if !idx.visit_candidates(mu.point(u), delta, 4096, |j| visit(u, j, &mut acc)) {
                        for j in 0..n {
                            visit(u, j, &mut acc);
                        }
                    }
                }
                acc.value()
            })
        }
        _ => block_reduce(k.zero(), u_list.len(), |range| {
            let mut acc = Accumulator::new(k.zero());
            for &u in &u_list[range] {
                for j in 0..n {
                    visit(u, j, &mut acc);
                }
            }
            acc.value()
        }),
    };
    Ok(value)
}

/// Unsymmetrized `Σ_i Σ_j K_gauge(x_i − y_j) a_i b_j` over pairs at distinct
/// positions.
pub(crate) fn cross_form(
    k: &KernelSpec,
    gauge: Gauge,
    xs: &[f64],
    a: &[f64],
    ys: &[f64],
    b: &[f64],
) -> CVec {
    let d = k.d;
    block_reduce(k.zero(), a.len(), |range| {
        let mut acc = Accumulator::new(k.zero());
        for i in range {
            if a[i] == 0.0 {
                continue;
            }
            let x = &xs[i * d..(i + 1) * d];
            for (j, y) in ys.chunks_exact(d).enumerate() {
                if b[j] == 0.0 {
                    continue;
                }
                let mut z = [0.0; 3];
                if diff(x, y, &mut z) == 0.0 {
                    continue;
                }
                acc.add(gauge.eval(k, &z[..d]) * (a[i] * b[j]));
            }
        }
        acc.value()
    })
}

/// Smooth probability density `η` against `μ`: `Σ η(a) w_a = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalancingMeasure {
    pub eta: LipFn,
}

impl BalancingMeasure {
    /// Normalize a compactly supported non-negative `eta` against `mu`.
    pub fn new(mu: &AtomicMeasure, eta: LipFn) -> Result<Self> {
        if !eta.is_compact() {
            return Err(CzError::precondition("balancing function must have compact support"));
        }
        let z = eta.integrate(mu);
        if !(z > 0.0 && z.is_finite()) {
            return Err(CzError::precondition(
                "balancing function has zero mass against the measure",
            ));
        }
        let bal = BalancingMeasure {
            eta: if z == 1.0 { eta } else { eta.scaled(1.0 / z) },
        };
        debug_assert!((bal.mass(mu) - 1.0).abs() <= 1e-12);
        Ok(bal)
    }

    /// Radial plateau of inner radius diam/8 and outer radius diam/4 on the
    /// densest region probed; the centroid wins ties.
    pub fn default_for(mu: &AtomicMeasure) -> Result<Self> {
        if mu.is_empty() || !(mu.total_mass() > 0.0) {
            return Err(CzError::precondition("cannot balance against the zero measure"));
        }
        let diam = mu.diameter_bound();
        if diam == 0.0 {
            return Self::at_atom(mu, mu.weights().iter().position(|w| *w > 0.0).unwrap_or(0));
        }
        let (ri, ro) = (diam / 8.0, diam / 4.0);
        let plateau = |c: &[f64]| LipFn::radial_plateau(c, ri, ro);
        let centroid = mu.centroid();
        let mut best = plateau(&centroid)?;
        let mut best_mass = best.integrate(mu);
        let stride = mu.len().div_ceil(64).max(1);
        for i in (0..mu.len()).step_by(stride) {
            let cand = plateau(mu.point(i))?;
            let m = cand.integrate(mu);
            if m > best_mass * (1.0 + 1e-9) {
                best = cand;
                best_mass = m;
            }
        }
        Self::new(mu, best)
    }

    /// A balancing density that sees only atom `i`.
    pub fn at_atom(mu: &AtomicMeasure, i: usize) -> Result<Self> {
        if i >= mu.len() || !(mu.weight(i) > 0.0) {
            return Err(CzError::argument("balancing atom must exist and carry positive mass"));
        }
        let x = mu.point(i);
        let gap = mu
            .points()
            .map(|p| p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .filter(|&r| r > 0.0)
            .fold(f64::INFINITY, f64::min);
        let r = if gap.is_finite() { gap / 2.0 } else { 1.0 };
        Self::new(mu, LipFn::radial_plateau(x, 0.0, r)?)
    }

    /// `Σ η(a) w_a`.
    pub fn mass(&self, mu: &AtomicMeasure) -> f64 {
        self.eta.integrate(mu)
    }

    /// Atoms of `μ` in `supp η` with their weights `η(a)·w_a`.
    pub fn atoms(&self, mu: &AtomicMeasure) -> (Vec<f64>, Vec<f64>) {
        let mut xs = Vec::new();
        let mut ws = Vec::new();
        for (p, w) in mu.points().zip(mu.weights()) {
            let e = self.eta.eval(p);
            if e != 0.0 {
                xs.extend_from_slice(p);
                ws.push(e * w);
            }
        }
        (xs, ws)
    }
}

/// `⟨T̃ν, φ⟩_μ`: the form for `ν − ν(ℝ^d)·ημ`. The atomic part sums
/// `K(x−y)φ(x)w_x ν_y` with coincident atoms skipped; the correction uses
/// the symmetrized smooth form.
pub fn bilinear_tilde(
    k: &KernelSpec,
    mu: &AtomicMeasure,
    nu: &SignedAtomicMeasure,
    phi: &LipFn,
    bal: &BalancingMeasure,
) -> Result<FormValue> {
    check_dims(k, mu.dim())?;
    check_dims(k, nu.dim())?;
    let a: Vec<f64> = phi.values_at(mu).iter().zip(mu.weights()).map(|(p, w)| p * w).collect();
    let atomic = cross_form(k, Gauge::Full, mu.coords(), &a, nu.coords(), nu.weights());
    let keys: HashSet<Vec<u64>> = mu.points().map(|p| p.iter().map(|c| c.to_bits()).collect()).collect();
    let skipped = nu
        .points()
        .filter(|p| keys.contains(&p.iter().map(|c| c.to_bits()).collect::<Vec<_>>()))
        .count();
    let total = nu.total();
    let value = if nu.balanced() {
        atomic
    } else {
        atomic - bilinear_smooth(k, mu, &bal.eta, phi, Gauge::Full)? * total
    };
    Ok(FormValue { value, skipped })
}

/// The potentials `T̄_{μ,δ}(φ)`, `T̄_μ(φ)` and their relatives for one
/// `(K, μ, φ, η)`, with the balancing term `⟨Tν₀, φ⟩_μ` computed once.
///
/// Fast route: `T̄_{μ,δ}(φ)(x) = Σ_a K_δ(a−x)φ(a)w_a − ⟨Tν₀, φ⟩_μ`, which is
/// algebraically the same as `G̃_{φ,δ}(x) − ⟨T^δν₀, φ⟩_μ` because
/// `K_δ + K^δ = K`. The literal route is kept for cross-checks.
pub struct TbarField<'a> {
    k: &'a KernelSpec,
    mu: &'a AtomicMeasure,
    phi: LipFn,
    bal: BalancingMeasure,
    phi_w: Vec<f64>,
    eta_xs: Vec<f64>,
    eta_ws: Vec<f64>,
    balance: CVec,
}

/// Maximum of `|T̄_{μ,δ}(1)(x)|` over a gauge ladder.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CotlarReport {
    pub sup: f64,
    pub argmax_delta: f64,
    pub ladder: Vec<f64>,
    /// The ladder reaches down to the pitch of μ and up to ten diameters.
    pub spans_required_range: bool,
}

impl<'a> TbarField<'a> {
    pub fn new(k: &'a KernelSpec, mu: &'a AtomicMeasure, phi: LipFn, bal: &BalancingMeasure) -> Result<Self> {
        check_dims(k, mu.dim())?;
        let phi_w: Vec<f64> = phi.values_at(mu).iter().zip(mu.weights()).map(|(p, w)| p * w).collect();
        let (eta_xs, eta_ws) = bal.atoms(mu);
        let balance = cross_form(k, Gauge::Full, mu.coords(), &phi_w, &eta_xs, &eta_ws);
        Ok(TbarField {
            k,
            mu,
            phi,
            bal: bal.clone(),
            phi_w,
            eta_xs,
            eta_ws,
            balance,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.k
    }

    pub fn measure(&self) -> &AtomicMeasure {
        self.mu
    }

    pub fn phi(&self) -> &LipFn {
        &self.phi
    }

    /// `⟨Tν₀, φ⟩_μ` with `ν₀ = ημ`.
    pub fn balance_term(&self) -> CVec {
        self.balance
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.k.d {
            return Err(CzError::argument("evaluation point has the wrong dimension"));
        }
        Ok(())
    }

    /// `Σ_a K_gauge(a − x) φ(a) w_a`, skipping an atom at `x`.
    pub fn field(&self, x: &[f64], gauge: Gauge) -> CVec {
        let d = self.k.d;
        block_sum(self.k.zero(), self.mu.len(), |i| {
            let c = self.phi_w[i];
            if c == 0.0 {
                return self.k.zero();
            }
            let mut z = [0.0; 3];
            if diff(self.mu.point(i), x, &mut z) == 0.0 {
                return self.k.zero();
            }
            gauge.eval(self.k, &z[..d]) * c
        })
    }

    /// `T̄_{μ,δ}(φ)(x)`.
    pub fn tbar_delta(&self, x: &[f64], delta: f64) -> Result<CVec> {
        check_gauge(delta)?;
        self.check_x(x)?;
        Ok(self.field(x, Gauge::Regularized(delta)) - self.balance)
    }

    /// `T̄_μ(φ)(x)` for `x` off the atoms.
    pub fn tbar(&self, x: &[f64]) -> Result<CVec> {
        self.check_x(x)?;
        if self.mu.atom_at(x).is_some() {
            return Err(CzError::Domain(
                "evaluation on atom; use Tbar_delta or pv exclusion".into(),
            ));
        }
        Ok(self.field(x, Gauge::Full) - self.balance)
    }

    /// `G̃_{φ,δ}(y)` summed literally.
    pub fn g_tilde(&self, y: &[f64], delta: f64) -> Result<CVec> {
        check_gauge(delta)?;
        self.check_x(y)?;
        let second = cross_form(
            self.k,
            Gauge::Regularized(delta),
            self.mu.coords(),
            &self.phi_w,
            &self.eta_xs,
            &self.eta_ws,
        );
        Ok(self.field(y, Gauge::Regularized(delta)) - second)
    }

    /// Symmetrized `⟨T^δν₀, φ⟩_μ`.
    pub fn localized_balance(&self, delta: f64) -> Result<CVec> {
        let ev = self.bal.eta.values_at(self.mu);
        let pv = self.phi.values_at(self.mu);
        bilinear_smooth_values(self.k, self.mu, &ev, &pv, self.phi.is_compact(), Gauge::Localized(delta))
    }

    /// `T̄_{μ,δ}(φ)(x)` through `G̃_{φ,δ}(x) − ⟨T^δν₀, φ⟩_μ`.
    pub fn tbar_delta_literal(&self, x: &[f64], delta: f64) -> Result<CVec> {
        Ok(self.g_tilde(x, delta)? - self.localized_balance(delta)?)
    }

    /// `⟨T^δδ_x, φ⟩_μ = Σ_a K^δ(a−x)φ(a)w_a`.
    pub fn localized_at(&self, x: &[f64], delta: f64) -> Result<CVec> {
        check_gauge(delta)?;
        self.check_x(x)?;
        Ok(self.field(x, Gauge::Localized(delta)))
    }

    /// `F_{δ,Δ}(x) = Σ_{|a−x|<Δ} [K_δ − K_Δ](a−x) φ(a) w_a`.
    pub fn f_delta_delta(&self, x: &[f64], delta: f64, big_delta: f64) -> Result<CVec> {
        check_gauge(delta)?;
        check_gauge(big_delta)?;
        self.check_x(x)?;
        if delta > big_delta {
            return Err(CzError::argument(format!(
                "need delta ≤ Delta, got {delta} > {big_delta}"
            )));
        }
        let d = self.k.d;
        let b2 = big_delta * big_delta;
        Ok(block_sum(self.k.zero(), self.mu.len(), |i| {
            let c = self.phi_w[i];
            let mut z = [0.0; 3];
            let r2 = diff(self.mu.point(i), x, &mut z);
            if c == 0.0 || r2 == 0.0 || r2 >= b2 {
                return self.k.zero();
            }
            let z = &z[..d];
            (self.k.regularized_unchecked(delta, z) - self.k.regularized_unchecked(big_delta, z)) * c
        }))
    }

    /// The a-priori bound `Σ_{|a−x|<Δ} 2|φ(a)| w_a / (δ + |x−a|)^s` for `|F_{δ,Δ}(x)|`.
    pub fn f_bound(&self, x: &[f64], delta: f64, big_delta: f64) -> f64 {
        let s = self.k.s;
        block_sum(0.0, self.mu.len(), |i| {
            let mut z = [0.0; 3];
            let r = diff(self.mu.point(i), x, &mut z).sqrt();
            if r < big_delta {
                2.0 * self.phi_w[i].abs() / (delta + r).powf(s)
            } else {
                0.0
            }
        })
    }

    /// `max_δ |T̄_{μ,δ}(φ)(x)|` over `ladder`.
    pub fn cotlar_sup(&self, x: &[f64], ladder: &[f64]) -> Result<CotlarReport> {
        if ladder.is_empty() {
            return Err(CzError::argument("empty gauge ladder"));
        }
        let mut sup = 0.0;
        let mut arg = ladder[0];
        for &delta in ladder {
            let v = self.tbar_delta(x, delta)?.norm();
            if v > sup {
                sup = v;
                arg = delta;
            }
        }
        let lo = ladder.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ladder.iter().cloned().fold(0.0, f64::max);
        Ok(CotlarReport {
            sup,
            argmax_delta: arg,
            ladder: ladder.to_vec(),
            spans_required_range: lo <= self.mu.resolution_h.max(f64::MIN_POSITIVE)
                && hi >= 10.0 * self.mu.diameter_bound(),
        })
    }
}

/// `lo, lo·ratio, lo·ratio², …` up to and including the first value ≥ `hi`.
pub fn geometric_ladder(lo: f64, hi: f64, ratio: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && ratio > 1.0 && hi.is_finite()) {
        return Err(CzError::argument("ladder needs 0 < lo ≤ hi and ratio > 1"));
    }
    let mut out = vec![lo];
    let mut k = 1;
    while *out.last().unwrap() < hi * (1.0 - 1e-12) {
        out.push(lo * ratio.powi(k));
        k += 1;
    }
    Ok(out)
}

/// Walk a ratio-2 ladder downward from `delta0` until three successive
/// values of `T̄_{μ,δ}(φ)(x)` agree to `tol`; returns the last value and gauge.
pub fn tbar_limit(field: &TbarField, x: &[f64], delta0: f64, delta_floor: f64, tol: f64) -> Result<(CVec, f64)> {
    let mut delta = delta0;
    let mut hist: Vec<CVec> = Vec::new();
    while delta >= delta_floor {
        let v = field.tbar_delta(x, delta)?;
        hist.push(v);
        let n = hist.len();
        if n >= 3 && (hist[n - 1] - hist[n - 2]).norm() <= tol && (hist[n - 2] - hist[n - 3]).norm() <= tol {
            return Ok((v, delta));
        }
        delta /= 2.0;
    }
    Err(CzError::precondition(format!(
        "δ-ladder did not settle above the floor {delta_floor}"
    )))
}

