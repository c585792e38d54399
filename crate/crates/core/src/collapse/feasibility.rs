use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::CollapseParams;
use crate::error::{CzError, Result};
use crate::fits::{default_samples, stability, Estimate, FitContext, StabilityReport};
use crate::measures::ProbePlan;
use crate::reflectionless::linear_fit;

/// Sweep used to fit the power law `κ(ε) = c₉ε^β`.
pub const SWEEP_EPSILONS: [f64; 6] = [0.4, 0.2, 0.1, 0.05, 0.025, 0.0125];

const BISECTION_STEPS: usize = 200;

/// Volume of the unit ball in `ℝ^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => panic!("unsupported dimension {d}"),
    }
}

/// Infinite geometric sums bounding the drift of `ε_j` and `t_j` once the
/// mass bound decays like `q^ℓ m₀` with `q = 1 − λ/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesBounds {
    /// `Σ C₁ (C₆ (q^ℓ m₀)^{1/2d})^{α/2}`.
    pub eps_kappa: f64,
    /// `Σ C₁ √(q^ℓ m₀)`.
    pub eps_mass: f64,
    /// `Σ √C₆ (q^ℓ m₀)^{1/4d}`.
    pub radius: f64,
}

fn ratio(p: &CollapseParams) -> Result<f64> {
    let lambda = p.lambda();
    if lambda >= 2.0 {
        return Err(CzError::Infeasible(format!(
            "degenerate: c4*eps = {lambda} >= 2 drives the mass bound nonpositive in one step"
        )));
    }
    Ok(1.0 - lambda / 2.0)
}

/// Closed-form values of the three series.
pub fn series_bounds(p: &CollapseParams, m0: f64) -> Result<SeriesBounds> {
    let q = ratio(p)?;
    let d = p.d as f64;
    let ea = p.alpha / (4.0 * d);
    let geo = |e: f64| 1.0 / (1.0 - q.powf(e));
    Ok(SeriesBounds {
        eps_kappa: p.c1 * p.c6.powf(p.alpha / 2.0) * m0.powf(ea) * geo(ea),
        eps_mass: p.c1 * m0.sqrt() * geo(0.5),
        radius: p.c6.sqrt() * m0.powf(1.0 / (4.0 * d)) * geo(1.0 / (4.0 * d)),
    })
}

/// Partial sums of the same series over `terms` terms.
pub fn brute_force_series(p: &CollapseParams, m0: f64, terms: usize) -> Result<SeriesBounds> {
    let q = ratio(p)?;
    let d = p.d as f64;
    let mut out = SeriesBounds {
        eps_kappa: 0.0,
        eps_mass: 0.0,
        radius: 0.0,
    };
    for l in 0..terms {
        let m = q.powi(l as i32) * m0;
        out.eps_kappa += p.c1 * (p.c6 * m.powf(1.0 / (2.0 * d))).powf(p.alpha / 2.0);
        out.eps_mass += p.c1 * m.sqrt();
        out.radius += p.c6.sqrt() * m.powf(1.0 / (4.0 * d));
    }
    Ok(out)
}

/// Outcome of [`feasible_kappa`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub epsilon: f64,
    /// Largest admissible starting abundancy.
    pub kappa: f64,
    /// Mass threshold below which the alternating phase is safe.
    pub m0: f64,
    pub lambda: f64,
    pub series: SeriesBounds,
    /// `N = ⌊C₈ ln(1/ε)/ε⌋ + 1` decay steps of the first phase.
    pub n_steps: u64,
    /// Steps needed to bring `Λ2^s` below `m0` at rate `1 − λ`.
    pub n_required: u64,
    pub n_sufficient: bool,
    pub power_law_kappa: f64,
    pub power_law_admissible: bool,
}

fn n_steps(p: &CollapseParams) -> u64 {
    let e = p.epsilon;
    (p.c8 * (1.0 / e).ln() / e).floor() as u64 + 1
}

fn n_required(p: &CollapseParams, m0: f64) -> u64 {
    let start = p.lambda_nice * 2f64.powf(p.s);
    if start <= m0 {
        return 0;
    }
    let lambda = p.lambda();
    if lambda >= 1.0 {
        return 1;
    }
    ((start / m0).ln() / -(1.0 - lambda).ln()).ceil() as u64
}

/// Conditions on `m₀` alone. The `ε` budget `ε/4` and the radius budget
/// `t₀ − 1` are split evenly between the starting `κ` and the tail series.
fn m0_admissible(p: &CollapseParams, m0: f64) -> Result<bool> {
    let sb = series_bounds(p, m0)?;
    let d = p.d as f64;
    let kappa1 = p.c6 * m0.powf(1.0 / (2.0 * d));
    Ok(sb.eps_kappa + sb.eps_mass <= p.epsilon / 8.0
        && sb.radius < (p.t0 - 1.0) / 2.0
        && p.c1 * kappa1 < p.epsilon / 4.0
        && 2.0 * p.c1 * kappa1.powf(p.alpha / 2.0) <= p.epsilon / 2.0
        && kappa1 < 1.0
        && m0 <= p.lambda_nice * 2f64.powf(p.s))
}

/// Conditions on the starting `κ` given `m₀`, including the halves of the
/// budgets reserved above.
fn kappa_admissible(p: &CollapseParams, kappa: f64, sb: &SeriesBounds, n: u64) -> bool {
    let e = p.epsilon;
    let ka = kappa.powf(p.alpha / 2.0);
    let rk = kappa.sqrt();
    p.c1 * ka + sb.eps_kappa + sb.eps_mass < e / 4.0
        && p.c1 * ka <= e / 8.0
        && 2.0 * p.c1 * ka <= e / 2.0
        && ka < e / (4.0 * p.c6)
        && rk + sb.radius < p.t0 - 1.0
        && rk <= (p.t0 - 1.0) / 2.0
        && n as f64 * rk < 0.5
        && kappa < 1.0
}

/// Largest `x` in `(0, hi]` with `ok(x)`, for a predicate that holds below a
/// threshold; bisected in `log x`.
fn log_bisect(hi: f64, mut ok: impl FnMut(f64) -> Result<bool>) -> Result<Option<f64>> {
    if ok(hi)? {
        return Ok(Some(hi));
    }
    let mut lo = hi.ln() - 700.0;
    if !ok(lo.exp())? {
        return Ok(None);
    }
    let mut up = hi.ln();
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + up);
        if ok(mid.exp())? {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok(Some(lo.exp()))
}

/// Largest `κ` for which the recursion provably never trips a flag, with
/// the accompanying `m₀`.
pub fn feasible_kappa(p: &CollapseParams) -> Result<FeasibilityReport> {
    p.validate()?;
    ratio(p)?;
    let mass_cap = p.lambda_nice * 2f64.powf(p.s);
    let m0 = log_bisect(mass_cap, |m| m0_admissible(p, m))?
        .ok_or_else(|| CzError::Infeasible("no admissible m0 under the given constants".into()))?;
    let sb = series_bounds(p, m0)?;
    let n = n_steps(p);
    let kappa = log_bisect(1.0, |k| Ok(kappa_admissible(p, k, &sb, n)))?
        .filter(|&k| k > 0.0)
        .ok_or_else(|| CzError::Infeasible("no admissible kappa under the given constants".into()))?;
    let n_req = n_required(p, m0);
    let power_law_kappa = p.c9 * p.epsilon.powf(p.beta);
    Ok(FeasibilityReport {
        epsilon: p.epsilon,
        kappa,
        m0,
        lambda: p.lambda(),
        series: sb,
        n_steps: n,
        n_required: n_req,
        n_sufficient: n >= n_req,
        power_law_kappa,
        power_law_admissible: power_law_kappa <= kappa,
    })
}

/// Power-law fit of the admissible `κ` across `ε`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KappaSweep {
    /// `(ε, κ(ε), m₀(ε), N_req(ε))`.
    pub points: Vec<(f64, f64, f64, u64)>,
    /// Smallest `C₈` for which `N ≥ N_req` across the sweep.
    pub c8: f64,
    pub beta_hat: f64,
    /// Largest `c₉ ≤ 1` with `c₉ε^β̂ ≤ κ(ε)` across the sweep.
    pub c9: f64,
    pub r_squared: f64,
}

/// Fit `C₈`, then `κ(ε) ≈ c₉ε^β` over `epsilons`. `p.c8`, `p.c9` and
/// `p.beta` are ignored.
pub fn kappa_sweep(p: &CollapseParams, epsilons: &[f64]) -> Result<KappaSweep> {
    if epsilons.len() < 2 {
        return Err(CzError::argument("the sweep needs at least two values of epsilon"));
    }
    let mut c8 = 0.0f64;
    let mut masses = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        let q = p.with_epsilon(e);
        q.validate()?;
        let cap = q.lambda_nice * 2f64.powf(q.s);
        let m0 = log_bisect(cap, |m| m0_admissible(&q, m))?
            .ok_or_else(|| CzError::Infeasible(format!("no admissible m0 at eps = {e}")))?;
        let nr = n_required(&q, m0);
        c8 = c8.max(nr as f64 * e / (1.0 / e).ln());
        masses.push(m0);
    }
    let c8 = c8.max(f64::MIN_POSITIVE);
    let mut points = Vec::with_capacity(epsilons.len());
    let mut logs = Vec::with_capacity(epsilons.len());
    for &e in epsilons {
        let q = CollapseParams { c8, ..p.with_epsilon(e) };
        let r = feasible_kappa(&q)?;
        logs.push((e.ln(), r.kappa.ln()));
        points.push((e, r.kappa, r.m0, r.n_required));
    }
    let (beta_hat, _, r_squared) = linear_fit(&logs);
    let c9 = points
        .iter()
        .map(|&(e, k, _, _)| k / e.powf(beta_hat))
        .fold(f64::INFINITY, f64::min)
        .min(1.0)
        * (1.0 - 1e-9);
    Ok(KappaSweep {
        points,
        c8,
        beta_hat,
        c9,
        r_squared,
    })
}

/// Collapse constants derived from the estimate fits on the reference line.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FittedConstants {
    pub c1: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub lambda_nice: f64,
    pub d: usize,
    pub s: f64,
    pub alpha: f64,
    pub stability: Vec<StabilityReport>,
}

impl FittedConstants {
    /// Fit `C₁` (Hölder continuity), `C₃` (annulus bound) and `C₅`
    /// (truncation difference); derive `c₄ = 1/(2C₃ + ½)` and
    /// `C₆ = (2^{d+1}C₅/(ω_d C₁))^{1/d}` for the planar setting
    /// `d = 2, s = 1, α = 1`. Each constant is the larger of its base and
    /// doubled-sample fits.
    pub fn fit(base_scale: f64, seed: u64) -> Result<Self> {
        let ctx = FitContext::new(base_scale)?;
        let mut reports = Vec::new();
        let mut get = |e: Estimate| -> Result<f64> {
            let r = stability(&ctx, e, default_samples(e), seed)?;
            let c = r.base.max(r.doubled);
            reports.push(r);
            Ok(c)
        };
        let c1 = get(Estimate::HolderContinuity)?;
        let c3 = get(Estimate::AnnulusBound)?;
        let c5 = get(Estimate::TruncationDifference)?;
        let (d, s, alpha) = (2usize, 1.0, 1.0);
        let c4 = 1.0 / (2.0 * c3 + 0.5);
        let c6 = (2f64.powi(d as i32 + 1) * c5 / (unit_ball_volume(d) * c1)).powf(1.0 / d as f64);
        let nice = ctx.line.niceness(s, [base_scale, 4.0], &ProbePlan::default())?;
        Ok(FittedConstants {
            c1,
            c3,
            c4,
            c5,
            c6,
            lambda_nice: nice.lambda_hat,
            d,
            s,
            alpha,
            stability: reports,
        })
    }

    /// Parameters at `epsilon`, with `C₈`, `c₉`, `β` fitted over
    /// [`SWEEP_EPSILONS`].
    pub fn params(&self, epsilon: f64) -> Result<(CollapseParams, KappaSweep)> {
        let base = CollapseParams {
            epsilon,
            d: self.d,
            s: self.s,
            alpha: self.alpha,
            lambda_nice: self.lambda_nice,
            c1: self.c1,
            c4: self.c4,
            c6: self.c6,
            c8: 1.0,
            c9: 1.0,
            beta: 1.0,
            t0: 1.5,
            kappa0: None,
        };
        let sweep = kappa_sweep(&base, &SWEEP_EPSILONS)?;
        let p = CollapseParams {
            c8: sweep.c8,
            c9: sweep.c9,
            beta: sweep.beta_hat,
            ..base
        };
        p.validate()?;
        Ok((p, sweep))
    }
}
