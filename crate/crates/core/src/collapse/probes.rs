use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CzError, Result};
use crate::kernels::KernelSpec;
use crate::measures::AtomicMeasure;
use crate::potentials::{BalancingMeasure, LipFn, TbarField};
use crate::value::CVec;

/// Refuse meshes larger than this.
const MAX_MESH_POINTS: usize = 20_000_000;

/// Refuse porosity scans over more candidate centers than this.
const MAX_SCAN: u64 = 1 << 36;

/// Grid points `center + pitch·k`, `k ∈ ℤ^d`, kept inside a closed ball.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mesh {
    pub d: usize,
    pub pitch: f64,
    pub points: Vec<Vec<f64>>,
}

impl Mesh {
    pub fn ball(center: &[f64], radius: f64, pitch: f64) -> Result<Self> {
        let d = center.len();
        if !(1..=3).contains(&d) {
            return Err(CzError::argument("mesh dimension must be 1, 2 or 3"));
        }
        if !(pitch > 0.0 && radius >= 0.0 && pitch.is_finite() && radius.is_finite()) {
            return Err(CzError::argument("mesh needs positive pitch and nonnegative radius"));
        }
        let kmax = (radius / pitch).floor() as i64;
        let side = (2 * kmax + 1) as f64;
        if side.powi(d as i32) > MAX_MESH_POINTS as f64 {
            return Err(CzError::argument(format!(
                "mesh of pitch {pitch} over radius {radius} is too large"
            )));
        }
        let r2 = radius * radius * (1.0 + 1e-12);
        let mut points = Vec::new();
        let mut k = vec![-kmax; d];
        loop {
            let off: Vec<f64> = k.iter().map(|&ki| ki as f64 * pitch).collect();
            if off.iter().map(|o| o * o).sum::<f64>() <= r2 {
                points.push(center.iter().zip(&off).map(|(c, o)| c + o).collect());
            }
            let mut a = 0;
            loop {
                if a == d {
                    return Ok(Mesh { d, pitch, points });
                }
                k[a] += 1;
                if k[a] <= kmax {
                    break;
                }
                k[a] = -kmax;
                a += 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ratio-√2 ladder `lo, lo√2, …` strictly below `r`.
pub fn e_set_ladder(lo: f64, r: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && lo < r && r.is_finite()) {
        return Err(CzError::argument("ladder needs 0 < lo < r"));
    }
    let mut out = Vec::new();
    let mut delta = lo;
    while delta < r {
        out.push(delta);
        delta *= std::f64::consts::SQRT_2;
    }
    Ok(out)
}

/// Sampled density of `E(e, ε, r)` on a mesh.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityReport {
    /// Largest distance from a mesh point to the sampled set; `None` when
    /// the sampled set is empty (not κ-dense for any κ).
    pub kappa_hat: Option<f64>,
    pub set_fraction: f64,
    /// Real lanes of `e`.
    pub direction_e: Vec<f64>,
    pub ladder: Vec<f64>,
    pub mesh_pitch: f64,
    /// Every mesh point is in the set, so `kappa_hat = 0` is exact on the mesh.
    pub exact: bool,
    pub in_set: Vec<bool>,
}

/// Sample `E(e, ε, r) = {x : Re[e·T̄_{μ,δ}(1)(x)] > ε for all δ ∈ (0, r)}`
/// on `mesh`, with the δ-condition checked on `ladder`.
#[allow(clippy::too_many_arguments)]
pub fn e_set_density(
    k: &KernelSpec,
    mu: &AtomicMeasure,
    bal: &BalancingMeasure,
    e: &CVec,
    epsilon: f64,
    r: f64,
    mesh: &Mesh,
    ladder: &[f64],
) -> Result<DensityReport> {
    if e.components() != k.dprime() {
        return Err(CzError::argument("direction has the wrong number of components"));
    }
    if (e.norm() - 1.0).abs() > 1e-9 {
        return Err(CzError::argument("direction must be a unit vector"));
    }
    if !(epsilon > 0.0) {
        return Err(CzError::argument("epsilon must be positive"));
    }
    if ladder.is_empty() || ladder.iter().any(|&dl| !(dl > 0.0 && dl < r)) {
        return Err(CzError::argument("ladder must be a nonempty subset of (0, r)"));
    }
    if mesh.d != k.d {
        return Err(CzError::argument("mesh dimension does not match the kernel"));
    }
    let field = TbarField::new(k, mu, LipFn::One, bal)?;
    let in_set: Vec<bool> = mesh
        .points
        .par_iter()
        .map(|x| -> Result<bool> {
            for &dl in ladder {
                if field.tbar_delta(x, dl)?.dot(e).0 <= epsilon {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_>>()?;
    let members: Vec<&Vec<f64>> = mesh.points.iter().zip(&in_set).filter(|(_, &b)| b).map(|(p, _)| p).collect();
    let n = mesh.len().max(1);
    let kappa_hat = if members.is_empty() {
        None
    } else {
        let worst = mesh
            .points
            .par_iter()
            .zip(&in_set)
            .map(|(p, &inside)| {
                if inside {
                    return 0.0;
                }
                members
                    .iter()
                    .map(|q| p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
                    .sqrt()
            })
            .reduce(|| 0.0, f64::max);
        Some(worst)
    };
    Ok(DensityReport {
        kappa_hat,
        set_fraction: members.len() as f64 / n as f64,
        direction_e: e.lanes().to_vec(),
        ladder: ladder.to_vec(),
        mesh_pitch: mesh.pitch,
        exact: members.len() == mesh.len() && !mesh.is_empty(),
        in_set,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmptyBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

/// First ball `B(c, λr) ⊂ B(x, r)` with no atoms, scanning centers on a
/// mesh of pitch `λr/4` over `B(x, (1 − λ)r)`.
pub fn porosity_search(mu: &AtomicMeasure, x: &[f64], r: f64, lambda_frac: f64) -> Result<Option<EmptyBall>> {
    porosity_search_with_pitch(mu, x, r, lambda_frac, lambda_frac * r / 4.0)
}

pub fn porosity_search_with_pitch(
    mu: &AtomicMeasure,
    x: &[f64],
    r: f64,
    lambda_frac: f64,
    pitch: f64,
) -> Result<Option<EmptyBall>> {
    if !(lambda_frac > 0.0 && lambda_frac < 1.0) {
        return Err(CzError::argument("lambda_frac must lie in (0, 1)"));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(CzError::argument("radius must be positive"));
    }
    if x.len() != mu.dim() {
        return Err(CzError::argument("center has the wrong dimension"));
    }
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(CzError::argument("pitch must be positive"));
    }
    let rho = lambda_frac * r;
    let reach = (1.0 - lambda_frac) * r;
    let d = x.len();
    let kmax = (reach / pitch).floor() as u64;
    let side = 2 * kmax + 1;
    let total = (side as f64).powi(d as i32);
    if total > MAX_SCAN as f64 {
        return Err(CzError::argument(format!("porosity scan of {total:.3e} centers is too large")));
    }
    let index = mu.index(rho);
    let empty = |c: &[f64]| {
        let mut hit = false;
        let complete = index.visit_candidates(c, rho, 1 << 16, |i| {
            if !hit && mu.weight(i) != 0.0 && dist2(mu.point(i), c) < rho * rho {
                hit = true;
            }
        });
        if complete {
            !hit
        } else {
            mu.ball_mass(c, rho) == 0.0
        }
    };
    let reach2 = reach * reach * (1.0 + 1e-12);
    // centers in the same order as `Mesh::ball`: first axis fastest
    let center_at = |mut idx: u64| -> Option<Vec<f64>> {
        let mut c = Vec::with_capacity(d);
        let mut off2 = 0.0;
        for xa in x {
            let o = ((idx % side) as i64 - kmax as i64) as f64 * pitch;
            idx /= side;
            off2 += o * o;
            c.push(xa + o);
        }
        (off2 <= reach2).then_some(c)
    };
    Ok((0..total as u64)
        .into_par_iter()
        .find_map_first(|i| center_at(i).filter(|c| empty(c)))
        .map(|center| EmptyBall { center, radius: rho }))
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Which side of the alternative holds at `(x, r)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nondegeneracy {
    /// `μ(B(x, 2Mr)) ≥ τr^s`.
    MassLowerBound,
    /// `μ(B(x, r)) = 0`.
    EmptyBall,
    /// Neither branch holds: a counterexample to this `(M, τ)` at this resolution.
    Violated,
    /// `|T̄_{μ,Mr}(1)(x)| ≤ ε`, so the alternative says nothing.
    Inapplicable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub outcome: Nondegeneracy,
    pub tbar_norm: f64,
    pub mass_outer: f64,
    pub mass_inner: f64,
}

/// Check the alternative: if `|T̄_{μ,Mr}(1)(x)| > ε` then either
/// `μ(B(x, 2Mr)) ≥ τr^s` or `μ(B(x, r)) = 0`.
#[allow(clippy::too_many_arguments)]
pub fn nondegeneracy_check(
    k: &KernelSpec,
    mu: &AtomicMeasure,
    bal: &BalancingMeasure,
    x: &[f64],
    r: f64,
    epsilon: f64,
    big_m: f64,
    tau: f64,
) -> Result<NondegeneracyReport> {
    if !(r > 0.0 && epsilon > 0.0 && big_m > 0.0 && tau > 0.0) {
        return Err(CzError::argument("r, epsilon, M and tau must be positive"));
    }
    let field = TbarField::new(k, mu, LipFn::One, bal)?;
    let tbar_norm = field.tbar_delta(x, big_m * r)?.norm();
    let mass_outer = mu.ball_mass(x, 2.0 * big_m * r);
    let mass_inner = mu.ball_mass(x, r);
    let outcome = if tbar_norm <= epsilon {
        Nondegeneracy::Inapplicable
    } else if mass_outer >= tau * r.powf(k.s) {
        Nondegeneracy::MassLowerBound
    } else if mass_inner == 0.0 {
        Nondegeneracy::EmptyBall
    } else {
        Nondegeneracy::Violated
    };
    Ok(NondegeneracyReport {
        outcome,
        tbar_norm,
        mass_outer,
        mass_inner,
    })
}
