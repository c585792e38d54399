//! Parameter dynamics of the collapse argument and its geometric probes.
//!
//! The recursion tracks `(t_j, ε_j, κ_j, m_j)`: a shrinking radius, a
//! decaying lower bound on `Re[e·T̄(1)]`, the density scale of the set where
//! that bound holds, and an upper bound on the mass of `B(0, t_j)`.

mod feasibility;
mod probes;

pub use feasibility::{
    brute_force_series, feasible_kappa, kappa_sweep, series_bounds, unit_ball_volume, FeasibilityReport,
    FittedConstants, KappaSweep, SeriesBounds, SWEEP_EPSILONS,
};
pub use probes::{
    e_set_density, e_set_ladder, nondegeneracy_check, porosity_search, porosity_search_with_pitch, DensityReport,
    EmptyBall, Mesh, Nondegeneracy, NondegeneracyReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{CzError, Result};

/// Constants driving the recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseParams {
    pub epsilon: f64,
    pub d: usize,
    pub s: f64,
    pub alpha: f64,
    /// Niceness constant `Λ`; the starting mass is at most `Λ 2^s`.
    pub lambda_nice: f64,
    pub c1: f64,
    pub c4: f64,
    pub c6: f64,
    pub c8: f64,
    pub c9: f64,
    pub beta: f64,
    pub t0: f64,
    /// Starting abundancy; `c9 ε^β` when absent.
    pub kappa0: Option<f64>,
}

impl CollapseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(CzError::Domain(format!("epsilon must lie in (0, 1/2), got {}", self.epsilon)));
        }
        if !(1..=3).contains(&self.d) {
            return Err(CzError::argument("d must be 1, 2 or 3"));
        }
        if !(self.s > 0.0 && self.s < self.d as f64) {
            return Err(CzError::argument("s must lie in (0, d)"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CzError::argument("alpha must lie in (0, 1]"));
        }
        let named = [
            ("Lambda", self.lambda_nice),
            ("C1", self.c1),
            ("c4", self.c4),
            ("C6", self.c6),
            ("C8", self.c8),
            ("c9", self.c9),
            ("beta", self.beta),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(CzError::argument(format!("{name} must be positive and finite")));
            }
        }
        if !(self.t0 > 1.0 && self.t0 <= 2.0) {
            return Err(CzError::argument("t0 must lie in (1, 2]"));
        }
        if let Some(k) = self.kappa0 {
            if !(0.0..1.0).contains(&k) {
                return Err(CzError::argument("kappa0 must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    /// `λ = c₄ε`.
    pub fn lambda(&self) -> f64 {
        self.c4 * self.epsilon
    }

    pub fn kappa0(&self) -> f64 {
        self.kappa0.unwrap_or_else(|| self.c9 * self.epsilon.powf(self.beta))
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        CollapseParams {
            epsilon,
            ..self.clone()
        }
    }

    pub fn initial_state(&self) -> CollapseState {
        CollapseState {
            j: 0,
            t: self.t0,
            eps: self.epsilon,
            kappa: self.kappa0(),
            m: 0.0,
        }
    }
}

/// One point of the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseState {
    pub j: usize,
    pub t: f64,
    pub eps: f64,
    pub kappa: f64,
    pub m: f64,
}

/// Density increment: `ε′ = ε − C₁[κ^{α/2} + √m]`, `κ′ = C₆ m^{1/2d}`,
/// `t′ = t − √κ`. The step index and mass are left to the caller.
pub fn density_step(state: &CollapseState, p: &CollapseParams, m_in: f64) -> CollapseState {
    let m_in = m_in.max(0.0);
    CollapseState {
        eps: state.eps - p.c1 * (state.kappa.powf(p.alpha / 2.0) + m_in.sqrt()),
        kappa: p.c6 * m_in.powf(1.0 / (2.0 * p.d as f64)),
        t: state.t - state.kappa.sqrt(),
        ..*state
    }
}

/// Mass decay `m′ = (1 − c₄ε)m`, `t′ = t − √κ`, allowed when `2C₁κ^{α/2} ≤ ε`.
pub fn decay_step(state: &CollapseState, p: &CollapseParams) -> Result<CollapseState> {
    let gate = 2.0 * p.c1 * state.kappa.powf(p.alpha / 2.0);
    if gate > state.eps {
        return Err(CzError::precondition(format!(
            "decay gate violated at j={}: 2*C1*kappa^(alpha/2) = {gate:.6e} > eps = {:.6e}",
            state.j, state.eps
        )));
    }
    Ok(CollapseState {
        m: (1.0 - p.c4 * state.eps) * state.m,
        t: state.t - state.kappa.sqrt(),
        ..*state
    })
}

/// The three conditions checked at every step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    /// `t_j > 1`.
    pub radius: bool,
    /// `ε_j ≥ ε/2`.
    pub epsilon: bool,
    /// `2C₁κ_j^{α/2} ≤ ε/2`.
    pub gate: bool,
}

impl StepFlags {
    pub fn evaluate(state: &CollapseState, p: &CollapseParams) -> Self {
        StepFlags {
            radius: state.t > 1.0,
            epsilon: state.eps >= p.epsilon / 2.0,
            gate: 2.0 * p.c1 * state.kappa.powf(p.alpha / 2.0) <= p.epsilon / 2.0,
        }
    }

    pub fn all(&self) -> bool {
        self.radius && self.epsilon && self.gate
    }

    /// Compact code for CSV output, e.g. `TEG` or `T-G`.
    pub fn code(&self) -> String {
        [(self.radius, 'T'), (self.epsilon, 'E'), (self.gate, 'G')]
            .iter()
            .map(|&(ok, c)| if ok { c } else { '-' })
            .collect()
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !self.radius {
            v.push("t_j <= 1");
        }
        if !self.epsilon {
            v.push("eps_j < eps/2");
        }
        if !self.gate {
            v.push("2*C1*kappa_j^(alpha/2) > eps/2");
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub state: CollapseState,
    pub flags: StepFlags,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub j: usize,
    pub failed: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    pub first_violation: Option<Violation>,
    /// `m_j ≤ (1 − λ/2)^j m₀` held on every recorded row.
    pub geometric_certificate: bool,
    pub m0: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.rows.last().map_or(0, |r| r.state.j)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,t,eps,kappa,m,flags\n");
        for r in &self.rows {
            let s = &r.state;
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
                s.j,
                s.t,
                s.eps,
                s.kappa,
                s.m,
                r.flags.code()
            ));
        }
        out
    }
}

/// Iterate decay and density steps from `m_j = m0`, stopping after `j_max`
/// steps or at the first row where a flag fails.
pub fn run_recursion(p: &CollapseParams, m0: f64, j_max: usize) -> Result<Trajectory> {
    p.validate()?;
    if !(m0 >= 0.0 && m0.is_finite()) {
        return Err(CzError::argument("m0 must be finite and nonnegative"));
    }
    if j_max < 1 {
        return Err(CzError::argument("j_max must be at least 1"));
    }
    let shrink = 1.0 - p.lambda() / 2.0;
    let mut state = CollapseState { m: m0, ..p.initial_state() };
    let mut bound = m0;
    let mut certificate = true;
    let mut rows = Vec::with_capacity(j_max + 1);
    let mut first_violation = None;
    loop {
        let flags = StepFlags::evaluate(&state, p);
        rows.push(TrajectoryRow { state, flags });
        if state.m > bound * (1.0 + 1e-12) {
            certificate = false;
        }
        if !flags.all() {
            first_violation = Some(Violation {
                j: state.j,
                failed: flags.failures().into_iter().map(String::from).collect(),
            });
            break;
        }
        if state.j == j_max {
            break;
        }
        let decayed = decay_step(&state, p)?;
        let dense = density_step(&state, p, state.m);
        state = CollapseState {
            j: state.j + 1,
            t: decayed.t,
            m: decayed.m,
            eps: dense.eps,
            kappa: dense.kappa,
        };
        bound *= shrink;
    }
    Ok(Trajectory {
        rows,
        first_violation,
        geometric_certificate: certificate,
        m0,
    })
}
