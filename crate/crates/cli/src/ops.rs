use serde_json::{json, Value};

use czolab::collapse::{self, CollapseParams, FittedConstants};
use czolab::config::{ConstantsFile, Scenario};
use czolab::measures::ProbePlan;
use czolab::potentials::{potential, potential_reg, wolff, BalancingMeasure, LipFn, TbarField};
use czolab::reflectionless::{defect_suite, TestFamily};
use czolab::suite::invariant_suite;
use czolab::{make_measure, AtomicMeasure, CzError, Result};

pub const OPERATIONS: [&str; 7] = [
    "potential-field",
    "reflectionless-test",
    "collapse-sim",
    "wolff",
    "niceness",
    "porosity",
    "invariant-suite",
];

/// What an operation produced.
pub struct Outcome {
    pub csv: Option<String>,
    pub json: Option<Value>,
    pub summary: String,
    /// Nonzero when the operation ran but reported a failure.
    pub status: i32,
}

impl Outcome {
    fn json(value: Value, summary: String) -> Self {
        Outcome {
            csv: None,
            json: Some(value),
            summary,
            status: 0,
        }
    }
}

pub fn dispatch(sc: &Scenario) -> Result<Outcome> {
    match sc.op.as_str() {
        "potential-field" => potential_field(sc),
        "reflectionless-test" => reflectionless_test(sc),
        "collapse-sim" => collapse_sim(sc),
        "wolff" => wolff_op(sc),
        "niceness" => niceness(sc),
        "porosity" => porosity(sc),
        "invariant-suite" => invariant(sc),
        other => Err(CzError::argument(format!("unknown operation `{other}`"))),
    }
}

fn measure(sc: &Scenario) -> Result<AtomicMeasure> {
    let desc = sc
        .measure
        .as_ref()
        .ok_or_else(|| CzError::argument("missing config key `measure.kind`"))?;
    make_measure(desc)
}

fn point(sc: &Scenario, key: &str, d: usize) -> Result<Vec<f64>> {
    let x = sc.config.f64_list(key)?.unwrap_or_else(|| vec![0.0; d]);
    if x.len() != d {
        return Err(CzError::argument(format!("`{key}` needs {d} coordinates")));
    }
    Ok(x)
}

fn f64_or(sc: &Scenario, key: &str, default: f64) -> Result<f64> {
    Ok(sc.config.f64(key)?.unwrap_or(default))
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn potential_field(sc: &Scenario) -> Result<Outcome> {
    let mu = measure(sc)?;
    let k = &sc.kernel;
    let d = mu.dim();
    let points: Vec<Vec<f64>> = match sc.config.f64_list("op.points")? {
        Some(flat) => {
            if flat.is_empty() || flat.len() % d != 0 {
                return Err(CzError::argument(format!("`op.points` needs a multiple of {d} coordinates")));
            }
            flat.chunks(d).map(<[f64]>::to_vec).collect()
        }
        None => {
            let center = point(sc, "op.grid_center", d)?;
            let radius = f64_or(sc, "op.grid_radius", 1.0)?;
            let pitch = f64_or(sc, "op.grid_pitch", 0.1)?;
            collapse::Mesh::ball(&center, radius, pitch)?.points
        }
    };
    let ladder = sc.delta_ladder.clone().unwrap_or_else(|| vec![0.01, 0.1, 1.0]);
    let field_kind = sc.config.str("op.field").unwrap_or("tbar");
    let mut csv = (1..=d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    csv.push_str(",delta");
    for c in 1..=k.dprime() {
        csv.push_str(&format!(",re_{c},im_{c}"));
    }
    csv.push('\n');
    let mut row = |x: &[f64], delta: f64, v: czolab::CVec| {
        let cells: Vec<String> = x.iter().copied().chain([delta]).chain(v.lanes().iter().copied()).map(num).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    };
    match field_kind {
        "tbar" => {
            let bal = BalancingMeasure::default_for(&mu)?;
            let field = TbarField::new(k, &mu, LipFn::One, &bal)?;
            for x in &points {
                for &delta in &ladder {
                    row(x, delta, field.tbar_delta(x, delta)?);
                }
            }
        }
        "potential" => {
            let nu = mu.to_signed();
            for x in &points {
                for &delta in &ladder {
                    row(x, delta, potential_reg(k, delta, &nu, x)?);
                }
                if let Some(eps) = sc.pv_epsilon {
                    row(x, eps, potential(k, &nu, x, eps)?.value);
                }
            }
        }
        other => return Err(CzError::argument(format!("`op.field` must be tbar or potential, got `{other}`"))),
    }
    Ok(Outcome {
        summary: format!(
            "potential-field: {} points x {} gauges ({field_kind})",
            points.len(),
            ladder.len()
        ),
        csv: Some(csv),
        json: None,
        status: 0,
    })
}

fn reflectionless_test(sc: &Scenario) -> Result<Outcome> {
    let mu = measure(sc)?;
    let family = TestFamily::for_measure(&mu, sc.family_seed)?;
    let mut report = defect_suite(&sc.kernel, &mu, &family, sc.family_size)?;
    if let Some(p) = &sc.threshold_profile {
        report = report.with_threshold(p);
    }
    let summary = format!(
        "reflectionless-test: defect {:e} over {} functions at h = {}{}",
        report.defect,
        report.family_size,
        report.resolution_h,
        match report.passes {
            Some(true) => " (below threshold)",
            Some(false) => " (above threshold)",
            None => "",
        }
    );
    Ok(Outcome::json(serde_json::to_value(&report).expect("serializable"), summary))
}

fn collapse_params(sc: &Scenario, epsilon: f64) -> Result<(CollapseParams, Option<Value>)> {
    let file = match sc.config.str("op.constants") {
        Some(p) => Some(ConstantsFile::read(p)?),
        None => None,
    };
    let neutral = CollapseParams {
        epsilon,
        d: 2,
        s: 1.0,
        alpha: 1.0,
        lambda_nice: 1.0,
        c1: 1.0,
        c4: 1.0,
        c6: 1.0,
        c8: 1.0,
        c9: 1.0,
        beta: 1.0,
        t0: 1.5,
        kappa0: None,
    };
    let mut p = match &file {
        Some(f) if f.is_complete() => f.apply(&neutral),
        _ => {
            let base = f64_or(sc, "op.fit_base_scale", 0.02)?;
            let fitted = FittedConstants::fit(base, sc.seed)?;
            let (fp, sweep) = fitted.params(epsilon)?;
            let fit_info = json!({
                "C1": fitted.c1, "C3": fitted.c3, "c4": fitted.c4, "C5": fitted.c5, "C6": fitted.c6,
                "Lambda": fitted.lambda_nice, "C8": sweep.c8, "c9": sweep.c9,
                "beta_hat": sweep.beta_hat, "r_squared": sweep.r_squared,
            });
            let p = match &file {
                Some(f) => f.apply(&fp),
                None => fp,
            };
            return finish(sc, p, Some(fit_info));
        }
    };
    p.epsilon = epsilon;
    finish(sc, p, None)
}

fn finish(sc: &Scenario, mut p: CollapseParams, fit: Option<Value>) -> Result<(CollapseParams, Option<Value>)> {
    if let Some(k) = sc.config.f64("op.kappa0")? {
        p.kappa0 = Some(k);
    }
    if let Some(t0) = sc.config.f64("op.t0")? {
        p.t0 = t0;
    }
    p.validate()?;
    Ok((p, fit))
}

fn collapse_sim(sc: &Scenario) -> Result<Outcome> {
    let epsilon = f64_or(sc, "op.epsilon", 0.1)?;
    let jmax = sc.config.usize("op.jmax")?.unwrap_or(1000);
    let (mut p, fit) = collapse_params(sc, epsilon)?;
    let feas = collapse::feasible_kappa(&p)?;
    if p.kappa0.is_none() {
        p.kappa0 = Some(feas.kappa);
    }
    let m0 = f64_or(sc, "op.m0", feas.m0)?;
    let tr = collapse::run_recursion(&p, m0, jmax)?;
    let summary = match &tr.first_violation {
        None => format!(
            "collapse-sim: {} steps without violation, kappa {:e}, m_j/m0 = {:e}",
            tr.steps(),
            p.kappa0(),
            tr.rows.last().map_or(0.0, |r| if m0 > 0.0 { r.state.m / m0 } else { 0.0 })
        ),
        Some(v) => format!("collapse-sim: violation at j = {} ({})", v.j, v.failed.join(", ")),
    };
    let json = json!({
        "params": p,
        "feasibility": feas,
        "fitted": fit,
        "m0": m0,
        "jmax": jmax,
        "steps": tr.steps(),
        "first_violation": tr.first_violation,
        "geometric_certificate": tr.geometric_certificate,
    });
    Ok(Outcome {
        csv: Some(tr.to_csv()),
        json: Some(json),
        summary,
        status: 0,
    })
}

fn wolff_op(sc: &Scenario) -> Result<Outcome> {
    let mu = measure(sc)?;
    let x = point(sc, "op.x", mu.dim())?;
    let p = f64_or(sc, "op.p", 2.0)?;
    let s = f64_or(sc, "op.s", sc.kernel.s)?;
    let window = [f64_or(sc, "op.rmin", 0.01)?, f64_or(sc, "op.rmax", 10.0)?];
    let steps = sc.config.usize("op.steps")?.unwrap_or(200);
    let value = wolff(&mu, s, p, &x, window, steps)?;
    Ok(Outcome::json(
        json!({ "x": x, "s": s, "p": p, "window": window, "log_steps": steps, "value": value }),
        format!("wolff: W = {value:e}"),
    ))
}

fn niceness(sc: &Scenario) -> Result<Outcome> {
    let mu = measure(sc)?;
    let s = f64_or(sc, "op.s", sc.kernel.s)?;
    let rmin = f64_or(sc, "op.rmin", mu.resolution_h * 5.0)?;
    let rmax = f64_or(sc, "op.rmax", mu.diameter_bound().max(rmin))?;
    let rep = mu.niceness(s, [rmin, rmax], &ProbePlan::default())?;
    let summary = format!("niceness: Lambda_hat = {:e} on [{rmin}, {rmax}]", rep.lambda_hat);
    Ok(Outcome::json(serde_json::to_value(&rep).expect("serializable"), summary))
}

fn porosity(sc: &Scenario) -> Result<Outcome> {
    let mu = measure(sc)?;
    let x = point(sc, "op.x", mu.dim())?;
    let r = f64_or(sc, "op.r", 1.0)?;
    let lambda = f64_or(sc, "op.lambda", 0.1)?;
    let found = match sc.config.f64("op.pitch")? {
        Some(pitch) => collapse::porosity_search_with_pitch(&mu, &x, r, lambda, pitch)?,
        None => collapse::porosity_search(&mu, &x, r, lambda)?,
    };
    let summary = match &found {
        Some(b) => format!("porosity: empty ball at {:?} of radius {:e}", b.center, b.radius),
        None => "porosity: no empty ball found".to_string(),
    };
    Ok(Outcome::json(
        json!({ "x": x, "r": r, "lambda": lambda, "found": found.is_some(), "ball": found }),
        summary,
    ))
}

fn invariant(sc: &Scenario) -> Result<Outcome> {
    let checks = invariant_suite(sc.seed);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("invariant-suite: {} checks passed", checks.len())
    } else {
        format!("invariant-suite: {} of {} checks failed: {}", failed.len(), checks.len(), failed.join(", "))
    };
    let status = if failed.is_empty() { 0 } else { 4 };
    Ok(Outcome {
        csv: None,
        json: Some(json!({ "checks": checks })),
        summary,
        status,
    })
}
