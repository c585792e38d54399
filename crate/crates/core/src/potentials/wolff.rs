use crate::error::{CzError, Result};
use crate::measures::AtomicMeasure;

/// `𝕎_p(μ)(x)` truncated to `[r_min, r_max]`: midpoint rule in `log r` of
/// `(μ(B(x,r))/r^s)^p`.
pub fn wolff(mu: &AtomicMeasure, s: f64, p: f64, x: &[f64], window: [f64; 2], log_steps: usize) -> Result<f64> {
    let [r_min, r_max] = window;
    if !(r_min > 0.0 && r_max >= r_min && r_max.is_finite()) {
        return Err(CzError::argument("Wolff window must satisfy 0 < r_min ≤ r_max"));
    }
    if !(p > 0.0) || log_steps == 0 {
        return Err(CzError::argument("need p > 0 and at least one step"));
    }
    if x.len() != mu.dim() {
        return Err(CzError::argument("evaluation point has the wrong dimension"));
    }
    let mut atoms: Vec<(f64, f64)> = mu
        .points()
        .zip(mu.weights())
        .map(|(a, &w)| (a.iter().zip(x).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt(), w))
        .filter(|(r, _)| *r < r_max)
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let step = (r_max / r_min).ln() / log_steps as f64;
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut k = 0;
    for i in 0..log_steps {
        let r = r_min * ((i as f64 + 0.5) * step).exp();
        while k < atoms.len() && atoms[k].0 < r {
            mass += atoms[k].1;
            k += 1;
        }
        if mass > 0.0 {
            total += (mass / r.powf(s)).powf(p);
        }
    }
    Ok(total * step)
}
