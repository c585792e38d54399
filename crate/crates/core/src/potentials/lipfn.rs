//! Lipschitz test functions with certified norms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CzError, Result};
use crate::measures::AtomicMeasure;

/// A Lipschitz function ℝ^d → ℝ built from a small algebra of primitives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LipFn {
    /// The constant 1.
    One,
    /// 1 on `B(center, r_inner)`, 0 off `B(center, r_outer)`, linear in `|x − center|` between.
    RadialPlateau { center: Vec<f64>, r_inner: f64, r_outer: f64 },
    /// `max(0, 1 − |x − center|/radius)`.
    Hat { center: Vec<f64>, radius: f64 },
    /// `Σ c_k f_k`.
    Combination { terms: Vec<(f64, LipFn)> },
    Product { left: Box<LipFn>, right: Box<LipFn> },
    /// `f − λρ` with `λ = ∫f dμ / ∫ρ dμ` fixed at construction.
    MeanZeroAdjusted { f: Box<LipFn>, rho: Box<LipFn>, lambda: f64 },
    /// `y ↦ inner(x + r·y)`.
    Rescaled { inner: Box<LipFn>, x: Vec<f64>, r: f64 },
}

/// A ball containing the support.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl LipFn {
    pub fn radial_plateau(center: &[f64], r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(r_inner >= 0.0 && r_outer > r_inner && r_outer.is_finite()) {
            return Err(CzError::argument(format!(
                "plateau radii must satisfy 0 ≤ r_inner < r_outer, got {r_inner}, {r_outer}"
            )));
        }
        Ok(LipFn::RadialPlateau {
            center: center.to_vec(),
            r_inner,
            r_outer,
        })
    }

    pub fn hat(center: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(CzError::argument(format!("hat radius must be positive, got {radius}")));
        }
        Ok(LipFn::Hat {
            center: center.to_vec(),
            radius,
        })
    }

    pub fn scaled(self, c: f64) -> Self {
        LipFn::Combination { terms: vec![(c, self)] }
    }

    pub fn combination(terms: Vec<(f64, LipFn)>) -> Self {
        LipFn::Combination { terms }
    }

    pub fn product(left: LipFn, right: LipFn) -> Self {
        LipFn::Product {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// `f_{x,r}`, the function matching a measure rescaled about `x` by `r`.
    pub fn rescaled(self, x: &[f64], r: f64) -> Self {
        LipFn::Rescaled {
            inner: Box::new(self),
            x: x.to_vec(),
            r,
        }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        match self {
            LipFn::One => 1.0,
            LipFn::RadialPlateau { center, r_inner, r_outer } => {
                let t = dist(p, center);
                if t <= *r_inner {
                    1.0
                } else if t >= *r_outer {
                    0.0
                } else {
                    (r_outer - t) / (r_outer - r_inner)
                }
            }
            LipFn::Hat { center, radius } => (1.0 - dist(p, center) / radius).max(0.0),
            LipFn::Combination { terms } => terms.iter().map(|(c, f)| c * f.eval(p)).sum(),
            LipFn::Product { left, right } => left.eval(p) * right.eval(p),
            LipFn::MeanZeroAdjusted { f, rho, lambda } => f.eval(p) - lambda * rho.eval(p),
            LipFn::Rescaled { inner, x, r } => {
                let q: Vec<f64> = x.iter().zip(p).map(|(c, y)| c + r * y).collect();
                inner.eval(&q)
            }
        }
    }

    /// Certified upper bound for the Lipschitz constant.
    pub fn lip_bound(&self) -> f64 {
        match self {
            LipFn::One => 0.0,
            LipFn::RadialPlateau { r_inner, r_outer, .. } => 1.0 / (r_outer - r_inner),
            LipFn::Hat { radius, .. } => 1.0 / radius,
            LipFn::Combination { terms } => terms.iter().map(|(c, f)| c.abs() * f.lip_bound()).sum(),
            LipFn::Product { left, right } => {
                left.lip_bound() * right.sup_norm() + left.sup_norm() * right.lip_bound()
            }
            LipFn::MeanZeroAdjusted { f, rho, lambda } => f.lip_bound() + lambda.abs() * rho.lip_bound(),
            LipFn::Rescaled { inner, r, .. } => r * inner.lip_bound(),
        }
    }

    /// Upper bound for `sup |f|`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            LipFn::One | LipFn::RadialPlateau { .. } | LipFn::Hat { .. } => 1.0,
            LipFn::Combination { terms } => terms.iter().map(|(c, f)| c.abs() * f.sup_norm()).sum(),
            LipFn::Product { left, right } => left.sup_norm() * right.sup_norm(),
            LipFn::MeanZeroAdjusted { f, rho, lambda } => f.sup_norm() + lambda.abs() * rho.sup_norm(),
            LipFn::Rescaled { inner, .. } => inner.sup_norm(),
        }
    }

    /// A closed ball outside of which the function vanishes; `None` when
    /// the support is unbounded.
    pub fn support(&self) -> Option<SupportBall> {
        match self {
            LipFn::One => None,
            LipFn::RadialPlateau { center, r_outer, .. } => Some(SupportBall {
                center: center.clone(),
                radius: *r_outer,
            }),
            LipFn::Hat { center, radius } => Some(SupportBall {
                center: center.clone(),
                radius: *radius,
            }),
            LipFn::Combination { terms } => {
                union(terms.iter().filter(|(c, _)| *c != 0.0).map(|(_, f)| f.support()))
            }
            LipFn::Product { left, right } => match (left.support(), right.support()) {
                (Some(a), Some(b)) => Some(if a.radius <= b.radius { a } else { b }),
                (a, b) => a.or(b),
            },
            LipFn::MeanZeroAdjusted { f, rho, lambda } => {
                if *lambda == 0.0 {
                    f.support()
                } else {
                    union([f.support(), rho.support()].into_iter())
                }
            }
            LipFn::Rescaled { inner, x, r } => inner.support().map(|b| SupportBall {
                center: b.center.iter().zip(x).map(|(c, x0)| (c - x0) / r).collect(),
                radius: b.radius / r,
            }),
        }
    }

    /// Radius about the origin beyond which the function vanishes.
    pub fn support_radius(&self) -> f64 {
        match self.support() {
            None => f64::INFINITY,
            Some(b) => b.center.iter().map(|c| c * c).sum::<f64>().sqrt() + b.radius,
        }
    }

    pub fn is_compact(&self) -> bool {
        self.support().is_some()
    }

    /// Values at every atom of `mu`, in atom order.
    pub fn values_at(&self, mu: &AtomicMeasure) -> Vec<f64> {
        (0..mu.len()).into_par_iter().map(|i| self.eval(mu.point(i))).collect()
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, mu: &AtomicMeasure) -> f64 {
        crate::sum::block_sum(0.0, mu.len(), |i| self.eval(mu.point(i)) * mu.weight(i))
    }

    /// Short human-readable descriptor.
    pub fn describe(&self) -> String {
        match self {
            LipFn::One => "one".into(),
            LipFn::RadialPlateau { center, r_inner, r_outer } => {
                format!("plateau(c={center:?},{r_inner},{r_outer})")
            }
            LipFn::Hat { center, radius } => format!("hat(c={center:?},{radius})"),
            LipFn::Combination { terms } => terms
                .iter()
                .map(|(c, f)| format!("{c}*{}", f.describe()))
                .collect::<Vec<_>>()
                .join(" + "),
            LipFn::Product { left, right } => format!("({})*({})", left.describe(), right.describe()),
            LipFn::MeanZeroAdjusted { f, rho, lambda } => {
                format!("[{}] - {lambda}*[{}]", f.describe(), rho.describe())
            }
            LipFn::Rescaled { inner, x, r } => format!("rescale({}, x={x:?}, r={r})", inner.describe()),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Smallest ball around the first centre that covers every ball; `None` if
/// any is unbounded. An empty union is the empty ball at the origin.
fn union(balls: impl Iterator<Item = Option<SupportBall>>) -> Option<SupportBall> {
    let balls: Vec<SupportBall> = balls.collect::<Option<Vec<_>>>()?;
    let Some(first) = balls.first() else {
        return Some(SupportBall {
            center: Vec::new(),
            radius: 0.0,
        });
    };
    let radius = balls
        .iter()
        .map(|b| dist(&first.center, &b.center) + b.radius)
        .fold(0.0, f64::max);
    Some(SupportBall {
        center: first.center.clone(),
        radius,
    })
}
