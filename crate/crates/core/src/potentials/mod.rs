//! Potentials and bilinear forms of Calderón–Zygmund kernels against
//! atomic measures.

mod forms;
mod lipfn;
mod wolff;

use serde::{Deserialize, Serialize};

pub use forms::{
    bilinear_smooth, bilinear_smooth_values, bilinear_tilde, geometric_ladder, potential, potential_reg, tbar_limit,
    BalancingMeasure, CotlarReport, FormValue, Gauge, TbarField,
};
pub use lipfn::{LipFn, SupportBall};
pub use wolff::wolff;

use crate::value::CVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    T,
    TDelta,
    TLoc,
    GTilde,
    TbarDelta,
    Tbar,
    FDeltaDelta,
    Wolff,
    CotlarSup,
}

/// One evaluated potential, as written by the field command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSample {
    pub point: Vec<f64>,
    pub delta: Option<f64>,
    pub big_delta: Option<f64>,
    pub value: CVec,
    pub kind: PotentialKind,
}

#[cfg(test)]
mod tests;
