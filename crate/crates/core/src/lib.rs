//! Numerical laboratory for Calderón–Zygmund operators on discrete measures.

pub mod collapse;
pub mod config;
pub mod error;
pub mod fits;
pub mod index;
pub mod kernels;
pub mod measures;
pub mod potentials;
pub mod reflectionless;
pub mod suite;
pub mod sum;
pub mod value;

pub use error::{CzError, Result};
pub use kernels::{KernelFamily, KernelSpec};
pub use measures::{make_measure, AtomicMeasure, MeasureDescriptor, SignedAtomicMeasure};
pub use value::CVec;
pub use potentials::{BalancingMeasure, Gauge, LipFn, TbarField};
