//! Numerical toolkit for weighted variable-exponent Lebesgue spaces and the
//! exact parameter algebra behind their extrapolation theorems.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod config;
pub mod error;
pub mod exponent;
pub mod field;
pub mod harness;
pub mod norm;
pub mod operators;
mod par;
pub mod planner;
pub mod rdf;
pub mod weights;

pub use error::{Error, Result};
pub use exponent::{ExponentFamily, ExponentFunction};
pub use field::{BallFamily, BallPolicy, Grid, GridFunction, Region, SignMode};
pub use norm::{luxemburg_norm, modular, weighted_norm, NormOptions, NormResult};
pub use operators::{OperatorHandle, OperatorKind};
pub use planner::{ExtrapolationPlan, PlanError, XRational};
pub use weights::{Verdict, Weight, WeightClass};
