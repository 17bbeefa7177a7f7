//! Numerical laboratory for fully nonlinear nonlocal elliptic operators.
//!
//! The crate evaluates linear and extremal (Pucci-type) integro-differential
//! operators with drift and zero-order terms, computes principal eigenpairs
//! on balls, annuli and the whole space by domain exhaustion, root-finds
//! fundamental-solution exponents, certifies closed-form barrier
//! inequalities, runs randomized Harnack-ratio experiments, and carries an
//! exact self-similar heat-profile oracle.

// `!(x > 0.0)`-style guards are used on purpose: unlike `x <= 0.0` they also
// reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod special;
pub mod kernel;
pub mod field;
pub mod quad;
pub mod operator;
pub mod oracle;
pub mod report;
pub mod exponent;
pub mod barrier;
pub mod eigen;
pub mod harnack;
pub mod heat;
pub mod acceptance;

pub use error::{Error, Result};
pub use field::{AnalyticField, RadialField, RadialFn, RadialGrid, TailModel};
pub use kernel::{EllipticityBounds, IsaacsFamily, KernelSpec, Multiplier, Violation};
pub use operator::{Drift, OpSign, OperatorSpec, OperatorValue, ZeroOrder};
pub use quad::QuadratureConfig;
