//! Geometric movement primitives: constant-chord resampling of demonstrations,
//! arc-length parametric curves, the geometric transformation system and its
//! classic baseline, minimum-time phase optimization, a planar arm for
//! joint-space limits, and a human-in-the-loop simulation with passivity and
//! stability analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod curvefit;
pub mod gdmp;
pub mod hilsim;
pub mod integrate;
pub mod io;
pub mod kinematics;
pub mod phase;
pub mod phaseopt;
pub mod sampling;

pub use error::{GdmpError, Result};
