//! Numerical verification and falsification of forward invariance for
//! constrained differential inclusions `x' ∈ F(x), x ∈ C`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure: given
//! the same inputs and seeds every routine returns bit-identical results.
//!
//! Layout:
//!
//! * [`expr`]: the small expression language sets and vector fields are
//!   written in, with exact symbolic differentiation.
//! * [`geometry`]: closed sets as sublevel-set trees, membership,
//!   projection and boundary sampling.
//! * [`cones`]: contingent, adjacent, Clarke and Dubovitskiy cone
//!   estimators and closed-form polyhedral cones.
//! * [`dynamics`]: polytope-valued maps and standing-assumption checks.
//! * [`simulate`]: RK4 integration of selections with invariance monitors.
//! * [`verify`]: the tangency condition, critical set, assumption checkers
//!   and the final verdict workflow.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod cones;
pub mod dynamics;
pub mod expr;
pub mod geometry;
pub mod linalg;
pub mod rng;
pub mod simulate;
pub mod verify;

pub use cones::{AnalyticCone, ConeConfig, ConeKind, ConeVerdict, Member, PolyCone};
pub use dynamics::{Guard, LipschitzEstimate, Piece, PolytopeMap};
pub use expr::{Expr, ParseError};
pub use geometry::{
    BoxRegion, Membership, ProjectionConfig, ProjectionResult, ProjectionStatus, Region,
    RelativeMode, ScalarField, SetExpr,
};
pub use simulate::{EndReason, Selection, Trajectory};
pub use verify::{System, VerifyConfig};
