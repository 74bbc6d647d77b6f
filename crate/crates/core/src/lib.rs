//! Numerical toolkit for Randers metrics given by navigation data `(h, W)` on
//! the Clifford-Wolf homogeneous model spaces: Euclidean spaces, odd spheres,
//! SU(2) with a bi-invariant metric, and their Riemannian products.
//!
//! The crate is organised bottom-up:
//!
//! - [`space`]: model Riemannian manifolds with closed-form geodesics and distances.
//! - [`killing`]: Killing field generators, exact flows, brackets, and the
//!   constant-length families that commute with a wind.
//! - [`randers`]: the navigation and defining forms of a Randers metric, the
//!   conversions between them, the Finsler norm and its fundamental tensor.
//! - [`geodesic`]: Finsler geodesics (flow curves and an independent ODE
//!   integrator) and the asymmetric distance function.
//! - [`oracle`]: a brute-force shortest-path oracle on an epsilon-net graph.
//! - [`cw`]: executable checks for Clifford-Wolf translations and direction
//!   exhaustion.
//! - [`acceptance`]: the acceptance criteria, shared by the test suite and
//!   the `selftest` command.
//!
//! Sign convention: the indicatrix of `F` is the `h`-unit sphere translated by
//! `+W`, so the unit-speed Killing fields of `F` used throughout are `X + W`
//! with `X` an `h`-unit Killing field commuting with `W`.

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod cw;
mod error;
pub mod geodesic;
pub mod killing;
pub mod optimize;
pub mod oracle;
pub mod quat;
pub mod randers;
pub mod sampling;
pub mod space;

pub use error::{Error, Result};
pub use killing::{ConstantLengthFamily, KillingField};
pub use randers::NavigationData;
pub use space::{Point, SpaceDescriptor, Tangent};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
