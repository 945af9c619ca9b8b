//! Stationary discrete-velocity Boltzmann boundary-value problems on strictly
//! convex planar domains.
//!
//! The crate builds approximate solutions by damping, mollification and
//! truncation, solves each regularized problem with a monotone
//! exponential-form iteration inside a Picard loop, removes the damping and
//! the truncation by continuation, and checks the resulting fields with a
//! diagnostics suite (mass, fluxes, entropy, entropy dissipation,
//! exceptional sets and translation moduli).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod collision;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod model;
pub mod solver;

pub use error::{DvmError, Result};
pub use fields::{BoundaryData, Field, Grid};
pub use geometry::{CharacteristicSegment, ConvexDomain, DomainSpec};
pub use model::{CollisionRule, VelocityModel};

/// Planar vector type used throughout.
pub type Vec2 = nalgebra::Vector2<f64>;
