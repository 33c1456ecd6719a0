//! Hybrid channel model for terahertz urban macrocells.
//!
//! Dominant paths are ray traced over extruded building footprints and
//! attenuated according to an angular foliage mask derived from a panorama.
//! Weaker multipath is generated statistically per link state. The crate
//! also characterizes the resulting channels and evaluates link coverage.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characterization;
pub mod error;
pub mod foliage;
pub mod geometry;
pub mod io;
pub mod link;
pub mod model;
pub mod raytrace;
pub mod scene;
pub mod seed;
pub mod stochastic;
pub mod synthesis;

pub use error::{Error, Result};
pub use geometry::{Direction, Vec3};
pub use scene::Scene;
pub use stochastic::{LinkState, StateParamSet};
