//! Interior-penalty discontinuous Galerkin solver for the two-dimensional
//! advection-diffusion-reaction model of air pollutant transport
//!
//! ```text
//! u_t + (c u)_x + (e u)_y - (kx u_x)_x - (ky u_y)_y = -(k1 + k2) u + E + Q(u)
//! ```
//!
//! on a rectangle with homogeneous Dirichlet data, plus the verification
//! tooling (manufactured solutions, coercivity and consistency probes) used
//! to check the discretization.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod expr;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod model;
pub mod solver;
pub mod space;

pub use error::{Error, Result};
