//! Fully nonlinear expanding curvature flows of convex and nonconvex
//! hypersurfaces: speed functions, modulators, structural inequality checks,
//! ball curvature diagnostics and reference flow solvers.

pub mod ball;
pub mod curve;
pub mod error;
pub mod flow;
pub mod io;
pub mod lab;
pub mod linalg;
pub mod names;
pub mod psi;
pub mod rng;
pub mod speed;
pub mod surface;

pub use error::{Error, Result};
