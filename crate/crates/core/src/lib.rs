//! Adaptive isogeometric Galerkin boundary element methods for the 2D
//! Laplace equation.
//!
//! The boundary is a NURBS curve; discrete spaces are (rational) splines on
//! refinements of the curve's knot vector. Both the weakly-singular equation
//! (single-layer operator `V`) and the hyper-singular equation (operator `W`,
//! assembled through Maue's formula) are supported, together with
//! node-based a-posteriori estimators and adaptive refinement that can
//! raise knot multiplicities.

pub mod adaptivity;
pub mod assembly;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod geometry;
pub mod quadrature;
pub mod splines;

pub use error::{Error, Result};
