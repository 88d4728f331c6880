//! Numerical toolkit for conformal moduli of rings and semirings in ℝⁿ,
//! directional dilatations of mappings, and explicit modulus bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dilatation;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod par;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{MapSpec, Matrix, Shape, ShapeKind, Vector};
