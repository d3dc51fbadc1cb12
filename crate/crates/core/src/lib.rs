//! Optimal experiment design for identifying moisture transport coefficients
//! of porous building materials.
//!
//! The crate solves the one-dimensional moisture transport equation in a slab,
//! computes sensitivity fields of the vapour pressure to the transport
//! coefficients, ranks boundary designs and sensor positions with a D-optimality
//! criterion and estimates coefficients from measured or synthetic data.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod inverse;
pub mod material;
pub mod oed;
pub mod sensitivity;
pub mod solver;

pub use error::{Error, Result};
pub use material::{MaterialModel, Parameter, SorptionCurve, TransportCoefficients};
pub use solver::{BoundaryDesign, FieldSolution, Grid1D, HumidityStep, Scaling, Tolerances};
