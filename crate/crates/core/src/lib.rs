//! Numerical laboratory for one-parameter semigroups of self-maps of a
//! domain: localized Lipschitz moduli, generator extraction by certified
//! difference quotients, and path-length geometry of domains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod expr;
pub mod generator;
pub mod lp;
pub mod moduli;
pub mod norm;
pub mod semigroup;

pub use error::{Error, Result};
pub use norm::Norm;

pub type Point = nalgebra::DVector<f64>;
pub type Operator = nalgebra::DMatrix<f64>;
