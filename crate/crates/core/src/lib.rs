//! Spin physics and EPR simulation for optically pumped high-spin defects.
//!
//! Fields are in gauss, frequencies in MHz unless a name says GHz, times in
//! microseconds unless a name says ns.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cw;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod noise;
pub mod peldor;
pub mod pulse;
pub mod pump;
pub mod quadrature;
pub mod spectrum;
pub mod spin;
pub mod swr;
pub mod units;

pub use error::{Error, Result};
pub use spectrum::{AxisKind, LineShape, LineShapeKind, Spectrum};
pub use spin::{FieldOrientation, Spin, SpinHamiltonian, SpinSystem};
