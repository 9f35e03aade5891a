//! Extinction probabilities of a spatially inhomogeneous random walk on the
//! positive quadrant.
//!
//! A population of two compatible genotypes is modelled by the counts
//! `(i, j)`; the walk is absorbed when either count hits zero. The
//! probability `p_{i,j}` of absorption is computed three independent ways:
//!
//! * [`grid`]: the Dirichlet recurrence on a truncated grid, closed at the
//!   outer boundary by the large-index expansions of [`asymptotics`];
//! * [`greens`]: the generating function `P(x, y) = sum p_{i,j} x^i y^j`
//!   evaluated by quadrature along the closed-form characteristic curves of
//!   [`characteristics`];
//! * [`montecarlo`]: direct simulation of the embedded chain.
//!
//! [`harness`] compares the fields and drives the reproducible experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod characteristics;
pub mod error;
pub mod field;
pub mod greens;
pub mod grid;
pub mod harness;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod quadrature;

pub use error::{Error, Result};
pub use field::Field;
pub use model::{ModelParams, State};
