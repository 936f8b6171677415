//! Non-local calculus on finite weighted graphs of computed states, and
//! identification of parsimonious reduced-order models on top of it.
//!
//! States of a physical system (volume averages, energies, strains) become the
//! vertices of a fully connected [`StateGraph`]. Radially symmetric edge
//! weights from [`kernels`] are scaled so that coordinate unit vectors are
//! normalized, which makes the non-local partial derivatives in [`calculus`]
//! consistent with their differential counterparts to leading order. Those
//! derivatives feed the operator bases in [`basis`] (polynomial first-order
//! dynamics and modified Taylor series), and [`regression`] prunes them by
//! backwards stepwise regression with an F-test.
//!
//! [`error_lab`] reproduces the one-dimensional error analysis of the modified
//! Taylor series: closed-form derivative errors via Faulhaber sums, the fitted
//! linear coefficient and its limit, and empirical convergence orders.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod basis;
pub mod calculus;
mod error;
pub mod error_lab;
pub mod kernels;
mod numeric;
#[cfg(test)]
mod oracle;
pub mod preprocess;
pub mod regression;
pub mod state_graph;

pub use error::{Error, Result};
pub use kernels::{WeightConfig, WeightFamily, WeightSpec};
pub use state_graph::{StateGraph, StateVector};

/// Dense matrix type used for design matrices and Gram reports.
pub type Matrix = nalgebra::DMatrix<f64>;
