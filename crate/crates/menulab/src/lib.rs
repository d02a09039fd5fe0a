//! menulab: a numerical laboratory for optimal two-item, single-buyer
//! mechanism design.
//!
//! The crate computes exact optimal mechanisms on discretized valuation grids
//! via a full-pairwise-IC linear program, evaluates seller revenue both
//! directly and through a boundary (Green's theorem) representation, and
//! checks the structural properties that hold under power-rate conditions on
//! the valuation densities: menu monotonicity, revenue monotonicity under
//! stochastic dominance, small-menu bounds, and allocation-region geometry.

pub mod baselines;
pub mod cli;
pub mod constructive;
pub mod csvio;
pub mod distributions;
pub mod error;
pub mod grid;
pub mod lp_solver;
pub mod mechanism;
pub mod menu_analysis;
pub mod numerics;
pub mod parametric;

pub use error::{Error, Result};
