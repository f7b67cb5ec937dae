//! Scenario runner for the warped-product mean curvature flow laboratory.
//!
//! The binary (`kflow`) wraps this library: `config` parses and validates
//! JSON run configurations, `datagen` produces deterministic seeded initial
//! data, `csvio` reads and writes the CSV trace formats, and `scenario`
//! orchestrates the five scenarios (cap, flow, verify, exhaust,
//! convergence) with the exit-code contract 0/1/2.

// negated comparisons guard against NaN in validation; index loops mirror
// grid structure
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod csvio;
pub mod datagen;
pub mod scenario;
