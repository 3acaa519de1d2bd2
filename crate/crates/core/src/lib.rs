//! Numeraire-free arbitrage analysis on finite scenario trees.
//!
//! Markets are finite event trees with a price vector at every node. No asset is
//! assumed positive and no numeraire is assumed to exist. The crate detects
//! investment-consumption, terminal-consumption and pure-investment arbitrage,
//! builds martingale deflators (products of one-step convex minimizers, or by
//! linear programming), prices and hedges by super-replication, analyses
//! completeness, and checks the deflator characterization of optimal
//! consumption plans.

// `!(x > 0.0)` is used on purpose (it also rejects NaN); index loops read like the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod arbitrage;
pub mod bubble;
pub mod deflator;
pub mod error;
pub mod expsum;
pub mod fixtures;
pub mod gen;
pub mod hedge;
pub mod linalg;
pub mod market;
pub mod model;
pub mod par;
pub mod process;
pub mod simplex;
pub mod sweep;
pub mod tol;
pub mod tree;
pub mod utility;

pub use error::{Error, Result};
pub use market::{Market, PriceSystem};
pub use par::Execution;
pub use process::{AdaptedScalar, Strategy, WealthDecomposition};
pub use tree::{NodeId, ScenarioTree};
