use thiserror::Error;

use crate::simplex::LpStatus;
use crate::tree::{NodeId, Violation};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid scenario tree: {}", format_violations(.0))]
    InvalidTree(Vec<Violation>),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("deflator is not strictly positive at node {node} (value {value})")]
    NonPositiveDeflator { node: NodeId, value: f64 },

    /// A one-step arbitrage was found while building a deflator; `direction` is the
    /// portfolio held over the step out of `node`.
    #[error("arbitrage at node {node}")]
    ArbitrageAtNode { node: NodeId, direction: Vec<f64> },

    #[error("one-step arbitrage (direction {direction:?})")]
    OneStepArbitrage { direction: Vec<f64> },

    #[error("market admits an investment-consumption arbitrage")]
    ArbitragePresent,

    #[error("linear program ended with status {0:?}")]
    Lp(LpStatus),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("strategy is not a numeraire: wealth {wealth} at node {node}")]
    NotNumeraire { node: NodeId, wealth: f64 },

    #[error("target cannot be super-replicated from node {node}")]
    NotSuperReplicable { node: NodeId },

    #[error("market is incomplete at node {node}")]
    Incomplete { node: NodeId },

    #[error("non-positive zero-coupon bond price {price} at node {node}")]
    NonPositiveBond { node: NodeId, price: f64 },

    #[error("no strictly positive consumption plan is affordable")]
    NoPositivePlan,

    #[error("measure is not equivalent: edge into node {node} has weight {weight}")]
    NotEquivalent { node: NodeId, weight: f64 },

    #[error("model document: {0}")]
    Model(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
