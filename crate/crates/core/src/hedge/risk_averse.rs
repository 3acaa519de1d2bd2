use crate::error::{Error, Result};
use crate::expsum::{ExpOutcome, ExpSum, ExpTerm, NewtonOptions};
use crate::market::{dot, Market};
use crate::process::{AdaptedScalar, Strategy};

use super::has_target;

/// Minimizers of the exponential hedging criterion at every non-leaf node.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskAverseHedge {
    pub gamma: f64,
    pub strategy: Strategy,
    /// `min (H·P_c - ξ_c)` over all nodes `c` after the root.
    pub shortfall: f64,
    /// Initial cost `H_1·P_0`.
    pub cost: f64,
}

/// At each non-leaf node `u` minimizes
/// `exp(-γ(ξ_u - h·P_u)) + Σ_c q_c exp(-γ(h·P_c - ξ_c)) ζ_c`,
/// `ζ_c = exp(-(‖P_c‖² + ξ_c²) / 2)`. `xi` must be finite at every node.
pub fn risk_averse_hedge(market: &Market, xi: &AdaptedScalar, gamma: f64) -> Result<RiskAverseHedge> {
    let tree = &market.tree;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("risk aversion {gamma} must be positive")));
    }
    if xi.len() != tree.len() {
        return Err(Error::Dimension(format!("target has {} values", xi.len())));
    }
    if let Some(u) = (0..tree.len()).find(|&u| !has_target(xi, u) || !xi[u].is_finite()) {
        return Err(Error::InvalidArgument(format!("target at node {u} must be finite")));
    }
    let n = market.n_assets();
    let horizon = tree.horizon();
    let mut holdings: Vec<Vec<f64>> = vec![Vec::new(); tree.len()];
    for u in tree.decision_nodes(horizon) {
        let f = objective(market, xi, gamma, u);
        holdings[u] = match f.minimize(&NewtonOptions::default()) {
            ExpOutcome::Minimum(m) => m.h,
            ExpOutcome::Unbounded { direction, .. } => {
                return Err(Error::ArbitrageAtNode { node: u, direction })
            }
            ExpOutcome::Stalled { .. } => {
                return Err(Error::Numerical(format!("hedging criterion stalled at node {u}")))
            }
        };
    }
    let strategy = Strategy::from_fn(tree, n, horizon, |u| std::mem::take(&mut holdings[u]));
    let shortfall = tree
        .time_order()
        .skip(1)
        .map(|c| dot(strategy.at(tree.parent(c).unwrap()).unwrap(), market.price(c)) - xi[c])
        .fold(f64::INFINITY, f64::min);
    let root = tree.root();
    let cost = dot(strategy.at(root).unwrap(), market.price(root));
    Ok(RiskAverseHedge { gamma, strategy, shortfall, cost })
}

fn objective(market: &Market, xi: &AdaptedScalar, gamma: f64, u: usize) -> ExpSum {
    let tree = &market.tree;
    let pu = market.price(u);
    let mut terms = vec![ExpTerm { log_weight: -gamma * xi[u], v: pu.iter().map(|x| gamma * x).collect() }];
    for &c in tree.children(u) {
        let pc = market.price(c);
        let log_zeta = -0.5 * (dot(pc, pc) + xi[c] * xi[c]);
        terms.push(ExpTerm {
            log_weight: tree.cond_prob(c).ln() + log_zeta + gamma * xi[c],
            v: pc.iter().map(|x| -gamma * x).collect(),
        });
    }
    ExpSum::new(market.n_assets(), terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deflator::{rogers_one_step, OneStepProblem};
    use crate::fixtures;

    fn call_target() -> AdaptedScalar {
        AdaptedScalar::from(vec![1.0 / 3.0, 1.0, 0.0])
    }

    #[test]
    fn zero_target_recovers_the_deflator_minimizer() {
        let m = fixtures::binomial_stock_cash();
        let xi = AdaptedScalar::zeros(3);
        let step = rogers_one_step(&OneStepProblem::at_node(&m, 0), &[1.0, 1.0]).unwrap();
        for gamma in [1.0, 3.0] {
            let r = risk_averse_hedge(&m, &xi, gamma).unwrap();
            let h = r.strategy.at(0).unwrap();
            for i in 0..2 {
                assert!((gamma * h[i] - step.h[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shortfall_shrinks_with_risk_aversion() {
        let m = fixtures::binomial_stock_cash();
        let xi = call_target();
        let mut last = f64::NEG_INFINITY;
        for k in 0..=8 {
            let r = risk_averse_hedge(&m, &xi, f64::from(1 << k)).unwrap();
            assert!(r.shortfall >= last - 1e-9);
            last = r.shortfall;
        }
        assert!(last >= -1e-2);
    }
}
