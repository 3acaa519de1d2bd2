//! Small hand-built markets used in tests, examples and the CLI.

use crate::market::{Market, PriceSystem};
use crate::tree::{uniform_tree, Node, ScenarioTree};

fn market(tree: ScenarioTree, prices: Vec<Vec<f64>>, names: &[&str]) -> Market {
    Market::new(tree, PriceSystem::new(prices).expect("fixture prices"))
        .expect("fixture market")
        .with_assets(names.iter().map(|s| s.to_string()).collect())
        .expect("fixture names")
}

/// Cash (always 1) and a stock moving 1 → {2, 0.5} with probabilities ½.
///
/// The unique deflator is `Y = (1; 2/3, 4/3)`.
pub fn binomial_stock_cash() -> Market {
    let tree = uniform_tree(1, &[0.5, 0.5]).expect("tree");
    market(tree, vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 0.5]], &["cash", "stock"])
}

/// Payoff of the call paying 1 in the up state and 0 in the down state of
/// [`binomial_stock_cash`], by node id.
pub fn binomial_call_payoff() -> Vec<f64> {
    vec![0.0, 1.0, 0.0]
}

/// Cash and a stock moving 1 → {2, 1, 0.5} with probabilities ⅓. Incomplete.
pub fn trinomial_stock_cash() -> Market {
    let t = 1.0 / 3.0;
    let tree = uniform_tree(1, &[t, t, 1.0 - 2.0 * t]).expect("tree");
    market(
        tree,
        vec![vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 1.0], vec![1.0, 0.5]],
        &["cash", "stock"],
    )
}

/// One stock moving 1 → {2, 1, 0.5} with probabilities ⅓, no cash.
pub fn trinomial_single_asset() -> Market {
    let t = 1.0 / 3.0;
    let tree = uniform_tree(1, &[t, t, 1.0 - 2.0 * t]).expect("tree");
    market(tree, vec![vec![1.0], vec![2.0], vec![1.0], vec![0.5]], &["stock"])
}

/// A zero-coupon bond priced 0.9 paying 1, and the binomial stock.
pub fn binomial_stock_bond() -> Market {
    let tree = uniform_tree(1, &[0.5, 0.5]).expect("tree");
    market(tree, vec![vec![0.9, 1.0], vec![1.0, 2.0], vec![1.0, 0.5]], &["bond", "stock"])
}

/// One asset priced `1_{t < τ}` with `τ ≡ horizon`, on a binary tree with
/// probabilities ½. The asset dies at the horizon on every path.
pub fn bubble(horizon: usize) -> Market {
    let tree = uniform_tree(horizon, &[0.5, 0.5]).expect("tree");
    let prices = tree
        .nodes()
        .iter()
        .map(|n| vec![if n.time < horizon { 1.0 } else { 0.0 }])
        .collect();
    market(tree, prices, &["bubble"])
}

/// Cash and an asset that moves 1 → 2 for sure: buying the asset with borrowed
/// cash locks in a gain of 1 at time 1.
pub fn sure_gain() -> Market {
    let tree = ScenarioTree::new(vec![Node::root(), Node::child(0, 1, 1.0)]).expect("tree");
    market(tree, vec![vec![1.0, 1.0], vec![1.0, 2.0]], &["cash", "asset"])
}

/// A single asset growing 1 → 2 with no other asset. Not an arbitrage without a
/// store of value: `Y_1 = 1/2` deflates it.
pub fn single_asset_growth() -> Market {
    let tree = ScenarioTree::new(vec![Node::root(), Node::child(0, 1, 1.0)]).expect("tree");
    market(tree, vec![vec![1.0], vec![2.0]], &["asset"])
}

/// One asset with constant price `c` on a binary tree of the given horizon.
pub fn constant_market(horizon: usize, c: f64) -> Market {
    let tree = uniform_tree(horizon, &[0.5, 0.5]).expect("tree");
    let prices = vec![vec![c]; tree.len()];
    market(tree, prices, &["asset"])
}
