//! Adapted and predictable processes on a scenario tree, the self-financing
//! bookkeeping of investment-consumption strategies, and martingale checks.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{dot, Market};
use crate::tree::{NodeId, ScenarioTree};

/// A real number per node. Houses consumption, wealth, deflators, numeraire values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptedScalar {
    pub values: Vec<f64>,
}

impl AdaptedScalar {
    pub fn zeros(len: usize) -> Self {
        AdaptedScalar { values: vec![0.0; len] }
    }

    pub fn constant(len: usize, c: f64) -> Self {
        AdaptedScalar { values: vec![c; len] }
    }

    pub fn from_fn(tree: &ScenarioTree, f: impl FnMut(NodeId) -> f64) -> Self {
        AdaptedScalar { values: (0..tree.len()).map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl From<Vec<f64>> for AdaptedScalar {
    fn from(values: Vec<f64>) -> Self {
        AdaptedScalar { values }
    }
}

impl Index<NodeId> for AdaptedScalar {
    type Output = f64;
    fn index(&self, u: NodeId) -> &f64 {
        &self.values[u]
    }
}

impl IndexMut<NodeId> for AdaptedScalar {
    fn index_mut(&mut self, u: NodeId) -> &mut f64 {
        &mut self.values[u]
    }
}

/// Predictable holdings over `[0, horizon]`.
///
/// The vector stored at a node of time `t - 1` is the portfolio held over `(t - 1, t]`.
/// Nodes at time `horizon` and later hold nothing (the position is liquidated and
/// consumed at the horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    n: usize,
    horizon: usize,
    holdings: Vec<Option<Vec<f64>>>,
}

impl Strategy {
    pub fn zeros(tree: &ScenarioTree, n: usize, horizon: usize) -> Self {
        Strategy::from_fn(tree, n, horizon, |_| vec![0.0; n])
    }

    pub fn from_fn(
        tree: &ScenarioTree,
        n: usize,
        horizon: usize,
        mut f: impl FnMut(NodeId) -> Vec<f64>,
    ) -> Self {
        let holdings = (0..tree.len())
            .map(|u| {
                if tree.time(u) < horizon {
                    let h = f(u);
                    assert_eq!(h.len(), n, "holding dimension");
                    Some(h)
                } else {
                    None
                }
            })
            .collect();
        Strategy { n, horizon, holdings }
    }

    /// Holds the same portfolio at every decision node.
    pub fn buy_and_hold(tree: &ScenarioTree, portfolio: &[f64], horizon: usize) -> Self {
        Strategy::from_fn(tree, portfolio.len(), horizon, |_| portfolio.to_vec())
    }

    pub fn n_assets(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Portfolio chosen at `u`, if `u` is a decision node.
    pub fn at(&self, u: NodeId) -> Option<&[f64]> {
        self.holdings.get(u).and_then(|h| h.as_deref())
    }

    pub fn set(&mut self, u: NodeId, h: Vec<f64>) {
        assert_eq!(h.len(), self.n, "holding dimension");
        assert!(self.holdings[u].is_some(), "node {u} is not a decision node");
        self.holdings[u] = Some(h);
    }

    pub fn decision_nodes(&self) -> impl Iterator<Item = (NodeId, &[f64])> {
        self.holdings.iter().enumerate().filter_map(|(u, h)| h.as_deref().map(|h| (u, h)))
    }

    /// Pre-consumption wealth at `u`: the market value of the portfolio carried into `u`.
    /// At the root this is the value of the first portfolio (pure-investment convention).
    pub fn wealth(&self, market: &Market, u: NodeId) -> f64 {
        let carried = match market.tree.parent(u) {
            Some(p) => self.at(p),
            None => self.at(u),
        };
        carried.map_or(0.0, |h| dot(h, market.price(u)))
    }

    pub fn scaled(&self, k: f64) -> Strategy {
        self.map(|h| h.iter().map(|x| x * k).collect())
    }

    pub fn add(&self, other: &Strategy) -> Result<Strategy> {
        if other.n != self.n || other.horizon != self.horizon {
            return Err(Error::Dimension("strategies differ in assets or horizon".into()));
        }
        let mut out = self.clone();
        for (u, h) in out.holdings.iter_mut().enumerate() {
            if let (Some(a), Some(b)) = (h.as_mut(), other.holdings[u].as_ref()) {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
        }
        Ok(out)
    }

    pub fn map(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Strategy {
        Strategy {
            n: self.n,
            horizon: self.horizon,
            holdings: self.holdings.iter().map(|h| h.as_deref().map(&mut f)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Strategy) -> f64 {
        self.decision_nodes()
            .filter_map(|(u, a)| other.at(u).map(|b| (a, b)))
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Wealth and consumption generated by a strategy from an initial capital.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthDecomposition {
    pub wealth: AdaptedScalar,
    pub consumption: AdaptedScalar,
    pub x0: f64,
    pub horizon: usize,
}

/// Consumption stream of `h` started with capital `x0`.
///
/// `C_0 = x0 - H_1·P_0`, `C_t = (H_t - H_{t+1})·P_t` for `0 < t < T` and
/// `C_T = H_T·P_T`; wealth is `X_t = H_t·P_t` and `X_0 = x0`. Nodes beyond the
/// strategy horizon carry zero.
pub fn consumption_of(market: &Market, h: &Strategy, x0: f64) -> Result<WealthDecomposition> {
    let tree = &market.tree;
    if h.n_assets() != market.n_assets() {
        return Err(Error::Dimension(format!(
            "strategy has {} assets, market has {}",
            h.n_assets(),
            market.n_assets()
        )));
    }
    market.check_horizon(h.horizon())?;
    let horizon = h.horizon();
    let mut wealth = AdaptedScalar::zeros(tree.len());
    let mut consumption = AdaptedScalar::zeros(tree.len());
    for u in tree.nodes_upto(horizon) {
        let p = market.price(u);
        let x = match tree.parent(u) {
            None => x0,
            Some(par) => dot(h.at(par).expect("decision node"), p),
        };
        let next = h.at(u).map_or(0.0, |hu| dot(hu, p));
        wealth[u] = x;
        consumption[u] = x - next;
    }
    Ok(WealthDecomposition { wealth, consumption, x0, horizon })
}

/// True iff all consumption up to the horizon is at least `-tol`.
pub fn is_self_financing(decomp: &WealthDecomposition, tol: f64) -> bool {
    decomp.consumption.values.iter().all(|&c| c >= -tol)
}

/// Largest one-step martingale defect `|E[v(children) | u] - v(u)|` over nodes before `horizon`.
pub fn martingale_residual(tree: &ScenarioTree, values: &[f64], horizon: usize) -> f64 {
    tree.decision_nodes(horizon)
        .into_iter()
        .map(|u| (tree.cond_expect(u, |c| values[c]) - values[u]).abs())
        .fold(0.0, f64::max)
}

/// Martingale defect of a scalar process over the whole tree.
pub fn check_martingale(tree: &ScenarioTree, process: &AdaptedScalar) -> f64 {
    martingale_residual(tree, &process.values, tree.horizon())
}

/// Component-wise martingale defect of a vector-valued process `f(u)`.
pub fn check_martingale_vec<'a>(
    tree: &ScenarioTree,
    horizon: usize,
    f: impl Fn(NodeId) -> &'a [f64],
) -> f64 {
    let mut worst = 0.0f64;
    for u in tree.decision_nodes(horizon) {
        let here = f(u);
        for (i, &v) in here.iter().enumerate() {
            let e = tree.cond_expect(u, |c| f(c)[i]);
            worst = worst.max((e - v).abs());
        }
    }
    worst
}

/// Martingale defect of the deflated price process `P·Y` up to `horizon`.
pub fn deflated_price_residual(market: &Market, y: &[f64], horizon: usize) -> f64 {
    let tree = &market.tree;
    let mut worst = 0.0f64;
    for u in tree.decision_nodes(horizon) {
        let pu = market.price(u);
        for i in 0..market.n_assets() {
            let e = tree.cond_expect(u, |c| market.price(c)[i] * y[c]);
            worst = worst.max((e - pu[i] * y[u]).abs());
        }
    }
    worst
}

/// `M_t = X_t Y_t + Σ_{s<t} C_s Y_s` along each path.
///
/// For a martingale deflator `Y` and a self-financing `h`, `M` is a martingale.
pub fn deflated_wealth_process(
    market: &Market,
    h: &Strategy,
    y: &AdaptedScalar,
    x0: f64,
) -> Result<AdaptedScalar> {
    let tree = &market.tree;
    let decomp = consumption_of(market, h, x0)?;
    let nodes = tree.nodes_upto(decomp.horizon);
    if let Some(&u) = nodes.iter().find(|&&u| !(y[u] > 0.0)) {
        return Err(Error::NonPositiveDeflator { node: u, value: y[u] });
    }
    // running[u] = Σ_{s < t} C_s Y_s along the path into u
    let mut running = vec![0.0; tree.len()];
    let mut m = AdaptedScalar::zeros(tree.len());
    for &u in &nodes {
        running[u] = match tree.parent(u) {
            None => 0.0,
            Some(p) => running[p] + decomp.consumption[p] * y[p],
        };
        m[u] = decomp.wealth[u] * y[u] + running[u];
    }
    Ok(m)
}

/// `E[Σ_{t ≤ T} C_t Y_t]`, which equals `X_0 Y_0` for any deflator.
pub fn deflated_consumption_value(market: &Market, decomp: &WealthDecomposition, y: &[f64]) -> f64 {
    market
        .tree
        .nodes_upto(decomp.horizon)
        .into_iter()
        .map(|u| market.tree.prob(u) * decomp.consumption[u] * y[u])
        .sum()
}

/// Wealth process of a numeraire strategy up to `horizon`.
///
/// Fails unless `eta` is pure-investment (zero consumption at `1..horizon`, within
/// `tol` relative to the price scale) with strictly positive wealth at every node.
pub fn numeraire_values(
    market: &Market,
    eta: &Strategy,
    horizon: usize,
    tol: f64,
) -> Result<AdaptedScalar> {
    if eta.horizon() < horizon {
        return Err(Error::InvalidArgument(format!(
            "numeraire horizon {} shorter than {horizon}",
            eta.horizon()
        )));
    }
    let tree = &market.tree;
    let scale = market.price_scale();
    let mut n = AdaptedScalar::zeros(tree.len());
    for u in tree.nodes_upto(horizon) {
        let w = eta.wealth(market, u);
        if !(w > 0.0) {
            return Err(Error::NotNumeraire { node: u, wealth: w });
        }
        if tree.time(u) >= 1 && tree.time(u) < horizon {
            let next = dot(eta.at(u).expect("decision node"), market.price(u));
            if (w - next).abs() > tol * scale * (1.0 + w.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "numeraire consumes {} at node {u}",
                    w - next
                )));
            }
        }
        n[u] = w;
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn consume_everything_at_time_zero() {
        let m = fixtures::constant_market(2, 1.0);
        let h = Strategy::zeros(&m.tree, 1, 2);
        let d = consumption_of(&m, &h, 1.0).unwrap();
        assert_eq!(d.consumption[0], 1.0);
        assert!(m.tree.nodes_upto(2).iter().skip(1).all(|&u| d.consumption[u] == 0.0));
        let y = AdaptedScalar::constant(m.tree.len(), 1.0);
        let mm = deflated_wealth_process(&m, &h, &y, 1.0).unwrap();
        assert!(mm.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn fully_invested_binomial() {
        let m = fixtures::binomial_stock_cash();
        let h = Strategy::buy_and_hold(&m.tree, &[1.0, 0.0], 1);
        let d = consumption_of(&m, &h, 1.0).unwrap();
        assert_eq!(d.consumption[0], 0.0);
        assert!(is_self_financing(&d, 1e-12));
    }

    #[test]
    fn bubble_short_sale_consumes_one() {
        let m = fixtures::bubble(3);
        let h = Strategy::buy_and_hold(&m.tree, &[-1.0], 3);
        let d = consumption_of(&m, &h, 0.0).unwrap();
        assert_eq!(d.consumption[0], 1.0);
        assert!(d.consumption.values[1..].iter().all(|&c| c == 0.0));
        assert!(is_self_financing(&d, 0.0));
    }

    #[test]
    fn self_financing_flags_negative_consumption() {
        let mut d = consumption_of(
            &fixtures::binomial_stock_cash(),
            &Strategy::zeros(&fixtures::binomial_stock_cash().tree, 2, 1),
            0.0,
        )
        .unwrap();
        assert!(is_self_financing(&d, 1e-9));
        d.consumption[0] = 1.0;
        assert!(is_self_financing(&d, 1e-9));
        d.consumption[1] = -0.5;
        assert!(!is_self_financing(&d, 1e-9));
    }

    #[test]
    fn martingale_checks() {
        let m = fixtures::binomial_stock_cash();
        let stock: Vec<f64> = (0..3).map(|u| m.price(u)[1]).collect();
        let c = AdaptedScalar::constant(3, 4.2);
        assert_eq!(check_martingale(&m.tree, &c), 0.0);
        // 0.5*2 + 0.5*0.5 - 1
        assert!((martingale_residual(&m.tree, &stock, 1) - 0.25).abs() < 1e-15);
        let q = m.tree.with_cond_probs(&[1.0, 1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert!(martingale_residual(&q, &stock, 1) < 1e-15);
        assert!((check_martingale_vec(&m.tree, 1, |u| m.price(u)) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn non_deflator_breaks_deflated_wealth() {
        let m = fixtures::binomial_stock_cash();
        let h = Strategy::buy_and_hold(&m.tree, &[0.0, 1.0], 1);
        let y = AdaptedScalar::constant(3, 1.0);
        let mm = deflated_wealth_process(&m, &h, &y, 1.0).unwrap();
        assert!((check_martingale(&m.tree, &mm) - 0.25).abs() < 1e-15);
        let bad = AdaptedScalar::from(vec![1.0, 0.0, 1.0]);
        assert!(matches!(
            deflated_wealth_process(&m, &h, &bad, 1.0),
            Err(Error::NonPositiveDeflator { node: 1, .. })
        ));
    }

    #[test]
    fn unique_deflator_makes_any_wealth_a_martingale() {
        let m = fixtures::binomial_stock_cash();
        let y = AdaptedScalar::from(vec![1.0, 2.0 / 3.0, 4.0 / 3.0]);
        for hv in [[0.3, -1.2], [2.0, 0.5], [-1.0, 1.0]] {
            let h = Strategy::buy_and_hold(&m.tree, &hv, 1);
            let x0 = dot(&hv, m.price(0)) + 0.7;
            let mm = deflated_wealth_process(&m, &h, &y, x0).unwrap();
            assert!(check_martingale(&m.tree, &mm) < 1e-14);
            let d = consumption_of(&m, &h, x0).unwrap();
            assert!((deflated_consumption_value(&m, &d, &y.values) - x0).abs() < 1e-14);
        }
    }
}
