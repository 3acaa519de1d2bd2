use crate::arbitrage::HoldingVars;
use crate::deflator::deflator_lp;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, rank};
use crate::market::{dot, Market};
use crate::process::{AdaptedScalar, Strategy};
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};

/// A pure-investment strategy with wealth at least 1 at every node, of least
/// initial cost, if one exists.
pub fn find_numeraire(market: &Market) -> Result<Option<Strategy>> {
    let tree = &market.tree;
    let horizon = tree.horizon();
    let vars = HoldingVars::new(market, horizon, 0);
    let mut lp = LinearProgram::new(Sense::Minimize, vars.count);
    vars.free_all(&mut lp);
    let root = tree.root();
    for i in 0..market.n_assets() {
        lp.objective[vars.var(root, i).unwrap()] = market.price(root)[i];
    }
    for u in tree.time_order() {
        let p = market.price(u);
        // wealth carried into u (the first portfolio at the root)
        let holder = tree.parent(u).unwrap_or(u);
        let wealth: Vec<(usize, f64)> =
            (0..market.n_assets()).map(|i| (vars.var(holder, i).unwrap(), p[i])).collect();
        lp.add_row(wealth, Relation::Ge, 1.0);
        let t = tree.time(u);
        if t >= 1 && t < horizon {
            lp.add_row(vars.consumption_row(market, u), Relation::Eq, 0.0);
        }
    }
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => Ok(Some(vars.strategy(market, horizon, &sol.x))),
        LpStatus::Infeasible => Ok(None),
        other => Err(Error::Lp(other)),
    }
}

/// Rolled-over one-period bond: `β` is the value of one unit invested at time 0,
/// `η` the strategy realizing it.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskFreeNumeraire {
    pub beta: AdaptedScalar,
    pub eta: Strategy,
    /// Price at each non-leaf node of the bond paying 1 at every child.
    pub bond_price: AdaptedScalar,
}

/// Builds the risk-free numeraire of a complete arbitrage-free market.
///
/// At each non-leaf node `u` the bond paying 1 at every child is replicated by
/// `h_u`, with price `B(u) = h_u·P_u`. Then `β(c) = β(u) / B(u)` for each child
/// (so `β` is the same across siblings) and `η(u) = β(c) h_u`.
pub fn build_riskfree_numeraire(market: &Market) -> Result<RiskFreeNumeraire> {
    let tree = &market.tree;
    let n = market.n_assets();
    let horizon = tree.horizon();
    let nodes = tree.decision_nodes(horizon);
    for &u in &nodes {
        let rows: Vec<&[f64]> = tree.children(u).iter().map(|&c| market.price(c)).collect();
        if rank(&rows, n) < rows.len() {
            return Err(Error::Incomplete { node: u });
        }
    }
    if deflator_lp(market)?.is_none() {
        return Err(Error::ArbitragePresent);
    }
    let mut beta = AdaptedScalar::zeros(tree.len());
    let mut bond_price = AdaptedScalar::zeros(tree.len());
    let mut bond: Vec<Vec<f64>> = vec![Vec::new(); tree.len()];
    beta[tree.root()] = 1.0;
    for &u in &nodes {
        let kids = tree.children(u);
        let rows: Vec<&[f64]> = kids.iter().map(|&c| market.price(c)).collect();
        let (h, _) = least_squares(&rows, n, &vec![1.0; kids.len()]);
        let b = dot(&h, market.price(u));
        if !(b > 0.0) {
            return Err(Error::NonPositiveBond { node: u, price: b });
        }
        bond_price[u] = b;
        let next = beta[u] / b;
        for &c in kids {
            beta[c] = next;
        }
        bond[u] = h;
    }
    let eta = Strategy::from_fn(tree, n, horizon, |u| {
        let k = beta[tree.children(u)[0]];
        bond[u].iter().map(|x| x * k).collect()
    });
    Ok(RiskFreeNumeraire { beta, eta, bond_price })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::market::PriceSystem;
    use crate::process::consumption_of;

    #[test]
    fn cash_is_a_numeraire() {
        let m = fixtures::binomial_stock_cash();
        let eta = find_numeraire(&m).unwrap().unwrap();
        let h = eta.at(0).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-12 && h[1].abs() < 1e-12);
    }

    #[test]
    fn dying_asset_is_not() {
        assert!(find_numeraire(&fixtures::bubble(2)).unwrap().is_none());
    }

    #[test]
    fn sum_of_two_vanishing_assets() {
        let tree = crate::tree::uniform_tree(1, &[0.5, 0.5]).unwrap();
        let prices = PriceSystem::new(vec![vec![1.0, 1.0], vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let m = Market::new(tree, prices).unwrap();
        let eta = find_numeraire(&m).unwrap().unwrap();
        for u in 0..3 {
            assert!(eta.wealth(&m, u) >= 1.0 - 1e-12);
        }
        let h = eta.at(0).unwrap();
        assert!((h[0] - 0.5).abs() < 1e-12 && (h[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cash_gives_zero_rate() {
        let m = fixtures::binomial_stock_cash();
        let rf = build_riskfree_numeraire(&m).unwrap();
        assert!(rf.beta.values.iter().all(|&b| (b - 1.0).abs() < 1e-14));
        let h = rf.eta.at(0).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-14 && h[1].abs() < 1e-14);
    }

    #[test]
    fn discount_bond_rate() {
        let m = fixtures::binomial_stock_bond();
        let rf = build_riskfree_numeraire(&m).unwrap();
        assert!((rf.bond_price[0] - 0.9).abs() < 1e-14);
        assert!((rf.beta[1] - 1.0 / 0.9).abs() < 1e-14);
        assert_eq!(rf.beta[1], rf.beta[2]);
        let d = consumption_of(&m, &rf.eta, 1.0).unwrap();
        assert!(d.consumption[0].abs() < 1e-14);
        for u in 1..3 {
            assert!((rf.eta.wealth(&m, u) - rf.beta[u]).abs() < 1e-14);
        }
    }

    #[test]
    fn incomplete_market_is_rejected() {
        assert!(matches!(
            build_riskfree_numeraire(&fixtures::trinomial_stock_cash()),
            Err(Error::Incomplete { node: 0 })
        ));
    }
}
