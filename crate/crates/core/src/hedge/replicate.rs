use crate::linalg::least_squares;
use crate::market::{dot, Market};
use crate::process::{AdaptedScalar, Strategy};

/// A pure-investment strategy whose wealth equals a terminal payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub strategy: Strategy,
    /// Wealth `H·P` at every node; equals the payoff at the leaves.
    pub value: AdaptedScalar,
}

/// Exact replication of `payoff` (indexed by node id, read at the leaves), solved
/// backward node by node. `None` when some node's system `h·P_c = X_c` is inconsistent.
pub fn replicate(market: &Market, payoff: &[f64]) -> Option<Replication> {
    let tree = &market.tree;
    let n = market.n_assets();
    let horizon = tree.horizon();
    let mut value = AdaptedScalar::zeros(tree.len());
    for &u in tree.level(horizon) {
        value[u] = payoff[u];
    }
    let mut holdings: Vec<Vec<f64>> = vec![Vec::new(); tree.len()];
    for t in (0..horizon).rev() {
        for &u in tree.level(t) {
            let kids = tree.children(u);
            let rows: Vec<&[f64]> = kids.iter().map(|&c| market.price(c)).collect();
            let rhs: Vec<f64> = kids.iter().map(|&c| value[c]).collect();
            let (h, resid) = least_squares(&rows, n, &rhs);
            let scale = rows
                .iter()
                .flat_map(|r| r.iter())
                .chain(&rhs)
                .fold(1.0f64, |m, x| m.max(x.abs()));
            if resid > market.tol.eq * scale {
                return None;
            }
            value[u] = dot(&h, market.price(u));
            holdings[u] = h;
        }
    }
    let strategy = Strategy::from_fn(tree, n, horizon, |u| std::mem::take(&mut holdings[u]));
    Some(Replication { strategy, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn binomial_call() {
        let m = fixtures::binomial_stock_cash();
        let r = replicate(&m, &fixtures::binomial_call_payoff()).unwrap();
        let h = r.strategy.at(0).unwrap();
        assert!((h[0] + 1.0 / 3.0).abs() < 1e-14 && (h[1] - 2.0 / 3.0).abs() < 1e-14);
        assert!((r.value[0] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn trinomial_call_is_not_attainable() {
        let m = fixtures::trinomial_stock_cash();
        assert!(replicate(&m, &[0.0, 1.0, 0.0, 0.0]).is_none());
    }

    #[test]
    fn static_portfolio() {
        let m = fixtures::trinomial_stock_cash();
        let c = [0.3, -1.5];
        let payoff: Vec<f64> = (0..4).map(|u| dot(&c, m.price(u))).collect();
        let r = replicate(&m, &payoff).unwrap();
        let h = r.strategy.at(0).unwrap();
        assert!((h[0] - c[0]).abs() < 1e-13 && (h[1] - c[1]).abs() < 1e-13);
    }
}
