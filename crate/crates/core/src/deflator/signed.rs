use crate::error::{Error, Result};
use crate::market::Market;
use crate::process::{deflated_price_residual, AdaptedScalar};
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};

use super::add_martingale_rows;

/// An adapted `Y` of any sign with `P·Y` a martingale on `[0, horizon]`. Values
/// after the horizon are zero and carry no meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedDeflator {
    pub y: AdaptedScalar,
    pub horizon: usize,
    /// `Y ≥ 0` at every node up to the horizon.
    pub nonnegative: bool,
    /// `Y_T > 0` at every node of time `horizon`.
    pub terminal_positive: bool,
}

impl SignedDeflator {
    /// Wraps `y`, reading both flags off its values.
    pub fn from_values(market: &Market, y: AdaptedScalar, horizon: usize) -> Self {
        let tree = &market.tree;
        let nonnegative = tree.nodes_upto(horizon).into_iter().all(|u| y[u] >= 0.0);
        let terminal_positive = tree.level(horizon).iter().all(|&u| y[u] > 0.0);
        SignedDeflator { y, horizon, nonnegative, terminal_positive }
    }

    pub fn residual(&self, market: &Market) -> f64 {
        deflated_price_residual(market, &self.y.values, self.horizon)
    }
}

/// Signed deflator with `Y_T ≥ 1` at the horizon (and `Y ≥ 0` everywhere when
/// `require_nonnegative`), minimizing `E[Y_T]`. `None` when the rows are infeasible.
pub fn find_signed_deflator(
    market: &Market,
    horizon: usize,
    require_nonnegative: bool,
) -> Result<Option<SignedDeflator>> {
    market.check_horizon(horizon)?;
    let tree = &market.tree;
    let nodes = tree.nodes_upto(horizon);
    let mut col = vec![usize::MAX; tree.len()];
    for (j, &u) in nodes.iter().enumerate() {
        col[u] = j;
    }
    let mut lp = LinearProgram::new(Sense::Minimize, nodes.len());
    if !require_nonnegative {
        for j in 0..nodes.len() {
            lp.set_free(j);
        }
    }
    for &u in tree.level(horizon) {
        lp.objective[col[u]] = tree.prob(u);
        lp.add_row([(col[u], 1.0)], Relation::Ge, 1.0);
    }
    add_martingale_rows(&mut lp, market, horizon, |u| col[u]);
    let sol = solve_lp(&lp);
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(None),
        other => return Err(Error::Lp(other)),
    }
    let mut y = AdaptedScalar::zeros(tree.len());
    for (&u, &v) in nodes.iter().zip(&sol.x) {
        y[u] = v;
    }
    let mut d = SignedDeflator::from_values(market, y, horizon);
    if require_nonnegative {
        // rounding below zero is not a sign change
        d.nonnegative = nodes.iter().all(|&u| d.y[u] >= -market.tol.eq);
    }
    Ok(Some(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn bubble_admits_terminal_positive_signed_deflator() {
        let m = fixtures::bubble(2);
        let d = find_signed_deflator(&m, 2, true).unwrap().unwrap();
        assert!(d.terminal_positive && d.nonnegative);
        assert!(d.residual(&m) < 1e-12);
        // only the terminal date carries weight
        assert!(m.tree.decision_nodes(2).iter().all(|&u| d.y[u].abs() < 1e-12));
    }

    #[test]
    fn sure_gain_has_none() {
        let m = fixtures::sure_gain();
        assert!(find_signed_deflator(&m, 1, false).unwrap().is_none());
        assert!(find_signed_deflator(&m, 1, true).unwrap().is_none());
    }

    #[test]
    fn truncated_bubble_is_deflated_by_one() {
        let m = fixtures::bubble(3);
        let y = AdaptedScalar::constant(m.tree.len(), 1.0);
        let d = SignedDeflator::from_values(&m, y, 2);
        assert!(d.terminal_positive && d.nonnegative);
        assert_eq!(d.residual(&m), 0.0);
    }
}
