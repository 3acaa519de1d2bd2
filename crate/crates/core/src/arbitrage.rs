//! Detection of investment-consumption, terminal-consumption and pure-investment
//! arbitrage by linear programming, and conversion of investment-consumption
//! arbitrage into pure-investment arbitrage in the presence of a numeraire.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{dot, Market};
use crate::process::{consumption_of, numeraire_values, AdaptedScalar, Strategy};
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::tol::ARBITRAGE_THRESHOLD;
use crate::tree::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArbitrageKind {
    InvestmentConsumption,
    TerminalConsumption,
    PureInvestment,
}

impl ArbitrageKind {
    pub const ALL: [ArbitrageKind; 3] = [
        ArbitrageKind::InvestmentConsumption,
        ArbitrageKind::TerminalConsumption,
        ArbitrageKind::PureInvestment,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            ArbitrageKind::InvestmentConsumption => "ic",
            ArbitrageKind::TerminalConsumption => "tc",
            ArbitrageKind::PureInvestment => "pi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        ArbitrageKind::ALL.into_iter().find(|k| k.short_name() == s)
    }

    /// Whether the gain of this kind is counted at every node or only at the horizon.
    fn counts_node(self, time: usize, horizon: usize) -> bool {
        match self {
            ArbitrageKind::InvestmentConsumption => true,
            _ => time == horizon,
        }
    }
}

/// A zero-cost strategy with non-negative consumption and positive expected gain.
#[derive(Debug, Clone, PartialEq)]
pub struct ArbitrageCertificate {
    pub kind: ArbitrageKind,
    pub horizon: usize,
    pub strategy: Strategy,
    pub consumption: AdaptedScalar,
    /// `Σ prob · C` over the nodes counted by `kind`.
    pub gain: f64,
}

/// Column layout of holdings at the decision nodes of an LP.
#[derive(Debug, Clone)]
pub(crate) struct HoldingVars {
    pub n: usize,
    offset: Vec<Option<usize>>,
    pub count: usize,
}

impl HoldingVars {
    pub fn new(market: &Market, horizon: usize, first: usize) -> Self {
        let n = market.n_assets();
        let mut offset = vec![None; market.tree.len()];
        let mut next = first;
        for u in market.tree.decision_nodes(horizon) {
            offset[u] = Some(next);
            next += n;
        }
        HoldingVars { n, offset, count: next - first }
    }

    pub fn var(&self, u: NodeId, i: usize) -> Option<usize> {
        self.offset[u].map(|o| o + i)
    }

    pub fn free_all(&self, lp: &mut LinearProgram) {
        for o in self.offset.iter().flatten() {
            for i in 0..self.n {
                lp.set_free(o + i);
            }
        }
    }

    /// Coefficients of `C(u)` (with zero initial capital) in the holding variables.
    pub fn consumption_row(&self, market: &Market, u: NodeId) -> Vec<(usize, f64)> {
        let p = market.price(u);
        let mut row = Vec::with_capacity(2 * self.n);
        if let Some(par) = market.tree.parent(u) {
            row.extend((0..self.n).map(|i| (self.var(par, i).expect("decision parent"), p[i])));
        }
        if self.offset[u].is_some() {
            row.extend((0..self.n).map(|i| (self.var(u, i).unwrap(), -p[i])));
        }
        row
    }

    pub fn strategy(&self, market: &Market, horizon: usize, x: &[f64]) -> Strategy {
        Strategy::from_fn(&market.tree, self.n, horizon, |u| {
            (0..self.n).map(|i| x[self.var(u, i).unwrap()]).collect()
        })
    }
}

fn build_lp(market: &Market, kind: ArbitrageKind, horizon: usize) -> (LinearProgram, HoldingVars) {
    let vars = HoldingVars::new(market, horizon, 0);
    let mut lp = LinearProgram::new(Sense::Maximize, vars.count);
    vars.free_all(&mut lp);
    let tree = &market.tree;
    let mut norm_row: Vec<(usize, f64)> = Vec::new();
    for u in tree.nodes_upto(horizon) {
        let row = vars.consumption_row(market, u);
        let t = tree.time(u);
        let relation = if kind == ArbitrageKind::PureInvestment && t >= 1 && t < horizon {
            Relation::Eq
        } else {
            Relation::Ge
        };
        if kind.counts_node(t, horizon) {
            let w = tree.prob(u);
            for &(j, a) in &row {
                lp.objective[j] += w * a;
                norm_row.push((j, w * a));
            }
        }
        lp.add_row(row, relation, 0.0);
    }
    lp.add_row(norm_row, Relation::Le, 1.0);
    (lp, vars)
}

/// Searches for an arbitrage of the given kind over `[0, horizon]`.
pub fn find_arbitrage(
    market: &Market,
    kind: ArbitrageKind,
    horizon: usize,
) -> Result<Option<ArbitrageCertificate>> {
    market.check_horizon(horizon)?;
    let (lp, vars) = build_lp(market, kind, horizon);
    let sol = solve_lp(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    if sol.objective < ARBITRAGE_THRESHOLD {
        return Ok(None);
    }
    let strategy = vars.strategy(market, horizon, &sol.x);
    Ok(Some(certificate(market, kind, strategy)?))
}

pub fn find_ic_arbitrage(market: &Market, horizon: usize) -> Result<Option<ArbitrageCertificate>> {
    find_arbitrage(market, ArbitrageKind::InvestmentConsumption, horizon)
}

pub fn find_tc_arbitrage(market: &Market, horizon: usize) -> Result<Option<ArbitrageCertificate>> {
    find_arbitrage(market, ArbitrageKind::TerminalConsumption, horizon)
}

pub fn find_pi_arbitrage(market: &Market, horizon: usize) -> Result<Option<ArbitrageCertificate>> {
    find_arbitrage(market, ArbitrageKind::PureInvestment, horizon)
}

/// Wraps a zero-capital strategy as a certificate of `kind`, recomputing consumption and gain.
pub fn certificate(
    market: &Market,
    kind: ArbitrageKind,
    strategy: Strategy,
) -> Result<ArbitrageCertificate> {
    let horizon = strategy.horizon();
    let decomp = consumption_of(market, &strategy, 0.0)?;
    let gain = market
        .tree
        .nodes_upto(horizon)
        .into_iter()
        .filter(|&u| kind.counts_node(market.tree.time(u), horizon))
        .map(|u| market.tree.prob(u) * decomp.consumption[u])
        .sum();
    Ok(ArbitrageCertificate { kind, horizon, strategy, consumption: decomp.consumption, gain })
}

/// Checks every certificate invariant for `kind` at tolerance `tol`. Returns the
/// first violated condition.
pub fn verify_certificate(
    market: &Market,
    cert: &ArbitrageCertificate,
    kind: ArbitrageKind,
    tol: f64,
) -> std::result::Result<(), String> {
    let fresh = certificate(market, kind, cert.strategy.clone()).map_err(|e| e.to_string())?;
    let tree = &market.tree;
    let h = cert.horizon;
    let root = tree.root();
    let cost = dot(cert.strategy.at(root).ok_or("no root holding")?, market.price(root));
    if cost > tol {
        return Err(format!("initial cost {cost} > 0"));
    }
    for u in tree.nodes_upto(h) {
        let c = fresh.consumption[u];
        if c < -tol {
            return Err(format!("negative consumption {c} at node {u}"));
        }
        let t = tree.time(u);
        if kind == ArbitrageKind::PureInvestment && t >= 1 && t < h && c.abs() > tol {
            return Err(format!("intermediate consumption {c} at node {u}"));
        }
    }
    if fresh.gain <= tol {
        return Err(format!("gain {} not positive", fresh.gain));
    }
    if kind == cert.kind && (fresh.gain - cert.gain).abs() > tol {
        return Err(format!("stated gain {} differs from {}", cert.gain, fresh.gain));
    }
    Ok(())
}

/// `K_t = H_t + η_t Σ_{s=1}^{t-1} C_s / N_s`: reinvests all intermediate consumption of
/// `h` in the numeraire `eta`. Consumption at time 0 is left untouched.
pub fn ic_to_pure(market: &Market, h: &Strategy, eta: &Strategy) -> Result<Strategy> {
    let horizon = h.horizon();
    if eta.n_assets() != h.n_assets() {
        return Err(Error::Dimension("numeraire and strategy differ in assets".into()));
    }
    let n = numeraire_values(market, eta, horizon, market.tol.eq)?;
    let decomp = consumption_of(market, h, 0.0)?;
    let tree = &market.tree;
    // acc[u] = Σ C_s / N_s over path nodes with 1 ≤ s ≤ time(u)
    let mut acc = vec![0.0; tree.len()];
    for u in tree.decision_nodes(horizon) {
        acc[u] = match tree.parent(u) {
            None => 0.0,
            Some(p) => acc[p] + decomp.consumption[u] / n[u],
        };
    }
    Ok(Strategy::from_fn(tree, h.n_assets(), horizon, |u| {
        let hu = h.at(u).expect("decision node");
        let e = eta.at(u).expect("numeraire decision node");
        hu.iter().zip(e).map(|(x, y)| x + y * acc[u]).collect()
    }))
}

/// `H + (C_0 / N_0) η`: moves time-0 consumption into the numeraire so it reaches the horizon.
pub fn absorb_initial_consumption(
    market: &Market,
    h: &Strategy,
    eta: &Strategy,
    x0: f64,
) -> Result<Strategy> {
    let n = numeraire_values(market, eta, h.horizon(), market.tol.eq)?;
    let decomp = consumption_of(market, h, x0)?;
    let root = market.tree.root();
    let k = decomp.consumption[root] / n[root];
    h.add(&restrict(eta, &market.tree, h.horizon()).scaled(k))
}

fn restrict(eta: &Strategy, tree: &crate::tree::ScenarioTree, horizon: usize) -> Strategy {
    Strategy::from_fn(tree, eta.n_assets(), horizon, |u| eta.at(u).expect("decision node").to_vec())
}

/// Converts an investment-consumption arbitrage into a pure-investment arbitrage
/// using the numeraire `eta`: time-0 consumption is absorbed into the numeraire,
/// then intermediate consumption is reinvested.
pub fn to_pure_arbitrage(
    market: &Market,
    cert: &ArbitrageCertificate,
    eta: &Strategy,
) -> Result<ArbitrageCertificate> {
    let h0 = absorb_initial_consumption(market, &cert.strategy, eta, 0.0)?;
    let k = ic_to_pure(market, &h0, eta)?;
    certificate(market, ArbitrageKind::PureInvestment, k)
}
