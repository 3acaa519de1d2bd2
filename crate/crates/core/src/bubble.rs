//! Classification of a market by the strongest arbitrage notion it admits, with
//! certificates and signed-deflator witnesses.

use serde::Serialize;

use crate::arbitrage::{find_ic_arbitrage, find_pi_arbitrage, find_tc_arbitrage, ArbitrageCertificate};
use crate::deflator::{find_signed_deflator, SignedDeflator};
use crate::error::Result;
use crate::market::Market;
use crate::process::AdaptedScalar;
use crate::tree::ScenarioTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BubbleVerdict {
    NoArbitrage,
    /// Investment-consumption arbitrage, none with terminal consumption.
    Bubble,
    /// Terminal-consumption arbitrage, none without intermediate consumption.
    TcArbitrageOnly,
    /// Pure-investment arbitrage.
    FullArbitrage,
}

impl BubbleVerdict {
    pub fn name(self) -> &'static str {
        match self {
            BubbleVerdict::NoArbitrage => "no-arbitrage",
            BubbleVerdict::Bubble => "bubble",
            BubbleVerdict::TcArbitrageOnly => "tc-arbitrage-only",
            BubbleVerdict::FullArbitrage => "full-arbitrage",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleReport {
    pub verdict: BubbleVerdict,
    pub horizon: usize,
    pub ic: Option<ArbitrageCertificate>,
    pub tc: Option<ArbitrageCertificate>,
    pub pi: Option<ArbitrageCertificate>,
    /// Witness with `Y ≥ 0` and `Y_T > 0`; exists iff there is no terminal-consumption arbitrage.
    pub nonnegative_deflator: Option<SignedDeflator>,
    /// Witness of any sign with `Y_T > 0`; exists iff there is no pure-investment arbitrage.
    pub signed_deflator: Option<SignedDeflator>,
}

impl BubbleReport {
    /// Detector outputs nest (PI ⇒ TC ⇒ IC) and each witness exists exactly when
    /// the matching arbitrage does not.
    pub fn is_consistent(&self) -> bool {
        let nested = (self.pi.is_none() || self.tc.is_some()) && (self.tc.is_none() || self.ic.is_some());
        let tc_witness = self.tc.is_none() == self.nonnegative_deflator.is_some();
        let pi_witness = self.pi.is_none() == self.signed_deflator.is_some();
        nested && tc_witness && pi_witness
    }
}

pub fn bubble_report(market: &Market, horizon: usize) -> Result<BubbleReport> {
    market.check_horizon(horizon)?;
    let ic = find_ic_arbitrage(market, horizon)?;
    let tc = find_tc_arbitrage(market, horizon)?;
    let pi = find_pi_arbitrage(market, horizon)?;
    let witness = |nonneg: bool| -> Result<Option<SignedDeflator>> {
        Ok(find_signed_deflator(market, horizon, nonneg)?
            .filter(|d| d.terminal_positive && (!nonneg || d.nonnegative)))
    };
    let nonnegative_deflator = witness(true)?;
    let signed_deflator = witness(false)?;
    let verdict = if pi.is_some() {
        BubbleVerdict::FullArbitrage
    } else if tc.is_some() {
        BubbleVerdict::TcArbitrageOnly
    } else if ic.is_some() {
        BubbleVerdict::Bubble
    } else {
        BubbleVerdict::NoArbitrage
    };
    Ok(BubbleReport { verdict, horizon, ic, tc, pi, nonnegative_deflator, signed_deflator })
}

/// `1_{t < horizon}` on the whole tree.
pub fn indicator_before(tree: &ScenarioTree, horizon: usize) -> AdaptedScalar {
    AdaptedScalar::from_fn(tree, |u| if tree.time(u) < horizon { 1.0 } else { 0.0 })
}

/// `1_{t = horizon}` on the whole tree.
pub fn indicator_at(tree: &ScenarioTree, horizon: usize) -> AdaptedScalar {
    AdaptedScalar::from_fn(tree, |u| if tree.time(u) == horizon { 1.0 } else { 0.0 })
}

/// Nonnegative signed deflators for one asset priced `1_{t < death}`: `Y ≡ 1` while
/// the horizon is before the asset dies, `1_{t = horizon}` afterwards.
pub fn bubble_family(tree: &ScenarioTree, horizon: usize, death: usize) -> AdaptedScalar {
    if horizon < death {
        AdaptedScalar::constant(tree.len(), 1.0)
    } else {
        indicator_at(tree, horizon)
    }
}
