//! Batch cross-checks of the three no-arbitrage characterizations over seeded
//! random markets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arbitrage::find_ic_arbitrage;
use crate::deflator::{build_deflator, deflator_lp};
use crate::error::{Error, Result};
use crate::gen::{generate_model, GenMode, GenParams};
use crate::market::Market;
use crate::par::{self, Execution};

/// Random shape within `depth ≤ 4`, `branching ≤ 3`, `n ≤ 3`, fixed by the seed.
pub fn fuzz_params(seed: u64, mode: GenMode) -> GenParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    GenParams::new(seed, rng.gen_range(1..=4), rng.gen_range(2..=3), rng.gen_range(1..=3), mode)
}

pub fn fuzz_model(seed: u64, mode: GenMode) -> Market {
    generate_model(&fuzz_params(seed, mode)).expect("fuzz parameters are within caps")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FtapRecord {
    pub seed: u64,
    pub nodes: usize,
    pub n_assets: usize,
    pub ic_arbitrage: bool,
    /// Product-of-one-step construction succeeded.
    pub rogers: bool,
    /// The LP found a strictly positive deflator.
    pub lp: bool,
}

impl FtapRecord {
    pub fn agrees(&self) -> bool {
        !self.ic_arbitrage == self.rogers && self.rogers == self.lp
    }
}

/// Runs the three tests on one market. Construction errors other than arbitrage
/// are propagated.
pub fn ftap_check(seed: u64, market: &Market) -> Result<FtapRecord> {
    let ic_arbitrage = find_ic_arbitrage(market, market.horizon())?.is_some();
    let rogers = match build_deflator(market) {
        Ok(_) => true,
        Err(Error::ArbitrageAtNode { .. }) | Err(Error::NonPositiveDeflator { .. }) => false,
        Err(e) => return Err(e),
    };
    let lp = deflator_lp(market)?.is_some();
    Ok(FtapRecord { seed, nodes: market.tree.len(), n_assets: market.n_assets(), ic_arbitrage, rogers, lp })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub records: Vec<FtapRecord>,
    pub agreements: usize,
    pub arbitrage_count: usize,
}

impl SweepSummary {
    pub fn all_agree(&self) -> bool {
        self.agreements == self.records.len()
    }
}

pub fn ftap_sweep(seeds: std::ops::Range<u64>, mode: GenMode, exec: Execution) -> Result<SweepSummary> {
    let seeds: Vec<u64> = seeds.collect();
    let records = par::map(exec, &seeds, |&s| ftap_check(s, &fuzz_model(s, mode)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepSummary {
        agreements: records.iter().filter(|r| r.agrees()).count(),
        arbitrage_count: records.iter().filter(|r| r.ic_arbitrage).count(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_agrees_in_both_modes() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let s = ftap_sweep(0..40, GenMode::Adversarial, exec).unwrap();
            assert!(s.all_agree(), "{:?}", s.records.iter().find(|r| !r.agrees()));
        }
    }

    #[test]
    fn execution_mode_does_not_change_results() {
        let a = ftap_sweep(0..30, GenMode::Adversarial, Execution::Sequential).unwrap();
        let b = ftap_sweep(0..30, GenMode::Adversarial, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fuzz_shapes_stay_within_bounds() {
        for seed in 0..50 {
            let p = fuzz_params(seed, GenMode::PlantedDeflator);
            assert!((1..=4).contains(&p.depth) && p.branching <= 3 && p.n_assets <= 3);
        }
    }
}
