//! Numerical tolerances shared by the analysis routines.

/// Environment variable overriding the default equality tolerance.
pub const TOL_ENV: &str = "DEFLATOR_LAB_TOL";

/// Sum of child conditional probabilities must be within this of one.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Normalized arbitrage LP optimum is either 0 or 1; anything above this is an arbitrage.
pub const ARBITRAGE_THRESHOLD: f64 = 0.5;

/// Slack below which an LP "strictly positive" quantity is treated as zero.
pub const SLACK_TOL: f64 = 1e-9;

/// Sentinel for "no intermediate target" in super-replication target processes.
pub const NO_TARGET: f64 = -1e9;

/// Relative singular-value threshold for rank and subspace decisions.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute tolerance for equality and feasibility checks on unit-scaled data.
    pub eq: f64,
    /// Threshold for strict positivity.
    pub pos: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eq: 1e-9, pos: 1e-12 }
    }
}

impl Tolerances {
    /// Defaults, with `eq` taken from `DEFLATOR_LAB_TOL` when it parses as a positive float.
    pub fn from_env() -> Self {
        let mut tol = Tolerances::default();
        if let Ok(raw) = std::env::var(TOL_ENV) {
            if let Ok(v) = raw.trim().parse::<f64>() {
                if v.is_finite() && v > 0.0 {
                    tol.eq = v;
                }
            }
        }
        tol
    }
}
