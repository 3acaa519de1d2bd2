//! One-period building blocks: the convex-minimization deflator step, its LP
//! polish for arbitrage directions, and the augmented-state construction.

use crate::error::{Error, Result};
use crate::expsum::{ExpOutcome, ExpSum, ExpTerm, NewtonOptions};
use crate::market::{dot, Market};
use crate::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use crate::tol::SLACK_TOL;
use crate::tree::NodeId;

/// Prices at a node and at each of its children, with conditional probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepProblem {
    pub parent: Vec<f64>,
    /// `(conditional probability, price vector)` per child.
    pub outcomes: Vec<(f64, Vec<f64>)>,
}

impl OneStepProblem {
    pub fn new(parent: Vec<f64>, outcomes: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        let n = parent.len();
        if n == 0 || outcomes.is_empty() {
            return Err(Error::Dimension("one-step problem needs assets and outcomes".into()));
        }
        if outcomes.iter().any(|(_, p)| p.len() != n) {
            return Err(Error::Dimension("outcome price length differs from parent".into()));
        }
        if outcomes.iter().any(|(q, _)| !(*q > 0.0)) {
            return Err(Error::InvalidArgument("outcome probabilities must be positive".into()));
        }
        Ok(OneStepProblem { parent, outcomes })
    }

    pub fn at_node(market: &Market, u: NodeId) -> Self {
        let tree = &market.tree;
        OneStepProblem {
            parent: market.price(u).to_vec(),
            outcomes: tree
                .children(u)
                .iter()
                .map(|&c| (tree.cond_prob(c), market.price(c).to_vec()))
                .collect(),
        }
    }

    pub fn n_assets(&self) -> usize {
        self.parent.len()
    }

    /// `E[P Z] - p`.
    pub fn residual(&self, z: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self.parent.iter().map(|p| -p).collect();
        for ((q, pc), zc) in self.outcomes.iter().zip(z) {
            for (ri, pi) in r.iter_mut().zip(pc) {
                *ri += q * zc * pi;
            }
        }
        r
    }
}

/// Output of the one-step construction.
#[derive(Debug, Clone, PartialEq)]
pub struct OneStepDeflator {
    /// One positive weight per child with `E[P_c Z_c] = p`.
    pub z: Vec<f64>,
    pub log_z: Vec<f64>,
    /// Bound with `Z_c ≤ R ζ_c`.
    pub r: f64,
    pub log_r: f64,
    /// The minimizer `h*` of the exponential objective.
    pub h: Vec<f64>,
    /// `‖∇F(h*)‖` on the minimization subspace.
    pub grad_norm: f64,
    pub iterations: usize,
}

/// `F(h) = exp(h·p) + Σ_c q_c exp(-h·P_c) ζ_c exp(-‖P_c‖²/2)`, with weights given by
/// their logarithms.
pub fn rogers_objective(problem: &OneStepProblem, log_zeta: &[f64]) -> ExpSum {
    let mut terms = Vec::with_capacity(problem.outcomes.len() + 1);
    terms.push(ExpTerm { log_weight: 0.0, v: problem.parent.clone() });
    for ((q, pc), lz) in problem.outcomes.iter().zip(log_zeta) {
        let sq = dot(pc, pc);
        terms.push(ExpTerm {
            log_weight: q.ln() + lz - 0.5 * sq,
            v: pc.iter().map(|x| -x).collect(),
        });
    }
    ExpSum::new(problem.n_assets(), terms)
}

/// One-step deflator for positive weights `zeta`.
pub fn rogers_one_step(problem: &OneStepProblem, zeta: &[f64]) -> Result<OneStepDeflator> {
    if zeta.len() != problem.outcomes.len() {
        return Err(Error::Dimension("one weight per outcome required".into()));
    }
    if let Some(z) = zeta.iter().find(|z| !(**z > 0.0) || !z.is_finite()) {
        return Err(Error::InvalidArgument(format!("weight {z} is not positive")));
    }
    let lz: Vec<f64> = zeta.iter().map(|z| z.ln()).collect();
    rogers_one_step_log(problem, &lz)
}

/// [`rogers_one_step`] with weights given as logarithms, for weights far outside
/// the floating-point range.
pub fn rogers_one_step_log(problem: &OneStepProblem, log_zeta: &[f64]) -> Result<OneStepDeflator> {
    let f = rogers_objective(problem, log_zeta);
    match f.minimize(&NewtonOptions::default()) {
        ExpOutcome::Minimum(m) => {
            let h = m.h;
            let hp = dot(&h, &problem.parent);
            let log_r = -hp + 0.5 * dot(&h, &h);
            // ln Z_c = ln R + ln ζ_c - ‖h + P_c‖²/2, which keeps Z_c ≤ R ζ_c in floating point
            let log_z: Vec<f64> = problem
                .outcomes
                .iter()
                .zip(log_zeta)
                .map(|((_, pc), lz)| {
                    let d: f64 = h.iter().zip(pc).map(|(a, b)| (a + b) * (a + b)).sum();
                    log_r + lz - 0.5 * d
                })
                .collect();
            let z = log_z.iter().map(|l| l.exp()).collect();
            Ok(OneStepDeflator {
                z,
                log_z,
                r: log_r.exp(),
                log_r,
                h,
                grad_norm: m.grad_norm,
                iterations: m.iterations,
            })
        }
        ExpOutcome::Unbounded { .. } | ExpOutcome::Stalled { .. } => {
            match one_step_arbitrage(problem)? {
                Some(direction) => Err(Error::OneStepArbitrage { direction }),
                None => Err(Error::Numerical(
                    "minimization did not converge although no one-step arbitrage exists".into(),
                )),
            }
        }
    }
}

/// A portfolio `h` with `h·p ≤ 0 ≤ h·P_c` for all children, not all equalities, if one
/// exists. Found by maximizing the expected gain `-h·p + E[h·P]` over the unit box.
pub fn one_step_arbitrage(problem: &OneStepProblem) -> Result<Option<Vec<f64>>> {
    let n = problem.n_assets();
    let mut lp = LinearProgram::new(Sense::Maximize, n);
    for i in 0..n {
        lp.set_bounds(i, -1.0, 1.0);
        lp.objective[i] = -problem.parent[i]
            + problem.outcomes.iter().map(|(q, pc)| q * pc[i]).sum::<f64>();
    }
    lp.add_row((0..n).map(|i| (i, problem.parent[i])), Relation::Le, 0.0);
    for (_, pc) in &problem.outcomes {
        lp.add_row((0..n).map(|i| (i, pc[i])), Relation::Ge, 0.0);
    }
    let sol = solve_lp(&lp);
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp(sol.status));
    }
    let scale = problem
        .outcomes
        .iter()
        .flat_map(|(_, p)| p.iter())
        .chain(&problem.parent)
        .fold(1.0f64, |m, x| m.max(x.abs()));
    Ok((sol.objective > SLACK_TOL * scale).then_some(sol.x))
}

/// Positive weights `Y` with `E[P Y] = p` for a one-period market, built by adding
/// a state of probability ½ paying `-p` and running the one-step construction with
/// parent price zero. `Y_c = Z_c / Z_Δ`.
pub fn one_period_delta_augment(p: &[f64], outcomes: &[(f64, Vec<f64>)]) -> Result<Vec<f64>> {
    let plain = OneStepProblem::new(p.to_vec(), outcomes.to_vec())?;
    if let Some(direction) = one_step_arbitrage(&plain)? {
        return Err(Error::OneStepArbitrage { direction });
    }
    let mut augmented: Vec<(f64, Vec<f64>)> =
        outcomes.iter().map(|(q, pc)| (0.5 * q, pc.clone())).collect();
    augmented.push((0.5, p.iter().map(|x| -x).collect()));
    let problem = OneStepProblem::new(vec![0.0; p.len()], augmented)?;
    let step = rogers_one_step(&problem, &vec![1.0; problem.outcomes.len()])?;
    let zd = *step.z.last().expect("augmented state");
    Ok(step.z[..outcomes.len()].iter().map(|z| z / zd).collect())
}
