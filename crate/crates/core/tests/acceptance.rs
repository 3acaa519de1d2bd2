//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if a criterion fails that is not listed in `KNOWN_UNATTAINABLE`.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use deflator_lab::arbitrage::{
    certificate, find_ic_arbitrage, find_pi_arbitrage, find_tc_arbitrage, to_pure_arbitrage,
    verify_certificate, ArbitrageKind,
};
use deflator_lab::bubble::{bubble_family, bubble_report, indicator_at, indicator_before, BubbleVerdict};
use deflator_lab::deflator::{
    build_bounded_deflator, build_deflator, deflator_lp, deflator_quality, deflator_to_emm,
    discounted_price_residual, emm_to_deflator, one_period_delta_augment, rogers_objective,
    rogers_one_step, OneStepProblem, SignedDeflator,
};
use deflator_lab::fixtures;
use deflator_lab::gen::{generate_model, GenMode, GenParams};
use deflator_lab::hedge::{
    build_riskfree_numeraire, completeness_check, find_numeraire, risk_averse_hedge, superrep_dual_price,
    superreplicate, terminal_target,
};
use deflator_lab::market::{dot, norm};
use deflator_lab::process::{consumption_of, numeraire_values};
use deflator_lab::simplex::{solve_lp, LinearProgram, LpStatus, Relation, Sense};
use deflator_lab::sweep::{ftap_sweep, fuzz_model};
use deflator_lab::utility::{expected_utility, solve_utility, verify_optimality, UtilitySpec, Verdict};
use deflator_lab::{AdaptedScalar, Execution, Market, Strategy};

/// Criteria that cannot hold as stated; they are run and reported but do not fail
/// the process.
const KNOWN_UNATTAINABLE: &[u32] = &[5];

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn planted(seed: u64, depth: usize, branching: usize, n: usize) -> Market {
    generate_model(&GenParams::new(seed, depth, branching, n, GenMode::PlantedDeflator)).unwrap()
}

/// Independent oracle for the dual price: `max E[ξ_T Y_T]` over `Y ≥ 0`, `Y_0 = 1`,
/// `P·Y` a martingale.
fn dual_price_oracle(m: &Market, payoff: &[f64]) -> f64 {
    let tree = &m.tree;
    let mut lp = LinearProgram::new(Sense::Maximize, tree.len());
    for &u in tree.level(tree.horizon()) {
        lp.objective[u] = tree.prob(u) * payoff[u];
    }
    lp.add_row([(tree.root(), 1.0)], Relation::Eq, 1.0);
    for u in tree.decision_nodes(tree.horizon()) {
        for i in 0..m.n_assets() {
            let mut row = vec![(u, -m.price(u)[i])];
            row.extend(tree.children(u).iter().map(|&c| (c, tree.cond_prob(c) * m.price(c)[i])));
            lp.add_row(row, Relation::Eq, 0.0);
        }
    }
    let sol = solve_lp(&lp);
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.objective
}

fn c1_ftap() -> Outcome {
    let start = Instant::now();
    let s = ftap_sweep(0..500, GenMode::Adversarial, Execution::Parallel).unwrap();
    let elapsed = start.elapsed();
    check(
        s.all_agree() && elapsed < Duration::from_secs(60),
        format!(
            "{}/{} agree ({} with arbitrage) in {:.2}s",
            s.agreements,
            s.records.len(),
            s.arbitrage_count,
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_quality() -> Outcome {
    let mut worst_resid = 0.0f64;
    let mut min_value = f64::INFINITY;
    let mut bound_ok = true;
    let mut built = 0;
    let mut r = rng(2);
    for seed in 0..300 {
        let mode = if seed % 2 == 0 { GenMode::Adversarial } else { GenMode::PlantedDeflator };
        let m = fuzz_model(seed, mode);
        let Ok(y) = build_deflator(&m) else { continue };
        let lp = deflator_lp(&m).unwrap().expect("LP agrees on existence");
        let eta = AdaptedScalar::from_fn(&m.tree, |_| r.gen_range(-2.0..1.0f64).exp());
        let b = build_bounded_deflator(&m, &eta).unwrap();
        for d in [&y, &lp, &b] {
            let q = deflator_quality(&m, d.values(), m.horizon());
            worst_resid = worst_resid.max(q.martingale_residual);
            min_value = min_value.min(q.min_value);
        }
        bound_ok &= (0..m.tree.len()).all(|u| b.y[u] <= eta[u]);
        built += 1;
    }
    check(
        worst_resid <= 1e-8 && min_value > 0.0 && bound_ok && built > 100,
        format!("{built} markets, max residual {worst_resid:.2e}, min value {min_value:.2e}, bound held: {bound_ok}"),
    )
}

fn random_one_step(r: &mut ChaCha8Rng) -> OneStepProblem {
    let n = r.gen_range(1..=3);
    let k = r.gen_range(2..=5);
    let mut q: Vec<f64> = (0..k).map(|_| r.gen_range(0.1..1.0)).collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|x| *x /= total);
    let outcomes: Vec<(f64, Vec<f64>)> = q
        .iter()
        .map(|&qc| (qc, (0..n).map(|i| if i == 0 { r.gen_range(0.5..1.5) } else { r.gen_range(-1.0..2.0) }).collect()))
        .collect();
    let z: Vec<f64> = (0..k).map(|_| r.gen_range(-0.5..0.5f64).exp()).collect();
    let p = (0..n).map(|i| outcomes.iter().zip(&z).map(|((qc, pc), zc)| qc * zc * pc[i]).sum()).collect();
    OneStepProblem::new(p, outcomes).unwrap()
}

fn c3_rogers() -> Outcome {
    let mut r = rng(3);
    let (mut grad, mut resid, mut fd_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut bound_ok = true;
    for _ in 0..100 {
        let problem = random_one_step(&mut r);
        let zeta: Vec<f64> = problem.outcomes.iter().map(|_| r.gen_range(-1.0..1.0f64).exp()).collect();
        let step = rogers_one_step(&problem, &zeta).unwrap();
        let f = rogers_objective(&problem, &zeta.iter().map(|z| z.ln()).collect::<Vec<_>>());
        grad = grad.max(norm(&f.gradient(&step.h)));
        resid = resid.max(problem.residual(&step.z).iter().fold(0.0, |a, v| a.max(v.abs())));
        bound_ok &= step.z.iter().zip(&zeta).all(|(z, zc)| *z <= step.r * zc);

        let h: Vec<f64> = (0..problem.n_assets()).map(|_| r.gen_range(-1.0..1.0)).collect();
        let g = f.gradient(&h);
        let fd: Vec<f64> = (0..h.len())
            .map(|i| {
                let e = 1e-5;
                let (mut a, mut b) = (h.clone(), h.clone());
                a[i] += e;
                b[i] -= e;
                (f.value(&a) - f.value(&b)) / (2.0 * e)
            })
            .collect();
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(x, y)| x - y).collect();
        fd_err = fd_err.max(norm(&diff) / norm(&g).max(1e-300));
    }
    check(
        grad <= 1e-9 && resid <= 1e-9 && bound_ok && fd_err <= 1e-5,
        format!("max |grad| {grad:.2e}, residual {resid:.2e}, Z <= R zeta: {bound_ok}, FD rel err {fd_err:.2e}"),
    )
}

fn c4_superrep() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for seed in 0..200 {
        let m = fuzz_model(10_000 + seed, GenMode::PlantedDeflator);
        let payoff: Vec<f64> = (0..m.tree.len()).map(|_| r.gen_range(-1.0..2.0)).collect();
        let xi = terminal_target(&m.tree, &payoff);
        let report = superreplicate(&m, &xi).unwrap();
        let primal = report.cost[m.tree.root()];
        let oracle = dual_price_oracle(&m, &payoff);
        let dual = superrep_dual_price(&m, &xi).unwrap();
        for d in [oracle, dual] {
            worst = worst.max((primal - d).abs() / (1.0 + primal.abs()));
        }
    }
    let m = fixtures::binomial_stock_cash();
    let call = superreplicate(&m, &terminal_target(&m.tree, &fixtures::binomial_call_payoff())).unwrap();
    let anchor = call.cost[0];
    let elapsed = start.elapsed();
    check(
        worst <= 1e-6 && (anchor - 1.0 / 3.0).abs() <= 1e-9 && elapsed < Duration::from_secs(60),
        format!("max relative gap {worst:.2e}, call price {anchor:.15}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn c5_bubble() -> Outcome {
    let mut parts = Vec::new();
    let mut literal_worst = 0.0f64;
    let mut ok = true;
    for n in 1..=3usize {
        let m = fixtures::bubble(n);
        let report = bubble_report(&m, n).unwrap();
        ok &= report.verdict == BubbleVerdict::Bubble && report.is_consistent();
        let cert = report.ic.as_ref().unwrap();
        ok &= (cert.consumption[0] - 1.0).abs() <= 1e-12;
        ok &= verify_certificate(&m, cert, ArbitrageKind::InvestmentConsumption, 1e-12).is_ok();
        let short = certificate(&m, ArbitrageKind::InvestmentConsumption, Strategy::buy_and_hold(&m.tree, &[-1.0], n))
            .unwrap();
        ok &= short.consumption[0] == 1.0
            && verify_certificate(&m, &short, ArbitrageKind::InvestmentConsumption, 0.0).is_ok();
        for t in 1..=n {
            ok &= find_tc_arbitrage(&m, t).unwrap().is_none() && find_pi_arbitrage(&m, t).unwrap().is_none();
            let ones = SignedDeflator::from_values(&m, AdaptedScalar::constant(m.tree.len(), 1.0), t);
            let fam = SignedDeflator::from_values(&m, bubble_family(&m.tree, t, n), t);
            ok &= fam.residual(&m) <= 1e-12 && fam.nonnegative && fam.terminal_positive;
            if t < n {
                ok &= ones.residual(&m) <= 1e-12;
            } else {
                let literal = SignedDeflator::from_values(&m, indicator_before(&m.tree, t), t);
                literal_worst = literal_worst.max(literal.residual(&m));
                let at = SignedDeflator::from_values(&m, indicator_at(&m.tree, t), t);
                ok &= at.residual(&m) <= 1e-12;
            }
        }
    }
    parts.push(format!("verdict, certificates, detectors and Y = 1 / Y = 1(t=T) families: {}", if ok { "ok" } else { "failed" }));
    parts.push(format!("Y = 1(t<T) at T = N has residual {literal_worst:.1}"));
    check(ok && literal_worst <= 1e-12, parts.join("; "))
}

fn c6_completeness() -> Outcome {
    let b = completeness_check(&fixtures::binomial_stock_cash()).unwrap();
    let y = &b.objective_ranges[0].argmax;
    let binomial = b.complete
        && b.unique_deflator == Some(true)
        && (y[1] - 2.0 / 3.0).abs() < 1e-9
        && (y[2] - 4.0 / 3.0).abs() < 1e-9;
    let t = completeness_check(&fixtures::trinomial_stock_cash()).unwrap();
    let gap = t
        .objective_ranges
        .iter()
        .map(|r| r.argmax.iter().zip(&r.argmin).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let trinomial = !t.complete && t.unique_deflator == Some(false) && gap > 1e-6;
    let (mut complete, mut bounds) = (0, true);
    for seed in 0..200 {
        let n = 1 + (seed % 3) as usize;
        let m = planted(20_000 + seed, 1 + (seed % 4) as usize, if seed % 5 == 0 { 3 } else { n.max(2) }, n);
        let rep = completeness_check(&m).unwrap();
        if rep.complete {
            complete += 1;
            bounds &= rep.branching_within_assets && rep.node_count_bound && rep.unique_deflator == Some(true);
        }
    }
    check(
        binomial && trinomial && bounds && complete > 0,
        format!("binomial unique: {binomial}, trinomial vertex gap {gap:.3}, {complete} complete fuzz markets within bounds: {bounds}"),
    )
}

fn c7_riskfree() -> Outcome {
    let (mut models, mut ok, mut worst) = (0, true, 0.0f64);
    for seed in 0..400u64 {
        if models == 100 {
            break;
        }
        let n = 2 + (seed % 2) as usize;
        let m = planted(30_000 + seed, 1 + (seed % 4) as usize, n, n);
        if !completeness_check(&m).unwrap().complete {
            continue;
        }
        models += 1;
        let rf = build_riskfree_numeraire(&m).unwrap();
        let tree = &m.tree;
        for u in tree.decision_nodes(tree.horizon()) {
            let kids = tree.children(u);
            ok &= kids.iter().all(|&c| rf.beta[c] == rf.beta[kids[0]]);
        }
        ok &= rf.beta.values.iter().all(|&b| b > 0.0);
        let d = consumption_of(&m, &rf.eta, 0.0).unwrap();
        for u in tree.time_order() {
            let t = tree.time(u);
            if t >= 1 {
                worst = worst.max((rf.eta.wealth(&m, u) - rf.beta[u]).abs());
            }
            if t < tree.horizon() {
                worst = worst.max((dot(rf.eta.at(u).unwrap(), m.price(u)) - rf.beta[u]).abs());
            }
            if t >= 1 && t < tree.horizon() {
                worst = worst.max(d.consumption[u].abs());
            }
        }
    }
    check(
        models == 100 && ok && worst <= 1e-9,
        format!("{models} complete markets, beta predictable and positive: {ok}, max |eta.P - beta| {worst:.2e}"),
    )
}

fn c8_emm() -> Outcome {
    let (mut round, mut resid) = (0.0f64, 0.0f64);
    for seed in 0..100 {
        let m = fuzz_model(40_000 + seed, GenMode::PlantedDeflator);
        let h = m.horizon();
        let mut e0 = vec![0.0; m.n_assets()];
        e0[0] = 1.0;
        let eta = Strategy::buy_and_hold(&m.tree, &e0, h);
        let y = build_deflator(&m).unwrap().y;
        let q = deflator_to_emm(&m, &y, &eta, h).unwrap();
        let n = numeraire_values(&m, &eta, h, 1e-9).unwrap();
        resid = resid.max(discounted_price_residual(&m, &q, &n, h));
        let back = emm_to_deflator(&m, &q, &eta, h).unwrap();
        round = round.max((0..m.tree.len()).map(|u| (back[u] - y[u]).abs()).fold(0.0, f64::max));
    }
    let m = fixtures::binomial_stock_cash();
    let cash = Strategy::buy_and_hold(&m.tree, &[1.0, 0.0], 1);
    let y = build_deflator(&m).unwrap().y;
    let q_up = deflator_to_emm(&m, &y, &cash, 1).unwrap().cond_prob(1);
    check(
        round <= 1e-10 && resid <= 1e-9 && (q_up - 1.0 / 3.0).abs() <= 1e-12,
        format!("round trip {round:.2e}, P/N residual {resid:.2e}, q(up) {q_up:.15}"),
    )
}

fn c9_utility() -> Outcome {
    let mut r = rng(9);
    let (mut certified, mut resid, mut margin) = (0, 0.0f64, f64::INFINITY);
    for seed in 0..50 {
        let m = planted(50_000 + seed, 1 + (seed % 3) as usize, 3, 1 + (seed % 3) as usize);
        let horizon = m.horizon();
        let weights: Vec<f64> = (0..=horizon).map(|_| r.gen_range(0.5..1.5)).collect();
        let spec = UtilitySpec::new(horizon, weights, deflator_lab::utility::UtilityForm::Log).unwrap();
        let x0 = r.gen_range(0.5..2.0);
        let plan = solve_utility(&m, x0, &spec).unwrap();
        certified += usize::from(verify_optimality(&m, &plan, &spec) == Verdict::Certified);
        resid = resid.max(plan.residual);
        for _ in 0..1000 {
            let dir = Strategy::from_fn(&m.tree, m.n_assets(), horizon, |_| {
                (0..m.n_assets()).map(|_| r.gen_range(-1.0..1.0)).collect()
            });
            let dc = consumption_of(&m, &dir, 0.0).unwrap().consumption;
            let t_max = m
                .tree
                .nodes_upto(horizon)
                .into_iter()
                .filter(|&u| dc[u] < 0.0)
                .map(|u| plan.consumption[u] / -dc[u])
                .fold(1e3, f64::min);
            let t = t_max * r.gen_range(0.0..1.0f64).powi(3);
            let h = plan.strategy.add(&dir.scaled(t)).unwrap();
            let u = expected_utility(&m, &h, x0, &spec).unwrap();
            margin = margin.min(plan.value - u);
        }
    }
    check(
        certified == 50 && resid <= 1e-8 && margin >= -1e-7,
        format!("{certified}/50 certified, max residual {resid:.2e}, worst margin {margin:.2e}"),
    )
}

fn c10_risk_aversion() -> Outcome {
    let m = fixtures::binomial_stock_cash();
    let xi = AdaptedScalar::from(vec![1.0 / 3.0, 1.0, 0.0]);
    let price = superreplicate(&m, &terminal_target(&m.tree, &fixtures::binomial_call_payoff())).unwrap().cost[0];
    let mut last = f64::NEG_INFINITY;
    let mut monotone = true;
    let mut final_hedge = None;
    for k in 0..=8 {
        let h = risk_averse_hedge(&m, &xi, f64::from(1u32 << k)).unwrap();
        monotone &= h.shortfall >= last - 1e-9;
        last = h.shortfall;
        final_hedge = Some(h);
    }
    let h = final_hedge.unwrap();
    check(
        monotone && h.shortfall >= -1e-2 && (h.cost - price).abs() <= 1e-2,
        format!("monotone: {monotone}, shortfall at 256 {:.2e}, cost {:.6} vs price {price:.6}", h.shortfall, h.cost),
    )
}

fn c11_delta() -> Outcome {
    let mut r = rng(11);
    let (mut ok, mut worst, mut ymax) = (true, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let problem = random_one_step(&mut r);
        let y = one_period_delta_augment(&problem.parent, &problem.outcomes).unwrap();
        ok &= y.iter().all(|v| *v > 0.0 && v.is_finite());
        ymax = ymax.max(y.iter().cloned().fold(0.0, f64::max));
        worst = worst.max(problem.residual(&y).iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    check(ok && worst <= 1e-10, format!("positive: {ok}, max Y {ymax:.3}, max |E[PY] - p| {worst:.2e}"))
}

fn c12_conversion() -> Outcome {
    let (mut models, mut arbitrage, mut ok) = (0, 0, true);
    for seed in 0..2000u64 {
        if models == 100 {
            break;
        }
        let m = fuzz_model(60_000 + seed, GenMode::Adversarial);
        let Some(eta) = find_numeraire(&m).unwrap() else { continue };
        models += 1;
        let h = m.horizon();
        match find_ic_arbitrage(&m, h).unwrap() {
            Some(cert) => {
                arbitrage += 1;
                let pure = to_pure_arbitrage(&m, &cert, &eta).unwrap();
                let tol = 1e-9 * m.price_scale();
                ok &= verify_certificate(&m, &pure, ArbitrageKind::PureInvestment, tol).is_ok();
                ok &= find_pi_arbitrage(&m, h).unwrap().is_some();
            }
            None => ok &= find_pi_arbitrage(&m, h).unwrap().is_none(),
        }
    }
    check(models == 100 && ok && arbitrage > 0, format!("{models} markets with a numeraire, {arbitrage} with arbitrage, all mapped: {ok}"))
}

type Criterion = (u32, &'static str, fn() -> Outcome);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "FTAP equivalence", c1_ftap),
        (2, "deflator quality", c2_quality),
        (3, "one-step minimization", c3_rogers),
        (4, "super-replication duality", c4_superrep),
        (5, "bubble fixture", c5_bubble),
        (6, "completeness", c6_completeness),
        (7, "risk-free numeraire", c7_riskfree),
        (8, "EMM round trip", c8_emm),
        (9, "utility duality", c9_utility),
        (10, "risk-aversion limit", c10_risk_aversion),
        (11, "delta augmentation", c11_delta),
        (12, "IC to pure conversion", c12_conversion),
    ];
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome { ok: false, detail: format!("panicked: {msg}") }
        });
        let status = if outcome.ok { "PASS" } else { "FAIL" };
        let note = if !outcome.ok && KNOWN_UNATTAINABLE.contains(&id) { " (known unattainable)" } else { "" };
        println!("criterion {id:>2} {status} {name}: {}{note}", outcome.detail);
        if !outcome.ok && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
