//! One function per subcommand. Each loads the model, calls the library and
//! shapes the result as a JSON value; nothing else happens here.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use deflator_lab::arbitrage::{find_arbitrage, verify_certificate, ArbitrageCertificate, ArbitrageKind};
use deflator_lab::bubble::bubble_report;
use deflator_lab::deflator::{
    build_bounded_deflator, build_deflator, deflator_lp, deflator_to_emm,
    discounted_price_residual, Deflator, SignedDeflator,
};
use deflator_lab::gen::{generate_model, GenMode, GenParams};
use deflator_lab::hedge::{
    build_riskfree_numeraire, completeness_check, find_numeraire, has_target, replicate,
    risk_averse_hedge, superreplicate, superreplication_violation,
};
use deflator_lab::model::{load_model, save_model, ModelDocument};
use deflator_lab::process::numeraire_values;
use deflator_lab::tol::Tolerances;
use deflator_lab::utility::{solve_utility, verify_optimality, Verdict};
use deflator_lab::{AdaptedScalar, Error, Market, Strategy};
use serde_json::{json, Map, Value};

pub type Outcome = anyhow::Result<Value>;

struct Loaded {
    doc: ModelDocument,
    market: Market,
}

fn load(path: &Path) -> anyhow::Result<Loaded> {
    let doc = load_model(path)?;
    let market = doc.market()?.with_tolerances(Tolerances::from_env());
    Ok(Loaded { doc, market })
}

/// Library errors that describe the market rather than a failure to analyse it.
fn is_finding(e: &Error) -> bool {
    matches!(
        e,
        Error::ArbitrageAtNode { .. }
            | Error::OneStepArbitrage { .. }
            | Error::ArbitragePresent
            | Error::NonPositiveDeflator { .. }
            | Error::NotNumeraire { .. }
            | Error::NotSuperReplicable { .. }
            | Error::Incomplete { .. }
            | Error::NonPositiveBond { .. }
            | Error::NoPositivePlan
    )
}

/// Turns findings into a report with `exists: false`; other errors propagate.
fn settle<T>(r: deflator_lab::Result<T>, f: impl FnOnce(T) -> Outcome) -> Outcome {
    match r {
        Ok(x) => f(x),
        Err(e) if is_finding(&e) => {
            let mut out = json!({ "exists": false, "finding": e.to_string() });
            if let Error::ArbitrageAtNode { node, direction } = &e {
                out["arbitrage_node"] = json!(node);
                out["direction"] = json!(direction);
            }
            Ok(out)
        }
        Err(e) => Err(e.into()),
    }
}

fn optional(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// One row per node up to `horizon`, in id order, with `node` and `time` filled in.
fn rows(market: &Market, horizon: usize, mut f: impl FnMut(usize, &mut Map<String, Value>)) -> Value {
    let tree = &market.tree;
    let out: Vec<Value> = tree
        .nodes_upto(horizon)
        .into_iter()
        .map(|u| {
            let mut row = Map::new();
            row.insert("node".into(), json!(u));
            row.insert("time".into(), json!(tree.time(u)));
            f(u, &mut row);
            Value::Object(row)
        })
        .collect();
    Value::Array(out)
}

fn holdings(h: &Strategy, u: usize) -> Value {
    h.at(u).map(|x| json!(x)).unwrap_or(Value::Null)
}

pub fn validate(path: &Path) -> Outcome {
    let Loaded { doc, market } = load(path)?;
    Ok(json!({
        "valid": true,
        "nodes": market.tree.len(),
        "horizon": market.horizon(),
        "assets": market.assets,
        "max_branching": market.tree.max_branching(),
        "payoffs": doc.payoffs.keys().collect::<Vec<_>>(),
        "targets": doc.targets.keys().collect::<Vec<_>>(),
        "utility": doc.utility.keys().collect::<Vec<_>>(),
    }))
}

fn certificate_json(market: &Market, cert: &Option<ArbitrageCertificate>, kind: ArbitrageKind) -> Value {
    match cert {
        None => json!({ "found": false }),
        Some(c) => json!({
            "found": true,
            "gain": c.gain,
            "verified": verify_certificate(market, c, kind, market.tol.eq).is_ok(),
            "nodes": rows(market, c.horizon, |u, row| {
                row.insert("consumption".into(), json!(c.consumption[u]));
                row.insert("holdings".into(), holdings(&c.strategy, u));
            }),
        }),
    }
}

pub fn arbitrage(path: &Path, kind: Option<ArbitrageKind>, horizon: Option<usize>) -> Outcome {
    let Loaded { market, .. } = load(path)?;
    let horizon = horizon.unwrap_or(market.horizon());
    let kinds = kind.map(|k| vec![k]).unwrap_or(ArbitrageKind::ALL.to_vec());
    let mut out = Map::new();
    out.insert("horizon".into(), json!(horizon));
    for k in kinds {
        let cert = find_arbitrage(&market, k, horizon)?;
        out.insert(k.short_name().into(), certificate_json(&market, &cert, k));
    }
    Ok(Value::Object(out))
}

fn deflator_json(market: &Market, d: &Deflator, bound: Option<&AdaptedScalar>) -> Value {
    let q = d.quality(market);
    let mut out = json!({
        "exists": true,
        "min_value": q.min_value,
        "martingale_residual": q.martingale_residual,
        "nodes": rows(market, market.horizon(), |u, row| {
            row.insert("y".into(), json!(d.y[u]));
            if let Some(eta) = bound {
                row.insert("bound".into(), json!(eta[u]));
            }
        }),
    });
    if let Some(eta) = bound {
        let excess = (0..market.tree.len()).map(|u| d.y[u] - eta[u]).fold(f64::NEG_INFINITY, f64::max);
        out["max_excess_over_bound"] = json!(excess);
    }
    out
}

pub fn deflator(path: &Path, method: &str, bound: Option<&str>) -> Outcome {
    let Loaded { doc, market } = load(path)?;
    let mut out = match (method, bound) {
        ("rogers", None) => settle(build_deflator(&market), |d| Ok(deflator_json(&market, &d, None)))?,
        ("rogers", Some(field)) => {
            let eta = doc.target(field, &market.tree)?;
            settle(build_bounded_deflator(&market, &eta), |d| Ok(deflator_json(&market, &d, Some(&eta))))?
        }
        ("lp", None) => match deflator_lp(&market)? {
            Some(d) => deflator_json(&market, &d, None),
            None => json!({ "exists": false, "finding": "no strictly positive deflator" }),
        },
        ("lp", Some(_)) => bail!("--bound is only available with --method rogers"),
        (other, _) => bail!("unknown method {other:?} (expected rogers or lp)"),
    };
    out["method"] = json!(method);
    Ok(out)
}

pub fn superrep(path: &Path, payoff: &str, gamma: Option<f64>) -> Outcome {
    let Loaded { doc, market } = load(path)?;
    let xi = doc.target(payoff, &market.tree)?;
    settle(superreplicate(&market, &xi), |r| {
        let mut out = json!({
            "exists": true,
            "price": r.cost[market.tree.root()],
            "dual_price": r.dual_price,
            "duality_gap": r.duality_gap,
            "violation": superreplication_violation(&market, &xi, &r),
            "nodes": rows(&market, market.horizon(), |u, row| {
                row.insert("target".into(), if has_target(&xi, u) { json!(xi[u]) } else { Value::Null });
                row.insert("cost".into(), json!(r.cost[u]));
                row.insert("binding_deflator".into(), json!(r.binding_deflator[u]));
                row.insert("holdings".into(), holdings(&r.strategy, u));
            }),
        });
        if let Some(g) = gamma {
            let h = risk_averse_hedge(&market, &r.cost, g)?;
            out["risk_averse"] = json!({
                "gamma": h.gamma,
                "cost": h.cost,
                "shortfall": h.shortfall,
                "nodes": rows(&market, market.horizon(), |u, row| {
                    row.insert("holdings".into(), holdings(&h.strategy, u));
                }),
            });
        }
        Ok(out)
    })
}

pub fn replicate_cmd(path: &Path, payoff: &str) -> Outcome {
    let Loaded { doc, market } = load(path)?;
    let payoff = doc.payoff(payoff)?;
    Ok(match replicate(&market, &payoff) {
        None => json!({ "attainable": false }),
        Some(r) => json!({
            "attainable": true,
            "price": r.value[market.tree.root()],
            "nodes": rows(&market, market.horizon(), |u, row| {
                row.insert("value".into(), json!(r.value[u]));
                row.insert("holdings".into(), holdings(&r.strategy, u));
            }),
        }),
    })
}

pub fn complete(path: &Path) -> Outcome {
    let Loaded { market, .. } = load(path)?;
    Ok(serde_json::to_value(completeness_check(&market)?)?)
}

pub fn numeraire(path: &Path, riskfree: bool) -> Outcome {
    let Loaded { market, .. } = load(path)?;
    let horizon = market.horizon();
    if riskfree {
        return settle(build_riskfree_numeraire(&market), |r| {
            Ok(json!({
                "exists": true,
                "nodes": rows(&market, horizon, |u, row| {
                    row.insert("beta".into(), json!(r.beta[u]));
                    let bond = if market.tree.is_leaf(u) { Value::Null } else { json!(r.bond_price[u]) };
                    row.insert("bond_price".into(), bond);
                    row.insert("holdings".into(), holdings(&r.eta, u));
                }),
            }))
        });
    }
    Ok(match find_numeraire(&market)? {
        None => json!({ "exists": false }),
        Some(eta) => json!({
            "exists": true,
            "nodes": rows(&market, horizon, |u, row| {
                row.insert("wealth".into(), json!(eta.wealth(&market, u)));
                row.insert("holdings".into(), holdings(&eta, u));
            }),
        }),
    })
}

/// `auto` searches for a numeraire; otherwise an asset name or index held buy-and-hold.
fn numeraire_strategy(market: &Market, spec: &str) -> anyhow::Result<Option<Strategy>> {
    if spec == "auto" {
        return Ok(find_numeraire(market)?);
    }
    let i = match market.assets.iter().position(|a| a == spec) {
        Some(i) => i,
        None => spec
            .parse::<usize>()
            .ok()
            .filter(|&i| i < market.n_assets())
            .ok_or_else(|| anyhow!("no asset {spec:?} (names: {})", market.assets.join(", ")))?,
    };
    let mut e = vec![0.0; market.n_assets()];
    e[i] = 1.0;
    Ok(Some(Strategy::buy_and_hold(&market.tree, &e, market.horizon())))
}

pub fn emm(path: &Path, numeraire: &str) -> Outcome {
    let Loaded { market, .. } = load(path)?;
    let horizon = market.horizon();
    let Some(eta) = numeraire_strategy(&market, numeraire)? else {
        return Ok(json!({ "exists": false, "finding": "market has no numeraire" }));
    };
    settle(build_deflator(&market), |d| {
        settle(numeraire_values(&market, &eta, horizon, market.tol.eq), |n| {
            let q = deflator_to_emm(&market, &d.y, &eta, horizon)?;
            Ok(json!({
                "exists": true,
                "numeraire": numeraire,
                "discounted_price_residual": discounted_price_residual(&market, &q, &n, horizon),
                "nodes": rows(&market, horizon, |u, row| {
                    row.insert("p".into(), json!(market.tree.cond_prob(u)));
                    row.insert("q".into(), json!(q.cond_prob(u)));
                    row.insert("numeraire".into(), json!(n[u]));
                    row.insert("deflator".into(), json!(d.y[u]));
                }),
            }))
        })
    })
}

pub fn utility(path: &Path, x0: f64, spec: &str) -> Outcome {
    let Loaded { doc, market } = load(path)?;
    let spec = doc.utility_spec(spec)?;
    settle(solve_utility(&market, x0, spec), |plan| {
        let verdict = match verify_optimality(&market, &plan, spec) {
            Verdict::Certified => json!("certified"),
            Verdict::Refuted { check, .. } => json!({ "refuted": check }),
        };
        Ok(json!({
            "exists": true,
            "x0": plan.x0,
            "value": optional(plan.value),
            "iterations": plan.iterations,
            "martingale_residual": plan.residual,
            "verdict": verdict,
            "nodes": rows(&market, spec.horizon, |u, row| {
                row.insert("consumption".into(), json!(plan.consumption[u]));
                row.insert("deflator".into(), json!(plan.deflator[u]));
                row.insert("holdings".into(), holdings(&plan.strategy, u));
            }),
        }))
    })
}

fn witness_json(market: &Market, w: &Option<SignedDeflator>) -> Value {
    match w {
        None => json!({ "exists": false }),
        Some(d) => json!({
            "exists": true,
            "nonnegative": d.nonnegative,
            "terminal_positive": d.terminal_positive,
            "residual": d.residual(market),
            "nodes": rows(market, d.horizon, |u, row| {
                row.insert("y".into(), json!(d.y[u]));
            }),
        }),
    }
}

pub fn bubble(path: &Path, horizon: Option<usize>) -> Outcome {
    let Loaded { market, .. } = load(path)?;
    let r = bubble_report(&market, horizon.unwrap_or(market.horizon()))?;
    Ok(json!({
        "verdict": r.verdict.name(),
        "horizon": r.horizon,
        "consistent": r.is_consistent(),
        "ic": certificate_json(&market, &r.ic, ArbitrageKind::InvestmentConsumption),
        "tc": certificate_json(&market, &r.tc, ArbitrageKind::TerminalConsumption),
        "pi": certificate_json(&market, &r.pi, ArbitrageKind::PureInvestment),
        "nonnegative_deflator": witness_json(&market, &r.nonnegative_deflator),
        "signed_deflator": witness_json(&market, &r.signed_deflator),
    }))
}

/// A generated model as a document.
pub fn gen(seed: u64, depth: usize, branching: usize, assets: usize, mode: &str) -> anyhow::Result<ModelDocument> {
    let mode = GenMode::parse(mode)
        .ok_or_else(|| anyhow!("unknown mode {mode:?} (expected planted or adversarial)"))?;
    let market = generate_model(&GenParams::new(seed, depth, branching, assets, mode))?;
    Ok(ModelDocument::from_market(&market)?)
}

pub fn write_model(doc: &ModelDocument, path: &Path) -> Outcome {
    save_model(doc, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(json!({
        "written": path.display().to_string(),
        "nodes": doc.nodes.len(),
        "assets": doc.assets,
    }))
}
