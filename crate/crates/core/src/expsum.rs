//! Minimization of exponential sums `F(h) = Σ_k exp(w_k + h·v_k)`.
//!
//! Both the one-step deflator construction and the risk-averse hedge reduce to
//! this problem. `F` is smooth and strictly convex on `V = span{v_k}`, so the
//! search is restricted to `V` (coordinates in an orthonormal basis) and run
//! with damped Newton in the log domain. When `F` has no minimizer the iterates
//! run off to infinity along an arbitrage direction.

use nalgebra::{DMatrix, DVector};

use crate::linalg::span_basis;

#[derive(Debug, Clone, PartialEq)]
pub struct ExpTerm {
    pub log_weight: f64,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Iterates beyond this norm are taken as divergent.
    pub radius: f64,
    pub armijo: f64,
    pub shrink: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 500, radius: 1e4, armijo: 1e-4, shrink: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpMinimum {
    /// Minimizer in the full space (lies in `V`).
    pub h: Vec<f64>,
    pub log_value: f64,
    /// Euclidean norm of `∇F(h)` restricted to `V`.
    pub grad_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExpOutcome {
    Minimum(ExpMinimum),
    /// Iterates left the ball of radius `radius`; `direction` is the normalized last iterate.
    Unbounded { direction: Vec<f64>, iterations: usize },
    /// Neither converged nor diverged within the iteration budget.
    Stalled { h: Vec<f64>, grad_norm: f64, iterations: usize },
}

#[derive(Debug, Clone)]
pub struct ExpSum {
    n: usize,
    terms: Vec<ExpTerm>,
    basis: Vec<Vec<f64>>,
    /// Term vectors in basis coordinates.
    reduced: Vec<DVector<f64>>,
    wscale: f64,
}

struct Eval {
    log_f: f64,
    /// Gradient and Hessian of `F · exp(-max exponent)`, and that scaled `F`.
    g: DVector<f64>,
    h: DMatrix<f64>,
    f: f64,
    s: Vec<f64>,
}

impl ExpSum {
    pub fn new(n: usize, terms: Vec<ExpTerm>) -> Self {
        assert!(terms.iter().all(|t| t.v.len() == n), "term dimension");
        let rows: Vec<&[f64]> = terms.iter().map(|t| t.v.as_slice()).collect();
        let basis = span_basis(&rows, n);
        let reduced = terms
            .iter()
            .map(|t| DVector::from_iterator(basis.len(), basis.iter().map(|b| dot(b, &t.v))))
            .collect();
        let wscale = terms
            .iter()
            .flat_map(|t| t.v.iter())
            .fold(1.0f64, |m, x| m.max(x.abs()));
        ExpSum { n, terms, basis, reduced, wscale }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Orthonormal basis of `V`.
    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    fn exponents(&self, h: &[f64]) -> Vec<f64> {
        self.terms.iter().map(|t| t.log_weight + dot(h, &t.v)).collect()
    }

    pub fn log_value(&self, h: &[f64]) -> f64 {
        log_sum_exp(&self.exponents(h))
    }

    pub fn value(&self, h: &[f64]) -> f64 {
        self.exponents(h).iter().map(|e| e.exp()).sum()
    }

    /// Full-space gradient `Σ v_k exp(w_k + h·v_k)`.
    pub fn gradient(&self, h: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (t, e) in self.terms.iter().zip(self.exponents(h)) {
            let s = e.exp();
            for (gi, vi) in g.iter_mut().zip(&t.v) {
                *gi += s * vi;
            }
        }
        g
    }

    /// Maps basis coordinates to the full space.
    pub fn lift(&self, a: &DVector<f64>) -> Vec<f64> {
        let mut h = vec![0.0; self.n];
        for (b, &ak) in self.basis.iter().zip(a.iter()) {
            for (hi, bi) in h.iter_mut().zip(b) {
                *hi += ak * bi;
            }
        }
        h
    }

    fn eval(&self, a: &DVector<f64>) -> Eval {
        let k = self.basis.len();
        let e: Vec<f64> =
            self.terms.iter().zip(&self.reduced).map(|(t, w)| t.log_weight + a.dot(w)).collect();
        let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        let mut f = 0.0;
        let mut scaled = Vec::with_capacity(e.len());
        for (ei, w) in e.iter().zip(&self.reduced) {
            let s = (ei - m).exp();
            f += s;
            g.axpy(s, w, 1.0);
            h.ger(s, w, w, 1.0);
            scaled.push(s);
        }
        Eval { log_f: m + f.ln(), g, h, f, s: scaled }
    }

    /// Gradient of `F` on `V`, in basis coordinates and true scale.
    fn grad_norm(&self, ev: &Eval) -> f64 {
        (ev.log_f - ev.f.ln()).exp() * ev.g.norm()
    }

    pub fn minimize(&self, opts: &NewtonOptions) -> ExpOutcome {
        let k = self.basis.len();
        let mut a = DVector::zeros(k);
        if k == 0 {
            return ExpOutcome::Minimum(ExpMinimum {
                h: vec![0.0; self.n],
                log_value: self.log_value(&vec![0.0; self.n]),
                grad_norm: 0.0,
                iterations: 0,
            });
        }
        let target = 1e-13 * self.wscale;
        let mut ev = self.eval(&a);
        let mut polish = 0;
        for iter in 0..opts.max_iter {
            let rel = ev.g.norm() / ev.f;
            let d = newton_direction(&ev);
            // a minimizer has small Newton steps; along an escape direction the
            // gradient vanishes but the step does not
            let short = d.norm() <= 1e-6 * (1.0 + a.norm());
            if rel <= target && short {
                if !self.curved(&ev) {
                    // gradient and curvature both vanished: the iterate is escaping
                    return self.escape(&a, iter);
                }
                polish += 1;
                if polish > 2 {
                    return self.converged(&a, &ev, iter);
                }
            }
            let slope = ev.g.dot(&d) / ev.f;
            if !(slope < 0.0) {
                return self.settle(&a, &ev, iter, rel, short);
            }
            let dw: Vec<f64> = self.reduced.iter().map(|w| w.dot(&d)).collect();
            // exact change of ln F along the ray, resolving decreases far below ε·F
            let delta = |t: f64| -> f64 {
                let s: f64 = ev.s.iter().zip(&dw).map(|(sk, x)| sk * (t * x).exp_m1()).sum();
                (s / ev.f).ln_1p()
            };
            let mut t = 1.0;
            let mut accepted: Option<(f64, f64)> = None;
            while t > 1e-12 {
                let df = delta(t);
                if df <= opts.armijo * t * slope {
                    accepted = Some((t, df));
                    break;
                }
                t *= opts.shrink;
            }
            let Some((mut t, mut df)) = accepted else {
                return self.settle(&a, &ev, iter, rel, short);
            };
            if t == 1.0 {
                // expand until the decrease stalls or the iterate leaves the ball
                while (&a + &d * t).norm() <= opts.radius {
                    let t2 = 2.0 * t;
                    let df2 = delta(t2);
                    if df2 <= df {
                        t = t2;
                        df = df2;
                    } else {
                        break;
                    }
                }
            }
            a += &d * t;
            if a.norm() > opts.radius {
                return self.escape(&a, iter + 1);
            }
            ev = self.eval(&a);
        }
        let rel = ev.g.norm() / ev.f;
        self.settle(&a, &ev, opts.max_iter, rel, false)
    }

    /// Whether the scaled Hessian is safely positive definite.
    fn curved(&self, ev: &Eval) -> bool {
        let lmin = ev.h.clone().symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        lmin / ev.f > 1e-14 * self.wscale * self.wscale
    }

    fn escape(&self, a: &DVector<f64>, iterations: usize) -> ExpOutcome {
        let h = self.lift(a);
        let nrm = norm(&h);
        if nrm > 0.0 {
            ExpOutcome::Unbounded { direction: h.iter().map(|x| x / nrm).collect(), iterations }
        } else {
            ExpOutcome::Stalled { h, grad_norm: 0.0, iterations }
        }
    }

    fn converged(&self, a: &DVector<f64>, ev: &Eval, iterations: usize) -> ExpOutcome {
        ExpOutcome::Minimum(ExpMinimum {
            h: self.lift(a),
            log_value: ev.log_f,
            grad_norm: self.grad_norm(ev),
            iterations,
        })
    }

    /// No further progress is possible: a minimum if the gradient is at the rounding floor.
    fn settle(
        &self,
        a: &DVector<f64>,
        ev: &Eval,
        iterations: usize,
        rel: f64,
        short: bool,
    ) -> ExpOutcome {
        if rel <= 1e-10 * self.wscale && short {
            if self.curved(ev) {
                self.converged(a, ev, iterations)
            } else {
                self.escape(a, iterations)
            }
        } else {
            ExpOutcome::Stalled { h: self.lift(a), grad_norm: self.grad_norm(ev), iterations }
        }
    }
}

fn newton_direction(ev: &Eval) -> DVector<f64> {
    let k = ev.g.len();
    let neg = -&ev.g;
    if let Some(ch) = ev.h.clone().cholesky() {
        let d = ch.solve(&neg);
        if d.iter().all(|x| x.is_finite()) {
            return d;
        }
    }
    let ridge = 1e-12 * ev.h.trace().max(f64::MIN_POSITIVE);
    let reg = &ev.h + DMatrix::identity(k, k) * ridge;
    match reg.cholesky() {
        Some(ch) => ch.solve(&neg),
        None => neg,
    }
}

pub fn log_sum_exp(e: &[f64]) -> f64 {
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + e.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
