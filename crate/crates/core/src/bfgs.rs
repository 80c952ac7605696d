//! Dense BFGS minimizer with a strong Wolfe line search.
//!
//! Follows the textbook inverse-Hessian update and the bracketing/zoom line
//! search (Nocedal & Wright, chapters 3 and 6). The search maximizes `J` by
//! minimizing `-J`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub objective_tolerance: f64,
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_line_search_evaluations: usize,
    /// After convergence, keep iterating with a derivative-only line search
    /// until the gradient norm drops below this value.
    pub polish_gradient_tolerance: Option<f64>,
    pub max_polish_iterations: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            gradient_tolerance: 1e-8,
            objective_tolerance: 1e-12,
            c1: 1e-4,
            c2: 0.9,
            max_line_search_evaluations: 40,
            polish_gradient_tolerance: None,
            max_polish_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    ObjectiveTolerance,
    MaxIterations,
    /// No acceptable step was found; the best point so far is returned.
    LineSearchFailed,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::GradientTolerance | Termination::ObjectiveTolerance
        )
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective at the initial point and after every accepted step of the
    /// main phase.
    pub trace: Vec<f64>,
    pub termination: Termination,
    pub polish_iterations: usize,
}

struct Probe {
    alpha: f64,
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
    slope: f64,
}

/// Minimizes `f` starting from `x0`. `f` returns the value and gradient.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &DVector<f64>| {
        evaluations += 1;
        let (v, g) = f(x.as_slice());
        (v, DVector::from_vec(g))
    };

    let mut x = DVector::from_column_slice(x0);
    let (mut fx, mut gx) = eval(&x);
    let mut trace = vec![fx];
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut first_update = true;
    let mut iterations = 0;

    let termination = loop {
        if gx.norm() <= opts.gradient_tolerance || n == 0 {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        let mut d = -(&h * &gx);
        let mut slope = gx.dot(&d);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            first_update = true;
            d = -gx.clone();
            slope = gx.dot(&d);
        }
        let alpha0 = if first_update {
            (1.0 / gx.norm()).min(1e3)
        } else {
            1.0
        };
        let probe = match line_search(&mut eval, &x, fx, slope, &d, alpha0, opts) {
            Some(p) => p,
            None => break Termination::LineSearchFailed,
        };
        iterations += 1;
        let s = &probe.x - &x;
        let y = &probe.g - &gx;
        let sy = s.dot(&y);
        let df = fx - probe.f;
        x = probe.x;
        fx = probe.f;
        gx = probe.g;
        trace.push(fx);
        if sy > 1e-14 * s.norm() * y.norm() && sy > 0.0 {
            if first_update {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                first_update = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H <- H - rho (s hy^T + hy s^T) + (rho^2 y^T H y + rho) s s^T
            h -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
        }
        if df.abs() <= opts.objective_tolerance {
            break if gx.norm() <= opts.gradient_tolerance {
                Termination::GradientTolerance
            } else {
                Termination::ObjectiveTolerance
            };
        }
    };

    let mut polish_iterations = 0;
    if let Some(tol) = opts.polish_gradient_tolerance {
        if termination.converged() {
            while gx.norm() > tol && polish_iterations < opts.max_polish_iterations {
                let mut d = -(&h * &gx);
                if !(gx.dot(&d) < 0.0) {
                    h = DMatrix::identity(n, n);
                    d = -gx.clone();
                }
                let Some(p) =
                    slope_search(&mut eval, &x, fx, &gx, &d, opts.max_line_search_evaluations)
                else {
                    break;
                };
                polish_iterations += 1;
                let s = &p.x - &x;
                let y = &p.g - &gx;
                let sy = s.dot(&y);
                x = p.x;
                fx = p.f;
                gx = p.g;
                if sy > 0.0 {
                    let rho = 1.0 / sy;
                    let hy = &h * &y;
                    let yhy = y.dot(&hy);
                    h -= (&s * hy.transpose() + &hy * s.transpose()) * rho;
                    h += (&s * s.transpose()) * (rho * rho * yhy + rho);
                }
            }
        }
    }

    BfgsOutcome {
        x: x.as_slice().to_vec(),
        value: fx,
        gradient_norm: gx.norm(),
        iterations,
        evaluations,
        trace,
        termination,
        polish_iterations,
    }
}

/// Line search for the polishing phase. Near a minimum the change in `f` is
/// below roundoff, so steps are accepted on the directional derivative alone:
/// `|phi'(alpha)| <= |phi'(0)| / 2` with `f` allowed to rise by a few ulps.
fn slope_search<E>(
    eval: &mut E,
    x: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    d: &DVector<f64>,
    budget: usize,
) -> Option<Probe>
where
    E: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let slope0 = g0.dot(d);
    let slack = 64.0 * f64::EPSILON * f0.abs().max(1.0);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    let (mut slope_lo, mut slope_hi) = (slope0, f64::NAN);
    let mut alpha = 1.0;
    for _ in 0..budget {
        let xa = x + d * alpha;
        let (fa, ga) = eval(&xa);
        let slope = ga.dot(d);
        if !fa.is_finite() || fa > f0 + slack {
            hi = alpha;
            slope_hi = f64::NAN;
        } else if slope.abs() <= 0.5 * slope0.abs() {
            return Some(Probe {
                alpha,
                x: xa,
                f: fa,
                g: ga,
                slope,
            });
        } else if slope < 0.0 {
            lo = alpha;
            slope_lo = slope;
        } else {
            hi = alpha;
            slope_hi = slope;
        }
        alpha = if hi.is_infinite() {
            2.0 * alpha
        } else if slope_hi.is_finite() && slope_hi > slope_lo {
            // Secant on the derivative, kept inside the bracket.
            let t = lo - slope_lo * (hi - lo) / (slope_hi - slope_lo);
            t.clamp(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo))
        } else {
            0.5 * (lo + hi)
        };
    }
    None
}

/// Strong Wolfe line search. Returns `None` when no point with sufficient
/// decrease is found.
fn line_search<E>(
    eval: &mut E,
    x: &DVector<f64>,
    f0: f64,
    slope0: f64,
    d: &DVector<f64>,
    alpha0: f64,
    opts: &BfgsOptions,
) -> Option<Probe>
where
    E: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut probe_at = |alpha: f64, eval: &mut E| {
        let xa = x + d * alpha;
        let (fa, ga) = eval(&xa);
        let slope = ga.dot(d);
        Probe {
            alpha,
            x: xa,
            f: fa,
            g: ga,
            slope,
        }
    };
    let armijo = |p: &Probe| p.f <= f0 + opts.c1 * p.alpha * slope0 && p.f.is_finite();
    let curvature = |p: &Probe| p.slope.abs() <= -opts.c2 * slope0;

    let mut budget = opts.max_line_search_evaluations;
    let mut prev = Probe {
        alpha: 0.0,
        x: x.clone(),
        f: f0,
        g: DVector::zeros(0),
        slope: slope0,
    };
    let mut alpha = alpha0;
    let mut best: Option<Probe> = None;
    let mut first = true;
    while budget > 0 {
        budget -= 1;
        let cur = probe_at(alpha, eval);
        if armijo(&cur) && best.as_ref().is_none_or(|b| cur.f < b.f) {
            best = Some(Probe {
                alpha: cur.alpha,
                x: cur.x.clone(),
                f: cur.f,
                g: cur.g.clone(),
                slope: cur.slope,
            });
        }
        if !armijo(&cur) || (!first && cur.f >= prev.f) {
            return zoom(
                &mut probe_at,
                eval,
                prev,
                cur,
                f0,
                slope0,
                opts,
                &mut budget,
            )
            .or(best);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            return zoom(
                &mut probe_at,
                eval,
                cur,
                prev,
                f0,
                slope0,
                opts,
                &mut budget,
            )
            .or(best);
        }
        prev = cur;
        alpha *= 2.0;
        first = false;
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn zoom<E, P>(
    probe_at: &mut P,
    eval: &mut E,
    mut lo: Probe,
    mut hi: Probe,
    f0: f64,
    slope0: f64,
    opts: &BfgsOptions,
    budget: &mut usize,
) -> Option<Probe>
where
    P: FnMut(f64, &mut E) -> Probe,
{
    let mut best: Option<Probe> = None;
    while *budget > 0 {
        *budget -= 1;
        let (a, b) = (lo.alpha, hi.alpha);
        // Quadratic interpolation from lo's value and slope and hi's value,
        // kept inside the middle 80% of the bracket.
        let width = b - a;
        let denom = 2.0 * (hi.f - lo.f - lo.slope * width);
        let mut trial = if denom.abs() > 0.0 && denom.is_finite() {
            a - lo.slope * width * width / denom
        } else {
            0.5 * (a + b)
        };
        let (left, right) = if a < b { (a, b) } else { (b, a) };
        let margin = 0.1 * (right - left);
        if !trial.is_finite() || trial < left + margin || trial > right - margin {
            trial = 0.5 * (a + b);
        }
        if (right - left).abs() < 1e-16 * right.abs().max(1.0) {
            break;
        }
        let cur = probe_at(trial, eval);
        let sufficient = cur.f <= f0 + opts.c1 * cur.alpha * slope0 && cur.f.is_finite();
        if sufficient && best.as_ref().is_none_or(|bst| cur.f < bst.f) {
            best = Some(Probe {
                alpha: cur.alpha,
                x: cur.x.clone(),
                f: cur.f,
                g: cur.g.clone(),
                slope: cur.slope,
            });
        }
        if !sufficient || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.slope.abs() <= -opts.c2 * slope0 {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // Fall back to the best sufficient-decrease point, including the bracket's low end.
    if lo.alpha > 0.0
        && lo.f <= f0 + opts.c1 * lo.alpha * slope0
        && best.as_ref().is_none_or(|b| lo.f < b.f)
    {
        return Some(lo);
    }
    best
}
