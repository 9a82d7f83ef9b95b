//! Dense BFGS with a strong Wolfe line search.
//!
//! Iteration stops when `||grad E||_inf / max(|E|, energy_floor) <= tolerance`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::energy::{DiscreteEnergy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::grid::PolygonalCurve;

/// A smooth function of `R^n` with its gradient.
pub trait Objective {
    fn dim(&self) -> usize;
    /// Returns the value and writes the gradient into `grad`.
    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;
}

impl Objective for DiscreteEnergy {
    fn dim(&self) -> usize {
        self.grid().len()
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        DiscreteEnergy::value_and_gradient(self, x, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub wolfe_c1: f64,
    pub wolfe_c2: f64,
    /// Lower bound on `|E|` in the stopping quotient.
    pub energy_floor: f64,
    pub record_trace: bool,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-5,
            max_iterations: 10_000,
            wolfe_c1: 1e-4,
            wolfe_c2: 0.9,
            energy_floor: 1e-12,
            record_trace: false,
        }
    }
}

impl MinimizeOptions {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.wolfe_c1 && self.wolfe_c1 < self.wolfe_c2 && self.wolfe_c2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.wolfe_c1, self.wolfe_c2
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if !(self.energy_floor > 0.0) {
            return Err(Error::InvalidParameter("energy_floor must be positive".into()));
        }
        Ok(())
    }
}

/// `||grad||_inf / max(|energy|, energy_floor)`
pub fn stopping_criterion(gradient: &[f64], energy: f64, options: &MinimizeOptions) -> f64 {
    let g = gradient.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    g / energy.abs().max(options.energy_floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub energy: f64,
    pub criterion: f64,
    pub step_length: f64,
}

/// Raw outcome of [`bfgs`].
#[derive(Debug, Clone)]
pub struct Minimization {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Accepted line-search steps.
    pub iterations: usize,
    pub final_criterion: f64,
    pub converged: bool,
    pub restarts: usize,
    pub diagnostic: Option<String>,
    pub trace: Vec<TraceEntry>,
}

const MAX_LINE_SEARCH_EVALS: usize = 40;
const MAX_CONSECUTIVE_FAILURES: usize = 2;
/// Relative energy rise the derivative search tolerates as rounding noise.
const ROUNDING_SLACK: f64 = 1e-14;

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `objective` from `x0`.
pub fn bfgs<O: Objective + ?Sized>(objective: &O, x0: &[f64], options: &MinimizeOptions) -> Minimization {
    let n = objective.dim();
    assert_eq!(x0.len(), n, "initial point has wrong dimension");

    let mut g = vec![0.0; n];
    let f = objective.value_and_gradient(x0, &mut g);
    let mut cur = Point { x: x0.to_vec(), f, g };
    let mut criterion = stopping_criterion(&cur.g, cur.f, options);
    let mut trace = Vec::new();
    if options.record_trace {
        trace.push(TraceEntry {
            iter: 0,
            energy: cur.f,
            criterion,
            step_length: 0.0,
        });
    }

    // inverse Hessian approximation, row-major
    let mut hinv = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut restarts = 0;
    let mut failures = 0;
    let mut diagnostic = None;

    while criterion > options.tolerance {
        if !cur.f.is_finite() {
            diagnostic = Some("energy became non-finite".to_string());
            break;
        }
        if iterations >= options.max_iterations {
            diagnostic = Some(format!("reached max_iterations = {}", options.max_iterations));
            break;
        }

        let mut dir = mat_vec(&hinv, &cur.g);
        dir.iter_mut().for_each(|d| *d = -*d);
        let mut slope = dot(&dir, &cur.g);
        if !(slope < 0.0) {
            // not a descent direction: fall back to steepest descent
            reset(&mut hinv);
            fresh = true;
            restarts += 1;
            dir = cur.g.iter().map(|g| -g).collect();
            slope = dot(&dir, &cur.g);
        }
        let alpha0 = if fresh {
            let dmax = dir.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
            (1e-2 / dmax).min(1.0)
        } else {
            1.0
        };

        let found = line_search(objective, &cur, &dir, slope, alpha0, options)
            .or_else(|| derivative_search(objective, &cur, &dir, slope, alpha0, options))
            // a step below the rounding of x makes no progress and would repeat forever
            .filter(|(p, _)| p.x != cur.x);
        let next = match found {
            Some(p) => p,
            None => {
                failures += 1;
                if fresh || failures > MAX_CONSECUTIVE_FAILURES {
                    diagnostic = Some(format!(
                        "line search failed along steepest descent at iteration {iterations}"
                    ));
                    break;
                }
                reset(&mut hinv);
                fresh = true;
                restarts += 1;
                continue;
            }
        };
        failures = 0;
        let (next, alpha) = next;

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * yy.sqrt() && sy > 0.0 {
            if fresh {
                let scale = sy / yy;
                hinv.iter_mut().for_each(|v| *v *= scale);
                fresh = false;
            }
            bfgs_update(&mut hinv, &s, &y, sy);
        }

        cur = next;
        iterations += 1;
        criterion = stopping_criterion(&cur.g, cur.f, options);
        if options.record_trace {
            trace.push(TraceEntry {
                iter: iterations,
                energy: cur.f,
                criterion,
                step_length: alpha,
            });
        }
    }

    Minimization {
        converged: criterion <= options.tolerance,
        x: cur.x,
        value: cur.f,
        gradient: cur.g,
        iterations,
        final_criterion: criterion,
        restarts,
        diagnostic,
        trace,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn reset(m: &mut [f64]) {
    let n = (m.len() as f64).sqrt() as usize;
    m.iter_mut().for_each(|v| *v = 0.0);
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
}

fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// `H <- (I - r s y^T) H (I - r y s^T) + r s s^T`, `r = 1 / (y^T s)`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let r = 1.0 / sy;
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let coef = (1.0 + r * yhy) * r;
    for i in 0..n {
        let row = &mut h[i * n..(i + 1) * n];
        for j in 0..n {
            row[j] += coef * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

fn evaluate<O: Objective + ?Sized>(objective: &O, base: &[f64], dir: &[f64], alpha: f64) -> Point {
    let x: Vec<f64> = base.iter().zip(dir).map(|(b, d)| b + alpha * d).collect();
    let mut g = vec![0.0; x.len()];
    let f = objective.value_and_gradient(&x, &mut g);
    Point { x, f, g }
}

/// Minimizer of the cubic interpolating `(a, fa, da)` and `(b, fb, db)`,
/// safeguarded into the middle 80% of the bracket.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (hi - lo);
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mid = 0.5 * (a + b);
    let t = if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
        if t.is_finite() {
            t
        } else {
            mid
        }
    } else {
        mid
    };
    t.clamp(lo + margin, hi - margin)
}

/// Strong Wolfe line search; `None` when no acceptable step was found within
/// the evaluation budget.
fn line_search<O: Objective + ?Sized>(
    objective: &O,
    cur: &Point,
    dir: &[f64],
    slope0: f64,
    alpha0: f64,
    opts: &MinimizeOptions,
) -> Option<(Point, f64)> {
    let f0 = cur.f;
    let armijo = |alpha: f64, f: f64| f <= f0 + opts.wolfe_c1 * alpha * slope0;
    let curvature = |d: f64| d.abs() <= -opts.wolfe_c2 * slope0;

    let mut prev_alpha = 0.0;
    let mut prev_f = f0;
    let mut prev_d = slope0;
    let mut prev_point: Option<Point> = None;
    let mut alpha = alpha0;
    let mut evals = 0;

    let bracket = loop {
        if evals >= MAX_LINE_SEARCH_EVALS {
            return None;
        }
        evals += 1;
        let p = evaluate(objective, &cur.x, dir, alpha);
        let d = dot(&p.g, dir);
        if !p.f.is_finite() {
            // step too long: shrink towards the last finite point
            alpha = prev_alpha + 0.1 * (alpha - prev_alpha);
            continue;
        }
        if !armijo(alpha, p.f) || (evals > 1 && p.f >= prev_f) {
            break (prev_alpha, prev_f, prev_d, prev_point, alpha, p.f, d, Some(p));
        }
        if curvature(d) {
            return Some((p, alpha));
        }
        if d >= 0.0 {
            break (alpha, p.f, d, Some(p), prev_alpha, prev_f, prev_d, prev_point);
        }
        prev_alpha = alpha;
        prev_f = p.f;
        prev_d = d;
        prev_point = Some(p);
        alpha *= 2.0;
    };

    let (mut lo, mut f_lo, mut d_lo, _, mut hi, mut f_hi, mut d_hi, _) = bracket;
    while evals < MAX_LINE_SEARCH_EVALS {
        evals += 1;
        let a = cubic_step(lo, f_lo, d_lo, hi, f_hi, d_hi);
        let p = evaluate(objective, &cur.x, dir, a);
        let d = dot(&p.g, dir);
        if !armijo(a, p.f) || p.f >= f_lo {
            hi = a;
            f_hi = p.f;
            d_hi = d;
        } else {
            if curvature(d) {
                return Some((p, a));
            }
            if d * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = a;
            f_lo = p.f;
            d_lo = d;
        }
        if (hi - lo).abs() <= 1e-16 * lo.abs().max(1e-300) {
            break;
        }
    }
    None
}

/// Fallback for when energy differences drop below rounding: brackets a root
/// of the directional derivative and accepts the approximate Wolfe conditions
/// `c2 phi'(0) <= phi'(a) <= (2 c1' - 1) phi'(0)` (with `c1' = 0.1`), never
/// letting the energy rise by more than rounding.
fn derivative_search<O: Objective + ?Sized>(
    objective: &O,
    cur: &Point,
    dir: &[f64],
    slope0: f64,
    alpha0: f64,
    opts: &MinimizeOptions,
) -> Option<(Point, f64)> {
    let f0 = cur.f + ROUNDING_SLACK * cur.f.abs().max(1.0);
    let upper = (2.0 * 0.1 - 1.0) * slope0;
    let lower = opts.wolfe_c2 * slope0;

    let (mut lo, mut d_lo) = (0.0, slope0);
    let mut p_lo: Option<Point> = None;
    let mut hi: Option<(f64, f64)> = None;
    let mut alpha = alpha0;
    for _ in 0..2 * MAX_LINE_SEARCH_EVALS {
        let p = evaluate(objective, &cur.x, dir, alpha);
        let d = dot(&p.g, dir);
        if p.f.is_finite() && p.f <= f0 && d >= lower && d <= upper {
            return Some((p, alpha));
        }
        if p.f.is_finite() && d < 0.0 && p.f <= f0 {
            lo = alpha;
            d_lo = d;
            p_lo = Some(p);
        } else {
            hi = Some((alpha, if d.is_finite() { d } else { f64::NAN }));
        }
        alpha = match hi {
            None => 2.0 * alpha,
            Some((a_hi, d_hi)) => {
                let mid = 0.5 * (lo + a_hi);
                let t = if d_hi.is_finite() && d_hi > 0.0 {
                    // secant on the derivative
                    lo - d_lo * (a_hi - lo) / (d_hi - d_lo)
                } else {
                    mid
                };
                let margin = 0.1 * (a_hi - lo);
                if t.is_finite() {
                    t.clamp(lo + margin, a_hi - margin)
                } else {
                    mid
                }
            }
        };
        if let Some((a_hi, _)) = hi {
            if a_hi - lo <= 1e-16 * a_hi {
                break;
            }
        }
    }
    match p_lo {
        Some(p) if lo > 0.0 => Some((p, lo)),
        _ => None,
    }
}

/// Outcome of [`minimize_bfgs`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub curve: PolygonalCurve,
    pub breakdown: EnergyBreakdown,
    pub iterations: usize,
    pub final_criterion: f64,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEntry>,
}

pub fn minimize_bfgs(
    initial: &PolygonalCurve,
    energy: &DiscreteEnergy,
    options: &MinimizeOptions,
) -> Result<MinimizeResult> {
    options.validate()?;
    if initial.grid() != energy.grid() {
        return Err(Error::LengthMismatch {
            expected: energy.grid().len(),
            got: initial.len(),
        });
    }
    let m = bfgs(energy, initial.values(), options);
    let curve = PolygonalCurve::new(initial.grid(), m.x)?;
    Ok(MinimizeResult {
        breakdown: energy.breakdown(curve.values()),
        curve,
        iterations: m.iterations,
        final_criterion: m.final_criterion,
        converged: m.converged,
        diagnostic: m.diagnostic,
        trace: m.trace,
    })
}

/// Writes an iteration trace as CSV `iter,energy,criterion,step_length`.
pub fn write_trace_csv<W: Write>(trace: &[TraceEntry], writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["iter", "energy", "criterion", "step_length"])?;
    for t in trace {
        w.serialize((t.iter, t.energy, t.criterion, t.step_length))?;
    }
    w.flush()?;
    Ok(())
}
