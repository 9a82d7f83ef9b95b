//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use elastica_core::energy::{DiscreteEnergy, PhysicalParams, QuarticBump, RegularizationParams, Term};
use elastica_core::grid::{PeriodicGrid, PolygonalCurve};
use elastica_core::obstacles::Obstacle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TERMS: [Term; 5] = [Term::Bending, Term::Tension, Term::Adhesion, Term::Penalty, Term::Total];

/// Composite Simpson with `panels` (even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// 5-point Gauss-Legendre on `[a, b]`, exact for degree 9.
pub fn gauss5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    X.iter().zip(W).map(|(x, w)| w * f(m + r * x)).sum::<f64>() * r
}

/// A periodic curve with nodal slopes drawn from `[-max_slope, max_slope]`.
pub fn random_curve(rng: &mut ChaCha8Rng, n: usize, max_slope: f64) -> PolygonalCurve {
    let h = 1.0 / n as f64;
    let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-max_slope..max_slope)).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    d.iter_mut().for_each(|x| *x -= mean);
    let mut v = Vec::with_capacity(n);
    let mut acc = rng.random_range(-1.0..1.0);
    for dj in d {
        v.push(acc);
        acc += dj * h;
    }
    PolygonalCurve::from_values(v).unwrap()
}

/// Nodes scattered around `psi` so that adhesion and penalty are both active.
pub fn curve_near_obstacle(rng: &mut ChaCha8Rng, psi: &[f64], delta: f64) -> PolygonalCurve {
    let v = psi.iter().map(|p| p + rng.random_range(-delta..2.0 * delta)).collect();
    PolygonalCurve::from_values(v).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn energy_on(n: usize, obstacle: &Obstacle, params: PhysicalParams, rho: f64) -> DiscreteEnergy {
    let grid = PeriodicGrid::new(n).unwrap();
    let reg = RegularizationParams::new(grid.h(), rho).unwrap();
    DiscreteEnergy::new(grid, obstacle, params, reg, Arc::new(QuarticBump))
}

/// Central differences with step `1e-6 max(1, |v_j|)`.
pub fn central_difference(energy: &DiscreteEnergy, v: &[f64], term: Term) -> Vec<f64> {
    let mut w = v.to_vec();
    (0..v.len())
        .map(|j| {
            let step = 1e-6 * v[j].abs().max(1.0);
            w[j] = v[j] + step;
            let plus = energy.term_value(&w, term);
            w[j] = v[j] - step;
            let minus = energy.term_value(&w, term);
            w[j] = v[j];
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// `||a - b||_inf / max(1, ||a||_inf)`
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    diff / scale
}

/// `C/2 int f''^2 (1 + f'^2)^(-5/2)` for `f = a sin(2 pi k x)`.
pub fn sine_bending(amplitude: f64, cycles: f64, c: f64) -> f64 {
    use std::f64::consts::TAU;
    let w = TAU * cycles;
    let integrand = |x: f64| {
        let d1 = amplitude * w * (w * x).cos();
        let d2 = -amplitude * w * w * (w * x).sin();
        d2 * d2 * (1.0 + d1 * d1).powf(-2.5)
    };
    0.5 * c * simpson(integrand, 0.0, 1.0, 200_000)
}

/// `(theta^2 / (l + m)) (m/l - 1 + l/m)`
pub fn identity_rhs(theta: f64, l: f64, m: f64) -> f64 {
    theta * theta / (l + m) * (m / l - 1.0 + l / m)
}

/// `|| v' - I_h v' ||_{L^p}` integrated exactly on the half cells.
pub fn reconstruction_error(curve: &PolygonalCurve, p: f64) -> f64 {
    let recon = curve.derivative_reconstruction();
    let n = curve.len();
    let h = curve.h();
    let mut total = 0.0;
    for k in 0..n {
        let (a, m, b) = (k as f64 * h, (k as f64 + 0.5) * h, (k + 1) as f64 * h);
        let err = |x: f64| (curve.eval_derivative(m) - recon.eval(x)).abs().powf(p);
        total += gauss5(err, a, m) + gauss5(err, m, b);
    }
    total.powf(1.0 / p)
}
