//! Discrete and continuous energies of a graph curve resting on an obstacle.
//!
//! The discrete functional over periodic polygons is
//!
//! ```text
//! E = B_h + T - A_{h,delta} + P_{h,rho}
//! B_h = C/2 sum theta_j^2 (l_j^3 + l_{j+1}^3) / (l_j l_{j+1} (l_j + l_{j+1})^2)
//! T   = sigma sum 2 l_j
//! A   = gamma sum zeta_{delta,j-1} zeta_{delta,j} 2 l_j
//! P   = 1/rho sum max(0, psi_j - v_j)^2 h
//! ```
//!
//! [`DiscreteEnergy`] caches the obstacle's nodal values for one grid and is the
//! objective handed to the optimizer.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{signed_turning_angle, PeriodicGrid, PolygonalCurve};
use crate::obstacles::Obstacle;
use crate::quadrature;

/// Bending modulus `C`, tension `sigma` and adhesion `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl PhysicalParams {
    pub fn new(c: f64, sigma: f64, gamma: f64) -> Result<Self> {
        let p = Self { c, sigma, gamma };
        p.validate()?;
        Ok(p)
    }

    /// Parameters given as `C/2`, which is how experiment tables list them.
    pub fn from_half_modulus(c_half: f64, sigma: f64, gamma: f64) -> Result<Self> {
        Self::new(2.0 * c_half, sigma, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("C", self.c), ("sigma", self.sigma), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Adhesion range `delta` and penalty parameter `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    pub delta: f64,
    pub rho: f64,
}

impl RegularizationParams {
    pub fn new(delta: f64, rho: f64) -> Result<Self> {
        let r = Self { delta, rho };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta", self.delta), ("rho", self.rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// The even cut-off `zeta` that detects contact. Implementations must supply
/// the exact derivative.
pub trait AdhesionProfile: Send + Sync + std::fmt::Debug {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;

    /// `zeta_delta(t) = zeta(t / delta)`
    fn scaled(&self, t: f64, delta: f64) -> f64 {
        self.value(t / delta)
    }

    fn scaled_derivative(&self, t: f64, delta: f64) -> f64 {
        self.derivative(t / delta) / delta
    }
}

/// `zeta(t) = (1 - t^2)^2` on `|t| <= 1`, zero outside.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuarticBump;

impl AdhesionProfile for QuarticBump {
    fn value(&self, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            0.0
        } else {
            let s = 1.0 - t * t;
            s * s
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        if t.abs() >= 1.0 {
            0.0
        } else {
            -4.0 * t * (1.0 - t * t)
        }
    }
}

/// Per-term energies. `total = bending + tension - adhesion + penalty`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub bending: f64,
    pub tension: f64,
    pub adhesion: f64,
    pub penalty: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn compose(bending: f64, tension: f64, adhesion: f64, penalty: f64) -> Self {
        Self {
            bending,
            tension,
            adhesion,
            penalty,
            total: bending + tension - adhesion + penalty,
        }
    }

    pub const CSV_HEADER: [&'static str; 5] = ["bending", "tension", "adhesion", "penalty", "total"];

    pub fn csv_row(&self) -> [f64; 5] {
        [self.bending, self.tension, self.adhesion, self.penalty, self.total]
    }
}

/// One term of the discrete functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Bending,
    Tension,
    /// The adhesion energy `A` itself (it enters the total with a minus sign).
    Adhesion,
    Penalty,
    Total,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::Bending, Term::Tension, Term::Adhesion, Term::Penalty, Term::Total];

    pub fn name(self) -> &'static str {
        match self {
            Term::Bending => "bending",
            Term::Tension => "tension",
            Term::Adhesion => "adhesion",
            Term::Penalty => "penalty",
            Term::Total => "total",
        }
    }
}

/// Weight `(a^3 + b^3) / (a b (a + b)^2)` of a squared turning angle.
#[inline]
pub fn pair_weight(a: f64, b: f64) -> f64 {
    (a * a * a + b * b * b) / (a * b * (a + b) * (a + b))
}

/// Partial derivatives of [`pair_weight`] in `a` and `b`.
#[inline]
fn pair_weight_grad(a: f64, b: f64) -> (f64, f64) {
    // w = (a^2 - ab + b^2) / (ab(a + b))
    let n = a * a - a * b + b * b;
    let q = a * b * (a + b);
    let q2 = q * q;
    let da = ((2.0 * a - b) * q - n * (2.0 * a * b + b * b)) / q2;
    let db = ((2.0 * b - a) * q - n * (2.0 * a * b + a * a)) / q2;
    (da, db)
}

/// The discrete functional on a fixed grid with obstacle values cached at the nodes.
#[derive(Debug, Clone)]
pub struct DiscreteEnergy {
    grid: PeriodicGrid,
    psi: Vec<f64>,
    params: PhysicalParams,
    reg: RegularizationParams,
    profile: Arc<dyn AdhesionProfile>,
}

impl DiscreteEnergy {
    pub fn new(
        grid: PeriodicGrid,
        obstacle: &Obstacle,
        params: PhysicalParams,
        reg: RegularizationParams,
        profile: Arc<dyn AdhesionProfile>,
    ) -> Self {
        let psi = grid.nodes().map(|x| obstacle.value(x)).collect();
        Self::with_nodal_obstacle(grid, psi, params, reg, profile)
    }

    pub fn with_nodal_obstacle(
        grid: PeriodicGrid,
        psi: Vec<f64>,
        params: PhysicalParams,
        reg: RegularizationParams,
        profile: Arc<dyn AdhesionProfile>,
    ) -> Self {
        assert_eq!(psi.len(), grid.len(), "obstacle values must match the grid");
        Self {
            grid,
            psi,
            params,
            reg,
            profile,
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn params(&self) -> PhysicalParams {
        self.params
    }

    pub fn reg(&self) -> RegularizationParams {
        self.reg
    }

    pub fn profile(&self) -> &dyn AdhesionProfile {
        self.profile.as_ref()
    }

    fn zeta(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.psi)
            .map(|(v, p)| self.profile.scaled(v - p, self.reg.delta))
            .collect()
    }

    pub fn breakdown(&self, v: &[f64]) -> EnergyBreakdown {
        assert_eq!(v.len(), self.grid.len());
        let n = v.len();
        let h = self.grid.h();
        let slopes = slopes(v, h);
        let half: Vec<f64> = slopes.iter().map(|d| 0.5 * h * (1.0 + d * d).sqrt()).collect();
        let zeta = self.zeta(v);

        let mut bending = 0.0;
        let mut tension = 0.0;
        let mut adhesion = 0.0;
        let mut penalty = 0.0;
        for k in 0..n {
            let k1 = (k + 1) % n;
            let theta = signed_turning_angle(slopes[k], slopes[k1]);
            bending += theta * theta * pair_weight(half[k], half[k1]);
            tension += 2.0 * half[k];
            adhesion += zeta[k] * zeta[k1] * 2.0 * half[k];
            let gap = (self.psi[k] - v[k]).max(0.0);
            penalty += gap * gap * h;
        }
        EnergyBreakdown::compose(
            0.5 * self.params.c * bending,
            self.params.sigma * tension,
            self.params.gamma * adhesion,
            penalty / self.reg.rho,
        )
    }

    pub fn term_value(&self, v: &[f64], term: Term) -> f64 {
        let b = self.breakdown(v);
        match term {
            Term::Bending => b.bending,
            Term::Tension => b.tension,
            Term::Adhesion => b.adhesion,
            Term::Penalty => b.penalty,
            Term::Total => b.total,
        }
    }

    pub fn total(&self, v: &[f64]) -> f64 {
        self.breakdown(v).total
    }

    /// Gradients of each term with respect to the nodal values.
    pub fn term_gradients(&self, v: &[f64]) -> TermGradients {
        assert_eq!(v.len(), self.grid.len());
        let n = v.len();
        let h = self.grid.h();
        let half_c = 0.5 * self.params.c;
        let slopes = slopes(v, h);
        let root: Vec<f64> = slopes.iter().map(|d| (1.0 + d * d).sqrt()).collect();
        let half: Vec<f64> = root.iter().map(|r| 0.5 * h * r).collect();
        // dl/dd
        let dhalf: Vec<f64> = slopes.iter().zip(&root).map(|(d, r)| 0.5 * h * d / r).collect();
        let zeta = self.zeta(v);
        let dzeta: Vec<f64> = v
            .iter()
            .zip(&self.psi)
            .map(|(v, p)| self.profile.scaled_derivative(v - p, self.reg.delta))
            .collect();

        let mut bend_s = vec![0.0; n];
        let mut tens_s = vec![0.0; n];
        let mut adh_s = vec![0.0; n];
        let mut adhesion = vec![0.0; n];
        let mut penalty = vec![0.0; n];

        for k in 0..n {
            let k1 = (k + 1) % n;
            let (a, b) = (slopes[k], slopes[k1]);
            let phi = signed_turning_angle(a, b);
            let w = pair_weight(half[k], half[k1]);
            let (wa, wb) = pair_weight_grad(half[k], half[k1]);
            let phi2 = phi * phi;
            bend_s[k] += half_c * (-2.0 * phi / (1.0 + a * a) * w + phi2 * wa * dhalf[k]);
            bend_s[k1] += half_c * (2.0 * phi / (1.0 + b * b) * w + phi2 * wb * dhalf[k1]);

            tens_s[k] = self.params.sigma * 2.0 * dhalf[k];

            let zz = zeta[k] * zeta[k1];
            adh_s[k] = self.params.gamma * zz * 2.0 * dhalf[k];
            let g = self.params.gamma * 2.0 * half[k];
            adhesion[k] += g * dzeta[k] * zeta[k1];
            adhesion[k1] += g * zeta[k] * dzeta[k1];

            let gap = (self.psi[k] - v[k]).max(0.0);
            penalty[k] = -2.0 * gap * h / self.reg.rho;
        }

        let bending = scatter_slopes(&bend_s, h);
        let tension = scatter_slopes(&tens_s, h);
        let adh_from_slopes = scatter_slopes(&adh_s, h);
        for (a, s) in adhesion.iter_mut().zip(adh_from_slopes) {
            *a += s;
        }
        TermGradients {
            bending,
            tension,
            adhesion,
            penalty,
        }
    }

    pub fn term_gradient(&self, v: &[f64], term: Term) -> Vec<f64> {
        let g = self.term_gradients(v);
        match term {
            Term::Bending => g.bending,
            Term::Tension => g.tension,
            Term::Adhesion => g.adhesion,
            Term::Penalty => g.penalty,
            Term::Total => g.total(),
        }
    }

    /// Total energy and its gradient, written into `grad`.
    pub fn value_and_gradient(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        let g = self.term_gradients(v);
        for (j, out) in grad.iter_mut().enumerate() {
            *out = g.bending[j] + g.tension[j] - g.adhesion[j] + g.penalty[j];
        }
        self.total(v)
    }
}

/// Gradients of the four terms; `adhesion` is the gradient of `A` (not `-A`).
#[derive(Debug, Clone)]
pub struct TermGradients {
    pub bending: Vec<f64>,
    pub tension: Vec<f64>,
    pub adhesion: Vec<f64>,
    pub penalty: Vec<f64>,
}

impl TermGradients {
    pub fn total(&self) -> Vec<f64> {
        (0..self.bending.len())
            .map(|j| self.bending[j] + self.tension[j] - self.adhesion[j] + self.penalty[j])
            .collect()
    }
}

/// `out[k] = d_{k+1} = (v_{k+1} - v_k) / h`
fn slopes(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|k| (v[(k + 1) % n] - v[k]) / h).collect()
}

/// Pull a gradient with respect to slopes back to the nodes.
fn scatter_slopes(gs: &[f64], h: f64) -> Vec<f64> {
    let n = gs.len();
    let mut gv = vec![0.0; n];
    for k in 0..n {
        gv[(k + 1) % n] += gs[k] / h;
        gv[k] -= gs[k] / h;
    }
    gv
}

pub fn bending_discrete(curve: &PolygonalCurve, params: &PhysicalParams) -> f64 {
    let n = curve.len() as isize;
    let sum: f64 = (1..=n)
        .map(|j| {
            let theta = curve.turning_angle(j);
            theta * theta * pair_weight(curve.half_length(j), curve.half_length(j + 1))
        })
        .sum();
    0.5 * params.c * sum
}

/// `C/2 sum |D_j|^2 (1 + d_j^2)^(-5/2) h`
pub fn bending_auxiliary(curve: &PolygonalCurve, params: &PhysicalParams) -> f64 {
    let n = curve.len() as isize;
    let h = curve.h();
    let sum: f64 = (1..=n)
        .map(|j| {
            let dd = curve.second_difference(j);
            let d = curve.forward_difference(j);
            dd * dd * (1.0 + d * d).powf(-2.5) * h
        })
        .sum();
    0.5 * params.c * sum
}

pub fn tension_discrete(curve: &PolygonalCurve, params: &PhysicalParams) -> f64 {
    params.sigma * curve.length()
}

pub fn adhesion_discrete(
    curve: &PolygonalCurve,
    obstacle: &Obstacle,
    params: &PhysicalParams,
    reg: &RegularizationParams,
    profile: &dyn AdhesionProfile,
) -> f64 {
    let grid = curve.grid();
    let zeta = |j: isize| profile.scaled(curve.value(j) - obstacle.value(grid.node(j)), reg.delta);
    let n = curve.len() as isize;
    let sum: f64 = (1..=n)
        .map(|j| zeta(j - 1) * zeta(j) * 2.0 * curve.half_length(j))
        .sum();
    params.gamma * sum
}

pub fn penalty(curve: &PolygonalCurve, obstacle: &Obstacle, reg: &RegularizationParams) -> f64 {
    let grid = curve.grid();
    let h = curve.h();
    let sum: f64 = (0..curve.len() as isize)
        .map(|j| {
            let gap = (obstacle.value(grid.node(j)) - curve.value(j)).max(0.0);
            gap * gap * h
        })
        .sum();
    sum / reg.rho
}

pub fn total_energy(
    curve: &PolygonalCurve,
    obstacle: &Obstacle,
    params: &PhysicalParams,
    reg: &RegularizationParams,
    profile: &dyn AdhesionProfile,
) -> EnergyBreakdown {
    EnergyBreakdown::compose(
        bending_discrete(curve, params),
        tension_discrete(curve, params),
        adhesion_discrete(curve, obstacle, params, reg, profile),
        penalty(curve, obstacle, reg),
    )
}

/// A smooth periodic function with first and second derivatives.
pub trait SmoothCurve: Send + Sync {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// Simple analytic test functions for convergence studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `amplitude * sin(2 pi cycles x)`
    Sine { amplitude: f64, cycles: f64 },
    /// `amplitude * cos(2 pi cycles x)`
    Cosine { amplitude: f64, cycles: f64 },
    Constant { level: f64 },
}

impl TestFunction {
    /// Parses `sin:A:k`, `cos:A:k` or `const:c`.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number `{s}` in `{spec}`")))
        };
        match parts.as_slice() {
            ["sin", a, k] => Ok(Self::Sine {
                amplitude: num(a)?,
                cycles: num(k)?,
            }),
            ["cos", a, k] => Ok(Self::Cosine {
                amplitude: num(a)?,
                cycles: num(k)?,
            }),
            ["const", c] => Ok(Self::Constant { level: num(c)? }),
            _ => Err(Error::InvalidParameter(format!("unknown test function `{spec}`"))),
        }
    }
}

impl SmoothCurve for TestFunction {
    fn value(&self, x: f64) -> f64 {
        use std::f64::consts::TAU;
        match *self {
            Self::Sine { amplitude, cycles } => amplitude * (TAU * cycles * x).sin(),
            Self::Cosine { amplitude, cycles } => amplitude * (TAU * cycles * x).cos(),
            Self::Constant { level } => level,
        }
    }

    fn d1(&self, x: f64) -> f64 {
        use std::f64::consts::TAU;
        match *self {
            Self::Sine { amplitude, cycles } => amplitude * TAU * cycles * (TAU * cycles * x).cos(),
            Self::Cosine { amplitude, cycles } => -amplitude * TAU * cycles * (TAU * cycles * x).sin(),
            Self::Constant { .. } => 0.0,
        }
    }

    fn d2(&self, x: f64) -> f64 {
        use std::f64::consts::TAU;
        let w = |k: f64| (TAU * k) * (TAU * k);
        match *self {
            Self::Sine { amplitude, cycles } => -amplitude * w(cycles) * (TAU * cycles * x).sin(),
            Self::Cosine { amplitude, cycles } => -amplitude * w(cycles) * (TAU * cycles * x).cos(),
            Self::Constant { .. } => 0.0,
        }
    }
}

/// `C/2 int f''^2 (1 + f'^2)^(-5/2) dx` by adaptive quadrature.
pub fn bending_continuous<F: SmoothCurve + ?Sized>(f: &F, params: &PhysicalParams) -> Result<f64> {
    let integrand = |x: f64| {
        let d1 = f.d1(x);
        let d2 = f.d2(x);
        d2 * d2 * (1.0 + d1 * d1).powf(-2.5)
    };
    Ok(0.5 * params.c * quadrature::adaptive(integrand, 0.0, 1.0, quadrature::ADAPTIVE_TOL)?)
}

/// `sigma int sqrt(1 + f'^2) dx`
pub fn tension_continuous<F: SmoothCurve + ?Sized>(f: &F, params: &PhysicalParams) -> f64 {
    params.sigma * quadrature::integrate(|x| (1.0 + f.d1(x).powi(2)).sqrt(), 0.0, 1.0)
}

/// Relative (to the obstacle's sup norm, floored at 1) contact detection tolerance.
pub const CONTACT_TOL: f64 = 1e-9;

/// `gamma` times the arc length of `f` over `{ |f - psi| <= tol }`.
pub fn adhesion_continuous<F: SmoothCurve + ?Sized>(
    f: &F,
    obstacle: &Obstacle,
    params: &PhysicalParams,
) -> f64 {
    let tol = CONTACT_TOL * obstacle.sup_norm().max(1.0);
    let integrand = |x: f64| {
        if (f.value(x) - obstacle.value(x)).abs() <= tol {
            (1.0 + f.d1(x).powi(2)).sqrt()
        } else {
            0.0
        }
    };
    params.gamma * quadrature::integrate(integrand, 0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::interpolate;

    fn sine4() -> PolygonalCurve {
        PolygonalCurve::from_values(vec![0.0, 1.0, 0.0, -1.0]).unwrap()
    }

    fn unit() -> PhysicalParams {
        PhysicalParams::new(2.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn params_validate() {
        assert!(PhysicalParams::new(0.0, 1.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, -1.0, 1.0).is_err());
        assert!(RegularizationParams::new(0.1, 0.0).is_err());
        assert_eq!(PhysicalParams::from_half_modulus(0.1, 1.0, 1.0).unwrap().c, 0.2);
    }

    #[test]
    fn profile_properties() {
        let z = QuarticBump;
        assert_eq!(z.value(0.0), 1.0);
        assert_eq!(z.value(1.0), 0.0);
        assert_eq!(z.value(-3.0), 0.0);
        for i in 0..=200 {
            let t = -2.0 + 0.02 * i as f64;
            let v = z.value(t);
            assert!((0.0..=1.0).contains(&v));
            assert_eq!(v, z.value(-t));
            if (0.0..=1.0).contains(&t) {
                assert!(z.derivative(t) <= 0.0);
            }
            let step = 1e-6;
            let fd = (z.value(t + step) - z.value(t - step)) / (2.0 * step);
            assert!((fd - z.derivative(t)).abs() < 1e-5);
        }
        assert!((z.scaled(0.05, 0.1) - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn bending_examples() {
        let c = PolygonalCurve::constant(PeriodicGrid::new(6).unwrap(), 0.3);
        assert_eq!(bending_discrete(&c, &unit()), 0.0);
        assert_eq!(bending_auxiliary(&c, &unit()), 0.0);
        let want = 2.0 * 32.0 * 32.0 / 17f64.powf(2.5) * 0.25;
        assert!((bending_auxiliary(&sine4(), &unit()) - want).abs() < 1e-12);
    }

    #[test]
    fn tension_examples() {
        let g = PeriodicGrid::new(4).unwrap();
        let p = unit();
        assert!((tension_discrete(&PolygonalCurve::constant(g, 1.0), &p) - 1.0).abs() < 1e-15);
        assert!((tension_discrete(&sine4(), &p) - 17f64.sqrt()).abs() < 1e-14);
        let small = PhysicalParams::new(1.0, 0.01, 1.0).unwrap();
        assert!((tension_discrete(&PolygonalCurve::constant(g, 0.0), &small) - 0.01).abs() < 1e-16);
    }

    #[test]
    fn adhesion_and_penalty_examples() {
        let g = PeriodicGrid::new(8).unwrap();
        let flat = Obstacle::flat(0.0);
        let p = unit();
        let reg = RegularizationParams::new(0.1, 0.01).unwrap();
        let z = QuarticBump;
        let on = PolygonalCurve::constant(g, 0.0);
        assert!((adhesion_discrete(&on, &flat, &p, &reg, &z) - 1.0).abs() < 1e-15);
        let half = PolygonalCurve::constant(g, 0.05);
        assert!((adhesion_discrete(&half, &flat, &p, &reg, &z) - 81.0 / 256.0).abs() < 1e-15);
        let far = PolygonalCurve::constant(g, 0.1);
        assert_eq!(adhesion_discrete(&far, &flat, &p, &reg, &z), 0.0);
        assert_eq!(penalty(&far, &flat, &reg), 0.0);

        let g4 = PeriodicGrid::new(4).unwrap();
        let one = PolygonalCurve::new(g4, vec![0.0, -0.1, 0.0, 0.0]).unwrap();
        assert!((penalty(&one, &flat, &reg) - 0.25).abs() < 1e-12);
        let two = PolygonalCurve::new(g4, vec![0.0, -0.2, 0.0, 0.0]).unwrap();
        assert!((penalty(&two, &flat, &reg) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn total_examples() {
        let g = PeriodicGrid::new(10).unwrap();
        let p = unit();
        let reg = RegularizationParams::new(0.1, 0.01).unwrap();
        let b = total_energy(&PolygonalCurve::constant(g, 0.0), &Obstacle::flat(0.0), &p, &reg, &QuarticBump);
        assert_eq!(b.total, 0.0);
        let b = total_energy(&PolygonalCurve::constant(g, 0.2), &Obstacle::flat(0.0), &p, &reg, &QuarticBump);
        assert!((b.total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn model_matches_free_functions() {
        let g = PeriodicGrid::new(16).unwrap();
        let obstacle = Obstacle::sinusoidal();
        let p = PhysicalParams::new(0.3, 0.5, 2.0).unwrap();
        let reg = RegularizationParams::new(0.05, 0.01).unwrap();
        let curve = interpolate(g, |x| 0.02 * (6.0 * std::f64::consts::PI * x).cos() + 0.01).unwrap();
        let model = DiscreteEnergy::new(g, &obstacle, p, reg, Arc::new(QuarticBump));
        let a = model.breakdown(curve.values());
        let b = total_energy(&curve, &obstacle, &p, &reg, &QuarticBump);
        for (x, y) in a.csv_row().iter().zip(b.csv_row()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn continuous_references() {
        let p = unit();
        let flat = TestFunction::Constant { level: 0.4 };
        assert_eq!(bending_continuous(&flat, &p).unwrap(), 0.0);
        assert!((tension_continuous(&flat, &p) - 1.0).abs() < 1e-12);
        assert_eq!(adhesion_continuous(&flat, &Obstacle::flat(0.0), &p), 0.0);
        let on = TestFunction::Constant { level: 0.0 };
        assert!((adhesion_continuous(&on, &Obstacle::flat(0.0), &p) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn test_function_parse() {
        assert_eq!(
            TestFunction::parse("sin:0.1:1").unwrap(),
            TestFunction::Sine {
                amplitude: 0.1,
                cycles: 1.0
            }
        );
        assert!(TestFunction::parse("tan:1:1").is_err());
    }
}
