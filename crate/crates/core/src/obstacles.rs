//! Obstacle catalog, obstacle-derived constants and the sufficient-condition
//! check for global optimization.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::energy::PhysicalParams;
use crate::error::{Error, Result};
use crate::quadrature;

const PERIODIC_TOL: f64 = 1e-12;
const LIPSCHITZ_SAMPLES: usize = 100_000;

#[derive(Debug, Clone)]
enum Shape {
    Flat { level: f64 },
    /// `amplitude * sin(2 pi cycles x)`
    Sinusoidal { amplitude: f64, cycles: f64 },
    /// `eps^2 x^2 (1-x)^2 / (eps^2 + (2x-1)^2)`
    Peak { eps: f64 },
    Sampled(Arc<PeriodicSpline>),
}

/// A smooth obstacle `psi` on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Obstacle {
    name: String,
    shape: Shape,
    periodic: bool,
}

impl Obstacle {
    fn build(name: String, shape: Shape) -> Self {
        let mut o = Self {
            name,
            shape,
            periodic: false,
        };
        o.periodic = (o.value(0.0) - o.value(1.0)).abs() <= PERIODIC_TOL;
        o
    }

    pub fn flat(level: f64) -> Self {
        Self::build(format!("flat(c={level})"), Shape::Flat { level })
    }

    /// `psi_1(x) = 0.03 sin(24 pi x)`
    pub fn sinusoidal() -> Self {
        Self::sine(0.03, 12.0)
    }

    pub fn sine(amplitude: f64, cycles: f64) -> Self {
        let name = if amplitude == 0.03 && cycles == 12.0 {
            "sin24".to_string()
        } else {
            format!("sine(a={amplitude},k={cycles})")
        };
        Self::build(name, Shape::Sinusoidal { amplitude, cycles })
    }

    /// `psi_2`, smooth with a needle of height 1/16 at `x = 1/2`.
    pub fn near_singular(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(Self::build(format!("peak(eps={eps})"), Shape::Peak { eps }))
    }

    /// Cubic periodic interpolant of `(x, psi)` samples on `[0, 1]`.
    pub fn from_samples(name: impl Into<String>, xs: &[f64], ys: &[f64]) -> Result<Self> {
        let spline = PeriodicSpline::new(xs, ys)?;
        Ok(Self::build(name.into(), Shape::Sampled(Arc::new(spline))))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for row in reader.deserialize() {
            let (x, y): (f64, f64) = row.map_err(|e| Error::csv(path, e))?;
            xs.push(x);
            ys.push(y);
        }
        Self::from_samples(path.display().to_string(), &xs, &ys)
    }

    /// Parses `sin24`, `peak`, `peak(eps=0.01)`, `flat`, `flat(c=0.5)` or `csv:<path>`.
    pub fn from_name(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some(path) = spec.strip_prefix("csv:") {
            return Self::load_csv(Path::new(path));
        }
        let (head, args) = match spec.find('(') {
            Some(i) if spec.ends_with(')') => (&spec[..i], Some(&spec[i + 1..spec.len() - 1])),
            Some(_) => return Err(Error::UnknownObstacle(spec.to_string())),
            None => (spec, None),
        };
        let arg = |key: &str, default: f64| -> Result<f64> {
            let Some(args) = args else { return Ok(default) };
            if args.trim().is_empty() {
                return Ok(default);
            }
            let (k, v) = args
                .split_once('=')
                .ok_or_else(|| Error::UnknownObstacle(spec.to_string()))?;
            if k.trim() != key {
                return Err(Error::UnknownObstacle(spec.to_string()));
            }
            v.trim()
                .parse()
                .map_err(|_| Error::UnknownObstacle(spec.to_string()))
        };
        match head {
            "sin24" if args.is_none() => Ok(Self::sinusoidal()),
            "peak" => Self::near_singular(arg("eps", 0.01)?),
            "flat" => Ok(Self::flat(arg("c", 0.0)?)),
            _ => Err(Error::UnknownObstacle(spec.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn value(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Flat { level } => *level,
            Shape::Sinusoidal { amplitude, cycles } => amplitude * (2.0 * PI * cycles * x).sin(),
            Shape::Peak { eps } => {
                let e2 = eps * eps;
                let s = 2.0 * x - 1.0;
                e2 * x * x * (1.0 - x) * (1.0 - x) / (e2 + s * s)
            }
            Shape::Sampled(s) => s.value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Flat { .. } => 0.0,
            Shape::Sinusoidal { amplitude, cycles } => {
                let w = 2.0 * PI * cycles;
                amplitude * w * (w * x).cos()
            }
            Shape::Peak { eps } => {
                let e2 = eps * eps;
                let s = 2.0 * x - 1.0;
                let p = x * (1.0 - x);
                let num = e2 * p * p;
                let den = e2 + s * s;
                // num' = 2 e2 p (1 - 2x), den' = 4 s
                let dnum = 2.0 * e2 * p * (1.0 - 2.0 * x);
                let dden = 4.0 * s;
                (dnum * den - num * dden) / (den * den)
            }
            Shape::Sampled(s) => s.derivative(x),
        }
    }

    /// `max |psi|`, by sampling.
    pub fn sup_norm(&self) -> f64 {
        match &self.shape {
            Shape::Flat { level } => level.abs(),
            Shape::Sinusoidal { amplitude, .. } => amplitude.abs(),
            Shape::Peak { .. } => self.value(0.5),
            Shape::Sampled(_) => self.sampled_max(|x| self.value(x).abs()),
        }
    }

    /// `max psi`, by sampling.
    pub fn max_value(&self) -> f64 {
        match &self.shape {
            Shape::Flat { level } => *level,
            Shape::Sinusoidal { amplitude, .. } => amplitude.abs(),
            Shape::Peak { .. } => self.value(0.5),
            Shape::Sampled(_) => self.sampled_max(|x| self.value(x)),
        }
    }

    /// Dense sampling followed by golden-section refinement around the best sample.
    fn sampled_max<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let m = LIPSCHITZ_SAMPLES;
        let (best_i, best) = (0..=m)
            .map(|i| (i, f(i as f64 / m as f64)))
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let step = 1.0 / m as f64;
        let lo = (best_i as f64 - 1.0) * step;
        let hi = (best_i as f64 + 1.0) * step;
        best.max(golden_max(&f, lo, hi))
    }

    /// Arc length of the graph over one period.
    pub fn length(&self) -> f64 {
        quadrature::integrate(|x| (1.0 + self.derivative(x).powi(2)).sqrt(), 0.0, 1.0)
    }

    /// `|psi|_{W^{1,inf}} = max |psi'|`.
    pub fn lipschitz_seminorm(&self) -> f64 {
        match &self.shape {
            Shape::Flat { .. } => 0.0,
            Shape::Sinusoidal { amplitude, cycles } => (amplitude * 2.0 * PI * cycles).abs(),
            _ => self.sampled_max(|x| self.derivative(x).abs()),
        }
    }
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    fc.max(fd)
}

/// Periodic cubic spline through samples on `[0, 1)`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// second derivatives at the knots
    m: Vec<f64>,
}

impl PeriodicSpline {
    /// Samples must be strictly increasing on `[0, 1]`; a trailing sample at
    /// `x = 1` must repeat the value at `x = 0`.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::LengthMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        let (mut xs, mut ys) = (xs.to_vec(), ys.to_vec());
        if xs.last() == Some(&1.0) {
            let (y0, y1) = (ys[0], *ys.last().unwrap());
            if xs[0] != 0.0 || (y0 - y1).abs() > PERIODIC_TOL {
                return Err(Error::NotPeriodic {
                    at_zero: y0,
                    at_one: y1,
                });
            }
            xs.pop();
            ys.pop();
        }
        if xs.len() < 3 {
            return Err(Error::InvalidParameter("need at least 3 obstacle samples".into()));
        }
        if xs[0] < 0.0 || *xs.last().unwrap() >= 1.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "obstacle samples must be strictly increasing in [0, 1)".into(),
            ));
        }
        let n = xs.len();
        let gap = |i: usize| if i + 1 < n { xs[i + 1] - xs[i] } else { 1.0 + xs[0] - xs[n - 1] };
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        for i in 0..n {
            let hp = gap((i + n - 1) % n);
            let hi = gap(i);
            sub[i] = hp;
            diag[i] = 2.0 * (hp + hi);
            sup[i] = hi;
            let yn = ys[(i + 1) % n];
            let yp = ys[(i + n - 1) % n];
            rhs[i] = 6.0 * ((yn - ys[i]) / hi - (ys[i] - yp) / hp);
        }
        let m = solve_cyclic_tridiagonal(&sub, &diag, &sup, &rhs);
        Ok(Self { xs, ys, m })
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.xs.len();
        let x = x.rem_euclid(1.0);
        let i = match self.xs.partition_point(|&k| k <= x) {
            0 => n - 1,
            p => p - 1,
        };
        let left = self.xs[i];
        let width = if i + 1 < n { self.xs[i + 1] - left } else { 1.0 + self.xs[0] - left };
        let mut t = x - left;
        if t < 0.0 {
            t += 1.0;
        }
        (i, t, width)
    }

    pub fn value(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let (i, t, w) = self.locate(x);
        let j = (i + 1) % n;
        let s = w - t;
        (self.m[i] * s.powi(3) + self.m[j] * t.powi(3)) / (6.0 * w)
            + (self.ys[i] / w - self.m[i] * w / 6.0) * s
            + (self.ys[j] / w - self.m[j] * w / 6.0) * t
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let (i, t, w) = self.locate(x);
        let j = (i + 1) % n;
        let s = w - t;
        (-self.m[i] * s * s + self.m[j] * t * t) / (2.0 * w) + (self.ys[j] - self.ys[i]) / w
            - (self.m[j] - self.m[i]) * w / 6.0
    }
}

/// Solves a cyclic tridiagonal system via Sherman-Morrison.
/// Row `i` reads `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` (indices mod n).
fn solve_cyclic_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let alpha = sup[n - 1]; // A[n-1][0]
    let beta = sub[0]; // A[0][n-1]
    let gamma = -diag[0];
    let mut d = diag.to_vec();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;
    let x = thomas(sub, &d, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(sub, &d, sup, &u);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(x, z)| x - fact * z).collect()
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / m;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// `T[psi]` and `|psi|_{W^{1,inf}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObstacleConstants {
    pub tension_of_psi: f64,
    pub lipschitz_of_psi: f64,
}

pub fn obstacle_constants(obstacle: &Obstacle, params: &PhysicalParams) -> ObstacleConstants {
    ObstacleConstants {
        tension_of_psi: params.sigma * obstacle.length(),
        lipschitz_of_psi: obstacle.lipschitz_seminorm(),
    }
}

/// Outcome of the global-optimization sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SufficientCondition {
    pub lhs: f64,
    pub holds: bool,
    /// `pi/2 - lhs`
    pub margin: f64,
}

/// Evaluates
/// `[sigma + 4 gamma (T[psi]/sigma + c0)] / sqrt(2 C sigma) + atan(|psi|_{W^{1,inf}} + 2 c0) < pi/2`.
pub fn sufficient_condition(params: &PhysicalParams, obstacle: &Obstacle, c0: f64) -> SufficientCondition {
    let k = obstacle_constants(obstacle, params);
    sufficient_condition_with(params, &k, c0)
}

/// Same as [`sufficient_condition`] with precomputed obstacle constants.
pub fn sufficient_condition_with(params: &PhysicalParams, k: &ObstacleConstants, c0: f64) -> SufficientCondition {
    let lhs = (params.sigma + 4.0 * params.gamma * (k.tension_of_psi / params.sigma + c0))
        / (2.0 * params.c * params.sigma).sqrt()
        + (k.lipschitz_of_psi + 2.0 * c0).atan();
    SufficientCondition {
        lhs,
        holds: lhs < FRAC_PI_2,
        margin: FRAC_PI_2 - lhs,
    }
}

/// Smallest bending modulus `C` for which the condition holds (with margin
/// `1e-9`), found by bisection on `log C`. `None` when no `C` can satisfy it.
pub fn threshold_modulus(params: &PhysicalParams, obstacle: &Obstacle, c0: f64) -> Option<f64> {
    let k = obstacle_constants(obstacle, params);
    let target = FRAC_PI_2 - 1e-9;
    let lhs = |c: f64| sufficient_condition_with(&PhysicalParams { c, ..*params }, &k, c0).lhs;
    if (k.lipschitz_of_psi + 2.0 * c0).atan() >= target {
        return None;
    }
    let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
    if lhs(hi.exp()) > target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi.exp())
}
