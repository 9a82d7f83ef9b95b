//! Uniform periodic partitions of the unit interval and polygonal curves on them.
//!
//! A curve stores the nodal heights `v_0..v_{N-1}`; every other index is read
//! through periodic wrapping, so `v_N` is `v_0` and `v_{-1}` is `v_{N-1}`.
//! Slopes `d_j` live on the segments `I_j = (x_{j-1}, x_j)`, second differences
//! `D_j` and turning angles `theta_j` live on the nodes.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|f(0) - f(1)|` accepted by [`interpolate`].
pub const PERIODICITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    n: usize,
}

impl PeriodicGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::GridTooSmall(n));
        }
        Ok(Self { n })
    }

    /// Number of segments (and of stored nodes).
    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh width `h = 1/N`.
    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Node position `x_j = j h` (not wrapped, so `node(N) == 1`).
    #[inline]
    pub fn node(&self, j: isize) -> f64 {
        j as f64 / self.n as f64
    }

    #[inline]
    pub fn wrap(&self, j: isize) -> usize {
        j.rem_euclid(self.n as isize) as usize
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.node(j as isize))
    }
}

/// Which discrete (semi)norm [`PolygonalCurve::discrete_norm`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `(sum |v_j|^p h)^(1/p)`
    Value,
    /// `(sum |D_j|^p h)^(1/p)`
    SecondDifference,
}

/// A periodic polygonal graph over a [`PeriodicGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonalCurve {
    grid: PeriodicGrid,
    values: Vec<f64>,
}

impl PolygonalCurve {
    pub fn new(grid: PeriodicGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { grid, values })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let grid = PeriodicGrid::new(values.len())?;
        Self::new(grid, values)
    }

    pub fn constant(grid: PeriodicGrid, level: f64) -> Self {
        Self {
            grid,
            values: vec![level; grid.len()],
        }
    }

    #[inline]
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Nodal value with periodic index extension.
    #[inline]
    pub fn value(&self, j: isize) -> f64 {
        self.values[self.grid.wrap(j)]
    }

    /// Slope `d_j = (v_j - v_{j-1}) / h` of segment `I_j`.
    #[inline]
    pub fn forward_difference(&self, j: isize) -> f64 {
        (self.value(j) - self.value(j - 1)) / self.h()
    }

    /// `D_j = (v_{j+1} - 2 v_j + v_{j-1}) / h^2`.
    #[inline]
    pub fn second_difference(&self, j: isize) -> f64 {
        let h = self.h();
        (self.value(j + 1) - 2.0 * self.value(j) + self.value(j - 1)) / (h * h)
    }

    /// Half the length of segment `I_j`.
    #[inline]
    pub fn half_length(&self, j: isize) -> f64 {
        let d = self.forward_difference(j);
        0.5 * self.h() * (1.0 + d * d).sqrt()
    }

    /// Turning angle between the edges `(1, d_j)` and `(1, d_{j+1})`, in `[0, pi]`.
    #[inline]
    pub fn turning_angle(&self, j: isize) -> f64 {
        turning_angle(self.forward_difference(j), self.forward_difference(j + 1))
    }

    /// All slopes, indexed so that `slopes()[k] == d_{k+1}`, i.e. the slope of
    /// the segment ending at node `k + 1`.
    pub fn slopes(&self) -> Vec<f64> {
        let n = self.len();
        let inv_h = n as f64;
        (0..n)
            .map(|k| (self.values[(k + 1) % n] - self.values[k]) * inv_h)
            .collect()
    }

    /// Euclidean length of the polygon over one period.
    pub fn length(&self) -> f64 {
        (1..=self.len() as isize)
            .map(|j| 2.0 * self.half_length(j))
            .sum()
    }

    /// `|v|_{W^{1,inf}} = max_j |d_j|`.
    pub fn lipschitz_seminorm(&self) -> f64 {
        self.slopes().iter().fold(0.0_f64, |m, d| m.max(d.abs()))
    }

    pub fn discrete_norm(&self, p: f64, kind: NormKind) -> f64 {
        let h = self.h();
        let n = self.len() as isize;
        let sum: f64 = match kind {
            NormKind::Value => self.values.iter().map(|v| v.abs().powf(p) * h).sum(),
            NormKind::SecondDifference => (1..=n)
                .map(|j| self.second_difference(j).abs().powf(p) * h)
                .sum(),
        };
        sum.powf(1.0 / p)
    }

    /// The continuous piecewise-linear reconstruction of `v'` through the
    /// segment midpoints.
    pub fn derivative_reconstruction(&self) -> DerivativeReconstruction {
        DerivativeReconstruction {
            grid: self.grid,
            slopes: self.slopes(),
        }
    }

    /// Piecewise-linear evaluation at any `x` (periodically extended).
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.len() as f64;
        let t = x.rem_euclid(1.0) * n;
        let k = (t.floor() as usize).min(self.len() - 1);
        let s = t - k as f64;
        let a = self.values[k];
        let b = self.values[(k + 1) % self.len()];
        a + s * (b - a)
    }

    /// Slope of the polygon at `x` (the slope of the segment containing `x`).
    pub fn eval_derivative(&self, x: f64) -> f64 {
        let n = self.len();
        let t = x.rem_euclid(1.0) * n as f64;
        let k = (t.floor() as usize).min(n - 1);
        (self.values[(k + 1) % n] - self.values[k]) * n as f64
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "v"])?;
        for (j, v) in self.values.iter().enumerate() {
            w.serialize((self.grid.node(j as isize), v))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> std::result::Result<Vec<f64>, csv::Error> {
        let mut r = csv::Reader::from_reader(reader);
        let mut values = Vec::new();
        for row in r.deserialize() {
            let (_x, v): (f64, f64) = row?;
            values.push(v);
        }
        Ok(values)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file).map_err(|e| Error::csv(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let values = Self::read_csv(file).map_err(|e| Error::csv(path, e))?;
        Self::from_values(values)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(CurveJson {
            n: self.len(),
            values: self.values.clone(),
        })
        .expect("curve serializes")
    }

    pub fn from_json(value: serde_json::Value) -> Result<Self> {
        let raw: CurveJson = serde_json::from_value(value)?;
        let grid = PeriodicGrid::new(raw.n)?;
        Self::new(grid, raw.values)
    }
}

#[derive(Serialize, Deserialize)]
struct CurveJson {
    #[serde(rename = "N")]
    n: usize,
    values: Vec<f64>,
}

impl Serialize for PolygonalCurve {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CurveJson {
            n: self.len(),
            values: self.values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PolygonalCurve {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = CurveJson::deserialize(d)?;
        let grid = PeriodicGrid::new(raw.n).map_err(serde::de::Error::custom)?;
        PolygonalCurve::new(grid, raw.values).map_err(serde::de::Error::custom)
    }
}

/// Angle between the directions `(1, a)` and `(1, b)`, in `[0, pi]`.
///
/// Uses `atan2(|b - a|, 1 + ab)`, which keeps full relative precision for
/// nearly collinear edges.
#[inline]
pub fn turning_angle(a: f64, b: f64) -> f64 {
    (b - a).abs().atan2(1.0 + a * b)
}

/// Signed turning angle `atan(b) - atan(a)` in `(-pi, pi)`; its square equals
/// the square of [`turning_angle`].
#[inline]
pub fn signed_turning_angle(a: f64, b: f64) -> f64 {
    (b - a).atan2(1.0 + a * b)
}

/// The textbook arccos form of the turning angle, argument clamped to `[-1, 1]`.
pub fn turning_angle_arccos(a: f64, b: f64) -> f64 {
    let c = (1.0 + a * b) / ((1.0 + a * a).sqrt() * (1.0 + b * b).sqrt());
    c.clamp(-1.0, 1.0).acos()
}

/// Nodal interpolation `Pi_h f`.
pub fn interpolate<F: Fn(f64) -> f64>(grid: PeriodicGrid, f: F) -> Result<PolygonalCurve> {
    let (at_zero, at_one) = (f(0.0), f(1.0));
    if !((at_zero - at_one).abs() <= PERIODICITY_TOL) {
        return Err(Error::NotPeriodic { at_zero, at_one });
    }
    PolygonalCurve::new(grid, grid.nodes().map(f).collect())
}

/// Piecewise-linear periodic function through `(x_{j-1/2}, d_j)`.
#[derive(Debug, Clone)]
pub struct DerivativeReconstruction {
    grid: PeriodicGrid,
    /// `slopes[k] = d_{k+1}`, attained at the midpoint `(k + 1/2) h`.
    slopes: Vec<f64>,
}

impl DerivativeReconstruction {
    pub fn grid(&self) -> PeriodicGrid {
        self.grid
    }

    /// Value at the midpoint of segment `I_j`, i.e. `d_j`.
    pub fn midpoint_value(&self, j: isize) -> f64 {
        self.slopes[self.grid.wrap(j - 1)]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.grid.len();
        // Shift so that midpoint k sits at integer k.
        let t = x.rem_euclid(1.0) * n as f64 - 0.5;
        let k = t.floor();
        let s = t - k;
        let k = (k as isize).rem_euclid(n as isize) as usize;
        let a = self.slopes[k];
        let b = self.slopes[(k + 1) % n];
        a + s * (b - a)
    }
}
