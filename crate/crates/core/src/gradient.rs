//! Gradient of the discrete energy with respect to the nodal values, and a
//! central-difference oracle to check it against.

use std::ops::Deref;

use crate::energy::{DiscreteEnergy, Term};
use crate::grid::PolygonalCurve;

/// `g_j = dE/dv_j`, aligned with the curve's stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(Vec<f64>);

impl GradientVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, g| m.max(g.abs()))
    }

    /// `||self - other||_inf / max(1, ||self||_inf)`
    pub fn relative_error(&self, other: &GradientVector) -> f64 {
        let diff = self
            .0
            .iter()
            .zip(&other.0)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        diff / self.sup_norm().max(1.0)
    }
}

impl Deref for GradientVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn analytic_gradient(curve: &PolygonalCurve, energy: &DiscreteEnergy) -> GradientVector {
    analytic_term_gradient(curve, energy, Term::Total)
}

pub fn analytic_term_gradient(curve: &PolygonalCurve, energy: &DiscreteEnergy, term: Term) -> GradientVector {
    GradientVector(energy.term_gradient(curve.values(), term))
}

/// Per-component step `scale * max(1, |v_j|)`.
pub const DEFAULT_FD_SCALE: f64 = 1e-6;

/// Central differences of one term, component by component.
pub fn finite_difference_gradient(
    curve: &PolygonalCurve,
    energy: &DiscreteEnergy,
    term: Term,
    scale: f64,
) -> GradientVector {
    assert!(scale > 0.0, "finite-difference step must be positive");
    let mut v = curve.values().to_vec();
    let g = (0..v.len())
        .map(|j| {
            let orig = v[j];
            let step = scale * orig.abs().max(1.0);
            v[j] = orig + step;
            let plus = energy.term_value(&v, term);
            v[j] = orig - step;
            let minus = energy.term_value(&v, term);
            v[j] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect();
    GradientVector(g)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::energy::{PhysicalParams, QuarticBump, RegularizationParams};
    use crate::grid::PeriodicGrid;
    use crate::obstacles::Obstacle;

    fn model(n: usize, obstacle: &Obstacle, reg: RegularizationParams) -> DiscreteEnergy {
        DiscreteEnergy::new(
            PeriodicGrid::new(n).unwrap(),
            obstacle,
            PhysicalParams::new(1.0, 1.0, 1.0).unwrap(),
            reg,
            Arc::new(QuarticBump),
        )
    }

    #[test]
    fn flat_clear_curve_is_stationary() {
        let m = model(12, &Obstacle::sinusoidal(), RegularizationParams::new(0.01, 0.01).unwrap());
        let c = PolygonalCurve::constant(m.grid(), 0.2);
        let g = analytic_gradient(&c, &m);
        assert!(g.iter().all(|&x| x == 0.0));
        let fd = finite_difference_gradient(&c, &m, Term::Tension, DEFAULT_FD_SCALE);
        assert!(fd.sup_norm() < 1e-9);
    }

    #[test]
    fn single_violation_penalty_gradient() {
        let m = model(4, &Obstacle::flat(0.0), RegularizationParams::new(0.01, 0.01).unwrap());
        let c = PolygonalCurve::new(m.grid(), vec![0.0, -0.1, 0.0, 0.0]).unwrap();
        let a = analytic_term_gradient(&c, &m, Term::Penalty);
        assert!((a[1] + 5.0).abs() < 1e-12);
        assert_eq!(a[0], 0.0);
        let fd = finite_difference_gradient(&c, &m, Term::Penalty, DEFAULT_FD_SCALE);
        assert!((fd[1] + 5.0).abs() < 1e-8);
        // node 0 sits on the obstacle, so the minus step just touches the penalty
        assert!(fd[0].abs() < 1e-4 && fd[2].abs() < 1e-4);
    }

    #[test]
    fn relative_error_uses_floor() {
        let a = GradientVector::new(vec![0.1, -0.2]);
        let b = GradientVector::new(vec![0.1, -0.2 + 1e-3]);
        assert!((a.relative_error(&b) - 1e-3).abs() < 1e-15);
    }
}
