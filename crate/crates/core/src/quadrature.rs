//! One-dimensional quadrature used by the continuous reference energies.

use crate::error::{Error, Result};

/// Absolute tolerance of the adaptive rule.
pub const ADAPTIVE_TOL: f64 = 1e-10;
/// Panel count of the composite fallback.
pub const FALLBACK_PANELS: usize = 10_000;

const MAX_SUBDIVISIONS: usize = 20_000;

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = r * XGK[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kronrod * r, ((kronrod - gauss) * r).abs())
}

/// Globally adaptive Gauss-Kronrod integration to absolute tolerance `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut err = e;
    let mut count = 0;
    while err > tol {
        count += 1;
        if count > MAX_SUBDIVISIONS {
            return Err(Error::Quadrature { estimate: err });
        }
        // bisect the interval with the largest error estimate
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, e0) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        err += e1 + e2 - e0;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
        if (hi - lo) < 1e-14 * (b - a).abs().max(1.0) {
            return Err(Error::Quadrature { estimate: err });
        }
    }
    Ok(intervals.iter().map(|iv| iv.2).sum())
}

/// Composite 5-point Gauss-Legendre on `panels` equal panels.
pub fn composite_gauss<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        0.538_469_310_105_683_1,
        0.906_179_845_938_664,
        -0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let width = (b - a) / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * width;
        let mut s = 0.0;
        for (x, w) in X.iter().zip(W) {
            s += w * f(c + 0.5 * width * x);
        }
        sum += 0.5 * width * s;
    }
    sum
}

/// Adaptive integration, falling back to the composite rule at
/// [`FALLBACK_PANELS`] panels when the adaptive rule fails (non-smooth
/// integrands).
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    adaptive(&f, a, b, ADAPTIVE_TOL).unwrap_or_else(|_| composite_gauss(&f, a, b, FALLBACK_PANELS))
}
