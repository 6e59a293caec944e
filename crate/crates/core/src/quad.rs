//! One-dimensional quadrature: adaptive Gauss-Kronrod (7/15) with global
//! bisection, and a double-exponential rule for integrable endpoint
//! singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of a quadrature: value and estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    Estimate {
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

struct Piece {
    a: f64,
    b: f64,
    est: Estimate,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.est.error == o.est.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.est.error.total_cmp(&o.est.error)
    }
}

/// Adaptive integration of `f` over `[a, b]` until the error estimate drops
/// below `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_pieces: usize,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    let first = gk15(&mut f, a, b);
    let mut value = first.value;
    let mut error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, est: first });
    while error > abs_tol.max(rel_tol * value.abs()) {
        if !value.is_finite() {
            return Err(Error::Numerical("integrand is not finite".into()));
        }
        if heap.len() >= max_pieces {
            return Err(Error::Numerical(format!(
                "quadrature did not converge in {max_pieces} subintervals (error {error:e}, value {value:e})"
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval exhausted at machine precision
            heap.push(worst);
            break;
        }
        let left = gk15(&mut f, worst.a, mid);
        let right = gk15(&mut f, mid, worst.b);
        value += left.value + right.value - worst.est.value;
        error += left.error + right.error - worst.est.error;
        heap.push(Piece { a: worst.a, b: mid, est: left });
        heap.push(Piece { a: mid, b: worst.b, est: right });
    }
    // re-sum to shed the drift of the running totals
    let (v, e) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.est.value, e + p.est.error));
    Ok(Estimate { value: v, error: e })
}

/// Double-exponential (tanh-sinh) rule on `[0, len]` for an integrand given
/// as a function of the distance `d` from the left endpoint and the distance
/// `len - d` from the right one, so that endpoint singularities are evaluated
/// without cancellation. Levels are refined until two successive estimates
/// agree to `rel_tol`.
pub fn tanh_sinh<F: FnMut(f64, f64) -> f64>(mut f: F, len: f64, rel_tol: f64) -> Result<Estimate> {
    const T_MAX: f64 = 4.5;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let node = |t: f64| {
        // d/len = 1 / (1 + exp(-pi sinh t)), computed on both sides stably
        let e = (-2.0 * half_pi * t.sinh()).exp();
        let left = 1.0 / (1.0 + e);
        let right = e / (1.0 + e);
        let jac = 2.0 * half_pi * t.cosh() * left * right;
        (left * len, right * len, jac * len)
    };
    let mut h = 0.5;
    let mut sum = {
        let (d, c, w) = node(0.0);
        f(d, c) * w
    };
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        if t > T_MAX {
            break;
        }
        for s in [t, -t] {
            let (d, c, w) = node(s);
            if d > 0.0 && c > 0.0 {
                sum += f(d, c) * w;
            }
        }
        k += 1;
    }
    let mut prev = sum * h;
    for _ in 0..10 {
        h *= 0.5;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            if t > T_MAX {
                break;
            }
            for s in [t, -t] {
                let (d, c, w) = node(s);
                if d > 0.0 && c > 0.0 {
                    sum += f(d, c) * w;
                }
            }
            k += 2;
        }
        let cur = sum * h;
        if !cur.is_finite() {
            return Err(Error::Numerical("tanh-sinh integrand is not finite".into()));
        }
        let err = (cur - prev).abs();
        if err <= rel_tol * cur.abs() {
            return Ok(Estimate { value: cur, error: err });
        }
        prev = cur;
    }
    Err(Error::Numerical(format!(
        "tanh-sinh did not reach relative tolerance {rel_tol:e}"
    )))
}
