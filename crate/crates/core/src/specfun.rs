//! Exponential integral and the kernels of the stationary-rate equation.
//!
//! For a receiving neuron with drift `a`, reset `r` and an incoming weight
//! `w`, the rate equation integrates `exp(l(u) - sum_j beta_j h_j(u))` over
//! `u <= 0` with
//!
//! ```text
//! l(u) = (r / a) (exp(a u) - 1)                              (a > 0)
//! h(u) = exp(-c) (Ei(c exp(a u)) - Ei(c)) / a - u,   c = w / a
//! ```
//!
//! and, without drift, `l(u) = r u` and `h(u) = (exp(w u) - 1) / w - u`.
//! `h` is also `int_0^u (exp(c (exp(a s) - 1)) - 1) ds`, which is how the
//! short-range branch and the derivative checks use it.

use crate::error::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 40.0;

/// `Ei(x)` to relative tolerance `tol`.
///
/// Positive arguments use the power series up to 40 and the asymptotic
/// expansion beyond; negative arguments go through `-E1(-x)`, which uses the
/// series up to 1 and a continued fraction beyond (the series cancels
/// catastrophically for large negative `x`).
pub fn expint_ei(x: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must lie in (0, 1), got {tol}"
        )));
    }
    if x == 0.0 {
        return Err(Error::InvalidArgument(
            "Ei has a logarithmic singularity at 0".into(),
        ));
    }
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("Ei argument must be finite, got {x}")));
    }
    let tol = tol.max(f64::EPSILON / 4.0);
    Ok(if x > 0.0 {
        if x <= SERIES_LIMIT {
            ei_series(x, tol)
        } else {
            x.exp() * ei_asymptotic_scaled(x, tol)
        }
    } else {
        -(-x).exp().recip() * e1_scaled(-x, tol)
    })
}

/// `Ei(x)` at full double precision; `-inf` at 0.
pub fn ei(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else {
        expint_ei(x, f64::EPSILON).unwrap_or(f64::NAN)
    }
}

/// `E1(x)` for `x > 0`.
pub fn e1(x: f64) -> f64 {
    if x <= 0.0 {
        return if x == 0.0 { f64::INFINITY } else { f64::NAN };
    }
    (-x).exp() * e1_scaled(x, f64::EPSILON)
}

pub(crate) fn ei_series(x: f64, tol: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..1000 {
        let kf = k as f64;
        term *= x / kf;
        let add = term / kf;
        sum += add;
        if kf > x.abs() && add.abs() <= tol * sum.abs() {
            break;
        }
    }
    EULER_GAMMA + x.abs().ln() + sum
}

/// `exp(-x) Ei(x)` for `x > 40` from the asymptotic series, truncated at its
/// smallest term.
pub(crate) fn ei_asymptotic_scaled(x: f64, tol: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    for k in 1..200 {
        let next = term * k as f64 / x;
        if next >= term {
            break;
        }
        term = next;
        sum += term;
        if term <= tol * sum {
            break;
        }
    }
    sum / x
}

/// `exp(-x) Ei(x)` for `x > 0`.
pub(crate) fn ei_scaled_pos(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        (-x).exp() * ei_series(x, f64::EPSILON / 4.0)
    } else {
        ei_asymptotic_scaled(x, f64::EPSILON / 4.0)
    }
}

/// `exp(x) E1(x)` for `x > 0`.
pub(crate) fn e1_scaled(x: f64, tol: f64) -> f64 {
    if x <= 1.0 {
        // E1(x) = -gamma - ln x - sum (-x)^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= -x / kf;
            let add = term / kf;
            sum += add;
            if add.abs() <= tol * sum.abs().max(1e-300) {
                break;
            }
        }
        x.exp() * (-EULER_GAMMA - x.ln() - sum)
    } else {
        e1_scaled_cf(x, tol)
    }
}

/// Modified Lentz evaluation of `exp(x) E1(x)
/// = 1 / (x + 1 - 1 / (x + 3 - 4 / (x + 5 - ...)))`.
fn e1_scaled_cf(x: f64, tol: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() <= tol {
            break;
        }
    }
    h
}

/// Parameters of one kernel evaluation.
///
/// With `rho != 1` the weight and reset enter as `weight^rho` and
/// `reset^rho` and the drift as `rho * drift`: under `x -> x^rho` the power
/// model becomes the affine one, and the drift `-a x` of `x` becomes
/// `-rho a x^rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub weight: f64,
    pub drift: f64,
    pub reset: f64,
    pub rho: f64,
}

impl KernelParams {
    pub fn new(weight: f64, drift: f64, reset: f64) -> Self {
        KernelParams {
            weight,
            drift,
            reset,
            rho: 1.0,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    /// `(weight, drift, reset)` after the power transform.
    pub fn effective(&self) -> Result<(f64, f64, f64)> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "drift must be finite and >= 0, got {}",
                self.drift
            )));
        }
        if !(self.reset >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "reset must be >= 0, got {}",
                self.reset
            )));
        }
        if self.rho == 1.0 {
            return Ok((self.weight, self.drift, self.reset));
        }
        if self.weight < 0.0 {
            return Err(Error::InvalidArgument(
                "weights must be nonnegative when rho != 1".into(),
            ));
        }
        Ok((
            self.weight.powf(self.rho),
            self.drift * self.rho,
            self.reset.powf(self.rho),
        ))
    }
}

fn check_u(u: f64) -> Result<()> {
    if u <= 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("kernel argument must be finite and <= 0, got {u}")))
    }
}

/// `l(u)`; `r u` without drift.
pub fn kernel_l(u: f64, params: &KernelParams) -> Result<f64> {
    check_u(u)?;
    let (_, a, r) = params.effective()?;
    Ok(if a > 0.0 { r / a * (a * u).exp_m1() } else { r * u })
}

/// `h(u)` for a nonzero weight.
pub fn kernel_h(u: f64, params: &KernelParams) -> Result<f64> {
    check_u(u)?;
    let (w, a, _) = params.effective()?;
    if w == 0.0 {
        return Err(Error::InvalidArgument(
            "kernel_h needs a nonzero weight; use kernel_h_zero_weight".into(),
        ));
    }
    if !w.is_finite() {
        return Err(Error::InvalidArgument("weight must be finite".into()));
    }
    Ok(if a > 0.0 {
        h_drifted(u, w, a)
    } else {
        (w * u).exp_m1() / w - u
    })
}

/// The `w -> 0` limit of [`kernel_h`], identically zero.
pub fn kernel_h_zero_weight(u: f64) -> Result<f64> {
    check_u(u)?;
    Ok(0.0)
}

/// `h'(u) = exp(c (exp(a u) - 1)) - 1`.
pub(crate) fn h_drifted_derivative(u: f64, w: f64, a: f64) -> f64 {
    (w / a * (a * u).exp_m1()).exp_m1()
}

pub(crate) fn h_drifted(s: f64, w: f64, a: f64) -> f64 {
    if s == 0.0 {
        return 0.0;
    }
    let c = w / a;
    if c.abs() <= 2.0 {
        // ln(y / c) = a s, so the logarithms of Ei cancel exactly
        let mut sum = 0.0;
        let mut pow = 1.0; // c^k / k!
        for k in 1..200 {
            let kf = k as f64;
            pow *= c / kf;
            let term = pow * (kf * a * s).exp_m1() / kf;
            sum += term;
            if kf > 2.0 * c.abs() && term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        return s * (-c).exp_m1() + (-c).exp() / a * sum;
    }
    let em = (a * s).exp_m1();
    if (c * em).abs() <= 0.5 {
        // short range: the Ei difference would cancel, the integrand is flat
        let mut f = |t: f64| h_drifted_derivative(t, w, a);
        return -crate::quad::integrate(&mut f, s, 0.0, 0.0, 1e-15, 50)
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
    }
    let y = c * (a * s).exp();
    if c > 0.0 {
        // exp(-c) Ei(y) = exp(y - c) * exp(-y) Ei(y)
        (((c * em).exp() * ei_scaled_pos(y)) - ei_scaled_pos(c)) / a - s
    } else {
        // Ei(y) - Ei(c) = E1(|c|) - E1(|y|), scaled by exp(|c|)
        let (ac, ay) = (-c, -y);
        (e1_scaled(ac, f64::EPSILON) - (ac - ay).exp() * e1_scaled(ay, f64::EPSILON)) / a - s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ei_reference_values() {
        let v = expint_ei(1.0, 1e-15).unwrap();
        assert!((v - 1.895_117_816_355_937).abs() < 1e-12);
        let v = expint_ei(-1.0, 1e-15).unwrap();
        assert!((v + 0.219_383_934_395_520_26).abs() < 1e-12);
    }

    #[test]
    fn ei_rejects_bad_input() {
        assert!(expint_ei(0.0, 1e-10).is_err());
        assert!(expint_ei(1.0, 0.0).is_err());
        assert!(expint_ei(1.0, 1.0).is_err());
        assert!(expint_ei(f64::NAN, 1e-3).is_err());
    }

    #[test]
    fn series_and_asymptotic_agree_on_the_crossover_band() {
        for k in 0..=40 {
            let x = 30.0 + 0.5 * k as f64;
            let series = (-x).exp() * ei_series(x, 1e-17);
            let asym = ei_asymptotic_scaled(x, 1e-17);
            assert!((series - asym).abs() <= 1e-10 * asym, "x = {x}");
        }
    }

    #[test]
    fn e1_series_and_fraction_agree_near_one() {
        for k in 0..=30 {
            let x = 0.5 + 0.05 * k as f64;
            let series = {
                let mut s = 0.0;
                let mut t = 1.0;
                for j in 1..60 {
                    t *= -x / j as f64;
                    s += t / j as f64;
                }
                x.exp() * (-EULER_GAMMA - x.ln() - s)
            };
            let cf = e1_scaled_cf(x, 1e-16);
            assert!((series - cf).abs() <= 1e-12 * cf, "x = {x}");
        }
    }

    #[test]
    fn kernel_l_examples() {
        let p = KernelParams::new(1.0, 0.0, 2.0);
        assert_eq!(kernel_l(0.0, &p).unwrap(), 0.0);
        assert_eq!(kernel_l(-3.0, &p).unwrap(), -6.0);
        let p = KernelParams::new(1.0, 1.0, 1.0);
        assert!((kernel_l(-std::f64::consts::LN_2, &p).unwrap() + 0.5).abs() < 1e-15);
        assert!(kernel_l(0.5, &p).is_err());
        assert!(kernel_l(-1.0, &KernelParams::new(1.0, 1.0, -1.0)).is_err());
    }

    #[test]
    fn kernel_h_examples() {
        for p in [KernelParams::new(1.0, 0.0, 1.0), KernelParams::new(1.0, 0.5, 1.0)] {
            assert_eq!(kernel_h(0.0, &p).unwrap(), 0.0);
        }
        let v = kernel_h(-1.0, &KernelParams::new(1.0, 0.0, 1.0)).unwrap();
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!(kernel_h(-1.0, &KernelParams::new(0.0, 1.0, 1.0)).is_err());
        assert_eq!(kernel_h_zero_weight(-5.0).unwrap(), 0.0);
        assert_eq!(kernel_h_zero_weight(0.0).unwrap(), 0.0);
        let tiny = kernel_h(-1.0, &KernelParams::new(1e-8, 0.0, 1.0)).unwrap();
        assert!(tiny.abs() <= 1e-7);
    }

    #[test]
    fn drifted_kernel_tends_to_drift_free_kernel() {
        for &w in &[-1.5, -0.3, 0.4, 2.0] {
            for &u in &[-0.5, -2.0] {
                let free = kernel_h(u, &KernelParams::new(w, 0.0, 1.0)).unwrap();
                let slow = kernel_h(u, &KernelParams::new(w, 1e-6, 1.0)).unwrap();
                assert!((free - slow).abs() < 1e-5 * free.abs().max(1.0), "w={w} u={u}");
            }
        }
    }

    #[test]
    fn branches_are_continuous_in_the_weight() {
        // |c| = 2 switches from the series to the Ei difference
        for &sign in &[1.0, -1.0] {
            let lo = h_drifted(-1.3, sign * (2.0 - 1e-9), 1.0);
            let hi = h_drifted(-1.3, sign * (2.0 + 1e-9), 1.0);
            assert!((lo - hi).abs() < 1e-8 * lo.abs(), "{lo} vs {hi}");
        }
    }

    #[test]
    fn large_ratio_does_not_overflow() {
        let v = h_drifted(-2.0, 690.0, 1.0);
        assert!(v.is_finite());
        // inhibitory weights make the integrand exp(|c| (1 - exp(a u))) - 1
        let v = h_drifted(-2.0, -600.0, 1.0);
        assert!(v.is_finite() && v < 0.0);
    }

    proptest! {
        #[test]
        fn drift_free_derivative_identity(u in -4.0f64..-0.01, w in -2.0f64..2.0) {
            prop_assume!(w.abs() > 1e-3);
            let p = KernelParams::new(w, 0.0, 1.0);
            let step = 1e-6;
            let fd = (kernel_h(u + step, &p).unwrap() - kernel_h(u - step, &p).unwrap()) / (2.0 * step);
            prop_assert!((fd - (u * w).exp_m1()).abs() < 1e-6);
        }

        #[test]
        fn drifted_derivative_identity(u in -4.0f64..-0.01, w in -4.0f64..6.0, a in 0.2f64..2.0) {
            prop_assume!(w.abs() > 1e-3);
            let p = KernelParams::new(w, a, 1.0);
            let step = 1e-5;
            let fd = (kernel_h(u + step, &p).unwrap() - kernel_h(u - step, &p).unwrap()) / (2.0 * step);
            let exact = h_drifted_derivative(u, w, a);
            prop_assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "fd {} exact {}", fd, exact);
        }

        #[test]
        fn l_is_bounded_below(u in -50.0f64..0.0, a in 0.01f64..5.0, r in 0.0f64..3.0) {
            let p = KernelParams::new(1.0, a, r);
            prop_assert!(kernel_l(u, &p).unwrap() + r / a >= -1e-12);
        }

        #[test]
        fn positive_weight_drift_free_h_is_nonnegative(u in -20.0f64..0.0, w in 1e-3f64..5.0) {
            prop_assert!(kernel_h(u, &KernelParams::new(w, 0.0, 1.0)).unwrap() >= 0.0);
        }

        #[test]
        fn ei_self_consistency(x in -300.0f64..300.0) {
            prop_assume!(x.abs() > 1e-3);
            prop_assert_eq!(expint_ei(x, 1e-12).unwrap() - expint_ei(x, 1e-12).unwrap(), 0.0);
        }
    }
}
