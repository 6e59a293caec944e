//! Stationary rates of feed-forward networks in the replica mean-field
//! limit.
//!
//! With `y` the part of the intensity carried by the potential (`p x` for
//! affine intensities, `x^rho` for power ones), neuron `i` satisfies
//!
//! ```text
//! 1 / beta_i = int_{-inf}^0 exp(l(s) + z s - sum_j beta_j h_j(s)) ds
//! ```
//!
//! with the kernels of [`crate::specfun`] evaluated at the effective weight,
//! drift and reset of `y`. Rates are found neuron by neuron in index order,
//! each from the rates of its inputs.
//!
//! Asymptotically the exponent is linear with slope `kappa`: with drift,
//! `kappa = z + sum_j beta_j (1 - exp(-w_j / a))`; without drift,
//! `kappa = r + z + sum_j beta_j` provided no active input is inhibitory
//! (one such input makes the exponent grow like `exp(|w| |s|)`). The
//! integral converges exactly when `kappa > 0`; otherwise the rate is 0.
//!
//! The oracle solves the moment-generating-function equation
//! `-(1 + a u) L' + (F(u) - z) L + beta e^{u r} = 0` by direct quadrature,
//! without the exponential integral.

use serde::Serialize;

use crate::error::{check_index, Error, Result};
use crate::network::{IntensitySpec, InteractionRule, NetworkSpec};
use crate::quad::{integrate, tanh_sinh};
use crate::specfun::h_drifted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    /// The integral converged.
    Positive,
    /// The integrand does not decay; the rate is 0.
    ZeroByDivergence,
    /// The slope condition fails but the decay probe was inconclusive; the
    /// rate is reported as 0.
    ConditionFailed,
    /// The exponent overflows; the rate is below the smallest double.
    Underflow,
    /// Quadrature did not reach the tolerance within its budget.
    QuadratureFailed,
}

impl std::fmt::Display for RateStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RateStatus::Positive => "positive",
            RateStatus::ZeroByDivergence => "zero_by_divergence",
            RateStatus::ConditionFailed => "condition_failed",
            RateStatus::Underflow => "underflow",
            RateStatus::QuadratureFailed => "quadrature_failed",
        })
    }
}

/// Solution of the rate equations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateProfile {
    pub beta: Vec<f64>,
    pub status: Vec<RateStatus>,
    /// `kappa` of each neuron.
    pub condition_values: Vec<f64>,
    /// Estimated relative error of each rate.
    pub quad_error: Vec<f64>,
}

/// Effective parameters of one neuron: drift, reset and offset of `y`,
/// plus its inputs as `(source, weight on y)`.
#[derive(Debug, Clone)]
struct Neuron {
    a: f64,
    r: f64,
    z: f64,
    inputs: Vec<(usize, f64)>,
}

fn effective(spec: &NetworkSpec, i: usize) -> Result<Neuron> {
    let a = spec.drift()[i];
    let r = spec.reset()[i];
    let raw = spec.weights().in_edges(i);
    let (a, r, z, inputs) = match (spec.intensity(), spec.interaction()) {
        (IntensitySpec::Affine { slope, offset }, InteractionRule::ClipAdd)
        | (IntensitySpec::Affine { slope, offset }, InteractionRule::PowerCombine { rho: 1.0 }) => {
            let p = slope[i];
            (a, p * r, offset[i], raw.iter().map(|&(j, w)| (j, p * w)).collect())
        }
        (IntensitySpec::Power { rho, offset }, InteractionRule::PowerCombine { .. })
        | (IntensitySpec::Power { rho: rho @ 1.0, offset }, InteractionRule::ClipAdd) => {
            let rho = *rho;
            (
                rho * a,
                r.powf(rho),
                offset[i],
                raw.iter().map(|&(j, w)| (j, w.powf(rho))).collect(),
            )
        }
        _ => {
            return Err(Error::Unsupported(
                "rates need an affine intensity with additive (or rho = 1) interaction, \
                 or a power intensity with the matching power interaction"
                    .into(),
            ))
        }
    };
    Ok(Neuron { a, r, z, inputs })
}

fn check_prefix(spec: &NetworkSpec, beta: &[f64], i: usize) -> Result<()> {
    check_index(i, spec.n())?;
    if !spec.lower_triangular_inputs() {
        return Err(Error::InvalidSpec(
            "rate equations need lower_triangular_inputs (inputs only from lower neurons)".into(),
        ));
    }
    if beta.len() < i {
        return Err(Error::InvalidArgument(format!(
            "rates of neurons 1..={i} are needed, got {}",
            beta.len()
        )));
    }
    if let Some(b) = beta[..i].iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
        return Err(Error::InvalidArgument(format!("rates must be finite and >= 0, got {b}")));
    }
    Ok(())
}

/// Active inputs `(w, beta_j)`; silent inputs drop out exactly.
fn active(nr: &Neuron, beta: &[f64]) -> Vec<(f64, f64)> {
    nr.inputs
        .iter()
        .filter(|&&(j, w)| beta[j] > 0.0 && w != 0.0)
        .map(|&(j, w)| (w, beta[j]))
        .collect()
}

fn kappa(nr: &Neuron, act: &[(f64, f64)]) -> f64 {
    if nr.a > 0.0 {
        nr.z + act.iter().map(|&(w, b)| -b * (-w / nr.a).exp_m1()).sum::<f64>()
    } else if act.iter().any(|&(w, _)| w < 0.0) {
        f64::NEG_INFINITY
    } else {
        nr.r + nr.z + act.iter().map(|&(_, b)| b).sum::<f64>()
    }
}

/// Asymptotic slope `kappa` of the exponent of neuron `i` and whether it is
/// positive, given the rates of neurons `0..i`. Without drift an active
/// inhibitory input gives `-inf`.
pub fn check_theorem_condition(spec: &NetworkSpec, beta_prefix: &[f64], i: usize) -> Result<(bool, f64)> {
    check_prefix(spec, beta_prefix, i)?;
    let nr = effective(spec, i)?;
    let k = kappa(&nr, &active(&nr, beta_prefix));
    Ok((k > 0.0, k))
}

/// The exponent `l(s) + z s - sum_j beta_j h_j(s)`.
fn exponent(nr: &Neuron, act: &[(f64, f64)], s: f64) -> f64 {
    if nr.a > 0.0 {
        let a = nr.a;
        nr.r / a * (a * s).exp_m1() + nr.z * s
            - act.iter().map(|&(w, b)| b * h_drifted(s, w, a)).sum::<f64>()
    } else {
        (nr.r + nr.z) * s - act.iter().map(|&(w, b)| b * ((w * s).exp_m1() / w - s)).sum::<f64>()
    }
}

/// Does the integrand fail to decay over two consecutive decades?
fn diverges(nr: &Neuron, act: &[(f64, f64)]) -> bool {
    let mut prev = exponent(nr, act, -1.0);
    let mut run = 0;
    for k in 1..=12 {
        let cur = exponent(nr, act, -(10f64.powi(k)));
        if !cur.is_finite() || cur > prev - 1.0 {
            run += 1;
            if run >= 2 {
                return true;
            }
        } else {
            run = 0;
        }
        prev = cur;
    }
    false
}

struct Solved {
    beta: f64,
    status: RateStatus,
    rel_err: f64,
}

fn solve_one(nr: &Neuron, act: &[(f64, f64)], tol: f64) -> Solved {
    let k = kappa(nr, act);
    let zero = |status| Solved { beta: 0.0, status, rel_err: 0.0 };
    if !(k > 0.0) {
        return zero(if diverges(nr, act) {
            RateStatus::ZeroByDivergence
        } else {
            RateStatus::ConditionFailed
        });
    }
    let phi = |s: f64| exponent(nr, act, s);
    // walk out geometrically until the integrand is negligible and the
    // exponent has settled on its asymptotic slope
    let scale = 1.0 / (nr.r + nr.z + nr.a + k).max(1e-3);
    let mut cuts = vec![0.0];
    let mut peak = 0.0f64;
    let mut s = -0.25 * scale;
    let mut settled = false;
    for _ in 0..2000 {
        let prev = *cuts.last().expect("nonempty");
        for q in 1..=8 {
            let v = phi(prev + (s - prev) * q as f64 / 8.0);
            if v.is_nan() {
                return zero(RateStatus::QuadratureFailed);
            }
            peak = peak.max(v);
        }
        cuts.push(s);
        if !peak.is_finite() {
            return zero(RateStatus::Underflow);
        }
        let v = phi(s);
        let slope = (phi(0.95 * s) - v) / (0.05 * -s);
        if v < peak - 45.0 && slope >= 0.5 * k {
            settled = true;
            break;
        }
        s *= 2.0;
        if !s.is_finite() {
            break;
        }
    }
    if !settled {
        return zero(RateStatus::QuadratureFailed);
    }
    let f = |s: f64| (phi(s) - peak).exp();
    let mut total = 0.0;
    let mut err = 0.0;
    for w in cuts.windows(2) {
        match integrate(f, w[1], w[0], 0.0, 0.1 * tol, 4000) {
            Ok(e) => {
                total += e.value;
                err += e.error;
            }
            Err(_) => return zero(RateStatus::QuadratureFailed),
        }
    }
    let s_lo = *cuts.last().expect("nonempty");
    let tail = f(s_lo) / k;
    total += tail;
    err += 0.5 * tail;
    let beta = (-peak).exp() / total;
    if beta == 0.0 {
        return zero(RateStatus::Underflow);
    }
    Solved {
        beta,
        status: RateStatus::Positive,
        rel_err: err / total,
    }
}

/// Solves for every rate in index order to relative tolerance `tol`.
///
/// Neurons whose integral diverges get rate 0; a neuron whose quadrature
/// fails is flagged and contributes rate 0 downstream.
pub fn solve_beta(spec: &NetworkSpec, tol: f64) -> Result<RateProfile> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let tol = tol.max(1e-14);
    let n = spec.n();
    if !spec.lower_triangular_inputs() {
        return Err(Error::InvalidSpec(
            "rate equations need lower_triangular_inputs (inputs only from lower neurons)".into(),
        ));
    }
    let mut out = RateProfile {
        beta: Vec::with_capacity(n),
        status: Vec::with_capacity(n),
        condition_values: Vec::with_capacity(n),
        quad_error: Vec::with_capacity(n),
    };
    for i in 0..n {
        let nr = effective(spec, i)?;
        let act = active(&nr, &out.beta);
        let sol = solve_one(&nr, &act, tol);
        out.condition_values.push(kappa(&nr, &act));
        out.beta.push(sol.beta);
        out.status.push(sol.status);
        out.quad_error.push(sol.rel_err);
    }
    Ok(out)
}

/// `h(s) = int_0^v (e^{w t} - 1) / (1 + a t) dt` with `v = (e^{a s} - 1) / a`,
/// by adaptive quadrature.
pub fn oracle_kernel_h(s: f64, w: f64, a: f64) -> Result<f64> {
    if !(s <= 0.0 && a > 0.0) {
        return Err(Error::InvalidArgument(format!("need s <= 0 and a > 0, got s = {s}, a = {a}")));
    }
    let v = (a * s).exp_m1() / a;
    let e = integrate(|t: f64| (w * t).exp_m1() / (1.0 + a * t), 0.0, v, 1e-300, 1e-14, 4000)?;
    Ok(e.value)
}

/// Pieces of the oracle for one drifted neuron.
struct Oracle {
    a: f64,
    r: f64,
    kappa: f64,
    act: Vec<(f64, f64)>,
}

impl Oracle {
    fn new(spec: &NetworkSpec, beta: &[f64], i: usize) -> Result<Self> {
        check_prefix(spec, beta, i)?;
        let nr = effective(spec, i)?;
        if nr.a <= 0.0 {
            return Err(Error::InvalidArgument(
                "the oracle needs a drifted neuron (a > 0)".into(),
            ));
        }
        let act = active(&nr, beta);
        let kappa = kappa(&nr, &act);
        if !(kappa > 0.0) {
            return Err(Error::Numerical(format!(
                "neuron {} has slope {kappa}; its stationary law is degenerate",
                i + 1
            )));
        }
        Ok(Oracle { a: nr.a, r: nr.r, kappa, act })
    }

    fn tau(&self) -> f64 {
        1.0 / self.a
    }

    /// `int_v^0 (F(t) - F(-tau)) / (1 + a t) dt`, with `d = v + tau`.
    fn smooth(&self, d: f64) -> Result<f64> {
        let (a, tau) = (self.a, self.tau());
        let g = |x: f64| {
            // F(t) - F(-tau) over 1 + a t, at distance x = t + tau
            let num: f64 = self
                .act
                .iter()
                .map(|&(w, b)| b * (-w * tau).exp() * if x == 0.0 { w } else { (w * x).exp_m1() / x })
                .sum();
            num / a
        };
        Ok(integrate(g, d, tau, 1e-300, 1e-14, 4000)?.value)
    }

    /// `Lambda(u) / beta_i` for `u > -tau`.
    fn shape(&self, u: f64) -> Result<f64> {
        let (a, tau, r, ex) = (self.a, self.tau(), self.r, self.kappa / self.a);
        let du = u + tau;
        if !(du > 0.0) {
            return Err(Error::InvalidArgument(format!("u must exceed -1/a = {}", -tau)));
        }
        let mut fail = None;
        let inner = tanh_sinh(
            |d, _| {
                let v = d - tau;
                match self.smooth(d) {
                    Ok(s) => (s + v * r).exp() * (a * d).powf(ex) / (a * d),
                    Err(e) => {
                        fail.get_or_insert(e);
                        0.0
                    }
                }
            },
            du,
            1e-13,
        )?;
        if let Some(e) = fail {
            return Err(e);
        }
        let psi = self.smooth(du)? + ex * (a * du).ln();
        Ok((-psi).exp() * inner.value)
    }

    fn forcing(&self, u: f64) -> f64 {
        self.act.iter().map(|&(w, b)| b * (w * u).exp_m1()).sum()
    }
}

/// `Lambda(u) = E[e^{u y}]` of neuron `i` for `u` in `(-1/a_i, 0]`, computed
/// from the rates in `beta` (entries `0..=i`, the last being the rate of `i`
/// itself) without the exponential integral.
pub fn oracle_lambda(spec: &NetworkSpec, beta: &[f64], i: usize, u: f64) -> Result<f64> {
    if beta.len() <= i {
        return Err(Error::InvalidArgument(format!(
            "rates of neurons 1..={} are needed, got {}",
            i + 1,
            beta.len()
        )));
    }
    if u > 0.0 {
        return Err(Error::InvalidArgument(format!("u must be <= 0, got {u}")));
    }
    let o = Oracle::new(spec, beta, i)?;
    Ok(beta[i] * o.shape(u)?)
}

/// The rate making `Lambda(0) = 1`, given the rates of neurons `0..i`.
pub fn oracle_beta(spec: &NetworkSpec, beta_prefix: &[f64], i: usize) -> Result<f64> {
    let o = Oracle::new(spec, beta_prefix, i)?;
    Ok(1.0 / o.shape(0.0)?)
}

/// Residual of the moment-generating-function equation at `u`, with
/// `Lambda` normalised to `Lambda(0) = 1` and its derivative from a
/// five-point stencil. Vanishes when `beta[i]` is the stationary rate.
pub fn mgf_ode_residual(spec: &NetworkSpec, beta: &[f64], i: usize, u: f64) -> Result<f64> {
    if beta.len() <= i {
        return Err(Error::InvalidArgument(format!(
            "rates of neurons 1..={} are needed, got {}",
            i + 1,
            beta.len()
        )));
    }
    let o = Oracle::new(spec, beta, i)?;
    if !(u <= 0.0 && u > -o.tau()) {
        return Err(Error::InvalidArgument(format!("u must lie in (-1/a, 0], got {u}")));
    }
    let h = 1e-3f64.min(0.25 * (u + o.tau()));
    let norm = o.shape(0.0)?;
    let lam = |x: f64| o.shape(x).map(|v| v / norm);
    let d = (lam(u - 2.0 * h)? - 8.0 * lam(u - h)? + 8.0 * lam(u + h)? - lam(u + 2.0 * h)?) / (12.0 * h);
    let nr = effective(spec, i)?;
    Ok(-(1.0 + o.a * u) * d + (o.forcing(u) - nr.z) * lam(u)? + beta[i] * (u * o.r).exp())
}
