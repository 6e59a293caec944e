//! Replica mean-field system: `M` copies of a feed-forward network in which
//! every spike of neuron `(m, i)` is delivered, target by target, to a copy
//! of the target chosen uniformly among the other `M - 1` replicas.
//!
//! Neuron `(m, i)` draws its proposals, thinning uniforms and routing choices
//! from its own stream, so a neuron never sees the randomness of neurons
//! above it: changing what higher neurons do leaves its spikes bit-identical.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{check_horizon, Lazy, Proposals, MAX_EVENTS};
use crate::error::{Error, Result};
use crate::io::spec_digest;
use crate::network::{IntensitySpec, NetworkSpec};
use crate::rng::Stream;

/// One spike of the replica system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaEvent {
    pub time: f64,
    pub replica: usize,
    pub neuron: usize,
    /// Replica receiving each out-edge of `neuron`, in out-edge order.
    pub routes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaTrajectory {
    pub replicas: usize,
    pub n: usize,
    pub horizon: f64,
    pub seed: u64,
    /// Initial potential of neuron `i`, shared by all replicas.
    pub x0: Vec<f64>,
    pub events: Vec<ReplicaEvent>,
    pub spec_digest: String,
}

/// Simulates `replicas` copies on `(0, horizon]`, each neuron starting at
/// `x0` (its reset value when `None`).
pub fn simulate_replica(
    spec: &NetworkSpec,
    replicas: usize,
    horizon: f64,
    seed: u64,
    x0: Option<&[f64]>,
) -> Result<ReplicaTrajectory> {
    if replicas < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replicas, got {replicas}")));
    }
    if !spec.lower_triangular_inputs() {
        return Err(Error::InvalidSpec(
            "replica simulation needs lower_triangular_inputs (inputs only from lower neurons)"
                .into(),
        ));
    }
    check_horizon(horizon)?;
    let n = spec.n();
    let x0 = match x0 {
        Some(v) if v.len() != n => {
            return Err(Error::InvalidArgument(format!(
                "initial state has {} entries, network has {n}",
                v.len()
            )))
        }
        Some(v) if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) => {
            return Err(Error::InvalidArgument("initial potentials must be finite and >= 0".into()))
        }
        Some(v) => v.to_vec(),
        None => spec.reset().to_vec(),
    };
    let drift = spec.drift();
    let units = replicas * n;
    let mut state = Lazy::new((0..units).map(|u| x0[u % n]).collect());
    let mut prop = Proposals::new(
        (0..units).map(|u| Stream::new(seed, u / n, u % n)).collect(),
    );
    for u in 0..units {
        let i = u % n;
        prop.redraw(u, 0.0, spec.phi(i, state.value(u, drift[i], 0.0)));
    }
    let mut events = Vec::new();
    while let Some((t, u)) = prop.next() {
        if t > horizon {
            break;
        }
        let (m, i) = (u / n, u % n);
        let xi = state.value(u, drift[i], t);
        if prop.accept(u, spec.phi(i, xi)) {
            if events.len() >= MAX_EVENTS {
                return Err(Error::Numerical(format!(
                    "more than {MAX_EVENTS} spikes before t = {t}; the replica system looks explosive"
                )));
            }
            state.set(u, t, spec.reset()[i]);
            let out = spec.weights().out_edges(i);
            let mut routes = Vec::with_capacity(out.len());
            for &(j, w) in out {
                let k = prop.streams[u].index(replicas - 1);
                let v = if k >= m { k + 1 } else { k };
                routes.push(v);
                let target = v * n + j;
                let x = spec.interaction().combine(state.value(target, drift[j], t), w);
                state.set(target, t, x);
                prop.redraw(target, t, spec.phi(j, x));
            }
            events.push(ReplicaEvent {
                time: t,
                replica: m,
                neuron: i,
                routes,
            });
        } else {
            state.set(u, t, xi);
        }
        prop.redraw(u, t, spec.phi(i, state.value(u, drift[i], t)));
    }
    Ok(ReplicaTrajectory {
        replicas,
        n,
        horizon,
        seed,
        x0,
        events,
        spec_digest: spec_digest(spec),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMethod {
    /// Spikes per replica per unit time.
    SpikeRate,
    /// Time average of the intensity.
    IntensityMean,
}

impl std::fmt::Display for BetaMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BetaMethod::SpikeRate => "spike_rate",
            BetaMethod::IntensityMean => "intensity_mean",
        })
    }
}

impl std::str::FromStr for BetaMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spike_rate" => Ok(BetaMethod::SpikeRate),
            "intensity_mean" => Ok(BetaMethod::IntensityMean),
            other => Err(Error::InvalidArgument(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Stationary rate estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaEstimate {
    pub beta: Vec<f64>,
    /// Standard error from the spread across replicas.
    pub stderr: Vec<f64>,
    pub method: BetaMethod,
    pub burn_in: f64,
    pub replicas: usize,
    pub horizon: f64,
    /// Neurons with fewer than 10 spikes in the window.
    pub low_count: Vec<bool>,
}

/// `int_0^dt phi_i(x e^{-a s}) ds`.
fn intensity_integral(spec: &NetworkSpec, i: usize, x: f64, a: f64, dt: f64) -> f64 {
    // (1 - e^{-k dt}) / k, tending to dt as k -> 0
    let decay = |k: f64| if k == 0.0 { dt } else { -(-k * dt).exp_m1() / k };
    match spec.intensity() {
        IntensitySpec::Affine { slope, offset } => slope[i] * x * decay(a) + offset[i] * dt,
        IntensitySpec::Power { rho, offset } => x.powf(*rho) * decay(rho * a) + offset[i] * dt,
    }
}

/// Estimates `beta` from the part of `rt` after `burn_in` (half the horizon
/// when `None`).
pub fn estimate_beta(
    rt: &ReplicaTrajectory,
    spec: &NetworkSpec,
    burn_in: Option<f64>,
    method: BetaMethod,
) -> Result<BetaEstimate> {
    if spec_digest(spec) != rt.spec_digest {
        return Err(Error::InvalidArgument("trajectory was generated by a different spec".into()));
    }
    let burn_in = burn_in.unwrap_or(rt.horizon / 2.0);
    if !(0.0..rt.horizon).contains(&burn_in) {
        return Err(Error::InvalidArgument(format!(
            "burn-in must lie in [0, {}), got {burn_in}",
            rt.horizon
        )));
    }
    let (m_count, n) = (rt.replicas, rt.n);
    let window = rt.horizon - burn_in;
    let mut counts = vec![0.0; m_count * n];
    for e in &rt.events {
        if e.time > burn_in {
            counts[e.replica * n + e.neuron] += 1.0;
        }
    }
    let per_unit = match method {
        BetaMethod::SpikeRate => counts.iter().map(|c| c / window).collect::<Vec<_>>(),
        BetaMethod::IntensityMean => {
            let drift = spec.drift();
            let mut state = Lazy::new((0..m_count * n).map(|u| rt.x0[u % n]).collect());
            let mut last = vec![0.0; m_count * n];
            let mut acc = vec![0.0; m_count * n];
            // integrate unit u from its last update to t, clipped to the window
            let mut advance = |u: usize, t: f64, state: &mut Lazy, last: &mut [f64]| {
                let i = u % n;
                let a = drift[i];
                let t0 = last[u];
                if t > burn_in {
                    let from = t0.max(burn_in);
                    let x_from = state.value(u, a, from);
                    acc[u] += intensity_integral(spec, i, x_from, a, t - from);
                }
                let x = state.value(u, a, t);
                state.set(u, t, x);
                last[u] = t;
            };
            for e in &rt.events {
                let u = e.replica * n + e.neuron;
                advance(u, e.time, &mut state, &mut last);
                state.set(u, e.time, spec.reset()[e.neuron]);
                for (&(j, w), &v) in spec.weights().out_edges(e.neuron).iter().zip(&e.routes) {
                    let target = v * n + j;
                    advance(target, e.time, &mut state, &mut last);
                    let x = spec.interaction().combine(state.value(target, drift[j], e.time), w);
                    state.set(target, e.time, x);
                }
            }
            for u in 0..m_count * n {
                advance(u, rt.horizon, &mut state, &mut last);
            }
            acc.iter().map(|v| v / window).collect()
        }
    };
    let mut beta = vec![0.0; n];
    let mut stderr = vec![0.0; n];
    let mut low_count = vec![false; n];
    let mf = m_count as f64;
    for i in 0..n {
        let vals: Vec<f64> = (0..m_count).map(|m| per_unit[m * n + i]).collect();
        let mean = vals.iter().sum::<f64>() / mf;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mf - 1.0);
        beta[i] = mean;
        stderr[i] = (var / mf).sqrt();
        low_count[i] = (0..m_count).map(|m| counts[m * n + i]).sum::<f64>() < 10.0;
    }
    Ok(BetaEstimate {
        beta,
        stderr,
        method,
        burn_in,
        replicas: m_count,
        horizon: rt.horizon,
        low_count,
    })
}

/// Replica runs over several seeds in parallel, each reduced to its
/// estimate; returned in seed order.
pub fn estimate_beta_ensemble(
    spec: &NetworkSpec,
    replicas: usize,
    horizon: f64,
    seeds: std::ops::Range<u64>,
    burn_in: Option<f64>,
    method: BetaMethod,
) -> Result<Vec<BetaEstimate>> {
    seeds
        .into_par_iter()
        .map(|s| {
            let rt = simulate_replica(spec, replicas, horizon, s, None)?;
            estimate_beta(&rt, spec, burn_in, method)
        })
        .collect()
}
