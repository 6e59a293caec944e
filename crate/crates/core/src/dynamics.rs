//! Exact event-driven simulation by thinning.
//!
//! Between spikes every potential decays as `x exp(-a t)`, so each
//! intensity is nonincreasing until the next spike that reaches it. The
//! intensity at the last update is therefore a valid local bound: a neuron
//! proposes its next spike at an exponential time of that rate, and the
//! proposal is accepted with probability `phi(x(t)) / bound`. After a
//! rejection, a spike or an incoming kick, the neuron redraws its proposal
//! from the current state.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::conditions::{check_condition, Condition};
use crate::error::{check_index, Error, Result};
use crate::io::spec_digest;
use crate::network::{NetworkSpec, NetworkState};
use crate::rng::Stream;

/// Hard cap on accepted events per run; hitting it is reported as a
/// numerical failure (explosion suspected).
pub const MAX_EVENTS: usize = 20_000_000;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    time: f64,
    unit: usize,
    generation: u64,
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.time
            .total_cmp(&o.time)
            .then(self.unit.cmp(&o.unit))
            .then(self.generation.cmp(&o.generation))
    }
}

/// Pending proposals, one live entry per unit; ties break on the unit index.
pub(crate) struct Queue {
    heap: BinaryHeap<Reverse<Candidate>>,
    generation: Vec<u64>,
}

impl Queue {
    pub(crate) fn new(units: usize) -> Self {
        Queue {
            heap: BinaryHeap::with_capacity(units),
            generation: vec![0; units],
        }
    }

    /// Replaces the proposal of `unit`; infinite times are dropped.
    pub(crate) fn schedule(&mut self, unit: usize, time: f64) {
        self.generation[unit] += 1;
        if time.is_finite() {
            self.heap.push(Reverse(Candidate {
                time,
                unit,
                generation: self.generation[unit],
            }));
        }
    }

    pub(crate) fn pop(&mut self) -> Option<(f64, usize)> {
        while let Some(Reverse(c)) = self.heap.pop() {
            if c.generation == self.generation[c.unit] {
                return Some((c.time, c.unit));
            }
        }
        None
    }
}

/// Per-unit random streams, current thinning bounds and pending proposals.
pub(crate) struct Proposals {
    pub(crate) streams: Vec<Stream>,
    bounds: Vec<f64>,
    queue: Queue,
}

impl Proposals {
    pub(crate) fn new(streams: Vec<Stream>) -> Self {
        let units = streams.len();
        Proposals {
            streams,
            bounds: vec![0.0; units],
            queue: Queue::new(units),
        }
    }

    /// New proposal for `unit` dominated by its current intensity `rate`.
    #[inline]
    pub(crate) fn redraw(&mut self, unit: usize, now: f64, rate: f64) {
        self.bounds[unit] = rate;
        let t = now + self.streams[unit].exponential(rate);
        self.queue.schedule(unit, t);
    }

    #[inline]
    pub(crate) fn next(&mut self) -> Option<(f64, usize)> {
        self.queue.pop()
    }

    /// Dominating rate of the live proposal of `unit`.
    #[inline]
    pub(crate) fn bound(&self, unit: usize) -> f64 {
        self.bounds[unit]
    }

    /// Thinning decision for a proposal of `unit` whose true rate is `rate`.
    #[inline]
    pub(crate) fn accept(&mut self, unit: usize, rate: f64) -> bool {
        self.streams[unit].uniform() * self.bounds[unit] <= rate
    }
}

/// Potentials stored as (value, time of last update).
#[derive(Debug, Clone)]
pub(crate) struct Lazy {
    x: Vec<f64>,
    at: Vec<f64>,
}

impl Lazy {
    pub(crate) fn new(x: Vec<f64>) -> Self {
        let n = x.len();
        Lazy { x, at: vec![0.0; n] }
    }

    #[inline]
    pub(crate) fn value(&self, u: usize, a: f64, t: f64) -> f64 {
        if a == 0.0 {
            self.x[u]
        } else {
            self.x[u] * (-a * (t - self.at[u])).exp()
        }
    }

    #[inline]
    pub(crate) fn set(&mut self, u: usize, t: f64, v: f64) {
        self.x[u] = v;
        self.at[u] = t;
    }
}

/// One recorded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    /// `(time, neuron)` in increasing time.
    pub events: Vec<(f64, usize)>,
    /// States on the requested grid.
    pub snapshots: Vec<NetworkState>,
    pub x0: NetworkState,
    pub horizon: f64,
    pub seed: u64,
    pub spec_digest: String,
}

pub(crate) fn check_horizon(horizon: f64) -> Result<()> {
    if horizon > 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("horizon must be finite and > 0, got {horizon}")))
    }
}

pub(crate) fn check_grid(grid: &[f64], horizon: f64) -> Result<()> {
    if grid.iter().any(|&g| !(0.0..=horizon).contains(&g)) {
        return Err(Error::InvalidArgument(format!("grid points must lie in [0, {horizon}]")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("grid must be nondecreasing".into()));
    }
    Ok(())
}

pub(crate) fn check_initial(spec: &NetworkSpec, x0: &NetworkState) -> Result<()> {
    spec.check_state(x0)?;
    if let Some((i, v)) = x0.x.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "initial potential of neuron {} must be finite and >= 0, got {v}",
            i + 1
        )));
    }
    Ok(())
}

/// Simulates on `(0, horizon]` from `x0`, recording the state at each
/// point of `grid`.
///
/// A network whose intensities all vanish stays frozen; the result then has
/// no events.
pub fn simulate(
    spec: &NetworkSpec,
    x0: &NetworkState,
    horizon: f64,
    seed: u64,
    grid: &[f64],
) -> Result<Trajectory> {
    check_horizon(horizon)?;
    check_initial(spec, x0)?;
    check_grid(grid, horizon)?;
    let n = spec.n();
    let drift = spec.drift();
    let mut state = Lazy::new(x0.x.clone());
    let mut prop = Proposals::new((0..n).map(|i| Stream::new(seed, 0, i)).collect());
    let mut events = Vec::new();
    let mut snapshots = Vec::with_capacity(grid.len());
    let mut next_grid = 0;
    let snap = |state: &Lazy, t: f64| NetworkState {
        x: (0..n).map(|i| state.value(i, drift[i], t)).collect(),
        t,
    };
    for i in 0..n {
        prop.redraw(i, 0.0, spec.phi(i, state.value(i, drift[i], 0.0)));
    }

    while let Some((t, i)) = prop.next() {
        if t > horizon {
            break;
        }
        while next_grid < grid.len() && grid[next_grid] < t {
            snapshots.push(snap(&state, grid[next_grid]));
            next_grid += 1;
        }
        let xi = state.value(i, drift[i], t);
        if prop.accept(i, spec.phi(i, xi)) {
            if events.len() >= MAX_EVENTS {
                return Err(Error::Numerical(format!(
                    "more than {MAX_EVENTS} spikes before t = {t}; the network looks explosive"
                )));
            }
            events.push((t, i));
            state.set(i, t, spec.reset()[i]);
            for &(j, w) in spec.weights().out_edges(i) {
                let v = spec.interaction().combine(state.value(j, drift[j], t), w);
                state.set(j, t, v);
                prop.redraw(j, t, spec.phi(j, v));
            }
        } else {
            state.set(i, t, xi);
        }
        prop.redraw(i, t, spec.phi(i, state.value(i, drift[i], t)));
    }
    while next_grid < grid.len() {
        snapshots.push(snap(&state, grid[next_grid]));
        next_grid += 1;
    }
    Ok(Trajectory {
        events,
        snapshots,
        x0: NetworkState { x: x0.x.clone(), t: 0.0 },
        horizon,
        seed,
        spec_digest: spec_digest(spec),
    })
}

/// Independent runs for seeds `seeds`, in parallel, returned in seed order.
pub fn simulate_ensemble(
    spec: &NetworkSpec,
    x0: &NetworkState,
    horizon: f64,
    seeds: std::ops::Range<u64>,
    grid: &[f64],
) -> Result<Vec<Trajectory>> {
    seeds
        .into_par_iter()
        .map(|seed| simulate(spec, x0, horizon, seed, grid))
        .collect()
}

/// Number of spikes in `(s, t]`, of one neuron or of all.
pub fn spike_count(traj: &Trajectory, neuron: Option<usize>, s: f64, t: f64) -> Result<usize> {
    if !(s <= t) {
        return Err(Error::InvalidArgument(format!("empty interval ({s}, {t}]")));
    }
    if s < 0.0 || t > traj.horizon {
        return Err(Error::InvalidArgument(format!(
            "interval ({s}, {t}] leaves the simulated window (0, {}]",
            traj.horizon
        )));
    }
    if let Some(i) = neuron {
        check_index(i, traj.x0.x.len())?;
    }
    // events are sorted by time
    let lo = traj.events.partition_point(|&(u, _)| u <= s);
    let hi = traj.events.partition_point(|&(u, _)| u <= t);
    Ok(traj.events[lo..hi]
        .iter()
        .filter(|&&(_, i)| neuron.map_or(true, |k| k == i))
        .count())
}

/// Which bound controls `E h(X_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `h(X_t)` is a supermartingale; the named condition holds.
    Supermartingale(Condition),
    /// Only the growth bound with constants `B` and `D` is available.
    Gronwall { b: f64, d: f64 },
}

/// `h(x) = sum_i L_i x_i` along a trajectory and its bound in expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovSeries {
    pub times: Vec<f64>,
    pub h_values: Vec<f64>,
    pub bound_values: Vec<f64>,
    pub regime: Regime,
}

fn lipschitz_constants(spec: &NetworkSpec) -> Result<Vec<f64>> {
    (0..spec.n())
        .map(|i| {
            spec.intensity().lipschitz(i).ok_or_else(|| {
                Error::Unsupported("the Lyapunov function needs a Lipschitz intensity".into())
            })
        })
        .collect()
}

/// `sum_i L_i x_i`.
pub fn lyapunov_value(spec: &NetworkSpec, x: &NetworkState) -> Result<f64> {
    spec.check_state(x)?;
    let lip = lipschitz_constants(spec)?;
    Ok(lip.iter().zip(&x.x).map(|(l, v)| l * v).sum())
}

/// The first of (A), (B), (D) that holds, else (C) with its constants.
pub fn regime(spec: &NetworkSpec) -> Result<Regime> {
    lipschitz_constants(spec)?;
    for c in [Condition::A, Condition::B, Condition::D] {
        if check_condition(spec, c)?.holds() {
            return Ok(Regime::Supermartingale(c));
        }
    }
    let rep = check_condition(spec, Condition::C)?;
    match (rep.holds(), rep.witness("B_const"), rep.witness("D_const")) {
        (true, Some(b), Some(d)) => Ok(Regime::Gronwall { b, d }),
        _ => Err(Error::Unsupported(
            "none of (A), (B), (C), (D) holds; no bound applies".into(),
        )),
    }
}

/// Evaluates `h` on the snapshots of `traj` together with its bound.
pub fn lyapunov_series(traj: &Trajectory, spec: &NetworkSpec) -> Result<LyapunovSeries> {
    let regime = regime(spec)?;
    let h0 = lyapunov_value(spec, &traj.x0)?;
    let mut out = LyapunovSeries {
        times: Vec::with_capacity(traj.snapshots.len()),
        h_values: Vec::with_capacity(traj.snapshots.len()),
        bound_values: Vec::with_capacity(traj.snapshots.len()),
        regime,
    };
    for s in &traj.snapshots {
        out.times.push(s.t);
        out.h_values.push(lyapunov_value(spec, s)?);
        out.bound_values.push(match regime {
            Regime::Supermartingale(_) => h0,
            Regime::Gronwall { b, d } => h0 + h0 * b * s.t + d / b * s.t.exp(),
        });
    }
    Ok(out)
}

/// Upper bound on the expected number of spikes in `(s, t]`.
///
/// In the supermartingale regime this is `(t - s)(h(x0) + sum_i phi_i(0))`.
/// Under (C) alone it is
/// `(D/B)(e^t - e^s) + (t^2 - s^2) h(x0) B / 2 + (t - s)(h(x0) + sum_i phi_i(0))`.
pub fn expected_spike_bound(spec: &NetworkSpec, x0: &NetworkState, s: f64, t: f64) -> Result<f64> {
    if !(0.0 <= s && s <= t && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("need 0 <= s <= t, got ({s}, {t})")));
    }
    let h0 = lyapunov_value(spec, x0)?;
    let phi0: f64 = (0..spec.n()).map(|i| spec.intensity().offset(i)).sum();
    let linear = (t - s) * (h0 + phi0);
    Ok(match regime(spec)? {
        Regime::Supermartingale(_) => linear,
        Regime::Gronwall { b, d } => {
            d / b * (t.exp() - s.exp()) + (t * t - s * s) * h0 * b / 2.0 + linear
        }
    })
}
