//! Two copies of the network driven by one coupling.
//!
//! Neuron `i` fires in both copies at rate `min(phi(x_i), phi(y_i))` and in
//! the copy with the larger intensity alone at rate `|phi(x_i) - phi(y_i)|`,
//! so each copy on its own is an exact run of the network. Proposals use
//! the shared bound `max(phi(x_i), phi(y_i))`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{check_grid, check_horizon, check_initial, Lazy, Proposals, MAX_EVENTS};
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, NetworkState};
use crate::rng::Stream;

/// `sum_i |x_i - y_i| / 2^i` with neurons counted from 1.
pub fn w1_norm(x: &NetworkState, y: &NetworkState) -> Result<f64> {
    if x.x.len() != y.x.len() {
        return Err(Error::InvalidArgument(format!(
            "states have {} and {} coordinates",
            x.x.len(),
            y.x.len()
        )));
    }
    Ok(weighted_l1(&x.x, &y.x))
}

fn weighted_l1(x: &[f64], y: &[f64]) -> f64 {
    let mut w = 1.0;
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            w *= 0.5;
            (a - b).abs() * w
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Both,
    XOnly,
    YOnly,
}

/// One coupled run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledTrajectory {
    /// `(time, neuron, branch)` in increasing time.
    pub events: Vec<(f64, usize, Branch)>,
    /// `(time, w1_norm(x_t, y_t))` on the requested grid.
    pub distance_series: Vec<(f64, f64)>,
    pub seed: u64,
}

/// Simulates the coupled pair on `(0, horizon]`.
pub fn simulate_coupled(
    spec: &NetworkSpec,
    x0: &NetworkState,
    y0: &NetworkState,
    horizon: f64,
    seed: u64,
    grid: &[f64],
) -> Result<CoupledTrajectory> {
    check_horizon(horizon)?;
    check_initial(spec, x0)?;
    check_initial(spec, y0)?;
    check_grid(grid, horizon)?;
    let n = spec.n();
    let drift = spec.drift();
    let mut xs = Lazy::new(x0.x.clone());
    let mut ys = Lazy::new(y0.x.clone());
    let mut prop = Proposals::new((0..n).map(|i| Stream::new(seed, 0, i)).collect());
    let mut events = Vec::new();
    let mut distance_series = Vec::with_capacity(grid.len());
    let mut next_grid = 0;
    let bound = |xs: &Lazy, ys: &Lazy, i: usize, t: f64| {
        spec.phi(i, xs.value(i, drift[i], t)).max(spec.phi(i, ys.value(i, drift[i], t)))
    };
    let distance = |xs: &Lazy, ys: &Lazy, t: f64| {
        let x: Vec<f64> = (0..n).map(|i| xs.value(i, drift[i], t)).collect();
        let y: Vec<f64> = (0..n).map(|i| ys.value(i, drift[i], t)).collect();
        weighted_l1(&x, &y)
    };
    for i in 0..n {
        prop.redraw(i, 0.0, bound(&xs, &ys, i, 0.0));
    }

    while let Some((t, i)) = prop.next() {
        if t > horizon {
            break;
        }
        while next_grid < grid.len() && grid[next_grid] < t {
            distance_series.push((grid[next_grid], distance(&xs, &ys, grid[next_grid])));
            next_grid += 1;
        }
        let (xi, yi) = (xs.value(i, drift[i], t), ys.value(i, drift[i], t));
        let (fx, fy) = (spec.phi(i, xi), spec.phi(i, yi));
        let branch = if prop.accept(i, fx.min(fy)) {
            Some(Branch::Both)
        } else {
            // the thinning uniform is spent; a fresh one splits the surplus
            let (lo, hi) = (fx.min(fy), fx.max(fy));
            let surplus = hi - lo;
            let rest = prop.bound(i) - lo;
            if surplus > 0.0 && rest > 0.0 && prop.streams[i].uniform() * rest <= surplus {
                Some(if fx > fy { Branch::XOnly } else { Branch::YOnly })
            } else {
                None
            }
        };
        xs.set(i, t, xi);
        ys.set(i, t, yi);
        if let Some(b) = branch {
            if events.len() >= MAX_EVENTS {
                return Err(Error::Numerical(format!(
                    "more than {MAX_EVENTS} coupled spikes before t = {t}"
                )));
            }
            events.push((t, i, b));
            let fire = |s: &mut Lazy| {
                s.set(i, t, spec.reset()[i]);
                for &(j, w) in spec.weights().out_edges(i) {
                    let v = spec.interaction().combine(s.value(j, drift[j], t), w);
                    s.set(j, t, v);
                }
            };
            if b != Branch::YOnly {
                fire(&mut xs);
            }
            if b != Branch::XOnly {
                fire(&mut ys);
            }
            for &(j, _) in spec.weights().out_edges(i) {
                prop.redraw(j, t, bound(&xs, &ys, j, t));
            }
        }
        prop.redraw(i, t, bound(&xs, &ys, i, t));
    }
    while next_grid < grid.len() {
        distance_series.push((grid[next_grid], distance(&xs, &ys, grid[next_grid])));
        next_grid += 1;
    }
    Ok(CoupledTrajectory {
        events,
        distance_series,
        seed,
    })
}

/// Distance series of many coupled runs on a common grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingEnsemble {
    pub times: Vec<f64>,
    /// `paths[k][g]`: distance of run `k` at `times[g]`.
    pub paths: Vec<Vec<f64>>,
}

impl CouplingEnsemble {
    pub fn from_runs(runs: &[CoupledTrajectory]) -> Result<Self> {
        let first = runs
            .first()
            .ok_or_else(|| Error::InvalidArgument("no coupled runs".into()))?;
        let times: Vec<f64> = first.distance_series.iter().map(|p| p.0).collect();
        let paths = runs
            .iter()
            .map(|r| r.distance_series.iter().map(|p| p.1).collect())
            .collect();
        Ok(CouplingEnsemble { times, paths })
    }

    /// Mean distance and its standard error per grid point.
    pub fn mean_distance(&self) -> Vec<(f64, f64)> {
        mean_and_sem(&self.paths, &(0..self.paths.len()).collect::<Vec<_>>(), self.times.len())
    }
}

fn mean_and_sem(paths: &[Vec<f64>], pick: &[usize], len: usize) -> Vec<(f64, f64)> {
    let m = pick.len() as f64;
    (0..len)
        .map(|g| {
            let mean = pick.iter().map(|&k| paths[k][g]).sum::<f64>() / m;
            let var = if pick.len() > 1 {
                pick.iter().map(|&k| (paths[k][g] - mean).powi(2)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            (mean, (var / m).sqrt())
        })
        .collect()
}

/// Runs seeds `seeds` in parallel on a shared grid.
pub fn simulate_coupled_ensemble(
    spec: &NetworkSpec,
    x0: &NetworkState,
    y0: &NetworkState,
    horizon: f64,
    seeds: std::ops::Range<u64>,
    grid: &[f64],
) -> Result<CouplingEnsemble> {
    let runs: Vec<CoupledTrajectory> = seeds
        .into_par_iter()
        .map(|s| simulate_coupled(spec, x0, y0, horizon, s, grid))
        .collect::<Result<_>>()?;
    CouplingEnsemble::from_runs(&runs)
}

/// Fitted exponential decay rate with a bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub resamples: usize,
}

pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Least-squares slope of `ln(values)` against `times`, negated.
pub fn log_decay_rate(times: &[f64], values: &[f64]) -> Result<f64> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::InvalidArgument("need at least two matching points".into()));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Numerical("distance series is not strictly positive".into()));
    }
    let m = times.len() as f64;
    let tm = times.iter().sum::<f64>() / m;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let lm = logs.iter().sum::<f64>() / m;
    let sxy: f64 = times.iter().zip(&logs).map(|(t, l)| (t - tm) * (l - lm)).sum();
    let sxx: f64 = times.iter().map(|t| (t - tm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("fit times are all equal".into()));
    }
    Ok(-sxy / sxx)
}

/// Decay rate of the mean distance over the grid points in
/// `[0.1 T, T]`, with a 95% interval from resampling paths.
pub fn contraction_rate_fit(ens: &CouplingEnsemble, seed: u64) -> Result<RateFit> {
    let last = *ens
        .times
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty distance grid".into()))?;
    let window: Vec<usize> = (0..ens.times.len()).filter(|&g| ens.times[g] >= 0.1 * last).collect();
    let times: Vec<f64> = window.iter().map(|&g| ens.times[g]).collect();
    let fit = |pick: &[usize]| -> Result<f64> {
        let stats = mean_and_sem(&ens.paths, pick, ens.times.len());
        let vals: Vec<f64> = window.iter().map(|&g| stats[g].0).collect();
        log_decay_rate(&times, &vals)
    };
    let all: Vec<usize> = (0..ens.paths.len()).collect();
    let rate = fit(&all).map_err(|e| match e {
        Error::Numerical(_) => Error::Numerical(
            "mean distance vanishes in the fit window; the copies have merged".into(),
        ),
        other => other,
    })?;
    let mut rng = Stream::new(seed, usize::MAX >> 32, 0);
    let mut boot = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let pick: Vec<usize> = (0..all.len()).map(|_| rng.index(all.len())).collect();
        // a resample whose mean hits zero has no finite rate
        if let Ok(r) = fit(&pick) {
            boot.push(r);
        }
    }
    boot.sort_by(f64::total_cmp);
    let q = |p: f64| boot[((p * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
    let (ci_low, ci_high) = if boot.is_empty() { (rate, rate) } else { (q(0.025), q(0.975)) };
    Ok(RateFit {
        rate,
        ci_low,
        ci_high,
        resamples: boot.len(),
    })
}
