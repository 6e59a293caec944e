//! Algebraic checks of the weight/drift hypotheses on a finite network.
//!
//! Each report carries a verdict for every neuron and an overall verdict taken
//! over [`NetworkSpec::assessed_range`], the indices on which a truncated
//! example still has all the edges of the infinite pattern.
//!
//! Neuron `i` is written `P_i` for the set of targets it excites (weights
//! `w_ij > 0`) and `N_i` for the set it inhibits (`v_ij = -W_ij > 0`).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{IntensitySpec, NetworkSpec};

/// The hypotheses that can be checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Condition {
    /// Bounded absolute in-weights.
    Dob,
    /// Unbounded absolute in-weights.
    Ndob,
    /// Inhibition dominates excitation.
    A,
    /// Drift dominates the Lipschitz-weighted excess.
    B,
    /// Bounded positive excess.
    C,
    /// Inhibition dominates excitation in every distance window.
    D,
    /// Drift dominates the excess.
    E,
    /// Summable Lipschitz constants and offsets.
    L,
    /// Contraction hypotheses of the coupling argument.
    W,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Dob => "DOB",
            Condition::Ndob => "NDOB",
            Condition::A => "A",
            Condition::B => "B",
            Condition::C => "C",
            Condition::D => "D",
            Condition::E => "E",
            Condition::L => "L",
            Condition::W => "W",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "DOB" => Condition::Dob,
            "NDOB" => Condition::Ndob,
            "A" => Condition::A,
            "B" => Condition::B,
            "C" => Condition::C,
            "D" => Condition::D,
            "E" => Condition::E,
            "L" => Condition::L,
            "W" => Condition::W,
            other => return Err(Error::InvalidArgument(format!("unknown condition {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Unsupported,
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition: Condition,
    pub verdict: Verdict,
    /// Verdict per neuron, 0-based.
    pub per_index: Vec<bool>,
    /// Neurons entering the overall verdict, 0-based half-open.
    pub assessed: Range<usize>,
    pub witnesses: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    fn new(condition: Condition, spec: &NetworkSpec) -> Self {
        ConditionReport {
            condition,
            verdict: Verdict::Fails,
            per_index: vec![true; spec.n()],
            assessed: spec.assessed_range(),
            witnesses: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn witness(&self, name: &str) -> Option<f64> {
        self.witnesses.get(name).copied()
    }

    fn set(&mut self, name: &str, value: f64) {
        self.witnesses.insert(name.to_string(), value);
    }

    fn settle(&mut self) {
        let ok = !self.assessed.is_empty() && self.per_index[self.assessed.clone()].iter().all(|&b| b);
        self.verdict = if ok { Verdict::Holds } else { Verdict::Fails };
        if self.assessed.is_empty() {
            self.notes.push("no neuron carries the full pattern at this size".into());
        } else if let Some(i) = self.assessed.clone().find(|&i| !self.per_index[i]) {
            self.notes.push(format!("first failing neuron: {}", i + 1));
        }
    }
}

/// `a >= b` up to the rounding of sums of magnitude `scale`.
fn geq(a: f64, b: f64, scale: f64) -> bool {
    a >= b - 1e-12 * scale
}

/// Supremum of absolute in-weights, and whether they grow with the size of
/// the network.
///
/// The growth flag looks at `S_k`, the largest in-sum of the network cut to
/// its first `k` neurons: strictly increasing over the last half of `k`
/// flags a non-Dobrushin candidate.
pub fn check_dobrushin(spec: &NetworkSpec) -> ConditionReport {
    let n = spec.n();
    let mut rep = ConditionReport::new(Condition::Dob, spec);
    rep.assessed = 0..n;
    let in_sums: Vec<f64> = (0..n)
        .map(|i| spec.weights().in_edges(i).iter().map(|&(_, w)| w.abs()).sum())
        .collect();
    let (arg, sup) = in_sums
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(ai, s), (i, &v)| if v > s { (i, v) } else { (ai, s) });

    let mut partial = vec![0.0; n];
    let mut prefix_sup = Vec::with_capacity(n);
    let mut running = 0.0f64;
    for m in 0..n {
        partial[m] = spec
            .weights()
            .in_edges(m)
            .iter()
            .filter(|&&(j, _)| j < m)
            .map(|&(_, w)| w.abs())
            .sum();
        for &(t, w) in spec.weights().out_edges(m) {
            if t < m {
                partial[t] += w.abs();
            }
        }
        // partial values only grow, so the running max needs the touched ones
        running = running.max(partial[m]);
        for &(t, _) in spec.weights().out_edges(m) {
            if t < m {
                running = running.max(partial[t]);
            }
        }
        prefix_sup.push(running);
    }
    let half = n / 2;
    let growing = n >= 4 && prefix_sup[half..].windows(2).all(|w| w[1] > w[0]);

    rep.set("sup_in_sum", sup);
    rep.set("argmax_neuron", (arg + 1) as f64);
    rep.set("ndob_candidate", if growing { 1.0 } else { 0.0 });
    rep.per_index = vec![!growing; n];
    rep.verdict = if growing { Verdict::Fails } else { Verdict::Holds };
    if growing {
        rep.notes.push("in-weight sums grow with the truncation size".into());
    }
    rep
}

/// Slope `c_i` with `phi_i <= c_i x`, when `phi_i` is linear.
fn linear_slope(intensity: &IntensitySpec, i: usize) -> Option<f64> {
    match intensity.lipschitz(i) {
        Some(l) if intensity.offset(i) == 0.0 && l > 0.0 => Some(l),
        _ => None,
    }
}

fn require_lipschitz(spec: &NetworkSpec, which: Condition) -> Result<Vec<f64>> {
    (0..spec.n())
        .map(|i| {
            spec.intensity().lipschitz(i).ok_or_else(|| {
                Error::Unsupported(format!(
                    "condition {which} needs a globally Lipschitz intensity"
                ))
            })
        })
        .collect()
}

/// `(sum_P w_ij L_j, sum_N v_ij L_j)` for neuron `i`.
fn weighted_out_sums(spec: &NetworkSpec, lip: &[f64], i: usize) -> (f64, f64) {
    spec.weights()
        .out_edges(i)
        .iter()
        .fold((0.0, 0.0), |(p, m), &(j, w)| {
            if w > 0.0 {
                (p + w * lip[j], m)
            } else {
                (p, m - w * lip[j])
            }
        })
}

/// Check one of (A)-(E) or (L).
pub fn check_condition(spec: &NetworkSpec, which: Condition) -> Result<ConditionReport> {
    let n = spec.n();
    let mut rep = ConditionReport::new(which, spec);
    let sums: Vec<(f64, f64)> = (0..n).map(|i| spec.out_sums_unchecked(i)).collect();
    match which {
        Condition::A => {
            let mut min_margin = f64::INFINITY;
            for (i, &(pos, neg)) in sums.iter().enumerate() {
                rep.per_index[i] = geq(neg, pos, pos + neg);
                if rep.assessed.contains(&i) {
                    min_margin = min_margin.min(neg - pos);
                }
            }
            rep.set("min_margin", min_margin);
        }
        Condition::B | Condition::E => {
            let lip = require_lipschitz(spec, which)?;
            let mut min_slack = f64::INFINITY;
            let mut max_excess = f64::NEG_INFINITY;
            for (i, &(pos, neg)) in sums.iter().enumerate() {
                let Some(c) = linear_slope(spec.intensity(), i) else {
                    rep.per_index[i] = false;
                    continue;
                };
                let a = spec.drift()[i];
                let (lhs, rhs) = if which == Condition::B {
                    let (wp, wn) = weighted_out_sums(spec, &lip, i);
                    (a * lip[i] / c, wp - wn)
                } else {
                    (a, c * (pos - neg))
                };
                rep.per_index[i] = neg < pos && geq(lhs, rhs, lhs.abs() + rhs.abs());
                if rep.assessed.contains(&i) {
                    min_slack = min_slack.min(lhs - rhs);
                    max_excess = max_excess.max(pos - neg);
                }
            }
            if (0..n).any(|i| linear_slope(spec.intensity(), i).is_none()) {
                rep.notes
                    .push("phi_i <= c_i x needs a linear intensity with zero offset".into());
            }
            rep.set("min_drift_slack", min_slack);
            rep.set("max_excess", max_excess);
        }
        Condition::C => {
            let mut b = f64::NEG_INFINITY;
            for (i, &(pos, neg)) in sums.iter().enumerate() {
                rep.per_index[i] = neg < pos;
                if rep.assessed.contains(&i) {
                    b = b.max(pos - neg);
                }
            }
            rep.set("B_const", b);
            if let Ok(lip) = require_lipschitz(spec, which) {
                let sup_weighted = rep
                    .assessed
                    .clone()
                    .map(|i| {
                        let (wp, wn) = weighted_out_sums(spec, &lip, i);
                        wp - wn
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                let phi0: f64 = (0..n).map(|i| spec.intensity().offset(i)).sum();
                rep.set("D_const", sup_weighted * phi0);
            } else {
                rep.notes.push("D_const needs a globally Lipschitz intensity".into());
            }
        }
        Condition::D => {
            let mut min_odd = f64::INFINITY;
            let mut min_even = f64::INFINITY;
            let mut first_bad_k: Option<(usize, usize)> = None;
            for i in 0..n {
                let mut by_dist: Vec<(usize, f64)> = spec
                    .weights()
                    .out_edges(i)
                    .iter()
                    .map(|&(j, w)| (j.abs_diff(i), w))
                    .collect();
                by_dist.sort_by_key(|&(d, _)| d);
                let (mut pos, mut neg) = (0.0, 0.0);
                let mut e = 0;
                for k in 1..n.max(2) {
                    while e < by_dist.len() && by_dist[e].0 <= k {
                        let w = by_dist[e].1;
                        if w > 0.0 {
                            pos += w;
                        } else {
                            neg -= w;
                        }
                        e += 1;
                    }
                    let ok = geq(neg, pos, pos + neg);
                    if !ok && rep.per_index[i] {
                        rep.per_index[i] = false;
                        if first_bad_k.is_none() && rep.assessed.contains(&i) {
                            first_bad_k = Some((i, k));
                        }
                    }
                    if rep.assessed.contains(&i) {
                        let m = neg - pos;
                        if k % 2 == 1 {
                            min_odd = min_odd.min(m);
                        } else {
                            min_even = min_even.min(m);
                        }
                    }
                }
            }
            rep.set("min_margin_odd_k", min_odd);
            if min_even.is_finite() {
                rep.set("min_margin_even_k", min_even);
            }
            if let Some((i, k)) = first_bad_k {
                rep.notes.push(format!("neuron {} fails at window k = {k}", i + 1));
            }
        }
        Condition::L => {
            let lip = require_lipschitz(spec, which)?;
            let phi0: Vec<f64> = (0..n).map(|i| spec.intensity().offset(i)).collect();
            let (lc, lr) = tail_ratio(&lip);
            let (pc, pr) = tail_ratio(&phi0);
            rep.set("lip_sum", lip.iter().sum());
            rep.set("phi0_sum", phi0.iter().sum());
            rep.set("lip_tail_ratio", lr);
            rep.set("phi0_tail_ratio", pr);
            rep.per_index = vec![lc && pc; n];
            rep.assessed = 0..n;
            rep.notes
                .push("series convergence is judged by a ratio test on the last quarter".into());
        }
        Condition::Dob | Condition::Ndob | Condition::W => {
            return Err(Error::InvalidArgument(format!(
                "condition {which} has its own check function"
            )))
        }
    }
    rep.settle();
    Ok(rep)
}

/// `sum v_ij - sum w_ij` over targets `j` with `|j - i| <= k`.
pub fn window_margin(spec: &NetworkSpec, i: usize, k: usize) -> Result<f64> {
    crate::error::check_index(i, spec.n())?;
    Ok(-spec
        .weights()
        .out_edges(i)
        .iter()
        .filter(|&&(j, _)| j.abs_diff(i) <= k)
        .map(|&(_, w)| w)
        .sum::<f64>())
}

/// Geometric-mean ratio of the last quarter of a nonnegative series and
/// whether it signals convergence.
fn tail_ratio(terms: &[f64]) -> (bool, f64) {
    let n = terms.len();
    let tail = &terms[(3 * n / 4).min(n.saturating_sub(2))..];
    if tail.iter().all(|&t| t == 0.0) {
        return (true, 0.0);
    }
    let first = tail[0].abs();
    let last = tail[tail.len() - 1].abs();
    if first == 0.0 {
        return (false, f64::INFINITY);
    }
    let ratio = (last / first).powf(1.0 / (tail.len() - 1).max(1) as f64);
    (ratio < 1.0 - 1e-9, ratio)
}

/// Contraction hypotheses for the coupled dynamics, with the rate
/// `d = k1 (O1 + 2^s O2)`.
///
/// `s` is the longest backward reach of a nonzero weight. `O1` bounds the
/// drift against forward out-weights and `O2` the drift, discounted by
/// `2^s`, against backward out-weights. Only linear intensities `p_i x`
/// are decidable here; `k1 = 1` for them and the remaining hypotheses
/// reduce to `p_i <= 1`.
pub fn check_wasserstein(spec: &NetworkSpec) -> ConditionReport {
    let n = spec.n();
    let mut rep = ConditionReport::new(Condition::W, spec);
    let slopes = match spec.intensity() {
        IntensitySpec::Affine { slope, offset } if offset.iter().all(|&z| z == 0.0) => {
            slope.clone()
        }
        _ => {
            rep.verdict = Verdict::Unsupported;
            rep.per_index = vec![false; n];
            rep.notes
                .push("only linear intensities p_i x have decidable contraction hypotheses".into());
            return rep;
        }
    };
    let s = spec
        .weights()
        .triplets()
        .filter(|&(i, j, _)| j < i)
        .map(|(i, j, _)| i - j)
        .max()
        .unwrap_or(0);
    let scale = 2f64.powi(s as i32);
    let (mut o1, mut o2) = (f64::INFINITY, f64::INFINITY);
    for i in 0..n {
        let (mut fwd, mut bwd) = (0.0, 0.0);
        for &(j, w) in spec.weights().out_edges(i) {
            if j > i {
                fwd += w.abs();
            } else {
                bwd += w.abs();
            }
        }
        let a = spec.drift()[i];
        let m1 = a - fwd;
        let m2 = a / scale - bwd;
        rep.per_index[i] = m1 > 0.0 && m2 > 0.0 && slopes[i] <= 1.0;
        if rep.assessed.contains(&i) {
            o1 = o1.min(m1);
            o2 = o2.min(m2);
        }
    }
    let k1 = 1.0;
    let d = k1 * (o1 + scale * o2);
    rep.set("s", s as f64);
    rep.set("O1", o1);
    rep.set("O2", o2);
    rep.set("k1", k1);
    rep.set("d", d);
    rep.set("max_slope", slopes.iter().copied().fold(0.0, f64::max));
    rep.settle();
    if o1 <= 0.0 {
        rep.notes.push(format!("O1 = {o1} is not positive"));
    }
    if o2 <= 0.0 {
        rep.notes.push(format!("O2 = {o2} is not positive"));
    }
    rep
}
