//! Network descriptions, the built-in example families and the
//! deterministic parts of the dynamics: exponential drift between spikes and
//! the spike jump map.
//!
//! Neurons are indexed from 0 in the Rust API. Neuron `k` of the
//! mathematical model (which counts from 1) lives at index `k - 1`; JSON and
//! CSV files use the 1-based numbering.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

/// Spiking intensity as a function of membrane potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntensitySpec {
    /// `phi_i(x) = slope_i * x + offset_i`.
    Affine { slope: Vec<f64>, offset: Vec<f64> },
    /// `phi_i(x) = x^rho + offset_i`.
    Power { rho: f64, offset: Vec<f64> },
}

impl IntensitySpec {
    /// Affine family with a common slope and offset.
    pub fn affine_uniform(n: usize, slope: f64, offset: f64) -> Self {
        IntensitySpec::Affine {
            slope: vec![slope; n],
            offset: vec![offset; n],
        }
    }

    #[inline]
    pub fn phi(&self, i: usize, x: f64) -> f64 {
        match self {
            IntensitySpec::Affine { slope, offset } => slope[i] * x + offset[i],
            IntensitySpec::Power { rho, offset } => x.powf(*rho) + offset[i],
        }
    }

    /// Value at zero potential, `phi_i(0)`.
    pub fn offset(&self, i: usize) -> f64 {
        match self {
            IntensitySpec::Affine { offset, .. } | IntensitySpec::Power { offset, .. } => {
                offset[i]
            }
        }
    }

    /// Global Lipschitz constant; `None` for the power family, which has none
    /// unless `rho == 1`.
    pub fn lipschitz(&self, i: usize) -> Option<f64> {
        match self {
            IntensitySpec::Affine { slope, .. } => Some(slope[i]),
            IntensitySpec::Power { rho, .. } if *rho == 1.0 => Some(1.0),
            IntensitySpec::Power { .. } => None,
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, IntensitySpec::Affine { .. })
    }

    fn len_check(&self, n: usize) -> Result<()> {
        let (a, b) = match self {
            IntensitySpec::Affine { slope, offset } => (slope.len(), offset.len()),
            IntensitySpec::Power { offset, .. } => (n, offset.len()),
        };
        if a != n || b != n {
            return Err(Error::InvalidSpec(format!(
                "intensity parameters must have one entry per neuron (n = {n})"
            )));
        }
        match self {
            IntensitySpec::Affine { slope, offset } => {
                for (i, (&p, &z)) in slope.iter().zip(offset).enumerate() {
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(Error::InvalidSpec(format!(
                            "slope of neuron {} must be finite and >= 0, got {p}",
                            i + 1
                        )));
                    }
                    if !(z.is_finite() && z >= 0.0) {
                        return Err(Error::InvalidSpec(format!(
                            "offset of neuron {} must be finite and >= 0, got {z}",
                            i + 1
                        )));
                    }
                }
            }
            IntensitySpec::Power { rho, offset } => {
                if !(rho.is_finite() && *rho > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "power exponent must be > 0, got {rho}"
                    )));
                }
                if let Some((i, z)) = offset
                    .iter()
                    .enumerate()
                    .find(|(_, z)| !(z.is_finite() && **z >= 0.0))
                {
                    return Err(Error::InvalidSpec(format!(
                        "offset of neuron {} must be finite and >= 0, got {z}",
                        i + 1
                    )));
                }
            }
        }
        Ok(())
    }
}

/// How a spike of neuron `i` changes the potential of a target `j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InteractionRule {
    /// `x -> max(x + w, 0)`.
    ClipAdd,
    /// `x -> (x^rho + w^rho)^(1/rho)`, nonnegative weights only.
    PowerCombine { rho: f64 },
}

impl InteractionRule {
    #[inline]
    pub fn combine(&self, x: f64, w: f64) -> f64 {
        match *self {
            InteractionRule::ClipAdd => (x + w).max(0.0),
            InteractionRule::PowerCombine { rho } => {
                if rho == 1.0 {
                    x + w
                } else {
                    (x.powf(rho) + w.powf(rho)).powf(rho.recip())
                }
            }
        }
    }
}

/// The built-in weight patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExampleKind {
    /// Nearest inhibitory and next-nearest excitatory forward weights of size `i`.
    A1,
    /// Inhibition `-i` on `i+1`, unit excitation on `i+2..=2i`.
    A2,
    /// Like `A1` with excitation `i+1` and drift `(i+1) p_{i+2} + i p_{i+1}`.
    B3,
    /// Backward excitation `i+1`, forward inhibition `i`.
    C4,
    /// All-to-all, sign alternating with distance.
    D5,
    /// Feed-forward chain with large inhibitory weights `-i` (no drift).
    #[serde(rename = "RMF_NEG")]
    RmfNeg,
    /// All-to-all feed-forward excitation of size `eps`.
    #[serde(rename = "RMF_POS")]
    RmfPos,
}

impl ExampleKind {
    pub const ALL: [ExampleKind; 7] = [
        ExampleKind::A1,
        ExampleKind::A2,
        ExampleKind::B3,
        ExampleKind::C4,
        ExampleKind::D5,
        ExampleKind::RmfNeg,
        ExampleKind::RmfPos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExampleKind::A1 => "A1",
            ExampleKind::A2 => "A2",
            ExampleKind::B3 => "B3",
            ExampleKind::C4 => "C4",
            ExampleKind::D5 => "D5",
            ExampleKind::RmfNeg => "RMF_NEG",
            ExampleKind::RmfPos => "RMF_POS",
        }
    }

    fn is_rmf(self) -> bool {
        matches!(self, ExampleKind::RmfNeg | ExampleKind::RmfPos)
    }
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExampleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExampleKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown example kind `{s}`")))
    }
}

/// Provenance of a spec built by [`build_example`]; lets the condition checks
/// know where truncation distorts the pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleTag {
    pub kind: ExampleKind,
    pub params: BTreeMap<String, f64>,
}

/// Sparse synaptic weights, `w(i, j)` being what neuron `i` sends to `j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Weights {
    out: Vec<Vec<(usize, f64)>>,
    inn: Vec<Vec<(usize, f64)>>,
}

impl Weights {
    /// Builds from `(from, to, weight)` triplets; zero weights are dropped.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut out = vec![Vec::new(); n];
        let mut inn = vec![Vec::new(); n];
        for &(i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(Error::InvalidSpec(format!(
                    "weight ({}, {}) references a neuron outside 1..={n}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::InvalidSpec(format!(
                    "self weight on neuron {} is not allowed",
                    i + 1
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "weight ({}, {}) is not finite",
                    i + 1,
                    j + 1
                )));
            }
            if w == 0.0 {
                continue;
            }
            out[i].push((j, w));
            inn[j].push((i, w));
        }
        for (i, row) in out.iter_mut().enumerate() {
            row.sort_by_key(|&(j, _)| j);
            if let Some(pair) = row.windows(2).find(|p| p[0].0 == p[1].0) {
                return Err(Error::InvalidSpec(format!(
                    "duplicate weight ({}, {})",
                    i + 1,
                    pair[0].0 + 1
                )));
            }
        }
        for col in &mut inn {
            col.sort_by_key(|&(i, _)| i);
        }
        Ok(Weights { out, inn })
    }

    /// Out-edges `(target, weight)` of neuron `i`, sorted by target.
    pub fn out_edges(&self, i: usize) -> &[(usize, f64)] {
        &self.out[i]
    }

    /// In-edges `(source, weight)` of neuron `j`, sorted by source.
    pub fn in_edges(&self, j: usize) -> &[(usize, f64)] {
        &self.inn[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.out[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map(|p| self.out[i][p].1)
            .unwrap_or(0.0)
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, w)| (i, j, w)))
    }

    pub fn len(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn scaled(&self, factor: f64) -> Weights {
        let f = |v: &Vec<Vec<(usize, f64)>>| {
            v.iter()
                .map(|row| row.iter().map(|&(k, w)| (k, w * factor)).collect())
                .collect()
        };
        Weights {
            out: f(&self.out),
            inn: f(&self.inn),
        }
    }
}

/// Static description of a truncated network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    n: usize,
    weights: Weights,
    drift: Vec<f64>,
    reset: Vec<f64>,
    intensity: IntensitySpec,
    interaction: InteractionRule,
    lower_triangular_inputs: bool,
    example: Option<ExampleTag>,
}

impl NetworkSpec {
    pub fn new(
        n: usize,
        weights: Weights,
        drift: Vec<f64>,
        reset: Vec<f64>,
        intensity: IntensitySpec,
        interaction: InteractionRule,
        lower_triangular_inputs: bool,
    ) -> Result<Self> {
        let spec = NetworkSpec {
            n,
            weights,
            drift,
            reset,
            intensity,
            interaction,
            lower_triangular_inputs,
            example: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub(crate) fn with_example(mut self, tag: ExampleTag) -> Self {
        self.example = Some(tag);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Err(Error::InvalidSpec("network needs at least one neuron".into()));
        }
        if self.weights.out.len() != n {
            return Err(Error::InvalidSpec(format!(
                "weight matrix has {} rows, expected {n}",
                self.weights.out.len()
            )));
        }
        if self.drift.len() != n || self.reset.len() != n {
            return Err(Error::InvalidSpec(format!(
                "drift and reset need {n} entries each"
            )));
        }
        for (i, &a) in self.drift.iter().enumerate() {
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "drift of neuron {} must be finite and >= 0, got {a}",
                    i + 1
                )));
            }
        }
        for (i, &r) in self.reset.iter().enumerate() {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "reset of neuron {} must be finite and >= 0, got {r}",
                    i + 1
                )));
            }
        }
        self.intensity.len_check(n)?;
        if let InteractionRule::PowerCombine { rho } = self.interaction {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "power-combine exponent must be > 0, got {rho}"
                )));
            }
            if let IntensitySpec::Power { rho: r2, .. } = self.intensity {
                if r2 != rho {
                    return Err(Error::InvalidSpec(format!(
                        "power intensity exponent {r2} differs from power-combine exponent {rho}"
                    )));
                }
            }
            self.check_nonnegative_weights()?;
        }
        if self.lower_triangular_inputs {
            if let Some((i, j, _)) = self.weights.triplets().find(|&(i, j, _)| i >= j) {
                return Err(Error::InvalidSpec(format!(
                    "lower-triangular inputs require sources below targets, found weight ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(())
    }

    fn check_nonnegative_weights(&self) -> Result<()> {
        match self.weights.triplets().find(|&(_, _, w)| w < 0.0) {
            Some((i, j, w)) => Err(Error::InvalidSpec(format!(
                "power-combine interaction forbids negative weights, found ({}, {}) = {w}",
                i + 1,
                j + 1
            ))),
            None => Ok(()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn drift(&self) -> &[f64] {
        &self.drift
    }

    pub fn reset(&self) -> &[f64] {
        &self.reset
    }

    pub fn intensity(&self) -> &IntensitySpec {
        &self.intensity
    }

    pub fn interaction(&self) -> InteractionRule {
        self.interaction
    }

    pub fn lower_triangular_inputs(&self) -> bool {
        self.lower_triangular_inputs
    }

    pub fn example(&self) -> Option<&ExampleTag> {
        self.example.as_ref()
    }

    #[inline]
    pub fn phi(&self, i: usize, x: f64) -> f64 {
        self.intensity.phi(i, x)
    }

    /// `sum_j |w(j, i)|`, the total absolute weight neuron `i` receives.
    pub fn in_weight_abs_sum(&self, i: usize) -> Result<f64> {
        check_index(i, self.n)?;
        Ok(self.weights.in_edges(i).iter().map(|&(_, w)| w.abs()).sum())
    }

    /// `(sum of positive, sum of |negative|)` weights sent by neuron `i`.
    pub fn out_sums(&self, i: usize) -> Result<(f64, f64)> {
        check_index(i, self.n)?;
        Ok(self.out_sums_unchecked(i))
    }

    pub(crate) fn out_sums_unchecked(&self, i: usize) -> (f64, f64) {
        self.weights
            .out_edges(i)
            .iter()
            .fold((0.0, 0.0), |(p, m), &(_, w)| {
                if w > 0.0 {
                    (p + w, m)
                } else {
                    (p, m - w)
                }
            })
    }

    /// State right after neuron `i` spikes: `i` goes to its reset value and
    /// every target is updated by the interaction rule.
    pub fn apply_spike(&self, state: &NetworkState, i: usize) -> Result<NetworkState> {
        check_index(i, self.n)?;
        self.check_state(state)?;
        if matches!(self.interaction, InteractionRule::PowerCombine { .. }) {
            self.check_nonnegative_weights()?;
        }
        let mut x = state.x.clone();
        x[i] = self.reset[i];
        for &(j, w) in self.weights.out_edges(i) {
            x[j] = self.interaction.combine(x[j], w);
        }
        Ok(NetworkState { x, t: state.t })
    }

    /// Deterministic flow `x_i -> x_i exp(-a_i dt)`.
    pub fn drift_flow(&self, state: &NetworkState, dt: f64) -> Result<NetworkState> {
        if !(dt >= 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "drift time step must be finite and >= 0, got {dt}"
            )));
        }
        self.check_state(state)?;
        let x = state
            .x
            .iter()
            .zip(&self.drift)
            .map(|(&x, &a)| if a == 0.0 { x } else { x * (-a * dt).exp() })
            .collect();
        Ok(NetworkState { x, t: state.t + dt })
    }

    pub(crate) fn check_state(&self, state: &NetworkState) -> Result<()> {
        if state.x.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "state has {} coordinates, network has {}",
                state.x.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Same network with every weight and drift multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<NetworkSpec> {
        NetworkSpec::new(
            self.n,
            self.weights.scaled(factor),
            self.drift.iter().map(|a| a * factor).collect(),
            self.reset.clone(),
            self.intensity.clone(),
            self.interaction,
            self.lower_triangular_inputs,
        )
    }

    /// Indices on which the truncated pattern of a built-in example coincides
    /// with the infinite one (all of them for hand-written specs).
    pub fn assessed_range(&self) -> std::ops::Range<usize> {
        let n = self.n;
        match self.example.as_ref().map(|t| t.kind) {
            None | Some(ExampleKind::D5) | Some(ExampleKind::RmfNeg) | Some(ExampleKind::RmfPos) => {
                0..n
            }
            Some(ExampleKind::A1) | Some(ExampleKind::B3) => 0..n.saturating_sub(2),
            // neuron k sends to k+1..=2k, fully present while 2k <= n
            Some(ExampleKind::A2) => 0..n / 2,
            // the first neuron has no backward neighbour; the last loses its
            // forward inhibition
            Some(ExampleKind::C4) => 1..n.saturating_sub(1),
        }
    }
}

/// Membrane potentials of all neurons at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkState {
    pub x: Vec<f64>,
    pub t: f64,
}

impl NetworkState {
    pub fn new(x: Vec<f64>, t: f64) -> Result<Self> {
        if let Some((i, v)) = x
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "potential of neuron {} must be finite and >= 0, got {v}",
                i + 1
            )));
        }
        if !t.is_finite() {
            return Err(Error::InvalidArgument("state time must be finite".into()));
        }
        Ok(NetworkState { x, t })
    }

    pub fn zeros(n: usize) -> Self {
        NetworkState { x: vec![0.0; n], t: 0.0 }
    }
}

const PARAM_KEYS: [&str; 6] = ["p", "p_ratio", "a", "r", "z", "eps"];

/// Builds one of the built-in example networks truncated to `n` neurons.
///
/// Recognised parameters: `p` (slope, default 1), `p_ratio` (geometric decay
/// of slopes, default 1), `a` (drift, default 0; not accepted by `B3`, whose
/// drift is derived), `r` (reset, default 0, or 1 for the replica examples),
/// `z` (intensity offset, default 0) and `eps` (`RMF_POS` weight, default 0.1).
pub fn build_example(
    kind: ExampleKind,
    n: usize,
    params: &BTreeMap<String, f64>,
) -> Result<NetworkSpec> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "example {kind} needs n >= 3 to realize its pattern (i + 2 <= n), got {n}"
        )));
    }
    if let Some(k) = params.keys().find(|k| !PARAM_KEYS.contains(&k.as_str())) {
        return Err(Error::InvalidArgument(format!("unknown example parameter `{k}`")));
    }
    if kind == ExampleKind::B3 && params.contains_key("a") {
        return Err(Error::InvalidArgument(
            "example B3 derives its drift from the slopes; `a` is not accepted".into(),
        ));
    }
    let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
    let p0 = get("p", 1.0);
    let ratio = get("p_ratio", 1.0);
    let a = get("a", 0.0);
    let r = get("r", if kind.is_rmf() { 1.0 } else { 0.0 });
    let z = get("z", 0.0);
    let eps = get("eps", 0.1);
    // slope of mathematical neuron k (1-based), defined past the truncation
    let slope_of = |k: usize| p0 * ratio.powi(k as i32 - 1);

    let mut t = Vec::new();
    // push with 1-based indices, skipping anything outside the window
    let mut push = |i: usize, j: usize, w: f64| {
        if i >= 1 && j >= 1 && i <= n && j <= n {
            t.push((i - 1, j - 1, w));
        }
    };
    let mut drift = vec![a; n];
    match kind {
        ExampleKind::A1 => {
            for i in 1..=n {
                push(i, i + 1, -(i as f64));
                push(i, i + 2, i as f64);
            }
        }
        ExampleKind::A2 => {
            for i in 1..=n {
                push(i, i + 1, -(i as f64));
                for j in i + 2..=2 * i {
                    push(i, j, 1.0);
                }
            }
        }
        ExampleKind::B3 => {
            for i in 1..=n {
                push(i, i + 1, -(i as f64));
                push(i, i + 2, i as f64 + 1.0);
                drift[i - 1] = (i as f64 + 1.0) * slope_of(i + 2) + i as f64 * slope_of(i + 1);
            }
        }
        ExampleKind::C4 => {
            for i in 1..=n {
                if i >= 2 {
                    push(i, i - 1, i as f64 + 1.0);
                }
                push(i, i + 1, -(i as f64));
            }
        }
        ExampleKind::D5 => {
            for i in 1..=n {
                for j in 1..=n {
                    let d = i.abs_diff(j);
                    let w = match d {
                        0 => continue,
                        1 => -2.0,
                        d if d % 2 == 1 => -1.0,
                        _ => 1.0,
                    };
                    push(i, j, w);
                }
            }
        }
        ExampleKind::RmfNeg => {
            for i in 1..n {
                push(i, i + 1, -(i as f64));
            }
        }
        ExampleKind::RmfPos => {
            for i in 1..=n {
                for j in i + 1..=n {
                    push(i, j, eps);
                }
            }
        }
    }
    let slope = (1..=n).map(slope_of).collect();
    let spec = NetworkSpec::new(
        n,
        Weights::from_triplets(n, &t)?,
        drift,
        vec![r; n],
        IntensitySpec::Affine {
            slope,
            offset: vec![z; n],
        },
        InteractionRule::ClipAdd,
        kind.is_rmf(),
    )?;
    Ok(spec.with_example(ExampleTag {
        kind,
        params: params.clone(),
    }))
}
