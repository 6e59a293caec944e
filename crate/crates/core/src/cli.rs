//! The `glrmf` command line.
//!
//! Every command writes its data under `--out` (default `out/`) and its
//! messages to stderr. Exit codes: 0 success, 2 bad input, 3 numerical
//! failure (with `error.json` in the output directory).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::conditions::{check_condition, check_dobrushin, check_wasserstein, Condition, ConditionReport, Verdict};
use crate::coupling::{contraction_rate_fit, simulate_coupled_ensemble};
use crate::dynamics::{expected_spike_bound, lyapunov_series, regime, simulate, spike_count};
use crate::error::{Error, Result};
use crate::io::{csv, load_spec, spec_digest, spec_from_json, write_file};
use crate::network::{NetworkSpec, NetworkState};
use crate::replica::{estimate_beta, simulate_replica, BetaMethod};
use crate::solver::{solve_beta, RateStatus};

#[derive(Debug, Parser)]
#[command(name = "glrmf", version, about = "Interacting neuron networks: conditions, simulation, coupling and mean-field rates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate every stability condition on the network.
    Check(Common),
    /// Simulate one path.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T", default_value_t = 10.0)]
        horizon: f64,
        /// Snapshot spacing (default T/100).
        #[arg(long)]
        grid: Option<f64>,
        /// Initial potentials: one number or a comma-separated list (default 1).
        #[arg(long)]
        x0: Option<String>,
    },
    /// Simulate coupled pairs and fit their contraction rate.
    Couple {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long)]
        grid: Option<f64>,
        #[arg(long, default_value_t = 200)]
        paths: u64,
        /// Initial potentials of the first copy (default 1).
        #[arg(long)]
        x0: Option<String>,
        /// Initial potentials of the second copy (default 0).
        #[arg(long)]
        y0: Option<String>,
    },
    /// Estimate rates from a finite replica system.
    Replica {
        #[command(flatten)]
        common: Common,
        #[arg(long = "T", default_value_t = 200.0)]
        horizon: f64,
        #[arg(long = "M", default_value_t = 64)]
        replicas: usize,
        /// Discarded initial time (default T/2).
        #[arg(long = "burn-in")]
        burn_in: Option<f64>,
        #[arg(long, default_value = "spike_rate")]
        method: String,
    },
    /// Solve the mean-field rate equations.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// `example:KIND`, a JSON file, or inline JSON.
    #[arg(long)]
    spec: String,
    /// Size of a built-in example (default 20).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Example parameters as `key=value`, repeatable.
    #[arg(long = "params", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl Common {
    fn spec(&self) -> Result<NetworkSpec> {
        let mut params = BTreeMap::new();
        for p in &self.params {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--params expects key=value, got {p:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("--params {k}: {v:?} is not a number")))?;
            params.insert(k.trim().to_string(), v);
        }
        if self.spec.trim_start().starts_with('{') {
            if !params.is_empty() {
                return Err(Error::InvalidArgument(
                    "example parameters only apply to example:KIND specs".into(),
                ));
            }
            let spec = spec_from_json(&self.spec)?;
            if self.n.is_some_and(|n| n != spec.n()) {
                return Err(Error::InvalidArgument("--n contradicts the inline spec".into()));
            }
            return Ok(spec);
        }
        load_spec(&self.spec, self.n, &params)
    }
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let out = match &cli.command {
        Command::Check(c) => c.out.clone(),
        Command::Simulate { common, .. }
        | Command::Couple { common, .. }
        | Command::Replica { common, .. }
        | Command::Solve { common, .. } => common.out.clone(),
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                let doc = json!({ "error": e.kind(), "message": e.to_string() });
                let text = serde_json::to_string_pretty(&doc).expect("json value") + "\n";
                if let Err(w) = write_file(&out.join("error.json"), &text) {
                    eprintln!("error: could not write error.json: {w}");
                }
                3
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Check(c) => check(&c),
        Command::Simulate { common, horizon, grid, x0 } => simulate_cmd(&common, horizon, grid, x0.as_deref()),
        Command::Couple { common, horizon, grid, paths, x0, y0 } => {
            couple_cmd(&common, horizon, grid, paths, x0.as_deref(), y0.as_deref())
        }
        Command::Replica { common, horizon, replicas, burn_in, method } => {
            replica_cmd(&common, horizon, replicas, burn_in, &method)
        }
        Command::Solve { common, tol } => solve_cmd(&common, tol),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports always serialize") + "\n";
    write_file(path, &text)
}

fn grid_points(step: Option<f64>, horizon: f64, default_count: usize) -> Result<Vec<f64>> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("--T must be finite and > 0, got {horizon}")));
    }
    let step = step.unwrap_or(horizon / default_count as f64);
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("--grid must be > 0, got {step}")));
    }
    let count = (horizon / step + 1e-9).floor() as usize;
    if count > 1_000_000 {
        return Err(Error::InvalidArgument("--grid gives more than 10^6 snapshots".into()));
    }
    Ok((0..=count).map(|k| (k as f64 * step).min(horizon)).collect())
}

fn parse_state(arg: Option<&str>, n: usize, default: f64, flag: &str) -> Result<NetworkState> {
    let x = match arg {
        None => vec![default; n],
        Some(s) => {
            let vals = s
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| Error::InvalidArgument(format!("{flag} expects numbers, got {s:?}")))?;
            match vals.len() {
                1 => vec![vals[0]; n],
                len if len == n => vals,
                len => {
                    return Err(Error::InvalidArgument(format!("{flag} has {len} values for {n} neurons")))
                }
            }
        }
    };
    NetworkState::new(x, 0.0)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Fails => "fails",
        Verdict::Unsupported => "unsupported",
    }
}

fn check(c: &Common) -> Result<()> {
    let spec = c.spec()?;
    let mut reports: Vec<ConditionReport> = vec![check_dobrushin(&spec)];
    let mut skipped = BTreeMap::new();
    for which in [Condition::A, Condition::B, Condition::C, Condition::D, Condition::E, Condition::L] {
        match check_condition(&spec, which) {
            Ok(r) => reports.push(r),
            Err(e @ Error::Unsupported(_)) => {
                skipped.insert(which.to_string(), e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    reports.push(check_wasserstein(&spec));
    let rows = reports.iter().map(|r| {
        let w: Vec<String> = r.witnesses.iter().map(|(k, v)| format!("{k}={v}")).collect();
        vec![r.condition.to_string(), verdict_name(r.verdict).to_string(), w.join(";")]
    });
    let mut table = csv(&["condition", "verdict", "witnesses"], rows);
    for (name, why) in &skipped {
        table.push_str(&format!("{name},unsupported,\"{}\"\n", why.replace('"', "'")));
    }
    eprint!("{table}");
    write_file(&c.out.join("conditions.csv"), &table)?;
    write_json(
        &c.out.join("report.json"),
        &json!({ "spec_digest": spec_digest(&spec), "n": spec.n(), "reports": reports, "unsupported": skipped }),
    )
}

fn simulate_cmd(c: &Common, horizon: f64, grid: Option<f64>, x0: Option<&str>) -> Result<()> {
    let spec = c.spec()?;
    let grid = grid_points(grid, horizon, 100)?;
    let x0 = parse_state(x0, spec.n(), 1.0, "--x0")?;
    let traj = simulate(&spec, &x0, horizon, c.seed, &grid)?;
    let events = csv(
        &["time", "neuron"],
        traj.events.iter().map(|&(t, i)| vec![t.to_string(), (i + 1).to_string()]),
    );
    let mut header = vec!["time".to_string()];
    header.extend((1..=spec.n()).map(|i| format!("x{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let snaps = csv(
        &header,
        traj.snapshots.iter().map(|s| std::iter::once(s.t.to_string()).chain(s.x.iter().map(|v| v.to_string()))),
    );
    write_file(&c.out.join("events.csv"), &events)?;
    write_file(&c.out.join("snapshots.csv"), &snaps)?;
    let spikes = spike_count(&traj, None, 0.0, horizon)?;
    let mut report = json!({
        "spec_digest": traj.spec_digest, "seed": c.seed, "horizon": horizon, "spikes": spikes,
    });
    // the bounds need Lipschitz intensities; skip them otherwise
    if let (Ok(reg), Ok(lyap), Ok(bound)) = (
        regime(&spec),
        lyapunov_series(&traj, &spec),
        expected_spike_bound(&spec, &x0, 0.0, horizon),
    ) {
        report["regime"] = json!(reg);
        report["expected_spike_bound"] = json!(bound);
        report["lyapunov"] = json!(lyap);
    }
    write_json(&c.out.join("report.json"), &report)?;
    eprintln!("{spikes} spikes on (0, {horizon}]");
    Ok(())
}

fn couple_cmd(
    c: &Common,
    horizon: f64,
    grid: Option<f64>,
    paths: u64,
    x0: Option<&str>,
    y0: Option<&str>,
) -> Result<()> {
    let spec = c.spec()?;
    if paths < 2 {
        return Err(Error::InvalidArgument(format!("--paths must be >= 2, got {paths}")));
    }
    let grid = grid_points(grid, horizon, 50)?;
    let x0 = parse_state(x0, spec.n(), 1.0, "--x0")?;
    let y0 = parse_state(y0, spec.n(), 0.0, "--y0")?;
    let seeds = c.seed..c.seed.checked_add(paths).ok_or_else(|| Error::InvalidArgument("seed range overflows".into()))?;
    let ens = simulate_coupled_ensemble(&spec, &x0, &y0, horizon, seeds, &grid)?;
    let mean = ens.mean_distance();
    let table = csv(
        &["time", "mean_distance", "stderr"],
        ens.times.iter().zip(&mean).map(|(t, (m, s))| vec![t.to_string(), m.to_string(), s.to_string()]),
    );
    write_file(&c.out.join("distance.csv"), &table)?;
    let wass = check_wasserstein(&spec);
    let fit = match contraction_rate_fit(&ens, c.seed) {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    };
    write_json(
        &c.out.join("report.json"),
        &json!({
            "spec_digest": spec_digest(&spec), "seed": c.seed, "paths": paths, "horizon": horizon,
            "d": wass.witness("d"), "condition_w": verdict_name(wass.verdict), "rate_fit": fit,
        }),
    )?;
    if let Some((m, s)) = mean.last() {
        eprintln!("mean distance at T: {m} (stderr {s})");
    }
    Ok(())
}

fn replica_cmd(c: &Common, horizon: f64, replicas: usize, burn_in: Option<f64>, method: &str) -> Result<()> {
    let method: BetaMethod = method.parse()?;
    let spec = c.spec()?;
    let rt = simulate_replica(&spec, replicas, horizon, c.seed, None)?;
    let est = estimate_beta(&rt, &spec, burn_in, method)?;
    let table = csv(
        &["neuron", "beta", "stderr", "method", "M", "T", "burn_in"],
        est.beta.iter().zip(&est.stderr).enumerate().map(|(i, (b, s))| {
            vec![
                (i + 1).to_string(),
                b.to_string(),
                s.to_string(),
                est.method.to_string(),
                replicas.to_string(),
                horizon.to_string(),
                est.burn_in.to_string(),
            ]
        }),
    );
    write_file(&c.out.join("beta.csv"), &table)?;
    write_json(
        &c.out.join("report.json"),
        &json!({ "spec_digest": rt.spec_digest, "seed": c.seed, "events": rt.events.len(), "estimate": est }),
    )?;
    let low = est.low_count.iter().filter(|&&b| b).count();
    if low > 0 {
        eprintln!("warning: {low} neurons spiked fewer than 10 times after burn-in");
    }
    eprintln!("{} replica events", rt.events.len());
    Ok(())
}

fn solve_cmd(c: &Common, tol: f64) -> Result<()> {
    let spec = c.spec()?;
    let p = solve_beta(&spec, tol)?;
    let table = csv(
        &["neuron", "beta", "status", "condition_value", "quad_error"],
        (0..spec.n()).map(|i| {
            vec![
                (i + 1).to_string(),
                p.beta[i].to_string(),
                p.status[i].to_string(),
                p.condition_values[i].to_string(),
                p.quad_error[i].to_string(),
            ]
        }),
    );
    write_file(&c.out.join("rates.csv"), &table)?;
    write_json(&c.out.join("report.json"), &json!({ "spec_digest": spec_digest(&spec), "tol": tol, "profile": p }))?;
    let failed: Vec<String> = p
        .status
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == RateStatus::QuadratureFailed)
        .map(|(i, _)| (i + 1).to_string())
        .collect();
    if !failed.is_empty() {
        return Err(Error::Numerical(format!(
            "quadrature budget exhausted for neurons {}",
            failed.join(", ")
        )));
    }
    Ok(())
}
