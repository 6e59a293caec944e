use glrmf::network::{IntensitySpec, InteractionRule, NetworkSpec, Weights};
use glrmf::replica::{estimate_beta_ensemble, BetaMethod};
use glrmf::solver::solve_beta;

fn compare(spec: &NetworkSpec, replicas: usize, horizon: f64) {
    let beta = solve_beta(spec, 1e-10).unwrap().beta;
    let runs = estimate_beta_ensemble(spec, replicas, horizon, 0..8, None, BetaMethod::IntensityMean).unwrap();
    for i in 0..spec.n() {
        let est: Vec<f64> = runs.iter().map(|r| r.beta[i]).collect();
        let m = est.iter().sum::<f64>() / est.len() as f64;
        let sd = (est.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (est.len() - 1) as f64).sqrt();
        let sem = sd / (est.len() as f64).sqrt();
        // finite-M bias plus sampling noise
        let slack = 0.03 * beta[i] + 4.0 * sem;
        assert!((m - beta[i]).abs() <= slack, "neuron {}: replica {m} +- {sem} vs solver {}", i + 1, beta[i]);
    }
}

#[test]
fn power_intensity_with_drift_matches_replicas() {
    let spec = NetworkSpec::new(
        3,
        Weights::from_triplets(3, &[(0, 1, 0.8), (0, 2, 0.5), (1, 2, 0.6)]).unwrap(),
        vec![0.5, 0.7, 0.4],
        vec![1.0, 0.8, 1.2],
        IntensitySpec::Power { rho: 2.0, offset: vec![0.3; 3] },
        InteractionRule::PowerCombine { rho: 2.0 },
        true,
    )
    .unwrap();
    compare(&spec, 64, 400.0);
}

#[test]
fn affine_slope_with_drift_matches_replicas() {
    let spec = NetworkSpec::new(
        3,
        Weights::from_triplets(3, &[(0, 1, 0.4), (0, 2, 0.3), (1, 2, 0.5)]).unwrap(),
        vec![1.0, 0.5, 0.8],
        vec![1.0; 3],
        IntensitySpec::Affine { slope: vec![1.5, 0.7, 2.0], offset: vec![0.5; 3] },
        InteractionRule::ClipAdd,
        true,
    )
    .unwrap();
    compare(&spec, 64, 400.0);
}

#[test]
fn rate_equations_ignore_clipping_of_inhibition() {
    // the clipped dynamics keep firing; the unclipped rate equations give 0
    let spec = NetworkSpec::new(
        2,
        Weights::from_triplets(2, &[(0, 1, -0.6)]).unwrap(),
        vec![0.8; 2],
        vec![1.0; 2],
        IntensitySpec::affine_uniform(2, 1.0, 0.5),
        InteractionRule::ClipAdd,
        true,
    )
    .unwrap();
    let p = solve_beta(&spec, 1e-9).unwrap();
    assert_eq!(p.beta[1], 0.0);
    let runs = estimate_beta_ensemble(&spec, 16, 100.0, 0..2, None, BetaMethod::SpikeRate).unwrap();
    assert!(runs.iter().all(|r| r.beta[1] > 0.3));
}
