use monitored_fermions::prelude::*;
use monitored_fermions::stats::mean_stderr;
use monitored_fermions::trajectory::run_ensemble_ids;

fn config(engine: Engine) -> TrajectoryConfig {
    let spec = LatticeSpec::new(16, 2.0).unwrap();
    TrajectoryConfig {
        n_traj: 24,
        observables: vec![Observable::EntropyHalf, Observable::MiQuarters],
        engine,
        ..TrajectoryConfig::new(spec, 0.5, 99)
    }
}

#[test]
fn ensemble_statistics_follow_trajectory_averages() {
    let config = config(Engine::Canonical);
    let h = build_hopping_matrix(&config.spec);
    let ensemble = run_ensemble(&config, &h).unwrap();
    assert_eq!(ensemble.n_traj, 24);
    for (k, name) in ensemble.names.iter().enumerate() {
        let values: Vec<f64> = (0..24)
            .map(|id| run_trajectory(&config, &h, id).unwrap().time_averages()[k])
            .collect();
        let (m, s) = mean_stderr(&values);
        assert_eq!(ensemble.get(name), Some((m, s)));
    }
    assert!(ensemble.max_orthonormality_error() < 1e-9);
    assert!(ensemble.max_trace_error() < 1e-9);
}

#[test]
fn ensemble_is_independent_of_thread_count() {
    let config = config(Engine::Spectral);
    let h = build_hopping_matrix(&config.spec);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = single.install(|| run_ensemble(&config, &h).unwrap());
    let b = many.install(|| run_ensemble(&config, &h).unwrap());
    assert_eq!(a, b);
}

#[test]
fn split_id_ranges_merge_to_the_full_ensemble() {
    let config = config(Engine::Spectral);
    let h = build_hopping_matrix(&config.spec);
    let full = run_ensemble(&config, &h).unwrap();
    let first = run_ensemble_ids(&config, &h, &(0..10).collect::<Vec<_>>()).unwrap();
    let second = run_ensemble_ids(&config, &h, &(10..24).collect::<Vec<_>>()).unwrap();
    let mut merged = first.trajectories.clone();
    merged.extend(second.trajectories);
    assert_eq!(merged, full.trajectories);
}

#[test]
fn engines_agree_statistically() {
    let mut canonical = config(Engine::Canonical);
    canonical.n_traj = 60;
    let spectral = TrajectoryConfig { engine: Engine::Spectral, ..canonical.clone() };
    let h = build_hopping_matrix(&canonical.spec);
    let a = run_ensemble(&canonical, &h).unwrap();
    let b = run_ensemble(&spectral, &h).unwrap();
    for name in &a.names {
        let (ma, sa) = a.get(name).unwrap();
        let (mb, sb) = b.get(name).unwrap();
        assert!((ma - mb).abs() < 4.0 * (sa * sa + sb * sb).sqrt(), "{name}: {ma} ± {sa} vs {mb} ± {sb}");
    }
}

#[test]
fn stronger_monitoring_lowers_entanglement() {
    let weak = config(Engine::Spectral);
    let strong = TrajectoryConfig { gamma: 5.0, ..weak.clone() };
    let h = build_hopping_matrix(&weak.spec);
    let (sw, _) = run_ensemble(&weak, &h).unwrap().get("entropy_half").unwrap();
    let (ss, _) = run_ensemble(&strong, &h).unwrap().get("entropy_half").unwrap();
    assert!(ss < sw, "{ss} vs {sw}");
}
