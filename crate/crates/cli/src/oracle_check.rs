//! The `oracle-check` subcommand: every Gaussian-formalism operation against
//! the dense fixed-particle-number reference on small rings.

use std::path::{Path, PathBuf};

use monitored_fermions::bounds::{bilinear_norm, growth_rate_check, GrowthVariant};
use monitored_fermions::gaussian::{correlation_matrix, neel_state, GaussianState};
use monitored_fermions::model::{build_boundary_block, build_hopping_matrix, LatticeSpec, SingleParticleHamiltonian};
use monitored_fermions::observables::Observable;
use monitored_fermions::oracle::{
    dense_correlation, dense_evolve, dense_hamiltonian, dense_measure, dense_neel, dense_trajectory_replay,
    fock_extreme_eigenvalue, max_sample_deviation,
};
use monitored_fermions::trajectory::{
    apply_measurement, evolve_unitary, replay_with_update, run_trajectory, Engine, JumpRecord, TrajectoryConfig,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{ensure_dir, write_json};

pub const ORACLE_REPORT_FILE: &str = "oracle_report.json";

/// Tolerance of the finite-difference growth-rate comparison.
const GROWTH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    #[serde(rename = "L")]
    pub sites: usize,
    pub alpha: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub config_hash: String,
    pub corrupted_update: bool,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

impl OracleReport {
    pub fn path(out: &Path) -> PathBuf {
        out.join(ORACLE_REPORT_FILE)
    }
}

fn check(name: &str, spec: &LatticeSpec, deviation: f64, tolerance: f64, detail: String) -> CheckResult {
    CheckResult {
        name: name.into(),
        sites: spec.sites(),
        alpha: spec.alpha(),
        max_deviation: deviation,
        tolerance,
        passed: deviation < tolerance,
        detail,
    }
}

/// Measurement update under test: the real one, or one followed by a short
/// spurious evolution.
fn update_fn<'h>(h: &'h SingleParticleHamiltonian, corrupt: bool) -> impl Fn(&mut GaussianState, usize) -> monitored_fermions::Result<()> + 'h {
    move |state, site| {
        apply_measurement(state, site)?;
        if corrupt {
            let t = state.time();
            evolve_unitary(state, h, 0.05);
            *state = GaussianState::new(state.orbitals().clone(), t);
        }
        Ok(())
    }
}

fn trajectory_config(spec: &LatticeSpec, config: &ExperimentConfig, engine: Engine) -> TrajectoryConfig {
    let o = &config.oracle;
    let mut observables = vec![Observable::Profile, Observable::MiFar];
    if spec.sites() % 8 == 0 {
        observables.push(Observable::MiQuarters);
    }
    TrajectoryConfig {
        t_burn: 0.0,
        t_sample: o.t_sample,
        dt_sample: o.dt_sample,
        n_traj: o.trajectories,
        observables,
        engine,
        ..TrajectoryConfig::new(spec.clone(), o.gamma, config.seed)
    }
}

fn correlation_per_jump(
    spec: &LatticeSpec,
    h: &SingleParticleHamiltonian,
    record: &JumpRecord,
    corrupt: bool,
) -> monitored_fermions::Result<f64> {
    let dense_h = dense_hamiltonian(spec, 0.0)?;
    let update = update_fn(h, corrupt);
    let mut gaussian = neel_state(spec)?;
    let mut dense = dense_neel(spec)?;
    let sites: Vec<usize> = (0..spec.sites()).collect();
    let mut worst: f64 = 0.0;
    let mut t = 0.0;
    for event in &record.events {
        evolve_unitary(&mut gaussian, h, event.time - t);
        dense = dense_evolve(&dense, &dense_h, event.time - t)?;
        t = event.time;
        update(&mut gaussian, event.site)?;
        dense = dense_measure(&dense, event.site)?;
        let d = correlation_matrix(&gaussian, &sites)?;
        let diff = d.matrix() - dense_correlation(&dense);
        worst = diff.iter().map(|z| z.norm()).fold(worst, f64::max);
    }
    Ok(worst)
}

fn checks_for(spec: &LatticeSpec, config: &ExperimentConfig, corrupt: bool) -> monitored_fermions::Result<Vec<CheckResult>> {
    let tol = config.oracle.tolerance;
    let h = build_hopping_matrix(spec);
    let mut out = Vec::new();

    let canonical = trajectory_config(spec, config, Engine::Canonical);
    let spectral = trajectory_config(spec, config, Engine::Spectral);
    let (mut replay_dev, mut spectral_dev, mut corr_dev, mut jumps) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for id in 0..config.oracle.trajectories as u64 {
        let reference = run_trajectory(&canonical, &h, id)?;
        let gaussian = replay_with_update(&reference.record, &canonical, &h, update_fn(&h, corrupt))?;
        let dense = dense_trajectory_replay(&reference.record, &canonical, 0.0)?;
        replay_dev = replay_dev.max(max_sample_deviation(&gaussian, &dense)?);
        corr_dev = corr_dev.max(correlation_per_jump(spec, &h, &reference.record, corrupt)?);
        jumps += reference.n_jumps();
        let fast = run_trajectory(&spectral, &h, id)?;
        let dense = dense_trajectory_replay(&fast.record, &spectral, 0.0)?;
        spectral_dev = spectral_dev.max(max_sample_deviation(&fast, &dense)?);
    }
    let detail = format!("{} trajectories, {jumps} jumps", config.oracle.trajectories);
    out.push(check("trajectory_observables", spec, replay_dev, tol, detail.clone()));
    out.push(check("correlation_after_each_jump", spec, corr_dev, tol, detail));
    out.push(check("spectral_engine_observables", spec, spectral_dev, tol, String::new()));

    let n = spec.particles();
    let ground: f64 = h.spectrum().energies.iter().take(n).sum();
    let dense_h = dense_hamiltonian(spec, 0.0)?;
    let dense_ground = dense_h.energies().iter().copied().fold(f64::INFINITY, f64::min);
    out.push(check("ground_energy", spec, (ground - dense_ground).abs(), tol, format!("{ground:.12}")));

    let block = build_boundary_block(spec, spec.sites() / 2)?;
    let norm = bilinear_norm(&block);
    let fock = fock_extreme_eigenvalue(&block.single_particle_matrix())?;
    out.push(check("boundary_norm", spec, (norm - fock).abs(), tol, format!("{norm:.12}")));

    let v = config.oracle.interaction;
    let dense_v = dense_hamiltonian(spec, v)?;
    let report = growth_rate_check(&dense_neel(spec)?, &dense_v, &block, v, 0.7, 1e-5, GROWTH_TOLERANCE)?;
    let deviation = (-report.rates.rate_log - report.finite_difference).abs();
    let matched: Vec<&str> = report
        .matched
        .iter()
        .map(|m| match m {
            GrowthVariant::Literal => "literal",
            GrowthVariant::Log => "log",
            GrowthVariant::LogOppositeSign => "log_opposite_sign",
        })
        .collect();
    out.push(check(
        "growth_rate",
        spec,
        deviation,
        GROWTH_TOLERANCE,
        format!("V={v}, dS/dt={:.9}, matched [{}]", report.finite_difference, matched.join(", ")),
    ));
    Ok(out)
}

pub fn oracle_check(config: &ExperimentConfig, out: &Path, corrupt: bool) -> Result<OracleReport, CliError> {
    ensure_dir(out)?;
    let mut checks = Vec::new();
    for &l in &config.oracle.sizes {
        for &alpha in &config.oracle.alphas {
            let spec = LatticeSpec::new(l, alpha).map_err(|e| CliError::Config(e.to_string()))?;
            match checks_for(&spec, config, corrupt) {
                Ok(c) => checks.extend(c),
                Err(e) => checks.push(CheckResult {
                    name: "error".into(),
                    sites: l,
                    alpha,
                    max_deviation: f64::INFINITY,
                    tolerance: config.oracle.tolerance,
                    passed: false,
                    detail: e.to_string(),
                }),
            }
        }
    }
    let passed = checks.iter().all(|c| c.passed);
    let report = OracleReport { config_hash: config.hash(), corrupted_update: corrupt, passed, checks };
    write_json(&OracleReport::path(out), &report)?;
    Ok(report)
}
