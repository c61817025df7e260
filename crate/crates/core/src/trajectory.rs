//! Quantum-jump trajectories.
//!
//! One step of the protocol:
//!
//! 1. draw a waiting time `τ = −ln(r)/(γN)` with `r` uniform in `(0, 1]`;
//! 2. propagate the orbitals with `exp(−i h τ)`;
//! 3. pick site `j` with probability `⟨n_j⟩/N`;
//! 4. project onto `n_j = 1` and rebuild the orbitals.
//!
//! Sampling times are segment boundaries: a unitary segment is split at every
//! sampling time it would cross, so observables are recorded at exactly
//! `t_burn + k·dt_sample`.
//!
//! Two engines implement the protocol. [`Engine::Canonical`] keeps the
//! orbitals in the site basis, selects sites by cumulative inversion and
//! rebuilds the orbitals from the top-`N` eigenvectors of the post-measurement
//! correlation matrix (`O(L³)` per jump). [`Engine::Spectral`] keeps the
//! orbitals in the eigenbasis of `h`, where propagation is diagonal, selects
//! sites by rejection sampling and applies the projection as a Householder
//! update (`O(LN)` per jump). Both sample the same process; for a fixed jump
//! record they produce the same states up to rounding, but they consume random
//! numbers differently, so a given seed yields different trajectories.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gaussian::{correlation_from_rows, check_subset, entanglement_entropy, neel_state, GaussianState};
use crate::linalg::{hermitian_eigen_desc, orthonormality_error};
use crate::model::{LatticeSpec, SingleParticleHamiltonian, Spectrum};
use crate::observables::{evaluate_observables, observable_names, EntropySource, Observable};
use crate::stats::mean_stderr;
use crate::{Error, Result, C64};

/// Occupations at or below this value cannot be measured.
pub const OCCUPATION_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub site: usize,
}

/// Ordered measurement events of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub events: Vec<JumpEvent>,
    pub seed: u64,
    pub trajectory_id: u64,
}

impl JumpRecord {
    pub fn validate(&self, sites: usize) -> Result<()> {
        let mut last = f64::NEG_INFINITY;
        for e in &self.events {
            if e.site >= sites {
                return Err(Error::RecordMismatch(format!("site {} outside the lattice", e.site)));
            }
            if !(e.time >= last) {
                return Err(Error::RecordMismatch(format!("event time {} goes backwards", e.time)));
            }
            last = e.time;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Canonical,
    Spectral,
}

/// Parameters of one trajectory ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub spec: LatticeSpec,
    /// Measurement rate per particle.
    pub gamma: f64,
    pub t_burn: f64,
    pub t_sample: f64,
    pub dt_sample: f64,
    pub seed: u64,
    pub n_traj: usize,
    pub observables: Vec<Observable>,
    pub engine: Engine,
}

impl TrajectoryConfig {
    /// Defaults: `t_burn = t_sample = 2L`, `dt_sample = 1`, 200 trajectories,
    /// half-chain entropy only, canonical engine.
    pub fn new(spec: LatticeSpec, gamma: f64, seed: u64) -> Self {
        let l = spec.sites() as f64;
        Self {
            spec,
            gamma,
            t_burn: 2.0 * l,
            t_sample: 2.0 * l,
            dt_sample: 1.0,
            seed,
            n_traj: 200,
            observables: vec![Observable::EntropyHalf],
            engine: Engine::Canonical,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.t_burn >= 0.0) || !(self.t_sample >= 0.0) {
            return Err(Error::Config("burn-in and sampling windows must be non-negative".into()));
        }
        if !(self.dt_sample > 0.0) {
            return Err(Error::Config(format!("dt_sample must be positive, got {}", self.dt_sample)));
        }
        for o in &self.observables {
            o.validate(self.spec.sites())?;
        }
        Ok(())
    }

    pub fn end_time(&self) -> f64 {
        self.t_burn + self.t_sample
    }

    /// `t_burn + k·dt_sample` for every `k` with the time inside the window.
    pub fn sample_times(&self) -> Vec<f64> {
        let count = (self.t_sample / self.dt_sample + 1e-9).floor() as usize;
        (0..=count).map(|k| self.t_burn + k as f64 * self.dt_sample).collect()
    }

    pub fn observable_names(&self) -> Vec<String> {
        observable_names(&self.observables, self.spec.sites())
    }
}

/// `τ = −ln(r)/(γN)`; `r` must lie in `(0, 1]`.
pub fn sample_jump_time(r: f64, gamma: f64, particles: usize) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Domain(format!("uniform draw {r} outside (0, 1]")));
    }
    Ok(-r.ln() / (gamma * particles as f64))
}

/// `u ← exp(−i h τ) u`, advancing the state time by `τ`.
pub fn evolve_unitary(state: &mut GaussianState, h: &SingleParticleHamiltonian, tau: f64) {
    if tau == 0.0 {
        return;
    }
    let s = h.spectrum();
    let mut coeffs = s.vectors_c.transpose() * state.orbitals();
    scale_rows_by_phase(&mut coeffs, s, tau);
    *state.orbitals_mut() = &s.vectors_c * coeffs;
    state.set_time(state.time() + tau);
}

fn scale_rows_by_phase(coeffs: &mut DMatrix<C64>, s: &Spectrum, tau: f64) {
    let phases: Vec<C64> = s.energies.iter().map(|&e| C64::from_polar(1.0, -e * tau)).collect();
    for m in 0..coeffs.ncols() {
        for (k, z) in coeffs.column_mut(m).iter_mut().enumerate() {
            *z *= phases[k];
        }
    }
}

/// Cumulative inversion of `⟨n_j⟩/N` with a uniform draw `r ∈ [0, 1)`.
pub fn select_measurement_site(r: f64, state: &GaussianState) -> Result<usize> {
    select_from_occupations(r, &state.occupations())
}

fn select_from_occupations(r: f64, occ: &[f64]) -> Result<usize> {
    let total: f64 = occ.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Internal("all occupations vanish".into()));
    }
    let target = r * total;
    let mut cum = 0.0;
    let mut last_positive = None;
    for (j, &n) in occ.iter().enumerate() {
        if n <= 0.0 {
            continue;
        }
        cum += n;
        last_positive = Some(j);
        if cum > target {
            return Ok(j);
        }
    }
    last_positive.ok_or_else(|| Error::Internal("no occupied site".into()))
}

/// Projective measurement of `n_j` with outcome 1.
///
/// Builds `D' = D − D e_j e_jᵀ D / D_jj` off row and column `j`, sets
/// `D'_jj = 1`, and takes the top-`N` eigenvectors of `D'` as the new orbitals.
pub fn apply_measurement(state: &mut GaussianState, site: usize) -> Result<()> {
    let l = state.sites();
    let n = state.particles();
    if site >= l {
        return Err(Error::SiteOutOfRange { site, sites: l });
    }
    let d = state.projector();
    let occ = d[(site, site)].re;
    if occ <= OCCUPATION_EPSILON {
        return Err(Error::EmptySiteMeasurement { site, occupation: occ });
    }
    let post = DMatrix::from_fn(l, l, |i, k| {
        if i == site || k == site {
            if i == k {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        } else {
            d[(i, k)] - d[(site, k)] * d[(i, site)] / occ
        }
    });
    let (_, vectors) = hermitian_eigen_desc(post);
    *state.orbitals_mut() = vectors.columns(0, n).into_owned();
    Ok(())
}

/// Random stream of trajectory `id` under root `seed`.
pub fn trajectory_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Orbitals stored in the eigenbasis of `h`: `u = V c`.
#[derive(Debug, Clone)]
pub struct SpectralState<'h> {
    coeffs: DMatrix<C64>,
    spectrum: &'h Spectrum,
    time: f64,
}

impl<'h> SpectralState<'h> {
    pub fn from_gaussian(state: &GaussianState, h: &'h SingleParticleHamiltonian) -> Self {
        let spectrum = h.spectrum();
        let coeffs = spectrum.vectors_c.transpose() * state.orbitals();
        Self { coeffs, spectrum, time: state.time() }
    }

    pub fn to_gaussian(&self) -> GaussianState {
        GaussianState::new(&self.spectrum.vectors_c * &self.coeffs, self.time)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn sites(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn particles(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn evolve(&mut self, tau: f64) {
        if tau == 0.0 {
            return;
        }
        scale_rows_by_phase(&mut self.coeffs, self.spectrum, tau);
        self.time += tau;
    }

    /// Row `site` of the site-basis orbital matrix.
    fn row(&self, site: usize) -> Vec<C64> {
        let v = &self.spectrum.vectors;
        (0..self.particles())
            .map(|m| {
                self.coeffs
                    .column(m)
                    .iter()
                    .enumerate()
                    .fold(C64::new(0.0, 0.0), |acc, (k, z)| acc + z * v[(site, k)])
            })
            .collect()
    }

    /// Site-basis orbital rows for `sites`.
    pub fn rows(&self, sites: &[usize]) -> DMatrix<C64> {
        self.spectrum.vectors_c.select_rows(sites) * &self.coeffs
    }

    pub fn occupation(&self, site: usize) -> f64 {
        self.row(site).iter().map(|z| z.norm_sqr()).sum()
    }

    /// Draws site `j` with probability `⟨n_j⟩/N`: propose uniformly, accept
    /// with probability `⟨n_j⟩ ≤ 1`.
    pub fn choose_site<R: Rng>(&self, rng: &mut R) -> usize {
        let l = self.sites();
        loop {
            let j = rng.random_range(0..l);
            if rng.random::<f64>() < self.occupation(j) {
                return j;
            }
        }
    }

    /// Projection onto `n_j = 1` as a Householder update of the coefficients.
    pub fn measure(&mut self, site: usize) -> Result<()> {
        let l = self.sites();
        if site >= l {
            return Err(Error::SiteOutOfRange { site, sites: l });
        }
        let w = self.row(site);
        let occ: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        if occ <= OCCUPATION_EPSILON {
            return Err(Error::EmptySiteMeasurement { site, occupation: occ });
        }
        let norm = occ.sqrt();
        // ĉ = conj(w)/|w| spans the orbital combination that carries the site.
        let mut v: Vec<C64> = w.iter().map(|z| z.conj() / norm).collect();
        let lead = v[0];
        let phase = if lead.norm() > 0.0 { lead / lead.norm() } else { C64::new(1.0, 0.0) };
        v[0] += phase;
        let vnorm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let factor = 2.0 / vnorm2;
        let n = self.particles();
        for k in 0..l {
            let mut y = C64::new(0.0, 0.0);
            for m in 0..n {
                y += self.coeffs[(k, m)] * v[m];
            }
            y *= factor;
            for m in 0..n {
                self.coeffs[(k, m)] -= y * v[m].conj();
            }
        }
        for k in 0..l {
            self.coeffs[(k, 0)] = C64::new(self.spectrum.vectors[(site, k)], 0.0);
        }
        Ok(())
    }

    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.coeffs)
    }

    pub fn trace_error(&self) -> f64 {
        let tr: f64 = self.coeffs.iter().map(|z| z.norm_sqr()).sum();
        (tr - self.particles() as f64).abs()
    }
}

impl EntropySource for SpectralState<'_> {
    fn lattice_sites(&self) -> usize {
        self.sites()
    }

    fn region_entropy(&self, region: &[usize]) -> Result<f64> {
        check_subset(region, self.sites())?;
        entanglement_entropy(&correlation_from_rows(self.rows(region), region))
    }

    fn leading_entropies(&self, max_ell: usize) -> Result<Vec<f64>> {
        let sites: Vec<usize> = (0..max_ell).collect();
        let corr = correlation_from_rows(self.rows(&sites), &sites);
        (1..=max_ell).map(|ell| entanglement_entropy(&corr.leading(ell))).collect()
    }
}

/// Observables recorded at one sampling time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub time: f64,
    pub values: Vec<f64>,
    pub orthonormality_error: f64,
    pub trace_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryOutput {
    pub names: Vec<String>,
    pub samples: Vec<Sample>,
    pub record: JumpRecord,
}

impl TrajectoryOutput {
    /// Per-observable mean over the sampling times.
    pub fn time_averages(&self) -> Vec<f64> {
        let k = self.samples.len() as f64;
        (0..self.names.len())
            .map(|i| self.samples.iter().map(|s| s.values[i]).sum::<f64>() / k)
            .collect()
    }

    pub fn n_jumps(&self) -> usize {
        self.record.events.len()
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        self.samples.iter().map(|s| s.orthonormality_error).fold(0.0, f64::max)
    }

    pub fn max_trace_error(&self) -> f64 {
        self.samples.iter().map(|s| s.trace_error).fold(0.0, f64::max)
    }

    pub fn summary(&self) -> TrajectorySummary {
        TrajectorySummary {
            trajectory_id: self.record.trajectory_id,
            averages: self.time_averages(),
            n_jumps: self.n_jumps(),
            max_orthonormality_error: self.max_orthonormality_error(),
            max_trace_error: self.max_trace_error(),
        }
    }
}

/// The engine-specific operations the protocol driver needs.
trait Stepper: EntropySource {
    fn advance(&mut self, tau: f64);
    fn measure_site(&mut self, site: usize) -> Result<()>;
    fn pick_site(&self, rng: &mut ChaCha8Rng) -> Result<usize>;
    fn errors(&self) -> (f64, f64);
}

struct CanonicalStepper<'h, F> {
    state: GaussianState,
    h: &'h SingleParticleHamiltonian,
    update: F,
}

impl<F> EntropySource for CanonicalStepper<'_, F> {
    fn lattice_sites(&self) -> usize {
        self.state.sites()
    }

    fn region_entropy(&self, region: &[usize]) -> Result<f64> {
        self.state.region_entropy(region)
    }

    fn leading_entropies(&self, max_ell: usize) -> Result<Vec<f64>> {
        self.state.leading_entropies(max_ell)
    }
}

impl<F> Stepper for CanonicalStepper<'_, F>
where
    F: Fn(&mut GaussianState, usize) -> Result<()>,
{
    fn advance(&mut self, tau: f64) {
        evolve_unitary(&mut self.state, self.h, tau);
    }

    fn measure_site(&mut self, site: usize) -> Result<()> {
        (self.update)(&mut self.state, site)
    }

    fn pick_site(&self, rng: &mut ChaCha8Rng) -> Result<usize> {
        select_measurement_site(rng.random::<f64>(), &self.state)
    }

    fn errors(&self) -> (f64, f64) {
        (self.state.orthonormality_error(), self.state.trace_error())
    }
}

impl Stepper for SpectralState<'_> {
    fn advance(&mut self, tau: f64) {
        self.evolve(tau);
    }

    fn measure_site(&mut self, site: usize) -> Result<()> {
        self.measure(site)
    }

    fn pick_site(&self, rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(self.choose_site(rng))
    }

    fn errors(&self) -> (f64, f64) {
        (self.orthonormality_error(), self.trace_error())
    }
}

/// Where jump times and sites come from.
enum Jumps<'r> {
    Random { rng: ChaCha8Rng, rate: f64 },
    Replay(std::slice::Iter<'r, JumpEvent>, Option<JumpEvent>),
}

impl Jumps<'_> {
    fn next_time(&mut self, now: f64) -> Result<Option<f64>> {
        match self {
            Jumps::Random { rng, rate } => {
                let r = 1.0 - rng.random::<f64>();
                Ok(Some(now + -r.ln() / *rate))
            }
            Jumps::Replay(iter, pending) => {
                *pending = iter.next().copied();
                Ok(pending.map(|e| e.time))
            }
        }
    }

    fn site<S: Stepper>(&mut self, state: &S) -> Result<usize> {
        match self {
            Jumps::Random { rng, .. } => state.pick_site(rng),
            Jumps::Replay(_, pending) => {
                pending.map(|e| e.site).ok_or_else(|| Error::Internal("no pending event".into()))
            }
        }
    }
}

fn drive<S: Stepper>(
    mut state: S,
    config: &TrajectoryConfig,
    mut jumps: Jumps<'_>,
    seed: u64,
    trajectory_id: u64,
) -> Result<TrajectoryOutput> {
    let times = config.sample_times();
    let t_end = config.end_time();
    let mut now = 0.0;
    let mut next_sample = 0;
    let mut samples = Vec::with_capacity(times.len());
    let mut events = Vec::new();
    loop {
        let jump_time = jumps.next_time(now)?.filter(|&t| t <= t_end);
        if let Some(t) = jump_time {
            if t < now {
                return Err(Error::RecordMismatch(format!("event at {t} precedes {now}")));
            }
        }
        while next_sample < times.len() && jump_time.is_none_or(|t| times[next_sample] <= t) {
            let ts = times[next_sample];
            state.advance(ts - now);
            now = ts;
            let values = evaluate_observables(&config.observables, &state)?;
            let (orthonormality_error, trace_error) = state.errors();
            samples.push(Sample { time: ts, values, orthonormality_error, trace_error });
            next_sample += 1;
        }
        let Some(t) = jump_time else { break };
        state.advance(t - now);
        now = t;
        let site = jumps.site(&state)?;
        state.measure_site(site)?;
        events.push(JumpEvent { time: t, site });
    }
    Ok(TrajectoryOutput {
        names: config.observable_names(),
        samples,
        record: JumpRecord { events, seed, trajectory_id },
    })
}

/// One trajectory from the Néel state; a pure function of
/// `(config, trajectory_id)`.
pub fn run_trajectory(
    config: &TrajectoryConfig,
    h: &SingleParticleHamiltonian,
    trajectory_id: u64,
) -> Result<TrajectoryOutput> {
    config.validate()?;
    let initial = neel_state(&config.spec)?;
    let rate = config.gamma * config.spec.particles() as f64;
    let jumps = Jumps::Random { rng: trajectory_rng(config.seed, trajectory_id), rate };
    match config.engine {
        Engine::Canonical => {
            let stepper = CanonicalStepper { state: initial, h, update: apply_measurement };
            drive(stepper, config, jumps, config.seed, trajectory_id)
        }
        Engine::Spectral => {
            let stepper = SpectralState::from_gaussian(&initial, h);
            drive(stepper, config, jumps, config.seed, trajectory_id)
        }
    }
}

/// Re-runs a recorded trajectory without drawing random numbers.
pub fn replay_trajectory(
    record: &JumpRecord,
    config: &TrajectoryConfig,
    h: &SingleParticleHamiltonian,
) -> Result<TrajectoryOutput> {
    match config.engine {
        Engine::Canonical => replay_with_update(record, config, h, apply_measurement),
        Engine::Spectral => {
            config.validate()?;
            record.validate(config.spec.sites())?;
            let initial = neel_state(&config.spec)?;
            let stepper = SpectralState::from_gaussian(&initial, h);
            let jumps = Jumps::Replay(record.events.iter(), None);
            drive(stepper, config, jumps, record.seed, record.trajectory_id)
        }
    }
}

/// Canonical-engine replay with a caller-supplied measurement update.
pub fn replay_with_update<F>(
    record: &JumpRecord,
    config: &TrajectoryConfig,
    h: &SingleParticleHamiltonian,
    update: F,
) -> Result<TrajectoryOutput>
where
    F: Fn(&mut GaussianState, usize) -> Result<()>,
{
    config.validate()?;
    record.validate(config.spec.sites())?;
    let initial = neel_state(&config.spec)?;
    let stepper = CanonicalStepper { state: initial, h, update };
    let jumps = Jumps::Replay(record.events.iter(), None);
    drive(stepper, config, jumps, record.seed, record.trajectory_id)
}

/// Time-averaged observables of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub trajectory_id: u64,
    pub averages: Vec<f64>,
    pub n_jumps: usize,
    pub max_orthonormality_error: f64,
    pub max_trace_error: f64,
}

/// Ensemble means and standard errors of trajectory time averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_traj: usize,
    pub jumps_mean: f64,
    pub jumps_stderr: f64,
    pub trajectories: Vec<TrajectorySummary>,
}

impl EnsembleResult {
    pub fn get(&self, name: &str) -> Option<(f64, f64)> {
        let k = self.names.iter().position(|n| n == name)?;
        Some((self.mean[k], self.stderr[k]))
    }

    pub fn max_orthonormality_error(&self) -> f64 {
        self.trajectories.iter().map(|t| t.max_orthonormality_error).fold(0.0, f64::max)
    }

    pub fn max_trace_error(&self) -> f64 {
        self.trajectories.iter().map(|t| t.max_trace_error).fold(0.0, f64::max)
    }
}

/// Reduces trajectory summaries in the order given.
pub fn summarize(names: Vec<String>, trajectories: Vec<TrajectorySummary>) -> EnsembleResult {
    let columns = names.len();
    let mut mean = Vec::with_capacity(columns);
    let mut stderr = Vec::with_capacity(columns);
    for k in 0..columns {
        let values: Vec<f64> = trajectories.iter().map(|t| t.averages[k]).collect();
        let (m, s) = mean_stderr(&values);
        mean.push(m);
        stderr.push(s);
    }
    let jumps: Vec<f64> = trajectories.iter().map(|t| t.n_jumps as f64).collect();
    let (jumps_mean, jumps_stderr) = mean_stderr(&jumps);
    EnsembleResult { names, mean, stderr, n_traj: trajectories.len(), jumps_mean, jumps_stderr, trajectories }
}

/// Runs trajectories `0..n_traj` in parallel and reduces them by id.
pub fn run_ensemble(config: &TrajectoryConfig, h: &SingleParticleHamiltonian) -> Result<EnsembleResult> {
    if config.n_traj < 2 {
        return Err(Error::Config(format!("an ensemble needs at least 2 trajectories, got {}", config.n_traj)));
    }
    let ids: Vec<u64> = (0..config.n_traj as u64).collect();
    run_ensemble_ids(config, h, &ids)
}

/// Runs the listed trajectory ids; the reduction follows the order of `ids`.
pub fn run_ensemble_ids(
    config: &TrajectoryConfig,
    h: &SingleParticleHamiltonian,
    ids: &[u64],
) -> Result<EnsembleResult> {
    let summaries = ids
        .par_iter()
        .map(|&id| run_trajectory(config, h, id).map(|out| out.summary()))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(config.observable_names(), summaries))
}
