//! Dense many-body reference implementation.
//!
//! States live in the fixed-particle-number sector of the Fock space. A
//! basis state is a bitmask `m` (bit `i` set when site `i` is occupied) and
//! stands for `c†_{j1} c†_{j2} ⋯ c†_{jN} |0⟩` with `j1 < j2 < ⋯ < jN`. With
//! this ordering `c†_i c_j` picks up the sign `(−1)^k`, `k` the number of
//! occupied sites strictly between `i` and `j`, and a Slater determinant with
//! orbital matrix `u` has amplitude `det u[{j1..jN}, :]` on `m`.
//!
//! Nothing here shares code with the Gaussian formalism beyond the hopping
//! matrix itself, so agreement between the two is a genuine check.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::gaussian::GaussianState;
use crate::linalg::{hermitian_eigen_desc, real_symmetric_eigen, spectrum_entropy_bits};
use crate::model::{build_hopping_matrix, pair_coupling, LatticeSpec};
use crate::observables::{evaluate_observables, EntropySource};
use crate::trajectory::{JumpEvent, JumpRecord, Sample, TrajectoryConfig, TrajectoryOutput, OCCUPATION_EPSILON};
use crate::{Error, Result, C64};

/// Largest lattice the dense routines accept.
pub const DENSE_SITE_CAP: usize = 10;

/// Occupation bitmasks with exactly `particles` bits among `sites`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorBasis {
    sites: usize,
    particles: usize,
    states: Vec<u32>,
    lookup: HashMap<u32, usize>,
}

impl SectorBasis {
    pub fn new(sites: usize, particles: usize) -> Result<Self> {
        if sites > DENSE_SITE_CAP {
            return Err(Error::DimensionCap(format!("{sites} sites exceed the dense cap of {DENSE_SITE_CAP}")));
        }
        if particles > sites {
            return Err(Error::InvalidLattice(format!("{particles} particles on {sites} sites")));
        }
        let states: Vec<u32> = (0u32..(1 << sites)).filter(|m| m.count_ones() as usize == particles).collect();
        let lookup = states.iter().enumerate().map(|(k, &m)| (m, k)).collect();
        Ok(Self { sites, particles, states, lookup })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn index(&self, mask: u32) -> Option<usize> {
        self.lookup.get(&mask).copied()
    }
}

/// `c†_i c_j |m⟩ = sign |m'⟩`, or `None` when it annihilates `|m⟩`.
pub fn hop(mask: u32, i: usize, j: usize) -> Option<(u32, f64)> {
    if mask & (1 << j) == 0 {
        return None;
    }
    if i == j {
        return Some((mask, 1.0));
    }
    if mask & (1 << i) != 0 {
        return None;
    }
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let between = (mask >> (lo + 1)) & ((1u32 << (hi - lo - 1)) - 1);
    let sign = if between.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
    Some(((mask & !(1 << j)) | (1 << i), sign))
}

/// Sector matrix of `Σ_ij t_ij c†_i c_j`.
pub fn sector_bilinear(basis: &SectorBasis, t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let l = basis.sites();
    if t.nrows() != l || t.ncols() != l {
        return Err(Error::Domain(format!("bilinear form must be {l}x{l}")));
    }
    let dim = basis.dim();
    let mut out = DMatrix::zeros(dim, dim);
    for (col, &mask) in basis.states().iter().enumerate() {
        for i in 0..l {
            for j in 0..l {
                let w = t[(i, j)];
                if w == 0.0 {
                    continue;
                }
                if let Some((m2, sign)) = hop(mask, i, j) {
                    let row = basis.index(m2).expect("hopping conserves particle number");
                    out[(row, col)] += sign * w;
                }
            }
        }
    }
    Ok(out)
}

/// Sector Hamiltonian with a cached eigendecomposition.
#[derive(Debug)]
pub struct DenseHamiltonian {
    basis: Arc<SectorBasis>,
    matrix: DMatrix<f64>,
    eigen: OnceLock<(DVector<f64>, DMatrix<f64>)>,
}

impl DenseHamiltonian {
    pub fn new(basis: Arc<SectorBasis>, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::Domain("matrix does not match the sector dimension".into()));
        }
        Ok(Self { basis, matrix, eigen: OnceLock::new() })
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn eigen(&self) -> &(DVector<f64>, DMatrix<f64>) {
        self.eigen.get_or_init(|| real_symmetric_eigen(self.matrix.clone()))
    }

    /// Many-body energies, ascending.
    pub fn energies(&self) -> &DVector<f64> {
        &self.eigen().0
    }
}

/// Sector Hamiltonian of hopping plus `V Σ_{i<j} w_ij n_i n_j`, with `w_ij`
/// the same pair weight as the hopping.
pub fn dense_hamiltonian(spec: &LatticeSpec, v: f64) -> Result<DenseHamiltonian> {
    let basis = Arc::new(SectorBasis::new(spec.sites(), spec.particles())?);
    let h = build_hopping_matrix(spec);
    let mut matrix = sector_bilinear(&basis, h.matrix())?;
    if v != 0.0 {
        let l = spec.sites();
        for (k, &mask) in basis.states().iter().enumerate() {
            let mut e = 0.0;
            for i in 0..l {
                for j in (i + 1)..l {
                    if mask & (1 << i) != 0 && mask & (1 << j) != 0 {
                        e += pair_coupling(spec, i, j)?;
                    }
                }
            }
            matrix[(k, k)] += v * e;
        }
    }
    DenseHamiltonian::new(basis, matrix)
}

/// Normalised amplitude vector over a [`SectorBasis`].
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    basis: Arc<SectorBasis>,
    amplitudes: DVector<C64>,
    time: f64,
}

impl DenseState {
    pub fn new(basis: Arc<SectorBasis>, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::Domain("amplitude vector does not match the sector".into()));
        }
        let norm = amplitudes.norm();
        if !(norm > 0.0) {
            return Err(Error::DegenerateState);
        }
        Ok(Self { basis, amplitudes: amplitudes / C64::new(norm, 0.0), time: 0.0 })
    }

    /// Product state with the given occupied sites.
    pub fn product(basis: Arc<SectorBasis>, occupied: &[usize]) -> Result<Self> {
        let mask = occupied.iter().fold(0u32, |m, &s| m | (1 << s));
        let k = basis
            .index(mask)
            .ok_or_else(|| Error::Domain("occupation pattern is not in the sector".into()))?;
        let mut amps = DVector::zeros(basis.dim());
        amps[k] = C64::new(1.0, 0.0);
        Self::new(basis, amps)
    }

    pub fn basis(&self) -> &Arc<SectorBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn sites(&self) -> usize {
        self.basis.sites()
    }

    pub fn norm_error(&self) -> f64 {
        (self.amplitudes.norm() - 1.0).abs()
    }

    pub fn occupation(&self, site: usize) -> f64 {
        self.basis
            .states()
            .iter()
            .zip(self.amplitudes.iter())
            .filter(|(m, _)| *m & (1 << site) != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Global phase rotation `e^{iθ}|ψ⟩`.
    pub fn with_phase(&self, theta: f64) -> Self {
        let mut out = self.clone();
        out.amplitudes *= C64::from_polar(1.0, theta);
        out
    }
}

/// Néel state with particles on the even sites.
pub fn dense_neel(spec: &LatticeSpec) -> Result<DenseState> {
    let basis = Arc::new(SectorBasis::new(spec.sites(), spec.particles())?);
    let occupied: Vec<usize> = (0..spec.particles()).map(|m| 2 * m).collect();
    DenseState::product(basis, &occupied)
}

/// Slater determinant of `state` expanded in the sector basis.
pub fn dense_from_gaussian(state: &GaussianState) -> Result<DenseState> {
    let basis = Arc::new(SectorBasis::new(state.sites(), state.particles())?);
    let u = state.orbitals();
    let amps = DVector::from_iterator(
        basis.dim(),
        basis.states().iter().map(|&mask| {
            let rows: Vec<usize> = (0..state.sites()).filter(|&s| mask & (1 << s) != 0).collect();
            u.select_rows(&rows).determinant()
        }),
    );
    let mut out = DenseState::new(basis, amps)?;
    out.time = state.time();
    Ok(out)
}

/// `exp(−iHτ)|ψ⟩` through the sector eigendecomposition.
pub fn dense_evolve(state: &DenseState, h: &DenseHamiltonian, tau: f64) -> Result<DenseState> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("evolution time {tau} must be non-negative")));
    }
    if **h.basis() != *state.basis {
        return Err(Error::Domain("Hamiltonian and state live in different sectors".into()));
    }
    let mut out = state.clone();
    out.time += tau;
    if tau == 0.0 {
        return Ok(out);
    }
    let (energies, w) = h.eigen();
    let wc = w.map(|x| C64::new(x, 0.0));
    let mut coeffs = wc.transpose() * &state.amplitudes;
    for (k, c) in coeffs.iter_mut().enumerate() {
        *c *= C64::from_polar(1.0, -energies[k] * tau);
    }
    out.amplitudes = wc * coeffs;
    Ok(out)
}

/// Projects onto `n_j = 1` and renormalises.
pub fn dense_measure(state: &DenseState, site: usize) -> Result<DenseState> {
    if site >= state.sites() {
        return Err(Error::SiteOutOfRange { site, sites: state.sites() });
    }
    let occ = state.occupation(site);
    if occ <= OCCUPATION_EPSILON {
        return Err(Error::EmptySiteMeasurement { site, occupation: occ });
    }
    let mut out = state.clone();
    for (a, &m) in out.amplitudes.iter_mut().zip(state.basis.states()) {
        if m & (1 << site) == 0 {
            *a = C64::new(0.0, 0.0);
        }
    }
    out.amplitudes /= C64::new(occ.sqrt(), 0.0);
    Ok(out)
}

/// Single-particle correlations in the Gaussian convention,
/// `D_ij = ⟨c†_j c_i⟩`.
pub fn dense_correlation(state: &DenseState) -> DMatrix<C64> {
    let l = state.sites();
    let mut d = DMatrix::zeros(l, l);
    for (col, &mask) in state.basis.states().iter().enumerate() {
        let amp = state.amplitudes[col];
        for i in 0..l {
            for j in 0..l {
                if let Some((m2, sign)) = hop(mask, i, j) {
                    let row = state.basis.index(m2).expect("sector preserved");
                    // ⟨c†_i c_j⟩ = Σ conj(ψ(m2)) sign ψ(m)
                    d[(j, i)] += state.amplitudes[row].conj() * amp * sign;
                }
            }
        }
    }
    d
}

/// Amplitudes reshaped as `Ψ[a, b]` for the split into `region` and its
/// complement. Rows and columns index occupation patterns of the region and
/// the complement in their own site order; the sign reorders the creation
/// operators so that the region's come first.
pub fn bipartite_matrix(state: &DenseState, region: &[usize]) -> Result<DMatrix<C64>> {
    let l = state.sites();
    let mut in_region = vec![false; l];
    for &s in region {
        if s >= l {
            return Err(Error::SiteOutOfRange { site: s, sites: l });
        }
        if in_region[s] {
            return Err(Error::DuplicateSite(s));
        }
        in_region[s] = true;
    }
    let a_sites: Vec<usize> = (0..l).filter(|&s| in_region[s]).collect();
    let b_sites: Vec<usize> = (0..l).filter(|&s| !in_region[s]).collect();
    let mut psi = DMatrix::zeros(1 << a_sites.len(), 1 << b_sites.len());
    for (&mask, &amp) in state.basis.states().iter().zip(state.amplitudes.iter()) {
        let (a, b, sign) = split_mask(mask, &in_region, &a_sites, &b_sites);
        psi[(a, b)] += amp * sign;
    }
    Ok(psi)
}

/// `(X ⊗ 1)|ψ⟩` for an operator `X` on the occupation space of `region`,
/// in the layout of [`bipartite_matrix`].
pub fn apply_region_operator(state: &DenseState, region: &[usize], op: &DMatrix<C64>) -> Result<DVector<C64>> {
    let psi = bipartite_matrix(state, region)?;
    if op.nrows() != psi.nrows() || op.ncols() != psi.nrows() {
        return Err(Error::Domain("operator does not match the region".into()));
    }
    let image = op * psi;
    let l = state.sites();
    let in_region: Vec<bool> = (0..l).map(|s| region.contains(&s)).collect();
    let a_sites: Vec<usize> = (0..l).filter(|&s| in_region[s]).collect();
    let b_sites: Vec<usize> = (0..l).filter(|&s| !in_region[s]).collect();
    Ok(DVector::from_iterator(
        state.basis.dim(),
        state.basis.states().iter().map(|&mask| {
            let (a, b, sign) = split_mask(mask, &in_region, &a_sites, &b_sites);
            image[(a, b)] * sign
        }),
    ))
}

/// Region and complement patterns of `mask` plus the reordering sign.
fn split_mask(mask: u32, in_region: &[bool], a_sites: &[usize], b_sites: &[usize]) -> (usize, usize, f64) {
    let compress = |sites: &[usize]| {
        sites.iter().enumerate().fold(0usize, |acc, (k, &s)| acc | (((mask >> s) as usize & 1) << k))
    };
    // pairs (b, a) with b < a, both occupied
    let mut swaps = 0u32;
    let mut b_seen = 0u32;
    for (s, &inside) in in_region.iter().enumerate() {
        if mask & (1 << s) == 0 {
            continue;
        }
        if inside {
            swaps += b_seen;
        } else {
            b_seen += 1;
        }
    }
    (compress(a_sites), compress(b_sites), if swaps % 2 == 0 { 1.0 } else { -1.0 })
}

/// Reduced density matrix of `region` in the occupation basis of the region.
pub fn reduced_density_matrix(state: &DenseState, region: &[usize]) -> Result<DMatrix<C64>> {
    let psi = bipartite_matrix(state, region)?;
    Ok(&psi * psi.adjoint())
}

/// Von Neumann entropy in bits of the reduced state on `region`.
pub fn dense_entropy(state: &DenseState, region: &[usize]) -> Result<f64> {
    if region.is_empty() || region.len() == state.sites() {
        return Ok(0.0);
    }
    let (values, _) = hermitian_eigen_desc(reduced_density_matrix(state, region)?);
    let clipped: Vec<f64> = values.into_iter().map(|p| p.max(0.0)).collect();
    Ok(spectrum_entropy_bits(&clipped))
}

impl EntropySource for DenseState {
    fn lattice_sites(&self) -> usize {
        self.sites()
    }

    fn region_entropy(&self, region: &[usize]) -> Result<f64> {
        dense_entropy(self, region)
    }
}

/// Largest eigenvalue magnitude of `Σ_ij t_ij c†_i c_j` over the whole Fock
/// space, sector by sector.
pub fn fock_extreme_eigenvalue(t: &DMatrix<f64>) -> Result<f64> {
    let l = t.nrows();
    let mut best: f64 = 0.0;
    for n in 0..=l {
        let basis = SectorBasis::new(l, n)?;
        let (values, _) = real_symmetric_eigen(sector_bilinear(&basis, t)?);
        best = values.iter().fold(best, |m, v| m.max(v.abs()));
    }
    Ok(best)
}

/// Replays `record` on the dense state with interaction `v` and samples the
/// configured observables at the configured times. Draws no random numbers.
pub fn dense_trajectory_replay(record: &JumpRecord, config: &TrajectoryConfig, v: f64) -> Result<TrajectoryOutput> {
    config.validate()?;
    let l = config.spec.sites();
    let h = dense_hamiltonian(&config.spec, v)?;
    let mut state = dense_neel(&config.spec)?;
    let t_end = config.end_time();
    let mut samples = Vec::new();
    let mut pending = config.sample_times().into_iter().peekable();
    let mut kept: Vec<JumpEvent> = Vec::new();
    let record_sample = |state: &DenseState| -> Result<Sample> {
        let values = evaluate_observables(&config.observables, state)?;
        Ok(Sample { time: state.time(), values, orthonormality_error: state.norm_error(), trace_error: 0.0 })
    };
    for event in record.events.iter().filter(|e| e.time <= t_end) {
        if event.site >= l {
            return Err(Error::RecordMismatch(format!("site {} outside the lattice", event.site)));
        }
        if event.time < state.time() {
            return Err(Error::RecordMismatch(format!("event time {} goes backwards", event.time)));
        }
        while let Some(&ts) = pending.peek() {
            if ts > event.time {
                break;
            }
            state = dense_evolve(&state, &h, ts - state.time())?;
            state.time = ts;
            samples.push(record_sample(&state)?);
            pending.next();
        }
        let t = event.time;
        state = dense_evolve(&state, &h, t - state.time())?;
        state.time = t;
        state = dense_measure(&state, event.site)?;
        kept.push(*event);
    }
    for ts in pending {
        state = dense_evolve(&state, &h, ts - state.time())?;
        state.time = ts;
        samples.push(record_sample(&state)?);
    }
    Ok(TrajectoryOutput {
        names: config.observable_names(),
        samples,
        record: JumpRecord { events: kept, seed: record.seed, trajectory_id: record.trajectory_id },
    })
}

/// Largest deviation between two sampled series with matching layout.
pub fn max_sample_deviation(a: &TrajectoryOutput, b: &TrajectoryOutput) -> Result<f64> {
    if a.names != b.names || a.samples.len() != b.samples.len() {
        return Err(Error::RecordMismatch("sample layouts differ".into()));
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.samples.iter().zip(&b.samples) {
        if (x.time - y.time).abs() > 1e-12 {
            return Err(Error::RecordMismatch(format!("sample times {} and {} differ", x.time, y.time)));
        }
        for (p, q) in x.values.iter().zip(&y.values) {
            worst = worst.max((p - q).abs());
        }
    }
    Ok(worst)
}

/// Summary of a Gaussian-vs-dense comparison, serialisable for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub jumps: usize,
    pub samples: usize,
    pub max_observable_deviation: f64,
}
