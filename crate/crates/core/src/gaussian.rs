//! Slater-determinant states and their correlation matrices.
//!
//! A particle-number-conserving Gaussian state of `N` fermions on `L` sites is
//! `Π_m (Σ_j u_{j,m} c_j†) |vac⟩` with orthonormal columns of `u`. All
//! expectation values follow from the `L × L` projector `D = u u†`.
//!
//! Convention: `CorrelationMatrix` stores `D = u u†`, so that
//! `D[(i, j)] = Σ_m u_{i,m} u*_{j,m} = ⟨c_j† c_i⟩ = ⟨c_i† c_j⟩*`. Both index
//! orders share the same spectrum, hence the same entropies.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{binary_entropy_bits, hermitian_eigenvalues, orthonormality_error};
use crate::model::LatticeSpec;
use crate::{Error, Result, C64};

/// Window outside `[0, 1]` tolerated for correlation eigenvalues before
/// clamping.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-6;

/// Orbital matrix `u` (`L × N`) and the time it refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianState {
    u: DMatrix<C64>,
    time: f64,
}

impl GaussianState {
    /// Wraps an orbital matrix without checking orthonormality; see
    /// [`orthonormalize`] and [`GaussianState::orthonormality_error`].
    pub fn new(u: DMatrix<C64>, time: f64) -> Self {
        Self { u, time }
    }

    pub fn orbitals(&self) -> &DMatrix<C64> {
        &self.u
    }

    pub(crate) fn orbitals_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.u
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn sites(&self) -> usize {
        self.u.nrows()
    }

    pub fn particles(&self) -> usize {
        self.u.ncols()
    }

    /// `⟨n_j⟩ = Σ_m |u_{j,m}|²` for every site.
    pub fn occupations(&self) -> Vec<f64> {
        self.u.row_iter().map(|row| row.iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    pub fn occupation(&self, site: usize) -> f64 {
        self.u.row(site).iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entry of `u†u − I`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.u)
    }

    /// `|trace(u u†) − N|`.
    pub fn trace_error(&self) -> f64 {
        let tr: f64 = self.u.iter().map(|z| z.norm_sqr()).sum();
        (tr - self.particles() as f64).abs()
    }

    /// Projector `u u†` over the full lattice.
    pub fn projector(&self) -> DMatrix<C64> {
        &self.u * self.u.adjoint()
    }
}

/// Restricted correlation matrix together with the sites it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    d: DMatrix<C64>,
    sites: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn new(d: DMatrix<C64>, sites: Vec<usize>) -> Result<Self> {
        if !d.is_square() || d.nrows() != sites.len() {
            return Err(Error::Domain("correlation matrix shape does not match site list".into()));
        }
        Ok(Self { d, sites })
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.d
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn trace(&self) -> f64 {
        self.d.trace().re
    }

    /// Leading `k × k` block, i.e. the first `k` sites of the subset.
    pub fn leading(&self, k: usize) -> CorrelationMatrix {
        CorrelationMatrix {
            d: self.d.view((0, 0), (k, k)).into_owned(),
            sites: self.sites[..k].to_vec(),
        }
    }
}

pub(crate) fn check_subset(sites: &[usize], lattice: usize) -> Result<()> {
    let mut seen = HashSet::with_capacity(sites.len());
    for &s in sites {
        if s >= lattice {
            return Err(Error::SiteOutOfRange { site: s, sites: lattice });
        }
        if !seen.insert(s) {
            return Err(Error::DuplicateSite(s));
        }
    }
    if sites.is_empty() {
        return Err(Error::Domain("site subset is empty".into()));
    }
    Ok(())
}

/// Correlation matrix from a set of orbital rows (`rows[a]` is site `sites[a]`).
pub(crate) fn correlation_from_rows(rows: DMatrix<C64>, sites: &[usize]) -> CorrelationMatrix {
    let d = &rows * rows.adjoint();
    CorrelationMatrix { d, sites: sites.to_vec() }
}

/// Néel state: particle `m` sits on site `2m`.
pub fn neel_state(spec: &LatticeSpec) -> Result<GaussianState> {
    let l = spec.sites();
    if spec.particles() != l / 2 {
        return Err(Error::Config(format!(
            "the Néel state needs N = L/2 = {}, got N = {}",
            l / 2,
            spec.particles()
        )));
    }
    let mut u = DMatrix::zeros(l, l / 2);
    for m in 0..l / 2 {
        u[(2 * m, m)] = C64::new(1.0, 0.0);
    }
    Ok(GaussianState::new(u, 0.0))
}

/// Correlation matrix restricted to `sites` (in the given order).
pub fn correlation_matrix(state: &GaussianState, sites: &[usize]) -> Result<CorrelationMatrix> {
    check_subset(sites, state.sites())?;
    let rows = state.u.select_rows(sites);
    Ok(correlation_from_rows(rows, sites))
}

/// Entanglement entropy in bits from the spectrum of a restricted correlation
/// matrix.
pub fn entanglement_entropy(corr: &CorrelationMatrix) -> Result<f64> {
    let values = hermitian_eigenvalues(corr.d.clone());
    let mut s = 0.0;
    for nu in values {
        if nu < -EIGENVALUE_TOLERANCE || nu > 1.0 + EIGENVALUE_TOLERANCE {
            return Err(Error::NumericalConsistency(nu));
        }
        s += binary_entropy_bits(nu.clamp(0.0, 1.0));
    }
    Ok(s.max(0.0))
}

/// Converts an entropy in bits to nats.
pub fn bits_to_nats(bits: f64) -> f64 {
    bits * std::f64::consts::LN_2
}

/// Orthonormalises the orbitals while keeping their span.
///
/// Householder QR, with column phases chosen so that `R` has a positive real
/// diagonal; the result coincides with Gram–Schmidt applied column by column.
pub fn orthonormalize(state: &GaussianState) -> Result<GaussianState> {
    let n = state.particles();
    let qr = state.u.clone().qr();
    let r = qr.r();
    let scale = (0..n).map(|k| r[(k, k)].norm()).fold(0.0, f64::max);
    if scale == 0.0 || (0..n).any(|k| r[(k, k)].norm() <= 1e-12 * scale) {
        return Err(Error::DegenerateState);
    }
    let mut q = qr.q();
    for k in 0..n {
        let phase = r[(k, k)] / r[(k, k)].norm();
        for i in 0..q.nrows() {
            q[(i, k)] *= phase;
        }
    }
    Ok(GaussianState::new(q, state.time))
}
