//! Long-range hopping on a ring.
//!
//! Every site `j` hops to `j + r` for `r = 1, …, L/2` with amplitude `-1/r^α`
//! under periodic boundary conditions. The double sum is taken literally, so
//! the antipodal pair at distance `L/2` is reached from both of its sites and
//! carries weight `2/(L/2)^α`.
//!
//! For very large `α` the couplings beyond nearest neighbours underflow
//! towards zero; above [`DEFAULT_SHORT_RANGE_THRESHOLD`] they are set to
//! exactly zero so that the short-range limit is represented cleanly.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{real_symmetric_eigen, to_complex};
use crate::{Error, Result, C64};

/// Exponent above which only nearest-neighbour hopping is kept.
pub const DEFAULT_SHORT_RANGE_THRESHOLD: f64 = 500.0;

/// Chain size, decay exponent and particle number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    sites: usize,
    alpha: f64,
    particles: usize,
    short_range_threshold: f64,
}

impl LatticeSpec {
    /// Half-filled ring of `sites` sites.
    pub fn new(sites: usize, alpha: f64) -> Result<Self> {
        Self::with_particles(sites, alpha, sites / 2)
    }

    pub fn with_particles(sites: usize, alpha: f64, particles: usize) -> Result<Self> {
        if sites < 2 || sites % 2 != 0 {
            return Err(Error::InvalidLattice(format!(
                "sites must be a positive even integer, got {sites}"
            )));
        }
        if !(alpha >= 0.0) || alpha.is_nan() {
            return Err(Error::InvalidLattice(format!(
                "alpha must be non-negative, got {alpha}"
            )));
        }
        if particles == 0 || particles > sites {
            return Err(Error::InvalidLattice(format!(
                "particle number {particles} must lie in 1..={sites}"
            )));
        }
        Ok(Self {
            sites,
            alpha,
            particles,
            short_range_threshold: DEFAULT_SHORT_RANGE_THRESHOLD,
        })
    }

    pub fn with_short_range_threshold(mut self, threshold: f64) -> Self {
        self.short_range_threshold = threshold;
        self
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn short_range_threshold(&self) -> f64 {
        self.short_range_threshold
    }

    /// Ring distance between two sites.
    pub fn distance(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        d.min(self.sites - d)
    }

    /// Weight of a single `r`-term of the double sum.
    fn term(&self, r: usize) -> f64 {
        if self.alpha > self.short_range_threshold {
            if r == 1 {
                1.0
            } else {
                0.0
            }
        } else {
            (r as f64).powf(-self.alpha)
        }
    }
}

/// Total hopping weight between sites `i` and `j` (the caller applies the
/// minus sign).
///
/// The pair is reached once as `(min, min + d)` when `d ≤ L/2` and once as
/// `(max, max + L - d)` when `L - d ≤ L/2`, which double counts `d = L/2`.
pub fn pair_coupling(spec: &LatticeSpec, i: usize, j: usize) -> Result<f64> {
    let l = spec.sites;
    for site in [i, j] {
        if site >= l {
            return Err(Error::SiteOutOfRange { site, sites: l });
        }
    }
    if i == j {
        return Err(Error::Domain(format!("pair_coupling needs distinct sites, got {i} twice")));
    }
    let d = i.abs_diff(j);
    let mut weight = 0.0;
    if d <= l / 2 {
        weight += spec.term(d);
    }
    if l - d <= l / 2 {
        weight += spec.term(l - d);
    }
    Ok(weight)
}

/// Spectral decomposition `h = V diag(E) Vᵀ` of the hopping matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub energies: DVector<f64>,
    pub vectors: DMatrix<f64>,
    pub(crate) vectors_c: DMatrix<C64>,
}

/// Real symmetric single-particle Hamiltonian with a lazily cached spectrum.
#[derive(Debug)]
pub struct SingleParticleHamiltonian {
    h: DMatrix<f64>,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for SingleParticleHamiltonian {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self { h: self.h.clone(), spectrum }
    }
}

impl SingleParticleHamiltonian {
    pub fn from_matrix(h: DMatrix<f64>) -> Result<Self> {
        if !h.is_square() {
            return Err(Error::Domain("hopping matrix must be square".into()));
        }
        if h != h.transpose() {
            return Err(Error::Domain("hopping matrix must be symmetric".into()));
        }
        Ok(Self { h, spectrum: OnceLock::new() })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn sites(&self) -> usize {
        self.h.nrows()
    }

    /// Spectral decomposition, computed on first use and shared afterwards.
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            let (energies, vectors) = real_symmetric_eigen(self.h.clone());
            let vectors_c = to_complex(&vectors);
            Spectrum { energies, vectors, vectors_c }
        })
    }

    /// `exp(-i h τ)` as a dense matrix.
    pub fn propagator(&self, tau: f64) -> DMatrix<C64> {
        let s = self.spectrum();
        let l = self.sites();
        let phases: Vec<C64> = s.energies.iter().map(|&e| C64::from_polar(1.0, -e * tau)).collect();
        let scaled = DMatrix::from_fn(l, l, |i, k| s.vectors_c[(i, k)] * phases[k]);
        scaled * s.vectors_c.transpose()
    }
}

/// `h_ij = -pair_coupling(i, j)` off the diagonal, zero on it.
pub fn build_hopping_matrix(spec: &LatticeSpec) -> SingleParticleHamiltonian {
    let l = spec.sites;
    let mut h = DMatrix::zeros(l, l);
    for i in 0..l {
        for j in (i + 1)..l {
            // both indices are in range and distinct
            let w = -pair_coupling(spec, i, j).expect("valid pair");
            h[(i, j)] = w;
            h[(j, i)] = w;
        }
    }
    SingleParticleHamiltonian { h, spectrum: OnceLock::new() }
}

/// Couplings between `A = {0, …, ℓ-1}` and its complement `B`.
///
/// `m[(j, k)]` couples site `j` of `A` to site `ℓ + k` of `B`. The boundary
/// Hamiltonian is the bilinear form `Σ m_jk (c_j† c_{ℓ+k} + h.c.)`, i.e. the
/// single-particle matrix `[[0, M], [Mᵀ, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryBlock {
    m: DMatrix<f64>,
    ell: usize,
    spec: LatticeSpec,
}

impl BoundaryBlock {
    /// Wraps an arbitrary coupling block; `spec` supplies `L` and `α`.
    pub fn from_matrix(spec: &LatticeSpec, m: DMatrix<f64>) -> Result<Self> {
        let ell = m.nrows();
        if ell == 0 || ell + m.ncols() != spec.sites {
            return Err(Error::Domain(format!(
                "block of shape {}x{} does not split a {}-site lattice",
                m.nrows(),
                m.ncols(),
                spec.sites
            )));
        }
        Ok(Self { m, ell, spec: *spec })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    /// Embeds the block as the `L × L` single-particle matrix of `H_AB`.
    pub fn single_particle_matrix(&self) -> DMatrix<f64> {
        let l = self.spec.sites;
        let mut k = DMatrix::zeros(l, l);
        for j in 0..self.ell {
            for b in 0..self.m.ncols() {
                k[(j, self.ell + b)] = self.m[(j, b)];
                k[(self.ell + b, j)] = self.m[(j, b)];
            }
        }
        k
    }

    /// Smallest `g` with `|M_jk| ≤ g / dist(j, k)^α` for every entry.
    pub fn g_max(&self) -> f64 {
        let mut g: f64 = 0.0;
        for j in 0..self.ell {
            for b in 0..self.m.ncols() {
                let d = self.spec.distance(j, self.ell + b) as f64;
                g = g.max(self.m[(j, b)].abs() * d.powf(self.spec.alpha));
            }
        }
        g
    }
}

pub fn build_boundary_block(spec: &LatticeSpec, ell: usize) -> Result<BoundaryBlock> {
    let l = spec.sites;
    if ell == 0 || ell > l / 2 {
        return Err(Error::Domain(format!("subsystem size {ell} must lie in 1..={}", l / 2)));
    }
    let m = DMatrix::from_fn(ell, l - ell, |j, b| {
        -pair_coupling(spec, j, ell + b).expect("sites of A and B are distinct")
    });
    Ok(BoundaryBlock { m, ell, spec: *spec })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(l: usize, alpha: f64) -> LatticeSpec {
        LatticeSpec::new(l, alpha).unwrap()
    }

    #[test]
    fn coupling_examples() {
        // sites are zero-based here
        assert_eq!(pair_coupling(&spec(4, 1.0), 0, 1).unwrap(), 1.0);
        assert_eq!(pair_coupling(&spec(4, 1.0), 0, 2).unwrap(), 1.0);
        assert!((pair_coupling(&spec(8, 2.0), 0, 3).unwrap() - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn coupling_rejects_same_site() {
        assert!(matches!(pair_coupling(&spec(4, 1.0), 2, 2), Err(Error::Domain(_))));
        assert!(matches!(
            pair_coupling(&spec(4, 1.0), 0, 4),
            Err(Error::SiteOutOfRange { .. })
        ));
    }

    #[test]
    fn lattice_validation() {
        assert!(LatticeSpec::new(5, 1.0).is_err());
        assert!(LatticeSpec::new(0, 1.0).is_err());
        assert!(LatticeSpec::new(4, -1.0).is_err());
        assert!(LatticeSpec::with_particles(4, 1.0, 5).is_err());
        assert!(LatticeSpec::with_particles(4, 1.0, 0).is_err());
        assert_eq!(LatticeSpec::new(6, 1.0).unwrap().particles(), 3);
    }

    #[test]
    fn hopping_matrix_l4() {
        let h = build_hopping_matrix(&spec(4, 1.0));
        for i in 0..4 {
            for j in 0..4 {
                let expected = if i == j { 0.0 } else { -1.0 };
                assert_eq!(h.matrix()[(i, j)], expected);
            }
        }
    }

    #[test]
    fn short_range_limit() {
        let h = build_hopping_matrix(&spec(4, 1000.0));
        assert_eq!(h.matrix()[(0, 1)], -1.0);
        assert_eq!(h.matrix()[(0, 3)], -1.0);
        assert!(h.matrix()[(0, 2)].abs() < 1e-12);
    }

    #[test]
    fn boundary_block_examples() {
        let b = build_boundary_block(&spec(4, 1000.0), 2).unwrap();
        let m = b.matrix();
        let strong: Vec<_> = m.iter().filter(|x| (**x + 1.0).abs() < 1e-12).collect();
        assert_eq!(strong.len(), 2);
        // bonds 2-3 and 1-4 in one-based labels
        assert_eq!(m[(1, 0)], -1.0);
        assert_eq!(m[(0, 1)], -1.0);
        assert!(m[(0, 0)].abs() < 1e-12 && m[(1, 1)].abs() < 1e-12);

        let b = build_boundary_block(&spec(8, 0.0), 4).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let expected = if j == k { -2.0 } else { -1.0 };
                assert_eq!(b.matrix()[(j, k)], expected);
            }
        }

        let b = build_boundary_block(&spec(6, 1.3), 3).unwrap();
        assert_eq!(b.matrix().shape(), (3, 3));
        assert!(build_boundary_block(&spec(6, 1.3), 4).is_err());
        assert!(build_boundary_block(&spec(6, 1.3), 0).is_err());
    }

    #[test]
    fn g_max_counts_antipodal_pair() {
        let b = build_boundary_block(&spec(16, 1.7), 8).unwrap();
        assert!((b.g_max() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn spectrum_is_cached() {
        let h = build_hopping_matrix(&spec(8, 1.5));
        let a = h.spectrum() as *const Spectrum;
        let b = h.spectrum() as *const Spectrum;
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn coupling_is_symmetric(l in (2usize..20).prop_map(|x| 2 * x), alpha in 0.0f64..6.0, i in 0usize..40, j in 0usize..40) {
            let s = spec(l, alpha);
            let (i, j) = (i % l, j % l);
            prop_assume!(i != j);
            prop_assert_eq!(pair_coupling(&s, i, j).unwrap(), pair_coupling(&s, j, i).unwrap());
        }

        #[test]
        fn hopping_matrix_is_exactly_symmetric(l in (2usize..16).prop_map(|x| 2 * x), alpha in 0.0f64..4.0) {
            let h = build_hopping_matrix(&spec(l, alpha));
            prop_assert_eq!(h.matrix(), &h.matrix().transpose());
        }

        #[test]
        fn coupling_decreases_with_alpha(l in (3usize..16).prop_map(|x| 2 * x), a in 0.0f64..5.0, da in 0.0f64..3.0, d in 2usize..32) {
            let d = 2 + d % (l / 2 - 1);
            let lo = pair_coupling(&spec(l, a + da), 0, d).unwrap();
            let hi = pair_coupling(&spec(l, a), 0, d).unwrap();
            prop_assert!(lo <= hi);
        }

        #[test]
        fn blocks_reassemble_hopping_matrix(l in (2usize..12).prop_map(|x| 2 * x), alpha in 0.0f64..4.0, ell in 1usize..12) {
            let s = spec(l, alpha);
            let ell = 1 + ell % (l / 2);
            let h = build_hopping_matrix(&s);
            let block = build_boundary_block(&s, ell).unwrap();
            let mut rebuilt = block.single_particle_matrix();
            for i in 0..l {
                for j in 0..l {
                    if i != j && ((i < ell) == (j < ell)) {
                        rebuilt[(i, j)] = -pair_coupling(&s, i, j).unwrap();
                    }
                }
            }
            prop_assert_eq!(&rebuilt, h.matrix());
        }
    }
}
