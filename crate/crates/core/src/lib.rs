//! Monitored long-range free fermions.
//!
//! This crate simulates spinless fermions on a ring with hopping that decays
//! as `1/r^α`, subject to continuous projective monitoring of the local
//! occupation `n_j`. Because the Hamiltonian is quadratic and the measured
//! operators are occupations, every trajectory stays a Slater determinant and
//! is described by an `L × N` orbital matrix. Entanglement follows from the
//! eigenvalues of restricted correlation matrices.
//!
//! The crate is organised by role:
//!
//! - [`model`]: hopping matrix and the coupling block between a subsystem and
//!   its complement.
//! - [`gaussian`]: orbital-matrix states, correlation matrices, entropies.
//! - [`trajectory`]: the quantum-jump protocol and reproducible ensembles.
//! - [`observables`]: entanglement profiles, mutual information, CFT fits.
//! - [`scaling`]: crossing points, data collapses and size-scaling fits.
//! - [`bounds`]: exact norm of the bilinear boundary Hamiltonian, analytic
//!   upper bounds and the entropy growth-rate check.
//! - [`oracle`]: a dense fixed-particle-number reference implementation used
//!   to validate everything above for small systems.
//!
//! Sites are indexed from `0` throughout the API.
//!
//! ```
//! use monitored_fermions::prelude::*;
//!
//! let spec = LatticeSpec::new(8, 2.0).unwrap();
//! let h = build_hopping_matrix(&spec);
//! let mut state = neel_state(&spec).unwrap();
//! evolve_unitary(&mut state, &h, 0.5);
//! let s = state.entropy(&[0, 1, 2, 3]).unwrap();
//! assert!(s > 0.0);
//! ```

pub mod bounds;
pub mod error;
pub mod gaussian;
mod linalg;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod scaling;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};

/// Complex scalar used for orbital amplitudes.
pub type C64 = nalgebra::Complex<f64>;

pub mod prelude {
    pub use crate::bounds::{
        bilinear_norm, classify_threshold, lemma1_bound_bilinear, lemma1_bound_interacting,
        norm_scaling_series, BoundParameters, Family, NormClass, NormScalingSeries,
    };
    pub use crate::gaussian::{
        correlation_matrix, entanglement_entropy, neel_state, orthonormalize, CorrelationMatrix,
        GaussianState,
    };
    pub use crate::model::{
        build_boundary_block, build_hopping_matrix, pair_coupling, BoundaryBlock, LatticeSpec,
        SingleParticleHamiltonian,
    };
    pub use crate::observables::{
        cft_fit, entanglement_profile, mutual_information_far_sites,
        mutual_information_quarters, EntanglementProfile, EntropySource, Observable,
    };
    pub use crate::scaling::{
        bkt_collapse_fit, detect_crossing, log_fit, power_law_collapse_fit, power_law_fit,
        CollapseConfig, CurveFamily,
    };
    pub use crate::trajectory::{
        apply_measurement, evolve_unitary, run_ensemble, run_trajectory, sample_jump_time,
        select_measurement_site, Engine, JumpRecord, TrajectoryConfig,
    };
    pub use crate::{Error, Result, C64};
}
