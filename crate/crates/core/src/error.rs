use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("site {0} appears more than once in the subset")]
    DuplicateSite(usize),
    #[error("site {site} out of range for a lattice of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },
    #[error("correlation eigenvalue {0} lies outside [0, 1] beyond tolerance")]
    NumericalConsistency(f64),
    #[error("orbital matrix is rank deficient")]
    DegenerateState,
    #[error("measured site {site} has occupation {occupation:e}")]
    EmptySiteMeasurement { site: usize, occupation: f64 },
    #[error("partition error: {0}")]
    Partition(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("no convergence after {0} iterations")]
    NonConvergence(usize),
    #[error("dimension cap exceeded: {0}")]
    DimensionCap(String),
    #[error("jump record does not match configuration: {0}")]
    RecordMismatch(String),
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
