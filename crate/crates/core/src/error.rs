use thiserror::Error;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("lattice has no physical spacings")]
    MissingSpacings,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("site count mismatch: {0} vs {1}")]
    SiteMismatch(usize, usize),
    #[error("atoms {0} and {1} coincide")]
    CoincidentAtoms(usize, usize),
    #[error("{sites} sites exceed the state-vector cap of {cap}")]
    TooManySites { sites: usize, cap: usize },
    #[error("diagonalization failed to converge: {0}")]
    NoConvergence(String),
    #[error("norm drift {0:e} exceeds tolerance")]
    NormDrift(f64),
    #[error("spin coupling changed sign during the loop at iteration {iteration}: J = ({jx}, {jy})")]
    CouplingSignFlip { iteration: usize, jx: f64, jy: f64 },
    #[error("SPAM errors already applied to this shot set")]
    SpamAlreadyApplied,
    #[error("readout correction matrix is singular (eps + eps' = {0})")]
    SingularCorrection(f64),
    #[error("time grid: {0}")]
    TimeGrid(String),
    #[error("noise instance {index} failed: {source}")]
    Instance {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("U/t_x = {u}: {source}")]
    AtInteraction {
        u: f64,
        #[source]
        source: Box<Error>,
    },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
