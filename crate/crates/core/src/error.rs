use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Hilbert space dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("cannot normalize a zero or non-finite vector")]
    ZeroNorm,

    #[error("state is not normalized: squared norm {norm_sqr}")]
    NotNormalized { norm_sqr: f64 },

    #[error("operator is not Hermitian: max deviation {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("expectation value has imaginary residue {residue:e}")]
    ImaginaryResidue { residue: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("invalid projector set: {0}")]
    InvalidProjectors(String),

    #[error("projector set is incomplete: projectors cover {covered} of {dim} basis states")]
    IncompleteProjectors { covered: usize, dim: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("model variant mismatch: operation expects {expected}, spec has {found}")]
    VariantMismatch { expected: String, found: String },

    #[error("the Ito two-state law presupposes the fluctuation-dissipation relation; set fdr_enforced")]
    FdrNotEnforced,

    #[error("fluctuation-dissipation parameters conflict: {0}")]
    FdrConflict(String),

    #[error("colored noise has {found} channels but the projector set has {expected}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("expected {expected} Wiener increments, got {found}")]
    IncrementCount { expected: usize, found: usize },

    #[error("time step {dt} exceeds the stability bound tau/10 = {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("non-finite state at step {step} (trajectory {trajectory_index}, master seed {master_seed})")]
    NonFinite { step: usize, trajectory_index: u64, master_seed: u64 },

    #[error("energy rate requires a Hamiltonian")]
    MissingHamiltonian,

    #[error("sample is empty")]
    EmptySample,

    #[error("path of length {len} is too short for {lags} lags")]
    PathTooShort { len: usize, lags: usize },

    #[error("{unresolved} of {m} trajectories did not collapse; increase t_max")]
    TooManyUnresolved { unresolved: usize, m: usize },

    #[error("master equation invariant violated at step {step}: {reason}")]
    MasterInvariant { step: usize, reason: String },

    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    #[error("trajectory {index} failed: {source}")]
    Trajectory { index: u64, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
