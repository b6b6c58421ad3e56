//! Error type shared by all simulator modules.

use thiserror::Error;

/// Errors surfaced by state-space construction, optical elements, atom
/// interactions, measurements, and experiment pipelines.
#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("subsystem name `{0}` registered twice")]
    DuplicateSubsystem(String),

    #[error("a state space needs at least one subsystem")]
    EmptySpace,

    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),

    #[error("subsystem `{name}` is a {found}, expected {expected}")]
    KindMismatch {
        name: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("states share subsystem `{0}`; tensor factors must be disjoint")]
    OverlappingSubsystems(String),

    #[error("basis ket does not conform to the state space: {0}")]
    MalformedKet(String),

    #[error("amplitude is not finite")]
    NonFiniteAmplitude,

    #[error("squared norm {0} outside (0, 1 + 1e-12]")]
    NormOutOfRange(f64),

    #[error("cannot normalize a state with zero norm")]
    ZeroNorm,

    #[error("post-selected event has zero probability")]
    ZeroProbability,

    #[error("mode `{mode}` would hold {needed} photons but is truncated at {max}")]
    TruncationOverflow { mode: String, needed: u32, max: u32 },

    #[error("beam-splitter convention is not unitary: {0}")]
    NonUnitaryConvention(String),

    #[error("atom `{atom}` already carries a set absorption flag; {action} is undefined there")]
    AbsorptionConflict { atom: String, action: &'static str },

    #[error("decay of atom `{atom}` would merge distinct branches; state already mixes its ground levels")]
    DecayConflict { atom: String },

    #[error("discarding absorbed branches leaves nothing; every history is blocked")]
    NothingRemains,

    #[error("density matrix is not a two-qubit state (got dims {0:?})")]
    NotTwoQubits(Vec<usize>),

    #[error("density matrix not positive semidefinite: min eigenvalue {0}")]
    NotPositive(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error("report failed its internal consistency check: {0}")]
    InvalidReport(String),
}

pub type Result<T> = std::result::Result<T, SimError>;
