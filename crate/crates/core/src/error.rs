use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("modulus {modulus} is not usable: {reason}")]
    InvalidModulus { modulus: u64, reason: &'static str },

    #[error("zero has no multiplicative inverse mod {modulus}")]
    NoInverse { modulus: u64 },

    #[error("moduli differ: {left} vs {right}")]
    ModulusMismatch { left: u64, right: u64 },

    #[error("interpolation nodes are not pairwise distinct")]
    DegenerateNodes,

    #[error("field modulus {modulus} too small: need at least {required} for {dimension}x{dimension} instances")]
    FieldTooSmall {
        modulus: u64,
        required: u64,
        dimension: usize,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("arity mismatch: {message}")]
    Arity { message: String },

    #[error("resource limit exceeded: {message}")]
    ResourceLimit { message: String },

    #[error("postselection impossible: the condition formula is unsatisfiable")]
    PostselectionImpossible,

    #[error("invalid approximation factor: {message}")]
    InvalidFactor { message: String },

    #[error("invalid probability parameter: {message}")]
    InvalidProbability { message: String },

    #[error("bad Merlin policy: {message}")]
    Policy { message: String },

    #[error("invalid matrix: {message}")]
    InvalidMatrix { message: String },

    #[error("invalid formula: {message}")]
    InvalidFormula { message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
