use thiserror::Error;

use crate::linalg::ComplexMatrix;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid matrix shape: {0}")]
    InvalidShape(String),

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |m - m†| = {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("eigensolver failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("ensemble cardinality {m} is below the rank {rank} of the state")]
    RankTooSmall { m: usize, rank: usize },

    #[error("bad partition: {0}")]
    BadPartition(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid optimizer configuration: {0}")]
    ConfigInvalid(String),

    #[error("map is not unital (max |α(1) - 1| = {deviation:.3e})")]
    MapNotUnital { deviation: f64 },

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("intertwiner is not well defined: {detail}")]
    WellDefinednessFailure { detail: String, element: Box<ComplexMatrix> },
}
