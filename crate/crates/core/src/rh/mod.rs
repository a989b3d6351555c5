//! Numerical Riemann-Hilbert map: from a rational connection to its
//! generalized monodromy data.

pub mod assemble;
pub mod connection;
pub mod fixtures;
pub mod local;
pub mod path;
pub mod transport;

use thiserror::Error;

use crate::formal::FormalError;
use crate::monodromy::MonodromyError;
use crate::scalar::C64;
use crate::stokes::StokesError;

pub use connection::{Location, MarkedPoint, Pole, RationalConnection};
pub use assemble::{
    full_monodromy_data, loop_monodromies, loop_order, sector_fundamental_matrix, stokes_matrix, PointCheck, RhOptions,
    RhResult, SectorSolution,
};
pub use local::{local_exponents, LocalSolution};
pub use path::{Path, Piece};
pub use transport::{trace_integral, transport, Transport, TransportOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RhError {
    #[error("invalid connection: {0}")]
    Input(String),
    #[error("path passes within {distance:e} of a pole at {z}")]
    PathTooClose { z: C64, distance: f64 },
    #[error("step size collapsed to {step:e} at {z}")]
    ToleranceNotMet { z: C64, step: f64 },
    #[error("no matching radius reaches the asymptotic tolerance at point {point}")]
    MatchingRadiusNotFound { point: usize },
    #[error("Stokes matrix {k} at point {point}: entry ({row},{col}) is {value:e} off its pattern")]
    SupportViolation { point: usize, k: usize, row: usize, col: usize, value: f64 },
    #[error("irregular singularity at infinity is not supported for Stokes data")]
    IrregularInfinity,
    #[error("marked points are not visible from the base point along disjoint segments")]
    NotStarShaped,
    #[error("{0} is numerically singular")]
    Singular(String),
    #[error(transparent)]
    Formal(#[from] FormalError),
    #[error(transparent)]
    Stokes(#[from] StokesError),
    #[error(transparent)]
    Monodromy(#[from] MonodromyError),
}
