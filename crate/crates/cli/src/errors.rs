//! Exit-code classification of failures.

use std::fmt;

use stokeslab::exponents::ExponentError;
use stokeslab::formal::FormalError;
use stokeslab::io::IoError;
use stokeslab::iso::IsoError;
use stokeslab::monodromy::MonodromyError;
use stokeslab::rh::RhError;
use stokeslab::stokes::StokesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Validation,
    Numerical,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Validation => 2,
            Kind::Numerical => 3,
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Usage => "usage error",
            Kind::Validation => "validation failure",
            Kind::Numerical => "numerical failure",
        })
    }
}

pub fn usage(e: impl Into<anyhow::Error>) -> anyhow::Error {
    e.into().context(Kind::Usage)
}

/// Untagged errors (unreadable files, bad JSON) count as usage errors.
pub fn kind_of(e: &anyhow::Error) -> Kind {
    e.downcast_ref::<Kind>().copied().unwrap_or(Kind::Usage)
}

pub trait Classify {
    fn kind(&self) -> Kind;
}

impl Classify for ExponentError {
    fn kind(&self) -> Kind {
        Kind::Validation
    }
}

impl Classify for StokesError {
    fn kind(&self) -> Kind {
        Kind::Validation
    }
}

impl Classify for FormalError {
    fn kind(&self) -> Kind {
        Kind::Validation
    }
}

impl Classify for IoError {
    fn kind(&self) -> Kind {
        match self {
            IoError::Formal(e) => e.kind(),
            IoError::Json(_) => Kind::Usage,
            _ => Kind::Validation,
        }
    }
}

impl Classify for MonodromyError {
    fn kind(&self) -> Kind {
        match self {
            MonodromyError::Singular { .. } | MonodromyError::DegenerateOrbit => Kind::Numerical,
            _ => Kind::Validation,
        }
    }
}

impl Classify for RhError {
    fn kind(&self) -> Kind {
        match self {
            RhError::Input(_)
            | RhError::NotStarShaped
            | RhError::IrregularInfinity
            | RhError::PathTooClose { .. }
            | RhError::Formal(_)
            | RhError::Stokes(_) => Kind::Validation,
            RhError::Monodromy(e) => e.kind(),
            _ => Kind::Numerical,
        }
    }
}

impl Classify for IsoError {
    fn kind(&self) -> Kind {
        match self {
            IsoError::BadPath(_) | IsoError::NonFuchsianInput => Kind::Validation,
            IsoError::Rh(e) => e.kind(),
            IsoError::Monodromy(e) => e.kind(),
            _ => Kind::Numerical,
        }
    }
}

/// Tags a library error with its exit-code class.
pub fn tag<E>(e: E) -> anyhow::Error
where
    E: Classify + std::error::Error + Send + Sync + 'static,
{
    let kind = e.kind();
    anyhow::Error::new(e).context(kind)
}
