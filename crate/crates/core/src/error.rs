use thiserror::Error;

use crate::parser::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("negative concentration {value:e} for species {species}")]
    NegativeConcentration { species: usize, value: f64 },

    #[error("conserved mass {label} = {value} is not strictly positive")]
    NonPositiveMass { label: String, value: f64 },

    #[error("inconsistent masses: M12 + M34 = {lhs} but M14 + M32 = {rhs}")]
    InconsistentMasses { lhs: f64, rhs: f64 },

    /// The Wegscheider conditions fail: `W mu = ln(kf/kb)` has no solution.
    #[error("no detailed-balance equilibrium exists (Wegscheider residual {residual:e})")]
    NoDetailedBalance { residual: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("state is not a detailed-balance equilibrium (relative residual {residual:e})")]
    NotEquilibrium { residual: f64 },

    #[error("operator is not symmetric in the weighted inner product (asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("network is not the four-species system A1 + A3 <-> A2 + A4")]
    NotFourSpecies,

    #[error("negative concentration {value:e} in species {species}, cell {cell} at t = {t}")]
    NonPositivity {
        species: String,
        cell: usize,
        t: f64,
        value: f64,
    },

    #[error("invalid initial data: {0}")]
    InitialData(String),

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error("decay fit: {0}")]
    Fit(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl Error {
    /// Failures of a numerical method, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NoDetailedBalance { .. }
                | Error::NewtonDivergence { .. }
                | Error::NonPositivity { .. }
                | Error::NotSymmetric { .. }
                | Error::NotEquilibrium { .. }
                | Error::Fit(_)
        )
    }
}
