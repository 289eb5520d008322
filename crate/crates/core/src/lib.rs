//! Quadratic mass-action reaction-diffusion networks with detailed balance.
//!
//! The crate covers the whole pipeline from a network description to a
//! verified relaxation rate:
//!
//! - [`network`]: stoichiometric matrix, integer conservation basis, mass-action production
//! - [`parser`]: the `.rdn` text format
//! - [`equilibrium`]: conserved masses and detailed-balance equilibria
//! - [`linearised`]: the linearised reaction operator and the spectral gap of `D + L`
//! - [`solver`]: finite-volume Neumann discretization with IMEX and Strang stepping
//! - [`diagnostics`]: relative entropy, weighted norms, dissipation, decay fits
//! - [`io`]: snapshot and diagnostics CSV tables
//!
//! Numerics are generic over [`Real`] (`f32`/`f64`), and the stoichiometric
//! identities over [`Scalar`], which includes exact rationals. The aliases
//! below fix the scalar to `f64`.

// `!(x > 0)` is used on purpose so NaN is rejected with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod domain;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod linalg;
pub mod linearised;
pub mod network;
pub mod parser;
pub mod scalar;
pub mod solver;

pub use diagnostics::{
    entropy_dissipation, fit_decay_rate, relative_entropy, weighted_norm, DecayFit, DiagnosticsRow,
    DiagnosticsSeries,
};
pub use domain::{neumann_eigenvalues, Domain};
pub use equilibrium::{
    conserved_masses, detailed_balance_equilibrium, four_species_equilibrium, ConservedMasses,
    EquilibriumState,
};
pub use error::{Error, Result};
pub use linearised::{
    analytic_gap_bound_four_species, linearised_matrix, operator_spectral_gap, weighted_spectrum,
    LinearisedMatrix, ModeGap, SpectralGapReport,
};
pub use network::{
    conservation_basis, production_term, stoichiometric_matrix, validate_network, IntMatrix,
    Production, Reaction, ReactionNetwork, StoichiometryDecomposition, ValidationReport, Violation,
};
pub use parser::{parse_network, serialize_network, ParseError};
pub use scalar::{Real, Scalar};
pub use solver::{
    build_initial, build_laplacian, simulate, step, CosineMode, Grid, InitialSpec, NeumannLaplacian,
    RunSettings, Scheme, SimulationOutput, Simulator, State,
};
pub use io::{read_snapshot, read_table, write_snapshot, Table};

/// Crate version, written into CSV provenance headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Equilibrium = EquilibriumState<f64>;
pub type Masses = ConservedMasses<f64>;
pub type Linearised = LinearisedMatrix<f64>;
pub type SpectralGap = SpectralGapReport<f64>;
pub type Field = State<f64>;
pub type Mesh = Grid<f64>;
pub type Region = Domain<f64>;
pub type Initial = InitialSpec<f64>;
pub type Settings = RunSettings<f64>;
pub type Output = SimulationOutput<f64>;
pub type Series = DiagnosticsSeries<f64>;
