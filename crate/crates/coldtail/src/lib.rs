//! Numerical kinetic theory for the cold tail of a shock wave.
//!
//! The library evaluates the Boltzmann collision operator for power-law
//! interaction potentials (exponent `s > 2`, kernel exponent
//! `γ = (s−5)/(s−1)`) on a truncated uniform velocity grid, and builds the
//! three self-similar reductions of the stationary shock-tail problem on top
//! of it:
//!
//! * **hard** potentials (`s > 5`, `γ > 0`) — algebraic decay `|x|^{3λ}` with
//!   `λ = 1/γ` fixed by power balancing,
//! * **soft** potentials (`s < 5`, `γ < 0`) — the same reduction in the
//!   shifted coordinate `|x − x*|`, with compact support on the cold side,
//! * **Maxwell** molecules (`s = 5`, `γ = 0`) — exponential ansatz with `λ`
//!   left as a nonlinear eigenvalue, plus the equivalent two-time relaxation
//!   equation `∂_t K + ∂_τ K = Q[K,K]`.
//!
//! Module map:
//!
//! * [`model`] — interaction models, kernel exponent map, collision geometry;
//! * [`phase`] — velocity grids, distributions, moments, entropy, field I/O;
//! * [`collide`] — direct-quadrature oracle and fast spectral evaluation of
//!   `Q(f,f)`, with conservative projection;
//! * [`selfsim`] — ansatz bookkeeping: exponent balance, reconstruction,
//!   reduced-equation residuals, and the moment identities;
//! * [`evolve`] — homogeneous relaxation, marching of the reduced equation in
//!   the logarithmic variable `ρ`, the split two-time solver, and the Maxwell
//!   eigenvalue search;
//! * [`shockctl`] — configuration, CLI subcommands, and result serialization.

pub mod collide;
pub mod evolve;
pub mod model;
pub mod phase;
pub mod selfsim;
pub mod shockctl;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    /// Configuration file could not be parsed or failed cross-field validation.
    #[error("config error: {0}")]
    Config(String),
    /// A solver produced non-finite values or otherwise failed numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// A verification check measured a value outside its tolerance.
    #[error("verification failure: {0}")]
    Verification(String),
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
