//! Numerics for open optical cavities coupled to external channels and
//! absorbing/amplifying media.
//!
//! The cavity is described by a set of interior mode frequencies ω_λ and
//! frequency-resolved coupling amplitudes 𝒲_λm(ω) to M scattering channels.
//! Everything observable derives from the non-Hermitian response matrix
//!
//! ```text
//! D_λλ′(ω) = (ω − ω_λ) δ_λλ′ + Δ_λλ′(ω) + iπ Σ_λλ′(ω),
//! Σ(ω)     = 𝒲𝒲† + 𝒦𝒦† − ΓΓ†,
//! ```
//!
//! where Δ is the principal-value level shift and 𝒦, Γ couple the modes to
//! absorbing and amplifying media. The modules build on each other:
//!
//! * [`spectrum`] — mode spectra, coupling models, and the assembled cavity model
//! * [`response`] — Δ(ω), D(ω), and the inverse response (Green's function)
//! * [`scattering`] — S(ω), the input–output transforms U and V, and sweeps
//! * [`resonances`] — effective Hamiltonian, complex poles, biorthogonal modes
//! * [`langevin`] — mode dynamics driven by thermal/vacuum noise
//! * [`emission`] — spontaneous-emission rates of an embedded dipole
//! * [`rmt`] — random-matrix ensembles and spectral statistics
//! * [`toy1d`] — an exactly solvable 1D cavity used as an end-to-end oracle

pub mod emission;
pub mod error;
pub mod langevin;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod response;
pub mod resonances;
pub mod rmt;
pub mod scattering;
pub mod spectrum;
pub mod toy1d;

pub use error::Error;

/// Shorthand used across the crate.
pub type C64 = num_complex::Complex64;
pub type Result<T> = std::result::Result<T, Error>;
