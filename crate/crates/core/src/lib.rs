//! Spectral solver for Schrödinger operators modified by attractive or
//! repulsive δ interactions.
//!
//! Given a base operator H₀ described by its spectral data (discrete levels,
//! continuum channels, optionally a closed-form Green's function), this crate
//! constructs the resolvent of H = H₀ − αδ via the Krein formula
//!
//! ```text
//! G(x,y|E) = G₀(x,y|E) + G₀(x,a|E) G₀(a,y|E) / Φ(E),
//! Φ(E)     = 1/α − G₀(a,a|E),
//! ```
//!
//! locates the rearranged bound states (zeros of Φ, interlaced with the
//! spectrum of H₀), builds bound and scattering eigenfunctions, evaluates
//! perturbative corrections through second order in the coupling, and handles
//! the renormalized (2D), multi-center, and curve-supported generalizations.
//!
//! Modules:
//! - [`spectral`]: spectral-data model for H₀ and a catalog of exactly known
//!   base problems (free line, reflectionless well, harmonic oscillator,
//!   flat 2-torus, free plane).
//! - [`greens`]: unperturbed Green's functions by closed form or eigenfunction
//!   expansion, boundary values across the continuum cut, energy derivatives.
//! - [`krein`]: single-center δ interaction — principal function, full Green's
//!   function, bound-state search, wavefunctions, scattering data.
//! - [`perturb`]: order-by-order perturbative energies and wavefunctions.
//! - [`renorm`]: renormalized point interactions in 2D (flat torus) with the
//!   coupling-constant flow.
//! - [`multicenter`]: N point centers via the matrix Krein formula.
//! - [`curve`]: δ interactions supported on curves in the plane.
//!
//! Default unit system is ħ = 2m = 1; both constants are configurable per
//! problem via [`spectral::UnitSystem`].

pub mod curve;
pub mod error;
pub mod greens;
pub mod krein;
pub mod multicenter;
pub mod perturb;
pub mod quad;
pub mod renorm;
pub mod rootfind;
pub mod special;
pub mod spectral;

pub use error::SolverError;
pub use spectral::{BaseProblem, Point, UnitSystem};

/// Complex energy argument. Physical bound-state queries use real values
/// below the continuum infimum; boundary values on the cut are reached via
/// the dedicated `greens::green0_boundary` entry point.
pub type Energy = num_complex::Complex64;
