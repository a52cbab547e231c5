//! Spectral diagnostics for periodic, incompressible 3-d velocity fields.
//!
//! The crate provides the pieces needed to study scale-by-scale energy
//! transfer on the torus: a pseudo-spectral substrate (FFT, derivatives,
//! Leray projection), a dyadic frequency decomposition with smooth radial
//! cutoffs, Besov-type regularity estimators, compactly supported
//! mollifiers, the anisotropic decomposition of the resolved energy flux,
//! deterministic field generators, and a Galerkin-truncated Euler /
//! Navier-Stokes integrator.
//!
//! All numerics are generic over the scalar type through [`scalar::Scalar`];
//! the concrete aliases below pin the double-precision instantiation that
//! the command line tools and the file format use.

pub mod besov;
pub mod bump;
pub mod dfx;
pub mod dyadic;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod fit;
pub mod flux;
pub mod generators;
pub mod grid;
pub mod mollifier;
pub mod oracle;
pub mod scalar;
pub mod spectral;
pub mod suites;

pub use error::{Error, Result};

/// Scalar type used by the CLI, the acceptance suites and the file format.
pub type Real = f64;

pub type GridSpec = grid::GridSpec<Real>;
pub type ScalarField = field::ScalarField<Real>;
pub type VectorField = field::VectorField<Real>;
pub type SpectralField = field::SpectralField<Real>;
pub type DyadicPartition = dyadic::DyadicPartition<Real>;
