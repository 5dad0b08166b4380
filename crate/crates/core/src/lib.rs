//! Variational eigenanalysis of Laplace and linear-elasticity operators over
//! continuously parameterized shape families.
//!
//! Eigenfunctions are represented as neural fields (one MLP per mode) trained
//! by minimizing operator energy under orthogonality and unit-norm constraints
//! enforced by a projection chain. All domain integrals are Monte Carlo
//! estimates over rejection-sampled interior points, so a shape family only
//! has to expose an inside/outside indicator.
//!
//! Crate layout:
//! - [`autodiff`]: batched tape with forward spatial tangents and a reverse
//!   pass over the tangent-carrying program (mixed second-order derivatives).
//! - [`shapespace`]: shape family trait, the by-name registry, cubature and
//!   shape-code sampling.
//! - [`field`]: positional encoding, per-mode MLPs, hard-coded zero modes,
//!   model (de)serialization.
//! - [`spectral`]: energies, Gram-Schmidt projection with causal gradient
//!   filtering, shape-dependent causal sorting, training loops, spectrum
//!   evaluation.
//! - [`oracle`]: analytic spectra, cotangent Laplacian and linear-triangle
//!   elastic FEM on meshes, a dense symmetric eigensolver, mode matching.
//! - [`apps`]: eigenvalue-matching shape optimization, solution transfer
//!   across shapes, crossover detection along shape-space paths.

pub mod apps;
pub mod autodiff;
pub mod csvio;
pub mod error;
pub mod field;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod shapespace;
pub mod spectral;

pub use error::{Error, Result};
