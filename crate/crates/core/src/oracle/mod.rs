//! Ground-truth references: analytic spectra, discrete operators on meshes,
//! a dense symmetric eigensolver, and sign-resolved mode matching.

pub mod analytic;
pub mod cotan;
pub mod eig;
pub mod fem;
pub mod matching;
pub mod mesh;

pub use analytic::{analytic_rectangle_modes, interval_eigenvalue, interval_mode};
pub use cotan::cotan_laplacian;
pub use eig::{dense_sym_eig, OracleModes, OracleSource};
pub use fem::fem_elastic_stiffness;
pub use matching::{compare_model_to_mesh, greedy_match, mode_match, OracleComparison};
pub use mesh::{disk_mesh, rect_grid_mesh, TriMesh};
