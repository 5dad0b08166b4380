//! Downstream consumers of the differentiable spectrum.

pub mod crossover;
pub mod optimize;
pub mod transfer;

pub use crossover::{axis_path, crossover_scan, CrossoverScan};
pub use optimize::{optimize_shape_for_eigenvalues, EigenvalueTarget, OptimizationTrace, OptimizeConfig};
pub use transfer::{project_solution, reconstruct_solution, transfer_solution, TransferCoefficients};
