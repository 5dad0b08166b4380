//! The variational core: energies, projection, causal ordering, training
//! loops, and spectrum evaluation.

pub mod chain;
pub mod energy;
pub mod evaluate;
pub mod project;
pub mod train;

pub use energy::{
    batch_eigenvalue, batch_rayleigh, dirichlet_energy, dirichlet_rayleigh, elastic_energy,
    elastic_rayleigh, rayleigh_sort,
};
pub use evaluate::{evaluate_on_points, evaluate_spectrum, eval_chain_at, ChainState, Evaluation, Spectrum};
pub use project::{gram_schmidt_project, normalize, ProjectionCoefficients};
pub use train::{train_shape_space, train_single_shape, FilterMode, SortKey, SortMode, TrainConfig};
