//! Stability of random optimization problems under resampling perturbations.
//!
//! The crate provides exact solvers for seven families of random optimization
//! problems (Euclidean TSP/MST, optimization on weighted complete graphs,
//! random assignment, SK and Edwards-Anderson spin glasses, branching random
//! walks, Wigner and Wishart extreme eigenpairs), the machinery to perturb
//! their inputs block by block, and finite-metric statistics (packing and
//! covering numbers) of the resulting optimizer clouds and near-optimal sets.

pub mod brw;
pub mod error;
pub mod euclidean;
pub mod experiment;
pub mod graph;
pub mod law;
pub mod markov;
pub mod matrix;
pub mod metric;
pub mod problem;
pub mod seed;
pub mod solution;
pub mod spin;
pub mod stats;
pub mod weighted;

pub use error::{Error, Result};
pub use metric::{CoverCount, CoverReport, SolutionCloud};
pub use problem::{
    Family, FamilyKind, InputLaw, InputVector, NearOptimalSet, PerturbationScheme,
    ProblemInstance, SchemeVariant, WindowRule,
};
pub use solution::{Encoding, SolutionPoint};
pub use stats::Summary;
