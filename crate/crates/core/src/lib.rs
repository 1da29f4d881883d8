//! Exact Gromov-Hausdorff computations on finite metric spaces and Hausdorff
//! geodesics between compact subsets of the real line.

pub mod correspondence;
pub mod geodesic;
pub mod harness;
pub mod intervals;
pub mod metric;
pub mod partition;
pub mod solver;

pub use correspondence::{distortion, enumerate_correspondences, gh_exact_bruteforce, Correspondence, Relation};
pub use metric::{random_general_position, FiniteMetricSpace};
pub use solver::{gh_exact, gh_lower_bound, GhResult};
