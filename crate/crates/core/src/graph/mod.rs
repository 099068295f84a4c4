//! Kernel integrals on point clouds: exact radius search and the averaged
//! matrix-valued kernel transform used by graph neural operators.

mod integral;
mod search;

pub use integral::{kernel_integral, FnKernel, IntegralOutput, Kernel, PointCloud};
pub use search::{radius_search, NeighborIndex};
