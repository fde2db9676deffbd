//! Chebyshev-node Lagrange interpolation: 1-D barycentric bases, full tensor
//! and Smolyak sparse node grids, and the far-field kernel approximation
//! built from them.

mod basis;
mod farfield;
mod grid;

pub use basis::{barycentric_weights, chebyshev_nodes, eval_basis, ChebyshevBasis1D};
pub use farfield::{adaptive_node_count, far_field_apply, node_kernel_matrix, BoxRef};
pub use grid::{
    full_tensor_degree_for_budget, sparse_level_for_budget, GridLayout, GridScratch, NodeGrid,
    DEFAULT_NODE_CAP,
};

pub(crate) use farfield::{anterpolate_block, interpolate_block_add};
