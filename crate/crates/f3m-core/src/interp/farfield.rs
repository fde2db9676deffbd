//! Far-field evaluation: interpolate the kernel between two boxes through a
//! shared reference grid, so one box pair costs `O(n·m + m²)` instead of
//! `O(n_x·n_y)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::grid::{GridScratch, NodeGrid};
use crate::error::{Error, Result};
use crate::kernel::{as_contiguous, KernelSpec, Real, TranslationInvariantKernel};

/// A box participating in a far-field product: its bounding cube and the
/// coordinates of the points it holds.
#[derive(Clone, Copy)]
pub struct BoxRef<'a> {
    pub center: &'a [f64],
    pub edge: f64,
    pub points: ArrayView2<'a, f64>,
}

/// Node budget for a far-field pair at box edge `l`, keyed on the normalized
/// squared edge `q = l²/(2γ²)`: the coarse budget `min(r, 3^D)` when the boxes
/// are tiny relative to the lengthscale, the full budget in the middle range,
/// and zero (skip the pair entirely) once the kernel has decayed away.
pub fn adaptive_node_count(edge: f64, gamma: f64, r_requested: usize, dim: usize) -> usize {
    let q = edge * edge / (2.0 * gamma * gamma);
    if q <= 0.01 {
        r_requested.min(3usize.pow(dim as u32))
    } else if q <= 5.0 {
        r_requested
    } else {
        0
    }
}

/// Kernel matrix between the two boxes' node sets, with nodes mapped from the
/// reference cube into each box's own cube.
pub fn node_kernel_matrix(
    kernel: &KernelSpec,
    grid: &NodeGrid,
    center_x: &[f64],
    edge_x: f64,
    center_y: &[f64],
    edge_y: f64,
) -> Array2<f64> {
    let m = grid.num_nodes();
    let dim = grid.dim();
    let hx = edge_x / 2.0;
    let hy = edge_y / 2.0;
    let nodes = grid.nodes();
    let mut out = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            let mut sq = 0.0;
            for d in 0..dim {
                let sx = center_x[d] + hx * nodes[[i, d]];
                let sy = center_y[d] + hy * nodes[[j, d]];
                let diff = sx - sy;
                sq += diff * diff;
            }
            out[[i, j]] = kernel.eval_sq_dist(sq);
        }
    }
    out
}

/// Stage 1: map each source point into the reference cube and gather
/// `v1[node] += L_node(y)·b[y]` over the block.
pub(crate) fn anterpolate_block<T: Real>(
    grid: &NodeGrid,
    center: &[f64],
    edge: f64,
    points: &[T],
    b: &[T],
    scratch: &mut GridScratch<T>,
    u_buf: &mut [T],
    v1: &mut [T],
) {
    let dim = grid.dim();
    let inv_half = T::from_f64(2.0 / edge);
    debug_assert_eq!(v1.len(), grid.num_nodes());
    for (row, &w) in points.chunks_exact(dim).zip(b.iter()) {
        for d in 0..dim {
            u_buf[d] = (row[d] - T::from_f64(center[d])) * inv_half;
        }
        grid.for_each_node_weight(u_buf, scratch, |node, lw| {
            v1[node] = v1[node] + lw * w;
        });
    }
}

/// Stage 3: scatter `out[x] += Σ_node L_node(x)·w[node]` over the block.
pub(crate) fn interpolate_block_add<T: Real>(
    grid: &NodeGrid,
    center: &[f64],
    edge: f64,
    points: &[T],
    w: &[T],
    scratch: &mut GridScratch<T>,
    u_buf: &mut [T],
    out: &mut [T],
) {
    let dim = grid.dim();
    let inv_half = T::from_f64(2.0 / edge);
    debug_assert_eq!(w.len(), grid.num_nodes());
    for (row, o) in points.chunks_exact(dim).zip(out.iter_mut()) {
        for d in 0..dim {
            u_buf[d] = (row[d] - T::from_f64(center[d])) * inv_half;
        }
        let mut acc = T::zero();
        grid.for_each_node_weight(u_buf, scratch, |node, lw| {
            acc = acc + lw * w[node];
        });
        *o = *o + acc;
    }
}

/// Approximate the dense block product `k(X_box, Y_box)·b` through the grid:
/// anterpolate the sources, translate through the node kernel matrix, then
/// interpolate at the targets.
pub fn far_field_apply(
    kernel: &KernelSpec,
    box_x: BoxRef<'_>,
    box_y: BoxRef<'_>,
    b_block: ArrayView1<'_, f64>,
    grid: &NodeGrid,
) -> Result<Array1<f64>> {
    if box_x.edge <= 0.0 || box_y.edge <= 0.0 {
        return Err(Error::DegenerateBox(format!(
            "far-field boxes need positive edges, got {} and {}",
            box_x.edge, box_y.edge
        )));
    }
    let dim = grid.dim();
    if box_x.points.ncols() != dim
        || box_y.points.ncols() != dim
        || box_x.center.len() != dim
        || box_y.center.len() != dim
    {
        return Err(Error::InvalidInput(format!(
            "box dimensions do not match grid dimension {dim}"
        )));
    }
    if box_y.points.nrows() != b_block.len() {
        return Err(Error::InvalidInput(format!(
            "weight vector length {} does not match source rows {}",
            b_block.len(),
            box_y.points.nrows()
        )));
    }
    let m = grid.num_nodes();
    let xs = as_contiguous(box_x.points);
    let ys = as_contiguous(box_y.points);
    let bs = b_block.to_vec();
    let mut scratch = grid.make_scratch::<f64>();
    let mut u = vec![0.0; dim];

    let mut v1 = vec![0.0; m];
    anterpolate_block(
        grid, box_y.center, box_y.edge, &ys, &bs, &mut scratch, &mut u, &mut v1,
    );

    let k_nodes = node_kernel_matrix(
        kernel, grid, box_x.center, box_x.edge, box_y.center, box_y.edge,
    );
    let mut v2 = vec![0.0; m];
    for i in 0..m {
        let mut acc = 0.0;
        for j in 0..m {
            acc += k_nodes[[i, j]] * v1[j];
        }
        v2[i] = acc;
    }

    let mut out = vec![0.0; box_x.points.nrows()];
    interpolate_block_add(
        grid, box_x.center, box_x.edge, &xs, &v2, &mut scratch, &mut u, &mut out,
    );
    Ok(Array1::from_vec(out))
}
