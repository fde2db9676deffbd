//! The hierarchical matvec engine: per-depth interaction classification into
//! near / far / smooth / small fields, contribution accumulation, stopping
//! rules, and exact interaction accounting.

use std::collections::HashMap;
use std::time::Instant;

use ndarray::{Array1, ArrayView1, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{
    adaptive_node_count, anterpolate_block, full_tensor_degree_for_budget, interpolate_block_add,
    sparse_level_for_budget, GridLayout, NodeGrid,
};
use crate::kernel::{near_field_accumulate, KernelSpec, Real, TranslationInvariantKernel};
use crate::tree::{
    compute_enclosing_cube, divide_interactions, BoxTreeLevel, InteractionList, MAX_DIM,
};

/// Node layout family used for box grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Full,
    Sparse,
}

/// Storage and block-arithmetic precision. Index math, tree geometry and the
/// error oracle always run in f64.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F64,
    F32,
}

/// Engine configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct F3mConfig {
    /// Total interpolation-node budget per box grid.
    pub node_budget: usize,
    /// Effective-variance limit for the smooth-field criterion.
    pub eta: f64,
    /// Small-field occupancy threshold; defaults to twice the grid node count.
    pub rho: Option<usize>,
    /// Division stops once every box on either side holds at most this many
    /// points; defaults to the grid node count.
    pub zeta: Option<usize>,
    pub grid: GridKind,
    pub threads: Option<usize>,
    /// Recorded in manifests; the engine is order-deterministic regardless.
    pub deterministic: bool,
    pub precision: Precision,
    /// Disable far/smooth/small classification: every pair stays near and is
    /// eventually computed exactly.
    pub exact: bool,
    /// Cap on total grid nodes.
    pub node_cap: usize,
    /// Depth guard against coincident-point recursion; box edges underflow
    /// the root edge by 2^-52 past this point.
    pub max_depth: u32,
}

impl Default for F3mConfig {
    fn default() -> Self {
        F3mConfig {
            node_budget: 64,
            eta: 0.5,
            rho: None,
            zeta: None,
            grid: GridKind::Full,
            threads: None,
            deterministic: false,
            precision: Precision::F64,
            exact: false,
            node_cap: crate::interp::DEFAULT_NODE_CAP,
            max_depth: 52,
        }
    }
}

impl F3mConfig {
    fn validate(&self) -> Result<()> {
        if self.node_budget < 2 {
            return Err(Error::InvalidInput(
                "node budget must be at least 2".into(),
            ));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::InvalidInput(
                "effective-variance limit must be positive and finite".into(),
            ));
        }
        if self.zeta == Some(0) {
            return Err(Error::InvalidInput(
                "occupancy threshold zeta must be at least 1".into(),
            ));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidInput("max depth must be at least 1".into()));
        }
        Ok(())
    }

    /// Grid for a given total node budget under this config's layout family.
    fn grid_for_budget(&self, dim: usize, budget: usize) -> Result<NodeGrid> {
        let layout = match self.grid {
            GridKind::Full => GridLayout::FullTensor {
                degree: full_tensor_degree_for_budget(dim, budget, self.node_cap)?,
            },
            GridKind::Sparse => GridLayout::Sparse {
                level: sparse_level_for_budget(dim, budget, self.node_cap)?,
            },
        };
        NodeGrid::build_capped(dim, layout, self.node_cap)
    }
}

/// Interaction lists for one depth split by field kind.
pub struct FieldPartition {
    pub near: InteractionList,
    pub far: InteractionList,
    pub smooth: InteractionList,
    pub small: InteractionList,
}

/// Counters for one depth of the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DepthStats {
    pub depth: u32,
    pub boxes_x: usize,
    pub boxes_y: usize,
    pub max_box_x: usize,
    pub max_box_y: usize,
    pub empty_boxes_x: usize,
    pub empty_boxes_y: usize,
    /// Pairs actually created by dividing the previous near field.
    pub expanded: u64,
    /// Pairs never created because an empty child was dropped:
    /// `near_{i-1}·2^{2D} − expanded`.
    pub removed_empty: u64,
    pub far: u64,
    /// Far pairs whose adaptive node budget was zero (still counted in `far`).
    pub far_zero_budget: u64,
    pub smooth: u64,
    pub small: u64,
    pub near: u64,
}

/// Full accounting and timing record of one matvec run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunStats {
    pub n_x: usize,
    pub n_y: usize,
    pub dim: usize,
    pub shared_edge: f64,
    pub grid_nodes: usize,
    pub rho: usize,
    pub zeta: usize,
    pub final_depth: u32,
    pub depths: Vec<DepthStats>,
    pub seconds_divide: f64,
    pub seconds_classify: f64,
    pub seconds_far: f64,
    pub seconds_smooth: f64,
    pub seconds_small: f64,
    pub seconds_near: f64,
}

impl RunStats {
    fn new(n_x: usize, n_y: usize, dim: usize, edge: f64, m: usize, rho: usize, zeta: usize) -> Self {
        RunStats {
            n_x,
            n_y,
            dim,
            shared_edge: edge,
            grid_nodes: m,
            rho,
            zeta,
            final_depth: 0,
            depths: vec![DepthStats {
                depth: 0,
                boxes_x: 1,
                boxes_y: 1,
                max_box_x: n_x,
                max_box_y: n_y,
                empty_boxes_x: 0,
                empty_boxes_y: 0,
                expanded: 1,
                removed_empty: 0,
                far: 0,
                far_zero_budget: 0,
                smooth: 0,
                small: 0,
                near: 1,
            }],
            seconds_divide: 0.0,
            seconds_classify: 0.0,
            seconds_far: 0.0,
            seconds_smooth: 0.0,
            seconds_small: 0.0,
            seconds_near: 0.0,
        }
    }
}

/// Classify one depth's pairs. Precedence: far, then smooth, then small,
/// then near.
pub fn classify(
    pairs: &InteractionList,
    level_x: &BoxTreeLevel,
    level_y: &BoxTreeLevel,
    kernel: &KernelSpec,
    eta: f64,
    rho: usize,
) -> Result<FieldPartition> {
    if level_x.depth != level_y.depth {
        return Err(Error::InvalidInput(format!(
            "levels out of lockstep: depth {} vs {}",
            level_x.depth, level_y.depth
        )));
    }
    let dim = level_x.cube.min_corner.len();
    let l = level_x.edge;
    let gamma = kernel.scale();
    // Both boxes bound their per-dimension variance by l²/4, so the pair's
    // effective variance is at most D·l²/(4γ²); one comparison per depth.
    let smooth_bound = dim as f64 * l * l / (4.0 * gamma * gamma);
    let all_smooth = smooth_bound <= eta;
    let far_sq = 4.0 * l * l;

    let centers_x = level_centers(level_x);
    let centers_y = level_centers(level_y);

    let mut part = FieldPartition {
        near: InteractionList::default(),
        far: InteractionList::default(),
        smooth: InteractionList::default(),
        small: InteractionList::default(),
    };
    for &(p, q) in &pairs.pairs {
        let (p, q) = (p as usize, q as usize);
        let cx = &centers_x[p * dim..(p + 1) * dim];
        let cy = &centers_y[q * dim..(q + 1) * dim];
        let mut dist_sq = 0.0;
        for d in 0..dim {
            let diff = cx[d] - cy[d];
            dist_sq += diff * diff;
        }
        let bucket = if dist_sq >= far_sq {
            &mut part.far
        } else if all_smooth {
            &mut part.smooth
        } else if level_x.boxes[p].count() + level_y.boxes[q].count() <= rho {
            &mut part.small
        } else {
            &mut part.near
        };
        bucket.pairs.push((p as u32, q as u32));
    }
    Ok(part)
}

fn level_centers(level: &BoxTreeLevel) -> Vec<f64> {
    let dim = level.cube.min_corner.len();
    let mut out = vec![0.0; level.num_boxes() * dim];
    for (i, chunk) in out.chunks_exact_mut(dim).enumerate() {
        level.center_of(i, chunk);
    }
    out
}

/// Approximate `v = k(X, Y)·b` with the hierarchical engine.
///
/// Returns the product in the original row order of `X` together with the
/// per-depth accounting record.
pub fn f3m_matvec(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    kernel: &KernelSpec,
    cfg: &F3mConfig,
) -> Result<(Array1<f64>, RunStats)> {
    cfg.validate()?;
    validate_inputs(x, y, b)?;
    let run = || match cfg.precision {
        Precision::F64 => run_engine::<f64>(x, y, b, kernel, cfg),
        Precision::F32 => run_engine::<f32>(x, y, b, kernel, cfg),
    };
    match cfg.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::Resource(format!("thread pool: {e}")))?;
            pool.install(run)
        }
        None => run(),
    }
}

fn validate_inputs(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
) -> Result<()> {
    let dim = x.ncols();
    if dim != y.ncols() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch between x ({}) and y ({})",
            dim,
            y.ncols()
        )));
    }
    if dim < 1 || dim > MAX_DIM {
        return Err(Error::InvalidInput(format!(
            "dimension must be in 1..=7, got {dim}"
        )));
    }
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::InvalidInput("empty point set".into()));
    }
    if b.len() != y.nrows() {
        return Err(Error::InvalidInput(format!(
            "weight length {} does not match y rows {}",
            b.len(),
            y.nrows()
        )));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite weight".into()));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coordinate".into()));
    }
    Ok(())
}

/// Contiguous, permutation-ordered working copies of one side's data.
struct SideData<T> {
    coords64: Vec<f64>,
    coords: Vec<T>,
    scratch64: Vec<f64>,
    scratch: Vec<T>,
}

impl<T: Real> SideData<T> {
    fn new(points: ArrayView2<'_, f64>) -> Self {
        let coords64: Vec<f64> = points.iter().copied().collect();
        let coords: Vec<T> = coords64.iter().map(|&v| T::from_f64(v)).collect();
        SideData {
            scratch64: vec![0.0; coords64.len()],
            scratch: vec![T::zero(); coords.len()],
            coords64,
            coords,
        }
    }

    /// Reorder rows so position `i` holds old position `relabel[i]`.
    fn apply_relabel(&mut self, relabel: &[usize], dim: usize) {
        for (new, &old) in relabel.iter().enumerate() {
            let dst = new * dim;
            let src = old * dim;
            self.scratch64[dst..dst + dim].copy_from_slice(&self.coords64[src..src + dim]);
            self.scratch[dst..dst + dim].copy_from_slice(&self.coords[src..src + dim]);
        }
        std::mem::swap(&mut self.coords64, &mut self.scratch64);
        std::mem::swap(&mut self.coords, &mut self.scratch);
    }
}

fn run_engine<T: Real>(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    b: ArrayView1<'_, f64>,
    kernel: &KernelSpec,
    cfg: &F3mConfig,
) -> Result<(Array1<f64>, RunStats)> {
    let dim = x.ncols();
    let n_x = x.nrows();
    let n_y = y.nrows();

    let full_grid = cfg.grid_for_budget(dim, cfg.node_budget)?;
    let m = full_grid.num_nodes();
    let rho = cfg.rho.unwrap_or(2 * m);
    let zeta = cfg.zeta.unwrap_or(m).max(1);

    let (cube_x, cube_y, edge) = compute_enclosing_cube(x, y)?;
    let mut stats = RunStats::new(n_x, n_y, dim, edge, m, rho, zeta);

    let mut side_x = SideData::<T>::new(x);
    let mut side_y = SideData::<T>::new(y);
    let mut weights: Vec<T> = b.iter().map(|&v| T::from_f64(v)).collect();
    let mut weights_scratch = vec![T::zero(); n_y];

    let mut v_out = vec![T::zero(); n_x];
    let mut v_sorted = vec![T::zero(); n_x];

    // Degenerate spread: a single exact block covers everything.
    if edge == 0.0 {
        let t0 = Instant::now();
        near_field_accumulate(kernel, &side_x.coords, &side_y.coords, &weights, dim, &mut v_out);
        stats.seconds_near += t0.elapsed().as_secs_f64();
        let out = Array1::from_iter(v_out.into_iter().map(Real::into_f64));
        return Ok((out, stats));
    }

    let alpha_diff: Vec<f64> = cube_x
        .min_corner
        .iter()
        .zip(cube_y.min_corner.iter())
        .map(|(a, b)| a - b)
        .collect();

    let mut level_x = BoxTreeLevel::root(n_x, cube_x, edge);
    let mut level_y = BoxTreeLevel::root(n_y, cube_y, edge);
    let mut near = InteractionList::root();
    // Lazily built grid for the coarse adaptive budget.
    let mut low_grid: Option<NodeGrid> = None;
    let fan_sq = 1u64 << (2 * dim as u32);

    while !near.is_empty()
        && level_x.max_box_count() > zeta
        && level_y.max_box_count() > zeta
        && level_x.depth < cfg.max_depth
    {
        let t_div = Instant::now();
        let div_x = {
            let view = ndarray::ArrayView2::from_shape((n_x, dim), &side_x.coords64)
                .expect("contiguous coords");
            level_x.divide(view)?
        };
        side_x.apply_relabel(&div_x.relabel, dim);
        let div_y = {
            let view = ndarray::ArrayView2::from_shape((n_y, dim), &side_y.coords64)
                .expect("contiguous coords");
            level_y.divide(view)?
        };
        side_y.apply_relabel(&div_y.relabel, dim);
        for (new, &old) in div_y.relabel.iter().enumerate() {
            weights_scratch[new] = weights[old];
        }
        std::mem::swap(&mut weights, &mut weights_scratch);
        level_x = div_x.level;
        level_y = div_y.level;
        if level_x.num_boxes() > u32::MAX as usize || level_y.num_boxes() > u32::MAX as usize {
            return Err(Error::Resource("box count exceeds u32 range".into()));
        }

        let pairs = divide_interactions(&near, &div_x.child_ranges, &div_y.child_ranges);
        let expanded = pairs.len() as u64;
        let removed_empty = near.len() as u64 * fan_sq - expanded;
        stats.seconds_divide += t_div.elapsed().as_secs_f64();

        let t_cls = Instant::now();
        let part = if cfg.exact {
            FieldPartition {
                near: pairs,
                far: InteractionList::default(),
                smooth: InteractionList::default(),
                small: InteractionList::default(),
            }
        } else {
            classify(&pairs, &level_x, &level_y, kernel, cfg.eta, rho)?
        };
        stats.seconds_classify += t_cls.elapsed().as_secs_f64();

        let ctx = InterpCtx {
            kernel,
            alpha_diff: &alpha_diff,
            level_x: &level_x,
            level_y: &level_y,
            xs: &side_x.coords,
            ys: &side_y.coords,
            bs: &weights,
            dim,
        };

        let far_budget = adaptive_node_count(level_x.edge, kernel.scale(), cfg.node_budget, dim);
        let mut far_zero_budget = 0u64;
        let t_far = Instant::now();
        if !part.far.is_empty() {
            if far_budget == 0 {
                far_zero_budget = part.far.len() as u64;
            } else if far_budget >= cfg.node_budget {
                apply_interp_list(&ctx, &full_grid, &part.far, &mut v_sorted)?;
            } else {
                if low_grid.is_none() {
                    low_grid = Some(cfg.grid_for_budget(dim, far_budget)?);
                }
                apply_interp_list(&ctx, low_grid.as_ref().unwrap(), &part.far, &mut v_sorted)?;
            }
        }
        stats.seconds_far += t_far.elapsed().as_secs_f64();

        let t_smooth = Instant::now();
        if !part.smooth.is_empty() {
            apply_interp_list(&ctx, &full_grid, &part.smooth, &mut v_sorted)?;
        }
        stats.seconds_smooth += t_smooth.elapsed().as_secs_f64();

        let t_small = Instant::now();
        if !part.small.is_empty() {
            apply_near_list(&ctx, &part.small, &mut v_sorted);
        }
        stats.seconds_small += t_small.elapsed().as_secs_f64();

        // Fold this depth's contributions back into original row order.
        for (i, &orig) in level_x.perm.iter().enumerate() {
            v_out[orig] = v_out[orig] + v_sorted[i];
            v_sorted[i] = T::zero();
        }

        stats.depths.push(DepthStats {
            depth: level_x.depth,
            boxes_x: level_x.num_boxes(),
            boxes_y: level_y.num_boxes(),
            max_box_x: level_x.max_box_count(),
            max_box_y: level_y.max_box_count(),
            empty_boxes_x: div_x.empty_children,
            empty_boxes_y: div_y.empty_children,
            expanded,
            removed_empty,
            far: part.far.len() as u64,
            far_zero_budget,
            smooth: part.smooth.len() as u64,
            small: part.small.len() as u64,
            near: part.near.len() as u64,
        });
        stats.final_depth = level_x.depth;
        near = part.near;
    }

    // Flush whatever stayed near at the final depth exactly.
    if !near.is_empty() {
        let ctx = InterpCtx {
            kernel,
            alpha_diff: &alpha_diff,
            level_x: &level_x,
            level_y: &level_y,
            xs: &side_x.coords,
            ys: &side_y.coords,
            bs: &weights,
            dim,
        };
        let t_near = Instant::now();
        apply_near_list(&ctx, &near, &mut v_sorted);
        for (i, &orig) in level_x.perm.iter().enumerate() {
            v_out[orig] = v_out[orig] + v_sorted[i];
            v_sorted[i] = T::zero();
        }
        stats.seconds_near += t_near.elapsed().as_secs_f64();
    }

    let out = Array1::from_iter(v_out.into_iter().map(Real::into_f64));
    Ok((out, stats))
}

/// Shared immutable state for one depth's block applications.
struct InterpCtx<'a, T> {
    kernel: &'a KernelSpec,
    alpha_diff: &'a [f64],
    level_x: &'a BoxTreeLevel,
    level_y: &'a BoxTreeLevel,
    xs: &'a [T],
    ys: &'a [T],
    bs: &'a [T],
    dim: usize,
}

/// Split `buf` into the disjoint, ascending `[start, end)` row ranges of the
/// listed boxes.
fn split_box_slices<'a, T>(
    mut buf: &'a mut [T],
    level: &BoxTreeLevel,
    boxes: &[u32],
) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(boxes.len());
    let mut pos = 0usize;
    for &p in boxes {
        let node = &level.boxes[p as usize];
        let (_, rest) = buf.split_at_mut(node.start - pos);
        let (take, rest) = rest.split_at_mut(node.count());
        out.push(take);
        buf = rest;
        pos = node.end;
    }
    out
}

/// Contiguous groups of a sorted pair list sharing the same x box.
fn group_by_target(pairs: &InteractionList) -> (Vec<u32>, Vec<std::ops::Range<usize>>) {
    let list = &pairs.pairs;
    let mut targets = Vec::new();
    let mut ranges = Vec::new();
    let mut i = 0;
    while i < list.len() {
        let p = list[i].0;
        let mut j = i;
        while j < list.len() && list[j].0 == p {
            j += 1;
        }
        targets.push(p);
        ranges.push(i..j);
        i = j;
    }
    (targets, ranges)
}

/// Batched interpolated application of a sorted pair list through `grid`:
/// anterpolate each source box once, translate per pair through a
/// displacement-cached node kernel matrix, interpolate each target box once.
fn apply_interp_list<T: Real>(
    ctx: &InterpCtx<'_, T>,
    grid: &NodeGrid,
    pairs: &InteractionList,
    v_sorted: &mut [T],
) -> Result<()> {
    let dim = ctx.dim;
    let m = grid.num_nodes();
    let edge = ctx.level_x.edge;

    // Stage 1: one anterpolation per distinct source box.
    let mut v1_slot = vec![u32::MAX; ctx.level_y.num_boxes()];
    let mut unique_q = Vec::new();
    for &(_, q) in &pairs.pairs {
        if v1_slot[q as usize] == u32::MAX {
            v1_slot[q as usize] = unique_q.len() as u32;
            unique_q.push(q);
        }
    }
    let v1s: Vec<Vec<T>> = unique_q
        .par_iter()
        .map(|&q| {
            let node = &ctx.level_y.boxes[q as usize];
            let mut center = [0.0; MAX_DIM];
            ctx.level_y.center_of(q as usize, &mut center[..dim]);
            let mut v1 = vec![T::zero(); m];
            let mut scratch = grid.make_scratch::<T>();
            let mut u = vec![T::zero(); dim];
            anterpolate_block(
                grid,
                &center[..dim],
                edge,
                &ctx.ys[node.start * dim..node.end * dim],
                &ctx.bs[node.start..node.end],
                &mut scratch,
                &mut u,
                &mut v1,
            );
            v1
        })
        .collect();

    // Stage 2 preparation: node kernel matrices keyed by the integer
    // displacement between box coordinates (translation invariance).
    let mut delta_index: HashMap<[i64; MAX_DIM], u32> = HashMap::new();
    let mut deltas = Vec::new();
    let mut pair_delta = Vec::with_capacity(pairs.len());
    for &(p, q) in &pairs.pairs {
        let bx = &ctx.level_x.boxes[p as usize];
        let by = &ctx.level_y.boxes[q as usize];
        let mut key = [0i64; MAX_DIM];
        for d in 0..dim {
            key[d] = bx.coords[d] as i64 - by.coords[d] as i64;
        }
        let next = deltas.len() as u32;
        let ix = *delta_index.entry(key).or_insert_with(|| {
            deltas.push(key);
            next
        });
        pair_delta.push(ix);
    }
    let kmats: Vec<Vec<T>> = deltas
        .par_iter()
        .map(|key| {
            let mut center_diff = [0.0; MAX_DIM];
            for d in 0..dim {
                center_diff[d] = ctx.alpha_diff[d] + edge * key[d] as f64;
            }
            node_kernel_from_center_diff(ctx.kernel, grid, edge, &center_diff[..dim])
        })
        .collect();

    // Stages 2 and 3 per target box, on disjoint output slices.
    let (targets, ranges) = group_by_target(pairs);
    let slices = split_box_slices(v_sorted, ctx.level_x, &targets);
    targets
        .par_iter()
        .zip(ranges.par_iter())
        .zip(slices.into_par_iter())
        .for_each(|((&p, range), out)| {
            let node = &ctx.level_x.boxes[p as usize];
            let mut w = vec![T::zero(); m];
            for ix in range.clone() {
                let (_, q) = pairs.pairs[ix];
                let v1 = &v1s[v1_slot[q as usize] as usize];
                let kmat = &kmats[pair_delta[ix] as usize];
                for i in 0..m {
                    let row = &kmat[i * m..(i + 1) * m];
                    let mut acc = T::zero();
                    for j in 0..m {
                        acc = acc + row[j] * v1[j];
                    }
                    w[i] = w[i] + acc;
                }
            }
            let mut center = [0.0; MAX_DIM];
            ctx.level_x.center_of(p as usize, &mut center[..dim]);
            let mut scratch = grid.make_scratch::<T>();
            let mut u = vec![T::zero(); dim];
            interpolate_block_add(
                grid,
                &center[..dim],
                edge,
                &ctx.xs[node.start * dim..node.end * dim],
                &w,
                &mut scratch,
                &mut u,
                out,
            );
        });
    Ok(())
}

/// Node kernel matrix expressed through the center displacement only; both
/// boxes share the depth's edge.
fn node_kernel_from_center_diff<T: Real>(
    kernel: &KernelSpec,
    grid: &NodeGrid,
    edge: f64,
    center_diff: &[f64],
) -> Vec<T> {
    let m = grid.num_nodes();
    let dim = grid.dim();
    let h = edge / 2.0;
    let nodes = grid.nodes();
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut sq = 0.0;
            for d in 0..dim {
                let diff = center_diff[d] + h * (nodes[[i, d]] - nodes[[j, d]]);
                sq += diff * diff;
            }
            out.push(T::from_f64(kernel.eval_sq_dist(sq)));
        }
    }
    out
}

/// Exact dense application of a sorted pair list, one target box at a time.
fn apply_near_list<T: Real>(ctx: &InterpCtx<'_, T>, pairs: &InteractionList, v_sorted: &mut [T]) {
    let dim = ctx.dim;
    let (targets, ranges) = group_by_target(pairs);
    let slices = split_box_slices(v_sorted, ctx.level_x, &targets);
    targets
        .par_iter()
        .zip(ranges.par_iter())
        .zip(slices.into_par_iter())
        .for_each(|((&p, range), out)| {
            let bx = &ctx.level_x.boxes[p as usize];
            for ix in range.clone() {
                let (_, q) = pairs.pairs[ix];
                let by = &ctx.level_y.boxes[q as usize];
                near_field_accumulate(
                    ctx.kernel,
                    &ctx.xs[bx.start * dim..bx.end * dim],
                    &ctx.ys[by.start * dim..by.end * dim],
                    &ctx.bs[by.start..by.end],
                    dim,
                    out,
                );
            }
        });
}

/// One verified accounting row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccountRow {
    pub depth: u32,
    pub expanded: u64,
    pub removed_empty: u64,
    pub far: u64,
    pub smooth: u64,
    pub small: u64,
    pub near: u64,
    /// Empty children dropped this depth (x then y), reported alongside the
    /// exact pair-removal count for comparison with the squared-empties view.
    pub empty_boxes_x: usize,
    pub empty_boxes_y: usize,
}

/// Verified per-depth accounting of a completed run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AccountReport {
    pub dim: usize,
    pub rows: Vec<AccountRow>,
}

/// Check the exact interaction recursion at every depth:
/// `near_i + far_i + smooth_i + small_i = expanded_i` and
/// `expanded_i + removed_i = near_{i−1}·2^{2D}`.
pub fn account(stats: &RunStats) -> Result<AccountReport> {
    let fan_sq = 1u64 << (2 * stats.dim as u32);
    let mut rows = Vec::with_capacity(stats.depths.len());
    for (i, d) in stats.depths.iter().enumerate() {
        if i == 0 {
            if d.expanded != 1 || d.far + d.smooth + d.small != 0 || d.near != 1 {
                return Err(Error::InternalConsistency(
                    "root depth must hold exactly one near pair".into(),
                ));
            }
        } else {
            let prev = &stats.depths[i - 1];
            let classified = d.far + d.smooth + d.small + d.near;
            if classified != d.expanded {
                return Err(Error::InternalConsistency(format!(
                    "depth {}: classified {} pairs out of {} expanded",
                    d.depth, classified, d.expanded
                )));
            }
            if d.expanded + d.removed_empty != prev.near * fan_sq {
                return Err(Error::InternalConsistency(format!(
                    "depth {}: expanded {} + removed {} != {}·2^(2D)",
                    d.depth, d.expanded, d.removed_empty, prev.near
                )));
            }
        }
        rows.push(AccountRow {
            depth: d.depth,
            expanded: d.expanded,
            removed_empty: d.removed_empty,
            far: d.far,
            smooth: d.smooth,
            small: d.small,
            near: d.near,
            empty_boxes_x: d.empty_boxes_x,
            empty_boxes_y: d.empty_boxes_y,
        });
    }
    Ok(AccountReport {
        dim: stats.dim,
        rows,
    })
}
