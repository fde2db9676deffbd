//! D-dimensional interpolation node grids: full tensor products and Smolyak
//! sparse grids over nested Chebyshev levels.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::basis::ChebyshevBasis1D;
use crate::error::{Error, Result};
use crate::kernel::Real;

/// Default cap on the total number of nodes in one grid.
pub const DEFAULT_NODE_CAP: usize = 2048;

/// How nodes are laid out in the reference cube `[−1, 1]^D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridLayout {
    /// Cartesian product of identical 1-D bases of the given degree
    /// (`degree + 1` nodes per dimension).
    FullTensor { degree: usize },
    /// Smolyak combination over nested Chebyshev levels; 1-D level `j`
    /// carries `2^j + 1` nodes, level 0 a single node at the origin.
    Sparse { level: usize },
}

/// One 1-D node set referenced by grid terms. `basis` is `None` for the
/// single-node level, whose only cardinal function is the constant 1.
struct NodeSet1D {
    nodes: Vec<f64>,
    basis: Option<ChebyshevBasis1D>,
}

impl NodeSet1D {
    fn for_level(level: usize) -> Result<Self> {
        if level == 0 {
            Ok(NodeSet1D {
                nodes: vec![0.0],
                basis: None,
            })
        } else {
            let basis = ChebyshevBasis1D::new(1 << level)?;
            Ok(NodeSet1D {
                nodes: basis.nodes().to_vec(),
                basis: Some(basis),
            })
        }
    }

    fn len(&self) -> usize {
        self.nodes.len()
    }
}

/// One tensor-product term of the combination: per-dimension node-set ids, a
/// signed coefficient, and the map from the term's lexicographic node order
/// into the union node list.
struct GridTerm {
    set_ids: Vec<usize>,
    sizes: Vec<usize>,
    coeff: f64,
    node_map: Vec<usize>,
}

/// A set of interpolation nodes in the reference cube together with the
/// combination structure needed to evaluate the interpolation weights of any
/// point in the cube.
pub struct NodeGrid {
    dim: usize,
    layout: GridLayout,
    sets: Vec<NodeSet1D>,
    terms: Vec<GridTerm>,
    nodes: Array2<f64>,
}

/// Reusable per-thread evaluation scratch; sized for one grid.
pub struct GridScratch<T> {
    // Basis values for (set, dim), dim-major: vals[d][set offset..].
    vals: Vec<T>,
    set_offsets: Vec<usize>,
    per_dim: usize,
    idx: Vec<usize>,
    partial: Vec<T>,
}

impl<T: Real> GridScratch<T> {
    fn new(grid: &NodeGrid) -> Self {
        let mut set_offsets = Vec::with_capacity(grid.sets.len() + 1);
        let mut total = 0;
        for s in &grid.sets {
            set_offsets.push(total);
            total += s.len();
        }
        set_offsets.push(total);
        GridScratch {
            vals: vec![T::zero(); total * grid.dim],
            set_offsets,
            per_dim: total,
            idx: vec![0; grid.dim],
            partial: vec![T::zero(); grid.dim + 1],
        }
    }
}

impl NodeGrid {
    /// Build a grid with the default node cap.
    pub fn build(dim: usize, layout: GridLayout) -> Result<Self> {
        Self::build_capped(dim, layout, DEFAULT_NODE_CAP)
    }

    /// Build a grid, rejecting any construction whose union node count would
    /// exceed `cap`.
    pub fn build_capped(dim: usize, layout: GridLayout, cap: usize) -> Result<Self> {
        if dim < 1 || dim > 7 {
            return Err(Error::InvalidInput(format!(
                "grid dimension must be in 1..=7, got {dim}"
            )));
        }
        match layout {
            GridLayout::FullTensor { degree } => {
                if degree < 1 {
                    return Err(Error::InvalidDegree(
                        "full tensor grid needs degree at least 1".into(),
                    ));
                }
                let per_dim = degree + 1;
                let mut total: usize = 1;
                for _ in 0..dim {
                    total = total.saturating_mul(per_dim);
                    if total > cap {
                        return Err(Error::GridTooLarge(format!(
                            "full tensor grid {per_dim}^{dim} exceeds cap {cap}"
                        )));
                    }
                }
                let set = NodeSet1D {
                    nodes: super::basis::chebyshev_nodes(degree)?,
                    basis: Some(ChebyshevBasis1D::new(degree)?),
                };
                let sets = vec![set];
                let term = GridTerm {
                    set_ids: vec![0; dim],
                    sizes: vec![per_dim; dim],
                    coeff: 1.0,
                    node_map: (0..total).collect(),
                };
                let nodes = assemble_union_nodes(dim, &sets, std::slice::from_ref(&term)).0;
                Ok(NodeGrid {
                    dim,
                    layout,
                    sets,
                    terms: vec![term],
                    nodes,
                })
            }
            GridLayout::Sparse { level } => {
                if level < 1 {
                    return Err(Error::InvalidDegree(
                        "sparse grid needs level at least 1".into(),
                    ));
                }
                let sets: Vec<NodeSet1D> = (0..=level)
                    .map(NodeSet1D::for_level)
                    .collect::<Result<_>>()?;
                let mut terms = Vec::new();
                let mut levels = vec![0usize; dim];
                enumerate_multi_indices(level, dim, 0, 0, &mut levels, &mut |lv, sum| {
                    let deficit = level - sum;
                    if deficit < dim {
                        let coeff = combination_coefficient(dim, deficit);
                        if coeff != 0.0 {
                            terms.push(GridTerm {
                                set_ids: lv.to_vec(),
                                sizes: lv.iter().map(|&l| sets[l].len()).collect(),
                                coeff,
                                node_map: Vec::new(),
                            });
                        }
                    }
                });
                // Deterministic union ordering: visit terms by level vector.
                terms.sort_by(|a, b| a.set_ids.cmp(&b.set_ids));
                let (nodes, maps) = assemble_union_nodes(dim, &sets, &terms);
                if nodes.nrows() > cap {
                    return Err(Error::GridTooLarge(format!(
                        "sparse grid level {level} has {} nodes, cap {cap}",
                        nodes.nrows()
                    )));
                }
                for (term, map) in terms.iter_mut().zip(maps) {
                    term.node_map = map;
                }
                Ok(NodeGrid {
                    dim,
                    layout,
                    sets,
                    terms,
                    nodes,
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    /// Number of distinct nodes in the grid.
    pub fn num_nodes(&self) -> usize {
        self.nodes.nrows()
    }

    /// Reference-cube coordinates of all nodes, one row per node.
    pub fn nodes(&self) -> ArrayView2<'_, f64> {
        self.nodes.view()
    }

    pub fn make_scratch<T: Real>(&self) -> GridScratch<T> {
        GridScratch::new(self)
    }

    /// Visit `(node_index, weight)` for every node with nonzero interpolation
    /// weight at reference point `u`, accumulating the Smolyak combination.
    pub(crate) fn for_each_node_weight<T: Real>(
        &self,
        u: &[T],
        scratch: &mut GridScratch<T>,
        mut visit: impl FnMut(usize, T),
    ) {
        debug_assert_eq!(u.len(), self.dim);
        for d in 0..self.dim {
            let base = d * scratch.per_dim;
            for (s, set) in self.sets.iter().enumerate() {
                let off = base + scratch.set_offsets[s];
                let out = &mut scratch.vals[off..off + set.len()];
                match &set.basis {
                    Some(basis) => basis.eval_into(u[d], out),
                    None => out[0] = T::one(),
                }
            }
        }
        for term in &self.terms {
            let dim = self.dim;
            let sizes = &term.sizes;
            scratch.idx[..dim].fill(0);
            scratch.partial[0] = T::from_f64(term.coeff);
            // Lexicographic odometer, dimension 0 most significant; partial[d]
            // carries the product of the first d factors so only dimensions at
            // or after the last advanced digit are recomputed.
            let mut dirty = 0;
            let mut lex = 0usize;
            'nodes: loop {
                for d in dirty..dim {
                    let s = term.set_ids[d];
                    let off = d * scratch.per_dim + scratch.set_offsets[s] + scratch.idx[d];
                    scratch.partial[d + 1] = scratch.partial[d] * scratch.vals[off];
                }
                visit(term.node_map[lex], scratch.partial[dim]);
                lex += 1;
                let mut d = dim;
                loop {
                    if d == 0 {
                        break 'nodes;
                    }
                    d -= 1;
                    scratch.idx[d] += 1;
                    if scratch.idx[d] < sizes[d] {
                        dirty = d;
                        continue 'nodes;
                    }
                    scratch.idx[d] = 0;
                }
            }
        }
    }

    /// Interpolation weight vector of one reference point over all nodes.
    pub fn weights_at(&self, u: &[f64]) -> Vec<f64> {
        let mut scratch = self.make_scratch::<f64>();
        let mut out = vec![0.0; self.num_nodes()];
        self.for_each_node_weight(u, &mut scratch, |i, w| out[i] += w);
        out
    }
}

/// Coefficient of the combination technique for a term whose level sum is
/// `deficit` below the target: `(−1)^deficit · C(D−1, deficit)`.
fn combination_coefficient(dim: usize, deficit: usize) -> f64 {
    let sign = if deficit % 2 == 0 { 1.0 } else { -1.0 };
    sign * binomial(dim - 1, deficit)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

/// Enumerate level vectors with `|levels|₁ ≤ budget`, invoking `f(levels, sum)`.
fn enumerate_multi_indices(
    budget: usize,
    dim: usize,
    pos: usize,
    sum: usize,
    levels: &mut Vec<usize>,
    f: &mut impl FnMut(&[usize], usize),
) {
    if pos == dim {
        f(levels, sum);
        return;
    }
    for l in 0..=(budget - sum) {
        levels[pos] = l;
        enumerate_multi_indices(budget, dim, pos + 1, sum + l, levels, f);
    }
}

/// Deduplicate term nodes into a union list; nested Chebyshev levels produce
/// bit-identical coordinates for shared nodes, so exact bit keys suffice.
fn assemble_union_nodes(
    dim: usize,
    sets: &[NodeSet1D],
    terms: &[GridTerm],
) -> (Array2<f64>, Vec<Vec<usize>>) {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut coords: Vec<f64> = Vec::new();
    let mut maps = Vec::with_capacity(terms.len());
    let mut point = vec![0.0; dim];
    for term in terms {
        let sizes: Vec<usize> = term.set_ids.iter().map(|&s| sets[s].len()).collect();
        let total: usize = sizes.iter().product();
        let mut map = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            for d in 0..dim {
                point[d] = sets[term.set_ids[d]].nodes[idx[d]];
            }
            let key: Vec<u64> = point.iter().map(|v| v.to_bits()).collect();
            let next = coords.len() / dim;
            let at = *index.entry(key).or_insert_with(|| {
                coords.extend_from_slice(&point);
                next
            });
            map.push(at);
            for d in (0..dim).rev() {
                idx[d] += 1;
                if idx[d] < sizes[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        maps.push(map);
    }
    let m = coords.len() / dim;
    (Array2::from_shape_vec((m, dim), coords).unwrap(), maps)
}

/// Per-dimension degree of the full tensor grid whose node count best fits a
/// total budget: the largest `p` with `p^dim ≤ budget`, at least two nodes per
/// dimension, shrunk to respect `cap`.
pub fn full_tensor_degree_for_budget(dim: usize, budget: usize, cap: usize) -> Result<usize> {
    let mut p = integer_root(budget.max(1), dim).max(2);
    while p > 2 && p.pow(dim as u32) > cap {
        p -= 1;
    }
    if p.pow(dim as u32) > cap {
        return Err(Error::GridTooLarge(format!(
            "even {p} nodes per dimension exceeds the cap {cap} in dimension {dim}"
        )));
    }
    Ok(p - 1)
}

/// Smallest sparse level whose union node count reaches `budget`, clamped to
/// the largest level fitting under `cap`.
pub fn sparse_level_for_budget(dim: usize, budget: usize, cap: usize) -> Result<usize> {
    let mut best = None;
    for level in 1.. {
        match NodeGrid::build_capped(dim, GridLayout::Sparse { level }, cap) {
            Ok(g) => {
                best = Some(level);
                if g.num_nodes() >= budget {
                    return Ok(level);
                }
            }
            Err(Error::GridTooLarge(_)) => break,
            Err(e) => return Err(e),
        }
    }
    best.ok_or_else(|| {
        Error::GridTooLarge(format!(
            "no sparse level fits under cap {cap} in dimension {dim}"
        ))
    })
}

/// Largest integer `p` with `p^k ≤ v`.
fn integer_root(v: usize, k: usize) -> usize {
    if k == 1 {
        return v;
    }
    let mut p = (v as f64).powf(1.0 / k as f64).round() as usize;
    p = p.max(1);
    while p.checked_pow(k as u32).map_or(true, |x| x > v) {
        p -= 1;
        if p == 0 {
            return 1;
        }
    }
    while (p + 1).checked_pow(k as u32).is_some_and(|x| x <= v) {
        p += 1;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn full_tensor_2d_degree_2_is_nine_nodes() {
        let g = NodeGrid::build(2, GridLayout::FullTensor { degree: 2 }).unwrap();
        assert_eq!(g.num_nodes(), 9);
        let mut seen: Vec<(f64, f64)> = g
            .nodes()
            .rows()
            .into_iter()
            .map(|r| (r[0], r[1]))
            .collect();
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expect = Vec::new();
        for &a in &[1.0, 0.0, -1.0] {
            for &b in &[1.0, 0.0, -1.0] {
                expect.push((a, b));
            }
        }
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, expect);
    }

    #[test]
    fn full_tensor_3d_degree_3_is_64_nodes() {
        let g = NodeGrid::build(3, GridLayout::FullTensor { degree: 3 }).unwrap();
        assert_eq!(g.num_nodes(), 64);
        for v in g.nodes().iter() {
            assert!(*v >= -1.0 && *v <= 1.0);
        }
    }

    #[test]
    fn sparse_collapses_to_full_in_1d() {
        for level in 1..=5 {
            let g = NodeGrid::build(1, GridLayout::Sparse { level }).unwrap();
            assert_eq!(g.num_nodes(), (1 << level) + 1);
            let full = NodeGrid::build(
                1,
                GridLayout::FullTensor {
                    degree: 1 << level,
                },
            )
            .unwrap();
            let mut a: Vec<f64> = g.nodes().iter().copied().collect();
            let mut b: Vec<f64> = full.nodes().iter().copied().collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn sparse_node_counts_match_clenshaw_curtis_sequence() {
        // Standard nested Chebyshev sparse grid sizes in 2-D: 5, 13, 29, 65.
        let sizes: Vec<usize> = (1..=4)
            .map(|level| {
                NodeGrid::build(2, GridLayout::Sparse { level })
                    .unwrap()
                    .num_nodes()
            })
            .collect();
        assert_eq!(sizes, vec![5, 13, 29, 65]);
    }

    #[test]
    fn cap_is_enforced() {
        assert!(matches!(
            NodeGrid::build(7, GridLayout::FullTensor { degree: 3 }),
            Err(Error::GridTooLarge(_))
        ));
        assert!(NodeGrid::build(7, GridLayout::FullTensor { degree: 2 }).is_err());
        assert!(NodeGrid::build(7, GridLayout::FullTensor { degree: 1 }).is_ok());
    }

    #[test]
    fn sparse_constant_reproduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in 1..=4 {
            for level in 1..=3 {
                let g = NodeGrid::build(dim, GridLayout::Sparse { level }).unwrap();
                for _ in 0..20 {
                    let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                    let w = g.weights_at(&u);
                    let sum: f64 = w.iter().sum();
                    assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    /// Interpolate an explicit function from node samples via the weight
    /// vector and compare to the exact value.
    fn interp_value(g: &NodeGrid, f: impl Fn(&[f64]) -> f64, u: &[f64]) -> f64 {
        let samples: Vec<f64> = g
            .nodes()
            .rows()
            .into_iter()
            .map(|r| f(r.as_slice().unwrap()))
            .collect();
        g.weights_at(u)
            .iter()
            .zip(samples.iter())
            .map(|(w, s)| w * s)
            .sum()
    }

    #[test]
    fn full_tensor_polynomial_exactness() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (dim, degree) in [(1, 4), (2, 3), (3, 2)] {
            let g = NodeGrid::build(dim, GridLayout::FullTensor { degree }).unwrap();
            // Random multivariate polynomial with per-dimension degree ≤ degree.
            let coeffs: Vec<f64> = (0..(degree + 1).pow(dim as u32))
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect();
            let poly = |u: &[f64]| {
                let mut total = 0.0;
                for (i, c) in coeffs.iter().enumerate() {
                    let mut rem = i;
                    let mut term = *c;
                    for d in 0..dim {
                        let e = rem % (degree + 1);
                        rem /= degree + 1;
                        term *= u[d].powi(e as i32);
                    }
                    total += term;
                }
                total
            };
            for _ in 0..30 {
                let u: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                let got = interp_value(&g, poly, &u);
                assert!(
                    (got - poly(&u)).abs() <= 1e-10,
                    "dim={dim} degree={degree}"
                );
            }
        }
    }

    #[test]
    fn sparse_weights_are_exact_at_grid_nodes() {
        let g = NodeGrid::build(2, GridLayout::Sparse { level: 3 }).unwrap();
        for (j, row) in g.nodes().rows().into_iter().enumerate() {
            let w = g.weights_at(row.as_slice().unwrap());
            for (i, &v) in w.iter().enumerate() {
                if i == j {
                    assert_relative_eq!(v, 1.0, epsilon = 1e-12);
                } else {
                    assert!(v.abs() <= 1e-12, "node {j} weight {i} = {v}");
                }
                        }
        }
    }

    #[test]
    fn budget_helpers() {
        assert_eq!(full_tensor_degree_for_budget(3, 64, 2048).unwrap(), 3);
        assert_eq!(full_tensor_degree_for_budget(2, 81, 2048).unwrap(), 8);
        assert_eq!(full_tensor_degree_for_budget(2, 9, 2048).unwrap(), 2);
        assert_eq!(full_tensor_degree_for_budget(3, 8, 2048).unwrap(), 1);
        // 3^7 = 2187 exceeds the cap; the budget helper falls back to 2 per dim.
        assert_eq!(full_tensor_degree_for_budget(7, 2187, 2048).unwrap(), 1);
        let l = sparse_level_for_budget(2, 13, 2048).unwrap();
        assert_eq!(l, 2);
        assert!(sparse_level_for_budget(7, 4096, 2048).is_ok());
    }

    #[test]
    fn integer_root_handles_perfect_powers() {
        assert_eq!(integer_root(64, 3), 4);
        assert_eq!(integer_root(63, 3), 3);
        assert_eq!(integer_root(81, 2), 9);
        assert_eq!(integer_root(1, 7), 1);
        assert_eq!(integer_root(2187, 7), 3);
    }
}
