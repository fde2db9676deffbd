//! Spatial partitioning state: enclosing cubes, recursive 2^D division with
//! empty-box removal, linear-time counting permutations, and interaction
//! lists kept sorted by construction.

use ndarray::ArrayView2;
use serde::Serialize;

use crate::error::{Error, Result};

/// Hard ceiling on the coordinate dimension supported by the partitioning.
pub const MAX_DIM: usize = 7;

/// An axis-aligned cube `[min_corner_d, min_corner_d + edge]` per dimension.
#[derive(Clone, Debug, Serialize)]
pub struct BoundingCube {
    pub min_corner: Vec<f64>,
    pub edge: f64,
}

/// Enclose both point sets: each side keeps its own minimum corner while the
/// edge is the largest coordinate range over both sets and all dimensions.
pub fn compute_enclosing_cube(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<(BoundingCube, BoundingCube, f64)> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::InvalidInput("cannot enclose an empty point set".into()));
    }
    if x.ncols() != y.ncols() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            x.ncols(),
            y.ncols()
        )));
    }
    let dim = x.ncols();
    let ranges = |pts: ArrayView2<'_, f64>| -> Result<(Vec<f64>, f64)> {
        let mut mins = vec![f64::INFINITY; dim];
        let mut maxs = vec![f64::NEG_INFINITY; dim];
        for row in pts.rows() {
            for d in 0..dim {
                let v = row[d];
                if !v.is_finite() {
                    return Err(Error::InvalidInput("non-finite coordinate".into()));
                }
                mins[d] = mins[d].min(v);
                maxs[d] = maxs[d].max(v);
            }
        }
        let spread = mins
            .iter()
            .zip(maxs.iter())
            .map(|(a, b)| b - a)
            .fold(0.0f64, f64::max);
        Ok((mins, spread))
    };
    let (min_x, spread_x) = ranges(x)?;
    let (min_y, spread_y) = ranges(y)?;
    let edge = spread_x.max(spread_y);
    Ok((
        BoundingCube { min_corner: min_x, edge },
        BoundingCube { min_corner: min_y, edge },
        edge,
    ))
}

/// Mixed-radix box index of a point at the given depth: per dimension
/// `c_d = min(⌊2^depth·(x_d − α_d)/edge⌋, 2^depth − 1)`, combined with weight
/// `2^{depth·(d−1)}`. Points on the global max face clamp into the last box.
pub fn box_index(x: &[f64], depth: u32, edge: f64, alpha: &[f64]) -> Result<u64> {
    if edge <= 0.0 {
        return Err(Error::InvalidInput("box index needs a positive edge".into()));
    }
    let dim = x.len();
    if (depth as usize) * dim > 63 {
        return Err(Error::InvalidInput(format!(
            "box index overflows u64 at depth {depth} in dimension {dim}"
        )));
    }
    let cells = 1u64 << depth;
    let mut beta = 0u64;
    for d in (0..dim).rev() {
        let c = cell_coordinate(x[d], alpha[d], edge, depth)?;
        beta = beta * cells + c;
    }
    Ok(beta)
}

/// Per-dimension cell coordinate with max-face clamping.
#[inline]
fn cell_coordinate(x: f64, alpha: f64, edge: f64, depth: u32) -> Result<u64> {
    let cells = 1u64 << depth;
    let scaled = ((x - alpha) / edge) * (cells as f64);
    if !(scaled >= 0.0) {
        return Err(Error::OutOfCube(format!(
            "coordinate {x} below cube corner {alpha}"
        )));
    }
    let c = scaled.floor() as u64;
    if c >= cells {
        // Allow the closed max face; anything beyond it is outside the cube.
        if x - alpha <= edge {
            Ok(cells - 1)
        } else {
            Err(Error::OutOfCube(format!(
                "coordinate {x} beyond cube corner {alpha} + edge {edge}"
            )))
        }
    } else {
        Ok(c)
    }
}

/// Stable counting sort of point indices by box assignment.
///
/// Returns the grouping permutation `π` (new position → old index), per-box
/// counts and exclusive prefix offsets. Within a box the original order is
/// preserved.
pub fn group_points(
    assignments: &[usize],
    num_boxes: usize,
) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut counts = vec![0usize; num_boxes];
    for &a in assignments {
        debug_assert!(a < num_boxes);
        counts[a] += 1;
    }
    let mut offsets = vec![0usize; num_boxes];
    let mut acc = 0;
    for (o, &c) in offsets.iter_mut().zip(counts.iter()) {
        *o = acc;
        acc += c;
    }
    let mut cursor = offsets.clone();
    let mut perm = vec![0usize; assignments.len()];
    for (i, &a) in assignments.iter().enumerate() {
        perm[cursor[a]] = i;
        cursor[a] += 1;
    }
    (perm, counts, offsets)
}

/// One occupied box at some depth: integer cell coordinates plus the
/// half-open interval of its points in the level permutation.
#[derive(Clone, Debug)]
pub struct BoxNode {
    pub coords: [u64; MAX_DIM],
    pub start: usize,
    pub end: usize,
}

impl BoxNode {
    pub fn count(&self) -> usize {
        self.end - self.start
    }
}

/// A fully-built partition depth for one point set.
pub struct BoxTreeLevel {
    pub depth: u32,
    /// Box edge at this depth, `root_edge / 2^depth`.
    pub edge: f64,
    pub cube: BoundingCube,
    pub boxes: Vec<BoxNode>,
    /// Sorted position → original row index.
    pub perm: Vec<usize>,
}

/// Result of dividing a level: the new level, the relabeling from new sorted
/// positions into the previous level's sorted positions, per-parent child id
/// ranges, and the number of empty children dropped.
pub struct DividedLevel {
    pub level: BoxTreeLevel,
    pub relabel: Vec<usize>,
    pub child_ranges: Vec<std::ops::Range<usize>>,
    pub empty_children: usize,
}

impl BoxTreeLevel {
    /// Depth-0 level: a single box holding every point in input order.
    pub fn root(n: usize, cube: BoundingCube, shared_edge: f64) -> Self {
        let coords = [0u64; MAX_DIM];
        BoxTreeLevel {
            depth: 0,
            edge: shared_edge,
            cube,
            boxes: vec![BoxNode { coords, start: 0, end: n }],
            perm: (0..n).collect(),
        }
    }

    pub fn num_boxes(&self) -> usize {
        self.boxes.len()
    }

    pub fn max_box_count(&self) -> usize {
        self.boxes.iter().map(|b| b.count()).max().unwrap_or(0)
    }

    /// Center of a box, derived from integer cell coordinates so it never
    /// drifts across depths.
    pub fn center_of(&self, box_id: usize, out: &mut [f64]) {
        let b = &self.boxes[box_id];
        let dim = self.cube.min_corner.len();
        for d in 0..dim {
            out[d] = self.cube.min_corner[d] + (b.coords[d] as f64 + 0.5) * self.edge;
        }
    }

    /// Split every box into its occupied children.
    ///
    /// `points_sorted` must hold this level's points in permutation order
    /// (row `i` is the point at sorted position `i`). Children are emitted in
    /// increasing local child id per parent, which keeps the box list ordered
    /// by global box index without sorting.
    pub fn divide(&self, points_sorted: ArrayView2<'_, f64>) -> Result<DividedLevel> {
        if self.edge <= 0.0 {
            return Err(Error::InvalidInput("cannot divide a degenerate level".into()));
        }
        let dim = self.cube.min_corner.len();
        let n = self.perm.len();
        let child_depth = self.depth + 1;
        let fan_out = 1usize << dim;
        let mut boxes = Vec::with_capacity(self.boxes.len() * 2);
        let mut relabel = vec![0usize; n];
        let mut perm = vec![0usize; n];
        let mut child_ranges = Vec::with_capacity(self.boxes.len());
        let mut empty_children = 0usize;
        let mut local = Vec::new();
        let mut write = 0usize;

        for parent in &self.boxes {
            let child_start_ix = boxes.len();
            local.clear();
            local.reserve(parent.count());
            for i in parent.start..parent.end {
                let row = points_sorted.row(i);
                let mut id = 0usize;
                for d in (0..dim).rev() {
                    let c = cell_coordinate(
                        row[d],
                        self.cube.min_corner[d],
                        self.cube.edge,
                        child_depth,
                    )?;
                    let bit = (c - 2 * parent.coords[d]) as usize;
                    debug_assert!(bit <= 1);
                    id = id * 2 + bit;
                }
                local.push(id);
            }
            let (pi, counts, offsets) = group_points(&local, fan_out);
            for (child_id, (&cnt, &off)) in counts.iter().zip(offsets.iter()).enumerate() {
                if cnt == 0 {
                    empty_children += 1;
                    continue;
                }
                let mut coords = [0u64; MAX_DIM];
                for d in 0..dim {
                    let bit = (child_id >> d) & 1;
                    coords[d] = 2 * parent.coords[d] + bit as u64;
                }
                let start = write + off;
                boxes.push(BoxNode { coords, start, end: start + cnt });
            }
            for (j, &p) in pi.iter().enumerate() {
                let new_pos = write + j;
                let old_pos = parent.start + p;
                relabel[new_pos] = old_pos;
                perm[new_pos] = self.perm[old_pos];
            }
            write += parent.count();
            child_ranges.push(child_start_ix..boxes.len());
        }

        Ok(DividedLevel {
            level: BoxTreeLevel {
                depth: child_depth,
                edge: self.edge / 2.0,
                cube: self.cube.clone(),
                boxes,
                perm,
            },
            relabel,
            child_ranges,
            empty_children,
        })
    }
}

/// A list of (x-box, y-box) interaction pairs, lexicographically sorted by
/// construction.
#[derive(Clone, Debug, Default)]
pub struct InteractionList {
    pub pairs: Vec<(u32, u32)>,
}

impl InteractionList {
    pub fn root() -> Self {
        InteractionList { pairs: vec![(0, 0)] }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Scan check used by tests and debug assertions; construction alone is
    /// responsible for keeping the list sorted.
    pub fn is_sorted(&self) -> bool {
        self.pairs.windows(2).all(|w| w[0] < w[1])
    }
}

/// Expand every parent pair into the Cartesian product of its surviving
/// children, preserving lexicographic order without any sort pass.
///
/// The expansion runs in two passes mirroring one box division per side:
/// first each x-parent is replaced by its children (children outer, the
/// parent's sorted partner list inner), then each y-parent is expanded in
/// place. Child id ranges are contiguous and parent-ordered, which makes both
/// passes order-preserving.
pub fn divide_interactions(
    pairs: &InteractionList,
    children_of_x: &[std::ops::Range<usize>],
    children_of_y: &[std::ops::Range<usize>],
) -> InteractionList {
    debug_assert!(pairs.is_sorted());
    // Pass 1: expand the x side group by group.
    let mut mid: Vec<(u32, u32)> = Vec::with_capacity(pairs.len() * 2);
    let list = &pairs.pairs;
    let mut i = 0;
    while i < list.len() {
        let p = list[i].0;
        let mut j = i;
        while j < list.len() && list[j].0 == p {
            j += 1;
        }
        for cx in children_of_x[p as usize].clone() {
            for pair in &list[i..j] {
                mid.push((cx as u32, pair.1));
            }
        }
        i = j;
    }
    // Pass 2: expand the y side pair by pair.
    let mut out: Vec<(u32, u32)> = Vec::with_capacity(mid.len() * 2);
    for (p, q) in mid {
        for cy in children_of_y[q as usize].clone() {
            out.push((p, cy as u32));
        }
    }
    let result = InteractionList { pairs: out };
    debug_assert!(result.is_sorted());
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr2, Array2};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn enclosing_cube_examples() {
        let x = arr2(&[[0.0], [2.0]]);
        let y = arr2(&[[1.0]]);
        let (cx, cy, edge) = compute_enclosing_cube(x.view(), y.view()).unwrap();
        assert_eq!(edge, 2.0);
        assert_eq!(cx.min_corner, vec![0.0]);
        assert_eq!(cy.min_corner, vec![1.0]);

        let p = arr2(&[[0.5, 0.5], [0.5, 0.5]]);
        let (_, _, zero_edge) = compute_enclosing_cube(p.view(), p.view()).unwrap();
        assert_eq!(zero_edge, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xu = Array2::from_shape_fn((50, 2), |_| rng.random::<f64>());
        let yu = Array2::from_shape_fn((50, 2), |_| rng.random::<f64>() * 3.0);
        let (_, _, e) = compute_enclosing_cube(xu.view(), yu.view()).unwrap();
        let expected = (0..2)
            .map(|d| {
                let col: Vec<f64> = yu.column(d).to_vec();
                col.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - col.iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max);
        assert_eq!(e, expected);

        let empty = Array2::<f64>::zeros((0, 2));
        assert!(compute_enclosing_cube(empty.view(), yu.view()).is_err());
    }

    #[test]
    fn box_index_examples() {
        // 1-D, depth 1: left/right of center.
        assert_eq!(box_index(&[1.5], 1, 2.0, &[0.0]).unwrap(), 1);
        assert_eq!(box_index(&[0.5], 1, 2.0, &[0.0]).unwrap(), 0);
        // 2-D, depth 1: β = c₁ + 2·c₂.
        assert_eq!(box_index(&[1.5, 0.5], 1, 2.0, &[0.0, 0.0]).unwrap(), 1);
        assert_eq!(box_index(&[0.5, 1.5], 1, 2.0, &[0.0, 0.0]).unwrap(), 2);
        // Max face clamps into the last box.
        assert_eq!(box_index(&[2.0], 2, 2.0, &[0.0]).unwrap(), 3);
        assert!(box_index(&[2.1], 1, 2.0, &[0.0]).is_err());
        assert!(box_index(&[-0.1], 1, 2.0, &[0.0]).is_err());
    }

    #[test]
    fn box_index_is_mixed_radix_at_depth_2() {
        // Depth 2 in 2-D: weights 1 and 4 per dimension.
        let beta = box_index(&[0.6, 0.3], 2, 1.0, &[0.0, 0.0]).unwrap();
        // c₁ = ⌊0.6·4⌋ = 2, c₂ = ⌊0.3·4⌋ = 1 → β = 2 + 4·1 = 6.
        assert_eq!(beta, 6);
    }

    #[test]
    fn group_points_examples() {
        let (perm, counts, offsets) = group_points(&[1, 0, 1, 2], 3);
        assert_eq!(counts, vec![1, 2, 1]);
        assert_eq!(offsets, vec![0, 1, 3]);
        assert_eq!(perm, vec![1, 0, 2, 3]);

        let (perm, _, _) = group_points(&[0, 0, 0, 0], 1);
        assert_eq!(perm, vec![0, 1, 2, 3]);

        let (perm, _, _) = group_points(&[0, 0, 1, 2, 2], 3);
        assert_eq!(perm, vec![0, 1, 2, 3, 4]);
    }

    fn sorted_copy(points: &Array2<f64>, perm: &[usize]) -> Array2<f64> {
        let dim = points.ncols();
        let mut out = Array2::zeros((perm.len(), dim));
        for (i, &p) in perm.iter().enumerate() {
            out.row_mut(i).assign(&points.row(p));
        }
        out
    }

    #[test]
    fn divide_splits_uniform_1d_evenly() {
        let n = 1000;
        let points = Array2::from_shape_fn((n, 1), |(i, _)| i as f64 / (n - 1) as f64);
        let (cube, _, edge) = compute_enclosing_cube(points.view(), points.view()).unwrap();
        let root = BoxTreeLevel::root(n, cube, edge);
        let divided = root.divide(points.view()).unwrap();
        assert_eq!(divided.level.num_boxes(), 2);
        let c0 = divided.level.boxes[0].count();
        let c1 = divided.level.boxes[1].count();
        assert_eq!(c0 + c1, n);
        assert!((c0 as i64 - c1 as i64).abs() <= 2);
    }

    #[test]
    fn empty_children_are_removed() {
        let points = arr2(&[[0.0], [0.1], [0.2], [1.0]]);
        // Data range [0, 1]; with all mass in the left half plus the max-face
        // point, dividing once keeps both children, but concentrating points
        // further drops empties.
        let left_only = arr2(&[[0.0], [0.1], [0.2], [0.3]]);
        let (cube, _, edge) = compute_enclosing_cube(points.view(), points.view()).unwrap();
        let root = BoxTreeLevel::root(4, cube, edge);
        let divided = root.divide(left_only.view()).unwrap();
        assert_eq!(divided.level.num_boxes(), 1);
        assert_eq!(divided.empty_children, 1);
        assert_eq!(divided.level.boxes[0].count(), 4);
    }

    #[test]
    fn lattice_reaches_singletons_in_logarithmic_divisions() {
        // 16³ lattice: each division shrinks occupancy by 2³, so 4 divisions
        // reach one point per box.
        let side = 16usize;
        let n = side * side * side;
        let mut data = Vec::with_capacity(n * 3);
        for i in 0..side {
            for j in 0..side {
                for k in 0..side {
                    data.push((i as f64 + 0.5) / side as f64);
                    data.push((j as f64 + 0.5) / side as f64);
                    data.push((k as f64 + 0.5) / side as f64);
                }
            }
        }
        let points = Array2::from_shape_vec((n, 3), data).unwrap();
        let (cube, _, edge) = compute_enclosing_cube(points.view(), points.view()).unwrap();
        let mut level = BoxTreeLevel::root(n, cube, edge);
        let mut sorted = points.clone();
        let mut divisions = 0;
        while level.max_box_count() > 1 {
            let divided = level.divide(sorted.view()).unwrap();
            sorted = sorted_copy(&points, &divided.level.perm);
            level = divided.level;
            divisions += 1;
            assert!(divisions <= 4, "exceeded the division bound");
        }
        assert_eq!(divisions, 4);
        assert_eq!(level.num_boxes(), n);
    }

    #[test]
    fn permutation_stays_bijective_and_memberships_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 500;
        let points = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
        let (cube, _, edge) = compute_enclosing_cube(points.view(), points.view()).unwrap();
        let mut level = BoxTreeLevel::root(n, cube, edge);
        let mut sorted = points.clone();
        for _ in 0..4 {
            let divided = level.divide(sorted.view()).unwrap();
            sorted = sorted_copy(&points, &divided.level.perm);
            level = divided.level;

            let mut seen = vec![false; n];
            for &p in &level.perm {
                assert!(!seen[p]);
                seen[p] = true;
            }
            let mut covered = 0;
            let mut center = vec![0.0; 2];
            for (id, b) in level.boxes.iter().enumerate() {
                covered += b.count();
                level.center_of(id, &mut center);
                let half = level.edge / 2.0;
                for i in b.start..b.end {
                    for d in 0..2 {
                        let v = sorted[[i, d]];
                        assert!(
                            v >= center[d] - half - 1e-12 && v <= center[d] + half + 1e-12,
                            "point escaped its box"
                        );
                    }
                }
            }
            assert_eq!(covered, n);
        }
    }

    #[test]
    fn interaction_division_examples() {
        // One pair, both boxes split into two surviving children.
        let pairs = InteractionList::root();
        let ranges = vec![0..2];
        let out = divide_interactions(&pairs, &ranges, &ranges);
        assert_eq!(out.pairs, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);

        // One y child empty: only two pairs survive.
        let out = divide_interactions(&pairs, &vec![0..2], &vec![0..1]);
        assert_eq!(out.pairs, vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn interaction_division_matches_reference_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let parents_x = rng.random_range(1..5usize);
            let parents_y = rng.random_range(1..5usize);
            let mut ranges_x = Vec::new();
            let mut next = 0usize;
            for _ in 0..parents_x {
                let k = rng.random_range(0..3usize);
                ranges_x.push(next..next + k);
                next += k;
            }
            let mut ranges_y = Vec::new();
            next = 0;
            for _ in 0..parents_y {
                let k = rng.random_range(0..3usize);
                ranges_y.push(next..next + k);
                next += k;
            }
            let mut pairs = Vec::new();
            for p in 0..parents_x {
                for q in 0..parents_y {
                    if rng.random::<f64>() < 0.5 {
                        pairs.push((p as u32, q as u32));
                    }
                }
            }
            pairs.sort();
            let list = InteractionList { pairs: pairs.clone() };
            let out = divide_interactions(&list, &ranges_x, &ranges_y);
            let mut reference = Vec::new();
            for (p, q) in pairs {
                for cx in ranges_x[p as usize].clone() {
                    for cy in ranges_y[q as usize].clone() {
                        reference.push((cx as u32, cy as u32));
                    }
                }
            }
            reference.sort();
            assert_eq!(out.pairs, reference);
            assert!(out.is_sorted());
        }
    }
}
