//! Implicit structured tetrahedral mesh over a box domain.
//!
//! Cells are never stored. A cell is addressed by its cube index `(i, j, k)`
//! and a tetrahedron index `t in 0..6` from the Kuhn subdivision of the cube
//! (the six tetrahedra sharing the main diagonal). Vertex positions and cell
//! geometry are pure functions of the indices, so only the narrow band around
//! the surface ever gets materialized by the callers.

use crate::error::{Error, Result};
use crate::Vec3;

/// The six axis permutations of the Kuhn subdivision, in lexicographic order.
/// Tetrahedron `t` of the unit cube is the region
/// `{ y : y[p0] >= y[p1] >= y[p2] }` for `(p0, p1, p2) = PERMS[t]`.
pub const PERMS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Mesh size for refinement level `l` of the paper's box hierarchy.
pub fn mesh_size(level: u32) -> f64 {
    (10.0 / 3.0) * 2f64.powi(-(level as i32) - 2)
}

/// Lattice vertex, addressed by integer coordinates. The vertex position is
/// `origin + h * (i, j, k)`, computed identically everywhere so it is
/// bit-reproducible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub [i64; 3]);

/// One Kuhn tetrahedron: cube index plus subdivision index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub cube: [i64; 3],
    pub tet: u8,
}

/// Uniform background lattice over a box.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    pub origin: Vec3,
    pub extents: [f64; 3],
    /// Refinement level; `h = 2^(-level-2) * 10/3` when built from a level.
    pub level: u32,
    pub h: f64,
    /// Number of cubes per axis.
    pub cubes: [i64; 3],
}

impl LatticeSpec {
    /// Lattice at refinement level `level` of the standard hierarchy.
    pub fn from_level(origin: Vec3, extents: [f64; 3], level: u32) -> Result<Self> {
        Self::with_mesh_size(origin, extents, level, mesh_size(level))
    }

    /// Lattice with an explicit mesh size (generic boxes). Each box side must
    /// be an integer multiple of `h` to 1e-12 relative.
    pub fn with_mesh_size(origin: Vec3, extents: [f64; 3], level: u32, h: f64) -> Result<Self> {
        if h <= 0.0 {
            return Err(Error::InvalidParameter(format!("mesh size h = {h}")));
        }
        let mut cubes = [0i64; 3];
        for d in 0..3 {
            let n = (extents[d] / h).round();
            if n < 1.0 || (extents[d] - n * h).abs() > 1e-12 * extents[d].abs() {
                return Err(Error::InvalidParameter(format!(
                    "box side {} is not an integer multiple of h = {h}",
                    extents[d]
                )));
            }
            cubes[d] = n as i64;
        }
        Ok(Self { origin, extents, level, h, cubes })
    }

    /// The once-refined lattice (same box, `h/2`), carrying the half-size
    /// nodes used by the level-set interpolant.
    pub fn refined(&self) -> Self {
        Self {
            origin: self.origin,
            extents: self.extents,
            level: self.level + 1,
            h: 0.5 * self.h,
            cubes: [self.cubes[0] * 2, self.cubes[1] * 2, self.cubes[2] * 2],
        }
    }

    pub fn node_position(&self, node: NodeId) -> Vec3 {
        Vec3::new(
            self.origin.x + self.h * node.0[0] as f64,
            self.origin.y + self.h * node.0[1] as f64,
            self.origin.z + self.h * node.0[2] as f64,
        )
    }

    pub fn cube_in_bounds(&self, cube: [i64; 3]) -> bool {
        (0..3).all(|d| cube[d] >= 0 && cube[d] < self.cubes[d])
    }

    /// The four vertex nodes of a cell, ordered along the Kuhn path from the
    /// cube origin to the opposite corner.
    pub fn cell_nodes(&self, cell: CellId) -> [NodeId; 4] {
        let p = PERMS[cell.tet as usize];
        let mut v = [cell.cube; 4];
        v[1][p[0]] += 1;
        v[2][p[0]] += 1;
        v[2][p[1]] += 1;
        v[3] = [cell.cube[0] + 1, cell.cube[1] + 1, cell.cube[2] + 1];
        [NodeId(v[0]), NodeId(v[1]), NodeId(v[2]), NodeId(v[3])]
    }

    /// Vertex positions of a cell. Errors on out-of-bounds cells.
    pub fn cell_vertices(&self, cell: CellId) -> Result<[Vec3; 4]> {
        if !self.cube_in_bounds(cell.cube) || cell.tet > 5 {
            return Err(Error::CellOutOfBounds(cell));
        }
        let n = self.cell_nodes(cell);
        Ok([
            self.node_position(n[0]),
            self.node_position(n[1]),
            self.node_position(n[2]),
            self.node_position(n[3]),
        ])
    }

    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h / 6.0
    }

    /// Barycentric coordinates of `x` w.r.t. the cell, in vertex order.
    pub fn barycentric(&self, cell: CellId, x: Vec3) -> [f64; 4] {
        let p = PERMS[cell.tet as usize];
        let y = self.local_coords(cell.cube, x);
        [1.0 - y[p[0]], y[p[0]] - y[p[1]], y[p[1]] - y[p[2]], y[p[2]]]
    }

    /// Coordinates of `x` relative to the cube origin, in units of `h`.
    fn local_coords(&self, cube: [i64; 3], x: Vec3) -> [f64; 3] {
        let o = self.node_position(NodeId(cube));
        [(x.x - o.x) / self.h, (x.y - o.y) / self.h, (x.z - o.z) / self.h]
    }

    /// Cell containing `x`. Points on shared faces resolve to the
    /// lexicographically smallest `(cube, tet)`, so the result is a pure
    /// function of `x`.
    pub fn locate_point(&self, x: Vec3) -> Result<CellId> {
        let mut cube = [0i64; 3];
        let xs = [x.x, x.y, x.z];
        let os = [self.origin.x, self.origin.y, self.origin.z];
        for d in 0..3 {
            let u = (xs[d] - os[d]) / self.h;
            if u < -1e-12 || u > self.cubes[d] as f64 + 1e-12 {
                return Err(Error::OutOfDomain(x));
            }
            let mut i = u.floor() as i64;
            // Exact face hit: take the lower cube. Also clamps the far wall.
            if i > 0 && (u == i as f64 || i >= self.cubes[d]) {
                i -= 1;
            }
            cube[d] = i.clamp(0, self.cubes[d] - 1);
        }
        let y = self.local_coords(cube, x);
        // Sort axes by descending local coordinate; ties keep axis order, so
        // the first matching permutation is the lexicographically smallest.
        let mut axes = [0usize, 1, 2];
        axes.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap().then(a.cmp(&b)));
        let tet = PERMS.iter().position(|p| *p == axes).unwrap() as u8;
        Ok(CellId { cube, tet })
    }

    /// All cells of `x`'s cube and the adjacent cubes whose closed tetrahedron
    /// contains `x` (barycentric coordinates >= -tol). Used to resolve points
    /// on faces against a restricted active set.
    pub fn containing_cells(&self, x: Vec3, tol: f64) -> Vec<CellId> {
        let mut out = Vec::new();
        let Ok(canonical) = self.locate_point(x) else {
            return out;
        };
        let c0 = canonical.cube;
        for di in -1..=1i64 {
            for dj in -1..=1i64 {
                for dk in -1..=1i64 {
                    let cube = [c0[0] + di, c0[1] + dj, c0[2] + dk];
                    if !self.cube_in_bounds(cube) {
                        continue;
                    }
                    let y = self.local_coords(cube, x);
                    if y.iter().any(|&v| !(-tol..=1.0 + tol).contains(&v)) {
                        continue;
                    }
                    for tet in 0..6u8 {
                        let cell = CellId { cube, tet };
                        if self.barycentric(cell, x).iter().all(|&b| b >= -tol) {
                            out.push(cell);
                        }
                    }
                }
            }
        }
        out
    }

    /// Superset of the cells intersecting the ball, from integer index ranges.
    pub fn cells_overlapping_ball(&self, center: Vec3, radius: f64) -> impl Iterator<Item = CellId> + '_ {
        assert!(radius > 0.0, "ball radius must be positive");
        let lo = center - Vec3::repeat(radius);
        let hi = center + Vec3::repeat(radius);
        let mut lo_i = [0i64; 3];
        let mut hi_i = [0i64; 3];
        let los = [lo.x, lo.y, lo.z];
        let his = [hi.x, hi.y, hi.z];
        let os = [self.origin.x, self.origin.y, self.origin.z];
        for d in 0..3 {
            lo_i[d] = (((los[d] - os[d]) / self.h).floor() as i64).clamp(0, self.cubes[d] - 1);
            hi_i[d] = (((his[d] - os[d]) / self.h).floor() as i64).clamp(0, self.cubes[d] - 1);
        }
        (lo_i[0]..=hi_i[0]).flat_map(move |i| {
            (lo_i[1]..=hi_i[1]).flat_map(move |j| {
                (lo_i[2]..=hi_i[2])
                    .flat_map(move |k| (0..6u8).map(move |tet| CellId { cube: [i, j, k], tet }))
            })
        })
    }

    /// The four face neighbors of a cell (fewer on the box boundary).
    pub fn face_neighbors(&self, cell: CellId) -> Vec<CellId> {
        let p = PERMS[cell.tet as usize];
        let perm_index = |q: [usize; 3]| PERMS.iter().position(|r| *r == q).unwrap() as u8;
        let mut out = Vec::with_capacity(4);
        // Interior faces: swap adjacent entries of the permutation.
        out.push(CellId { cube: cell.cube, tet: perm_index([p[1], p[0], p[2]]) });
        out.push(CellId { cube: cell.cube, tet: perm_index([p[0], p[2], p[1]]) });
        // Exterior faces: across the cube walls y[p0] = 1 and y[p2] = 0.
        let mut fwd = cell.cube;
        fwd[p[0]] += 1;
        if self.cube_in_bounds(fwd) {
            out.push(CellId { cube: fwd, tet: perm_index([p[1], p[2], p[0]]) });
        }
        let mut bwd = cell.cube;
        bwd[p[2]] -= 1;
        if self.cube_in_bounds(bwd) {
            out.push(CellId { cube: bwd, tet: perm_index([p[2], p[0], p[1]]) });
        }
        out
    }

    /// Constant P1 shape-function gradients of a cell, in vertex order.
    pub fn shape_gradients(&self, cell: CellId) -> [Vec3; 4] {
        let p = PERMS[cell.tet as usize];
        let e = [Vec3::x(), Vec3::y(), Vec3::z()];
        let inv_h = 1.0 / self.h;
        [
            -e[p[0]] * inv_h,
            (e[p[0]] - e[p[1]]) * inv_h,
            (e[p[1]] - e[p[2]]) * inv_h,
            e[p[2]] * inv_h,
        ]
    }

    /// Map from a child cell of the refined lattice to its parent cell here.
    /// Kuhn subdivisions nest: each half-size tetrahedron lies inside exactly
    /// one parent tetrahedron.
    pub fn parent_of_child(&self, child: CellId) -> CellId {
        let cube = [
            child.cube[0].div_euclid(2),
            child.cube[1].div_euclid(2),
            child.cube[2].div_euclid(2),
        ];
        let octant = [
            child.cube[0].rem_euclid(2) as usize,
            child.cube[1].rem_euclid(2) as usize,
            child.cube[2].rem_euclid(2) as usize,
        ];
        let oct_index = octant[0] * 4 + octant[1] * 2 + octant[2];
        CellId { cube, tet: child_parent_table()[oct_index][child.tet as usize] }
    }
}

/// `table[octant][child_tet] -> parent_tet`, derived from the barycenter of
/// the child tetrahedron in parent-cube coordinates.
fn child_parent_table() -> &'static [[u8; 6]; 8] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[[u8; 6]; 8]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [[0u8; 6]; 8];
        for oct in 0..8usize {
            let o = [(oct >> 2) & 1, (oct >> 1) & 1, oct & 1];
            for (t, p) in PERMS.iter().enumerate() {
                // Child-tet barycenter in child-cube coordinates.
                let mut b = [0.0f64; 3];
                b[p[0]] = 0.75;
                b[p[1]] = 0.5;
                b[p[2]] = 0.25;
                // Lift to parent-cube coordinates; entries are always distinct.
                let y = [
                    (o[0] as f64 + b[0]) / 2.0,
                    (o[1] as f64 + b[1]) / 2.0,
                    (o[2] as f64 + b[2]) / 2.0,
                ];
                let mut axes = [0usize, 1, 2];
                axes.sort_by(|&a, &c| y[c].partial_cmp(&y[a]).unwrap());
                table[oct][t] = PERMS.iter().position(|q| *q == axes).unwrap() as u8;
            }
        }
        table
    })
}

/// Signed volume of a tetrahedron.
pub fn signed_volume(v: &[Vec3; 4]) -> f64 {
    (v[1] - v[0]).cross(&(v[2] - v[0])).dot(&(v[3] - v[0])) / 6.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn unit_box() -> LatticeSpec {
        LatticeSpec::with_mesh_size(Vec3::zeros(), [1.0, 1.0, 1.0], 0, 1.0).unwrap()
    }

    fn paper_box(level: u32) -> LatticeSpec {
        LatticeSpec::from_level(
            Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
            [10.0 / 3.0, 10.0 / 3.0, 10.0 / 3.0],
            level,
        )
        .unwrap()
    }

    #[test]
    fn mesh_size_matches_level_formula() {
        assert_relative_eq!(mesh_size(0), 10.0 / 12.0, max_relative = 1e-15);
        assert_relative_eq!(mesh_size(5), 10.0 / 3.0 / 128.0, max_relative = 1e-15);
        assert_relative_eq!(mesh_size(2), 0.5 * mesh_size(1), max_relative = 1e-15);
    }

    #[test]
    fn paper_domains_are_lattice_compatible() {
        for level in 0..6 {
            let h = mesh_size(level);
            LatticeSpec::with_mesh_size(
                Vec3::new(-5.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
                [5.0, 10.0 / 3.0, 10.0 / 3.0],
                level,
                h,
            )
            .unwrap();
            LatticeSpec::with_mesh_size(
                Vec3::new(-10.0 / 3.0, -5.0 / 3.0, -5.0 / 3.0),
                [20.0 / 3.0, 10.0 / 3.0, 10.0 / 3.0],
                level,
                h,
            )
            .unwrap();
        }
    }

    #[test]
    fn kuhn_tets_have_volume_one_sixth() {
        let lat = unit_box();
        let mut total = 0.0;
        for tet in 0..6 {
            let v = lat.cell_vertices(CellId { cube: [0, 0, 0], tet }).unwrap();
            let vol = signed_volume(&v).abs();
            assert_relative_eq!(vol, 1.0 / 6.0, max_relative = 1e-14);
            total += vol;
        }
        assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn tets_share_main_diagonal() {
        let lat = paper_box(1);
        let cube = [2, 1, 3];
        for tet in 0..6 {
            let n = lat.cell_nodes(CellId { cube, tet });
            assert_eq!(n[0], NodeId(cube));
            assert_eq!(n[3], NodeId([cube[0] + 1, cube[1] + 1, cube[2] + 1]));
        }
    }

    #[test]
    fn cell_vertices_are_reproducible() {
        let lat = paper_box(2);
        let cell = CellId { cube: [0, 0, 0], tet: 0 };
        let a = lat.cell_vertices(cell).unwrap();
        let b = lat.cell_vertices(cell).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn out_of_bounds_cell_rejected() {
        let lat = unit_box();
        assert!(lat.cell_vertices(CellId { cube: [1, 0, 0], tet: 0 }).is_err());
        assert!(lat.cell_vertices(CellId { cube: [-1, 0, 0], tet: 0 }).is_err());
    }

    #[test]
    fn locate_barycenter_roundtrip() {
        let lat = paper_box(2);
        let cell = CellId { cube: [3, 4, 5], tet: 2 };
        let v = lat.cell_vertices(cell).unwrap();
        let bary = (v[0] + v[1] + v[2] + v[3]) / 4.0;
        assert_eq!(lat.locate_point(bary).unwrap(), cell);
    }

    #[test]
    fn locate_on_face_is_stable() {
        let lat = paper_box(1);
        // A point exactly on a cube wall.
        let x = lat.node_position(NodeId([2, 1, 1])) + Vec3::new(0.0, 0.3, 0.1) * lat.h;
        let first = lat.locate_point(x).unwrap();
        for _ in 0..10 {
            assert_eq!(lat.locate_point(x).unwrap(), first);
        }
        assert!(lat.barycentric(first, x).iter().all(|&b| b >= -1e-12));
    }

    #[test]
    fn locate_containment_random_points() {
        let lat = paper_box(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x = Vec3::new(
                rng.gen_range(-5.0 / 3.0..5.0 / 3.0),
                rng.gen_range(-5.0 / 3.0..5.0 / 3.0),
                rng.gen_range(-5.0 / 3.0..5.0 / 3.0),
            );
            let cell = lat.locate_point(x).unwrap();
            let b = lat.barycentric(cell, x);
            assert!(b.iter().all(|&v| v >= -1e-12), "x={x:?} cell={cell:?} bary={b:?}");
        }
    }

    #[test]
    fn kuhn_partition_is_exact_monte_carlo() {
        let lat = unit_box();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let x = Vec3::new(rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>());
            let mut strict = 0;
            for tet in 0..6 {
                let b = lat.barycentric(CellId { cube: [0, 0, 0], tet }, x);
                if b.iter().all(|&v| v > 1e-12) {
                    strict += 1;
                }
                assert!(b.iter().sum::<f64>() - 1.0 < 1e-12);
            }
            // Interior points of one tet belong to exactly one; face points to none strictly.
            assert!(strict <= 1);
            let weak = (0..6)
                .filter(|&tet| {
                    lat.barycentric(CellId { cube: [0, 0, 0], tet }, x).iter().all(|&v| v >= -1e-12)
                })
                .count();
            assert!(weak >= 1, "point {x:?} not covered");
        }
    }

    #[test]
    fn face_neighbors_share_a_face() {
        let lat = paper_box(1);
        let cell = CellId { cube: [2, 2, 2], tet: 3 };
        let verts: std::collections::BTreeSet<_> = lat.cell_nodes(cell).into_iter().collect();
        let neighbors = lat.face_neighbors(cell);
        assert_eq!(neighbors.len(), 4);
        for n in neighbors {
            let nv: std::collections::BTreeSet<_> = lat.cell_nodes(n).into_iter().collect();
            assert_eq!(verts.intersection(&nv).count(), 3, "cell {cell:?} neighbor {n:?}");
        }
    }

    #[test]
    fn children_nest_in_parent() {
        let lat = paper_box(1);
        let fine = lat.refined();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let child = CellId {
                cube: [rng.gen_range(0..fine.cubes[0]), rng.gen_range(0..fine.cubes[1]), rng.gen_range(0..fine.cubes[2])],
                tet: rng.gen_range(0..6),
            };
            let parent = lat.parent_of_child(child);
            let vs = fine.cell_vertices(child).unwrap();
            for corner in &vs {
                let b = lat.barycentric(parent, *corner);
                assert!(b.iter().all(|&v| v >= -1e-12), "child {child:?} corner outside parent {parent:?}");
            }
        }
    }

    #[test]
    fn shape_gradients_match_finite_differences() {
        let lat = paper_box(2);
        let cell = CellId { cube: [1, 2, 3], tet: 4 };
        let grads = lat.shape_gradients(cell);
        let v = lat.cell_vertices(cell).unwrap();
        let x0 = (v[0] + v[1] + v[2] + v[3]) / 4.0;
        let eps = 1e-6;
        for i in 0..4 {
            for d in 0..3 {
                let mut xp = x0;
                let mut xm = x0;
                xp[d] += eps;
                xm[d] -= eps;
                let fd = (lat.barycentric(cell, xp)[i] - lat.barycentric(cell, xm)[i]) / (2.0 * eps);
                assert_relative_eq!(grads[i][d], fd, epsilon = 1e-8);
            }
        }
        let sum: Vec3 = grads.iter().sum();
        assert!(sum.norm() < 1e-14 / lat.h);
    }

    #[test]
    fn overlapping_ball_is_superset() {
        let lat = paper_box(2);
        let center = Vec3::new(0.1, -0.2, 0.3);
        let radius = 0.5;
        let cells: std::collections::HashSet<_> =
            lat.cells_overlapping_ball(center, radius).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            // Random point in the ball.
            let dir = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            let x = center + dir.normalize() * (radius * rng.gen::<f64>());
            let cell = lat.locate_point(x).unwrap();
            assert!(cells.contains(&cell));
        }
    }

    proptest! {
        #[test]
        fn prop_locate_containment(
            xf in -1.6f64..1.6,
            yf in -1.6f64..1.6,
            zf in -1.6f64..1.6,
        ) {
            let lat = paper_box(1);
            let x = Vec3::new(xf, yf, zf);
            let cell = lat.locate_point(x).unwrap();
            let b = lat.barycentric(cell, x);
            prop_assert!(b.iter().all(|&v| v >= -1e-12));
        }
    }
}
