//! Narrow band construction and discrete-surface extraction.
//!
//! The discrete surface is the zero set of the P1 level-set interpolant on
//! the half-size lattice. Marching tetrahedra over the half-size Kuhn cells
//! produces its triangles; every triangle nests inside exactly one size-h
//! parent cell. The narrow band collects all parent cells that are cut plus
//! all cells whose closest vertex value satisfies `|phi_h| <= delta`.

use std::collections::VecDeque;

use rustc_hash::{FxHashMap, FxHashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{CellId, LatticeSpec, NodeId, PERMS};
use crate::levelset::DiscreteLevelSet;
use crate::Vec3;

/// Minimum band half-width for a step window: `c_delta * dt * bound`, where
/// `bound` overestimates `sup |u . n|` over the window.
pub fn band_width(dt: f64, velocity_bound: f64, c_delta: f64) -> f64 {
    assert!(c_delta >= 1.0, "c_delta must be >= 1");
    c_delta * dt * velocity_bound
}

/// Per-cell classification data gathered while the band is selected.
#[derive(Debug, Clone, Copy)]
struct CellInfo {
    cut: bool,
    /// Smallest `|phi_h|` over the cell's four vertices.
    min_corner_abs: f64,
    /// For cut cells: smallest magnitude by which the nodal values clear
    /// zero on both sides (a sign-change reserve). Zero for uncut cells.
    cut_margin: f64,
}

/// Active cells and nodes around the discrete surface at one time.
#[derive(Debug, Clone)]
pub struct NarrowBand {
    pub lattice: LatticeSpec,
    pub time: f64,
    pub delta: f64,
    /// Sorted active cells.
    pub cells: Vec<CellId>,
    pub cut: Vec<bool>,
    /// Classification reserve per cell, in level-set units: how far the
    /// nodal values are from dropping the cell out of the band.
    reserve: Vec<f64>,
    cell_index: FxHashMap<CellId, u32>,
    /// Sorted union of the vertices of active cells.
    pub nodes: Vec<NodeId>,
    node_index: FxHashMap<NodeId, u32>,
    /// Half-lattice nodal values per cut cube, for surface extraction.
    cut_cube_values: FxHashMap<[i64; 3], [f64; 27]>,
}

impl NarrowBand {
    /// Low-level constructor over an explicit cell list (no flood fill, no
    /// classification data). Cells set up this way cannot feed
    /// `extract_surface`; hand the surface in directly instead.
    pub fn from_parts(
        lattice: LatticeSpec,
        time: f64,
        delta: f64,
        mut cells: Vec<CellId>,
        cut: Vec<bool>,
    ) -> Self {
        assert_eq!(cells.len(), cut.len());
        cells.sort();
        let cell_index: FxHashMap<CellId, u32> =
            cells.iter().enumerate().map(|(i, c)| (*c, i as u32)).collect();
        let mut node_set: FxHashSet<NodeId> = FxHashSet::default();
        for cell in &cells {
            for n in lattice.cell_nodes(*cell) {
                node_set.insert(n);
            }
        }
        let mut nodes: Vec<NodeId> = node_set.into_iter().collect();
        nodes.sort();
        let node_index: FxHashMap<NodeId, u32> =
            nodes.iter().enumerate().map(|(i, n)| (*n, i as u32)).collect();
        let n_cells = cells.len();
        Self {
            lattice,
            time,
            delta,
            cells,
            cut,
            reserve: vec![0.0; n_cells],
            cell_index,
            nodes,
            node_index,
            cut_cube_values: FxHashMap::default(),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cut_cell_count(&self) -> usize {
        self.cut.iter().filter(|&&c| c).count()
    }

    pub fn cell_position(&self, cell: &CellId) -> Option<usize> {
        self.cell_index.get(cell).map(|&i| i as usize)
    }

    pub fn is_active(&self, cell: &CellId) -> bool {
        self.cell_index.contains_key(cell)
    }

    pub fn node_position(&self, node: &NodeId) -> Option<usize> {
        self.node_index.get(node).map(|&i| i as usize)
    }

    /// An active cell whose closed tetrahedron contains `x`, resolving points
    /// on faces against the active set. The canonical cell is preferred.
    pub fn containing_active_cell(&self, x: Vec3) -> Option<CellId> {
        if let Ok(cell) = self.lattice.locate_point(x) {
            if self.is_active(&cell) {
                return Some(cell);
            }
        }
        self.lattice
            .containing_cells(x, 1e-12)
            .into_iter()
            .find(|cell| self.is_active(cell))
    }
}

/// Local index into a cube's 3x3x3 block of half-lattice nodes.
fn local_index(a: i64, b: i64, c: i64) -> usize {
    (a * 9 + b * 3 + c) as usize
}

/// `children_of_parent()[t]` lists the `(octant, child_tet)` pairs whose
/// half-size tetrahedron lies inside parent tetrahedron `t`.
fn children_of_parent() -> &'static [Vec<([i64; 3], u8)>; 6] {
    use std::sync::OnceLock;
    static TABLE: OnceLock<[Vec<([i64; 3], u8)>; 6]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let probe = LatticeSpec::with_mesh_size(Vec3::zeros(), [2.0, 2.0, 2.0], 0, 1.0).unwrap();
        let mut table: [Vec<([i64; 3], u8)>; 6] = Default::default();
        for oi in 0..2i64 {
            for oj in 0..2i64 {
                for ok in 0..2i64 {
                    for s in 0..6u8 {
                        let child = CellId { cube: [oi, oj, ok], tet: s };
                        let parent = probe.parent_of_child(child);
                        debug_assert_eq!(parent.cube, [0, 0, 0]);
                        table[parent.tet as usize].push(([oi, oj, ok], s));
                    }
                }
            }
        }
        table
    })
}

/// Half-lattice node offsets (in units of h/2 relative to the cube origin) of
/// child tetrahedron `tet` of octant `octant`.
fn child_node_offsets(octant: [i64; 3], tet: u8) -> [[i64; 3]; 4] {
    let p = PERMS[tet as usize];
    let mut v = [octant; 4];
    v[1][p[0]] += 1;
    v[2][p[0]] += 1;
    v[2][p[1]] += 1;
    v[3] = [octant[0] + 1, octant[1] + 1, octant[2] + 1];
    v
}

/// Nodal values of the half-lattice interpolant over one cube.
fn cube_values(dls: &DiscreteLevelSet, cube: [i64; 3]) -> [f64; 27] {
    let mut vals = [0.0; 27];
    for a in 0..3i64 {
        for b in 0..3i64 {
            for c in 0..3i64 {
                let node = NodeId([2 * cube[0] + a, 2 * cube[1] + b, 2 * cube[2] + c]);
                vals[local_index(a, b, c)] = dls.half_node_value(node);
            }
        }
    }
    vals
}

fn classify_cell(cell: CellId, vals: &[f64; 27]) -> CellInfo {
    let p = PERMS[cell.tet as usize];
    // The four cell vertices are cube corners.
    let mut corners = [[0i64; 3]; 4];
    corners[1][p[0]] = 2;
    corners[2][p[0]] = 2;
    corners[2][p[1]] = 2;
    corners[3] = [2, 2, 2];
    let min_corner_abs = corners
        .iter()
        .map(|c| vals[local_index(c[0], c[1], c[2])].abs())
        .fold(f64::INFINITY, f64::min);

    let mut max_pos = f64::NEG_INFINITY;
    let mut min_neg = f64::INFINITY;
    let mut cut = false;
    for (octant, s) in &children_of_parent()[cell.tet as usize] {
        let offs = child_node_offsets(*octant, *s);
        let mut pos = false;
        let mut neg = false;
        for o in &offs {
            let v = vals[local_index(o[0], o[1], o[2])];
            if v > 0.0 {
                pos = true;
                max_pos = max_pos.max(v);
            } else {
                neg = true;
                min_neg = min_neg.min(v);
            }
        }
        cut |= pos && neg;
    }
    let cut_margin = if cut { f64::min(max_pos, -min_neg) } else { 0.0 };
    CellInfo { cut, min_corner_abs, cut_margin }
}

/// Cells that do not share a vertex are separated by a fixed fraction of the
/// mesh size (the tightest configuration in the Kuhn lattice is well above
/// `h/2`); one vertex ring therefore covers at least this much clearance.
const RING_GAP_FACTOR: f64 = 1.0 / 3.0;

/// Flood-fills the active region from analytic surface seeds, breadth-first
/// over face neighbors.
///
/// The band must contain every cell within distance `delta` of the discrete
/// surface. Nodal level-set values only bound that distance up to the cell
/// diameter times the local gradient, so two sufficient conditions admit a
/// cell: a vertex satisfies `|phi_h| <= delta`, or the cell lies within
/// `ceil(delta / (h/3))` vertex rings of a cut cell (each ring covers at
/// least `h/3` of clearance). With `delta = 0` the band is exactly the cut
/// cells.
pub fn select_band(lattice: &LatticeSpec, dls: &DiscreteLevelSet, delta: f64) -> Result<NarrowBand> {
    assert!(delta >= 0.0);
    let max_radius = lattice.extents.iter().cloned().fold(0.0, f64::max);
    let seeds = dls.field.surface_seeds(dls.time, max_radius);

    let h = lattice.h;
    let metric_threshold = delta;
    let rings = if delta > 0.0 {
        (delta / (RING_GAP_FACTOR * h)).ceil().max(1.0) as usize
    } else {
        0
    };

    let mut values: FxHashMap<[i64; 3], [f64; 27]> = FxHashMap::default();
    let mut info_of: FxHashMap<CellId, CellInfo> = FxHashMap::default();
    let mut active: Vec<(CellId, CellInfo)> = Vec::new();
    let mut visited: FxHashSet<CellId> = FxHashSet::default();
    let mut queue: VecDeque<CellId> = VecDeque::new();

    let probe = |cell: CellId,
                 values: &mut FxHashMap<[i64; 3], [f64; 27]>,
                 info_of: &mut FxHashMap<CellId, CellInfo>|
     -> CellInfo {
        *info_of.entry(cell).or_insert_with(|| {
            let vals = values.entry(cell.cube).or_insert_with(|| cube_values(dls, cell.cube));
            classify_cell(cell, vals)
        })
    };

    for seed in &seeds {
        let Ok(canonical) = lattice.locate_point(*seed) else {
            continue;
        };
        for di in -1..=1i64 {
            for dj in -1..=1i64 {
                for dk in -1..=1i64 {
                    let cube = [
                        canonical.cube[0] + di,
                        canonical.cube[1] + dj,
                        canonical.cube[2] + dk,
                    ];
                    if !lattice.cube_in_bounds(cube) {
                        continue;
                    }
                    for tet in 0..6u8 {
                        let cell = CellId { cube, tet };
                        if visited.contains(&cell) {
                            continue;
                        }
                        let info = probe(cell, &mut values, &mut info_of);
                        if info.cut || info.min_corner_abs <= metric_threshold {
                            visited.insert(cell);
                            queue.push_back(cell);
                            active.push((cell, info));
                        }
                    }
                }
            }
        }
    }

    while let Some(cell) = queue.pop_front() {
        for nb in lattice.face_neighbors(cell) {
            if visited.contains(&nb) {
                continue;
            }
            let info = probe(nb, &mut values, &mut info_of);
            if info.cut || info.min_corner_abs <= metric_threshold {
                visited.insert(nb);
                queue.push_back(nb);
                active.push((nb, info));
            }
        }
    }

    if !active.iter().any(|(_, info)| info.cut) {
        return Err(Error::EmptyBand(dls.time));
    }

    if rings > 0 {
        // Vertex-ring expansion from the cut shell: the surface can only
        // enter a ring cell during the window when it moves by less than the
        // per-ring clearance. A ring cell inherits its admitter's reserve.
        let mut frontier: Vec<(CellId, f64)> = active
            .iter()
            .filter(|(_, i)| i.cut)
            .map(|(c, i)| (*c, i.cut_margin))
            .collect();
        frontier.sort_by(|a, b| a.0.cmp(&b.0));
        for _ in 0..rings {
            let mut next: Vec<(CellId, f64)> = Vec::new();
            for (cell, reserve) in &frontier {
                for node in lattice.cell_nodes(*cell) {
                    for di in -1..=0i64 {
                        for dj in -1..=0i64 {
                            for dk in -1..=0i64 {
                                let cube =
                                    [node.0[0] + di, node.0[1] + dj, node.0[2] + dk];
                                if !lattice.cube_in_bounds(cube) {
                                    continue;
                                }
                                for tet in 0..6u8 {
                                    let nb = CellId { cube, tet };
                                    if visited.contains(&nb) {
                                        continue;
                                    }
                                    if !lattice.cell_nodes(nb).contains(&node) {
                                        continue;
                                    }
                                    let mut info = probe(nb, &mut values, &mut info_of);
                                    if !info.cut {
                                        info.cut_margin = *reserve;
                                    }
                                    visited.insert(nb);
                                    active.push((nb, info));
                                    next.push((nb, *reserve));
                                }
                            }
                        }
                    }
                }
            }
            next.sort_by(|a, b| a.0.cmp(&b.0));
            frontier = next;
        }
    }

    active.sort_by_key(|(cell, _)| *cell);
    let cells: Vec<CellId> = active.iter().map(|(c, _)| *c).collect();
    let cut: Vec<bool> = active.iter().map(|(_, i)| i.cut).collect();
    let reserve: Vec<f64> = active
        .iter()
        .map(|(_, i)| {
            if i.cut {
                i.cut_margin
            } else if i.min_corner_abs <= metric_threshold {
                metric_threshold - i.min_corner_abs
            } else {
                // Ring cell; carries the admitting neighbor's reserve.
                i.cut_margin
            }
        })
        .collect();
    let cell_index: FxHashMap<CellId, u32> =
        cells.iter().enumerate().map(|(i, c)| (*c, i as u32)).collect();

    let mut node_set: FxHashSet<NodeId> = FxHashSet::default();
    for cell in &cells {
        for n in lattice.cell_nodes(*cell) {
            node_set.insert(n);
        }
    }
    let mut nodes: Vec<NodeId> = node_set.into_iter().collect();
    nodes.sort();
    let node_index: FxHashMap<NodeId, u32> =
        nodes.iter().enumerate().map(|(i, n)| (*n, i as u32)).collect();

    let cut_cube_values: FxHashMap<[i64; 3], [f64; 27]> = active
        .iter()
        .filter(|(_, i)| i.cut)
        .map(|(c, _)| (c.cube, values[&c.cube]))
        .collect();

    Ok(NarrowBand {
        lattice: lattice.clone(),
        time: dls.time,
        delta,
        cells,
        cut,
        reserve,
        cell_index,
        node_index,
        nodes,
        cut_cube_values,
    })
}

/// One oriented surface triangle with its size-h parent cell.
#[derive(Debug, Clone)]
pub struct SurfaceTriangle {
    pub v: [Vec3; 3],
    pub parent: CellId,
}

impl SurfaceTriangle {
    pub fn area(&self) -> f64 {
        0.5 * (self.v[1] - self.v[0]).cross(&(self.v[2] - self.v[0])).norm()
    }

    /// Unit normal from the vertex ordering (points toward positive phi_h).
    pub fn geometric_normal(&self) -> Vec3 {
        (self.v[1] - self.v[0]).cross(&(self.v[2] - self.v[0])).normalize()
    }
}

/// Triangulated discrete surface with quadrature data.
#[derive(Debug, Clone)]
pub struct CutSurface {
    pub time: f64,
    /// Triangles grouped contiguously by parent cell, cells in sorted order.
    pub triangles: Vec<SurfaceTriangle>,
    pub quad_degree: usize,
    pub quad_points: Vec<Vec3>,
    pub quad_weights: Vec<f64>,
    /// Outward unit normals at the quadrature points.
    pub quad_normals: Vec<Vec3>,
    /// Triangle index of each quadrature point.
    pub quad_triangle: Vec<u32>,
}

impl CutSurface {
    pub fn area(&self) -> f64 {
        self.quad_weights.iter().sum()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }
}

/// Marching tetrahedra for one tetrahedron of the half-size lattice.
/// `grads` are the P1 shape gradients of the tetrahedron; triangles come out
/// oriented so their normals point toward increasing `phi_h`. Slivers with
/// area below `1e-14 * h^2` are dropped.
pub fn march_tet(
    verts: &[Vec3; 4],
    values: [f64; 4],
    grads: &[Vec3; 4],
    h: f64,
    out: &mut Vec<[Vec3; 3]>,
) {
    debug_assert!(values.iter().all(|&v| v != 0.0), "zero nodal values must be perturbed");
    let neg: Vec<usize> = (0..4).filter(|&i| values[i] < 0.0).collect();
    if neg.is_empty() || neg.len() == 4 {
        return;
    }
    let crossing = |a: usize, b: usize| -> Vec3 {
        let t = values[a] / (values[a] - values[b]);
        verts[a] + (verts[b] - verts[a]) * t
    };
    let grad_phi: Vec3 = (0..4).map(|i| grads[i] * values[i]).sum();
    let min_area = 1e-14 * h * h;
    let mut push = |mut tri: [Vec3; 3]| {
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
        if 0.5 * n.norm() < min_area {
            return;
        }
        if n.dot(&grad_phi) < 0.0 {
            tri.swap(1, 2);
        }
        out.push(tri);
    };
    match neg.len() {
        1 | 3 => {
            // One vertex isolated by sign; triangle through the three crossings.
            let lone = if neg.len() == 1 {
                neg[0]
            } else {
                (0..4).find(|i| !neg.contains(i)).unwrap()
            };
            let others: Vec<usize> = (0..4).filter(|&i| i != lone).collect();
            push([
                crossing(lone, others[0]),
                crossing(lone, others[1]),
                crossing(lone, others[2]),
            ]);
        }
        2 => {
            // Flat quadrilateral; split along the shorter diagonal.
            let (a, b) = (neg[0], neg[1]);
            let pos: Vec<usize> = (0..4).filter(|i| !neg.contains(i)).collect();
            let (c, d) = (pos[0], pos[1]);
            let q = [crossing(a, c), crossing(a, d), crossing(b, d), crossing(b, c)];
            let diag02 = (q[2] - q[0]).norm();
            let diag13 = (q[3] - q[1]).norm();
            if diag02 <= diag13 {
                push([q[0], q[1], q[2]]);
                push([q[0], q[2], q[3]]);
            } else {
                push([q[0], q[1], q[3]]);
                push([q[1], q[2], q[3]]);
            }
        }
        _ => unreachable!(),
    }
}

/// Extracts the discrete surface from the cut cells of the band.
pub fn extract_surface(band: &NarrowBand, dls: &DiscreteLevelSet) -> CutSurface {
    let half = &dls.half;
    let cut_cells: Vec<(usize, CellId)> = band
        .cells
        .iter()
        .enumerate()
        .filter(|(i, _)| band.cut[*i])
        .map(|(i, c)| (i, *c))
        .collect();

    let per_cell: Vec<Vec<SurfaceTriangle>> = cut_cells
        .par_iter()
        .map(|(_, cell)| {
            let vals = &band.cut_cube_values[&cell.cube];
            let mut local = Vec::new();
            let mut tris = Vec::new();
            for (octant, s) in &children_of_parent()[cell.tet as usize] {
                let offs = child_node_offsets(*octant, *s);
                let child = CellId {
                    cube: [
                        2 * cell.cube[0] + octant[0],
                        2 * cell.cube[1] + octant[1],
                        2 * cell.cube[2] + octant[2],
                    ],
                    tet: *s,
                };
                let verts = [
                    half.node_position(NodeId([
                        2 * cell.cube[0] + offs[0][0],
                        2 * cell.cube[1] + offs[0][1],
                        2 * cell.cube[2] + offs[0][2],
                    ])),
                    half.node_position(NodeId([
                        2 * cell.cube[0] + offs[1][0],
                        2 * cell.cube[1] + offs[1][1],
                        2 * cell.cube[2] + offs[1][2],
                    ])),
                    half.node_position(NodeId([
                        2 * cell.cube[0] + offs[2][0],
                        2 * cell.cube[1] + offs[2][1],
                        2 * cell.cube[2] + offs[2][2],
                    ])),
                    half.node_position(NodeId([
                        2 * cell.cube[0] + offs[3][0],
                        2 * cell.cube[1] + offs[3][1],
                        2 * cell.cube[2] + offs[3][2],
                    ])),
                ];
                let values = [
                    vals[local_index(offs[0][0], offs[0][1], offs[0][2])],
                    vals[local_index(offs[1][0], offs[1][1], offs[1][2])],
                    vals[local_index(offs[2][0], offs[2][1], offs[2][2])],
                    vals[local_index(offs[3][0], offs[3][1], offs[3][2])],
                ];
                let grads = half.shape_gradients(child);
                local.clear();
                march_tet(&verts, values, &grads, band.lattice.h, &mut local);
                for tri in local.drain(..) {
                    tris.push(SurfaceTriangle { v: tri, parent: *cell });
                }
            }
            tris
        })
        .collect();

    CutSurface {
        time: dls.time,
        triangles: per_cell.into_iter().flatten().collect(),
        quad_degree: 0,
        quad_points: Vec::new(),
        quad_weights: Vec::new(),
        quad_normals: Vec::new(),
        quad_triangle: Vec::new(),
    }
}

/// Symmetric triangle rules in barycentric coordinates; weights sum to one.
pub fn triangle_rule(degree: usize) -> Result<&'static [([f64; 3], f64)]> {
    const DEG2: [([f64; 3], f64); 3] = [
        ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
        ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
        ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
    ];
    const A1: f64 = 0.445_948_490_915_965;
    const W1: f64 = 0.223_381_589_678_011;
    const A2: f64 = 0.091_576_213_509_771;
    const W2: f64 = 0.109_951_743_655_322;
    const DEG4: [([f64; 3], f64); 6] = [
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([1.0 - 2.0 * A2, A2, A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
    ];
    match degree {
        2 => Ok(&DEG2),
        4 => Ok(&DEG4),
        d => Err(Error::UnsupportedQuadratureDegree(d)),
    }
}

/// Fills per-triangle quadrature points, area weights, and outward normals.
pub fn surface_quadrature(
    surface: &mut CutSurface,
    degree: usize,
    dls: &DiscreteLevelSet,
) -> Result<()> {
    let rule = triangle_rule(degree)?;
    let n = surface.triangles.len() * rule.len();
    surface.quad_degree = degree;
    surface.quad_points = Vec::with_capacity(n);
    surface.quad_weights = Vec::with_capacity(n);
    surface.quad_normals = Vec::with_capacity(n);
    surface.quad_triangle = Vec::with_capacity(n);
    for (ti, tri) in surface.triangles.iter().enumerate() {
        let area = tri.area();
        for (b, w) in rule {
            let x = Vec3::from(
                tri.v[0] * b[0] + tri.v[1] * b[1] + tri.v[2] * b[2],
            );
            surface.quad_points.push(x);
            surface.quad_weights.push(area * w);
            surface.quad_normals.push(dls.field.normal(x, dls.time)?);
            surface.quad_triangle.push(ti as u32);
        }
    }
    Ok(())
}

/// Result of checking that a new surface stays inside an older band.
#[derive(Debug, Clone)]
pub struct InclusionReport {
    pub ok: bool,
    /// Smallest classification reserve over the surface quadrature points,
    /// in level-set units. Positive whenever the check passes.
    pub margin: f64,
    pub worst_point: Option<Vec3>,
}

/// Verifies that every quadrature point of `surface` lies in an active cell
/// of `band` (the band of the previous step).
pub fn check_inclusion(band: &NarrowBand, surface: &CutSurface) -> InclusionReport {
    assert!(!surface.quad_points.is_empty(), "surface must carry quadrature");
    let mut margin = f64::INFINITY;
    let mut worst = None;
    for x in &surface.quad_points {
        match band.containing_active_cell(*x) {
            None => {
                return InclusionReport { ok: false, margin: f64::NEG_INFINITY, worst_point: Some(*x) };
            }
            Some(cell) => {
                let i = band.cell_position(&cell).unwrap();
                let m = band.reserve[i];
                if m < margin {
                    margin = m;
                    worst = Some(*x);
                }
            }
        }
    }
    InclusionReport { ok: true, margin, worst_point: worst }
}
