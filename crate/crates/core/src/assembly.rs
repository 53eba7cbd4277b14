//! Assembly of the coupled linear system of one semi-implicit time step over
//! the narrow band: surface mass/stiffness/convection terms with the
//! nonlinearities lagged to the previous step, plus the normal-derivative
//! volume stabilization that extends the solution across the band.
//!
//! Unknown ordering is all concentration values first, then all chemical
//! potential values, over the band's active nodes.

use rayon::prelude::*;

use crate::cutgeom::{CutSurface, NarrowBand};
use crate::error::{Error, Result};
use crate::lattice::signed_volume;
use crate::solver::SparseMatrix;
use crate::Vec3;

/// Model and discretization parameters of one run.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Interface width.
    pub epsilon: f64,
    /// Mobility scale.
    pub sigma: f64,
    /// Stabilization coefficient of the lagged potential; defaults to
    /// `1/epsilon`, above the `1/(2 epsilon)` stability threshold.
    pub beta_s: f64,
    /// Volume stabilization weights, `1/h` each.
    pub rho_c: f64,
    pub rho_mu: f64,
    /// Constant density.
    pub rho: f64,
    /// Time step.
    pub dt: f64,
}

impl ModelParams {
    pub fn new(epsilon: f64, sigma: f64, dt: f64, h: f64) -> Result<Self> {
        if epsilon <= 0.0 || sigma < 0.0 || dt <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {epsilon}, sigma = {sigma}, dt = {dt}"
            )));
        }
        Ok(Self {
            epsilon,
            sigma,
            beta_s: 1.0 / epsilon,
            rho_c: 1.0 / h,
            rho_mu: 1.0 / h,
            rho: 1.0,
            dt,
        })
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }
}

/// Double-well potential `f0 = c^2 (1-c)^2 / 4` with derivatives.
pub fn potential(c: f64) -> (f64, f64, f64) {
    let f0 = 0.25 * c * c * (1.0 - c) * (1.0 - c);
    let df = 0.5 * c * (1.0 - c) * (1.0 - 2.0 * c);
    let ddf = 0.5 * (1.0 - 6.0 * c + 6.0 * c * c);
    (f0, df, ddf)
}

/// Degenerate mobility `sigma c (1 - c)`, clamped so it stays nonnegative
/// when the scheme lets `c` leave `[0, 1]`.
pub fn mobility(c: f64, sigma: f64) -> f64 {
    let c = c.clamp(0.0, 1.0);
    sigma * c * (1.0 - c)
}

/// Projects an ambient gradient onto the tangent plane of unit normal `n`.
pub fn tangential_gradient(gradient: Vec3, n: Vec3) -> Vec3 {
    gradient - n * n.dot(&gradient)
}

/// P1 shape values and gradients of an arbitrary tetrahedron at `x`.
pub fn p1_shape(verts: &[Vec3; 4], x: Vec3) -> Result<([f64; 4], [Vec3; 4])> {
    let vol = signed_volume(verts);
    if vol.abs() < 1e-300 {
        return Err(Error::DegenerateCell(vol));
    }
    let t = nalgebra::Matrix3::from_columns(&[
        verts[1] - verts[0],
        verts[2] - verts[0],
        verts[3] - verts[0],
    ]);
    let inv = t.try_inverse().ok_or(Error::DegenerateCell(vol))?;
    let local = inv * (x - verts[0]);
    let vals = [1.0 - local.x - local.y - local.z, local.x, local.y, local.z];
    let g1 = Vec3::new(inv[(0, 0)], inv[(0, 1)], inv[(0, 2)]);
    let g2 = Vec3::new(inv[(1, 0)], inv[(1, 1)], inv[(1, 2)]);
    let g3 = Vec3::new(inv[(2, 0)], inv[(2, 1)], inv[(2, 2)]);
    Ok((vals, [-(g1 + g2 + g3), g1, g2, g3]))
}

/// Nodal solution of one time level, ordered like the band's node list.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub time: f64,
    pub c: Vec<f64>,
    pub mu: Vec<f64>,
}

/// P1 evaluation of the previous concentration at `x`, which must lie in an
/// active cell of the previous band. Returns the value and the (cellwise
/// constant) ambient gradient.
pub fn evaluate_prev(state: &SystemState, band: &NarrowBand, x: Vec3) -> Result<(f64, Vec3)> {
    let cell = band
        .containing_active_cell(x)
        .ok_or(Error::OutsideBand { point: x })?;
    let bary = band.lattice.barycentric(cell, x);
    let grads = band.lattice.shape_gradients(cell);
    let nodes = band.lattice.cell_nodes(cell);
    let mut value = 0.0;
    let mut grad = Vec3::zeros();
    for i in 0..4 {
        let k = band
            .node_position(&nodes[i])
            .expect("active cell with inactive node");
        value += bary[i] * state.c[k];
        grad += grads[i] * state.c[k];
    }
    Ok((value, grad))
}

/// The assembled block system of one step.
#[derive(Debug)]
pub struct FESystem {
    pub n_nodes: usize,
    /// `2N x 2N` in blocks `[[A_cc, A_cmu], [A_muc, A_mumu]]`.
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
}

impl FESystem {
    /// Row-swapped view `[[A_muc, A_mumu], [A_cc, A_cmu]]` used for
    /// preconditioned solves: far-band rows of the natural ordering have
    /// structurally zero diagonals, the swapped ordering does not. Swapping
    /// rows changes neither the solution nor the residual norm.
    pub fn swapped_rows(&self) -> (SparseMatrix, Vec<f64>) {
        let n2 = 2 * self.n_nodes;
        let a = &self.matrix;
        let mut row_offsets = Vec::with_capacity(n2 + 1);
        row_offsets.push(0usize);
        let mut col_indices = Vec::with_capacity(a.nnz());
        let mut values = Vec::with_capacity(a.nnz());
        let mut rhs = Vec::with_capacity(n2);
        for i in 0..n2 {
            let src = if i < self.n_nodes { i + self.n_nodes } else { i - self.n_nodes };
            let (cols, vals) = a.row(src);
            col_indices.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_offsets.push(col_indices.len());
            rhs.push(self.rhs[src]);
        }
        (
            SparseMatrix { n_rows: n2, n_cols: n2, row_offsets, col_indices, values },
            rhs,
        )
    }
}

/// Per-cell element contributions, merged in deterministic cell order.
struct LocalBlock {
    nodes: [usize; 4],
    cc: [[f64; 4]; 4],
    cmu: [[f64; 4]; 4],
    muc: [[f64; 4]; 4],
    mumu: [[f64; 4]; 4],
    rhs_c: [f64; 4],
    rhs_mu: [f64; 4],
}

impl LocalBlock {
    fn is_finite(&self) -> bool {
        let blocks = [&self.cc, &self.cmu, &self.muc, &self.mumu];
        blocks.iter().all(|b| b.iter().flatten().all(|v| v.is_finite()))
            && self.rhs_c.iter().chain(&self.rhs_mu).all(|v| v.is_finite())
    }
}

/// Assembles the step system on the current band and surface.
///
/// * `u_at_qp` - material velocity at each surface quadrature point.
/// * `stab_normals` - per active cell, the surface normal at the cell
///   barycenter; `None` falls back to full-gradient stabilization (only
///   relevant for cells far inside a very wide band, where the level-set
///   gradient degenerates).
/// * `prev` - evaluator of the previous concentration, defined at all
///   quadrature points by the inclusion condition.
/// * `forcing` - optional manufactured source added to the concentration row.
pub fn assemble(
    band: &NarrowBand,
    surface: &CutSurface,
    params: &ModelParams,
    u_at_qp: &[Vec3],
    stab_normals: &[Option<Vec3>],
    prev: &(dyn Fn(Vec3) -> Result<(f64, Vec3)> + Sync),
    forcing: Option<&(dyn Fn(Vec3) -> f64 + Sync)>,
) -> Result<FESystem> {
    let n = band.node_count();
    assert_eq!(stab_normals.len(), band.cell_count());
    assert_eq!(u_at_qp.len(), surface.quad_points.len());
    let qp_per_tri = if surface.triangles.is_empty() {
        0
    } else {
        surface.quad_points.len() / surface.triangles.len()
    };

    // Triangle ranges per band cell (triangles are grouped by parent).
    let mut tri_range = vec![0usize..0usize; band.cell_count()];
    let mut t0 = 0;
    while t0 < surface.triangles.len() {
        let parent = surface.triangles[t0].parent;
        let mut t1 = t0 + 1;
        while t1 < surface.triangles.len() && surface.triangles[t1].parent == parent {
            t1 += 1;
        }
        let ci = band
            .cell_position(&parent)
            .expect("surface triangle with inactive parent cell");
        tri_range[ci] = t0..t1;
        t0 = t1;
    }

    let inv_dt = 1.0 / params.dt;
    let inv_eps = 1.0 / params.epsilon;
    let cell_volume = band.lattice.cell_volume();

    let locals: Vec<LocalBlock> = band
        .cells
        .par_iter()
        .enumerate()
        .map(|(ci, cell)| -> Result<LocalBlock> {
            let grads = band.lattice.shape_gradients(*cell);
            let nodes = band.lattice.cell_nodes(*cell);
            let mut local = LocalBlock {
                nodes: [0; 4],
                cc: [[0.0; 4]; 4],
                cmu: [[0.0; 4]; 4],
                muc: [[0.0; 4]; 4],
                mumu: [[0.0; 4]; 4],
                rhs_c: [0.0; 4],
                rhs_mu: [0.0; 4],
            };
            for i in 0..4 {
                local.nodes[i] = band.node_position(&nodes[i]).expect("inactive node");
            }

            // Normal-derivative volume stabilization, 1-point rule.
            let ndg: [f64; 4];
            match stab_normals[ci] {
                Some(nb) => {
                    ndg = [
                        nb.dot(&grads[0]),
                        nb.dot(&grads[1]),
                        nb.dot(&grads[2]),
                        nb.dot(&grads[3]),
                    ];
                    for i in 0..4 {
                        for j in 0..4 {
                            let s = cell_volume * ndg[i] * ndg[j];
                            local.cmu[i][j] += params.rho_mu * s;
                            local.muc[i][j] -= params.rho_c * s;
                        }
                    }
                }
                None => {
                    // Degenerate level-set gradient: isotropic H1 term keeps
                    // the far rows nonsingular and still vanishes on constants.
                    for i in 0..4 {
                        for j in 0..4 {
                            let s = cell_volume * grads[i].dot(&grads[j]);
                            local.cmu[i][j] += params.rho_mu * s;
                            local.muc[i][j] -= params.rho_c * s;
                        }
                    }
                }
            }

            // Surface terms over the triangles cut from this cell.
            for ti in tri_range[ci].clone() {
                for k in 0..qp_per_tri {
                    let q = ti * qp_per_tri + k;
                    let x = surface.quad_points[q];
                    let w = surface.quad_weights[q];
                    let nrm = surface.quad_normals[q];
                    let u = u_at_qp[q];
                    let rho = params.rho;
                    let bary = band.lattice.barycentric(*cell, x);
                    let (c_prev, _) = prev(x)?;
                    let mob = mobility(c_prev, params.sigma);
                    let (_, df_prev, _) = potential(c_prev);
                    let pg = [
                        tangential_gradient(grads[0], nrm),
                        tangential_gradient(grads[1], nrm),
                        tangential_gradient(grads[2], nrm),
                        tangential_gradient(grads[3], nrm),
                    ];
                    let conv = [
                        u.dot(&grads[0]),
                        u.dot(&grads[1]),
                        u.dot(&grads[2]),
                        u.dot(&grads[3]),
                    ];
                    for i in 0..4 {
                        let wi = w * bary[i];
                        for j in 0..4 {
                            local.cc[i][j] += rho * (wi * inv_dt * bary[j] + wi * conv[j]);
                            local.cmu[i][j] += w * mob * pg[i].dot(&pg[j]);
                            local.muc[i][j] -=
                                wi * params.beta_s * bary[j] + w * params.epsilon * pg[i].dot(&pg[j]);
                            local.mumu[i][j] += wi * bary[j];
                        }
                        local.rhs_c[i] += rho * wi * inv_dt * c_prev;
                        if let Some(g) = forcing {
                            local.rhs_c[i] += rho * wi * g(x);
                        }
                        local.rhs_mu[i] += wi * (inv_eps * df_prev - params.beta_s * c_prev);
                    }
                }
            }

            if !local.is_finite() {
                return Err(Error::NonFiniteElement(*cell));
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>>>()?;

    // Sparsity pattern from node adjacency through shared active cells.
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for local in &locals {
        for &a in &local.nodes {
            for &b in &local.nodes {
                adjacency[a].push(b);
            }
        }
    }
    let mut pattern: Vec<Vec<usize>> = Vec::with_capacity(2 * n);
    for adj in &mut adjacency {
        adj.sort_unstable();
        adj.dedup();
    }
    for adj in &adjacency {
        let mut row: Vec<usize> = Vec::with_capacity(2 * adj.len());
        row.extend(adj.iter().copied());
        row.extend(adj.iter().map(|&j| j + n));
        pattern.push(row);
    }
    for i in 0..n {
        pattern.push(pattern[i].clone());
    }
    let mut matrix = SparseMatrix::from_pattern(2 * n, 2 * n, pattern);
    let mut rhs = vec![0.0; 2 * n];

    for local in &locals {
        for i in 0..4 {
            let gi = local.nodes[i];
            for j in 0..4 {
                let gj = local.nodes[j];
                matrix.add_to(gi, gj, local.cc[i][j]);
                matrix.add_to(gi, gj + n, local.cmu[i][j]);
                matrix.add_to(gi + n, gj, local.muc[i][j]);
                matrix.add_to(gi + n, gj + n, local.mumu[i][j]);
            }
            rhs[gi] += local.rhs_c[i];
            rhs[gi + n] += local.rhs_mu[i];
        }
    }

    Ok(FESystem { n_nodes: n, matrix, rhs })
}
