//! Sparse linear algebra: CSR storage, restarted GMRES, and incomplete-LU /
//! Jacobi preconditioning for the nonsymmetric coupled systems.
//!
//! All kernels accumulate in index order so results are bit-identical across
//! runs and worker counts.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Compressed-row sparse matrix. Column indices are strictly increasing
/// within each row and no duplicates are stored.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a zero matrix with a fixed sparsity pattern. `cols_per_row`
    /// must be sorted and duplicate-free.
    pub fn from_pattern(n_rows: usize, n_cols: usize, cols_per_row: Vec<Vec<usize>>) -> Self {
        assert_eq!(cols_per_row.len(), n_rows);
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for cols in &cols_per_row {
            debug_assert!(cols.windows(2).all(|w| w[0] < w[1]), "columns must be sorted");
            col_indices.extend_from_slice(cols);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        Self { n_rows, n_cols, row_offsets, col_indices, values: vec![0.0; nnz] }
    }

    /// Builds from unsorted triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut trips: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut row = 0usize;
        for (r, c, v) in trips {
            while row < r {
                row_offsets.push(col_indices.len());
                row += 1;
            }
            if col_indices.len() > *row_offsets.last().unwrap() && *col_indices.last().unwrap() == c
            {
                *values.last_mut().unwrap() += v;
            } else {
                col_indices.push(c);
                values.push(v);
            }
        }
        while row < n_rows {
            row_offsets.push(col_indices.len());
            row += 1;
        }
        Self { n_rows, n_cols, row_offsets, col_indices, values }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[r.clone()], &self.values[r])
    }

    /// Adds `v` to entry `(i, j)`, which must exist in the pattern.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        let r = self.row_offsets[i]..self.row_offsets[i + 1];
        let k = self.col_indices[r.clone()]
            .binary_search(&j)
            .unwrap_or_else(|_| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[r.start + k] += v;
    }

    /// `y = A x`, row-wise accumulation in column order.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        assert_eq!(y.len(), self.n_rows);
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            *yi = acc;
        });
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.n_cols];
        for &c in &self.col_indices {
            counts[c] += 1;
        }
        let mut row_offsets = vec![0usize; self.n_cols + 1];
        for i in 0..self.n_cols {
            row_offsets[i + 1] = row_offsets[i] + counts[i];
        }
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut next = row_offsets.clone();
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let k = next[*c];
                col_indices[k] = i;
                values[k] = *v;
                next[*c] += 1;
            }
        }
        Self { n_rows: self.n_cols, n_cols: self.n_rows, row_offsets, col_indices, values }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] = *v;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
    Ilu0,
    /// Incomplete LU with threshold dropping and capped fill; considerably
    /// stronger than ILU(0) on the coupled step systems.
    Ilut,
}

impl std::str::FromStr for Preconditioner {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "jacobi" => Ok(Self::Jacobi),
            "ilu0" => Ok(Self::Ilu0),
            "ilut" => Ok(Self::Ilut),
            other => Err(format!("unknown preconditioner '{other}'")),
        }
    }
}

/// Solver configuration. Defaults keep the linear residual far below the
/// discretization error so conservation diagnostics are not solver-limited.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
    pub preconditioner: Preconditioner,
    /// ILUT drop tolerance, relative to the row norm.
    pub ilut_drop_tol: f64,
    /// ILUT fill cap per row and side.
    pub ilut_max_fill: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 2000,
            restart: 100,
            preconditioner: Preconditioner::Ilut,
            ilut_drop_tol: 1e-4,
            ilut_max_fill: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
    pub wall_time: std::time::Duration,
}

enum Prec {
    None,
    Jacobi(Vec<f64>),
    Ilu0(Ilu0),
    Ilut(Ilut),
}

impl Prec {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Prec::None => z.copy_from_slice(r),
            Prec::Jacobi(d) => {
                for i in 0..r.len() {
                    z[i] = r[i] * d[i];
                }
            }
            Prec::Ilu0(ilu) => ilu.apply(r, z),
            Prec::Ilut(ilu) => ilu.apply(r, z),
        }
    }
}

/// ILUT with dual dropping: entries below `drop_tol` times the row norm are
/// discarded and at most `max_fill` entries are kept per row on each side of
/// the diagonal. Row elimination proceeds in ascending column order, and fill
/// selection breaks magnitude ties by column, so the factorization is
/// deterministic.
struct Ilut {
    l_rows: Vec<Vec<(usize, f64)>>,
    u_rows: Vec<Vec<(usize, f64)>>,
    u_diag: Vec<f64>,
}

impl Ilut {
    fn build(a: &SparseMatrix, drop_tol: f64, max_fill: usize) -> Result<Self> {
        let n = a.n_rows;
        let mut l_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut u_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
        let mut u_diag = vec![0.0f64; n];
        let mut w = vec![0.0f64; n];
        let mut in_w = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..n {
            let (cols, vals) = a.row(i);
            let row_norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            let tau = drop_tol * row_norm;
            let mut pending = std::collections::BTreeSet::new();
            for (c, v) in cols.iter().zip(vals) {
                w[*c] = *v;
                in_w[*c] = true;
                touched.push(*c);
                if *c < i {
                    pending.insert(*c);
                }
            }
            while let Some(k) = pending.pop_first() {
                let lik = w[k] / u_diag[k];
                if lik.abs() < tau {
                    w[k] = 0.0;
                    continue;
                }
                w[k] = lik;
                for (j, ukj) in &u_rows[k] {
                    if !in_w[*j] {
                        in_w[*j] = true;
                        w[*j] = 0.0;
                        touched.push(*j);
                        if *j < i {
                            pending.insert(*j);
                        }
                    }
                    w[*j] -= lik * ukj;
                }
            }
            let mut lower: Vec<(usize, f64)> = Vec::new();
            let mut upper: Vec<(usize, f64)> = Vec::new();
            let mut diag = 0.0;
            for &c in &touched {
                let v = w[c];
                w[c] = 0.0;
                in_w[c] = false;
                if c == i {
                    diag = v;
                } else if v.abs() >= tau {
                    if c < i {
                        lower.push((c, v));
                    } else {
                        upper.push((c, v));
                    }
                }
            }
            touched.clear();
            if diag.abs() < 1e-300 {
                return Err(Error::IluBreakdown { row: i, pivot: diag });
            }
            let keep_largest = |mut part: Vec<(usize, f64)>| -> Vec<(usize, f64)> {
                if part.len() > max_fill {
                    part.sort_by(|a, b| {
                        b.1.abs().partial_cmp(&a.1.abs()).unwrap().then(a.0.cmp(&b.0))
                    });
                    part.truncate(max_fill);
                }
                part.sort_by_key(|e| e.0);
                part
            };
            l_rows.push(keep_largest(lower));
            let mut upper = keep_largest(upper);
            let mut u_row = Vec::with_capacity(upper.len());
            u_row.append(&mut upper);
            u_diag[i] = diag;
            u_rows.push(u_row);
        }
        Ok(Self { l_rows, u_rows, u_diag })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let mut acc = r[i];
            for (k, v) in &self.l_rows[i] {
                acc -= v * z[*k];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for (j, v) in &self.u_rows[i] {
                acc -= v * z[*j];
            }
            z[i] = acc / self.u_diag[i];
        }
    }
}

/// ILU(0): incomplete LU on the original sparsity pattern. L has unit
/// diagonal and is stored strictly below it; U includes the diagonal.
struct Ilu0 {
    matrix: SparseMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    fn build(a: &SparseMatrix) -> Result<Self> {
        let n = a.n_rows;
        let mut m = a.clone();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            let r = m.row_offsets[i]..m.row_offsets[i + 1];
            for k in r {
                if m.col_indices[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(Error::IluBreakdown { row: i, pivot: 0.0 });
            }
        }
        for i in 0..n {
            let row_range = m.row_offsets[i]..m.row_offsets[i + 1];
            for kk in row_range.clone() {
                let k = m.col_indices[kk];
                if k >= i {
                    break;
                }
                let pivot = m.values[diag_pos[k]];
                if pivot.abs() < 1e-300 {
                    return Err(Error::IluBreakdown { row: k, pivot });
                }
                let lik = m.values[kk] / pivot;
                m.values[kk] = lik;
                // Subtract lik * U(k, j) for j > k present in row i.
                let krange = diag_pos[k] + 1..m.row_offsets[k + 1];
                let mut ii = kk + 1;
                for kj in krange {
                    let j = m.col_indices[kj];
                    while ii < row_range.end && m.col_indices[ii] < j {
                        ii += 1;
                    }
                    if ii < row_range.end && m.col_indices[ii] == j {
                        m.values[ii] -= lik * m.values[kj];
                    }
                }
            }
            let pivot = m.values[diag_pos[i]];
            if pivot.abs() < 1e-300 {
                return Err(Error::IluBreakdown { row: i, pivot });
            }
        }
        Ok(Self { matrix: m, diag_pos })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let m = &self.matrix;
        let n = m.n_rows;
        // Forward solve L z = r.
        for i in 0..n {
            let mut acc = r[i];
            for k in m.row_offsets[i]..self.diag_pos[i] {
                acc -= m.values[k] * z[m.col_indices[k]];
            }
            z[i] = acc;
        }
        // Backward solve U z = z.
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag_pos[i] + 1..m.row_offsets[i + 1] {
                acc -= m.values[k] * z[m.col_indices[k]];
            }
            z[i] = acc / m.values[self.diag_pos[i]];
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES. The reported residual is the true
/// relative residual `|b - A x| / |b|`.
pub fn solve(
    a: &SparseMatrix,
    b: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    solve_from(a, b, None, opts)
}

/// As [`solve`], starting from an initial guess (a good guess from the
/// previous time step typically saves a large share of the iterations).
pub fn solve_from(
    a: &SparseMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    if a.n_rows != a.n_cols || a.n_rows != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "A is {}x{}, b has length {}",
            a.n_rows,
            a.n_cols,
            b.len()
        )));
    }
    if !(0.0..1.0).contains(&opts.tol) || opts.tol <= 0.0 {
        return Err(Error::InvalidParameter(format!("solver tol = {}", opts.tol)));
    }
    let start = std::time::Instant::now();
    let n = a.n_rows;
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
                wall_time: start.elapsed(),
            },
        ));
    }
    let prec = match opts.preconditioner {
        Preconditioner::None => Prec::None,
        Preconditioner::Jacobi => {
            let mut d = vec![1.0; n];
            for i in 0..n {
                let (cols, vals) = a.row(i);
                if let Ok(k) = cols.binary_search(&i) {
                    if vals[k].abs() > 1e-300 {
                        d[i] = 1.0 / vals[k];
                    }
                }
            }
            Prec::Jacobi(d)
        }
        Preconditioner::Ilu0 => Prec::Ilu0(Ilu0::build(a)?),
        Preconditioner::Ilut => {
            Prec::Ilut(Ilut::build(a, opts.ilut_drop_tol, opts.ilut_max_fill)?)
        }
    };

    let m = opts.restart.max(1);
    let mut x = match x0 {
        Some(g) => {
            assert_eq!(g.len(), n);
            g.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut total_iters = 0usize;

    'outer: while total_iters < opts.max_iters {
        let mut r = a.matvec_alloc(&x);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        let beta = norm(&r);
        if beta / bnorm <= opts.tol {
            break;
        }
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        v.push(r.iter().map(|x| x / beta).collect());
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;

        for j in 0..m {
            total_iters += 1;
            let mut zj = vec![0.0; n];
            prec.apply(&v[j], &mut zj);
            let mut w = a.matvec_alloc(&zj);
            z.push(zj);
            // Modified Gram-Schmidt.
            for i in 0..=j {
                let hij: f64 = w.iter().zip(&v[i]).map(|(a, b)| a * b).sum();
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            let hj1 = norm(&w);
            h[j + 1][j] = hj1;
            let lucky = hj1 < 1e-300;
            if !lucky {
                v.push(w.iter().map(|x| x / hj1).collect());
            }
            // Apply accumulated Givens rotations, then create a new one.
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if denom < 1e-300 {
                // True breakdown; fall back to whatever we have.
                update_solution(&mut x, &h, &g, &z, j);
                break 'outer;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            let est = g[j + 1].abs() / bnorm;
            if est <= opts.tol || lucky || total_iters >= opts.max_iters || j + 1 == m {
                update_solution(&mut x, &h, &g, &z, j);
                continue 'outer;
            }
        }
    }

    // Final true residual.
    let mut r = a.matvec_alloc(&x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let rel_res = norm(&r) / bnorm;
    let converged = rel_res <= opts.tol;
    Ok((
        x,
        SolveReport {
            iterations: total_iters,
            relative_residual: rel_res,
            converged,
            wall_time: start.elapsed(),
        },
    ))
}

fn update_solution(x: &mut [f64], h: &[Vec<f64>], g: &[f64], z: &[Vec<f64>], j: usize) {
    // Back-substitute the (j+1) x (j+1) upper-triangular system.
    let mut y = vec![0.0f64; j + 1];
    for i in (0..=j).rev() {
        let mut acc = g[i];
        for k in i + 1..=j {
            acc -= h[i][k] * y[k];
        }
        y[i] = acc / h[i][i];
    }
    for (k, yk) in y.iter().enumerate() {
        for (xi, zi) in x.iter_mut().zip(&z[k]) {
            *xi += yk * zi;
        }
    }
}

/// Dense LU fallback for small systems; used by the test oracles.
pub fn solve_dense(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows > 2000 {
        return Err(Error::DimensionMismatch(
            "dense fallback limited to 2000 unknowns".into(),
        ));
    }
    let dense = a.to_dense();
    let rhs = nalgebra::DVector::from_column_slice(b);
    let lu = dense.lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::SolveFailed("dense LU: singular matrix".into()))?;
    Ok(x.iter().cloned().collect())
}
