//! Sparse matrices and the linear solvers used by the finite element modules.
//!
//! Global matrices are stored in CSR form. The assembly pattern of a mesh is
//! computed once and reused, so repeated assemblies only overwrite values.
//! Direct solves use a profile (skyline) factorization after a reverse
//! Cuthill-McKee reordering; a Jacobi-preconditioned conjugate gradient
//! solver is available for symmetric positive definite systems.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            assert!(i < n_rows && j < n_cols, "triplet ({i},{j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterates `(col, value)` over the stored entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| range.start + k)
    }

    /// Entry `(i, j)`; zero when outside the sparsity pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to an entry that must already be in the pattern.
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) -> Result<()> {
        let k = self
            .position(i, j)
            .ok_or_else(|| Error::Internal(format!("entry ({i},{j}) not in sparsity pattern")))?;
        self.values[k] += v;
        Ok(())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "dimension mismatch in mul_vec");
        (0..self.n_rows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `b − A x` with each row accumulated in double-length arithmetic, so
    /// the residual is accurate even when it is tiny compared with `|A||x|`.
    pub fn residual_compensated(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| {
                let (mut s, mut c) = (b[i], 0.0);
                for (j, v) in self.row(i) {
                    let p = -v * x[j];
                    let ep = (-v).mul_add(x[j], -p);
                    let t = s + p;
                    let z = t - s;
                    let es = (s - (t - z)) + (p - z);
                    s = t;
                    c += ep + es;
                }
                s + c
            })
            .collect()
    }

    /// Computes `Aᵀ x`.
    pub fn transpose_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows, "dimension mismatch in transpose_mul_vec");
        let mut y = vec![0.0; self.n_cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += v * xi;
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        d
    }

    /// Largest absolute difference between the matrix and its transpose.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Copy with the rows and columns of `fixed` DOFs zeroed and a unit diagonal.
    ///
    /// The result stays symmetric when the input is.
    pub fn constrained(&self, fixed: &[bool]) -> CsrMatrix {
        assert_eq!(fixed.len(), self.n_rows);
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                let j = out.col_idx[k];
                if fixed[i] || fixed[j] {
                    out.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        out
    }
}

/// Right-hand side for a system with prescribed values on `fixed` DOFs.
///
/// `matrix` is the unconstrained operator and `prescribed` holds the imposed
/// values on fixed entries (ignored elsewhere). Pairs with
/// [`CsrMatrix::constrained`].
pub fn lift_rhs(matrix: &CsrMatrix, rhs: &[f64], fixed: &[bool], prescribed: &[f64]) -> Vec<f64> {
    let ud: Vec<f64> = (0..fixed.len())
        .map(|i| if fixed[i] { prescribed[i] } else { 0.0 })
        .collect();
    let kud = matrix.mul_vec(&ud);
    (0..fixed.len())
        .map(|i| if fixed[i] { ud[i] } else { rhs[i] - kud[i] })
        .collect()
}

/// Precomputed CSR pattern for a set of elements with fixed local DOF lists.
///
/// `scatter[e][a * k + b]` is the CSR value index for local entry `(a, b)`
/// of element `e`, so repeated assemblies need no searching or sorting.
#[derive(Clone, Debug)]
pub struct AssemblyPattern {
    template: CsrMatrix,
    scatter: Vec<Vec<usize>>,
}

impl AssemblyPattern {
    pub fn new(n: usize, element_dofs: &[Vec<usize>]) -> Self {
        let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 0.0)).collect();
        for dofs in element_dofs {
            for &a in dofs {
                for &b in dofs {
                    triplets.push((a, b, 0.0));
                }
            }
        }
        let template = CsrMatrix::from_triplets(n, n, &triplets);
        let scatter = element_dofs
            .iter()
            .map(|dofs| {
                let mut map = Vec::with_capacity(dofs.len() * dofs.len());
                for &a in dofs {
                    for &b in dofs {
                        map.push(template.position(a, b).expect("pattern entry"));
                    }
                }
                map
            })
            .collect();
        AssemblyPattern { template, scatter }
    }

    pub fn size(&self) -> usize {
        self.template.n_rows
    }

    /// Assembles `Σₑ Mₑ` where `local(e)` returns a row-major local matrix.
    pub fn assemble<F>(&self, mut local: F) -> CsrMatrix
    where
        F: FnMut(usize) -> Vec<f64>,
    {
        let mut m = self.template.clone();
        for (e, map) in self.scatter.iter().enumerate() {
            let ke = local(e);
            debug_assert_eq!(ke.len(), map.len());
            for (&k, v) in map.iter().zip(ke) {
                m.values[k] += v;
            }
        }
        m
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern of `a`.
///
/// Returns `perm` with `perm[new] = old`. Deterministic: ties are broken by
/// degree and then by original index.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (usize, usize) {
        // returns (eccentricity, a min-degree node of the last level)
        let mut level = vec![usize::MAX; n];
        let mut q = VecDeque::new();
        level[start] = 0;
        q.push_back(start);
        let mut last = start;
        while let Some(v) = q.pop_front() {
            last = v;
            for &w in &adj[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
        let ecc = level[last];
        let far = (0..n)
            .filter(|&v| level[v] == ecc)
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(last);
        (ecc, far)
    };

    while order.len() < n {
        let seed = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (degree[v], v))
            .unwrap();
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut ecc, mut far) = bfs_levels(start, &visited);
        for _ in 0..8 {
            let (e2, f2) = bfs_levels(far, &visited);
            if e2 <= ecc {
                break;
            }
            start = far;
            ecc = e2;
            far = f2;
        }
        let mut q = VecDeque::new();
        visited[start] = true;
        q.push_back(start);
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Profile storage shared by the Cholesky and LU factorizations.
#[derive(Clone, Debug)]
struct Profile {
    perm: Vec<usize>,
    inv: Vec<usize>,
    first: Vec<usize>,
    // row i of the lower factor covers columns first[i]..=i
    offset: Vec<usize>,
}

impl Profile {
    fn new(a: &CsrMatrix) -> Self {
        let n = a.n_rows;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for (j, _) in a.row(i) {
                let (pi, pj) = (inv[i], inv[j]);
                let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
                first[r] = first[r].min(c);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        Profile {
            perm,
            inv,
            first,
            offset,
        }
    }

    fn len(&self) -> usize {
        *self.offset.last().unwrap()
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        self.offset[i] + (j - self.first[i])
    }

    fn n(&self) -> usize {
        self.perm.len()
    }
}

/// Profile Cholesky factorization `P A Pᵀ = L Lᵀ` of a symmetric positive
/// definite matrix.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    profile: Profile,
    l: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::Internal("Cholesky of a non-square matrix".into()));
        }
        let profile = Profile::new(a);
        let n = profile.n();
        let mut l = vec![0.0; profile.len()];
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (profile.inv[i], profile.inv[j]);
                if pi >= pj {
                    l[profile.idx(pi, pj)] += v;
                }
            }
        }
        for i in 0..n {
            let fi = profile.first[i];
            for j in fi..=i {
                let fj = profile.first[j];
                let k0 = fi.max(fj);
                let mut s = l[profile.idx(i, j)];
                if j > k0 {
                    let ri = profile.idx(i, k0);
                    let rj = profile.idx(j, k0);
                    let len = j - k0;
                    s -= dot(&l[ri..ri + len], &l[rj..rj + len]);
                }
                if j < i {
                    l[profile.idx(i, j)] = s / l[profile.idx(j, j)];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::numerical(
                            format!("matrix not positive definite at pivot {}", profile.perm[i]),
                            s,
                        ));
                    }
                    l[profile.idx(i, i)] = s.sqrt();
                }
            }
        }
        Ok(SkylineCholesky { profile, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = &self.profile;
        let n = p.n();
        let mut y: Vec<f64> = (0..n).map(|i| b[p.perm[i]]).collect();
        for i in 0..n {
            let fi = p.first[i];
            let r = p.idx(i, fi);
            let s = dot(&self.l[r..r + (i - fi)], &y[fi..i]);
            y[i] = (y[i] - s) / self.l[p.idx(i, i)];
        }
        for i in (0..n).rev() {
            y[i] /= self.l[p.idx(i, i)];
            let yi = y[i];
            let fi = p.first[i];
            let r = p.idx(i, fi);
            for (k, lv) in self.l[r..r + (i - fi)].iter().enumerate() {
                y[fi + k] -= lv * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[p.perm[i]] = y[i];
        }
        x
    }
}

/// Profile LU factorization without pivoting for matrices with a symmetric
/// sparsity pattern (used for the unsymmetric follower-load tangent).
#[derive(Clone, Debug)]
pub struct SkylineLu {
    profile: Profile,
    // lower rows: l[idx(i, j)] for j < i; unit diagonal implied
    l: Vec<f64>,
    // upper columns: u[idx(j, i)] holds U(i, j) for i <= j
    u: Vec<f64>,
}

impl SkylineLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::Internal("LU of a non-square matrix".into()));
        }
        let profile = Profile::new(a);
        let n = profile.n();
        let mut l = vec![0.0; profile.len()];
        let mut u = vec![0.0; profile.len()];
        for i in 0..n {
            for (j, v) in a.row(i) {
                let (pi, pj) = (profile.inv[i], profile.inv[j]);
                if pi > pj {
                    l[profile.idx(pi, pj)] += v;
                } else {
                    u[profile.idx(pj, pi)] += v;
                }
            }
        }
        for i in 0..n {
            let fi = profile.first[i];
            // column i of U, rows fi..i
            for j in fi..i {
                let fj = profile.first[j];
                let k0 = fi.max(fj);
                if j > k0 {
                    let rl = profile.idx(j, k0);
                    let ru = profile.idx(i, k0);
                    let len = j - k0;
                    let s = dot(&l[rl..rl + len], &u[ru..ru + len]);
                    u[profile.idx(i, j)] -= s;
                }
            }
            // row i of L, columns fi..i
            for j in fi..i {
                let fj = profile.first[j];
                let k0 = fi.max(fj);
                let mut s = l[profile.idx(i, j)];
                if j > k0 {
                    let rl = profile.idx(i, k0);
                    let ru = profile.idx(j, k0);
                    let len = j - k0;
                    s -= dot(&l[rl..rl + len], &u[ru..ru + len]);
                }
                l[profile.idx(i, j)] = s / u[profile.idx(j, j)];
            }
            // diagonal
            let len = i - fi;
            let rl = profile.idx(i, fi);
            let s = dot(&l[rl..rl + len], &u[rl..rl + len]);
            let d = u[profile.idx(i, i)] - s;
            if d == 0.0 || !d.is_finite() {
                return Err(Error::numerical(
                    format!("zero pivot at row {}", profile.perm[i]),
                    d,
                ));
            }
            u[profile.idx(i, i)] = d;
        }
        Ok(SkylineLu { profile, l, u })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = &self.profile;
        let n = p.n();
        let mut y: Vec<f64> = (0..n).map(|i| b[p.perm[i]]).collect();
        for i in 0..n {
            let fi = p.first[i];
            let r = p.idx(i, fi);
            y[i] -= dot(&self.l[r..r + (i - fi)], &y[fi..i]);
        }
        for i in (0..n).rev() {
            y[i] /= self.u[p.idx(i, i)];
            let yi = y[i];
            let fi = p.first[i];
            let r = p.idx(i, fi);
            for (k, uv) in self.u[r..r + (i - fi)].iter().enumerate() {
                y[fi + k] -= uv * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[p.perm[i]] = y[i];
        }
        x
    }
}

/// Choice of linear solver for symmetric positive definite systems.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Profile Cholesky with reverse Cuthill-McKee ordering.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg,
}

/// Relative residual target applied to every linear solve.
pub const SOLVE_RTOL: f64 = 1e-10;

/// Normwise backward error accepted from a refined direct solve whose
/// relative residual cannot reach [`SOLVE_RTOL`] in double precision.
pub const BACKWARD_TOL: f64 = 1024.0 * f64::EPSILON;

/// A prepared SPD operator: factorized once, solved many times.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Direct {
        matrix: CsrMatrix,
        factor: SkylineCholesky,
    },
    Cg {
        matrix: CsrMatrix,
        inv_diag: Vec<f64>,
        max_iter: usize,
    },
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix, kind: SolverKind) -> Result<Self> {
        match kind {
            SolverKind::Direct => {
                let factor = SkylineCholesky::factor(&matrix)?;
                Ok(SpdSolver::Direct { matrix, factor })
            }
            SolverKind::Cg => {
                let inv_diag = matrix
                    .diagonal()
                    .iter()
                    .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
                    .collect();
                let max_iter = 20 * matrix.n_rows().max(10);
                Ok(SpdSolver::Cg {
                    matrix,
                    inv_diag,
                    max_iter,
                })
            }
        }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        match self {
            SpdSolver::Direct { matrix, .. } | SpdSolver::Cg { matrix, .. } => matrix,
        }
    }

    /// Solves `A x = b` to a relative residual of [`SOLVE_RTOL`].
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        match self {
            SpdSolver::Direct { matrix, factor } => refined_solve(matrix, b, |r| factor.solve(r)),
            SpdSolver::Cg {
                matrix,
                inv_diag,
                max_iter,
            } => conjugate_gradient(matrix, inv_diag, b, SOLVE_RTOL, *max_iter),
        }
    }
}

/// Direct solve followed by iterative refinement with a compensated residual.
///
/// Succeeds when the relative residual meets [`SOLVE_RTOL`], or when it is
/// stuck at the rounding floor set by large cancelling terms in `A x`
/// (normwise backward error below [`BACKWARD_TOL`]).
fn refined_solve<F>(matrix: &CsrMatrix, b: &[f64], solve: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let bnorm = norm(b);
    let mut x = solve(b);
    let mut r = matrix.residual_compensated(&x, b);
    for _ in 0..4 {
        let dx = solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        r = matrix.residual_compensated(&x, b);
        if norm(&dx) <= 4.0 * f64::EPSILON * norm(&x) {
            break;
        }
    }
    let rel = norm(&r) / bnorm;
    if rel <= SOLVE_RTOL {
        return Ok(x);
    }
    let scale: Vec<f64> = (0..b.len())
        .map(|i| matrix.row(i).map(|(j, v)| (v * x[j]).abs()).sum::<f64>() + b[i].abs())
        .collect();
    let backward = norm(&r) / norm(&scale);
    if backward <= BACKWARD_TOL {
        log::debug!("direct solve at rounding floor: relative residual {rel:e}, backward error {backward:e}");
        Ok(x)
    } else {
        Err(Error::numerical("direct solve did not reach tolerance", rel))
    }
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    inv_diag: &[f64],
    b: &[f64],
    rtol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = a.mul_vec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) / bnorm <= rtol {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::numerical(
        "conjugate gradient did not converge",
        norm(&r) / bnorm,
    ))
}

/// Solves a general sparse system through the profile LU with refinement.
pub fn solve_general(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if norm(b) == 0.0 {
        return Ok(vec![0.0; b.len()]);
    }
    let lu = SkylineLu::factor(a)?;
    refined_solve(a, b, |r| lu.solve(r))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense Gaussian elimination with partial pivoting; for small systems only.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        if a[p][c] == 0.0 {
            return Err(Error::numerical("singular dense matrix", 0.0));
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.nnz(), 2);
    }

    #[test]
    fn cholesky_and_lu_agree_with_dense() {
        let n = 30;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let expected = dense_solve(a.to_dense(), b.clone()).unwrap();
        let x1 = SkylineCholesky::factor(&a).unwrap().solve(&b);
        let x2 = SkylineLu::factor(&a).unwrap().solve(&b);
        for i in 0..n {
            assert!((x1[i] - expected[i]).abs() < 1e-10);
            assert!((x2[i] - expected[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn lu_handles_unsymmetric_values() {
        let t = vec![
            (0, 0, 4.0),
            (0, 1, 1.0),
            (1, 0, -2.0),
            (1, 1, 5.0),
            (1, 2, 0.5),
            (2, 1, 3.0),
            (2, 2, 6.0),
        ];
        let a = CsrMatrix::from_triplets(3, 3, &t);
        let b = vec![1.0, 2.0, 3.0];
        let x = solve_general(&a, &b).unwrap();
        let expected = dense_solve(a.to_dense(), b).unwrap();
        for i in 0..3 {
            assert!((x[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_matches_direct() {
        let a = laplacian_1d(40);
        let b = vec![1.0; 40];
        let d = SpdSolver::new(a.clone(), SolverKind::Direct).unwrap().solve(&b).unwrap();
        let c = SpdSolver::new(a, SolverKind::Cg).unwrap().solve(&b).unwrap();
        for i in 0..40 {
            assert!((d[i] - c[i]).abs() < 1e-7 * d[i].abs().max(1.0));
        }
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(SkylineCholesky::factor(&a), Err(Error::Numerical { .. })));
    }

    #[test]
    fn constrained_system_keeps_prescribed_values() {
        let a = laplacian_1d(5);
        let fixed = vec![true, false, false, false, true];
        let pres = vec![1.0, 0.0, 0.0, 0.0, 3.0];
        let rhs = lift_rhs(&a, &[0.0; 5], &fixed, &pres);
        let ac = a.constrained(&fixed);
        assert_eq!(ac.asymmetry(), 0.0);
        let x = SpdSolver::new(ac, SolverKind::Direct).unwrap().solve(&rhs).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - (1.0 + 0.5 * i as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_1d(17);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..17).collect::<Vec<_>>());
    }
}
