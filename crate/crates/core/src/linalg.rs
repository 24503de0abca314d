//! Small dense linear-algebra helpers shared by the modules.
//!
//! Coordinates are always ordered `(q^1..q^N, p_1..p_N)`.

use nalgebra::{DMatrix, DVector};

/// Canonical structure `J = [[0, I], [-I, 0]]` of size `2n`.
pub fn canonical_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// Planar Levi-Civita symbol with `eps[0][1] = +1`.
pub fn levi_civita_2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
}

/// `X_ij = eps_ijk v^k` with `eps_123 = +1`.
pub fn cross_matrix(v: [f64; 3]) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        3,
        3,
        &[0.0, v[2], -v[1], -v[2], 0.0, v[0], v[1], -v[0], 0.0],
    )
}

/// Inverse of [`cross_matrix`]: reads `v^k` back from an antisymmetric 3x3 matrix.
pub fn axial_vector(x: &DMatrix<f64>) -> [f64; 3] {
    [x[(1, 2)], x[(2, 0)], x[(0, 1)]]
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `max |A + A^T|`.
pub fn antisymmetry_defect(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m + m.transpose()))
}

/// `max |S^T J S - J|`; zero for symplectic `S`.
pub fn symplectic_defect(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows() / 2;
    let j = canonical_j(n);
    max_abs(&(s.transpose() * &j * s - j))
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Numerical rank with threshold `rel_tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    let Some(&top) = sv.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

/// Orthonormal basis (as columns) of the null space of `m`.
///
/// Singular values at or below `rel_tol * sigma_max` count as zero. A zero
/// matrix has the whole space as its kernel.
pub fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to square so the SVD returns a complete right basis.
    let rows = m.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let top = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let threshold = rel_tol * top;
    let null_rows: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| top == 0.0 || svd.singular_values[i] <= threshold)
        .collect();
    let mut basis = DMatrix::zeros(cols, null_rows.len());
    for (k, &i) in null_rows.iter().enumerate() {
        basis.set_column(k, &v_t.row(i).transpose());
    }
    basis
}

/// Orthonormal basis of the column space of `m`.
pub fn column_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let top = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| top > 0.0 && svd.singular_values[i] > rel_tol * top)
        .collect();
    let mut basis = DMatrix::zeros(m.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        basis.set_column(k, &u.column(i));
    }
    basis
}

/// Minimum-norm least-squares solution of `a x = b` and its residual norm.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, f64) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), b.norm());
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let eps = (rel_tol * top).max(f64::MIN_POSITIVE);
    let x = svd.solve(b, eps).expect("SVD with U and V^T");
    let residual = (a * &x - b).norm();
    (x, residual)
}

/// Moore-Penrose pseudo-inverse.
pub fn pseudo_inverse(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let top = svd.singular_values.iter().fold(0.0_f64, |acc, &s| acc.max(s));
    let eps = (rel_tol * top).max(f64::MIN_POSITIVE);
    svd.pseudo_inverse(eps).expect("non-negative epsilon")
}

/// Matrix exponential (Padé scaling and squaring).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    m.exp()
}

/// Block-diagonal `[[a, 0], [0, b]]`.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Assemble `[[tl, tr], [bl, br]]` from four `n x n` blocks.
pub fn blocks(
    tl: &DMatrix<f64>,
    tr: &DMatrix<f64>,
    bl: &DMatrix<f64>,
    br: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = tl.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(tl);
    out.view_mut((0, n), (n, n)).copy_from(tr);
    out.view_mut((n, 0), (n, n)).copy_from(bl);
    out.view_mut((n, n), (n, n)).copy_from(br);
    out
}
