//! The modified two-form `omega = omega_0 - eF + rG` on `R^{2N}` and its
//! Poisson structure.
//!
//! In coordinates `z = (q^1..q^N, p_1..p_N)` the two-form is
//! `omega = 1/2 Omega_AB dz^A ^ dz^B` with
//!
//! ```text
//! Omega = [[ -eF,  I ],
//!          [ -I,  +rG ]]
//! ```
//!
//! It is invertible iff `det(I - rG eF) != 0`, and the Poisson matrix is
//! `Lambda = -Omega^{-1}`, so that `{f, g} = grad(f)^T Lambda grad(g)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, blocks, cross_matrix, levi_civita_2, max_abs};

/// Relative tolerance for accepting a field matrix as antisymmetric.
pub const ANTISYMMETRY_TOL: f64 = 1e-14;

/// Numerical thresholds used when deciding degeneracy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `|det Psi|` below this is treated as degenerate.
    pub singular: f64,
    /// Singular values below `rank * sigma_max` count as zero.
    pub rank: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            singular: 1e-10,
            rank: 1e-10,
        }
    }
}

/// Dimension `N` and the constant coupled field matrices `eF`, `rG`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    ef: DMatrix<f64>,
    rg: DMatrix<f64>,
}

impl FieldConfig {
    /// Validates shapes and antisymmetry of both field matrices.
    pub fn new(ef: DMatrix<f64>, rg: DMatrix<f64>) -> Result<Self> {
        let n = ef.nrows();
        if n == 0 {
            return Err(Error::InvalidField("dimension must be at least 1".into()));
        }
        for (name, m) in [("eF", &ef), ("rG", &rg)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidField(format!(
                    "{name} must be {n}x{n}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidField(format!("{name} has non-finite entries")));
            }
            let scale = max_abs(m).max(1.0);
            let defect = linalg::antisymmetry_defect(m);
            if defect > ANTISYMMETRY_TOL * scale {
                return Err(Error::InvalidField(format!(
                    "{name} is not antisymmetric (max |A + A^T| = {defect:e})"
                )));
            }
        }
        Ok(Self { ef, rg })
    }

    /// Both fields vanish: the canonical structure.
    pub fn canonical(n: usize) -> Self {
        Self {
            ef: DMatrix::zeros(n, n),
            rg: DMatrix::zeros(n, n),
        }
    }

    /// `N = 2` with pseudoscalars: `eF = B eps`, `rG = C eps`.
    pub fn planar(b: f64, c: f64) -> Self {
        let eps = levi_civita_2();
        Self {
            ef: &eps * b,
            rg: &eps * c,
        }
    }

    /// `N = 3` with pseudovectors: `eF_ij = eps_ijk B^k`, `rG^ij = eps^ijk C_k`.
    pub fn axial(b: [f64; 3], c: [f64; 3]) -> Self {
        Self {
            ef: cross_matrix(b),
            rg: cross_matrix(c),
        }
    }

    pub fn dim(&self) -> usize {
        self.ef.nrows()
    }

    pub fn ef(&self) -> &DMatrix<f64> {
        &self.ef
    }

    pub fn rg(&self) -> &DMatrix<f64> {
        &self.rg
    }

    /// `(B, C)` for `N = 2`.
    pub fn planar_fields(&self) -> Option<(f64, f64)> {
        (self.dim() == 2).then(|| (self.ef[(0, 1)], self.rg[(0, 1)]))
    }

    /// `(B, C)` pseudovectors for `N = 3`.
    pub fn axial_fields(&self) -> Option<([f64; 3], [f64; 3])> {
        (self.dim() == 3).then(|| (linalg::axial_vector(&self.ef), linalg::axial_vector(&self.rg)))
    }

    /// The regularity scalar `chi` (`1 + CB` or `1 + C.B`) for `N = 2, 3`.
    pub fn chi(&self) -> Option<f64> {
        if let Some((b, c)) = self.planar_fields() {
            return Some(1.0 + c * b);
        }
        self.axial_fields()
            .map(|(b, c)| 1.0 + b.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>())
    }
}

/// The `2N x 2N` matrix of the two-form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaMatrix(pub DMatrix<f64>);

impl OmegaMatrix {
    pub fn dim(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiPhiPair {
    /// `I - rG eF`
    pub psi: DMatrix<f64>,
    /// `I - eF rG`, the transpose of `psi`.
    pub phi: DMatrix<f64>,
    pub det_psi: f64,
}

/// `Lambda = -Omega^{-1}`; entry `(A, B)` is the bracket `{z^A, z^B}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonMatrix {
    entries: DMatrix<f64>,
    /// Max-abs deviation between the block formula and dense inversion.
    pub dense_deviation: f64,
}

impl PoissonMatrix {
    /// Wraps an already-computed Poisson matrix (e.g. the canonical `J`).
    pub fn from_matrix(entries: DMatrix<f64>) -> Self {
        Self {
            entries,
            dense_deviation: 0.0,
        }
    }

    pub fn canonical(n: usize) -> Self {
        Self::from_matrix(linalg::canonical_j(n))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `{q^i, q^j}`
    pub fn qq(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// `{q^i, p_l}`
    pub fn qp(&self, i: usize, l: usize) -> f64 {
        self.entries[(i, self.dim() + l)]
    }

    /// `{p_k, q^j}`
    pub fn pq(&self, k: usize, j: usize) -> f64 {
        self.entries[(self.dim() + k, j)]
    }

    /// `{p_k, p_l}`
    pub fn pp(&self, k: usize, l: usize) -> f64 {
        let n = self.dim();
        self.entries[(n + k, n + l)]
    }
}

pub fn build_omega(cfg: &FieldConfig) -> OmegaMatrix {
    let n = cfg.dim();
    let id = DMatrix::identity(n, n);
    OmegaMatrix(blocks(&(-cfg.ef()), &id, &(-&id), cfg.rg()))
}

pub fn psi_phi(cfg: &FieldConfig) -> PsiPhiPair {
    let n = cfg.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let psi = &id - cfg.rg() * cfg.ef();
    let phi = &id - cfg.ef() * cfg.rg();
    let det_psi = psi.determinant();
    PsiPhiPair { psi, phi, det_psi }
}

/// `det Psi`; the form is symplectic iff this is nonzero.
pub fn regularity(cfg: &FieldConfig) -> f64 {
    psi_phi(cfg).det_psi
}

pub fn is_degenerate(cfg: &FieldConfig, tol: &Tolerances) -> bool {
    regularity(cfg).abs() < tol.singular
}

fn singular_error(cfg: &FieldConfig, pair: &PsiPhiPair, tol: &Tolerances) -> Error {
    let omega = build_omega(cfg);
    Error::SingularOmega {
        det_psi: pair.det_psi,
        condition: linalg::condition_number(&pair.psi),
        kernel_dim: linalg::null_space(omega.matrix(), tol.rank).ncols(),
    }
}

/// `Psi^{-1}` and `Phi^{-1}`, or `SingularOmega`.
fn inverses(cfg: &FieldConfig, tol: &Tolerances) -> Result<(PsiPhiPair, DMatrix<f64>, DMatrix<f64>)> {
    let pair = psi_phi(cfg);
    if pair.det_psi.abs() < tol.singular {
        return Err(singular_error(cfg, &pair, tol));
    }
    let psi_inv = pair.psi.clone().lu().try_inverse();
    let phi_inv = pair.phi.clone().lu().try_inverse();
    match (psi_inv, phi_inv) {
        (Some(a), Some(b)) => Ok((pair, a, b)),
        _ => Err(singular_error(cfg, &pair, tol)),
    }
}

/// Poisson matrix from the closed-form blocks
/// `[[-Psi^{-1} rG, Psi^{-1}], [-Phi^{-1}, Phi^{-1} eF]]`,
/// cross-checked against dense inversion of `Omega`.
pub fn poisson_matrix(cfg: &FieldConfig, tol: &Tolerances) -> Result<PoissonMatrix> {
    let (_, psi_inv, phi_inv) = inverses(cfg, tol)?;
    let entries = blocks(
        &(-(&psi_inv * cfg.rg())),
        &psi_inv,
        &(-&phi_inv),
        &(&phi_inv * cfg.ef()),
    );
    let dense_deviation = dense_poisson(&build_omega(cfg))
        .map(|dense| max_abs(&(&dense - &entries)))
        .unwrap_or(f64::INFINITY);
    Ok(PoissonMatrix {
        entries,
        dense_deviation,
    })
}

/// `-Omega^{-1}` by LU inversion of the full matrix.
pub fn dense_poisson(omega: &OmegaMatrix) -> Option<DMatrix<f64>> {
    omega.matrix().clone().lu().try_inverse().map(|inv| -inv)
}

/// `{f, g} = grad_f^T Lambda grad_g`.
pub fn bracket(grad_f: &DVector<f64>, grad_g: &DVector<f64>, lambda: &PoissonMatrix) -> f64 {
    grad_f.dot(&(lambda.matrix() * grad_g))
}

/// The Hamiltonian vector field of `f`, solved blockwise:
/// `X^q = Psi^{-1}(d_p f - rG d_q f)`, `X_p = -Phi^{-1}(d_q f - eF d_p f)`.
pub fn hamiltonian_vector_field(
    cfg: &FieldConfig,
    grad_f: &DVector<f64>,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    let n = cfg.dim();
    if grad_f.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            found: grad_f.len(),
        });
    }
    let (_, psi_inv, phi_inv) = inverses(cfg, tol)?;
    let dq = grad_f.rows(0, n).into_owned();
    let dp = grad_f.rows(n, n).into_owned();
    let xq = &psi_inv * (&dp - cfg.rg() * &dq);
    let xp = -(&phi_inv * (&dq - cfg.ef() * &dp));
    let mut x = DVector::zeros(2 * n);
    x.rows_mut(0, n).copy_from(&xq);
    x.rows_mut(n, n).copy_from(&xp);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn canonical_omega() {
        let om = build_omega(&FieldConfig::planar(0.0, 0.0));
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0., 0., 1., 0., //
                0., 0., 0., 1., //
                -1., 0., 0., 0., //
                0., -1., 0., 0.,
            ],
        );
        assert_eq!(om.0, expected);
    }

    #[test]
    fn planar_magnetic_block() {
        let om = build_omega(&FieldConfig::planar(1.0, 0.0));
        assert_eq!(om.0[(0, 1)], -1.0);
        assert_eq!(om.0[(1, 0)], 1.0);
        assert_eq!(om.0[(0, 2)], 1.0);
        assert_eq!(om.0[(2, 0)], -1.0);
        assert_eq!(om.0[(2, 3)], 0.0);
    }

    #[test]
    fn axial_magnetic_block() {
        let om = build_omega(&FieldConfig::axial([0.0, 0.0, 2.5], [0.0; 3]));
        // (-eF)_12 = -B eps_123
        assert_eq!(om.0[(0, 1)], -2.5);
        assert_eq!(om.0[(1, 0)], 2.5);
        assert_eq!(om.0[(0, 2)], 0.0);
    }

    #[test]
    fn rejects_non_antisymmetric() {
        let ef = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let err = FieldConfig::new(ef, DMatrix::zeros(2, 2)).unwrap_err();
        assert!(matches!(err, Error::InvalidField(_)));
        assert!(FieldConfig::new(DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)).is_err());
        assert!(FieldConfig::new(DMatrix::zeros(2, 2), DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn psi_planar_is_chi_identity() {
        let (b, c) = (0.7, -0.3);
        let pair = psi_phi(&FieldConfig::planar(b, c));
        let chi = 1.0 + c * b;
        assert_abs_diff_eq!(pair.psi, DMatrix::identity(2, 2) * chi, epsilon = 1e-15);
        assert_eq!(pair.phi, pair.psi.transpose());
    }

    #[test]
    fn psi_axial_parallel() {
        let pair = psi_phi(&FieldConfig::axial([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]));
        // chi delta - B C^T with chi = 2
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 1.0]));
        assert_abs_diff_eq!(pair.psi, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(pair.det_psi, 4.0, epsilon = 1e-14);
    }

    #[test]
    fn psi_is_identity_with_one_charge() {
        let pair = psi_phi(&FieldConfig::axial([0.3, 1.0, -2.0], [0.0; 3]));
        assert_eq!(pair.psi, DMatrix::identity(3, 3));
        assert_eq!(pair.phi, DMatrix::identity(3, 3));
    }

    #[test]
    fn regularity_examples() {
        assert_abs_diff_eq!(regularity(&FieldConfig::planar(1.0, 1.0)), 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(regularity(&FieldConfig::planar(2.0, -0.5)), 0.0, epsilon = 1e-15);
        // theta = C.B = 3 -> chi^2 = 16
        let cfg = FieldConfig::axial([1.0, 2.0, 0.0], [1.0, 1.0, 0.0]);
        assert_abs_diff_eq!(regularity(&cfg), 16.0, epsilon = 1e-12);
    }

    #[test]
    fn poisson_canonical() {
        let lam = poisson_matrix(&FieldConfig::canonical(2), &tol()).unwrap();
        assert_eq!(lam.matrix(), &linalg::canonical_j(2));
    }

    #[test]
    fn poisson_planar_closed_form() {
        let lam = poisson_matrix(&FieldConfig::planar(1.0, 1.0), &tol()).unwrap();
        assert_abs_diff_eq!(lam.qq(0, 1), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lam.pp(0, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lam.qp(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lam.qp(0, 1), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lam.pq(1, 1), -0.5, epsilon = 1e-15);
        assert!(lam.dense_deviation < 1e-14);
    }

    #[test]
    fn poisson_axial_closed_form() {
        let lam = poisson_matrix(&FieldConfig::axial([0.0, 0.0, 1.0], [0.0, 0.0, 1.0]), &tol()).unwrap();
        assert_abs_diff_eq!(lam.qp(0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lam.qp(2, 2), 1.0, epsilon = 1e-15);
        // {q^1, q^2} = -eps^{12k} C_k / chi
        assert_abs_diff_eq!(lam.qq(0, 1), -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(lam.pp(0, 1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn poisson_singular_reports_kernel() {
        match poisson_matrix(&FieldConfig::planar(2.0, -0.5), &tol()) {
            Err(Error::SingularOmega { kernel_dim, .. }) => assert_eq!(kernel_dim, 2),
            other => panic!("expected SingularOmega, got {other:?}"),
        }
    }

    #[test]
    fn bracket_examples() {
        let canon = PoissonMatrix::canonical(2);
        let e = |i: usize| DVector::from_fn(4, |k, _| if k == i { 1.0 } else { 0.0 });
        assert_eq!(bracket(&e(0), &e(2), &canon), 1.0);
        let v = DVector::from_vec(vec![0.3, -1.2, 2.0, 0.7]);
        let lam = poisson_matrix(&FieldConfig::planar(1.0, 1.0), &tol()).unwrap();
        assert_eq!(bracket(&v, &v, &lam), 0.0);
        assert_abs_diff_eq!(bracket(&e(2), &e(3), &lam), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn vector_field_free_motion() {
        let grad = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let x = hamiltonian_vector_field(&FieldConfig::canonical(2), &grad, &tol()).unwrap();
        assert_eq!(x, DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]));
        let zero = hamiltonian_vector_field(&FieldConfig::planar(1.0, 1.0), &DVector::zeros(4), &tol()).unwrap();
        assert_eq!(zero, DVector::zeros(4));
    }

    #[test]
    fn vector_field_matches_lambda_product() {
        let cfg = FieldConfig::planar(1.0, 1.0);
        // H = p^2/2 + q^2/2 at q = (1,0), p = (0,1)
        let grad = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        let x = hamiltonian_vector_field(&cfg, &grad, &tol()).unwrap();
        let lam = poisson_matrix(&cfg, &tol()).unwrap();
        let dense = dense_poisson(&build_omega(&cfg)).unwrap();
        assert!(linalg::max_abs_vec(&(&x - lam.matrix() * &grad)) < 1e-14);
        assert!(linalg::max_abs_vec(&(&x - dense * &grad)) < 1e-14);
    }

    #[test]
    fn vector_field_rejects_wrong_length() {
        let err = hamiltonian_vector_field(&FieldConfig::canonical(2), &DVector::zeros(3), &tol());
        assert!(matches!(err, Err(Error::DimensionMismatch { expected: 4, found: 3 })));
    }

    #[test]
    fn chi_accessors() {
        assert_eq!(FieldConfig::planar(2.0, 3.0).chi(), Some(7.0));
        assert_eq!(FieldConfig::axial([1.0, 0.0, 2.0], [3.0, 0.0, 1.0]).chi(), Some(6.0));
        assert_eq!(FieldConfig::canonical(4).chi(), None);
    }
}
