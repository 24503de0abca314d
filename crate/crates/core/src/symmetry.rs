//! Rotations of configuration space acting on the modified phase space:
//! `so(N)` generators, canonical momenta, and field invariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::darboux;
use crate::dynamics::OscillatorModel;
use crate::error::{Error, Result};
use crate::forms::{self, FieldConfig, Tolerances};
use crate::linalg::{self, canonical_j, max_abs};

/// `(M_ab)^i_j = delta^i_a delta_bj - delta^i_b delta_aj`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RotationGenerator {
    pub alpha: usize,
    pub beta: usize,
    pub matrix: DMatrix<i64>,
}

impl RotationGenerator {
    pub fn new(n: usize, alpha: usize, beta: usize) -> Self {
        let mut matrix = DMatrix::zeros(n, n);
        if alpha != beta {
            matrix[(alpha, beta)] = 1;
            matrix[(beta, alpha)] = -1;
        }
        Self { alpha, beta, matrix }
    }

    pub fn as_f64(&self) -> DMatrix<f64> {
        self.matrix.map(|v| v as f64)
    }
}

/// Axis pairs `a < b` in lexicographic order.
pub fn axis_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

/// The `N(N-1)/2` generators `M_ab`, `a < b`.
pub fn generators(n: usize) -> Result<Vec<RotationGenerator>> {
    if n < 2 {
        return Err(Error::InvalidField(format!("rotations need N >= 2, got {n}")));
    }
    Ok(axis_pairs(n).into_iter().map(|(a, b)| RotationGenerator::new(n, a, b)).collect())
}

/// Sparse integer combination of generators, `sum c M_(a,b)`, with `a < b`.
pub type GeneratorCombination = Vec<((usize, usize), i64)>;

fn push_term(out: &mut GeneratorCombination, a: usize, b: usize, coeff: i64) {
    if a == b || coeff == 0 {
        return;
    }
    let (key, c) = if a < b { ((a, b), coeff) } else { ((b, a), -coeff) };
    match out.iter_mut().find(|(k, _)| *k == key) {
        Some(entry) => entry.1 += c,
        None => out.push((key, c)),
    }
}

/// `[M_ab, M_mn] = -d_am M_bn + d_an M_bm - d_bn M_am + d_bm M_an`.
pub fn structure_constants(ab: (usize, usize), mn: (usize, usize)) -> GeneratorCombination {
    let (a, b) = ab;
    let (m, n) = mn;
    let d = |x: usize, y: usize| i64::from(x == y);
    let mut out = Vec::new();
    push_term(&mut out, b, n, -d(a, m));
    push_term(&mut out, b, m, d(a, n));
    push_term(&mut out, a, m, -d(b, n));
    push_term(&mut out, a, n, d(b, m));
    out.retain(|(_, c)| *c != 0);
    out.sort();
    out
}

/// Assembles an integer combination into an `n x n` matrix.
pub fn combine(n: usize, combo: &GeneratorCombination) -> DMatrix<i64> {
    let mut out = DMatrix::zeros(n, n);
    for &((a, b), c) in combo {
        out += RotationGenerator::new(n, a, b).matrix * c;
    }
    out
}

/// Checks `[M_A, M_B]` against the structure constants for all pairs.
pub fn commutators_match(n: usize) -> Result<bool> {
    let gens = generators(n)?;
    Ok(gens.iter().all(|x| {
        gens.iter().all(|y| {
            let comm = &x.matrix * &y.matrix - &y.matrix * &x.matrix;
            comm == combine(n, &structure_constants((x.alpha, x.beta), (y.alpha, y.beta)))
        })
    }))
}

/// Integer Hessian of `J_ab = p^T M_ab q` in `(q, p)` ordering.
pub fn momentum_hessian(n: usize, alpha: usize, beta: usize) -> DMatrix<i64> {
    let m = RotationGenerator::new(n, alpha, beta).matrix;
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    s.view_mut((0, n), (n, n)).copy_from(&m.transpose());
    s.view_mut((n, 0), (n, n)).copy_from(&m);
    s
}

/// Checks `{J_A, J_B}_0` against the structure constants for all pairs,
/// in integer arithmetic on the quadratic forms.
pub fn momentum_brackets_match(n: usize) -> Result<bool> {
    let gens = generators(n)?;
    let j = canonical_j(n).map(|v| v as i64);
    Ok(gens.iter().all(|x| {
        gens.iter().all(|y| {
            // {J_A, J_B} = z^T S_A Lambda_0 S_B z
            let prod = momentum_hessian(n, x.alpha, x.beta) * &j * momentum_hessian(n, y.alpha, y.beta);
            let sym = &prod + prod.transpose();
            let mut expected = DMatrix::zeros(2 * n, 2 * n);
            for ((a, b), c) in structure_constants((x.alpha, x.beta), (y.alpha, y.beta)) {
                expected += momentum_hessian(n, a, b) * c;
            }
            sym == expected
        })
    }))
}

/// Components `J_ab` for `a < b`; `J_ba = -J_ab`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentumValue {
    pub n: usize,
    pub components: Vec<f64>,
}

impl MomentumValue {
    pub fn get(&self, alpha: usize, beta: usize) -> f64 {
        if alpha == beta {
            return 0.0;
        }
        let (a, b, sign) = if alpha < beta { (alpha, beta, 1.0) } else { (beta, alpha, -1.0) };
        let idx = axis_pairs(self.n).iter().position(|&k| k == (a, b)).expect("valid pair");
        sign * self.components[idx]
    }
}

fn bilinear_momentum(x: &[f64], y: &[f64]) -> MomentumValue {
    let n = x.len();
    // p_k (M_ab)^k_j q^j = p_a q^b - p_b q^a
    let components = axis_pairs(n).into_iter().map(|(a, b)| y[a] * x[b] - y[b] * x[a]).collect();
    MomentumValue { n, components }
}

/// `J0_ab = p_k (M_ab)^k_j q^j`; for `N = 2`, `J0_12 = -(q^1 p_2 - q^2 p_1)`.
pub fn momentum_canonical(q: &[f64], p: &[f64]) -> Result<MomentumValue> {
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            expected: q.len(),
            found: p.len(),
        });
    }
    Ok(bilinear_momentum(q, p))
}

/// `J_ab = pi_k (M_ab)^k_j xi^j` of a point in Darboux coordinates.
pub fn momentum_xi_pi(zeta: &DVector<f64>) -> MomentumValue {
    let n = zeta.len() / 2;
    let s = zeta.as_slice();
    bilinear_momentum(&s[..n], &s[n..])
}

/// `R(u) = exp(1/2 u^ab M_ab)` for antisymmetric coefficients `u`.
pub fn rotation(u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = u.nrows();
    if u.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: u.ncols(),
        });
    }
    if linalg::antisymmetry_defect(u) > 1e-14 * max_abs(u).max(1.0) {
        return Err(Error::InvalidField("rotation coefficients must be antisymmetric".into()));
    }
    let mut g = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            if a != b {
                g += RotationGenerator::new(n, a, b).as_f64() * (0.5 * u[(a, b)]);
            }
        }
    }
    Ok(linalg::expm(&g))
}

/// `exp(angle M_ab)`.
pub fn rotation_in_plane(n: usize, alpha: usize, beta: usize, angle: f64) -> DMatrix<f64> {
    linalg::expm(&(RotationGenerator::new(n, alpha, beta).as_f64() * angle))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub symplectic: bool,
    /// `max |R^T eF R - eF|`
    pub ef_residual: f64,
    /// `max |R^T rG R - rG|`
    pub rg_residual: f64,
    /// `max |D^T Omega D - Omega|` with `D = diag(R, R)`.
    pub omega_residual: f64,
}

/// Largest `|R^T R - I|` accepted as a rotation.
pub const ROTATION_TOL: f64 = 1e-10;

/// Whether the lift `(q, p) -> (R q, R p)` preserves the two-form.
pub fn invariance_check(cfg: &FieldConfig, r: &DMatrix<f64>) -> Result<InvarianceReport> {
    let n = cfg.dim();
    if r.nrows() != n || r.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: r.nrows(),
        });
    }
    let residual = max_abs(&(r.transpose() * r - DMatrix::identity(n, n)));
    if residual > ROTATION_TOL || r.determinant() < 0.0 {
        return Err(Error::NotARotation { residual });
    }
    let ef_residual = max_abs(&(r.transpose() * cfg.ef() * r - cfg.ef()));
    let rg_residual = max_abs(&(r.transpose() * cfg.rg() * r - cfg.rg()));
    let d = linalg::block_diag(r, r);
    let omega = forms::build_omega(cfg);
    let omega_residual = max_abs(&(d.transpose() * omega.matrix() * &d - omega.matrix()));
    let scale = max_abs(omega.matrix()).max(1.0);
    Ok(InvarianceReport {
        symplectic: omega_residual <= ROTATION_TOL * scale,
        ef_residual,
        rg_residual,
        omega_residual,
    })
}

/// Value and gradient of a generalized Poincare momentum.
#[derive(Clone, Debug, PartialEq)]
pub struct PoincareMomentum {
    pub value: f64,
    pub gradient: DVector<f64>,
}

/// Momentum of the rotation `M_ab` built from the symplectic potential, when
/// one charge vanishes and the field is invariant:
/// `J = (p - eF q / 2)^T M q` for `rG = 0`, `J = p^T M q + (M p)^T rG p / 2` for `eF = 0`.
///
/// `None` when both charges are present or the field is not invariant.
pub fn poincare_momentum(cfg: &FieldConfig, alpha: usize, beta: usize, z: &DVector<f64>) -> Option<PoincareMomentum> {
    let n = cfg.dim();
    if alpha >= n || beta >= n || alpha == beta || z.len() != 2 * n {
        return None;
    }
    let m = RotationGenerator::new(n, alpha, beta).as_f64();
    let ef = cfg.ef();
    let rg = cfg.rg();
    let e_zero = max_abs(ef) == 0.0;
    let r_zero = max_abs(rg) == 0.0;
    let q = z.rows(0, n).into_owned();
    let p = z.rows(n, n).into_owned();
    let invariant = |x: &DMatrix<f64>| max_abs(&(m.transpose() * x + x * &m)) <= 1e-12 * max_abs(x).max(1.0);
    let mut gradient = DVector::zeros(2 * n);
    let value = if r_zero && invariant(ef) {
        let eq = ef * &q;
        let value = (&p - &eq * 0.5).dot(&(&m * &q));
        let sym = ef * &m;
        gradient.rows_mut(0, n).copy_from(&(m.transpose() * &p + (&sym + sym.transpose()) * &q * 0.5));
        gradient.rows_mut(n, n).copy_from(&(&m * &q));
        value
    } else if e_zero && invariant(rg) {
        let value = p.dot(&(&m * &q)) + 0.5 * (&m * &p).dot(&(rg * &p));
        gradient.rows_mut(0, n).copy_from(&(m.transpose() * &p));
        let sym = m.transpose() * rg;
        gradient.rows_mut(n, n).copy_from(&(&m * &q + (&sym + sym.transpose()) * &p * 0.5));
        value
    } else {
        return None;
    };
    Some(PoincareMomentum { value, gradient })
}

/// `max` entry of the symmetric part of `Hess_zeta(H) J L`, where `L` is the
/// Hessian of `xi^1 pi_2 - xi^2 pi_1`: zero iff `{H, Lambda} = 0` in Darboux variables.
pub fn hamiltonian_angular_bracket_xi_pi(
    cfg: &FieldConfig,
    model: &OscillatorModel,
    tol: &Tolerances,
) -> Result<f64> {
    let (b, c) = cfg
        .planar_fields()
        .ok_or_else(|| Error::InvalidField("needs N = 2".into()))?;
    let map = darboux::darboux_n2(b, c, tol)?;
    let hess = map.t_inv.transpose() * model.hessian(2) * &map.t_inv;
    let mut l = DMatrix::zeros(4, 4);
    l[(0, 3)] = 1.0;
    l[(3, 0)] = 1.0;
    l[(1, 2)] = -1.0;
    l[(2, 1)] = -1.0;
    let prod = hess * canonical_j(2) * l;
    Ok(max_abs(&(&prod + prod.transpose())) * 0.5)
}

/// `{H, J0_12}` at `z` with the modified Poisson structure.
pub fn hamiltonian_momentum_bracket(
    cfg: &FieldConfig,
    model: &OscillatorModel,
    z: &DVector<f64>,
    tol: &Tolerances,
) -> Result<f64> {
    let n = cfg.dim();
    let lambda = forms::poisson_matrix(cfg, tol)?;
    let grad_j = momentum_hessian(n, 0, 1).map(|v| v as f64) * z;
    Ok(forms::bracket(&model.gradient(z), &grad_j, &lambda))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn planar_generator() {
        let g = generators(2).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].matrix, DMatrix::from_row_slice(2, 2, &[0, 1, -1, 0]));
        assert!(generators(1).is_err());
    }

    #[test]
    fn generator_counts_and_antisymmetry() {
        for n in 2..=5 {
            let g = generators(n).unwrap();
            assert_eq!(g.len(), n * (n - 1) / 2);
            for x in &g {
                assert_eq!(x.matrix.transpose(), -x.matrix.clone());
                assert_eq!(RotationGenerator::new(n, x.beta, x.alpha).matrix, -x.matrix.clone());
            }
        }
    }

    #[test]
    fn three_dimensional_commutator() {
        // [M12, M23] = M13 in zero-based pairs
        assert_eq!(structure_constants((0, 1), (1, 2)), vec![((0, 2), 1)]);
        assert!(structure_constants((0, 1), (0, 1)).is_empty());
    }

    #[test]
    fn algebra_closes() {
        for n in 2..=4 {
            assert!(commutators_match(n).unwrap());
            assert!(momentum_brackets_match(n).unwrap());
        }
    }

    #[test]
    fn planar_momentum_sign() {
        let j = momentum_canonical(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(j.get(0, 1), -1.0);
        assert_eq!(j.get(1, 0), 1.0);
        let parallel = momentum_canonical(&[1.0, 2.0], &[2.0, 4.0]).unwrap();
        assert_eq!(parallel.get(0, 1), 0.0);
    }

    #[test]
    fn momentum_matches_angular_momentum() {
        let zeta = DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        let j = momentum_xi_pi(&zeta);
        assert_eq!(j.get(0, 1), -crate::dynamics::angular_momentum(&zeta));
    }

    #[test]
    fn identity_is_invariant() {
        let cfg = FieldConfig::axial([0.3, -1.0, 0.2], [1.0, 0.5, 0.0]);
        let rep = invariance_check(&cfg, &DMatrix::identity(3, 3)).unwrap();
        assert!(rep.symplectic);
        assert_eq!((rep.ef_residual, rep.rg_residual, rep.omega_residual), (0.0, 0.0, 0.0));
    }

    #[test]
    fn z_rotation_invariance() {
        let r = rotation_in_plane(3, 0, 1, 0.7);
        let parallel = FieldConfig::axial([0.0, 0.0, 1.0], [0.0, 0.0, 2.0]);
        let rep = invariance_check(&parallel, &r).unwrap();
        assert!(rep.symplectic && rep.omega_residual <= 1e-12);
        let crossed = FieldConfig::axial([0.0, 0.0, 1.0], [1.0, 0.0, 0.0]);
        let rep = invariance_check(&crossed, &r).unwrap();
        assert!(!rep.symplectic);
        assert!(rep.rg_residual > 0.1);
        assert!(rep.ef_residual <= 1e-12);
    }

    #[test]
    fn not_a_rotation() {
        let cfg = FieldConfig::canonical(2);
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(invariance_check(&cfg, &s), Err(Error::NotARotation { .. })));
    }

    #[test]
    fn rotation_from_coefficients() {
        let mut u = DMatrix::zeros(3, 3);
        u[(0, 1)] = 0.7;
        u[(1, 0)] = -0.7;
        let r = rotation(&u).unwrap();
        assert!(max_abs(&(r - rotation_in_plane(3, 0, 1, 0.7))) < 1e-15);
    }

    #[test]
    fn poincare_momentum_generates_rotation() {
        let z = DVector::from_vec(vec![0.3, -0.4, 1.1, 0.6]);
        let m = RotationGenerator::new(2, 0, 1).as_f64();
        for cfg in [FieldConfig::planar(1.3, 0.0), FieldConfig::planar(0.0, -0.8)] {
            let j = poincare_momentum(&cfg, 0, 1, &z).unwrap();
            let lambda = forms::poisson_matrix(&cfg, &tol()).unwrap();
            let flow = lambda.matrix() * &j.gradient;
            let q = z.rows(0, 2).into_owned();
            let p = z.rows(2, 2).into_owned();
            // {z, J} = (M q, M p)
            assert!(max_abs_vec_diff(&flow.rows(0, 2).into_owned(), &(&m * q)) < 1e-14);
            assert!(max_abs_vec_diff(&flow.rows(2, 2).into_owned(), &(&m * p)) < 1e-14);
        }
        assert!(poincare_momentum(&FieldConfig::planar(1.0, 1.0), 0, 1, &z).is_none());
    }

    fn max_abs_vec_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        linalg::max_abs_vec(&(a - b))
    }

    #[test]
    fn darboux_hamiltonian_is_rotation_invariant() {
        let model = OscillatorModel::harmonic(1.0, 1.0).unwrap();
        for (b, c) in [(1.0, 0.0), (0.7, -0.3), (2.0, 1.5)] {
            let v = hamiltonian_angular_bracket_xi_pi(&FieldConfig::planar(b, c), &model, &tol()).unwrap();
            assert!(v < 1e-10, "{v}");
        }
    }

    #[test]
    fn mixed_hamiltonian_is_not_invariant() {
        let model = OscillatorModel::harmonic(1.0, 1.0).unwrap();
        // {H, J0_12} = -B p.q here
        let z = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        let v = hamiltonian_momentum_bracket(&FieldConfig::planar(1.0, 0.0), &model, &z, &tol()).unwrap();
        assert!((v + 1.0).abs() < 1e-14, "{v}");
        let canonical = hamiltonian_momentum_bracket(&FieldConfig::canonical(2), &model, &z, &tol()).unwrap();
        assert_eq!(canonical, 0.0);
    }
}
