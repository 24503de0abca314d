//! Linear Darboux maps `zeta = T z` with `Omega = T^T J T`, so that in the
//! new coordinates `(xi, pi)` the two-form is canonical.
//!
//! Closed forms exist for `N = 2`, for `N = 3`, and whenever one of the two
//! charges vanishes. Everything else goes through a symplectic Gram-Schmidt
//! procedure, which only needs `Omega` to be nondegenerate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{build_omega, FieldConfig, OmegaMatrix, Tolerances};
use crate::linalg::{self, blocks, cross_matrix, levi_civita_2, max_abs};

/// Below this `|theta|` the `N = 3` coefficients switch to their series.
pub const THETA_SERIES_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DarbouxMethod {
    Identity,
    Planar,
    Axial,
    ElectricOnly,
    DualOnly,
    GramSchmidt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DarbouxMap {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    /// `max |T^T J T - Omega|` against the two-form it was built for.
    pub residual: f64,
    pub condition: f64,
    pub method: DarbouxMethod,
}

impl DarbouxMap {
    fn finish(t: DMatrix<f64>, t_inv: DMatrix<f64>, omega: &OmegaMatrix, method: DarbouxMethod) -> Self {
        let condition = linalg::condition_number(&t);
        let mut map = Self {
            t,
            t_inv,
            residual: 0.0,
            condition,
            method,
        };
        map.residual = verify_darboux(&map, omega);
        map
    }

    pub fn dim(&self) -> usize {
        self.t.nrows() / 2
    }

    /// `max |T T^{-1} - I|`
    pub fn inverse_defect(&self) -> f64 {
        let n = self.t.nrows();
        max_abs(&(&self.t * &self.t_inv - DMatrix::identity(n, n)))
    }

    /// Maps `z = (q, p)` to `zeta = (xi, pi)`.
    pub fn forward(&self, z: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.t * z
    }

    pub fn backward(&self, zeta: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        &self.t_inv * zeta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct N2Coefficients {
    pub chi: f64,
    pub u: f64,
}

impl N2Coefficients {
    pub fn new(b: f64, c: f64) -> Self {
        let chi = 1.0 + c * b;
        Self {
            chi,
            u: 0.5 * (1.0 + chi.max(0.0).sqrt()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct N3Coefficients {
    pub theta: f64,
    pub chi: f64,
    pub u: f64,
    pub gamma: f64,
    pub gamma_prime: f64,
}

impl N3Coefficients {
    pub fn new(b: [f64; 3], c: [f64; 3]) -> Self {
        let theta: f64 = b.iter().zip(&c).map(|(x, y)| x * y).sum();
        Self::from_theta(theta)
    }

    pub fn from_theta(theta: f64) -> Self {
        let chi = 1.0 + theta;
        let sqrt_chi = chi.max(0.0).sqrt();
        let u = 0.5 * (1.0 + sqrt_chi);
        let su = u.sqrt();
        let (gamma, gamma_prime) = if theta.abs() < THETA_SERIES_THRESHOLD {
            // Both are 0/0 at theta = 0.
            let t = theta;
            (
                -1.0 / 8.0 + t * (7.0 / 128.0 + t * (-33.0 / 1024.0 + t * 715.0 / 32768.0)),
                3.0 / 8.0 + t * (-17.0 / 128.0 + t * (75.0 / 1024.0 - t * 1573.0 / 32768.0)),
            )
        } else {
            ((1.0 - su) / (theta * su), (sqrt_chi - su) / (theta * su))
        };
        Self {
            theta,
            chi,
            u,
            gamma,
            gamma_prime,
        }
    }
}

fn check_chi(chi: f64, tol: &Tolerances) -> Result<()> {
    if chi.abs() <= tol.singular {
        Err(Error::DegenerateChi { chi })
    } else if chi < 0.0 {
        Err(Error::NegativeChi { chi })
    } else {
        Ok(())
    }
}

/// Closed-form map for `N = 2`:
/// `xi = sqrt(u)(q - C/(2u) eps p)`, `pi = sqrt(u)(p - B/(2u) eps q)`.
pub fn darboux_n2(b: f64, c: f64, tol: &Tolerances) -> Result<DarbouxMap> {
    let coef = N2Coefficients::new(b, c);
    check_chi(coef.chi, tol)?;
    let N2Coefficients { chi, u } = coef;
    let su = u.sqrt();
    let id = DMatrix::<f64>::identity(2, 2);
    let eps = levi_civita_2();
    let t = blocks(
        &(&id * su),
        &(&eps * (-su * c / (2.0 * u))),
        &(&eps * (-su * b / (2.0 * u))),
        &(&id * su),
    );
    let f = (u / chi).sqrt();
    let t_inv = blocks(
        &(&id * f),
        &(&eps * (f * c / (2.0 * u))),
        &(&eps * (f * b / (2.0 * u))),
        &(&id * f),
    );
    let method = if b == 0.0 && c == 0.0 {
        DarbouxMethod::Identity
    } else {
        DarbouxMethod::Planar
    };
    Ok(DarbouxMap::finish(t, t_inv, &build_omega(&FieldConfig::planar(b, c)), method))
}

/// Closed-form map for `N = 3` with pseudovector fields.
pub fn darboux_n3(b: [f64; 3], c: [f64; 3], tol: &Tolerances) -> Result<DarbouxMap> {
    let coef = N3Coefficients::new(b, c);
    check_chi(coef.chi, tol)?;
    let N3Coefficients {
        chi,
        u,
        gamma,
        gamma_prime,
        ..
    } = coef;
    let su = u.sqrt();
    let id = DMatrix::<f64>::identity(3, 3);
    let bv = nalgebra::DVector::from_row_slice(&b);
    let cv = nalgebra::DVector::from_row_slice(&c);
    let b_ct = &bv * cv.transpose();
    let c_bt = &cv * bv.transpose();
    let xb = cross_matrix(b);
    let xc = cross_matrix(c);
    let h = 1.0 / (2.0 * u);
    let t = blocks(
        &((&id + &b_ct * gamma) * su),
        &(&xc * (-su * h)),
        &(&xb * (-su * h)),
        &((&id + &c_bt * gamma) * su),
    );
    let f = (u / chi).sqrt();
    let t_inv = blocks(
        &((&id + &b_ct * gamma_prime) * f),
        &(&xc * (f * h)),
        &(&xb * (f * h)),
        &((&id + &c_bt * gamma_prime) * f),
    );
    let method = if b == [0.0; 3] && c == [0.0; 3] {
        DarbouxMethod::Identity
    } else {
        DarbouxMethod::Axial
    };
    Ok(DarbouxMap::finish(t, t_inv, &build_omega(&FieldConfig::axial(b, c)), method))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingleCharge {
    /// `rG = 0`: `xi = q`, `pi_k = p_k + A_k(q)` with `A_k = 1/2 eF_ik q^i`.
    ElectricOnly,
    /// `eF = 0`: `xi^i = q^i + A~^i(p)` with `A~^j = 1/2 rG^kj p_k`, `pi = p`.
    DualOnly,
}

pub fn darboux_single_charge(cfg: &FieldConfig, which: SingleCharge) -> Result<DarbouxMap> {
    let ef_zero = cfg.ef().iter().all(|&v| v == 0.0);
    let rg_zero = cfg.rg().iter().all(|&v| v == 0.0);
    if !ef_zero && !rg_zero {
        return Err(Error::BothChargesNonzero);
    }
    let n = cfg.dim();
    let id = DMatrix::<f64>::identity(n, n);
    let zero = DMatrix::<f64>::zeros(n, n);
    let (t, t_inv, method) = match which {
        SingleCharge::ElectricOnly => {
            if !rg_zero {
                return Err(Error::InvalidField(
                    "electric-only map requested but rG is nonzero".into(),
                ));
            }
            let shear = cfg.ef() * 0.5;
            (
                blocks(&id, &zero, &(-&shear), &id),
                blocks(&id, &zero, &shear, &id),
                DarbouxMethod::ElectricOnly,
            )
        }
        SingleCharge::DualOnly => {
            if !ef_zero {
                return Err(Error::InvalidField(
                    "dual-only map requested but eF is nonzero".into(),
                ));
            }
            let shear = cfg.rg() * 0.5;
            (
                blocks(&id, &(-&shear), &zero, &id),
                blocks(&id, &shear, &zero, &id),
                DarbouxMethod::DualOnly,
            )
        }
    };
    let method = if ef_zero && rg_zero {
        DarbouxMethod::Identity
    } else {
        method
    };
    Ok(DarbouxMap::finish(t, t_inv, &build_omega(cfg), method))
}

/// Builds an `Omega`-conjugate basis by greedy pivoting and returns the map
/// into it.
///
/// At each step the pair `(v, w)` of remaining vectors with the largest
/// `|Omega(v, w)|` is taken, scaled so `Omega(e, f) = 1`, and every other
/// remaining vector is projected onto the `Omega`-complement of
/// `span{e, f}` (twice, for stability).
pub fn symplectic_gram_schmidt(omega: &OmegaMatrix, tol: &Tolerances) -> Result<DarbouxMap> {
    let m = omega.matrix();
    let dim = m.nrows();
    let n = dim / 2;
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let form = |x: &nalgebra::DVector<f64>, y: &nalgebra::DVector<f64>| x.dot(&(m * y));

    let mut pool: Vec<nalgebra::DVector<f64>> = (0..dim)
        .map(|i| nalgebra::DVector::from_fn(dim, |k, _| if k == i { 1.0 } else { 0.0 }))
        .collect();
    let mut es = Vec::with_capacity(n);
    let mut fs = Vec::with_capacity(n);

    for _ in 0..n {
        let mut best = (0, 0, 0.0_f64);
        for i in 0..pool.len() {
            for j in (i + 1)..pool.len() {
                let val = form(&pool[i], &pool[j]);
                if val.abs() > best.2.abs() {
                    best = (i, j, val);
                }
            }
        }
        let (i, j, pivot) = best;
        if pivot.abs() <= tol.rank * scale {
            return Err(Error::SingularOmega {
                det_psi: m.determinant(),
                condition: linalg::condition_number(m),
                kernel_dim: linalg::null_space(m, tol.rank).ncols(),
            });
        }
        let e = pool[i].clone();
        let f = &pool[j] / pivot;
        // Remove the higher index first so the lower one stays valid.
        pool.remove(j);
        pool.remove(i);
        for x in pool.iter_mut() {
            for _ in 0..2 {
                let a = form(&f, x);
                let b = form(&e, x);
                *x += &e * a - &f * b;
            }
        }
        es.push(e);
        fs.push(f);
    }

    let mut basis = DMatrix::zeros(dim, dim);
    for k in 0..n {
        basis.set_column(k, &es[k]);
        basis.set_column(n + k, &fs[k]);
    }
    let t = basis
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularOmega {
            det_psi: 0.0,
            condition: f64::INFINITY,
            kernel_dim: linalg::null_space(m, tol.rank).ncols(),
        })?;
    Ok(DarbouxMap::finish(t, basis, omega, DarbouxMethod::GramSchmidt))
}

/// `max |T^T J T - Omega|`.
pub fn verify_darboux(map: &DarbouxMap, omega: &OmegaMatrix) -> f64 {
    let j = linalg::canonical_j(map.dim());
    max_abs(&(map.t.transpose() * j * &map.t - omega.matrix()))
}

/// Symplectic defect of `T_1 T_2^{-1}`; two valid maps for the same form
/// differ by an element of `Sp(2N)`.
pub fn symplectic_equivalence(a: &DarbouxMap, b: &DarbouxMap) -> f64 {
    linalg::symplectic_defect(&(&a.t * &b.t_inv))
}

/// Picks the closed form when one applies, otherwise Gram-Schmidt.
pub fn darboux_for(cfg: &FieldConfig, tol: &Tolerances) -> Result<DarbouxMap> {
    let ef_zero = cfg.ef().iter().all(|&v| v == 0.0);
    let rg_zero = cfg.rg().iter().all(|&v| v == 0.0);
    if rg_zero {
        return darboux_single_charge(cfg, SingleCharge::ElectricOnly);
    }
    if ef_zero {
        return darboux_single_charge(cfg, SingleCharge::DualOnly);
    }
    let closed = if let Some((b, c)) = cfg.planar_fields() {
        Some(darboux_n2(b, c, tol))
    } else {
        cfg.axial_fields().map(|(b, c)| darboux_n3(b, c, tol))
    };
    match closed {
        Some(Ok(map)) => Ok(map),
        Some(Err(Error::DegenerateChi { chi })) => Err(Error::DegenerateChi { chi }),
        _ => symplectic_gram_schmidt(&build_omega(cfg), tol),
    }
}
