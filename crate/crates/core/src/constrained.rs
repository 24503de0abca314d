//! The presymplectic regime: kernel of a degenerate two-form, secondary
//! constraints, the Gotay-Nester-Hinds chain for quadratic Hamiltonians on
//! linear spaces, and the reduced planar oscillator at `chi = 0`.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, OscillatorModel, PhaseSample, Potential, Trajectory};
use crate::error::{Error, Result};
use crate::forms::{self, FieldConfig, OmegaMatrix, Tolerances};
use crate::linalg;

/// Largest constraint violation accepted for an initial state.
pub const ON_CONSTRAINT_TOL: f64 = 1e-8;

/// Relative threshold for deciding a constraint system is solvable.
pub const CONSISTENCY_TOL: f64 = 1e-9;

/// Orthonormal basis of `ker Omega`.
pub fn kernel(omega: &OmegaMatrix, tol: &Tolerances) -> DMatrix<f64> {
    linalg::null_space(omega.matrix(), tol.rank)
}

/// Affine constraints `rows z + offset = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraints {
    pub rows: DMatrix<f64>,
    pub offset: DVector<f64>,
}

impl LinearConstraints {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    /// `max |rows z + offset|`.
    pub fn residual(&self, z: &DVector<f64>) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        linalg::max_abs_vec(&(&self.rows * z + &self.offset))
    }
}

/// `<grad H(z) | Z> = 0` for every kernel vector `Z`.
pub fn secondary_constraints(
    cfg: &FieldConfig,
    model: &OscillatorModel,
    tol: &Tolerances,
) -> Result<LinearConstraints> {
    let n = cfg.dim();
    let k = kernel(&forms::build_omega(cfg), tol);
    if k.ncols() == 0 {
        return Err(Error::NoKernel);
    }
    Ok(LinearConstraints {
        rows: k.transpose() * model.hessian(n),
        offset: k.transpose() * model.gradient_offset(n),
    })
}

/// Real and imaginary parts of `p/m + i C kappa q = 0`:
/// `p_1/m - C kappa q^2 = 0` and `p_2/m + C kappa q^1 = 0`.
pub fn planar_constraints(model: &OscillatorModel, c_field: f64) -> LinearConstraints {
    let ck = c_field * model.kappa();
    let inv_m = 1.0 / model.mass;
    LinearConstraints {
        rows: DMatrix::from_row_slice(2, 4, &[0.0, -ck, inv_m, 0.0, ck, 0.0, 0.0, inv_m]),
        offset: DVector::zeros(2),
    }
}

/// `{offset + basis y}`; the basis columns are orthonormal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineSubspace {
    pub offset: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl AffineSubspace {
    pub fn full(dim: usize) -> Self {
        Self {
            offset: DVector::zeros(dim),
            basis: DMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn coordinates(&self, z: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * (z - &self.offset)
    }

    pub fn point(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.offset + &self.basis * y
    }

    /// Euclidean distance from `z` to the subspace.
    pub fn distance(&self, z: &DVector<f64>) -> f64 {
        let d = z - &self.offset;
        (&d - &self.basis * (self.basis.transpose() * &d)).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainStatus {
    /// A tangent flow exists on a positive-dimensional terminal subspace.
    Consistent,
    /// The terminal set is a single point.
    Empty,
    /// The solvability condition holds nowhere.
    Inconsistent,
}

/// Flow `dy/dt = matrix y + drift` in coordinates of the terminal subspace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedFlow {
    pub matrix: DMatrix<f64>,
    pub drift: DVector<f64>,
    /// Tangent directions along which the solution is undetermined.
    pub gauge: DMatrix<f64>,
    /// `max |Omega X + grad H|` over the terminal subspace.
    pub solution_residual: f64,
}

impl ReducedFlow {
    /// The same flow as an ambient linear map `S R S^T`.
    pub fn ambient(&self, subspace: &AffineSubspace) -> DMatrix<f64> {
        &subspace.basis * &self.matrix * subspace.basis.transpose()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintChain {
    pub subspaces: Vec<AffineSubspace>,
    /// Constraints imposed at each step, in ambient coordinates.
    pub constraints: Vec<LinearConstraints>,
    /// Kernel of the two-form, i.e. the undetermined directions of the
    /// unconstrained equation.
    pub kernel: DMatrix<f64>,
    pub status: ChainStatus,
    pub reduced_flow: Option<ReducedFlow>,
    /// Eigenvalues `(re, im)` of the reduced flow.
    pub eigenvalues: Vec<(f64, f64)>,
}

impl ConstraintChain {
    pub fn terminal_index(&self) -> usize {
        self.subspaces.len() - 1
    }

    pub fn terminal(&self) -> &AffineSubspace {
        &self.subspaces[self.terminal_index()]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subspaces.iter().map(AffineSubspace::dim).collect()
    }
}

fn eigen_pairs(m: &DMatrix<f64>) -> Vec<(f64, f64)> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<(f64, f64)> = dynamics::eigenvalues(m).iter().map(|c| (c.re, c.im)).collect();
    ev.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    ev
}

/// Gotay-Nester-Hinds algorithm for `H = z^T Hess z / 2 + g^T z` with a
/// constant two-form.
///
/// `M_1` is the whole space; `M_{k+1}` keeps the points of `M_k` where
/// `<grad H | Z> = 0` for every `Z` with `omega(Z, T M_k) = 0`. The chain
/// stops once those conditions hold identically on `M_k`.
pub fn gnh_chain(
    omega: &OmegaMatrix,
    hessian: &DMatrix<f64>,
    gradient: &DVector<f64>,
    tol: &Tolerances,
) -> Result<ConstraintChain> {
    let dim = omega.matrix().nrows();
    if hessian.nrows() != dim || hessian.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: hessian.nrows(),
        });
    }
    if gradient.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: gradient.len(),
        });
    }
    let om = omega.matrix();
    let kernel = linalg::null_space(om, tol.rank);
    let scale = linalg::max_abs(hessian).max(linalg::max_abs_vec(gradient)).max(1.0);

    let mut chain = ConstraintChain {
        subspaces: vec![AffineSubspace::full(dim)],
        constraints: Vec::new(),
        kernel,
        status: ChainStatus::Consistent,
        reduced_flow: None,
        eigenvalues: Vec::new(),
    };

    loop {
        let current = chain.subspaces.last().expect("nonempty chain").clone();
        let s = &current.basis;
        let a = &current.offset;
        // Z with omega(Z, T M_k) = 0
        let v = if s.ncols() == 0 {
            DMatrix::identity(dim, dim)
        } else {
            linalg::null_space(&(s.transpose() * om), tol.rank)
        };
        let rows = v.transpose() * hessian;
        let offset = v.transpose() * gradient;
        let restricted = &rows * s;
        let shift = &rows * a + &offset;
        let step = chain.subspaces.len();

        let active = !restricted.is_empty() && linalg::max_abs(&restricted) > CONSISTENCY_TOL * scale;
        if !active {
            let residual = if shift.is_empty() { 0.0 } else { linalg::max_abs_vec(&shift) };
            if residual > CONSISTENCY_TOL * scale {
                chain.status = ChainStatus::Inconsistent;
                return Err(Error::InconsistentSystem {
                    step,
                    residual,
                    chain: Box::new(chain),
                });
            }
            break;
        }

        let (y0, residual) = linalg::least_squares(&restricted, &(-&shift), tol.rank);
        if residual > CONSISTENCY_TOL * scale {
            chain.status = ChainStatus::Inconsistent;
            return Err(Error::InconsistentSystem {
                step,
                residual,
                chain: Box::new(chain),
            });
        }
        let next = AffineSubspace {
            offset: a + s * &y0,
            basis: s * linalg::null_space(&restricted, tol.rank),
        };
        chain.constraints.push(LinearConstraints { rows, offset });
        chain.subspaces.push(next);
    }

    let terminal = chain.terminal().clone();
    let s = &terminal.basis;
    if s.ncols() == 0 {
        chain.status = ChainStatus::Empty;
        chain.reduced_flow = Some(ReducedFlow {
            matrix: DMatrix::zeros(0, 0),
            drift: DVector::zeros(0),
            gauge: DMatrix::zeros(dim, 0),
            solution_residual: linalg::max_abs_vec(&(hessian * &terminal.offset + gradient)),
        });
        return Ok(chain);
    }
    let os = om * s;
    let pinv = linalg::pseudo_inverse(&os, tol.rank);
    let matrix = -&pinv * hessian * s;
    let drift = -&pinv * (hessian * &terminal.offset + gradient);
    let gauge = s * linalg::null_space(&os, tol.rank);
    let solution_residual = linalg::max_abs(&(&os * &matrix + hessian * s))
        .max(linalg::max_abs_vec(&(&os * &drift + hessian * &terminal.offset + gradient)));
    chain.eigenvalues = eigen_pairs(&matrix);
    chain.reduced_flow = Some(ReducedFlow {
        matrix,
        drift,
        gauge,
        solution_residual,
    });
    Ok(chain)
}

/// Chain for a field configuration and oscillator model.
pub fn gnh_chain_for(cfg: &FieldConfig, model: &OscillatorModel, tol: &Tolerances) -> Result<ConstraintChain> {
    let n = cfg.dim();
    gnh_chain(&forms::build_omega(cfg), &model.hessian(n), &model.gradient_offset(n), tol)
}

/// Samples the terminal flow of `chain` starting from `z0`.
pub fn chain_trajectory(
    chain: &ConstraintChain,
    model: &OscillatorModel,
    z0: &DVector<f64>,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    let terminal = chain.terminal();
    if z0.len() != terminal.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: terminal.ambient_dim(),
            found: z0.len(),
        });
    }
    let residual = terminal.distance(z0);
    if residual > ON_CONSTRAINT_TOL {
        return Err(Error::OffConstraint { residual });
    }
    let flow = chain.reduced_flow.as_ref().ok_or(Error::NoKernel)?;
    let op = dynamics::step_operator(&flow.matrix, &flow.drift, dt, dynamics::Method::Exact)?;
    let mut y = terminal.coordinates(z0);
    let mut samples = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        if i > 0 {
            y = op.apply(&y);
        }
        let z = if i == 0 { z0.clone() } else { terminal.point(&y) };
        samples.push(PhaseSample {
            t: i as f64 * dt,
            z: z.iter().copied().collect(),
            energy: model.energy(&z),
            lambda3: None,
            constraint_residual: Some(terminal.distance(&z)),
        });
    }
    Ok(Trajectory { samples })
}

fn harmonic_kappa(model: &OscillatorModel) -> Result<f64> {
    match model.potential {
        Potential::Harmonic { kappa } => Ok(kappa),
        Potential::Linear { .. } => Err(Error::InvalidModel(
            "the reduced planar oscillator needs a harmonic potential".into(),
        )),
    }
}

fn check_dual_field(c_field: f64) -> Result<()> {
    if c_field == 0.0 || !c_field.is_finite() {
        return Err(Error::InvalidField(format!(
            "degenerate planar case needs C != 0 (B = -1/C), got {c_field}"
        )));
    }
    Ok(())
}

/// `omega_r = -sqrt(m kappa) C omega0 / (1 + m kappa C^2)`.
pub fn reduced_frequency(model: &OscillatorModel, c_field: f64) -> Result<f64> {
    let kappa = harmonic_kappa(model)?;
    check_dual_field(c_field)?;
    let mk = model.mass * kappa;
    Ok(-mk.sqrt() * c_field * model.omega0() / (1.0 + mk * c_field * c_field))
}

/// Rotating solution on `M_2` for `B C = -1`:
/// `q(t) = e^{i omega_r t} q0`, `p(t) = e^{i omega_r t} p0`.
pub fn degenerate_flow_n2(
    model: &OscillatorModel,
    c_field: f64,
    z0: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    if z0.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: z0.len(),
        });
    }
    let omega_r = reduced_frequency(model, c_field)?;
    let residual = planar_constraints(model, c_field).residual(z0);
    if residual > ON_CONSTRAINT_TOL {
        return Err(Error::OffConstraint { residual });
    }
    let phase = Complex::from_polar(1.0, omega_r * t);
    let q = Complex::new(z0[0], z0[1]) * phase;
    let p = Complex::new(z0[2], z0[3]) * phase;
    Ok(DVector::from_vec(vec![q.re, q.im, p.re, p.im]))
}

/// Samples [`degenerate_flow_n2`] on a uniform grid, with the constraint residual.
pub fn degenerate_trajectory_n2(
    model: &OscillatorModel,
    c_field: f64,
    z0: &DVector<f64>,
    dt: f64,
    steps: usize,
) -> Result<Trajectory> {
    let constraints = planar_constraints(model, c_field);
    let samples = (0..=steps)
        .map(|i| {
            let t = i as f64 * dt;
            let z = degenerate_flow_n2(model, c_field, z0, t)?;
            Ok(PhaseSample {
                t,
                energy: model.energy(&z),
                lambda3: None,
                constraint_residual: Some(constraints.residual(&z)),
                z: z.iter().copied().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { samples })
}

/// Reduced planar oscillator on `M_2` for `B = -1/C`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedOscillatorN2 {
    pub c: f64,
    pub b: f64,
    pub omega_r: f64,
    /// Imaginary part of `{q, q^dagger}` on `M_2`; the real part vanishes.
    pub bracket_qqdag_imag: f64,
    /// `H_r = hr_coeff q^dagger q`.
    pub hr_coeff: f64,
    /// `a = a_scale q^dagger` for `C < 0`, `a = a_scale q` for `C > 0`.
    pub a_scale: f64,
    pub a_conjugated: bool,
}

impl ReducedOscillatorN2 {
    /// `{q^1, q^2}` on `M_2`.
    pub fn bracket_q1q2(&self) -> f64 {
        -0.5 * self.bracket_qqdag_imag
    }

    /// Linear functional `a` as (real part, imaginary part) gradients in `(q, p)`.
    pub fn a_gradients(&self) -> (DVector<f64>, DVector<f64>) {
        let sign = if self.a_conjugated { -1.0 } else { 1.0 };
        (
            DVector::from_vec(vec![self.a_scale, 0.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, sign * self.a_scale, 0.0, 0.0]),
        )
    }
}

pub fn reduced_structure_n2(model: &OscillatorModel, c_field: f64) -> Result<ReducedOscillatorN2> {
    let kappa = harmonic_kappa(model)?;
    let omega_r = reduced_frequency(model, c_field)?;
    let d = 1.0 + model.mass * kappa * c_field * c_field;
    Ok(ReducedOscillatorN2 {
        c: c_field,
        b: -1.0 / c_field,
        omega_r,
        bracket_qqdag_imag: -2.0 * c_field / (d * d),
        hr_coeff: d * kappa / 2.0,
        a_scale: d / (2.0 * c_field.abs()).sqrt(),
        a_conjugated: c_field < 0.0,
    })
}

/// `omega0 b/(1 + b^2)` and `-omega0 c/(1 + c^2)`; equal when `B C = -1`.
pub fn reduced_frequency_forms(model: &OscillatorModel, b_field: f64, c_field: f64) -> Result<(f64, f64)> {
    let kappa = harmonic_kappa(model)?;
    let smk = (model.mass * kappa).sqrt();
    let b = b_field / smk;
    let c = c_field * smk;
    let w0 = model.omega0();
    Ok((w0 * b / (1.0 + b * b), -w0 * c / (1.0 + c * c)))
}

/// Poisson structure induced on a subspace: `{f, g} = (S^T df)^T Lambda_r (S^T dg)`
/// with `Lambda_r = -(S^T Omega S)^{-1}`, for linear `f`, `g`.
#[derive(Clone, Debug)]
pub struct ReducedBracket {
    basis: DMatrix<f64>,
    lambda: DMatrix<f64>,
}

impl ReducedBracket {
    pub fn new(omega: &OmegaMatrix, subspace: &AffineSubspace, tol: &Tolerances) -> Result<Self> {
        let restricted = subspace.basis.transpose() * omega.matrix() * &subspace.basis;
        let k = restricted.nrows();
        if linalg::rank(&restricted, tol.rank) < k {
            return Err(Error::SingularOmega {
                det_psi: restricted.determinant(),
                condition: linalg::condition_number(&restricted),
                kernel_dim: k - linalg::rank(&restricted, tol.rank),
            });
        }
        let inv = restricted.try_inverse().ok_or(Error::SingularOmega {
            det_psi: 0.0,
            condition: f64::INFINITY,
            kernel_dim: 0,
        })?;
        Ok(Self {
            basis: subspace.basis.clone(),
            lambda: -inv,
        })
    }

    /// Reduced Poisson matrix in subspace coordinates.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn bracket(&self, grad_f: &DVector<f64>, grad_g: &DVector<f64>) -> f64 {
        (self.basis.transpose() * grad_f).dot(&(&self.lambda * (self.basis.transpose() * grad_g)))
    }

    /// `{F, G}` for complex linear functionals given as (re, im) gradients.
    pub fn complex_bracket(
        &self,
        f: &(DVector<f64>, DVector<f64>),
        g: &(DVector<f64>, DVector<f64>),
    ) -> Complex<f64> {
        let re = self.bracket(&f.0, &g.0) - self.bracket(&f.1, &g.1);
        let im = self.bracket(&f.0, &g.1) + self.bracket(&f.1, &g.0);
        Complex::new(re, im)
    }
}
