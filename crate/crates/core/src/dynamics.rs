//! Quadratic Hamiltonians `H = p^2/2m + V(q)` on the modified phase space:
//! equations of motion, renormalized parameters and frequencies, the
//! closed-form `N = 2` solution in shift variables, and exact or
//! implicit-midpoint propagation.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::darboux::{self, DarbouxMap};
use crate::error::{Error, Result};
use crate::forms::{self, FieldConfig, Tolerances};
use crate::linalg;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    /// `V = kappa/2 q.q`
    Harmonic { kappa: f64 },
    /// `V = -E.q`; a zero force gives the free particle.
    Linear { force: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorModel {
    pub mass: f64,
    pub potential: Potential,
    pub hbar: f64,
}

impl OscillatorModel {
    pub fn harmonic(mass: f64, kappa: f64) -> Result<Self> {
        let model = Self {
            mass,
            potential: Potential::Harmonic { kappa },
            hbar: 1.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn linear(mass: f64, force: Vec<f64>) -> Result<Self> {
        let model = Self {
            mass,
            potential: Potential::Linear { force },
            hbar: 1.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn free(mass: f64, n: usize) -> Result<Self> {
        Self::linear(mass, vec![0.0; n])
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        self.hbar = hbar;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidModel(format!("mass must be positive, got {}", self.mass)));
        }
        if !(self.hbar > 0.0 && self.hbar.is_finite()) {
            return Err(Error::InvalidModel(format!("hbar must be positive, got {}", self.hbar)));
        }
        match &self.potential {
            Potential::Harmonic { kappa } if !(*kappa > 0.0 && kappa.is_finite()) => Err(
                Error::InvalidModel(format!("harmonic potential needs kappa > 0, got {kappa}")),
            ),
            Potential::Linear { force } if force.iter().any(|f| !f.is_finite()) => {
                Err(Error::InvalidModel("force has non-finite entries".into()))
            }
            _ => Ok(()),
        }
    }

    /// Elasticity; zero for the linear potential.
    pub fn kappa(&self) -> f64 {
        match self.potential {
            Potential::Harmonic { kappa } => kappa,
            Potential::Linear { .. } => 0.0,
        }
    }

    /// `sqrt(kappa/m)`
    pub fn omega0(&self) -> f64 {
        (self.kappa() / self.mass).sqrt()
    }

    fn harmonic_kappa(&self) -> Result<f64> {
        match self.potential {
            Potential::Harmonic { kappa } => Ok(kappa),
            Potential::Linear { .. } => Err(Error::InvalidModel(
                "operation needs a harmonic potential".into(),
            )),
        }
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        match &self.potential {
            Potential::Linear { force } if force.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                found: force.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Hessian of `H` in `(q, p)` ordering.
    pub fn hessian(&self, n: usize) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            h[(i, i)] = self.kappa();
            h[(n + i, n + i)] = 1.0 / self.mass;
        }
        h
    }

    /// `grad H` at the origin (nonzero only for the linear potential).
    pub fn gradient_offset(&self, n: usize) -> DVector<f64> {
        let mut g = DVector::zeros(2 * n);
        if let Potential::Linear { force } = &self.potential {
            for (i, f) in force.iter().enumerate().take(n) {
                g[i] = -f;
            }
        }
        g
    }

    pub fn gradient(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = z.len() / 2;
        self.hessian(n) * z + self.gradient_offset(n)
    }

    pub fn energy(&self, z: &DVector<f64>) -> f64 {
        let n = z.len() / 2;
        0.5 * z.dot(&(self.hessian(n) * z)) + self.gradient_offset(n).dot(z)
    }
}

/// Linear flow `dz/dt = M z + k` with `M = Lambda Hess(H)`, `k = Lambda grad H(0)`.
pub fn flow_matrix(
    cfg: &FieldConfig,
    model: &OscillatorModel,
    tol: &Tolerances,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = cfg.dim();
    model.check_dim(n)?;
    let lambda = forms::poisson_matrix(cfg, tol)?;
    Ok((
        lambda.matrix() * model.hessian(n),
        lambda.matrix() * model.gradient_offset(n),
    ))
}

/// `dz/dt = X_H(z)` via the `Psi^{-1}`, `Phi^{-1}` block formulas.
pub fn equations_of_motion(
    cfg: &FieldConfig,
    model: &OscillatorModel,
    z: &DVector<f64>,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    let n = cfg.dim();
    model.check_dim(n)?;
    if z.len() != 2 * n {
        return Err(Error::DimensionMismatch {
            expected: 2 * n,
            found: z.len(),
        });
    }
    forms::hamiltonian_vector_field(cfg, &model.gradient(z), tol)
}

/// Renormalized parameters and frequencies of the planar oscillator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct N2Frequencies {
    /// `B / sqrt(m kappa)`
    pub b: f64,
    /// `C sqrt(m kappa)`
    pub c: f64,
    pub chi: f64,
    pub u: f64,
    pub m_prime: f64,
    pub kappa_prime: f64,
    pub omega0: f64,
    pub omega0_prime: f64,
    pub omega_l_prime: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// `m' omega0'` from its closed form in `b`, `c`, `u`.
    pub m_prime_omega0_prime: f64,
}

pub fn n2_frequencies(model: &OscillatorModel, b_field: f64, c_field: f64, tol: &Tolerances) -> Result<N2Frequencies> {
    let kappa = model.harmonic_kappa()?;
    let m = model.mass;
    let chi = 1.0 + c_field * b_field;
    if chi.abs() <= tol.singular {
        return Err(Error::DegenerateChi { chi });
    }
    if chi < 0.0 {
        return Err(Error::NegativeChi { chi });
    }
    let smk = (m * kappa).sqrt();
    let b = b_field / smk;
    let c = c_field * smk;
    let u = 0.5 * (1.0 + chi.sqrt());
    let four_u2 = 4.0 * u * u;
    let inv_m_prime = (u / chi) * (1.0 + c * c / four_u2) / m;
    let kappa_prime = kappa * (u / chi) * (1.0 + b * b / four_u2);
    let omega0 = (kappa / m).sqrt();
    let omega0_prime = omega0 / (2.0 * chi) * ((b - c).powi(2) + 4.0 * chi).sqrt();
    let omega_l_prime = omega0 / (2.0 * chi) * (b - c);
    let m_prime_omega0_prime = smk * ((1.0 + b * b / four_u2) / (1.0 + c * c / four_u2)).sqrt();
    Ok(N2Frequencies {
        b,
        c,
        chi,
        u,
        m_prime: 1.0 / inv_m_prime,
        kappa_prime,
        omega0,
        omega0_prime,
        omega_l_prime,
        omega_plus: omega0_prime + omega_l_prime,
        omega_minus: omega0_prime - omega_l_prime,
        m_prime_omega0_prime,
    })
}

/// Shift variables `A_(+) = (Q + iP)/2`, `A_(-)^dagger = (Q - iP)/2` of the
/// planar oscillator, where `Q`, `P` are the reduced Darboux variables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftVariables {
    pub freq: N2Frequencies,
    b_field: f64,
    c_field: f64,
}

/// Complex amplitudes `(A_(+), A_(-)^dagger)`.
pub type ShiftAmplitudes = (Complex<f64>, Complex<f64>);

impl ShiftVariables {
    pub fn new(model: &OscillatorModel, b_field: f64, c_field: f64, tol: &Tolerances) -> Result<Self> {
        Ok(Self {
            freq: n2_frequencies(model, b_field, c_field, tol)?,
            b_field,
            c_field,
        })
    }

    fn primes(&self) -> (f64, f64, f64, f64) {
        let mw = self.freq.m_prime_omega0_prime;
        let u = self.freq.u;
        let b_over = self.b_field / mw / (2.0 * u);
        let c_over = self.c_field * mw / (2.0 * u);
        (mw, u, b_over, c_over)
    }

    pub fn to_shift(&self, z: &DVector<f64>) -> ShiftAmplitudes {
        let (mw, u, bp, cp) = self.primes();
        let q = Complex::new(z[0], z[1]);
        let p = Complex::new(z[2], z[3]);
        let i = Complex::<f64>::i();
        let half = 0.5 * u.sqrt();
        let a_plus = (q * (mw.sqrt() * (1.0 - bp)) + i * p * ((1.0 + cp) / mw.sqrt())) * half;
        let a_minus_dag = (q * (mw.sqrt() * (1.0 + bp)) - i * p * ((1.0 - cp) / mw.sqrt())) * half;
        (a_plus, a_minus_dag)
    }

    pub fn from_shift(&self, amps: ShiftAmplitudes) -> DVector<f64> {
        let (mw, u, bp, cp) = self.primes();
        let (a_plus, a_minus_dag) = amps;
        let root = (u / self.freq.chi).sqrt();
        let i = Complex::<f64>::i();
        let q = (a_plus * (1.0 - cp) + a_minus_dag * (1.0 + cp)) * (root / mw.sqrt());
        let p = i * (a_minus_dag * (1.0 - bp) - a_plus * (1.0 + bp)) * (root * mw.sqrt());
        DVector::from_vec(vec![q.re, q.im, p.re, p.im])
    }

    /// `A_(+)(t) = e^{-i w+ t} A_(+)(0)`, `A_(-)^dagger(t) = e^{+i w- t} A_(-)^dagger(0)`.
    pub fn evolve(&self, amps: ShiftAmplitudes, t: f64) -> ShiftAmplitudes {
        (
            amps.0 * Complex::from_polar(1.0, -self.freq.omega_plus * t),
            amps.1 * Complex::from_polar(1.0, self.freq.omega_minus * t),
        )
    }

    /// The `omega_(+)` part of the motion starting at `z0`, at time `t`.
    pub fn fast_component(&self, z0: &DVector<f64>, t: f64) -> DVector<f64> {
        let (a_plus, _) = self.evolve(self.to_shift(z0), t);
        self.from_shift((a_plus, Complex::new(0.0, 0.0)))
    }

    /// The `omega_(-)` part of the motion starting at `z0`, at time `t`.
    pub fn slow_component(&self, z0: &DVector<f64>, t: f64) -> DVector<f64> {
        let (_, a_minus_dag) = self.evolve(self.to_shift(z0), t);
        self.from_shift((Complex::new(0.0, 0.0), a_minus_dag))
    }
}

/// Exact planar solution through the shift variables.
pub fn closed_form_solution_n2(
    model: &OscillatorModel,
    b_field: f64,
    c_field: f64,
    z0: &DVector<f64>,
    t: f64,
    tol: &Tolerances,
) -> Result<DVector<f64>> {
    if z0.len() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: z0.len(),
        });
    }
    let shift = ShiftVariables::new(model, b_field, c_field, tol)?;
    Ok(shift.from_shift(shift.evolve(shift.to_shift(z0), t)))
}

/// `xi^1 pi_2 - xi^2 pi_1` of a point given in Darboux coordinates.
pub fn angular_momentum(zeta: &DVector<f64>) -> f64 {
    let n = zeta.len() / 2;
    zeta[0] * zeta[n + 1] - zeta[1] * zeta[n]
}

/// Parallel fields along `e_z` in three dimensions: a planar oscillator
/// in the transverse plane plus a bare one along `z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct N3ParallelModel {
    pub m_perp: f64,
    pub kappa_perp: f64,
    pub omega3: f64,
    pub omega_perp: f64,
    pub omega_l_prime: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
}

pub fn n3_parallel_model(model: &OscillatorModel, b_field: f64, c_field: f64, tol: &Tolerances) -> Result<N3ParallelModel> {
    let f = n2_frequencies(model, b_field, c_field, tol)?;
    Ok(N3ParallelModel {
        m_perp: f.m_prime,
        kappa_perp: f.kappa_prime,
        omega3: f.omega0,
        omega_perp: f.omega0_prime,
        omega_l_prime: f.omega_l_prime,
        omega_plus: f.omega_plus,
        omega_minus: f.omega_minus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Midpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSample {
    pub t: f64,
    pub z: Vec<f64>,
    pub energy: f64,
    /// Angular momentum in Darboux coordinates, when a closed-form map exists.
    pub lambda3: Option<f64>,
    /// Secondary-constraint residual, for degenerate flows.
    pub constraint_residual: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<PhaseSample>,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<DVector<f64>> {
        self.samples.last().map(|s| DVector::from_column_slice(&s.z))
    }

    /// `max |H(t) - H(0)| / max(|H(0)|, tiny)`.
    pub fn relative_energy_drift(&self) -> f64 {
        let Some(first) = self.samples.first() else { return 0.0 };
        let scale = first.energy.abs().max(f64::MIN_POSITIVE);
        self.samples
            .iter()
            .map(|s| (s.energy - first.energy).abs() / scale)
            .fold(0.0, f64::max)
    }
}

/// Closed-form Darboux map for `N = 2, 3` when one exists.
pub fn closed_form_darboux(cfg: &FieldConfig, tol: &Tolerances) -> Option<DarbouxMap> {
    if let Some((b, c)) = cfg.planar_fields() {
        darboux::darboux_n2(b, c, tol).ok()
    } else if let Some((b, c)) = cfg.axial_fields() {
        darboux::darboux_n3(b, c, tol).ok()
    } else {
        None
    }
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.clone().complex_eigenvalues().iter().copied().collect()
}

/// Propagates `dz/dt = M z + k` for `steps` steps of size `dt`.
///
/// `Exact` uses the matrix exponential of the augmented system; `Midpoint`
/// solves `(I - dt M/2) z' = (I + dt M/2) z + dt k` each step.
pub fn integrate(
    cfg: &FieldConfig,
    model: &OscillatorModel,
    z0: &DVector<f64>,
    dt: f64,
    steps: usize,
    method: Method,
    tol: &Tolerances,
) -> Result<Trajectory> {
    let n = cfg.dim();
    model.check_dim(n)?;
    integrate_quadratic(cfg, &model.hessian(n), &model.gradient_offset(n), z0, dt, steps, method, tol)
}

/// [`integrate`] for an arbitrary `H = z^T hessian z / 2 + gradient . z`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_quadratic(
    cfg: &FieldConfig,
    hessian: &DMatrix<f64>,
    gradient: &DVector<f64>,
    z0: &DVector<f64>,
    dt: f64,
    steps: usize,
    method: Method,
    tol: &Tolerances,
) -> Result<Trajectory> {
    let n = cfg.dim();
    for found in [z0.len(), hessian.nrows(), hessian.ncols(), gradient.len()] {
        if found != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                found,
            });
        }
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidModel(format!("dt must be positive, got {dt}")));
    }
    let lambda = forms::poisson_matrix(cfg, tol)?;
    let m = lambda.matrix() * hessian;
    let k = lambda.matrix() * gradient;
    let step = step_operator(&m, &k, dt, method)?;
    let darboux = if n == 2 || n == 3 {
        closed_form_darboux(cfg, tol)
    } else {
        None
    };

    let sample = |t: f64, z: &DVector<f64>| PhaseSample {
        t,
        z: z.iter().copied().collect(),
        energy: 0.5 * z.dot(&(hessian * z)) + gradient.dot(z),
        lambda3: darboux.as_ref().map(|map| angular_momentum(&map.forward(z))),
        constraint_residual: None,
    };

    let mut samples = Vec::with_capacity(steps + 1);
    let mut z = z0.clone();
    samples.push(sample(0.0, &z));
    for i in 1..=steps {
        z = step.apply(&z);
        samples.push(sample(i as f64 * dt, &z));
    }
    Ok(Trajectory { samples })
}

/// One affine step `z -> A z + b`.
#[derive(Clone, Debug)]
pub struct StepOperator {
    pub linear: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl StepOperator {
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.linear * z + &self.shift
    }
}

pub fn step_operator(m: &DMatrix<f64>, k: &DVector<f64>, dt: f64, method: Method) -> Result<StepOperator> {
    let dim = m.nrows();
    match method {
        Method::Exact => {
            let mut aug = DMatrix::zeros(dim + 1, dim + 1);
            aug.view_mut((0, 0), (dim, dim)).copy_from(&(m * dt));
            aug.view_mut((0, dim), (dim, 1)).copy_from(&(k * dt));
            let e = linalg::expm(&aug);
            Ok(StepOperator {
                linear: e.view((0, 0), (dim, dim)).into_owned(),
                shift: e.view((0, dim), (dim, 1)).column(0).into_owned(),
            })
        }
        Method::Midpoint => {
            let id = DMatrix::<f64>::identity(dim, dim);
            let lhs = &id - m * (0.5 * dt);
            let rhs = &id + m * (0.5 * dt);
            let reject = || {
                let radius = eigenvalues(m).iter().map(|e| e.norm()).fold(0.0, f64::max);
                Error::StepRejected {
                    dt,
                    suggested_dt: if radius > 0.0 { 1.0 / radius } else { dt },
                }
            };
            if linalg::condition_number(&lhs) > 1e13 {
                return Err(reject());
            }
            let lu = lhs.lu();
            let inv = lu.try_inverse().ok_or_else(reject)?;
            Ok(StepOperator {
                linear: &inv * rhs,
                shift: inv * k * dt,
            })
        }
    }
}
