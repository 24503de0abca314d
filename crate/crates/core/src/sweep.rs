//! Seeded random draws and data-parallel sweeps over them.
//!
//! Every item of a sweep gets its own generator derived from the sweep seed
//! and the item index, so sequential and parallel runs see identical draws.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::darboux;
use crate::dynamics::{self, OscillatorModel};
use crate::error::Result;
use crate::forms::{self, FieldConfig, OmegaMatrix, Tolerances};
use crate::linalg;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `(0..n).map(f)`, fanned out over the rayon pool when parallel.
    /// Output order is always index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => (0..n).map(f).collect(),
        }
    }
}

/// Generator for item `index` of the sweep with seed `seed`.
pub fn item_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn random_antisymmetric<R: Rng>(rng: &mut R, n: usize, scale: f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(-scale..scale);
            m[(i, j)] = v;
            m[(j, i)] = -v;
        }
    }
    m
}

/// Random field configuration of dimension `n` with `|det Psi| > min_det`.
pub fn random_field_config<R: Rng>(rng: &mut R, n: usize, min_det: f64) -> FieldConfig {
    loop {
        let cfg = FieldConfig::new(random_antisymmetric(rng, n, 1.0), random_antisymmetric(rng, n, 1.0))
            .expect("antisymmetric by construction");
        if forms::regularity(&cfg).abs() > min_det {
            return cfg;
        }
    }
}

/// Planar fields with `chi = 1 + CB > min_chi`.
pub fn random_planar_fields<R: Rng>(rng: &mut R, min_chi: f64) -> (f64, f64) {
    loop {
        let b = rng.random_range(-3.0..3.0);
        let c = rng.random_range(-3.0..3.0);
        if 1.0 + b * c > min_chi {
            return (b, c);
        }
    }
}

/// Axial fields with `chi = 1 + C.B > min_chi`.
pub fn random_axial_fields<R: Rng>(rng: &mut R, min_chi: f64) -> ([f64; 3], [f64; 3]) {
    loop {
        let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        let c: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
        if 1.0 + b.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() > min_chi {
            return (b, c);
        }
    }
}

pub fn random_harmonic_model<R: Rng>(rng: &mut R) -> OscillatorModel {
    OscillatorModel::harmonic(rng.random_range(0.3..3.0), rng.random_range(0.3..3.0)).expect("positive parameters")
}

pub fn random_state<R: Rng>(rng: &mut R, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
}

/// Worst value over a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepStats {
    pub count: usize,
    pub max_deviation: f64,
}

fn collect_stats(values: Vec<Result<f64>>) -> Result<SweepStats> {
    let count = values.len();
    let mut max_deviation = 0.0_f64;
    for v in values {
        let v = v?;
        max_deviation = if v.is_nan() { f64::NAN } else { max_deviation.max(v) };
    }
    Ok(SweepStats { count, max_deviation })
}

/// Closed-form Poisson blocks against dense inversion of `Omega`, `N` in `1..=6`.
pub fn poisson_sweep(seed: u64, count: usize, exec: Execution) -> Result<SweepStats> {
    let tol = Tolerances::default();
    collect_stats(exec.map(count, |i| {
        let mut rng = item_rng(seed, i);
        let n = rng.random_range(1..=6);
        let cfg = random_field_config(&mut rng, n, 1e-6);
        let lam = forms::poisson_matrix(&cfg, &tol)?;
        let dense = forms::dense_poisson(&forms::build_omega(&cfg)).ok_or(crate::error::Error::SingularOmega {
            det_psi: forms::regularity(&cfg),
            condition: f64::INFINITY,
            kernel_dim: 0,
        })?;
        Ok(linalg::max_abs(&(lam.matrix() - dense)))
    }))
}

/// `|T^T J T - Omega|` of the planar closed form over random `chi > 0` draws.
pub fn darboux_n2_sweep(seed: u64, count: usize, exec: Execution) -> Result<SweepStats> {
    let tol = Tolerances::default();
    collect_stats(exec.map(count, |i| {
        let (b, c) = random_planar_fields(&mut item_rng(seed, i), 1e-3);
        Ok(darboux::darboux_n2(b, c, &tol)?.residual)
    }))
}

/// Same for the three-dimensional closed form.
pub fn darboux_n3_sweep(seed: u64, count: usize, exec: Execution) -> Result<SweepStats> {
    let tol = Tolerances::default();
    collect_stats(exec.map(count, |i| {
        let (b, c) = random_axial_fields(&mut item_rng(seed, i), 1e-3);
        Ok(darboux::darboux_n3(b, c, &tol)?.residual)
    }))
}

/// Symplectic Gram-Schmidt residual for random nondegenerate `Omega`, `N` in `1..=6`.
pub fn gram_schmidt_sweep(seed: u64, count: usize, exec: Execution) -> Result<SweepStats> {
    let tol = Tolerances::default();
    collect_stats(exec.map(count, |i| {
        let mut rng = item_rng(seed, i);
        let n = rng.random_range(1..=6);
        let cfg = random_field_config(&mut rng, n, 1e-3);
        let omega: OmegaMatrix = forms::build_omega(&cfg);
        Ok(darboux::symplectic_gram_schmidt(&omega, &tol)?.residual)
    }))
}

/// Symplectic defect of `T_closed T_generic^{-1}` for `N = 2` and `N = 3` draws.
pub fn equivalence_sweep(seed: u64, count: usize, exec: Execution) -> Result<SweepStats> {
    let tol = Tolerances::default();
    collect_stats(exec.map(count, |i| {
        let mut rng = item_rng(seed, i);
        let (closed, cfg) = if i % 2 == 0 {
            let (b, c) = random_planar_fields(&mut rng, 1e-2);
            (darboux::darboux_n2(b, c, &tol)?, FieldConfig::planar(b, c))
        } else {
            let (b, c) = random_axial_fields(&mut rng, 1e-2);
            (darboux::darboux_n3(b, c, &tol)?, FieldConfig::axial(b, c))
        };
        let generic = darboux::symplectic_gram_schmidt(&forms::build_omega(&cfg), &tol)?;
        Ok(darboux::symplectic_equivalence(&closed, &generic))
    }))
}

/// Imaginary parts of the flow-matrix eigenvalues against `omega_+-`.
/// Also fails (returns infinity) if either frequency is not positive.
pub fn frequency_sweep(seed: u64, count: usize, exec: Execution) -> Result<SweepStats> {
    let tol = Tolerances::default();
    collect_stats(exec.map(count, |i| {
        let mut rng = item_rng(seed, i);
        let model = random_harmonic_model(&mut rng);
        let (b, c) = random_planar_fields(&mut rng, 1e-4);
        let f = dynamics::n2_frequencies(&model, b, c, &tol)?;
        if !(f.omega_plus > 0.0 && f.omega_minus > 0.0) {
            return Ok(f64::INFINITY);
        }
        let (m, _) = dynamics::flow_matrix(&FieldConfig::planar(b, c), &model, &tol)?;
        Ok(frequency_mismatch(&m, f.omega_plus, f.omega_minus))
    }))
}

/// `max |eig - {+-i w+, +-i w-}|` after sorting both sets by imaginary part.
pub fn frequency_mismatch(flow: &DMatrix<f64>, omega_plus: f64, omega_minus: f64) -> f64 {
    let mut ev = dynamics::eigenvalues(flow);
    ev.sort_by(|a, b| a.im.total_cmp(&b.im));
    let mut expected = [-omega_plus, -omega_minus, omega_minus, omega_plus];
    expected.sort_by(f64::total_cmp);
    ev.iter()
        .zip(expected)
        .map(|(e, w)| e.re.abs().max((e.im - w).abs()))
        .fold(0.0, f64::max)
}

/// Closed-form planar flow against the matrix exponential, over 20 bare periods.
pub fn flow_sweep(seed: u64, count: usize, exec: Execution) -> Result<SweepStats> {
    let tol = Tolerances::default();
    collect_stats(exec.map(count, |i| {
        let mut rng = item_rng(seed, i);
        let model = random_harmonic_model(&mut rng);
        let (b, c) = random_planar_fields(&mut rng, 0.05);
        let z0 = random_state(&mut rng, 4);
        let t = 20.0 * 2.0 * std::f64::consts::PI / model.omega0();
        let closed = dynamics::closed_form_solution_n2(&model, b, c, &z0, t, &tol)?;
        let (m, _) = dynamics::flow_matrix(&FieldConfig::planar(b, c), &model, &tol)?;
        let numeric = linalg::expm(&(m * t)) * &z0;
        Ok(linalg::max_abs_vec(&(closed - numeric)))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let a = poisson_sweep(7, 40, Execution::Sequential).unwrap();
        let b = poisson_sweep(7, 40, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn item_streams_differ() {
        let x: f64 = item_rng(1, 0).random();
        let y: f64 = item_rng(1, 1).random();
        assert_ne!(x, y);
    }

    #[test]
    fn random_configs_are_regular() {
        let mut rng = item_rng(3, 0);
        for n in 1..=6 {
            let cfg = random_field_config(&mut rng, n, 1e-6);
            assert!(forms::regularity(&cfg).abs() > 1e-6);
        }
    }

    #[test]
    fn small_sweeps_pass() {
        assert!(darboux_n2_sweep(11, 20, Execution::Parallel).unwrap().max_deviation < 1e-9);
        assert!(frequency_sweep(11, 20, Execution::Parallel).unwrap().max_deviation < 1e-9);
    }
}
