//! Quantum spectra of the quadratic models and the numerical `chi -> 0`
//! limit of the planar oscillator.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constrained;
use crate::dynamics::{self, OscillatorModel, ShiftVariables};
use crate::error::{Error, Result};
use crate::forms::Tolerances;
use crate::sweep::Execution;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub quanta: Vec<u32>,
    pub energy: f64,
}

/// Levels `E(n) = hbar sum_i omega_i (n_i + 1/2)` of independent modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    /// All quantum-number tuples with every entry `<= nmax`, in lexicographic order.
    pub levels: Vec<Level>,
    pub hbar: f64,
    /// Positive mode frequencies.
    pub frequencies: Vec<f64>,
    /// The frequencies with their classical rotation sense.
    pub signed_frequencies: Vec<f64>,
}

impl SpectrumTable {
    fn build(hbar: f64, frequencies: Vec<f64>, signed_frequencies: Vec<f64>, nmax: u32) -> Self {
        let modes = frequencies.len();
        let mut levels = Vec::new();
        let mut quanta = vec![0u32; modes];
        loop {
            let energy = quanta
                .iter()
                .zip(&frequencies)
                .map(|(&n, w)| hbar * w * (f64::from(n) + 0.5))
                .sum();
            levels.push(Level {
                quanta: quanta.clone(),
                energy,
            });
            // odometer increment, last index fastest
            let mut i = modes;
            loop {
                if i == 0 {
                    return Self {
                        levels,
                        hbar,
                        frequencies,
                        signed_frequencies,
                    };
                }
                i -= 1;
                if quanta[i] < nmax {
                    quanta[i] += 1;
                    break;
                }
                quanta[i] = 0;
            }
        }
    }

    pub fn ground_state(&self) -> f64 {
        self.energy(&vec![0; self.frequencies.len()]).unwrap_or(0.0)
    }

    pub fn energy(&self, quanta: &[u32]) -> Option<f64> {
        self.levels.iter().find(|l| l.quanta == quanta).map(|l| l.energy)
    }

    /// Energies in nondecreasing order.
    pub fn sorted_energies(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self.levels.iter().map(|l| l.energy).collect();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// `E(n+, n-) = hbar w+ (n+ + 1/2) + hbar w- (n- + 1/2)`.
pub fn spectrum_n2(model: &OscillatorModel, b_field: f64, c_field: f64, nmax: u32, tol: &Tolerances) -> Result<SpectrumTable> {
    let f = dynamics::n2_frequencies(model, b_field, c_field, tol)?;
    let w = vec![f.omega_plus, f.omega_minus];
    Ok(SpectrumTable::build(model.hbar, w.clone(), w, nmax))
}

/// `E(n) = hbar |omega_r| (n + 1/2)` on the reduced space of `B C = -1`.
pub fn spectrum_degenerate_n2(model: &OscillatorModel, c_field: f64, nmax: u32) -> Result<SpectrumTable> {
    let omega_r = constrained::reduced_frequency(model, c_field)?;
    Ok(SpectrumTable::build(model.hbar, vec![omega_r.abs()], vec![omega_r], nmax))
}

/// Parallel fields along `z`: modes `(w+, w-, w3)`.
pub fn spectrum_n3_parallel(
    model: &OscillatorModel,
    b_field: f64,
    c_field: f64,
    nmax: u32,
    tol: &Tolerances,
) -> Result<SpectrumTable> {
    let p = dynamics::n3_parallel_model(model, b_field, c_field, tol)?;
    let w = vec![p.omega_plus, p.omega_minus, p.omega3];
    Ok(SpectrumTable::build(model.hbar, w.clone(), w, nmax))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitScanRow {
    /// `sqrt(chi)`
    pub epsilon: f64,
    pub c: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub omega_r_target: f64,
    pub omega_plus_eps2: f64,
    /// `omega0 (1 + (m omega0)^2 C^2) / (m omega0 |C|)` at this row's `C`.
    pub divergence_constant: f64,
    /// Size of the `omega_+` component for initial data on the `chi = 0` constraint surface.
    pub fast_amplitude: f64,
}

/// `n` log-spaced values from `max` down to `min`.
pub fn log_grid(max: f64, min: f64, n: usize) -> Result<Vec<f64>> {
    if !(max > 0.0 && min > 0.0 && max >= min) || n == 0 {
        return Err(Error::InvalidModel(format!("bad epsilon grid [{min}, {max}] x {n}")));
    }
    if n == 1 {
        return Ok(vec![max]);
    }
    if max == min {
        return Err(Error::InvalidModel("grid with several points needs max > min".into()));
    }
    let (lmax, lmin) = (max.ln(), min.ln());
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                max
            } else if i == n - 1 {
                min
            } else {
                (lmax + (lmin - lmax) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// `1, 2, 5` decades from `max` down to `min`, inclusive.
pub fn one_two_five_grid(max: f64, min: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut decade = 10f64.powi(max.log10().ceil() as i32);
    while decade >= min * 0.999 {
        for m in [1.0, 0.5, 0.2] {
            let v = decade * m;
            if v <= max * 1.001 && v >= min * 0.999 {
                out.push(v);
            }
        }
        decade /= 10.0;
    }
    out
}

/// Initial point on `p/m + i C0 kappa q = 0` with `C0 = -1/B` and `p = (1, 0)`.
pub fn constraint_surface_point(model: &OscillatorModel, b_field: f64) -> DVector<f64> {
    let q2 = -b_field / (model.mass * model.kappa());
    DVector::from_vec(vec![0.0, q2, 1.0, 0.0])
}

/// Rows for `chi = eps^2`, i.e. `C = (eps^2 - 1)/B`, at fixed `B`.
pub fn chi_limit_scan(
    model: &OscillatorModel,
    b_field: f64,
    eps_grid: &[f64],
    exec: Execution,
    tol: &Tolerances,
) -> Result<Vec<LimitScanRow>> {
    if b_field == 0.0 {
        return Err(Error::InvalidField("limit scan needs B != 0".into()));
    }
    if eps_grid.iter().any(|e| e.is_nan() || *e <= 0.0) || eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidModel(
            "epsilon grid must be positive and strictly decreasing".into(),
        ));
    }
    let omega_r_target = constrained::reduced_frequency(model, -1.0 / b_field)?;
    let z0 = constraint_surface_point(model, b_field);
    let m_w0 = model.mass * model.omega0();
    exec.map(eps_grid.len(), |i| {
        let epsilon = eps_grid[i];
        let c = (epsilon * epsilon - 1.0) / b_field;
        let shift = ShiftVariables::new(model, b_field, c, tol)?;
        let f = shift.freq;
        Ok(LimitScanRow {
            epsilon,
            c,
            omega_plus: f.omega_plus,
            omega_minus: f.omega_minus,
            omega_r_target,
            omega_plus_eps2: f.omega_plus * epsilon * epsilon,
            divergence_constant: f.omega0 * (1.0 + m_w0 * m_w0 * c * c) / (m_w0 * c.abs()),
            fast_amplitude: shift.fast_component(&z0, 0.0).norm(),
        })
    })
    .into_iter()
    .collect()
}

/// Convergence orders read off a limit scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitScanSummary {
    /// Log-log slope of `|omega_- - omega_r|` against `epsilon`.
    pub omega_minus_slope: f64,
    /// Log-log slope of the fast amplitude against `epsilon`.
    pub fast_amplitude_slope: f64,
    /// `omega_-` extrapolated to `epsilon = 0` by a fit linear in `epsilon^2`.
    pub omega_minus_intercept: f64,
    /// `(max - min)/|mean|` of `omega_+ eps^2` over the smallest decade of the grid.
    pub omega_plus_eps2_variation: f64,
}

fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn summarize_scan(rows: &[LimitScanRow]) -> Option<LimitScanSummary> {
    if rows.len() < 2 {
        return None;
    }
    let log_eps: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
    let log_minus: Vec<f64> = rows.iter().map(|r| (r.omega_minus - r.omega_r_target).abs().ln()).collect();
    let log_fast: Vec<f64> = rows.iter().map(|r| r.fast_amplitude.ln()).collect();
    let eps2: Vec<f64> = rows.iter().map(|r| r.epsilon * r.epsilon).collect();
    let minus: Vec<f64> = rows.iter().map(|r| r.omega_minus).collect();
    let eps_min = rows.iter().map(|r| r.epsilon).fold(f64::INFINITY, f64::min);
    let last_decade: Vec<f64> = rows
        .iter()
        .filter(|r| r.epsilon <= 10.0 * eps_min * (1.0 + 1e-9))
        .map(|r| r.omega_plus_eps2)
        .collect();
    let mean = last_decade.iter().sum::<f64>() / last_decade.len() as f64;
    let spread = last_decade.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - last_decade.iter().copied().fold(f64::INFINITY, f64::min);
    Some(LimitScanSummary {
        omega_minus_slope: fit_line(&log_eps, &log_minus).0,
        fast_amplitude_slope: fit_line(&log_eps, &log_fast).0,
        omega_minus_intercept: fit_line(&eps2, &minus).1,
        omega_plus_eps2_variation: spread / mean.abs(),
    })
}
