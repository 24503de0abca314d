use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use ncphase_core::constrained::{self, ConstraintChain};
use ncphase_core::darboux::{self, DarbouxMethod};
use ncphase_core::dynamics::{self, Trajectory};
use ncphase_core::spectrum::{self, SpectrumTable};
use ncphase_core::{forms, Error as CoreError, Execution};
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, Setup};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::SingularOmega { .. } | CoreError::DegenerateChi { .. }) => 2,
            CliError::Core(CoreError::StepRejected { .. }) => 3,
            CliError::Core(CoreError::InconsistentSystem { .. }) => 4,
            _ => 1,
        }
    }
}

/// Rendered output plus the exit code to finish with.
pub struct Outcome {
    pub text: String,
    pub code: i32,
    pub message: Option<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self {
            text,
            code: 0,
            message: None,
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn coordinate_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("q{i}")).chain((1..=n).map(|i| format!("p{i}"))).collect()
}

#[derive(Serialize)]
struct BracketEntry {
    f: String,
    g: String,
    value: f64,
}

#[derive(Serialize)]
struct BracketsReport {
    dimension: usize,
    chi: Option<f64>,
    det_psi: f64,
    omega: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
    dense_deviation: f64,
    brackets: Vec<BracketEntry>,
}

pub fn brackets(setup: &Setup) -> Result<Outcome, CliError> {
    let cfg = &setup.field;
    let n = cfg.dim();
    let lambda = forms::poisson_matrix(cfg, &setup.tol)?;
    let names = coordinate_names(n);
    let mut entries = Vec::new();
    for i in 0..2 * n {
        for j in i + 1..2 * n {
            entries.push(BracketEntry {
                f: names[i].clone(),
                g: names[j].clone(),
                value: lambda.matrix()[(i, j)],
            });
        }
    }
    Ok(Outcome::ok(json(&BracketsReport {
        dimension: n,
        chi: cfg.chi(),
        det_psi: forms::regularity(cfg),
        omega: rows(forms::build_omega(cfg).matrix()),
        lambda: rows(lambda.matrix()),
        dense_deviation: lambda.dense_deviation,
        brackets: entries,
    })))
}

#[derive(Serialize)]
struct DarbouxReport {
    dimension: usize,
    method: DarbouxMethod,
    note: Option<String>,
    t: Vec<Vec<f64>>,
    t_inv: Vec<Vec<f64>>,
    residual: f64,
    inverse_defect: f64,
    condition: f64,
    generic_residual: f64,
    sp_equivalence: f64,
}

pub fn darboux(setup: &Setup) -> Result<Outcome, CliError> {
    let cfg = &setup.field;
    let map = darboux::darboux_for(cfg, &setup.tol)?;
    let generic = darboux::symplectic_gram_schmidt(&forms::build_omega(cfg), &setup.tol)?;
    let note = match (map.method, cfg.chi()) {
        (DarbouxMethod::GramSchmidt, Some(chi)) if chi < 0.0 => {
            Some(format!("chi = {chi:?} < 0 has no closed form; used symplectic Gram-Schmidt"))
        }
        (DarbouxMethod::GramSchmidt, _) => Some("no closed form for these fields; used symplectic Gram-Schmidt".into()),
        _ => None,
    };
    Ok(Outcome::ok(json(&DarbouxReport {
        dimension: cfg.dim(),
        method: map.method,
        note,
        t: rows(&map.t),
        t_inv: rows(&map.t_inv),
        residual: map.residual,
        inverse_defect: map.inverse_defect(),
        condition: map.condition,
        generic_residual: generic.residual,
        sp_equivalence: darboux::symplectic_equivalence(&map, &generic),
    })))
}

/// Shortest round-trip decimal.
fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn trajectory_csv(traj: &Trajectory, n: usize) -> String {
    let lambda3 = traj.samples.iter().any(|s| s.lambda3.is_some());
    let residual = traj.samples.iter().any(|s| s.constraint_residual.is_some());
    let mut out = String::from("t");
    for name in coordinate_names(n) {
        out.push(',');
        out.push_str(&name);
    }
    out.push_str(",H");
    if lambda3 {
        out.push_str(",Lambda3");
    }
    if residual {
        out.push_str(",constraint_residual");
    }
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&num(s.t));
        for v in &s.z {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push(',');
        out.push_str(&num(s.energy));
        if lambda3 {
            out.push(',');
            out.push_str(&s.lambda3.map(num).unwrap_or_default());
        }
        if residual {
            out.push(',');
            out.push_str(&s.constraint_residual.map(num).unwrap_or_default());
        }
        out.push('\n');
    }
    out
}

pub fn simulate(setup: &Setup) -> Result<Outcome, CliError> {
    let z0 = setup.require_state()?;
    let time = setup.require_time()?;
    let steps = (time.t_final / time.dt).round() as usize;
    let cfg = &setup.field;
    let traj = if let Some((hessian, gradient)) = &setup.quadratic {
        dynamics::integrate_quadratic(cfg, hessian, gradient, z0, time.dt, steps, time.method, &setup.tol)?
    } else {
        let model = setup.require_model()?;
        if forms::is_degenerate(cfg, &setup.tol) {
            match (cfg.planar_fields(), model.kappa() > 0.0) {
                (Some((_, c)), true) if c != 0.0 => constrained::degenerate_trajectory_n2(model, c, z0, time.dt, steps)?,
                _ => {
                    let chain = constrained::gnh_chain_for(cfg, model, &setup.tol)?;
                    constrained::chain_trajectory(&chain, model, z0, time.dt, steps)?
                }
            }
        } else {
            dynamics::integrate(cfg, model, z0, time.dt, steps, time.method, &setup.tol)?
        }
    };
    Ok(Outcome::ok(trajectory_csv(&traj, cfg.dim())))
}

#[derive(Serialize)]
struct SpectrumReport<'a> {
    kind: &'static str,
    ground_state: f64,
    #[serde(flatten)]
    table: &'a SpectrumTable,
}

pub fn spectrum(setup: &Setup, nmax: u32) -> Result<Outcome, CliError> {
    let model = setup.require_model()?;
    if model.kappa() <= 0.0 {
        return Err(CliError::Usage("spectrum needs a harmonic model (model.kappa)".into()));
    }
    let cfg = &setup.field;
    let (kind, table) = if let Some((b, c)) = cfg.planar_fields() {
        if forms::is_degenerate(cfg, &setup.tol) {
            ("degenerate-planar", spectrum::spectrum_degenerate_n2(model, c, nmax)?)
        } else {
            ("planar", spectrum::spectrum_n2(model, b, c, nmax, &setup.tol)?)
        }
    } else if let Some((b, c)) = cfg.axial_fields() {
        if b[0] != 0.0 || b[1] != 0.0 || c[0] != 0.0 || c[1] != 0.0 {
            return Err(CliError::Usage("spectrum needs both axial fields along z".into()));
        }
        ("parallel-axial", spectrum::spectrum_n3_parallel(model, b[2], c[2], nmax, &setup.tol)?)
    } else {
        return Err(CliError::Usage("spectrum supports planar or axial fields only".into()));
    };
    Ok(Outcome::ok(json(&SpectrumReport {
        kind,
        ground_state: table.ground_state(),
        table: &table,
    })))
}

pub fn limit_scan(setup: &Setup, eps_min: f64, eps_max: f64, points: usize) -> Result<Outcome, CliError> {
    let model = setup.require_model()?;
    let (b, _) = setup
        .field
        .planar_fields()
        .ok_or_else(|| CliError::Usage("limit-scan needs a planar field".into()))?;
    let grid = spectrum::log_grid(eps_max, eps_min, points)?;
    let rows = spectrum::chi_limit_scan(model, b, &grid, Execution::Parallel, &setup.tol)?;
    let mut out = String::from(
        "epsilon,C,omega_plus,omega_minus,omega_r,omega_plus_eps2,divergence_constant,fast_amplitude\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(r.epsilon),
            num(r.c),
            num(r.omega_plus),
            num(r.omega_minus),
            num(r.omega_r_target),
            num(r.omega_plus_eps2),
            num(r.divergence_constant),
            num(r.fast_amplitude)
        );
    }
    Ok(Outcome::ok(out))
}

#[derive(Serialize)]
struct ConstraintReport {
    rows: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

#[derive(Serialize)]
struct SubspaceReport {
    offset: Vec<f64>,
    basis: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct FlowReport {
    matrix: Vec<Vec<f64>>,
    drift: Vec<f64>,
    gauge: Vec<Vec<f64>>,
    solution_residual: f64,
}

#[derive(Serialize)]
struct Inconsistency {
    step: usize,
    residual: f64,
}

#[derive(Serialize)]
struct ReduceReport {
    status: constrained::ChainStatus,
    dims: Vec<usize>,
    terminal_index: usize,
    kernel: Vec<Vec<f64>>,
    constraints: Vec<ConstraintReport>,
    terminal: SubspaceReport,
    reduced_flow: Option<FlowReport>,
    eigenvalues: Vec<[f64; 2]>,
    inconsistency: Option<Inconsistency>,
}

fn reduce_report(chain: &ConstraintChain, inconsistency: Option<Inconsistency>) -> ReduceReport {
    let terminal = chain.terminal();
    ReduceReport {
        status: chain.status,
        dims: chain.dims(),
        terminal_index: chain.terminal_index(),
        kernel: columns(&chain.kernel),
        constraints: chain
            .constraints
            .iter()
            .map(|c| ConstraintReport {
                rows: rows(&c.rows),
                offset: vector(&c.offset),
            })
            .collect(),
        terminal: SubspaceReport {
            offset: vector(&terminal.offset),
            basis: columns(&terminal.basis),
        },
        reduced_flow: chain.reduced_flow.as_ref().map(|f| FlowReport {
            matrix: rows(&f.matrix),
            drift: vector(&f.drift),
            gauge: columns(&f.gauge),
            solution_residual: f.solution_residual,
        }),
        eigenvalues: chain.eigenvalues.iter().map(|&(re, im)| [re, im]).collect(),
        inconsistency,
    }
}

pub fn reduce(setup: &Setup) -> Result<Outcome, CliError> {
    let n = setup.dim();
    let (hessian, gradient) = match (&setup.quadratic, &setup.model) {
        (Some((h, g)), _) => (h.clone(), g.clone()),
        (None, Some(model)) => (model.hessian(n), model.gradient_offset(n)),
        (None, None) => {
            return Err(CliError::Usage(
                "reduce needs a model or a quadratic_hamiltonian".into(),
            ))
        }
    };
    let omega = forms::build_omega(&setup.field);
    match constrained::gnh_chain(&omega, &hessian, &gradient, &setup.tol) {
        Ok(chain) => Ok(Outcome::ok(json(&reduce_report(&chain, None)))),
        Err(CoreError::InconsistentSystem { step, residual, chain }) => Ok(Outcome {
            text: json(&reduce_report(&chain, Some(Inconsistency { step, residual }))),
            code: 4,
            message: Some(format!(
                "constraint system is inconsistent at step {step} (residual {residual:e})"
            )),
        }),
        Err(e) => Err(e.into()),
    }
}
