use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use ncphase_core::dynamics::{Method, OscillatorModel};
use ncphase_core::{FieldConfig, Tolerances};
use serde::Deserialize;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOL_ENV: &str = "NCPHASE_TOL_SINGULAR";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Optional; checked against the field when present.
    #[serde(default)]
    pub dimension: Option<usize>,
    pub field: FieldSpec,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub initial_state: Option<StateSpec>,
    #[serde(default)]
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(default)]
    pub quadratic_hamiltonian: Option<QuadraticSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum FieldSpec {
    Planar { b: f64, c: f64 },
    Axial { b: [f64; 3], c: [f64; 3] },
    Matrices { ef: Vec<Vec<f64>>, rg: Vec<Vec<f64>> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub mass: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub force: Option<Vec<f64>>,
    #[serde(default)]
    pub hbar: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_final: f64,
    pub dt: f64,
    #[serde(default = "default_method")]
    pub method: Method,
}

fn default_method() -> Method {
    Method::Exact
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default)]
    pub singular: Option<f64>,
    #[serde(default)]
    pub rank: Option<f64>,
}

/// `H = z^T hessian z / 2 + gradient . z`, replacing the oscillator model in `simulate` and `reduce`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub hessian: Vec<Vec<f64>>,
    pub gradient: Vec<f64>,
}

/// Fully validated run inputs.
#[derive(Debug)]
pub struct Setup {
    pub field: FieldConfig,
    pub model: Option<OscillatorModel>,
    pub initial_state: Option<DVector<f64>>,
    pub time: Option<TimeSpec>,
    pub output: Option<PathBuf>,
    pub tol: Tolerances,
    pub quadratic: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl Setup {
    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    pub fn require_model(&self) -> Result<&OscillatorModel, ConfigError> {
        self.model.as_ref().ok_or_else(|| invalid("model", "required by this subcommand"))
    }

    pub fn require_state(&self) -> Result<&DVector<f64>, ConfigError> {
        self.initial_state
            .as_ref()
            .ok_or_else(|| invalid("initial_state", "required by this subcommand"))
    }

    pub fn require_time(&self) -> Result<&TimeSpec, ConfigError> {
        self.time.as_ref().ok_or_else(|| invalid("time", "required by this subcommand"))
    }
}

fn square(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, ConfigError> {
    let n = rows.len();
    if n == 0 {
        return Err(invalid(field, "matrix must not be empty"));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(invalid(field, format!("row {bad} has {} entries, expected {n}", rows[bad].len())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn finite(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// Schema checks beyond what deserialization enforces; `env_singular`
    /// overrides the singularity tolerance.
    pub fn validate(self, env_singular: Option<&str>) -> Result<Setup, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let field = match self.field {
            FieldSpec::Planar { b, c } => FieldConfig::planar(finite("field.planar.b", b)?, finite("field.planar.c", c)?),
            FieldSpec::Axial { b, c } => {
                for (name, v) in [("field.axial.b", b), ("field.axial.c", c)] {
                    for x in v {
                        finite(name, x)?;
                    }
                }
                FieldConfig::axial(b, c)
            }
            FieldSpec::Matrices { ef, rg } => {
                let ef = square("field.matrices.ef", &ef)?;
                let rg = square("field.matrices.rg", &rg)?;
                FieldConfig::new(ef, rg).map_err(|e| invalid("field.matrices", e.to_string()))?
            }
        };
        let n = field.dim();
        if let Some(d) = self.dimension {
            if d != n {
                return Err(invalid("dimension", format!("is {d} but the field has dimension {n}")));
            }
        }

        let model = self.model.map(|m| build_model(m, n)).transpose()?;

        let initial_state = match self.initial_state {
            Some(s) => {
                if s.q.len() != n || s.p.len() != n {
                    return Err(invalid(
                        "initial_state",
                        format!("q and p need {n} entries, got {} and {}", s.q.len(), s.p.len()),
                    ));
                }
                if s.q.iter().chain(&s.p).any(|v| !v.is_finite()) {
                    return Err(invalid("initial_state", "entries must be finite"));
                }
                Some(DVector::from_iterator(2 * n, s.q.into_iter().chain(s.p)))
            }
            None => None,
        };

        if let Some(t) = &self.time {
            positive("time.dt", t.dt)?;
            if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
                return Err(invalid("time.t_final", "must be finite and nonnegative"));
            }
        }

        let mut tol = Tolerances::default();
        if let Some(t) = self.tolerances {
            if let Some(s) = t.singular {
                tol.singular = positive("tolerances.singular", s)?;
            }
            if let Some(r) = t.rank {
                tol.rank = positive("tolerances.rank", r)?;
            }
        }
        if let Some(raw) = env_singular {
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| invalid(TOL_ENV, format!("not a number: {raw:?}")))?;
            tol.singular = positive(TOL_ENV, v)?;
        }

        let quadratic = match self.quadratic_hamiltonian {
            Some(q) => {
                let h = square("quadratic_hamiltonian.hessian", &q.hessian)?;
                if h.nrows() != 2 * n {
                    return Err(invalid("quadratic_hamiltonian.hessian", format!("must be {0}x{0}", 2 * n)));
                }
                if ncphase_core::linalg::max_abs(&(&h - h.transpose())) > 0.0 {
                    return Err(invalid("quadratic_hamiltonian.hessian", "must be symmetric"));
                }
                if q.gradient.len() != 2 * n {
                    return Err(invalid("quadratic_hamiltonian.gradient", format!("needs {} entries", 2 * n)));
                }
                Some((h, DVector::from_vec(q.gradient)))
            }
            None => None,
        };

        Ok(Setup {
            field,
            model,
            initial_state,
            time: self.time,
            output: self.output,
            tol,
            quadratic,
        })
    }
}

fn build_model(m: ModelSpec, n: usize) -> Result<OscillatorModel, ConfigError> {
    let mass = positive("model.mass", m.mass)?;
    let model = match (m.kappa, m.force) {
        (Some(kappa), None) => OscillatorModel::harmonic(mass, positive("model.kappa", kappa)?),
        (None, Some(force)) => {
            if force.len() != n {
                return Err(invalid("model.force", format!("needs {n} entries, got {}", force.len())));
            }
            OscillatorModel::linear(mass, force)
        }
        (None, None) => OscillatorModel::free(mass, n),
        (Some(_), Some(_)) => return Err(invalid("model", "give either kappa or force, not both")),
    }
    .map_err(|e| invalid("model", e.to_string()))?;
    match m.hbar {
        Some(h) => model.with_hbar(positive("model.hbar", h)?).map_err(|e| invalid("model.hbar", e.to_string())),
        None => Ok(model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Setup, ConfigError> {
        RunConfig::parse(text, Path::new("test.json"))?.validate(None)
    }

    #[test]
    fn minimal_planar() {
        let s = parse(r#"{"schema_version": 1, "field": {"planar": {"b": 1.0, "c": 0.5}}}"#).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.field.planar_fields(), Some((1.0, 0.5)));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse(r#"{"schema_version": 1, "field": {"planar": {"b": 1.0, "c": 0.5}}, "extra": 1}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn wrong_version() {
        let err = parse(r#"{"schema_version": 2, "field": {"planar": {"b": 1.0, "c": 0.5}}}"#).unwrap_err();
        assert!(err.to_string().starts_with("schema_version"));
    }

    #[test]
    fn model_needs_one_potential() {
        let err = parse(
            r#"{"schema_version": 1, "field": {"planar": {"b": 0, "c": 0}},
                "model": {"mass": 1, "kappa": 1, "force": [0, 0]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("model"));
    }

    #[test]
    fn state_length_checked() {
        let err = parse(
            r#"{"schema_version": 1, "field": {"axial": {"b": [0,0,1], "c": [0,0,0]}},
                "initial_state": {"q": [1, 0], "p": [0, 0]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().starts_with("initial_state"));
    }

    #[test]
    fn env_overrides_tolerance() {
        let cfg = RunConfig::parse(
            r#"{"schema_version": 1, "field": {"planar": {"b": 0, "c": 0}}, "tolerances": {"singular": 1e-6}}"#,
            Path::new("t.json"),
        )
        .unwrap();
        let s = cfg.validate(Some("1e-3")).unwrap();
        assert_eq!(s.tol.singular, 1e-3);
    }

    #[test]
    fn bad_env_value() {
        let cfg = RunConfig::parse(r#"{"schema_version": 1, "field": {"planar": {"b": 0, "c": 0}}}"#, Path::new("t.json")).unwrap();
        assert!(cfg.validate(Some("abc")).is_err());
    }

    #[test]
    fn non_antisymmetric_matrices() {
        let err = parse(r#"{"schema_version": 1, "field": {"matrices": {"ef": [[0, 1], [1, 0]], "rg": [[0, 0], [0, 0]]}}}"#)
            .unwrap_err();
        assert!(err.to_string().starts_with("field.matrices"));
    }
}
