//! Flat `section.key = value` configuration.
//!
//! ```text
//! # comments start with '#'
//! grid.h = 0.001953125
//! grid.R = 0.5
//! domain.shape = half_disk
//! coeff.Q = example
//! solver.max_iters = 2000
//! ```
//!
//! Unknown keys are rejected. [`SolverConfig::to_kv`] writes every key in a
//! fixed order; its SHA-256 digest names output directories.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::grid::{DomainGeometry, GridSpec, Polynomial, Shape};

/// Source of the free boundary datum `Q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum QSource {
    Constant(f64),
    Example,
    File(String),
}

impl QSource {
    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "example" {
            return Ok(QSource::Example);
        }
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(QSource::File(path.trim().to_string()));
        }
        let v = s.strip_prefix("constant:").unwrap_or(s);
        v.trim()
            .parse::<f64>()
            .map(QSource::Constant)
            .map_err(|_| LabError::Config(format!("coeff.Q must be a number, `example` or `file:<path>`, got `{s}`")))
    }

    fn render(&self) -> String {
        match self {
            QSource::Constant(v) => format!("constant:{v}"),
            QSource::Example => "example".into(),
            QSource::File(p) => format!("file:{p}"),
        }
    }
}

/// Boundary data families understood by the CLI and the suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// The one-phase example `(r sinθ - r^{3/2}cos(3θ/2))_+`.
    Example,
    /// `x2`.
    Plane,
    /// `(x2 - data.shift)_+`.
    ShiftedPlane,
    /// `r^{3/2} cos(3θ/2)`.
    Signorini,
    /// `-x2` (full contact, multiplier 1).
    NegPlane,
    /// `data.shift + x2` (inactive constraint for positive shift).
    Lifted,
}

impl DataKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "example" => DataKind::Example,
            "plane" => DataKind::Plane,
            "shifted_plane" => DataKind::ShiftedPlane,
            "signorini" => DataKind::Signorini,
            "neg_plane" => DataKind::NegPlane,
            "lifted" => DataKind::Lifted,
            other => {
                return Err(LabError::Config(format!(
                    "unknown data.kind `{other}` (expected example, plane, shifted_plane, signorini, neg_plane, lifted)"
                )))
            }
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataKind::Example => "example",
            DataKind::Plane => "plane",
            DataKind::ShiftedPlane => "shifted_plane",
            DataKind::Signorini => "signorini",
            DataKind::NegPlane => "neg_plane",
            DataKind::Lifted => "lifted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub h: f64,
    pub radius: f64,
    pub shape: Shape,
    /// Coefficients of the fixed boundary graph `g`, lowest degree first.
    pub g: Vec<f64>,
    pub data_kind: DataKind,
    pub data_shift: f64,
    pub q: QSource,

    pub pde_tol: f64,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub vi_tol: f64,
    pub vi_max_iters: usize,
    /// Relaxation factor of the projected SOR sweeps.
    pub omega: f64,
    /// Tolerance of the free boundary condition checks.
    pub fb_tol: f64,

    pub sigma: f64,
    /// Smallest of {0, 1, 2, 4, 8} that clears the monotonicity audit on the
    /// analytic corpus.
    pub c_mono: f64,
    pub mono_tol: f64,
    /// Ratio of consecutive radii.
    pub rho: f64,
    pub r_max: f64,
    /// Corpus constant in `|H̃ - H| <= C r^{3+σ/2}`.
    pub c_tilde: f64,

    pub beta_min: f64,
    pub theta: f64,
    pub mu: f64,
    pub epsilon0: f64,
    pub delta: f64,
    pub eta: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            h: 1.0 / 128.0,
            radius: 0.5,
            shape: Shape::HalfDisk,
            g: Vec::new(),
            data_kind: DataKind::Example,
            data_shift: 0.25,
            q: QSource::Example,
            pde_tol: 1e-6,
            grad_tol: 1e-5,
            max_iters: 2000,
            vi_tol: 1e-9,
            vi_max_iters: 200_000,
            omega: 1.9,
            fb_tol: 0.1,
            sigma: 0.1,
            c_mono: 0.0,
            mono_tol: 0.02,
            rho: 2f64.powf(-0.25),
            r_max: 0.25,
            c_tilde: 1.0,
            beta_min: 0.3,
            theta: 0.01,
            mu: 0.5,
            epsilon0: 0.75,
            delta: 0.1,
            eta: 0.2,
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "grid.h",
    "grid.R",
    "domain.shape",
    "domain.g",
    "data.kind",
    "data.shift",
    "coeff.Q",
    "solver.pde_tol",
    "solver.grad_tol",
    "solver.max_iters",
    "solver.vi_tol",
    "solver.vi_max_iters",
    "solver.omega",
    "solver.fb_tol",
    "frequency.sigma",
    "frequency.C_mono",
    "frequency.mono_tol",
    "frequency.rho",
    "frequency.r_max",
    "frequency.C_tilde",
    "regularity.beta_min",
    "regularity.theta",
    "regularity.mu",
    "regularity.epsilon0",
    "regularity.delta",
    "regularity.eta",
    "run.seed",
];

impl SolverConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv(&text)
    }

    /// Parses `key = value` lines on top of the defaults.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = SolverConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| LabError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let f = |v: &str| -> Result<f64> { parse_real(key, v) };
        let n = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| LabError::Config(format!("{key}: expected a non-negative integer, got `{v}`")))
        };
        match key {
            "grid.h" => self.h = f(value)?,
            "grid.R" => self.radius = f(value)?,
            "domain.shape" => self.shape = Shape::parse(value).map_err(|e| LabError::Config(e.to_string()))?,
            "domain.g" => {
                self.g = if value.is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|c| f(c.trim())).collect::<Result<_>>()?
                }
            }
            "data.kind" => self.data_kind = DataKind::parse(value)?,
            "data.shift" => self.data_shift = f(value)?,
            "coeff.Q" => self.q = QSource::parse(value)?,
            "solver.pde_tol" => self.pde_tol = f(value)?,
            "solver.grad_tol" => self.grad_tol = f(value)?,
            "solver.max_iters" => self.max_iters = n(value)?,
            "solver.vi_tol" => self.vi_tol = f(value)?,
            "solver.vi_max_iters" => self.vi_max_iters = n(value)?,
            "solver.omega" => self.omega = f(value)?,
            "solver.fb_tol" => self.fb_tol = f(value)?,
            "frequency.sigma" => self.sigma = f(value)?,
            "frequency.C_mono" => self.c_mono = f(value)?,
            "frequency.mono_tol" => self.mono_tol = f(value)?,
            "frequency.rho" => self.rho = f(value)?,
            "frequency.r_max" => self.r_max = f(value)?,
            "frequency.C_tilde" => self.c_tilde = f(value)?,
            "regularity.beta_min" => self.beta_min = f(value)?,
            "regularity.theta" => self.theta = f(value)?,
            "regularity.mu" => self.mu = f(value)?,
            "regularity.epsilon0" => self.epsilon0 = f(value)?,
            "regularity.delta" => self.delta = f(value)?,
            "regularity.eta" => self.eta = f(value)?,
            "run.seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| LabError::Config(format!("run.seed: expected an integer, got `{value}`")))?
            }
            other => {
                return Err(LabError::Config(format!(
                    "unknown key `{other}`; valid keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("grid.h", self.h),
            ("grid.R", self.radius),
            ("solver.pde_tol", self.pde_tol),
            ("solver.grad_tol", self.grad_tol),
            ("solver.vi_tol", self.vi_tol),
            ("solver.fb_tol", self.fb_tol),
            ("frequency.mono_tol", self.mono_tol),
            ("frequency.r_max", self.r_max),
            ("regularity.epsilon0", self.epsilon0),
            ("regularity.delta", self.delta),
            ("regularity.eta", self.eta),
        ];
        for (k, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(LabError::Config(format!("{k} must be positive, got {v}")));
            }
        }
        if !(self.sigma > 0.0 && self.sigma < 0.5) {
            return Err(LabError::Config(format!("frequency.sigma must lie in (0, 1/2), got {}", self.sigma)));
        }
        for (k, v) in [("regularity.theta", self.theta), ("regularity.mu", self.mu), ("frequency.rho", self.rho)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(LabError::Config(format!("{k} must lie in (0, 1), got {v}")));
            }
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(LabError::Config(format!("solver.omega must lie in (0, 2), got {}", self.omega)));
        }
        if self.c_mono < 0.0 || self.c_tilde < 0.0 {
            return Err(LabError::Config("frequency constants must be non-negative".into()));
        }
        if self.max_iters == 0 || self.vi_max_iters == 0 {
            return Err(LabError::Config("iteration limits must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form with every key, in a fixed order.
    pub fn to_kv(&self) -> String {
        let g = self.g.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let rows: Vec<(&str, String)> = vec![
            ("grid.h", self.h.to_string()),
            ("grid.R", self.radius.to_string()),
            ("domain.shape", self.shape.as_str().into()),
            ("domain.g", g),
            ("data.kind", self.data_kind.as_str().into()),
            ("data.shift", self.data_shift.to_string()),
            ("coeff.Q", self.q.render()),
            ("solver.pde_tol", self.pde_tol.to_string()),
            ("solver.grad_tol", self.grad_tol.to_string()),
            ("solver.max_iters", self.max_iters.to_string()),
            ("solver.vi_tol", self.vi_tol.to_string()),
            ("solver.vi_max_iters", self.vi_max_iters.to_string()),
            ("solver.omega", self.omega.to_string()),
            ("solver.fb_tol", self.fb_tol.to_string()),
            ("frequency.sigma", self.sigma.to_string()),
            ("frequency.C_mono", self.c_mono.to_string()),
            ("frequency.mono_tol", self.mono_tol.to_string()),
            ("frequency.rho", self.rho.to_string()),
            ("frequency.r_max", self.r_max.to_string()),
            ("frequency.C_tilde", self.c_tilde.to_string()),
            ("regularity.beta_min", self.beta_min.to_string()),
            ("regularity.theta", self.theta.to_string()),
            ("regularity.mu", self.mu.to_string()),
            ("regularity.epsilon0", self.epsilon0.to_string()),
            ("regularity.delta", self.delta.to_string()),
            ("regularity.eta", self.eta.to_string()),
            ("run.seed", self.seed.to_string()),
        ];
        debug_assert_eq!(rows.len(), KEYS.len());
        rows.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of [`Self::to_kv`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_kv().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.radius, self.h, self.shape)
    }

    pub fn geometry(&self) -> Result<DomainGeometry> {
        DomainGeometry::new(self.grid_spec()?, Polynomial::new(self.g.clone()))
    }

    /// Copy with a different grid resolution.
    pub fn with_h(&self, h: f64) -> Self {
        SolverConfig { h, ..self.clone() }
    }

    /// Key/value pairs in canonical order.
    pub fn entries(&self) -> BTreeMap<String, String> {
        self.to_kv()
            .lines()
            .filter_map(|l| l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())))
            .collect()
    }
}

/// Accepts decimal numbers and simple fractions such as `1/512`.
fn parse_real(key: &str, v: &str) -> Result<f64> {
    let bad = || LabError::Config(format!("{key}: expected a number, got `{v}`"));
    if let Some((a, b)) = v.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        return Ok(a / b);
    }
    v.parse().map_err(|_| bad())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_text() {
        let mut cfg = SolverConfig::default();
        cfg.h = 1.0 / 512.0;
        cfg.g = vec![0.0, 0.0, 0.1];
        cfg.q = QSource::Constant(2.0);
        let back = SolverConfig::from_kv(&cfg.to_kv()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn fractions_and_comments() {
        let cfg = SolverConfig::from_kv("grid.h = 1/256 # fine grid\n\n# note\ngrid.R=1\n").unwrap();
        assert_eq!(cfg.h, 1.0 / 256.0);
        assert_eq!(cfg.radius, 1.0);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = SolverConfig::from_kv("solver.tolerance = 1").unwrap_err();
        assert!(err.to_string().contains("unknown key"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(SolverConfig::from_kv("frequency.sigma = 0.7").is_err());
        assert!(SolverConfig::from_kv("regularity.theta = 1.5").is_err());
        assert!(SolverConfig::from_kv("solver.grad_tol = 0").is_err());
    }

    #[test]
    fn hash_depends_on_every_key() {
        let a = SolverConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
