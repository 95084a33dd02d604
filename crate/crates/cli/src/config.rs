//! JSON run configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use pileup::continuum::GridSpec;
use pileup::potentials::PotentialSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SolveDiscrete,
    SolveContinuum,
    Verify,
    Robin,
    Sweep,
    CheckAssumptions,
    AppendixCheck,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::SolveDiscrete => "solve-discrete",
            Mode::SolveContinuum => "solve-continuum",
            Mode::Verify => "verify",
            Mode::Robin => "robin",
            Mode::Sweep => "sweep",
            Mode::CheckAssumptions => "check-assumptions",
            Mode::AppendixCheck => "appendix-check",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Sign test slack relative to `max(1, |F|)`.
    #[serde(default = "d_num_tol")]
    pub num_tol_scale: f64,
    /// Gradient and Euler–Lagrange residual level required before verifying.
    #[serde(default = "d_residual")]
    pub residual_scale: f64,
    /// Allowed `max/min` of a ratio across a sweep.
    #[serde(default = "d_spread")]
    pub ratio_spread: f64,
    /// Newton stopping tolerance; `1e-10 max(1, |E|)` when absent.
    #[serde(default)]
    pub tol_g: Option<f64>,
    #[serde(default = "d_newton")]
    pub max_newton_iter: usize,
    #[serde(default = "d_gradient")]
    pub max_gradient_iter: usize,
    #[serde(default = "d_active")]
    pub max_active_set_iter: usize,
    /// Relative agreement required in appendix-check.
    #[serde(default = "d_num_tol")]
    pub appendix_rel: f64,
}

fn d_num_tol() -> f64 {
    1e-4
}
fn d_residual() -> f64 {
    1e-5
}
fn d_spread() -> f64 {
    10.0
}
fn d_newton() -> usize {
    200
}
fn d_gradient() -> usize {
    2_000
}
fn d_active() -> usize {
    200
}

impl Default for Tolerances {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixConfig {
    #[serde(default = "d_app_alpha")]
    pub alpha: Vec<f64>,
    /// Interior points per test function.
    #[serde(default = "d_app_points")]
    pub points: usize,
}

fn d_app_alpha() -> Vec<f64> {
    vec![1.0, 4.0, 16.0]
}
fn d_app_points() -> usize {
    5
}

impl Default for AppendixConfig {
    fn default() -> Self {
        Self { alpha: d_app_alpha(), points: d_app_points() }
    }
}

/// A run: one mode over the cartesian product of `n` and one parameter list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Checked against the subcommand when present.
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    /// `alpha = ceil(n^theta)` for each listed `theta`.
    #[serde(default)]
    pub alpha_exponent: Option<Vec<f64>>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Skip `alpha > n / log n`; defaults to on for sweeps only.
    #[serde(default)]
    pub restrict_alpha: Option<bool>,
    #[serde(default)]
    pub appendix: AppendixConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Param {
    Alpha(f64),
    Beta(f64),
    AlphaExponent(f64),
}

impl Param {
    pub fn label(&self) -> &'static str {
        match self {
            Param::Alpha(_) => "alpha",
            Param::Beta(_) => "beta",
            Param::AlphaExponent(_) => "alpha_exponent",
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Param::Alpha(v) | Param::Beta(v) | Param::AlphaExponent(v) => v,
        }
    }
}

/// Invalid configuration, with the JSON path of the offending field.
#[derive(Debug, thiserror::Error)]
#[error("invalid configuration at `{path}`: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

fn bad(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.to_string(), message: message.into() }
}

impl RunConfig {
    /// Parses a config, or the `config` field of a run manifest.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| bad("<root>", format!("not valid JSON: {e}")))?;
        let (value, prefix) = match value.get("config") {
            Some(inner) if value.get("manifest_version").is_some() => (inner.clone(), "config."),
            _ => (value, ""),
        };
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            bad(&format!("{prefix}{path}"), e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn params(&self) -> Vec<Param> {
        if let Some(v) = &self.alpha {
            v.iter().map(|&a| Param::Alpha(a)).collect()
        } else if let Some(v) = &self.beta {
            v.iter().map(|&b| Param::Beta(b)).collect()
        } else if let Some(v) = &self.alpha_exponent {
            v.iter().map(|&t| Param::AlphaExponent(t)).collect()
        } else {
            Vec::new()
        }
    }

    pub fn restrict(&self, mode: Mode) -> bool {
        self.restrict_alpha.unwrap_or(mode == Mode::Sweep)
    }

    /// Checks everything that does not need a solver.
    pub fn validate(&self, mode: Mode) -> Result<(), ConfigError> {
        if let Some(m) = self.mode {
            if m != mode {
                return Err(bad("mode", format!("config is for `{m}` but `{mode}` was requested")));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("num_tol_scale", t.num_tol_scale),
            ("residual_scale", t.residual_scale),
            ("ratio_spread", t.ratio_spread),
            ("appendix_rel", t.appendix_rel),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(&format!("tolerances.{name}"), format!("must be positive, got {v}")));
            }
        }
        if let Some(g) = t.tol_g {
            if !(g > 0.0 && g.is_finite()) {
                return Err(bad("tolerances.tol_g", format!("must be positive, got {g}")));
            }
        }
        for (name, v) in [
            ("max_newton_iter", t.max_newton_iter),
            ("max_gradient_iter", t.max_gradient_iter),
            ("max_active_set_iter", t.max_active_set_iter),
        ] {
            if v == 0 {
                return Err(bad(&format!("tolerances.{name}"), "must be positive"));
            }
        }
        if self.workers == Some(0) {
            return Err(bad("workers", "must be at least 1"));
        }
        if mode == Mode::AppendixCheck {
            if self.appendix.alpha.is_empty() || self.appendix.alpha.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                return Err(bad("appendix.alpha", "needs positive values"));
            }
            if self.appendix.points == 0 {
                return Err(bad("appendix.points", "must be positive"));
            }
            return Ok(());
        }
        if self.potential.is_none() {
            return Err(bad("potential", "required for this mode"));
        }
        if self.n.is_empty() {
            return Err(bad("n", "at least one particle count is required"));
        }
        if let Some((i, n)) = self.n.iter().enumerate().find(|(_, n)| **n < 2) {
            return Err(bad(&format!("n[{i}]"), format!("needs n >= 2, got {n}")));
        }
        let given: Vec<&str> = [
            ("alpha", self.alpha.is_some()),
            ("beta", self.beta.is_some()),
            ("alpha_exponent", self.alpha_exponent.is_some()),
        ]
        .iter()
        .filter(|(_, p)| *p)
        .map(|(k, _)| *k)
        .collect();
        if mode == Mode::Robin && given.is_empty() {
            return Ok(());
        }
        if given.len() != 1 {
            return Err(bad("alpha|beta|alpha_exponent", format!("exactly one must be given, found {given:?}")));
        }
        let list = self.alpha.as_ref().or(self.beta.as_ref()).or(self.alpha_exponent.as_ref()).unwrap();
        if list.is_empty() {
            return Err(bad(given[0], "list is empty"));
        }
        if let Some((i, v)) = list.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(bad(&format!("{}[{i}]", given[0]), format!("must be positive, got {v}")));
        }
        let g = &self.grid;
        if g.m < 16 || !(g.x_hi > g.x_lo) || !g.x_lo.is_finite() || !g.x_hi.is_finite() {
            return Err(bad("grid", format!("need x_lo < x_hi and m >= 16, got {g:?}")));
        }
        if !(g.x_lo < 0.0 && g.x_hi > 0.0) {
            return Err(bad("grid", "domain must contain the origin"));
        }
        Ok(())
    }
}
