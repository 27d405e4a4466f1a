//! The JSON run configuration shared by every experiment. Unknown keys are
//! rejected and parse errors name the offending key path and line.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::action::Measure;
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, LatticeGeometry};
use crate::poisson::{AngularSettings, Grid, PoissonSpec};
use crate::sampler::{ChainConfig, Observable};
use crate::scaling::{ModelSpec, ReportConfig, SweepObservable, SweepPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(&self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(&self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            format: OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub dim: usize,
    pub half_extent: usize,
    #[serde(default = "unit")]
    pub spacing: f64,
}

fn unit() -> f64 {
    1.0
}

fn one() -> usize {
    1
}

impl GeometrySpec {
    pub fn build(&self) -> Result<LatticeGeometry> {
        build_lattice(self.dim, self.half_extent, self.spacing)
    }
}

/// A single-geometry chain run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub model: ModelSpec,
    pub measure: Measure,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default = "one")]
    pub chains: usize,
    pub observables: Vec<Observable>,
    /// Uniform source `h` for the ratio `S(h)/S(0)`; omitted means no ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<f64>,
    /// Write the per-sample trace of the first chain.
    #[serde(default)]
    pub trace: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub plan: SweepPlan,
    pub observables: Vec<SweepObservable>,
}

/// Trial ground state `Ψ = exp(-Σ_k Σ_j c_j φ_k^{2(j+1)})` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundStateSpec {
    pub grid: Grid,
    pub log_coeffs: Vec<f64>,
    #[serde(default = "unit")]
    pub gradient_coeff: f64,
    #[serde(default = "unit")]
    pub spacing: f64,
    pub s: u32,
    #[serde(default)]
    pub refinements: usize,
}

impl GroundStateSpec {
    pub fn psi(&self, phi: &[f64]) -> f64 {
        let log: f64 = self
            .log_coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * phi.iter().map(|p| p.powi(2 * (j as i32 + 1))).sum::<f64>())
            .sum();
        (-log).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonRunSpec {
    pub params: PoissonSpec,
    #[serde(default)]
    pub angular: AngularSettings,
    /// Base test sequence `g₀`; `g = t g₀` for each `t` in `scales`.
    pub g: Vec<f64>,
    pub scales: Vec<f64>,
    #[serde(default = "default_mass_cutoffs")]
    pub mass_cutoffs: Vec<f64>,
    #[serde(default = "default_moment_cutoffs")]
    pub moment_cutoffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_state: Option<GroundStateSpec>,
}

pub fn default_mass_cutoffs() -> Vec<f64> {
    (0..=8).map(|k| 10f64.powf(-8.0 + 0.5 * k as f64)).collect()
}

pub fn default_moment_cutoffs() -> Vec<f64> {
    (1..=6).map(|k| 10f64.powi(-2 * k)).collect()
}

/// Top-level configuration; each subcommand reads its own block.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ReportConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson: Option<PoissonRunSpec>,
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let msg = inner.to_string();
        // serde_json appends its own position; report it once
        let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(m, _)| m);
        Error::Config(format!(
            "at `{path}` (line {}, column {}): {msg}",
            inner.line(),
            inner.column()
        ))
    })?;
    de.end()
        .map_err(|e| Error::Config(format!("trailing content: {e}")))?;
    Ok(cfg)
}

pub fn read_run_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_run_config(&text)
}

pub fn to_json(cfg: &RunConfig) -> Result<String> {
    serde_json::to_string_pretty(cfg).map_err(|e| Error::Config(e.to_string()))
}
