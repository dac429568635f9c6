//! TOML experiment configuration and model assembly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::blockavg;
use crate::bootstrap::BootstrapParams;
use crate::exact::{GridSpec, DEFAULT_STATE_BUDGET};
use crate::lattice::Lattice;
use crate::model::{
    BoundarySpec, DecayClaim, Kernel, ModelBuilder, ModelError, ModelSpec, ShellSpec,
    DEFAULT_SHELL_CUTOFF, DEFAULT_SHELL_FACTOR,
};
use crate::potential::SitePotential;
use crate::sampler::{ChainConfig, Scheme};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    /// Carries the parser's line and column diagnostic.
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("missing section [{0}]")]
    MissingSection(&'static str),
    #[error("invalid [{section}] entry: {message}")]
    Invalid {
        section: &'static str,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub dimension: usize,
    /// One extent per axis, or a single value for a cube.
    pub extent: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    #[default]
    Gaussian,
    Quartic,
    BumpedQuartic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(default)]
    pub kind: PotentialKind,
    #[serde(default)]
    pub amplitude: f64,
    /// Uniform linear field `s`.
    #[serde(default)]
    pub field: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionKind {
    PowerLaw,
    NearestNeighbor,
    Explicit,
}

fn default_true() -> bool {
    true
}

fn default_diagonal() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSection {
    pub kind: InteractionKind,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub exponent: f64,
    #[serde(default = "default_diagonal")]
    pub diagonal: f64,
    #[serde(default = "default_true")]
    pub ferromagnetic: bool,
    /// Rows of `M` for `kind = "explicit"`.
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Claimed decay `|M_ij| <= decay_c (1+r)^-decay_exponent`.
    #[serde(default)]
    pub decay_c: Option<f64>,
    #[serde(default)]
    pub decay_exponent: Option<f64>,
    #[serde(default)]
    pub shell_width: Option<usize>,
    #[serde(default)]
    pub shell_cutoff: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    #[default]
    Zero,
    Constant,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    #[serde(default)]
    pub kind: BoundaryKind,
    /// Constant value, or the maximum magnitude for random boundaries.
    #[serde(default)]
    pub value: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: usize,
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub budget: Option<usize>,
}

fn default_steps() -> usize {
    ChainConfig::default().steps
}

fn default_burn_in() -> usize {
    ChainConfig::default().burn_in
}

fn default_one() -> usize {
    1
}

fn default_sd() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_one")]
    pub thin: usize,
    #[serde(default = "default_sd")]
    pub proposal_sd: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_scheme() -> Scheme {
    Scheme::RandomScanMetropolis
}

fn default_radii() -> Vec<f64> {
    vec![1.5, 2.5, 3.5, 4.5]
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSection {
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_diagonal")]
    pub rho: f64,
    #[serde(default = "default_diagonal")]
    pub c: f64,
}

fn default_coupling() -> f64 {
    2.0
}

fn default_iterations() -> usize {
    BootstrapParams::default().max_iterations
}

fn default_alpha0() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default = "default_coupling")]
    pub coupling_factor: f64,
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    /// Seed exponent `α₀` of `C₀(1+r)^-(d+α₀)`.
    #[serde(default = "default_alpha0")]
    pub alpha0: f64,
    /// Seed amplitude; calibrated from the closed form when absent.
    #[serde(default)]
    pub c0: Option<f64>,
    /// Seed diagonal; calibrated from the closed form when absent.
    #[serde(default)]
    pub variance: Option<f64>,
    #[serde(default)]
    pub target_alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_out() -> String {
    "out".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            out: default_out(),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: Option<LatticeSection>,
    #[serde(default)]
    pub potential: PotentialSection,
    pub interaction: Option<InteractionSection>,
    #[serde(default)]
    pub boundary: BoundarySection,
    pub grid: Option<GridSection>,
    pub chain: Option<ChainSection>,
    pub block: Option<BlockSection>,
    pub bootstrap: Option<BootstrapSection>,
    #[serde(default)]
    pub run: RunSection,
    /// SHA-256 of the source text.
    #[serde(skip)]
    pub hash: String,
}

fn invalid(section: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        section,
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.hash = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn lattice(&self) -> Result<Lattice, ConfigError> {
        let sec = self
            .lattice
            .as_ref()
            .ok_or(ConfigError::MissingSection("lattice"))?;
        let extents = match sec.extent.len() {
            1 => vec![sec.extent[0]; sec.dimension],
            n if n == sec.dimension => sec.extent.clone(),
            n => {
                return Err(invalid(
                    "lattice",
                    format!("{n} extents for dimension {}", sec.dimension),
                ))
            }
        };
        Lattice::new(extents).map_err(|e| invalid("lattice", e.to_string()))
    }

    pub fn grid_spec(&self, model: &ModelSpec) -> Result<GridSpec, ConfigError> {
        let sec = self.grid.as_ref().ok_or(ConfigError::MissingSection("grid"))?;
        if sec.points < 2 {
            return Err(invalid("grid", "points must be at least 2"));
        }
        let spec = match sec.half_width {
            Some(a) if a > 0.0 && a.is_finite() => GridSpec::new(a, sec.points),
            Some(a) => return Err(invalid("grid", format!("half_width {a}"))),
            None => GridSpec::auto(model, sec.points),
        };
        Ok(spec.with_budget(sec.budget.unwrap_or(DEFAULT_STATE_BUDGET)))
    }

    pub fn chain_config(&self) -> Result<ChainConfig, ConfigError> {
        let sec = self
            .chain
            .as_ref()
            .ok_or(ConfigError::MissingSection("chain"))?;
        let cfg = ChainConfig {
            steps: sec.steps,
            burn_in: sec.burn_in,
            thin: sec.thin,
            proposal_sd: sec.proposal_sd,
            seed: self.run.seed,
            scheme: sec.scheme,
        };
        cfg.validate().map_err(|e| invalid("chain", e.to_string()))?;
        Ok(cfg)
    }

    pub fn block_section(&self) -> Result<&BlockSection, ConfigError> {
        let sec = self
            .block
            .as_ref()
            .ok_or(ConfigError::MissingSection("block"))?;
        for &r in &sec.radii {
            blockavg::check_radius(r).map_err(|e| invalid("block", e.to_string()))?;
        }
        if sec.radii.is_empty() {
            return Err(invalid("block", "radii is empty"));
        }
        Ok(sec)
    }

    pub fn bootstrap_params(&self) -> Result<(BootstrapParams, &BootstrapSection), ConfigError> {
        let sec = self
            .bootstrap
            .as_ref()
            .ok_or(ConfigError::MissingSection("bootstrap"))?;
        if !(sec.coupling_factor > 0.0) {
            return Err(invalid("bootstrap", "coupling_factor must be positive"));
        }
        let params = BootstrapParams {
            l: sec.l,
            coupling_factor: sec.coupling_factor,
            max_iterations: sec.max_iterations,
            target: sec.target_alpha.map(|a| (1.0, a)),
        };
        Ok((params, sec))
    }

    pub fn potential(&self) -> SitePotential {
        match self.potential.kind {
            PotentialKind::Gaussian => SitePotential::Gaussian,
            PotentialKind::Quartic => SitePotential::Quartic,
            PotentialKind::BumpedQuartic => SitePotential::BumpedQuartic {
                amplitude: self.potential.amplitude,
            },
        }
    }
}

/// Errors of [`build_model`]: configuration problems or model validation.
#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<ModelSpec, BuildError> {
    let lattice = cfg.lattice()?;
    let lattice_extent = lattice.extents().to_vec();
    let sec = cfg
        .interaction
        .as_ref()
        .ok_or(ConfigError::MissingSection("interaction"))?;
    let kernel = match sec.kind {
        InteractionKind::PowerLaw => Kernel::PowerLaw {
            amplitude: sec.amplitude,
            exponent: sec.exponent,
            diagonal: sec.diagonal,
            ferromagnetic: sec.ferromagnetic,
        },
        InteractionKind::NearestNeighbor => Kernel::NearestNeighbor {
            amplitude: sec.amplitude,
            diagonal: sec.diagonal,
            ferromagnetic: sec.ferromagnetic,
        },
        InteractionKind::Explicit => Kernel::Explicit(
            sec.matrix
                .clone()
                .ok_or_else(|| invalid("interaction", "explicit kernel needs `matrix`"))?,
        ),
    };
    let boundary = match cfg.boundary.kind {
        BoundaryKind::Zero => BoundarySpec::Zero,
        BoundaryKind::Constant => BoundarySpec::Constant(cfg.boundary.value),
        BoundaryKind::Random => BoundarySpec::Random {
            max_abs: cfg.boundary.value,
            seed: cfg.boundary.seed,
        },
    };
    let mut builder = ModelBuilder::new(lattice, kernel)
        .potential(cfg.potential())
        .uniform_field(cfg.potential.field)
        .boundary(boundary);
    match (sec.decay_c, sec.decay_exponent) {
        (Some(c), Some(exponent)) => builder = builder.decay(DecayClaim { c, exponent }),
        (None, None) => {}
        _ => {
            return Err(invalid("interaction", "decay_c and decay_exponent go together").into())
        }
    }
    if sec.shell_width.is_some() || sec.shell_cutoff.is_some() {
        let max_extent = lattice_extent.iter().copied().max().unwrap_or(1);
        builder = builder.shell(ShellSpec {
            width: sec.shell_width.unwrap_or(DEFAULT_SHELL_FACTOR * max_extent),
            cutoff: sec.shell_cutoff.unwrap_or(DEFAULT_SHELL_CUTOFF),
        });
    }
    Ok(builder.build()?)
}
