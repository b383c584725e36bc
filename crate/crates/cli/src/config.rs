use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use steinmd_core::cw::{analyze_rho, CWAnalysis, RhoMeasure};
use steinmd_core::md::{solve_m0, MDStationary};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Cw,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Exact,
    Glauber,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoPreset {
    #[default]
    Rademacher,
    ThreePoint,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CwParams {
    #[serde(default)]
    pub rho: RhoPreset,
    /// Support and weights for `rho = "custom"`; rescaled to unit variance.
    #[serde(default)]
    pub points: Vec<f64>,
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default = "default_max_order")]
    pub max_order: usize,
}

impl Default for CwParams {
    fn default() -> Self {
        Self {
            rho: RhoPreset::default(),
            points: Vec::new(),
            weights: Vec::new(),
            max_order: default_max_order(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct MdParams {
    #[serde(default)]
    pub J: f64,
    #[serde(default)]
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerParams {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            seed: 0,
            burn_in: default_burn_in(),
            samples: default_samples(),
            thin: default_thin(),
        }
    }
}

/// Acceptance band of the `scaling` command around the predicted exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingParams {
    #[serde(default = "default_slope_tolerance")]
    pub slope_tolerance: f64,
    #[serde(default = "default_min_r_squared")]
    pub min_r_squared: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        Self {
            slope_tolerance: default_slope_tolerance(),
            min_r_squared: default_min_r_squared(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Model,
    pub n_list: Vec<u64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_grid")]
    pub z_grid_size: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub cw: CwParams,
    #[serde(default)]
    pub md: MdParams,
    #[serde(default)]
    pub sampler: SamplerParams,
    #[serde(default)]
    pub scaling: ScalingParams,
}

fn default_max_order() -> usize {
    12
}
fn default_burn_in() -> usize {
    1000
}
fn default_samples() -> usize {
    10_000
}
fn default_thin() -> usize {
    1
}
fn default_slope_tolerance() -> f64 {
    0.2
}
fn default_min_r_squared() -> f64 {
    0.9
}
fn default_grid() -> usize {
    200
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("steinmd-out")
}
fn default_workers() -> usize {
    1
}

/// Parses one override value as a TOML value, falling back to a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Splits `key=value` from the command line.
pub fn parse_override(raw: &str) -> Result<(String, toml::Value)> {
    let (k, v) = raw
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {raw:?} is not of the form key=value")))?;
    Ok((k.trim().to_string(), parse_value(v.trim())))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| CliError::Config(format!("empty key in override {key:?}")))?;
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override {key:?}: {p:?} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl ExperimentConfig {
    /// Reads the optional config file and applies `key=value` overrides on top of it.
    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(format!("reading {}", p.display()), e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            set_path(&mut table, k, v.clone())?;
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n_list.is_empty() {
            return bad("n_list is empty".into());
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("n_list {:?} must be positive and strictly increasing", self.n_list));
        }
        if self.z_grid_size < 20 {
            return bad(format!("z_grid_size {} is below 20", self.z_grid_size));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.sampler.thin == 0 {
            return bad("sampler.thin must be at least 1".into());
        }
        match (self.model, self.method) {
            (Model::Md, Method::Glauber) => bad("the glauber method is only available for model = \"cw\"".into()),
            (Model::Cw, Method::Exact) => {
                if !self.rho()?.is_lattice() {
                    return bad("exact enumeration needs a lattice-valued rho".into());
                }
                Ok(())
            }
            (Model::Cw, Method::Glauber) => self.rho().map(|_| ()),
            (Model::Md, Method::Exact) => Ok(()),
        }
    }

    pub fn rho(&self) -> Result<RhoMeasure> {
        let p = &self.cw;
        match p.rho {
            RhoPreset::Rademacher => Ok(RhoMeasure::rademacher()),
            RhoPreset::ThreePoint => Ok(RhoMeasure::three_point()),
            RhoPreset::Custom => RhoMeasure::normalized(p.points.clone(), p.weights.clone())
                .map_err(|e| CliError::Config(format!("cw.points/cw.weights: {e}"))),
        }
    }

    pub fn cw_analysis(&self) -> Result<CWAnalysis> {
        Ok(analyze_rho(&self.rho()?, self.cw.max_order)?)
    }

    pub fn md_stationary(&self) -> Result<MDStationary> {
        Ok(solve_m0(self.md.J, self.md.h)?)
    }

    /// SHA-256 of the canonical JSON form of the fully resolved config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&bytes)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
