//! Experiment configuration, read from JSON. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::filtration::{FiltrationKind, DEFAULT_D0, DEFAULT_DTM_MASS, DEFAULT_THRESHOLD_FACTOR};
use crate::noise::builtin_transform;
use crate::signatures::{DEFAULT_GRID, DEFAULT_LAYERS, DEFAULT_RESOLUTION, VARIANCE_FRACTION};
use crate::svm::{DEFAULT_C_GRID, DEFAULT_FOLDS, DEFAULT_GAMMA_GRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signature {
    Field,
    Pd,
    Pl,
    Pi,
}

impl Signature {
    pub fn name(self) -> &'static str {
        match self {
            Self::Field => "field",
            Self::Pd => "PD",
            Self::Pl => "PL",
            Self::Pi => "PI",
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_factor() -> f64 {
    DEFAULT_THRESHOLD_FACTOR
}
fn default_d0() -> f64 {
    DEFAULT_D0
}
fn default_m() -> f64 {
    DEFAULT_DTM_MASS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiltrationConfig {
    pub kind: FiltrationKind,
    /// `z0 = threshold_factor * max(Z)`, per image.
    #[serde(default = "default_factor")]
    pub threshold_factor: f64,
    #[serde(default = "default_d0")]
    pub d0: f64,
    #[serde(default)]
    pub reference: (f64, f64),
    #[serde(default = "default_m")]
    pub m: f64,
    /// Edge-length limit for point-cloud complexes; `None` keeps every edge.
    #[serde(default)]
    pub r_max: Option<f64>,
}

impl FiltrationConfig {
    pub fn new(kind: FiltrationKind) -> Self {
        Self {
            kind,
            threshold_factor: DEFAULT_THRESHOLD_FACTOR,
            d0: DEFAULT_D0,
            reference: (0.0, 0.0),
            m: DEFAULT_DTM_MASS,
            r_max: None,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |what: String| Err(ExperimentError::Config(format!("{}: {what}", self.kind)));
        if !(self.threshold_factor > 0.0 && self.threshold_factor <= 1.0) {
            return bad(format!("threshold_factor {} outside (0, 1]", self.threshold_factor));
        }
        if !(self.d0 > 0.0) {
            return bad(format!("d0 {} must be positive", self.d0));
        }
        if !(self.m > 0.0 && self.m <= 1.0) {
            return bad(format!("m {} outside (0, 1]", self.m));
        }
        if let Some(r) = self.r_max {
            if !(r >= 0.0) {
                return bad(format!("r_max {r} must be non-negative"));
            }
        }
        Ok(())
    }
}

fn default_c_grid() -> Vec<f64> {
    DEFAULT_C_GRID.to_vec()
}
fn default_gamma_grid() -> Vec<f64> {
    DEFAULT_GAMMA_GRID.to_vec()
}
fn default_folds() -> usize {
    DEFAULT_FOLDS
}
fn default_train_fraction() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmConfig {
    #[serde(default = "default_c_grid")]
    pub c_grid: Vec<f64>,
    #[serde(default = "default_gamma_grid")]
    pub gamma_grid: Vec<f64>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub fold_seed: u64,
    /// Leading share of the image subset used for training.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c_grid: default_c_grid(),
            gamma_grid: default_gamma_grid(),
            folds: default_folds(),
            fold_seed: 0,
            train_fraction: default_train_fraction(),
        }
    }
}

fn default_layers() -> usize {
    DEFAULT_LAYERS
}
fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}
fn default_grid() -> usize {
    DEFAULT_GRID
}
fn default_variance_fraction() -> f64 {
    VARIANCE_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    #[serde(default = "default_layers")]
    pub k: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            k: default_layers(),
            resolution: default_resolution(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageConfig {
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Gaussian variance as a share of the largest death.
    #[serde(default = "default_variance_fraction")]
    pub variance_fraction: f64,
}

impl Default for ImageConfig {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            variance_fraction: default_variance_fraction(),
        }
    }
}

fn default_n_images() -> usize {
    1000
}
fn default_filtrations() -> Vec<FiltrationConfig> {
    FiltrationKind::ALL.into_iter().map(FiltrationConfig::new).collect()
}
fn default_dims() -> Vec<u8> {
    vec![0, 1]
}
fn default_signatures() -> Vec<Signature> {
    vec![Signature::Field, Signature::Pd, Signature::Pl, Signature::Pi]
}
fn default_transformations() -> Vec<String> {
    crate::noise::builtin_transforms()
        .into_iter()
        .map(|t| t.name)
        .collect()
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// IDX image file; relative paths resolve against the config file's directory.
    pub images: PathBuf,
    pub labels: PathBuf,
    #[serde(default = "default_n_images")]
    pub n_images: usize,
    #[serde(default = "default_filtrations")]
    pub filtrations: Vec<FiltrationConfig>,
    #[serde(default = "default_dims")]
    pub dims: Vec<u8>,
    #[serde(default = "default_signatures")]
    pub signatures: Vec<Signature>,
    /// Names from the built-in transformation registry.
    #[serde(default = "default_transformations")]
    pub transformations: Vec<String>,
    /// Global seed for stochastic transformations.
    #[serde(default)]
    pub seed: u64,
    /// Per-transformation replacements for the global seed.
    #[serde(default)]
    pub transform_seeds: BTreeMap<String, u64>,
    #[serde(default)]
    pub svm: SvmConfig,
    #[serde(default)]
    pub landscape: LandscapeConfig,
    #[serde(default)]
    pub persistence_image: ImageConfig,
    /// Worker threads; `None` lets the pool decide. Results do not depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Minimal config with defaults everywhere else.
    pub fn new(images: impl Into<PathBuf>, labels: impl Into<PathBuf>) -> Self {
        Self {
            images: images.into(),
            labels: labels.into(),
            n_images: default_n_images(),
            filtrations: default_filtrations(),
            dims: default_dims(),
            signatures: default_signatures(),
            transformations: default_transformations(),
            seed: 0,
            transform_seeds: BTreeMap::new(),
            svm: SvmConfig::default(),
            landscape: LandscapeConfig::default(),
            persistence_image: ImageConfig::default(),
            workers: None,
            out_dir: default_out_dir(),
            cache_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    /// Reads a config file and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.images);
        fix(&mut cfg.labels);
        fix(&mut cfg.out_dir);
        if let Some(c) = cfg.cache_dir.as_mut() {
            fix(c);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        for f in &self.filtrations {
            f.validate()?;
        }
        if let Some(d) = self.dims.iter().find(|&&d| d > 1) {
            return Err(ExperimentError::Config(format!("dimension {d} not in {{0, 1}}")));
        }
        for name in self.transformations.iter().chain(self.transform_seeds.keys()) {
            if builtin_transform(name).is_err() {
                return Err(ExperimentError::Config(format!("unknown transformation {name:?}")));
            }
        }
        if self.landscape.k == 0 || self.landscape.resolution == 0 || self.persistence_image.grid == 0 {
            return Err(ExperimentError::Config("signature shapes must be positive".into()));
        }
        if !(self.persistence_image.variance_fraction > 0.0) {
            return Err(ExperimentError::Config("variance_fraction must be positive".into()));
        }
        if self.workers == Some(0) {
            return Err(ExperimentError::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Extra checks for the classification experiment.
    pub fn validate_classification(&self) -> Result<(), ExperimentError> {
        self.validate()?;
        if self.n_images < 10 {
            return Err(ExperimentError::Config(format!(
                "classification needs at least 10 images (got {})",
                self.n_images
            )));
        }
        let f = self.svm.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(ExperimentError::Config(format!("train_fraction {f} outside (0, 1)")));
        }
        if self.svm.c_grid.is_empty() || self.svm.gamma_grid.is_empty() || self.svm.folds < 2 {
            return Err(ExperimentError::Config("SVM grids must be non-empty and folds >= 2".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config always serialises");
        hex_digest(text.as_bytes())
    }

    /// Seed for one transformation before per-image mixing.
    pub fn seed_for(&self, transformation: &str) -> u64 {
        self.transform_seeds
            .get(transformation)
            .copied()
            .unwrap_or(self.seed)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
