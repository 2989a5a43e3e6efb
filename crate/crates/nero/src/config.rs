//! Resolved settings for the pipeline commands. A JSON file supplies the
//! base; command-line flags override individual fields.

use std::path::{Path, PathBuf};

use nero_core::analysis::DEFAULT_MOVING_AVERAGE_WINDOW;
use nero_core::baselines::{DEFAULT_REACT_PERCENTILE, DEFAULT_RIDGE_SCALE, DEFAULT_TEMPERATURE};
use nero_core::detector::NeroConfig;
use nero_core::relevance::DEFAULT_EPS;
use nero_core::{LambdaMode, NormMode, YMode, ZSpec};
use serde::{Deserialize, Serialize};

use crate::bundle_io::read_json;
use crate::error::{Error, Result};

pub const DEFAULT_VARIANCE_FRACTION: f64 = 0.95;

/// Which comparison methods `eval` runs next to the detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Baselines {
    pub msp: bool,
    pub max_logit: bool,
    pub energy: bool,
    pub entropy: bool,
    pub mahalanobis: bool,
    pub react_energy: bool,
}

impl Default for Baselines {
    fn default() -> Self {
        Self::all(true)
    }
}

impl Baselines {
    pub const NAMES: [&'static str; 6] = ["msp", "max_logit", "energy", "entropy", "mahalanobis", "react_energy"];

    pub fn all(on: bool) -> Self {
        Self {
            msp: on,
            max_logit: on,
            energy: on,
            entropy: on,
            mahalanobis: on,
            react_energy: on,
        }
    }

    /// Enables exactly the named methods; `"none"` disables all of them.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut b = Self::all(false);
        for name in names {
            match name.as_ref() {
                "none" => {}
                "all" => b = Self::all(true),
                "msp" => b.msp = true,
                "max_logit" => b.max_logit = true,
                "energy" => b.energy = true,
                "entropy" => b.entropy = true,
                "mahalanobis" => b.mahalanobis = true,
                "react_energy" => b.react_energy = true,
                other => return Err(Error::config(format!("unknown baseline {other:?}"))),
            }
        }
        Ok(b)
    }

    pub fn enabled(&self) -> Vec<&'static str> {
        let flags = [
            self.msp,
            self.max_logit,
            self.energy,
            self.entropy,
            self.mahalanobis,
            self.react_energy,
        ];
        Self::NAMES
            .iter()
            .zip(flags)
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub test_id: Option<PathBuf>,
    pub test_ood: Option<PathBuf>,
    /// Bundle to score or dump.
    pub bundle: Option<PathBuf>,
    /// Previously fitted model file; when absent the commands fit on `train`.
    pub model: Option<PathBuf>,
    /// Not recorded in the output, so reruns into other directories match.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Explicit subspace dimension; overrides `variance_fraction`.
    pub z: Option<usize>,
    pub variance_fraction: f64,
    pub k: Option<usize>,
    pub ks: Option<Vec<usize>>,
    pub eps: f64,
    pub y_mode: YMode,
    pub lambda_mode: LambdaMode,
    pub norm: NormMode,
    pub baselines: Baselines,
    pub temperature: f64,
    pub react_percentile: f64,
    pub ridge_scale: f64,
    pub window: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: None,
            test_id: None,
            test_ood: None,
            bundle: None,
            model: None,
            out: None,
            z: None,
            variance_fraction: DEFAULT_VARIANCE_FRACTION,
            k: None,
            ks: None,
            eps: DEFAULT_EPS,
            y_mode: YMode::default(),
            lambda_mode: LambdaMode::default(),
            norm: NormMode::default(),
            baselines: Baselines::default(),
            temperature: DEFAULT_TEMPERATURE,
            react_percentile: DEFAULT_REACT_PERCENTILE,
            ridge_scale: DEFAULT_RIDGE_SCALE,
            window: DEFAULT_MOVING_AVERAGE_WINDOW,
            seed: 7,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        read_json(path).map_err(|e| match e {
            Error::Json { path, source } => Error::config(format!("{}: {source}", path.display())),
            other => other,
        })
    }

    pub fn nero_config(&self) -> NeroConfig {
        NeroConfig {
            z_spec: match self.z {
                Some(z) => ZSpec::Explicit(z),
                None => ZSpec::VarianceFraction(self.variance_fraction),
            },
            k: self.k,
            eps: self.eps,
            y_mode: self.y_mode,
            lambda_mode: self.lambda_mode,
            norm: self.norm,
        }
    }

    pub fn out_dir(&self) -> Result<&Path> {
        require(&self.out, "out")
    }
}

/// The named path, or a usage error when it was never given.
pub fn require<'a>(field: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    field
        .as_deref()
        .ok_or_else(|| Error::config(format!("missing required setting --{flag}")))
}

/// Fails with the first path that does not exist.
pub fn ensure_exist(paths: &[&Path]) -> Result<()> {
    match paths.iter().find(|p| !p.exists()) {
        Some(p) => Err(Error::MissingFile(p.to_path_buf())),
        None => Ok(()),
    }
}
