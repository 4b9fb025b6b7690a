use std::fs;
use std::path::{Path, PathBuf};

use gliofuse_core::metrics::MetricConfig;
use gliofuse_core::postprocess::{Connectivity, PostprocessConfig};
use gliofuse_core::preprocess::{NormalizationPolicy, RescaleSpec, StepOrder};
use gliofuse_core::staple::{FusionMethod, StapleConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// File-name suffix of each input modality: `<case>/<case>-<suffix><extension>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModalitySuffixes {
    pub t1: String,
    pub t1gd: String,
    pub t2: String,
    pub flair: String,
}

impl Default for ModalitySuffixes {
    fn default() -> Self {
        Self {
            t1: "t1n".into(),
            t1gd: "t1c".into(),
            t2: "t2w".into(),
            flair: "t2f".into(),
        }
    }
}

impl ModalitySuffixes {
    pub fn all(&self) -> [&str; 4] {
        [&self.t1, &self.t1gd, &self.t2, &self.flair]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub modality_suffixes: ModalitySuffixes,
    pub label_suffix: String,
    pub extension: String,
    /// One directory per ensemble member.
    pub prediction_dirs: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub normalization: NormalizationPolicy,
    pub rescale: RescaleSpec,
    pub step_order: StepOrder,
    pub fusion_method: FusionMethod,
    pub staple: StapleConfig,
    pub postprocess: PostprocessConfig,
    pub metrics: MetricConfig,
    /// Upper bound on cases processed concurrently.
    pub parallel_cases: usize,
    /// Fail `fuse` cases missing from a member directory instead of skipping them.
    pub strict: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            modality_suffixes: ModalitySuffixes::default(),
            label_suffix: "seg".into(),
            extension: ".nii.gz".into(),
            prediction_dirs: Vec::new(),
            output_dir: None,
            normalization: NormalizationPolicy::default(),
            rescale: RescaleSpec::default(),
            step_order: StepOrder::default(),
            fusion_method: FusionMethod::default(),
            staple: StapleConfig::default(),
            postprocess: PostprocessConfig::default(),
            metrics: MetricConfig::default(),
            parallel_cases: 1,
            strict: false,
        }
    }
}

/// Command-line values that replace their config-file counterparts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub et_min_volume: Option<usize>,
    pub staple_tol: Option<f64>,
    pub staple_max_iter: Option<usize>,
    pub method: Option<FusionMethod>,
    pub connectivity: Option<Connectivity>,
    pub parallel: Option<usize>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Defaults, then the file at `path` if given, then `overrides`; validated.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut config = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.et_min_volume {
            self.postprocess.et_min_volume = v;
        }
        if let Some(v) = o.staple_tol {
            self.staple.tolerance = v;
        }
        if let Some(v) = o.staple_max_iter {
            self.staple.max_iterations = v;
        }
        if let Some(v) = o.method {
            self.fusion_method = v;
        }
        if let Some(v) = o.connectivity {
            self.postprocess.foreground_connectivity = v;
        }
        if let Some(v) = o.parallel {
            self.parallel_cases = v;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let suffixes = self.modality_suffixes.all();
        if suffixes.iter().chain([&self.label_suffix.as_str()]).any(|s| s.is_empty()) {
            return Err(CliError::Config("file-name suffixes must be non-empty".into()));
        }
        if self.parallel_cases == 0 {
            return Err(CliError::Config("parallel_cases must be at least 1".into()));
        }
        self.normalization.validate()?;
        self.rescale.validate()?;
        self.staple.validate()?;
        self.postprocess.validate()?;
        self.metrics.validate()?;
        Ok(())
    }
}
