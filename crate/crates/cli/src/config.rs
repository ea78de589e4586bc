//! Pipeline configuration: one JSON file drives every stage.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use tmtree::corpus::InputFormat;
use tmtree::{Error, Result, TreeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    /// Path to a stop-word list (one word per line); None uses the shipped
    /// English list.
    pub stoplist: Option<PathBuf>,
    /// Vocabulary pruning threshold: keep terms occurring at least this often.
    pub min_count: usize,
    pub lda: LdaStage,
    pub tree: TreeStage,
    pub validate: ValidateStage,
    /// Master seed; stage seeds are derived from it unless set explicitly.
    pub seed: u64,
    /// Worker cap for the parallel stages; 0 means all cores.
    pub threads: usize,
    pub out_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            input: InputConfig::default(),
            stoplist: None,
            min_count: 5,
            lda: LdaStage::default(),
            tree: TreeStage::default(),
            validate: ValidateStage::default(),
            seed: 0,
            threads: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub format: InputFormat,
    /// Logical column name -> actual header, for files with other schemas.
    pub column_map: HashMap<String, String>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            path: PathBuf::from("reports.csv"),
            format: InputFormat::Csv,
            column_map: HashMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaStage {
    /// Number of latent topics.
    pub s: usize,
    /// Dirichlet parameter of the topic proportions; small values force
    /// near-degenerate per-document topic distributions.
    pub kappa: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: Option<u64>,
}

impl Default for LdaStage {
    fn default() -> Self {
        LdaStage { s: 100, kappa: 0.001, tol: 1e-5, max_iter: 100, seed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeStage {
    /// Global significance level of the fluctuation tests.
    pub alpha: f64,
    /// Minimum segment size: values below 1 are a fraction of n, resolved at
    /// fit time; values of 1 and above are absolute counts.
    pub min_segment: f64,
    pub max_depth: Option<usize>,
    pub bonferroni: bool,
    pub exhaustive_level_limit: usize,
    pub trim: f64,
    /// Report columns used as split candidates (topic dummies are always
    /// appended).
    pub candidates: Vec<String>,
}

impl Default for TreeStage {
    fn default() -> Self {
        TreeStage {
            alpha: 1e-4,
            min_segment: 0.004,
            max_depth: None,
            bonferroni: true,
            exhaustive_level_limit: 10,
            trim: 0.1,
            candidates: tmtree::corpus::CATEGORICAL_COLUMNS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateStage {
    /// Resamples per scheme.
    pub b_per_scheme: usize,
    pub schemes: Vec<tmtree::Scheme>,
    /// Resample size as a fraction of n.
    pub fraction: f64,
    /// Refit significance level (relaxed relative to the original fit).
    pub alpha: f64,
    /// Refit minimum segment size; None scales the tree stage's value by
    /// `fraction`.
    pub min_segment: Option<f64>,
    pub max_lag: usize,
    pub seed: Option<u64>,
}

impl Default for ValidateStage {
    fn default() -> Self {
        ValidateStage {
            b_per_scheme: 200,
            schemes: vec![tmtree::Scheme::Rrs, tmtree::Scheme::Srs],
            fraction: 5.0 / 6.0,
            alpha: 1e-3,
            min_segment: None,
            max_lag: 10,
            seed: None,
        }
    }
}

/// splitmix64; used to fan the master seed out to stage seeds.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

const STAGE_LDA: u64 = 1;
const STAGE_VALIDATE: u64 = 2;

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate_fields()?;
        Ok(cfg)
    }

    pub fn validate_fields(&self) -> Result<()> {
        if self.min_count < 1 {
            return Err(Error::Config("min_count must be >= 1".into()));
        }
        if self.lda.s < 1 {
            return Err(Error::Config("lda.s must be >= 1".into()));
        }
        if !self.lda.kappa.is_finite() || self.lda.kappa <= 0.0 {
            return Err(Error::Config("lda.kappa must be > 0".into()));
        }
        if !(self.tree.alpha > 0.0 && self.tree.alpha < 1.0) {
            return Err(Error::Config("tree.alpha must be in (0,1)".into()));
        }
        if !self.tree.min_segment.is_finite() || self.tree.min_segment <= 0.0 {
            return Err(Error::Config("tree.min_segment must be positive".into()));
        }
        if !(self.validate.fraction > 0.0 && self.validate.fraction <= 1.0) {
            return Err(Error::Config("validate.fraction must be in (0,1]".into()));
        }
        if self.validate.schemes.is_empty() {
            return Err(Error::Config("validate.schemes must not be empty".into()));
        }
        Ok(())
    }

    pub fn lda_seed(&self) -> u64 {
        self.lda.seed.unwrap_or_else(|| splitmix64(self.seed ^ STAGE_LDA))
    }

    pub fn validate_seed(&self) -> u64 {
        self.validate.seed.unwrap_or_else(|| splitmix64(self.seed ^ STAGE_VALIDATE))
    }

    /// Resolve a fraction-or-absolute segment size against n.
    pub fn resolve_min_segment(value: f64, n: usize) -> usize {
        let resolved = if value < 1.0 { (value * n as f64).round() } else { value.round() };
        (resolved as usize).max(2)
    }

    pub fn tree_config(&self, n: usize) -> TreeConfig {
        TreeConfig {
            alpha: self.tree.alpha,
            min_segment: Self::resolve_min_segment(self.tree.min_segment, n),
            max_depth: self.tree.max_depth,
            bonferroni: self.tree.bonferroni,
            exhaustive_level_limit: self.tree.exhaustive_level_limit,
            trim: self.tree.trim,
        }
    }

    /// Refit configuration for resamples: relaxed alpha, minimum segment
    /// size scaled by the resample fraction unless overridden.
    pub fn refit_config(&self, n: usize) -> TreeConfig {
        let base = self.tree_config(n);
        let min_segment = match self.validate.min_segment {
            Some(v) => Self::resolve_min_segment(v, n),
            None => {
                ((base.min_segment as f64 * self.validate.fraction).round() as usize).max(2)
            }
        };
        TreeConfig { alpha: self.validate.alpha, min_segment, ..base }
    }
}
