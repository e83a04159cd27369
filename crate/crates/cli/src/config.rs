use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chronoseme_core::entropy::{OutlierPolicy, DEFAULT_EPSILON, DEFAULT_K, DEFAULT_N_MIN};
use chronoseme_core::ingest::FilterPolicy;
use chronoseme_core::rhythm::HourWindow;
use chronoseme_core::scaling::{CellOrdering, EntropyMagnitude, SplitBasis, DEFAULT_MIN_BIN_COUNT, DEFAULT_XMIN};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    #[default]
    Country,
    /// Every record in one group named `all`.
    None,
}

/// Which cosinor fits share one Benjamini–Hochberg family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FdrFamily {
    /// One family per measure, across groups.
    #[default]
    PerMeasure,
    /// Every fit in the run.
    Joint,
}

/// Everything needed to reproduce one pipeline run. The output directory is
/// read from config files but never written back, so manifests from two
/// directories compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub records: PathBuf,
    pub embeddings: PathBuf,
    pub tables: Option<PathBuf>,
    pub reference_csv: Option<PathBuf>,
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,

    pub policy: FilterPolicy,
    /// Reject embedding rows whose norm is not 1 within 1e-3.
    pub unit_norm_check: bool,
    pub group_by: GroupKey,

    pub k: usize,
    pub epsilon: f64,
    pub n_min: usize,
    pub outlier: OutlierPolicy,

    pub peak_window: HourWindow,
    pub trough_window: HourWindow,
    pub fdr_family: FdrFamily,

    pub ordering: CellOrdering,
    pub split: f64,
    pub split_basis: SplitBasis,
    pub entropy_magnitude: EntropyMagnitude,
    /// Rows between checkpoints of the arrival-order gain curve.
    pub arrival_step: usize,
    pub cluster_eps: f64,
    pub cluster_min_pts: usize,
    pub powerlaw_xmin: usize,
    pub powerlaw_min_bin_count: usize,

    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            records: PathBuf::new(),
            embeddings: PathBuf::new(),
            tables: None,
            reference_csv: None,
            out_dir: None,
            policy: FilterPolicy::default(),
            unit_norm_check: true,
            group_by: GroupKey::Country,
            k: DEFAULT_K,
            epsilon: DEFAULT_EPSILON,
            n_min: DEFAULT_N_MIN,
            outlier: OutlierPolicy::Iqr1p5,
            peak_window: HourWindow::MORNING,
            trough_window: HourWindow::EVENING,
            fdr_family: FdrFamily::PerMeasure,
            ordering: CellOrdering::Chronological,
            split: 0.15,
            split_basis: SplitBasis::Volume,
            entropy_magnitude: EntropyMagnitude::Absolute,
            arrival_step: 200,
            cluster_eps: 0.4,
            cluster_min_pts: 15,
            powerlaw_xmin: DEFAULT_XMIN,
            powerlaw_min_bin_count: DEFAULT_MIN_BIN_COUNT,
            seed: 42,
        }
    }
}

#[derive(Deserialize)]
struct ManifestConfig {
    config: RunConfig,
}

impl RunConfig {
    /// Reads a run config, or the `config` section of a run manifest.
    /// Relative input paths are taken relative to the file's directory and
    /// made absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let cfg = if value.get("config").is_some() && value.get("tool_version").is_some() {
            serde_json::from_value::<ManifestConfig>(value)?.config
        } else {
            serde_json::from_value(value)?
        };
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        let base = std::path::absolute(base).with_context(|| format!("resolving {}", base.display()))?;
        Ok(cfg.rebased(&base))
    }

    fn rebased(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if !p.as_os_str().is_empty() && p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.records);
        fix(&mut self.embeddings);
        for p in [&mut self.tables, &mut self.reference_csv, &mut self.out_dir].into_iter().flatten() {
            fix(p);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("records", &self.records), ("embeddings", &self.embeddings)] {
            if p.as_os_str().is_empty() {
                bail!("no {name} file given");
            }
            if !p.is_file() {
                bail!("{name} file {} does not exist", p.display());
            }
        }
        for p in self.tables.iter().chain(&self.reference_csv) {
            if !p.is_file() {
                bail!("file {} does not exist", p.display());
            }
        }
        if self.out_dir.is_none() {
            bail!("no output directory given");
        }
        self.policy.validate()?;
        if self.k == 0 {
            bail!("k must be at least 1");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            bail!("epsilon must be finite and non-negative");
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            bail!("split must lie in (0, 1)");
        }
        if self.arrival_step < 2 {
            bail!("arrival_step must be at least 2");
        }
        if !(self.cluster_eps > 0.0) || self.cluster_min_pts == 0 {
            bail!("cluster eps and min_pts must be positive");
        }
        HourWindow::new(self.peak_window.start, self.peak_window.end)?;
        HourWindow::new(self.trough_window.start, self.trough_window.end)?;
        Ok(())
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out_dir.as_deref().context("no output directory given")
    }
}
