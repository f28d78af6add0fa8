//! Performance measures, convergence diagnostics and the staged pipeline.
//!
//! The pipeline writes everything under one output directory:
//!
//! ```text
//! out/manifest.json          provenance of every completed stage
//! out/data/{train,test}.csv  the split (and optional column subset)
//! out/data/test_outcome.csv  frozen artificial test outcome
//! out/mselect.json           m-selection result (when run)
//! out/mselect_trace.csv      statistic values per candidate and draw
//! out/mselect_summary.csv    distances between neighbouring candidates
//! out/effects.csv + .json    the effect specification used as truth
//! out/plasmodes/, indices/   replicate data (only with write_plasmodes)
//! out/quality.json           outcome quality checks
//! out/metrics.csv            b, model, mab, msep
//! out/convergence.csv        running means per model and measure
//! out/evaluation.json        aggregated measures and convergence points
//! out/report/*.svg           figures
//! ```
//!
//! Each stage reads its inputs back from disk, so running the stages one at
//! a time gives the same tree as a single `run`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{self, CsvOptions, DataError, Dataset};
use crate::mselect::{self, par_map, MSelectionConfig, MSelectionResult};
use crate::ogm::{self, EffectSpec, Link, OgmError, Provenance, QualityReport, SparsitySummary};
use crate::regress::{self, CvSpec, FitError, FitResult, LambdaGrid};
use crate::resampler::{self, derive_seed, ResamplingPlan, Scheme};
use crate::rng::streams;
use crate::svg;

// ---------------------------------------------------------------- measures

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty input")]
    EmptyInput,
    #[error("window must be >= 2 and tol > 0 (got w = {w}, tol = {tol})")]
    BadWindow { w: usize, tol: f64 },
}

/// Mean absolute bias of `(μ̂, β̂)` against `(μ, β)`, averaged over `p + 1`.
pub fn mab(fit: &FitResult, truth: &EffectSpec) -> Result<f64, MeasureError> {
    let p = truth.p();
    if fit.beta_hat.len() != p {
        return Err(MeasureError::DimensionMismatch(format!(
            "{} fitted effects vs {p} true effects",
            fit.beta_hat.len()
        )));
    }
    let mut total = (fit.mu_hat - truth.mu).abs();
    for j in 0..p {
        total += (fit.beta_hat[j] - truth.beta[j]).abs();
    }
    Ok(total / (p + 1) as f64)
}

/// Mean squared prediction error over the test rows.
pub fn msep(fit: &FitResult, x_test: &DMatrix<f64>, y_test: &DVector<f64>) -> Result<f64, MeasureError> {
    if x_test.nrows() != y_test.len() || x_test.nrows() == 0 {
        return Err(MeasureError::DimensionMismatch(format!(
            "{} test rows vs {} test outcomes",
            x_test.nrows(),
            y_test.len()
        )));
    }
    let pred = regress::predict(fit, x_test).map_err(|e| MeasureError::DimensionMismatch(e.to_string()))?;
    let mut total = 0.0;
    for i in 0..y_test.len() {
        total += (pred[i] - y_test[i]).powi(2);
    }
    Ok(total / y_test.len() as f64)
}

/// Arithmetic mean, summed left to right.
pub fn aggregate(values: &[f64]) -> Result<f64, MeasureError> {
    if values.is_empty() {
        return Err(MeasureError::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Running means `r_k = (v_1 + … + v_k) / k` and the first `k >= w` at which
/// the trailing `w` running means vary by less than `tol` relative to `|r_k|`.
///
/// Relative variation is `(max − min) / |r_k|`; a window that is exactly flat
/// counts as converged even when `r_k = 0`. Returned `k` is 1-based.
pub fn convergence_trace(values: &[f64], w: usize, tol: f64) -> Result<(Vec<f64>, Option<usize>), MeasureError> {
    if w < 2 || !(tol > 0.0) {
        return Err(MeasureError::BadWindow { w, tol });
    }
    let mut running = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (k, v) in values.iter().enumerate() {
        sum += v;
        running.push(sum / (k + 1) as f64);
    }
    let converged = (w..=running.len()).find(|&k| {
        let window = &running[k - w..k];
        let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = hi - lo;
        spread == 0.0 || spread < tol * running[k - 1].abs()
    });
    Ok((running, converged))
}

// ---------------------------------------------------------------- config

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    RidgeCv,
    LmmReml,
    LassoCv,
}

impl ModelName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelName::RidgeCv => "ridge_cv",
            ModelName::LmmReml => "lmm_reml",
            ModelName::LassoCv => "lasso_cv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [ModelName::RidgeCv, ModelName::LmmReml, ModelName::LassoCv]
            .into_iter()
            .find(|m| m.as_str() == s)
    }

    pub fn fit(self, x: &DMatrix<f64>, y: &DVector<f64>, cv: &CvSpec) -> Result<FitResult, FitError> {
        match self {
            ModelName::RidgeCv => regress::fit_ridge_cv(x, y, cv),
            ModelName::LmmReml => regress::fit_lmm_reml(x, y),
            ModelName::LassoCv => regress::fit_lasso_cv(x, y, cv),
        }
    }
}

/// Resampling size: a fixed integer or `"auto"` (m-selection).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawM", into = "RawM")]
pub enum MSpec {
    #[default]
    Auto,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawM {
    Int(usize),
    Text(String),
}

impl TryFrom<RawM> for MSpec {
    type Error = String;
    fn try_from(raw: RawM) -> Result<Self, String> {
        match raw {
            RawM::Int(m) => Ok(MSpec::Fixed(m)),
            RawM::Text(s) if s == "auto" => Ok(MSpec::Auto),
            RawM::Text(s) => Err(format!("m must be a positive integer or \"auto\", got {s:?}")),
        }
    }
}

impl From<MSpec> for RawM {
    fn from(m: MSpec) -> Self {
        match m {
            MSpec::Auto => RawM::Text("auto".into()),
            MSpec::Fixed(m) => RawM::Int(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub outcome_column: String,
    /// First column holds row identifiers.
    #[serde(default)]
    pub id_column: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub ratio: (u32, u32),
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { ratio: (2, 1), seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSubset {
    pub k: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResamplingConfig {
    pub scheme: Scheme,
    pub m: MSpec,
    pub n_replicates: usize,
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_column: Option<String>,
}

impl Default for ResamplingConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::WithReplacement,
            m: MSpec::Auto,
            n_replicates: 500,
            master_seed: 0,
            cluster_column: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualEntry {
    pub column: String,
    pub beta: f64,
}

fn literature() -> Provenance {
    Provenance::Literature
}

/// Where the true effects come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OgmSource {
    /// Cross-validated LASSO on the training data.
    Lasso,
    /// Cross-validated ridge on the training data.
    Ridge,
    Manual {
        mu: f64,
        #[serde(default)]
        entries: Vec<ManualEntry>,
    },
    /// A `column_name,beta` table; columns missing from it get zero.
    File {
        path: PathBuf,
        mu: f64,
        #[serde(default = "literature")]
        provenance: Provenance,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvConfig {
    pub folds: usize,
    pub lambda_grid: LambdaGrid,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            lambda_grid: LambdaGrid::default(),
            seed: 0,
        }
    }
}

impl CvConfig {
    pub fn spec(&self, seed: u64) -> CvSpec {
        CvSpec {
            folds: self.folds,
            lambda_grid: self.lambda_grid.clone(),
            seed,
            ..CvSpec::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OgmConfig {
    pub source: OgmSource,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub link: Link,
    /// Cross-validation for estimated sources; `seed` is used as given.
    #[serde(default)]
    pub cv: CvConfig,
}

impl Default for OgmConfig {
    fn default() -> Self {
        Self {
            source: OgmSource::Lasso,
            noise_sd: 0.0,
            link: Link::Identity,
            cv: CvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationConfig {
    pub models: Vec<ModelName>,
    /// Fold seeds are derived per replicate; `cv.seed` is ignored here.
    pub cv: CvConfig,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelName::RidgeCv, ModelName::LmmReml],
            cv: CvConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    pub window: usize,
    pub tol: f64,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self { window: 50, tol: 0.005 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QualityConfig {
    pub bins: usize,
    pub ks_threshold: f64,
    /// Replicates `1..=highlight` are drawn individually in the report.
    pub highlight: usize,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            bins: ogm::DEFAULT_BINS,
            ks_threshold: ogm::DEFAULT_KS_THRESHOLD,
            highlight: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub write_plasmodes: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            write_plasmodes: false,
        }
    }
}

/// Declarative description of a whole plasmode study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column_subset: Option<ColumnSubset>,
    #[serde(default)]
    pub resampling: ResamplingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mselect: Option<MSelectionConfig>,
    #[serde(default)]
    pub ogm: OgmConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub quality: QualityConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Key overview printed alongside configuration errors.
pub const CONFIG_SCHEMA: &str = r#"configuration keys (JSON, unknown keys rejected):
  input:         { path, outcome_column, id_column = false }          (required)
  split:         { ratio = [2, 1], seed = 0 }
  column_subset: { k, seed = 0 }                                       (optional)
  resampling:    { scheme = "with_replacement" | "without_replacement" | "sample_split",
                   m = "auto" | <int>, n_replicates = 500, master_seed = 0 }
  mselect:       { q = 0.97, b = 100, statistic = "lw_cov_norm", distance = "wasserstein1",
                   norm = "frobenius", m_floor, seed = 0 }             (required when m = "auto")
  ogm:           { source = {kind: "lasso" | "ridge" | "manual" (mu, entries: [{column, beta}])
                            | "file" (path, mu, provenance)},
                   noise_sd = 0, link = "identity" | "logit", cv = {folds, lambda_grid, seed} }
  evaluation:    { models = ["ridge_cv", "lmm_reml"] (also "lasso_cv"), cv = {folds = 10, lambda_grid} }
  convergence:   { window = 50, tol = 0.005 }
  quality:       { bins = 15, ks_threshold = 0.2, highlight = 3 }
  output:        { dir = "out", write_plasmodes = false }"#;

impl PipelineConfig {
    /// Minimal configuration; `m = "auto"` with default m-selection settings.
    pub fn new(input: impl Into<PathBuf>, outcome_column: &str) -> Self {
        Self {
            input: InputConfig {
                path: input.into(),
                outcome_column: outcome_column.to_string(),
                id_column: false,
            },
            split: SplitConfig::default(),
            column_subset: None,
            resampling: ResamplingConfig::default(),
            mselect: Some(MSelectionConfig::default()),
            ogm: OgmConfig::default(),
            evaluation: EvaluationConfig::default(),
            convergence: ConvergenceConfig::default(),
            quality: QualityConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        let (a, b) = self.split.ratio;
        if a == 0 || b == 0 {
            return bad(format!("split ratio parts must be >= 1, got [{a}, {b}]"));
        }
        if matches!(&self.column_subset, Some(c) if c.k == 0) {
            return bad("column_subset.k must be >= 1".into());
        }
        let r = &self.resampling;
        if r.n_replicates == 0 {
            return bad("resampling.n_replicates must be >= 1".into());
        }
        if let Some(c) = &r.cluster_column {
            return bad(format!(
                "cluster column '{c}' declared: dependent observations need a cluster bootstrap, which is not supported"
            ));
        }
        match r.m {
            MSpec::Fixed(0) => return bad("resampling.m must be >= 1".into()),
            MSpec::Auto if self.mselect.is_none() => {
                return bad("resampling.m = \"auto\" requires an mselect section".into())
            }
            MSpec::Auto if r.scheme != Scheme::WithReplacement => {
                return bad("resampling.m = \"auto\" is only defined for with_replacement".into())
            }
            _ => {}
        }
        if let Some(ms) = &self.mselect {
            ms.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if !(self.ogm.noise_sd >= 0.0 && self.ogm.noise_sd.is_finite()) {
            return bad(format!(
                "ogm.noise_sd must be finite and >= 0, got {}",
                self.ogm.noise_sd
            ));
        }
        if let OgmSource::Manual { entries, .. } = &self.ogm.source {
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = entries.iter().find(|e| !seen.insert(e.column.as_str())) {
                return bad(format!("ogm manual entry for '{}' given more than once", dup.column));
            }
        }
        for cv in [&self.ogm.cv, &self.evaluation.cv] {
            if cv.folds < 2 {
                return bad(format!("cv.folds must be >= 2, got {}", cv.folds));
            }
        }
        let models = &self.evaluation.models;
        if models.is_empty() {
            return bad("evaluation.models must name at least one model".into());
        }
        if (1..models.len()).any(|i| models[..i].contains(&models[i])) {
            return bad("evaluation.models contains a duplicate".into());
        }
        if self.convergence.window < 2 || !(self.convergence.tol > 0.0) {
            return bad("convergence needs window >= 2 and tol > 0".into());
        }
        if self.quality.bins == 0 || !(self.quality.ks_threshold > 0.0) {
            return bad("quality needs bins >= 1 and ks_threshold > 0".into());
        }
        Ok(())
    }

    /// The config as recorded in the manifest: everything except the output
    /// location, so equal studies written to different places compare equal.
    fn recorded(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(out) = v.get_mut("output").and_then(|o| o.as_object_mut()) {
            out.remove("dir");
        }
        v
    }
}

// ---------------------------------------------------------------- errors

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    SelectM,
    Generate,
    Evaluate,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::SelectM => "select-m",
            Stage::Generate => "generate",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Invalid configuration or unusable input; nothing was computed.
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage}{}: {message} (completed: {})", replicate.map(|b| format!(", replicate {b}")).unwrap_or_default(), fmt_stages(completed))]
    Stage {
        stage: Stage,
        replicate: Option<usize>,
        message: String,
        completed: Vec<Stage>,
    },
}

fn fmt_stages(s: &[Stage]) -> String {
    if s.is_empty() {
        "none".into()
    } else {
        s.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl PipelineError {
    pub fn is_validation(&self) -> bool {
        matches!(self, PipelineError::Config(_))
    }
}

// ---------------------------------------------------------------- manifest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub source_rows: usize,
    pub source_columns: usize,
    pub columns_used: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub split_ratio: (u32, u32),
    pub split_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSelectRecord {
    pub config: MSelectionConfig,
    pub m_floor: usize,
    pub candidates: Vec<usize>,
    pub m_star: usize,
    pub seed_rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub scheme: Scheme,
    pub m: usize,
    pub m_source: String,
    pub n_replicates: usize,
    pub master_seed: u64,
    pub seed_rule: String,
    pub replicate_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OgmRecord {
    pub provenance: Provenance,
    pub mu: f64,
    pub noise_sd: f64,
    pub link: Link,
    pub sparsity: SparsitySummary,
    pub outcome_seed_rule: String,
    pub test_outcome_seed: u64,
    pub predictor_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub models: Vec<ModelName>,
    pub cv_seed_rule: String,
    pub window: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

/// Provenance of an output directory. There is deliberately no timestamp:
/// the tree is a pure function of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: Software,
    pub config: serde_json::Value,
    pub stages_completed: Vec<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mselect: Option<MSelectRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ogm: Option<OgmRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvaluationRecord>,
}

impl Manifest {
    fn fresh(cfg: &PipelineConfig) -> Self {
        Self {
            software: Software {
                name: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            config: cfg.recorded(),
            stages_completed: Vec::new(),
            data: None,
            mselect: None,
            plan: None,
            ogm: None,
            evaluation: None,
        }
    }

    pub fn done(&self, stage: Stage) -> bool {
        self.stages_completed.contains(&stage)
    }

    fn mark(&mut self, stage: Stage) {
        if !self.done(stage) {
            self.stages_completed.push(stage);
            self.stages_completed.sort();
        }
    }

    pub fn read(out: &Path) -> Result<Self, PipelineError> {
        let path = out.join(MANIFEST);
        let text = fs::read_to_string(&path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("bad manifest {}: {e}", path.display())))
    }
}

// ---------------------------------------------------------------- report types

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelName,
    pub mab_hat: f64,
    pub msep_hat: f64,
    pub converged_at_mab: Option<usize>,
    pub converged_at_msep: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub summary: ModelSummary,
    /// Per replicate, in order of `b`.
    pub mab: Vec<f64>,
    pub msep: Vec<f64>,
    pub running_mab: Vec<f64>,
    pub running_msep: Vec<f64>,
}

/// Written as `evaluation.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub n_replicates: usize,
    pub window: usize,
    pub tol: f64,
    pub test_rows: usize,
    pub models: Vec<ModelSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub models: Vec<ModelEvaluation>,
    pub summary: EvaluationSummary,
    pub manifest: Manifest,
}

// ---------------------------------------------------------------- pipeline

const MANIFEST: &str = "manifest.json";
const TRAIN: &str = "data/train.csv";
const TEST: &str = "data/test.csv";
const TEST_OUTCOME: &str = "data/test_outcome.csv";
const MSELECT_JSON: &str = "mselect.json";
const EFFECTS: &str = "effects";
const QUALITY: &str = "quality.json";
const METRICS: &str = "metrics.csv";
const CONVERGENCE: &str = "convergence.csv";
const EVALUATION: &str = "evaluation.json";
const TEST_OUTCOME_HEADER: &str = "y_true";

/// A configured study bound to its output directory.
pub struct Pipeline {
    cfg: PipelineConfig,
    out: PathBuf,
}

type Failure = (Option<usize>, String);

fn fail<E: fmt::Display>(e: E) -> Failure {
    (None, e.to_string())
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let out = cfg.output.dir.clone();
        Ok(Self { cfg, out })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    /// Current manifest, or a fresh one when the directory holds nothing
    /// from this configuration.
    pub fn manifest(&self) -> Manifest {
        match Manifest::read(&self.out) {
            Ok(m) if m.config == self.cfg.recorded() => m,
            _ => Manifest::fresh(&self.cfg),
        }
    }

    fn save(&self, m: &Manifest) -> Result<(), Failure> {
        write_json(&self.out.join(MANIFEST), m).map_err(fail)
    }

    fn stage<T>(
        &self,
        stage: Stage,
        body: impl FnOnce(&mut Manifest) -> Result<T, Failure>,
    ) -> Result<T, PipelineError> {
        let mut m = self.manifest();
        if !m.done(Stage::Ingest) && stage != Stage::Ingest {
            // A fresh manifest means stale outputs from another config may
            // be lying around; start from a clean slate of records.
            m = Manifest::fresh(&self.cfg);
        }
        fs::create_dir_all(&self.out).map_err(|e| self.error(stage, &m, (None, e.to_string())))?;
        match body(&mut m) {
            Ok(v) => {
                m.mark(stage);
                self.save(&m).map_err(|e| self.error(stage, &m, e))?;
                log::info!("stage {stage} done");
                Ok(v)
            }
            Err(e) => Err(self.error(stage, &m, e)),
        }
    }

    fn error(&self, stage: Stage, m: &Manifest, (replicate, message): Failure) -> PipelineError {
        PipelineError::Stage {
            stage,
            replicate,
            message,
            completed: m.stages_completed.clone(),
        }
    }

    fn ensure(&self, stage: Stage) -> Result<(), PipelineError> {
        if self.manifest().done(stage) {
            return Ok(());
        }
        match stage {
            Stage::Ingest => self.ingest(),
            Stage::SelectM => self.select_m().map(|_| ()),
            Stage::Generate => self.generate(),
            Stage::Evaluate => self.evaluate().map(|_| ()),
            Stage::Report => self.report(),
        }
    }

    /// Load, optional column subset, train/test split.
    pub fn ingest(&self) -> Result<(), PipelineError> {
        let input = &self.cfg.input;
        let opts = CsvOptions::with_outcome(&input.outcome_column).id_column(input.id_column);
        let ds = match dataio::load_csv(&input.path, &opts) {
            Ok(ds) => ds,
            Err(e @ (DataError::MissingFile(_) | DataError::OutcomeNotFound(_))) => {
                return Err(PipelineError::Config(e.to_string()))
            }
            Err(e) => {
                return Err(PipelineError::Stage {
                    stage: Stage::Ingest,
                    replicate: None,
                    message: e.to_string(),
                    completed: Vec::new(),
                })
            }
        };
        self.stage(Stage::Ingest, |m| {
            *m = Manifest::fresh(&self.cfg);
            let (source_rows, source_columns) = (ds.n(), ds.p());
            let ds = match &self.cfg.column_subset {
                Some(c) => dataio::select_columns(&ds, c.k, c.seed).map_err(fail)?,
                None => ds,
            };
            let split = dataio::split_train_test(&ds, self.cfg.split.ratio, self.cfg.split.seed).map_err(fail)?;
            fs::create_dir_all(self.out.join("data")).map_err(fail)?;
            dataio::write_csv(&split.train, self.out.join(TRAIN)).map_err(fail)?;
            dataio::write_csv(&split.test, self.out.join(TEST)).map_err(fail)?;
            m.data = Some(DataRecord {
                source_rows,
                source_columns,
                columns_used: ds.p(),
                train_rows: split.train.n(),
                test_rows: split.test.n(),
                split_ratio: split.ratio,
                split_seed: split.seed,
            });
            Ok(())
        })
    }

    fn train(&self) -> Result<Dataset, Failure> {
        dataio::load_written(self.out.join(TRAIN), Some(&self.cfg.input.outcome_column)).map_err(fail)
    }

    fn test(&self) -> Result<Dataset, Failure> {
        dataio::load_written(self.out.join(TEST), Some(&self.cfg.input.outcome_column)).map_err(fail)
    }

    /// Adaptive choice of `m` on the training rows. Uses default settings
    /// when the configuration has no `mselect` section.
    pub fn select_m(&self) -> Result<MSelectionResult, PipelineError> {
        self.ensure(Stage::Ingest)?;
        self.stage(Stage::SelectM, |m| {
            let train = self.train()?;
            let ms = self.cfg.mselect.clone().unwrap_or_default();
            let result = mselect::select_m(&train, &ms).map_err(fail)?;
            mselect::write_trace(&result, &self.out).map_err(fail)?;
            write_json(&self.out.join(MSELECT_JSON), &result).map_err(fail)?;
            m.mselect = Some(MSelectRecord {
                m_floor: ms.floor_for(train.n()),
                config: ms,
                candidates: result.candidates.clone(),
                m_star: result.m_star,
                seed_rule: "candidate j (0-based) seed = derive_seed(seed, j + 1); draw i seed = derive_seed(candidate seed, i)"
                    .into(),
            });
            Ok(result)
        })
    }

    fn plan(&self, m: &Manifest) -> Result<(ResamplingPlan, String), Failure> {
        let r = &self.cfg.resampling;
        let (size, source) = match r.m {
            MSpec::Fixed(size) => (size, "fixed".to_string()),
            MSpec::Auto => {
                let rec = m.mselect.as_ref().ok_or_else(|| fail("m-selection has not run"))?;
                (rec.m_star, "auto".to_string())
            }
        };
        let plan = ResamplingPlan::new(r.scheme, size, r.n_replicates, r.master_seed);
        Ok((plan, source))
    }

    fn effects(&self, train: &Dataset) -> Result<EffectSpec, Failure> {
        let o = &self.cfg.ogm;
        let cv = o.cv.spec(o.cv.seed);
        let spec = match &o.source {
            OgmSource::Lasso => ogm::effects_from_lasso(train, &cv).map_err(fail)?.0,
            OgmSource::Ridge => ogm::effects_from_ridge(train, &cv).map_err(fail)?.0,
            OgmSource::Manual { mu, entries } => {
                let entries: Vec<(String, f64)> = entries.iter().map(|e| (e.column.clone(), e.beta)).collect();
                ogm::effects_manual(*mu, &entries, train.column_names()).map_err(fail)?
            }
            OgmSource::File { path, mu, provenance } => {
                let table = ogm::read_effects_csv(path, *mu, *provenance, 0.0, Link::Identity).map_err(fail)?;
                ogm::align_effects(&table, train.column_names()).map_err(fail)?
            }
        };
        spec.with_noise(o.noise_sd).map(|s| s.with_link(o.link)).map_err(fail)
    }

    /// Truth, frozen test outcome, replicate outcomes and quality checks.
    pub fn generate(&self) -> Result<(), PipelineError> {
        self.ensure(Stage::Ingest)?;
        if self.cfg.resampling.m == MSpec::Auto {
            self.ensure(Stage::SelectM)?;
        }
        self.stage(Stage::Generate, |m| {
            let train = self.train()?;
            let test = self.test()?;
            let (plan, m_source) = self.plan(m)?;
            plan.validate(train.n()).map_err(fail)?;

            let spec = self.effects(&train)?;
            ogm::write_effects(&spec, &self.out, EFFECTS).map_err(fail)?;

            // The evaluation target: noiseless on the held-out rows.
            let test_seed = derive_seed(plan.master_seed, streams::TEST_OUTCOME);
            let frozen = spec.clone().with_noise(0.0).map_err(fail)?;
            let y_test = ogm::generate_outcome(test.x(), &frozen, test_seed).map_err(fail)?;
            write_test_outcome(&self.out.join(TEST_OUTCOME), test.row_ids(), &y_test).map_err(fail)?;

            let width = resampler::stem_width(plan.n_replicates);
            let outcomes = par_map(1..plan.n_replicates + 1, |b| {
                let (rep, data, y) = replicate_outcome(&train, &plan, &spec, b).map_err(|e| (Some(b), e))?;
                if self.cfg.output.write_plasmodes {
                    let with_y = data.with_outcome(y.clone(), &self.cfg.input.outcome_column).map_err(|e| (Some(b), e.to_string()))?;
                    resampler::persist_replicate(&self.out, &rep, &with_y, width).map_err(|e| (Some(b), e.to_string()))?;
                }
                Ok::<_, Failure>(y)
            })?;

            let original = train.y().ok_or_else(|| fail("training data has no outcome"))?;
            let range = ogm::achievable_range(train.x(), &spec).map_err(fail)?;
            let quality = ogm::quality_check(original, &outcomes, self.cfg.quality.bins, self.cfg.quality.ks_threshold)
                .map_err(fail)?
                .with_predictor_range(range);
            write_json(&self.out.join(QUALITY), &quality).map_err(fail)?;

            m.plan = Some(PlanRecord {
                scheme: plan.scheme,
                m: plan.m,
                m_source,
                n_replicates: plan.n_replicates,
                master_seed: plan.master_seed,
                seed_rule: "replicate b seed = derive_seed(master_seed, b), SplitMix64 finalizer of master_seed + b * 0x9E3779B97F4A7C15"
                    .into(),
                replicate_seeds: (1..=plan.n_replicates)
                    .map(|b| derive_seed(plan.master_seed, b as u64))
                    .collect(),
            });
            m.ogm = Some(OgmRecord {
                provenance: spec.provenance,
                mu: spec.mu,
                noise_sd: spec.noise_sd,
                link: spec.link,
                sparsity: spec.sparsity(),
                outcome_seed_rule: format!(
                    "replicate outcome seed = derive_seed(replicate seed, {})",
                    streams::OUTCOME_NOISE
                ),
                test_outcome_seed: test_seed,
                predictor_range: range,
            });
            Ok(())
        })
    }

    /// Fits every model on every replicate and scores it against the truth.
    pub fn evaluate(&self) -> Result<EvaluationReport, PipelineError> {
        self.ensure(Stage::Generate)?;
        let report = self.stage(Stage::Evaluate, |m| {
            let train = self.train()?;
            let test = self.test()?;
            let (plan, _) = self.plan(m)?;
            let spec = ogm::read_effects(&self.out, EFFECTS).map_err(fail)?;
            let y_test = read_test_outcome(&self.out.join(TEST_OUTCOME)).map_err(fail)?;
            let models = &self.cfg.evaluation.models;

            let scores = par_map(1..plan.n_replicates + 1, |b| {
                let (rep, data, y) = replicate_outcome(&train, &plan, &spec, b).map_err(|e| (Some(b), e))?;
                let cv = self.cfg.evaluation.cv.spec(derive_seed(rep.seed, streams::MODEL_CV));
                models
                    .iter()
                    .map(|model| {
                        let fit = model
                            .fit(data.x(), &y, &cv)
                            .map_err(|e| (Some(b), format!("{}: {e}", model.as_str())))?;
                        let a = mab(&fit, &spec).map_err(|e| (Some(b), e.to_string()))?;
                        let s = msep(&fit, test.x(), &y_test).map_err(|e| (Some(b), e.to_string()))?;
                        Ok((a, s))
                    })
                    .collect::<Result<Vec<_>, Failure>>()
            })?;

            let conv = &self.cfg.convergence;
            let mut evals = Vec::with_capacity(models.len());
            for (k, &model) in models.iter().enumerate() {
                let mab_v: Vec<f64> = scores.iter().map(|s| s[k].0).collect();
                let msep_v: Vec<f64> = scores.iter().map(|s| s[k].1).collect();
                let (running_mab, c_mab) = convergence_trace(&mab_v, conv.window, conv.tol).map_err(fail)?;
                let (running_msep, c_msep) = convergence_trace(&msep_v, conv.window, conv.tol).map_err(fail)?;
                evals.push(ModelEvaluation {
                    summary: ModelSummary {
                        model,
                        mab_hat: aggregate(&mab_v).map_err(fail)?,
                        msep_hat: aggregate(&msep_v).map_err(fail)?,
                        converged_at_mab: c_mab,
                        converged_at_msep: c_msep,
                    },
                    mab: mab_v,
                    msep: msep_v,
                    running_mab,
                    running_msep,
                });
            }
            let summary = EvaluationSummary {
                n_replicates: plan.n_replicates,
                window: conv.window,
                tol: conv.tol,
                test_rows: test.n(),
                models: evals.iter().map(|e| e.summary.clone()).collect(),
            };
            fs::write(self.out.join(METRICS), metrics_csv(&evals)).map_err(fail)?;
            fs::write(self.out.join(CONVERGENCE), convergence_csv(&evals)).map_err(fail)?;
            write_json(&self.out.join(EVALUATION), &summary).map_err(fail)?;
            m.evaluation = Some(EvaluationRecord {
                models: models.clone(),
                cv_seed_rule: format!(
                    "replicate fold seed = derive_seed(replicate seed, {})",
                    streams::MODEL_CV
                ),
                window: conv.window,
                tol: conv.tol,
            });
            Ok((evals, summary))
        })?;
        Ok(EvaluationReport {
            models: report.0,
            summary: report.1,
            manifest: self.manifest(),
        })
    }

    /// Figures from the persisted artifacts; nothing is refitted.
    pub fn report(&self) -> Result<(), PipelineError> {
        self.ensure(Stage::Evaluate)?;
        self.stage(Stage::Report, |_| render_report(&self.out).map_err(fail))
    }

    /// All stages in order.
    pub fn run(&self) -> Result<EvaluationReport, PipelineError> {
        self.ingest()?;
        if self.cfg.resampling.m == MSpec::Auto {
            self.select_m()?;
        }
        self.generate()?;
        let report = self.evaluate()?;
        self.report()?;
        Ok(EvaluationReport {
            manifest: self.manifest(),
            ..report
        })
    }
}

pub fn run_pipeline(cfg: PipelineConfig) -> Result<EvaluationReport, PipelineError> {
    Pipeline::new(cfg)?.run()
}

/// Replicate `b`: its rows, covariates and artificial outcome.
fn replicate_outcome(
    train: &Dataset,
    plan: &ResamplingPlan,
    spec: &EffectSpec,
    b: usize,
) -> Result<(resampler::Replicate, Dataset, DVector<f64>), String> {
    let rep = resampler::replicate(plan, train.n(), b).map_err(|e| e.to_string())?;
    let data = resampler::materialize(train, &rep).map_err(|e| e.to_string())?;
    let y = ogm::generate_outcome(data.x(), spec, derive_seed(rep.seed, streams::OUTCOME_NOISE))
        .map_err(|e: OgmError| e.to_string())?;
    Ok((rep, data, y))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    fs::write(path, text + "\n")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_test_outcome(path: &Path, ids: &[String], y: &DVector<f64>) -> std::io::Result<()> {
    let mut s = format!("{},{TEST_OUTCOME_HEADER}\n", dataio::ID_HEADER);
    for (id, v) in ids.iter().zip(y.iter()) {
        s.push_str(&format!("{id},{v:?}\n"));
    }
    fs::write(path, s)
}

fn read_test_outcome(path: &Path) -> Result<DVector<f64>, DataError> {
    let ds = dataio::load_written(path, None)?;
    Ok(ds.x().column(0).into_owned())
}

fn metrics_csv(evals: &[ModelEvaluation]) -> String {
    let mut s = String::from("b,model,mab,msep\n");
    let n = evals.first().map_or(0, |e| e.mab.len());
    for b in 0..n {
        for e in evals {
            s.push_str(&format!(
                "{},{},{:?},{:?}\n",
                b + 1,
                e.summary.model.as_str(),
                e.mab[b],
                e.msep[b]
            ));
        }
    }
    s
}

fn convergence_csv(evals: &[ModelEvaluation]) -> String {
    let mut s = String::from("model,measure,k,running_mean\n");
    for e in evals {
        for (measure, trace) in [("mab", &e.running_mab), ("msep", &e.running_msep)] {
            for (k, v) in trace.iter().enumerate() {
                s.push_str(&format!("{},{measure},{},{v:?}\n", e.summary.model.as_str(), k + 1));
            }
        }
    }
    s
}

/// `(model, per-replicate MAB, per-replicate MSEP)` in replicate order.
pub type ModelScores = (String, Vec<f64>, Vec<f64>);

/// Per-replicate rows of `metrics.csv`, grouped by model in file order.
pub fn read_metrics(path: &Path) -> Result<Vec<ModelScores>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| e.to_string())?;
    let mut out: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let num = |i: usize| rec[i].parse::<f64>().map_err(|e| format!("metrics.csv: {e}"));
        let (a, s) = (num(2)?, num(3)?);
        match out.iter_mut().find(|(m, _, _)| m == &rec[1]) {
            Some(entry) => {
                entry.1.push(a);
                entry.2.push(s);
            }
            None => out.push((rec[1].to_string(), vec![a], vec![s])),
        }
    }
    Ok(out)
}

/// Renders `report/*.svg` from the files of a finished run directory.
pub fn render_report(out: &Path) -> Result<(), String> {
    let dir = out.join("report");
    fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let put = |name: &str, body: String| fs::write(dir.join(name), body).map_err(|e| e.to_string());

    if out.join(MSELECT_JSON).is_file() {
        let ms: MSelectionResult = read_json(&out.join(MSELECT_JSON))?;
        let points = ms
            .distances
            .iter()
            .enumerate()
            .map(|(j, d)| (ms.candidates[j] as f64, *d))
            .collect();
        let label = format!("m* = {}", ms.m_star);
        put(
            "mselect_distances.svg",
            svg::line_chart(
                "Distance between neighbouring resampling sizes",
                "m",
                "distance",
                &[svg::Series {
                    label: "d(m_j, m_j+1)".into(),
                    points,
                }],
                &[(ms.m_star as f64, label.as_str())],
            ),
        )?;
    }

    let quality: QualityReport = read_json(&out.join(QUALITY))?;
    let mut groups: Vec<(String, &[usize])> = vec![("original".into(), quality.original.histogram.as_slice())];
    let manifest: Manifest = read_json(&out.join(MANIFEST))?;
    let highlight = manifest
        .config
        .pointer("/quality/highlight")
        .and_then(|v| v.as_u64())
        .unwrap_or(3) as usize;
    for r in quality.replicates.iter().take(highlight) {
        groups.push((format!("plasmode {}", r.label), r.histogram.as_slice()));
    }
    let g: Vec<(&str, &[usize])> = groups.iter().map(|(l, h)| (l.as_str(), *h)).collect();
    put(
        "outcome_histograms.svg",
        svg::histogram_overlay("Original vs artificial outcomes", "outcome", &quality.edges, &g),
    )?;
    put(
        "outcome_pooled.svg",
        svg::histogram_overlay(
            "Original vs pooled artificial outcomes",
            "outcome",
            &quality.edges,
            &[
                ("original", &quality.original.histogram),
                ("pooled plasmodes", &quality.pooled.histogram),
            ],
        ),
    )?;

    let metrics = read_metrics(&out.join(METRICS))?;
    for (measure, pick) in [("mab", 1usize), ("msep", 2usize)] {
        let values: Vec<(&str, &[f64])> = metrics
            .iter()
            .map(|(m, a, s)| (m.as_str(), if pick == 1 { a.as_slice() } else { s.as_slice() }))
            .collect();
        put(
            &format!("boxplot_{measure}.svg"),
            svg::boxplot(&format!("{} per replicate", measure.to_uppercase()), measure, &values),
        )?;
    }

    let summary: EvaluationSummary = read_json(&out.join(EVALUATION))?;
    let mut r = csv::Reader::from_path(out.join(CONVERGENCE)).map_err(|e| e.to_string())?;
    // (model, measure, (k, running mean) points)
    #[allow(clippy::type_complexity)]
    let mut traces: Vec<(String, String, Vec<(f64, f64)>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let k: f64 = rec[2].parse().map_err(|e| format!("convergence.csv: {e}"))?;
        let v: f64 = rec[3].parse().map_err(|e| format!("convergence.csv: {e}"))?;
        match traces.iter_mut().find(|(m, s, _)| m == &rec[0] && s == &rec[1]) {
            Some(t) => t.2.push((k, v)),
            None => traces.push((rec[0].to_string(), rec[1].to_string(), vec![(k, v)])),
        }
    }
    for measure in ["mab", "msep"] {
        let series: Vec<svg::Series> = traces
            .iter()
            .filter(|(_, s, _)| s == measure)
            .map(|(m, _, pts)| svg::Series {
                label: m.clone(),
                points: pts.clone(),
            })
            .collect();
        let marks: Vec<(f64, String)> = summary
            .models
            .iter()
            .filter_map(|s| {
                let at = if measure == "mab" {
                    s.converged_at_mab
                } else {
                    s.converged_at_msep
                };
                at.map(|k| (k as f64, format!("{} stable", s.model.as_str())))
            })
            .collect();
        let marks: Vec<(f64, &str)> = marks.iter().map(|(k, l)| (*k, l.as_str())).collect();
        put(
            &format!("convergence_{measure}.svg"),
            svg::line_chart(
                &format!("Running mean of {} over replicates", measure.to_uppercase()),
                "number of plasmode datasets",
                measure,
                &series,
                &marks,
            ),
        )?;
    }
    Ok(())
}

/// Report stage for an existing run directory, using the configuration
/// recorded in its manifest.
pub fn report_dir(out: &Path) -> Result<(), PipelineError> {
    let manifest = Manifest::read(out)?;
    if !manifest.done(Stage::Evaluate) {
        return Err(PipelineError::Config(format!(
            "{} has no finished evaluation to report on",
            out.display()
        )));
    }
    render_report(out).map_err(|message| PipelineError::Stage {
        stage: Stage::Report,
        replicate: None,
        message,
        completed: manifest.stages_completed.clone(),
    })?;
    let mut manifest = manifest;
    manifest.mark(Stage::Report);
    write_json(&out.join(MANIFEST), &manifest).map_err(|e| PipelineError::Stage {
        stage: Stage::Report,
        replicate: None,
        message: e.to_string(),
        completed: manifest.stages_completed.clone(),
    })
}

/// Gaussian covariates with correlation `0.5^|i-j|` between columns and an
/// outcome `1 + x_1 − 0.5 x_2 + 0.25 x_3 + ε`, `ε ~ N(0, noise_sd²)`.
pub fn synthetic_dataset(n: usize, p: usize, noise_sd: f64, seed: u64) -> Result<Dataset, DataError> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = crate::rng::stream(seed);
    let mut x = DMatrix::zeros(n, p);
    let rho: f64 = 0.5;
    let scale = (1.0 - rho * rho).sqrt();
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = prev;
        for j in 1..p {
            let z: f64 = rng.sample(StandardNormal);
            prev = rho * prev + scale * z;
            x[(i, j)] = prev;
        }
    }
    let effects = [1.0, -0.5, 0.25];
    let y = DVector::from_fn(n, |i, _| {
        let signal: f64 = effects.iter().take(p).enumerate().map(|(j, b)| b * x[(i, j)]).sum();
        let e: f64 = rng.sample(StandardNormal);
        1.0 + signal + noise_sd * e
    });
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Dataset::from_matrix(names, x, Some(y), Some("y".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{Hyper, ModelKind};

    fn fit(mu: f64, beta: &[f64]) -> FitResult {
        FitResult {
            mu_hat: mu,
            beta_hat: DVector::from_row_slice(beta),
            hyper: Hyper::default(),
            model_kind: ModelKind::Ridge,
        }
    }

    fn truth(mu: f64, beta: &[f64]) -> EffectSpec {
        let names = (0..beta.len()).map(|j| format!("c{j}")).collect();
        EffectSpec::new(
            mu,
            names,
            DVector::from_row_slice(beta),
            Provenance::Manual,
            0.0,
            Link::Identity,
        )
        .unwrap()
    }

    #[test]
    fn mab_examples() {
        assert_eq!(mab(&fit(1.0, &[2.0, 3.0]), &truth(1.0, &[2.0, 3.0])).unwrap(), 0.0);
        assert_eq!(mab(&fit(1.0, &[1.0]), &truth(0.0, &[0.0])).unwrap(), 1.0);
        let a = mab(&fit(0.5, &[1.0, -2.0, 0.0]), &truth(0.0, &[0.0, 1.0, 4.0])).unwrap();
        let b = mab(&fit(0.5, &[0.0, 1.0, -2.0]), &truth(0.0, &[4.0, 0.0, 1.0])).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            mab(&fit(0.0, &[1.0]), &truth(0.0, &[1.0, 2.0])),
            Err(MeasureError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn msep_examples() {
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert_eq!(
            msep(&fit(3.0, &[0.0]), &x, &DVector::from_element(1, 1.0)).unwrap(),
            4.0
        );

        let y = DVector::from_vec(vec![1.0, 2.0, 4.0, 7.0]);
        let x = DMatrix::from_fn(4, 2, |i, j| (i * 3 + j) as f64);
        let ybar: f64 = y.mean();
        let var_ml = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / 4.0;
        assert!((msep(&fit(ybar, &[0.0, 0.0]), &x, &y).unwrap() - var_ml).abs() < 1e-12);

        let exact = fit(1.0, &[2.0, 0.0]);
        let y_exact = regress::predict(&exact, &x).unwrap();
        assert_eq!(msep(&exact, &x, &y_exact).unwrap(), 0.0);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&[2.5]).unwrap(), 2.5);
        assert_eq!(aggregate(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(aggregate(&[]), Err(MeasureError::EmptyInput));
        let v: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut keyed: Vec<(usize, f64)> = v.iter().copied().enumerate().rev().collect();
        keyed.sort_by_key(|(b, _)| *b);
        let resorted: Vec<f64> = keyed.into_iter().map(|(_, x)| x).collect();
        assert_eq!(
            aggregate(&resorted).unwrap().to_bits(),
            aggregate(&v).unwrap().to_bits()
        );
    }

    #[test]
    fn convergence_examples() {
        let (r, at) = convergence_trace(&[2.0; 10], 5, 1e-3).unwrap();
        assert_eq!(at, Some(5));
        assert!(r.iter().all(|&v| v == 2.0));

        let squares: Vec<f64> = (1..=200).map(|k| (k * k) as f64).collect();
        assert_eq!(convergence_trace(&squares, 5, 1e-3).unwrap().1, None);

        assert_eq!(
            convergence_trace(&[1.0], 1, 0.1),
            Err(MeasureError::BadWindow { w: 1, tol: 0.1 })
        );
        assert!(convergence_trace(&[1.0], 2, 0.0).is_err());
        // Fewer values than the window: never converged.
        assert_eq!(convergence_trace(&[1.0, 1.0], 3, 0.1).unwrap().1, None);
    }

    #[test]
    fn convergence_iid_brute_force() {
        use rand::Rng;
        let mut rng = crate::rng::stream(2024);
        let v: Vec<f64> = (0..2000).map(|_| 1.0 + rng.random::<f64>()).collect();
        let (running, at) = convergence_trace(&v, 50, 0.01).unwrap();
        for k in 1..=v.len() {
            let brute = v[..k].iter().fold(0.0, |a, b| a + b) / k as f64;
            assert_eq!(running[k - 1].to_bits(), brute.to_bits());
        }
        let k = at.expect("iid sequence with finite mean stabilizes");
        let window = &running[k - 50..k];
        let spread = window.iter().copied().fold(f64::MIN, f64::max) - window.iter().copied().fold(f64::MAX, f64::min);
        assert!(spread < 0.01 * running[k - 1]);
    }

    fn base_config(path: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(path, "y");
        cfg.resampling.m = MSpec::Fixed(10);
        cfg.resampling.n_replicates = 3;
        cfg.mselect = None;
        cfg
    }

    #[test]
    fn config_validation() {
        let p = Path::new("in.csv");
        assert!(base_config(p).validate().is_ok());
        let mut c = base_config(p);
        c.resampling.m = MSpec::Auto;
        assert!(c.validate().unwrap_err().is_validation());
        let mut c = base_config(p);
        c.resampling.n_replicates = 0;
        assert!(c.validate().is_err());
        let mut c = base_config(p);
        c.resampling.cluster_column = Some("site".into());
        assert!(c.validate().is_err());
        let mut c = base_config(p);
        c.evaluation.models = vec![ModelName::RidgeCv, ModelName::RidgeCv];
        assert!(c.validate().is_err());
        let mut c = base_config(p);
        c.convergence.window = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json() {
        let cfg = PipelineConfig::from_json(
            r#"{"input": {"path": "d.csv", "outcome_column": "y"},
                "resampling": {"m": "auto", "n_replicates": 20},
                "mselect": {"q": 0.9, "b": 20},
                "ogm": {"source": {"kind": "manual", "mu": 1.0, "entries": [{"column": "x1", "beta": 2.0}]}},
                "evaluation": {"models": ["lmm_reml", "lasso_cv"]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.resampling.m, MSpec::Auto);
        assert_eq!(cfg.mselect.as_ref().unwrap().draws, 20);
        assert_eq!(cfg.split.ratio, (2, 1));
        assert_eq!(cfg.evaluation.models, [ModelName::LmmReml, ModelName::LassoCv]);
        cfg.validate().unwrap();
        let back = PipelineConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);

        assert!(
            PipelineConfig::from_json(r#"{"input": {"path": "d.csv", "outcome_column": "y"}, "extra": 1}"#).is_err()
        );
        assert!(PipelineConfig::from_json(
            r#"{"input": {"path": "d.csv", "outcome_column": "y"}, "resampling": {"m": "big"}}"#
        )
        .is_err());
        assert!(PipelineConfig::from_json(
            r#"{"input": {"path": "d.csv", "outcome_column": "y"}, "resampling": {"mm": 3}}"#
        )
        .is_err());
    }

    #[test]
    fn missing_input_is_a_validation_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base_config(&dir.path().join("nope.csv"));
        cfg.output.dir = dir.path().join("out");
        let err = Pipeline::new(cfg).unwrap().run().unwrap_err();
        assert!(err.is_validation(), "{err}");
    }

    #[test]
    fn small_pipeline_runs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("d.csv");
        dataio::write_csv(&synthetic_dataset(60, 4, 0.5, 9).unwrap(), &input).unwrap();
        let mut cfg = base_config(&input);
        cfg.input.id_column = true;
        cfg.ogm.source = OgmSource::Manual {
            mu: 1.0,
            entries: vec![ManualEntry {
                column: "x1".into(),
                beta: 1.0,
            }],
        };
        cfg.evaluation.cv.folds = 3;
        cfg.convergence.window = 2;
        cfg.output.dir = dir.path().join("out");
        let report = run_pipeline(cfg).unwrap();
        assert_eq!(report.models.len(), 2);
        assert_eq!(report.summary.test_rows, 20);
        for e in &report.models {
            assert_eq!(e.mab.len(), 3);
            assert_eq!(e.summary.mab_hat, aggregate(&e.mab).unwrap());
        }
        assert_eq!(
            report.manifest.stages_completed,
            [Stage::Ingest, Stage::Generate, Stage::Evaluate, Stage::Report]
        );
        for f in [
            "metrics.csv",
            "convergence.csv",
            "quality.json",
            "effects.csv",
            "effects.json",
            "report/boxplot_mab.svg",
        ] {
            assert!(dir.path().join("out").join(f).is_file(), "{f}");
        }
    }

    #[test]
    fn synthetic_dataset_shape() {
        let ds = synthetic_dataset(30, 5, 0.0, 1).unwrap();
        assert_eq!((ds.n(), ds.p()), (30, 5));
        let y = ds.y().unwrap();
        let x = ds.x();
        assert!((y[3] - (1.0 + x[(3, 0)] - 0.5 * x[(3, 1)] + 0.25 * x[(3, 2)])).abs() < 1e-12);
    }
}
