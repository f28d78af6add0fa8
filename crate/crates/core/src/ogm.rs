//! Investigator-chosen truth: effect specifications, artificial outcome
//! generation and outcome quality checks.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::Dataset;
use crate::mselect::ks_distance;
use crate::regress::{self, CvSpec, FitError, FitResult};

#[derive(Debug, Error)]
pub enum OgmError {
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("column '{0}' given more than once")]
    DuplicateEntry(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dataset has no outcome to estimate effects from")]
    MissingOutcome,
    #[error("no plasmode outcomes to check")]
    EmptyInput,
    #[error("invalid effect specification: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("effects file: {0}")]
    Csv(#[from] csv::Error),
    #[error("effects sidecar: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    EstimatedLasso,
    EstimatedRidge,
    Manual,
    Literature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Identity,
    Logit,
}

/// The known truth of a plasmode study.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSpec {
    pub mu: f64,
    pub names: Vec<String>,
    pub beta: DVector<f64>,
    pub provenance: Provenance,
    pub noise_sd: f64,
    pub link: Link,
}

impl EffectSpec {
    pub fn new(
        mu: f64,
        names: Vec<String>,
        beta: DVector<f64>,
        provenance: Provenance,
        noise_sd: f64,
        link: Link,
    ) -> Result<Self, OgmError> {
        if names.len() != beta.len() {
            return Err(OgmError::DimensionMismatch(format!(
                "{} names for {} effects",
                names.len(),
                beta.len()
            )));
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(OgmError::Invalid(format!("noise_sd = {noise_sd}")));
        }
        if !mu.is_finite() || beta.iter().any(|b| !b.is_finite()) {
            return Err(OgmError::Invalid("non-finite effect".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(OgmError::DuplicateEntry(dup.clone()));
        }
        Ok(Self {
            mu,
            names,
            beta,
            provenance,
            noise_sd,
            link,
        })
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Result<Self, OgmError> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(OgmError::Invalid(format!("noise_sd = {noise_sd}")));
        }
        self.noise_sd = noise_sd;
        Ok(self)
    }

    pub fn with_link(mut self, link: Link) -> Self {
        self.link = link;
        self
    }

    /// Checks that the effect keys are exactly the dataset's columns, in order.
    pub fn check_columns(&self, columns: &[String]) -> Result<(), OgmError> {
        if self.names.as_slice() != columns {
            return Err(OgmError::DimensionMismatch(
                "effect names do not match the dataset columns".into(),
            ));
        }
        Ok(())
    }

    /// `mu + X beta`.
    pub fn linear_predictor(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, OgmError> {
        if x.ncols() != self.p() {
            return Err(OgmError::DimensionMismatch(format!(
                "{} columns for {} effects",
                x.ncols(),
                self.p()
            )));
        }
        let mut eta = x * &self.beta;
        eta.add_scalar_mut(self.mu);
        Ok(eta)
    }

    pub fn sparsity(&self) -> SparsitySummary {
        SparsitySummary::of(&self.beta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsitySummary {
    pub p: usize,
    pub nonzero: usize,
    pub zero: usize,
    pub percent_nonzero: f64,
    /// Over the nonzero effects; absent when all are zero.
    pub median_nonzero: Option<f64>,
    pub min_nonzero: Option<f64>,
    pub max_nonzero: Option<f64>,
}

impl SparsitySummary {
    pub fn of(beta: &DVector<f64>) -> Self {
        let mut nz: Vec<f64> = beta.iter().copied().filter(|b| *b != 0.0).collect();
        nz.sort_by(f64::total_cmp);
        let p = beta.len();
        let median = (!nz.is_empty()).then(|| {
            let k = nz.len();
            if k % 2 == 1 {
                nz[k / 2]
            } else {
                0.5 * (nz[k / 2 - 1] + nz[k / 2])
            }
        });
        Self {
            p,
            nonzero: nz.len(),
            zero: p - nz.len(),
            percent_nonzero: if p == 0 {
                0.0
            } else {
                100.0 * nz.len() as f64 / p as f64
            },
            median_nonzero: median,
            min_nonzero: nz.first().copied(),
            max_nonzero: nz.last().copied(),
        }
    }
}

fn from_fit(train: &Dataset, fit: FitResult, provenance: Provenance) -> Result<EffectSpec, OgmError> {
    EffectSpec::new(
        fit.mu_hat,
        train.column_names().to_vec(),
        fit.beta_hat,
        provenance,
        0.0,
        Link::Identity,
    )
}

/// Truth taken from a cross-validated LASSO fit to the original data.
pub fn effects_from_lasso(train: &Dataset, cv: &CvSpec) -> Result<(EffectSpec, SparsitySummary), OgmError> {
    let y = train.y().ok_or(OgmError::MissingOutcome)?;
    let fit = regress::fit_lasso_cv(train.x(), y, cv)?;
    let spec = from_fit(train, fit, Provenance::EstimatedLasso)?;
    let summary = spec.sparsity();
    Ok((spec, summary))
}

/// Truth taken from a cross-validated ridge fit (dense effects).
pub fn effects_from_ridge(train: &Dataset, cv: &CvSpec) -> Result<(EffectSpec, SparsitySummary), OgmError> {
    let y = train.y().ok_or(OgmError::MissingOutcome)?;
    let fit = regress::fit_ridge_cv(train.x(), y, cv)?;
    let spec = from_fit(train, fit, Provenance::EstimatedRidge)?;
    let summary = spec.sparsity();
    Ok((spec, summary))
}

/// Hand-set effects; columns not named get zero.
pub fn effects_manual(mu: f64, entries: &[(String, f64)], names: &[String]) -> Result<EffectSpec, OgmError> {
    let mut beta = DVector::zeros(names.len());
    let mut seen = HashSet::new();
    for (name, value) in entries {
        if !seen.insert(name.as_str()) {
            return Err(OgmError::DuplicateEntry(name.clone()));
        }
        let j = names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| OgmError::UnknownColumn(name.clone()))?;
        beta[j] = *value;
    }
    EffectSpec::new(mu, names.to_vec(), beta, Provenance::Manual, 0.0, Link::Identity)
}

/// Artificial outcomes for covariate rows `x`.
///
/// Identity link: `mu + X beta + noise_sd · z` with seeded standard normal
/// `z` (no draws at all when `noise_sd = 0`). Logit link: independent
/// Bernoulli draws with success probability `logistic(mu + x_iᵀ beta)`.
pub fn generate_outcome(x: &DMatrix<f64>, spec: &EffectSpec, seed: u64) -> Result<DVector<f64>, OgmError> {
    let eta = spec.linear_predictor(x)?;
    Ok(match spec.link {
        Link::Identity => {
            if spec.noise_sd == 0.0 {
                eta
            } else {
                let mut rng = crate::rng::stream(seed);
                eta.map(|e| e + spec.noise_sd * rng.sample::<f64, _>(StandardNormal))
            }
        }
        Link::Logit => {
            let mut rng = crate::rng::stream(seed);
            eta.map(|e| {
                let prob = 1.0 / (1.0 + (-e).exp());
                if rng.random::<f64>() < prob {
                    1.0
                } else {
                    0.0
                }
            })
        }
    })
}

/// Range of the linear predictor over the rows of `x`.
pub fn achievable_range(x: &DMatrix<f64>, spec: &EffectSpec) -> Result<(f64, f64), OgmError> {
    let eta = spec.linear_predictor(x)?;
    Ok((eta.min(), eta.max()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    mu: f64,
    noise_sd: f64,
    link: Link,
    provenance: Provenance,
}

/// Writes `<stem>.csv` (column_name, beta) and `<stem>.json`
/// ({mu, noise_sd, link, provenance}) into `dir`.
pub fn write_effects(spec: &EffectSpec, dir: &Path, stem: &str) -> Result<(), OgmError> {
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    w.write_record(["column_name", "beta"])?;
    for (name, b) in spec.names.iter().zip(spec.beta.iter()) {
        w.write_record([name.as_str(), &format!("{b:?}")])?;
    }
    w.flush()?;
    let side = Sidecar {
        mu: spec.mu,
        noise_sd: spec.noise_sd,
        link: spec.link,
        provenance: spec.provenance,
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&side)? + "\n",
    )?;
    Ok(())
}

pub fn read_effects(dir: &Path, stem: &str) -> Result<EffectSpec, OgmError> {
    let side: Sidecar = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    read_effects_csv(
        &dir.join(format!("{stem}.csv")),
        side.mu,
        side.provenance,
        side.noise_sd,
        side.link,
    )
}

/// Reads a `column_name,beta` table (for instance literature values).
pub fn read_effects_csv(
    path: &Path,
    mu: f64,
    provenance: Provenance,
    noise_sd: f64,
    link: Link,
) -> Result<EffectSpec, OgmError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut names = Vec::new();
    let mut beta = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(OgmError::Invalid(format!("expected 2 fields, got {}", rec.len())));
        }
        names.push(rec[0].to_string());
        beta.push(
            rec[1]
                .trim()
                .parse::<f64>()
                .map_err(|_| OgmError::Invalid(format!("bad effect value {:?}", &rec[1])))?,
        );
    }
    EffectSpec::new(mu, names, DVector::from_vec(beta), provenance, noise_sd, link)
}

/// Aligns a named effect table to `columns`; names absent from the table get
/// zero, names absent from `columns` are an error.
pub fn align_effects(spec: &EffectSpec, columns: &[String]) -> Result<EffectSpec, OgmError> {
    let entries: Vec<(String, f64)> = spec.names.iter().cloned().zip(spec.beta.iter().copied()).collect();
    let mut out = effects_manual(spec.mu, &entries, columns)?;
    out.provenance = spec.provenance;
    out.noise_sd = spec.noise_sd;
    out.link = spec.link;
    Ok(out)
}

// ---------------------------------------------------------------- quality

pub const DEFAULT_BINS: usize = 15;
pub const DEFAULT_KS_THRESHOLD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub histogram: Vec<usize>,
    pub ks_statistic: f64,
    /// Share of each class `(value, fraction)` when the outcome is binary.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub prevalence: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub range_within_original: bool,
    pub ks_below_threshold: bool,
    /// Pooled plasmode range inside the linear-predictor range over the
    /// original rows, when that range was supplied.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub range_within_predictor: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub bins: usize,
    pub edges: Vec<f64>,
    pub ks_threshold: f64,
    pub original: TargetSummary,
    pub replicates: Vec<TargetSummary>,
    pub pooled: TargetSummary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub predictor_range: Option<(f64, f64)>,
    pub verdict: Verdict,
}

impl QualityReport {
    pub fn with_predictor_range(mut self, range: (f64, f64)) -> Self {
        self.verdict.range_within_predictor = Some(self.pooled.min >= range.0 && self.pooled.max <= range.1);
        self.predictor_range = Some(range);
        self
    }
}

/// Summaries of the original and plasmode outcomes over shared bin edges
/// spanning the pooled range of all inputs.
pub fn quality_check(
    original_y: &DVector<f64>,
    plasmode_ys: &[DVector<f64>],
    bins: usize,
    ks_threshold: f64,
) -> Result<QualityReport, OgmError> {
    if plasmode_ys.is_empty() || original_y.is_empty() || plasmode_ys.iter().any(|y| y.is_empty()) {
        return Err(OgmError::EmptyInput);
    }
    if bins == 0 {
        return Err(OgmError::Invalid("bins must be >= 1".into()));
    }
    let all = plasmode_ys.iter().flat_map(|y| y.iter()).chain(original_y.iter());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let (lo, hi) = if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + width * k as f64 })
        .collect();

    let orig: Vec<f64> = original_y.iter().copied().collect();
    let binary = is_binary(&orig) && plasmode_ys.iter().all(|y| is_binary(y.as_slice()));
    let summarize = |label: String, v: &[f64]| -> Result<TargetSummary, OgmError> {
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let mut histogram = vec![0usize; bins];
        for &x in v {
            let k = (((x - lo) / (hi - lo)) * bins as f64).floor();
            histogram[(k.max(0.0) as usize).min(bins - 1)] += 1;
        }
        let prevalence = binary.then(|| {
            let ones = v.iter().filter(|&&x| x == 1.0).count() as f64 / n as f64;
            vec![(0.0, 1.0 - ones), (1.0, ones)]
        });
        Ok(TargetSummary {
            label,
            n,
            mean,
            sd,
            min: v.iter().copied().fold(f64::INFINITY, f64::min),
            max: v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            histogram,
            ks_statistic: ks_distance(v, &orig).map_err(|_| OgmError::EmptyInput)?,
            prevalence,
        })
    };

    let original = summarize("original".into(), &orig)?;
    let replicates = plasmode_ys
        .iter()
        .enumerate()
        .map(|(i, y)| summarize(format!("b{}", i + 1), y.as_slice()))
        .collect::<Result<Vec<_>, _>>()?;
    let pooled_values: Vec<f64> = plasmode_ys.iter().flat_map(|y| y.iter().copied()).collect();
    let pooled = summarize("pooled".into(), &pooled_values)?;
    let verdict = Verdict {
        range_within_original: pooled.min >= original.min && pooled.max <= original.max,
        ks_below_threshold: pooled.ks_statistic < ks_threshold,
        range_within_predictor: None,
    };
    Ok(QualityReport {
        bins,
        edges,
        ks_threshold,
        original,
        replicates,
        pooled,
        predictor_range: None,
        verdict,
    })
}

fn is_binary(v: &[f64]) -> bool {
    v.iter().all(|&x| x == 0.0 || x == 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("g{j}")).collect()
    }

    #[test]
    fn manual_effects() {
        let n = names(3);
        let empty = effects_manual(1.0, &[], &n).unwrap();
        assert!(empty.beta.iter().all(|&b| b == 0.0));
        assert_eq!(empty.provenance, Provenance::Manual);
        let one = effects_manual(0.0, &[("g1".into(), 2.5)], &n).unwrap();
        assert_eq!(one.beta.iter().filter(|&&b| b != 0.0).count(), 1);
        assert_eq!(one.beta[1], 2.5);
        assert!(matches!(
            effects_manual(0.0, &[("g1".into(), 1.0), ("g1".into(), 2.0)], &n),
            Err(OgmError::DuplicateEntry(_))
        ));
        assert!(matches!(
            effects_manual(0.0, &[("zz".into(), 1.0)], &n),
            Err(OgmError::UnknownColumn(_))
        ));
    }

    #[test]
    fn outcome_examples() {
        let spec = effects_manual(4.0, &[], &names(2)).unwrap();
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(generate_outcome(&x, &spec, 1).unwrap(), DVector::from_element(3, 4.0));

        let spec = effects_manual(0.0, &[("g0".into(), 3.0)], &names(1)).unwrap();
        let x = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
        assert_eq!(generate_outcome(&x, &spec, 1).unwrap().as_slice(), &[3.0, 6.0]);

        let sat = effects_manual(50.0, &[], &names(2)).unwrap().with_link(Link::Logit);
        let x = DMatrix::from_fn(100, 2, |i, j| (i + j) as f64 * 0.01);
        assert!(generate_outcome(&x, &sat, 7).unwrap().iter().all(|&v| v == 1.0));

        assert!(matches!(
            generate_outcome(&DMatrix::zeros(2, 3), &spec, 1),
            Err(OgmError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn noiseless_generation_is_affine() {
        let mut r = crate::rng::stream(5);
        let x = DMatrix::from_fn(20, 3, |_, _| r.sample::<f64, _>(StandardNormal));
        let base = effects_manual(1.0, &[("g0".into(), 0.5), ("g2".into(), -1.0)], &names(3)).unwrap();
        let a = generate_outcome(&x, &base, 1).unwrap();
        assert_eq!(a, generate_outcome(&x, &base, 99).unwrap());
        let mut scaled = base.clone();
        scaled.beta[2] *= 3.0;
        let b = generate_outcome(&x, &scaled, 1).unwrap();
        let diff = &b - &a;
        let want = x.column(2) * -2.0;
        assert!((diff - want).amax() < 1e-12);
    }

    #[test]
    fn noisy_and_logit_are_seeded() {
        let x = DMatrix::from_fn(50, 1, |i, _| i as f64 / 50.0);
        let spec = effects_manual(0.0, &[("g0".into(), 1.0)], &names(1))
            .unwrap()
            .with_noise(0.3)
            .unwrap();
        assert_eq!(
            generate_outcome(&x, &spec, 3).unwrap(),
            generate_outcome(&x, &spec, 3).unwrap()
        );
        assert_ne!(
            generate_outcome(&x, &spec, 3).unwrap(),
            generate_outcome(&x, &spec, 4).unwrap()
        );
        let logit = spec.clone().with_link(Link::Logit);
        let y = generate_outcome(&x, &logit, 8).unwrap();
        assert!(y.iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(y, generate_outcome(&x, &logit, 8).unwrap());
    }

    #[test]
    fn sparsity_counts() {
        let beta = DVector::from_vec(vec![0.0, -2.0, 0.0, 1.0, 3.0]);
        let s = SparsitySummary::of(&beta);
        assert_eq!((s.nonzero, s.zero), (3, 2));
        assert_eq!(s.percent_nonzero, 60.0);
        assert_eq!(s.median_nonzero, Some(1.0));
        assert_eq!((s.min_nonzero, s.max_nonzero), (Some(-2.0), Some(3.0)));
        let none = SparsitySummary::of(&DVector::zeros(4));
        assert_eq!(none.median_nonzero, None);
    }

    #[test]
    fn lasso_effects_on_pure_noise_vanish() {
        let mut r = crate::rng::stream(11);
        let x = DMatrix::from_fn(40, 6, |_, _| r.sample::<f64, _>(StandardNormal));
        let y = DVector::from_fn(40, |_, _| r.sample::<f64, _>(StandardNormal));
        let ds = Dataset::from_matrix(names(6), x, Some(y.clone()), Some("y".into())).unwrap();
        // A one-point grid at the penalty maximum forces the all-zero solution.
        let lmax = regress::Standardized::new(ds.x(), &y).lambda_max();
        let cv = CvSpec {
            folds: 4,
            lambda_grid: regress::LambdaGrid::Explicit { values: vec![lmax] },
            ..CvSpec::default()
        };
        let (spec, summary) = effects_from_lasso(&ds, &cv).unwrap();
        assert!(spec.beta.iter().all(|&b| b == 0.0));
        assert!((spec.mu - crate::linalg::mean(&y)).abs() < 1e-12);
        assert_eq!(summary.nonzero, 0);
        assert_eq!(summary, spec.sparsity());
        let unlabeled = Dataset::from_matrix(names(6), ds.x().clone(), None, None).unwrap();
        assert!(matches!(
            effects_from_lasso(&unlabeled, &cv),
            Err(OgmError::MissingOutcome)
        ));
    }

    #[test]
    fn effects_round_trip() {
        let spec = effects_manual(1.5, &[("g1".into(), -0.25)], &names(3))
            .unwrap()
            .with_noise(0.1)
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_effects(&spec, dir.path(), "effects").unwrap();
        assert_eq!(read_effects(dir.path(), "effects").unwrap(), spec);
    }

    #[test]
    fn quality_identity() {
        let y = DVector::from_vec(vec![1.0, 4.0, 2.0, 8.0]);
        let q = quality_check(&y, std::slice::from_ref(&y), 15, 0.2).unwrap();
        assert_eq!(q.pooled.ks_statistic, 0.0);
        assert_eq!(q.replicates[0].histogram, q.original.histogram);
        assert_eq!((q.pooled.mean, q.pooled.sd), (q.original.mean, q.original.sd));
        assert_eq!(q.original.histogram.iter().sum::<usize>(), 4);
        assert_eq!(q.edges.len(), 16);
        assert!(q.verdict.range_within_original && q.verdict.ks_below_threshold);
    }

    #[test]
    fn quality_constant_replicate_ks_brute_force() {
        let y = DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        let c = DVector::from_element(3, 2.5);
        let q = quality_check(&y, std::slice::from_ref(&c), 5, 0.2).unwrap();
        let cdf = |s: &[f64], t: f64| s.iter().filter(|&&v| v <= t).count() as f64 / s.len() as f64;
        let brute = y
            .iter()
            .chain(c.iter())
            .map(|&t| (cdf(y.as_slice(), t) - cdf(c.as_slice(), t)).abs())
            .fold(0.0, f64::max);
        assert_eq!(q.replicates[0].ks_statistic, brute);
        assert_eq!(brute, 0.6);
        assert!(!q.verdict.ks_below_threshold);
    }

    #[test]
    fn quality_binary_prevalence_and_errors() {
        let y = DVector::from_vec(vec![0.0, 1.0, 1.0, 1.0]);
        let rep = DVector::from_vec(vec![1.0, 0.0]);
        let q = quality_check(&y, &[rep], 2, 0.2).unwrap();
        assert_eq!(q.original.prevalence, Some(vec![(0.0, 0.25), (1.0, 0.75)]));
        assert!(matches!(quality_check(&y, &[], 2, 0.2), Err(OgmError::EmptyInput)));
    }

    #[test]
    fn range_verdicts() {
        let y = DVector::from_vec(vec![0.0, 10.0]);
        let inside = DVector::from_vec(vec![2.0, 8.0]);
        let outside = DVector::from_vec(vec![-1.0, 5.0]);
        assert!(
            quality_check(&y, std::slice::from_ref(&inside), 4, 0.2)
                .unwrap()
                .verdict
                .range_within_original
        );
        assert!(
            !quality_check(&y, &[outside], 4, 0.2)
                .unwrap()
                .verdict
                .range_within_original
        );
        let q = quality_check(&y, &[inside], 4, 0.2)
            .unwrap()
            .with_predictor_range((1.0, 9.0));
        assert_eq!(q.verdict.range_within_predictor, Some(true));
    }
}
