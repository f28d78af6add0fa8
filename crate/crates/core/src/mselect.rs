//! Adaptive choice of the resampling size `m`.
//!
//! Candidate sizes decay geometrically from `n`: `m_j = ceil(q^j · n)`. For
//! each candidate, `B` m-out-of-n bootstrap replicates are drawn and a scalar
//! statistic of the replicate covariates is recorded. Distances between the
//! empirical distributions of neighbouring candidates are compared and the
//! candidate where the distribution is most stable is chosen.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::covshrink::{self, CovError, NormKind};
use crate::dataio::Dataset;
use crate::linalg::column_means;
use crate::resampler::{self, derive_seed, ResampleError, Scheme};

#[derive(Debug, Error)]
pub enum MSelectError {
    #[error("m_floor = {floor} exceeds n = {n}")]
    FloorAboveN { floor: usize, n: usize },
    #[error("candidate sequence has a single element ({0}); nothing to compare")]
    SingleCandidate(usize),
    #[error("empty sample")]
    EmptySample,
    #[error("invalid m-selection configuration: {0}")]
    InvalidConfig(String),
    #[error("the size statistic is defined for m-out-of-n draws with replacement, not {0:?}")]
    UnsupportedScheme(Scheme),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Cov(#[from] CovError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Norm of the Ledoit-Wolf shrunken covariance.
    #[default]
    LwCovNorm,
    /// Norm of the plain sample covariance.
    SampleCovNorm,
    /// Euclidean norm of the column means.
    ColumnMeanNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    #[default]
    Wasserstein1,
    KolmogorovSmirnov,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> Result<f64, MSelectError> {
        match self {
            Distance::Wasserstein1 => wasserstein1(a, b),
            Distance::KolmogorovSmirnov => ks_distance(a, b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MSelectionConfig {
    pub q: f64,
    #[serde(rename = "b")]
    pub draws: usize,
    #[serde(default)]
    pub statistic: Statistic,
    #[serde(default)]
    pub distance: Distance,
    #[serde(default)]
    pub norm: NormKind,
    /// `None` means `max(10, ceil(0.01 n))`, capped at `n`.
    #[serde(default)]
    pub m_floor: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl Default for MSelectionConfig {
    fn default() -> Self {
        Self {
            q: 0.97,
            draws: 100,
            statistic: Statistic::LwCovNorm,
            distance: Distance::Wasserstein1,
            norm: NormKind::Frobenius,
            m_floor: None,
            seed: 0,
        }
    }
}

impl MSelectionConfig {
    pub fn validate(&self) -> Result<(), MSelectError> {
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(MSelectError::InvalidConfig(format!(
                "q = {} must lie in (0, 1)",
                self.q
            )));
        }
        if self.draws < 2 {
            return Err(MSelectError::InvalidConfig(format!("B = {} must be >= 2", self.draws)));
        }
        if matches!(self.m_floor, Some(f) if f < 2) {
            return Err(MSelectError::InvalidConfig("m_floor must be >= 2".into()));
        }
        Ok(())
    }

    pub fn floor_for(&self, n: usize) -> usize {
        self.m_floor.unwrap_or_else(|| default_floor(n))
    }
}

pub fn default_floor(n: usize) -> usize {
    let one_percent = (n as f64 * 0.01).ceil() as usize;
    one_percent.max(10).min(n.max(2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSelectionResult {
    pub m_star: usize,
    /// Strictly decreasing, first element `n`.
    pub candidates: Vec<usize>,
    /// `distances[j] = d(F_{m_j}, F_{m_{j+1}})`.
    pub distances: Vec<f64>,
    /// Per candidate, the statistic values sorted ascending.
    pub statistic_samples: Vec<Vec<f64>>,
    /// Per candidate, the statistic values in draw order (iteration 1..B).
    pub draws: Vec<Vec<f64>>,
}

/// `ceil(q^j · n)` for `j = 0, 1, ...`, without repeats, down to `m_floor`.
pub fn m_sequence(n: usize, q: f64, m_floor: usize) -> Result<Vec<usize>, MSelectError> {
    if m_floor < 2 {
        return Err(MSelectError::InvalidConfig("m_floor must be >= 2".into()));
    }
    if m_floor > n {
        return Err(MSelectError::FloorAboveN { floor: m_floor, n });
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(MSelectError::InvalidConfig(format!("q = {q} must lie in (0, 1)")));
    }
    let mut out = vec![n];
    let mut scale = 1.0_f64;
    loop {
        scale *= q;
        let raw = scale * n as f64;
        // Guard against q^j·n landing a hair above an integer.
        let m = (raw - raw * 1e-12).ceil() as usize;
        if m < m_floor {
            break;
        }
        if m < *out.last().unwrap() {
            out.push(m);
        }
    }
    Ok(out)
}

/// Statistic of one covariate sample.
pub fn statistic_value(x: &DMatrix<f64>, statistic: Statistic, norm: NormKind) -> Result<f64, MSelectError> {
    Ok(match statistic {
        Statistic::LwCovNorm => covshrink::ledoit_wolf_norm(x, norm)?.0,
        Statistic::SampleCovNorm => covshrink::matrix_l2_norm(&covshrink::sample_covariance(x)?, norm)?,
        Statistic::ColumnMeanNorm => column_means(x).norm(),
    })
}

/// Statistic values of `draws` m-out-of-n replicates, in draw order. Draw
/// `i` (1-based) uses rows from `derive_seed(seed, i)`.
pub fn statistic_draws(
    ds: &Dataset,
    scheme: Scheme,
    m: usize,
    draws: usize,
    statistic: Statistic,
    norm: NormKind,
    seed: u64,
) -> Result<Vec<f64>, MSelectError> {
    if scheme != Scheme::WithReplacement {
        return Err(MSelectError::UnsupportedScheme(scheme));
    }
    let one = |i: usize| -> Result<f64, MSelectError> {
        let idx = resampler::draw_indices(scheme, ds.n(), m, derive_seed(seed, i as u64))?;
        statistic_value(&ds.x().select_rows(&idx), statistic, norm)
    };
    par_map(1..draws + 1, one)
}

/// Sorted statistic values of `draws` m-out-of-n replicates.
pub fn statistic_distribution(
    ds: &Dataset,
    scheme: Scheme,
    m: usize,
    draws: usize,
    statistic: Statistic,
    norm: NormKind,
    seed: u64,
) -> Result<Vec<f64>, MSelectError> {
    let mut v = statistic_draws(ds, scheme, m, draws, statistic, norm, seed)?;
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// 1-Wasserstein distance between two empirical distributions given as
/// ascending samples.
///
/// Integrates `|F_a⁻¹(u) − F_b⁻¹(u)|` over `u ∈ (0, 1)` by merging the
/// breakpoints `i/len(a)` and `k/len(b)` of the two quantile step
/// functions. For equal lengths this is the mean absolute difference of
/// order statistics.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> Result<f64, MSelectError> {
    if a.is_empty() || b.is_empty() {
        return Err(MSelectError::EmptySample);
    }
    let (na, nb) = (a.len(), b.len());
    if na == nb {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        return Ok(s / na as f64);
    }
    // Walk the merged grid in integer units of 1 / (na·nb).
    let (mut i, mut k) = (0usize, 0usize);
    let (mut ua, mut ub) = (nb, na);
    let mut pos = 0usize;
    let mut acc = 0.0;
    while i < na && k < nb {
        let next = ua.min(ub);
        acc += (next - pos) as f64 * (a[i] - b[k]).abs();
        pos = next;
        if ua == next {
            i += 1;
            ua += nb;
        }
        if ub == next {
            k += 1;
            ub += na;
        }
    }
    Ok(acc / (na * nb) as f64)
}

/// Kolmogorov-Smirnov distance `sup_t |F_a(t) − F_b(t)|`. Inputs need not
/// be sorted.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64, MSelectError> {
    if a.is_empty() || b.is_empty() {
        return Err(MSelectError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut k) = (0usize, 0usize);
    let mut best = 0.0_f64;
    while i < a.len() || k < b.len() {
        let t = match (a.get(i), b.get(k)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while k < b.len() && b[k] <= t {
            k += 1;
        }
        best = best.max((i as f64 / na - k as f64 / nb).abs());
    }
    Ok(best)
}

/// Runs the stability rule on the rows of `ds`.
///
/// Candidate `j` (0-based) draws with seed `derive_seed(cfg.seed, j + 1)`.
/// The chosen size is `m_j` for the pair `(m_j, m_{j+1})` of minimal
/// distance; ties go to the larger `m`.
pub fn select_m(ds: &Dataset, cfg: &MSelectionConfig) -> Result<MSelectionResult, MSelectError> {
    cfg.validate()?;
    let n = ds.n();
    let candidates = m_sequence(n, cfg.q, cfg.floor_for(n))?;
    if candidates.len() < 2 {
        return Err(MSelectError::SingleCandidate(candidates[0]));
    }
    let draws = par_map(0..candidates.len(), |j| {
        statistic_draws(
            ds,
            Scheme::WithReplacement,
            candidates[j],
            cfg.draws,
            cfg.statistic,
            cfg.norm,
            candidate_seed(cfg.seed, j),
        )
    })?;
    let statistic_samples: Vec<Vec<f64>> = draws
        .iter()
        .map(|d| {
            let mut s = d.clone();
            s.sort_by(f64::total_cmp);
            s
        })
        .collect();
    let distances = statistic_samples
        .windows(2)
        .map(|w| cfg.distance.eval(&w[0], &w[1]))
        .collect::<Result<Vec<_>, _>>()?;
    let m_star = candidates[argmin_first(&distances)];
    Ok(MSelectionResult {
        m_star,
        candidates,
        distances,
        statistic_samples,
        draws,
    })
}

pub fn candidate_seed(seed: u64, j: usize) -> u64 {
    derive_seed(seed, j as u64 + 1)
}

/// Index of the smallest value, first occurrence on ties.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// Writes `mselect_trace.csv` (m, iteration, statistic_value) and
/// `mselect_summary.csv` (m_lo, m_hi, distance).
pub fn write_trace(result: &MSelectionResult, out_dir: &Path) -> Result<(), MSelectError> {
    let mut trace = String::from("m,iteration,statistic_value\n");
    for (m, draws) in result.candidates.iter().zip(&result.draws) {
        for (i, v) in draws.iter().enumerate() {
            writeln!(trace, "{m},{},{v:?}", i + 1).unwrap();
        }
    }
    fs::write(out_dir.join("mselect_trace.csv"), trace)?;
    let mut summary = String::from("m_lo,m_hi,distance\n");
    for (j, d) in result.distances.iter().enumerate() {
        writeln!(summary, "{},{},{d:?}", result.candidates[j + 1], result.candidates[j]).unwrap();
    }
    fs::write(out_dir.join("mselect_summary.csv"), summary)?;
    Ok(())
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T, E, F>(range: std::ops::Range<usize>, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    use rayon::prelude::*;
    range.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, E, F>(range: std::ops::Range<usize>, f: F) -> Result<Vec<T>, E>
where
    F: Fn(usize) -> Result<T, E>,
{
    range.map(f).collect()
}
