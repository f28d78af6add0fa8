//! Seeded covariate resampling.
//!
//! A [`ResamplingPlan`] describes `N` replicates of size `m` drawn from the
//! rows of a source [`Dataset`]. Replicate `b` (1-based) draws its rows from
//! a stream seeded with `derive_seed(master_seed, b)`, so any subset of
//! replicates can be regenerated independently and in any order.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataio::{self, DataError, Dataset};
pub use crate::rng::derive_seed;

#[derive(Debug, Error)]
pub enum ResampleError {
    #[error("resampling size m = {m} exceeds n = {n} for a without-replacement scheme")]
    MGreaterThanN { m: usize, n: usize },
    #[error("invalid resampling plan: {0}")]
    InvalidPlan(String),
    #[error("row index {index} out of range for {n} rows")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("cluster column '{0}' declared: block/cluster resampling is not supported")]
    ClusteredData(String),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// i.i.d. uniform row draws; `m = n` is the ordinary bootstrap.
    WithReplacement,
    /// Distinct rows (subsampling); `m = n` yields a permutation.
    WithoutReplacement,
    /// Distinct rows; the unused rows are kept on the replicate for evaluation.
    SampleSplit,
}

impl Scheme {
    pub fn allows_duplicates(self) -> bool {
        matches!(self, Scheme::WithReplacement)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::WithReplacement => "with_replacement",
            Scheme::WithoutReplacement => "without_replacement",
            Scheme::SampleSplit => "sample_split",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingPlan {
    pub scheme: Scheme,
    pub m: usize,
    pub n_replicates: usize,
    pub master_seed: u64,
    /// Declaring a cluster column is rejected: observations must be independent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_column: Option<String>,
}

impl ResamplingPlan {
    pub fn new(scheme: Scheme, m: usize, n_replicates: usize, master_seed: u64) -> Self {
        Self {
            scheme,
            m,
            n_replicates,
            master_seed,
            cluster_column: None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), ResampleError> {
        if let Some(c) = &self.cluster_column {
            return Err(ResampleError::ClusteredData(c.clone()));
        }
        if self.n_replicates == 0 {
            return Err(ResampleError::InvalidPlan("number of replicates N must be >= 1".into()));
        }
        check_sizes(self.scheme, n, self.m)
    }
}

fn check_sizes(scheme: Scheme, n: usize, m: usize) -> Result<(), ResampleError> {
    if n == 0 || m == 0 {
        return Err(ResampleError::InvalidPlan(format!(
            "need n >= 1 and m >= 1, got n = {n}, m = {m}"
        )));
    }
    if !scheme.allows_duplicates() && m > n {
        return Err(ResampleError::MGreaterThanN { m, n });
    }
    Ok(())
}

/// One resampled covariate set, as row indices (0-based) into the source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replicate {
    /// 1-based replicate number.
    pub b: usize,
    pub row_indices: Vec<usize>,
    pub seed: u64,
    /// Rows not drawn, for [`Scheme::SampleSplit`] only; ascending.
    pub complement: Option<Vec<usize>>,
}

/// Draws `m` row indices in `0..n`.
///
/// With replacement: `m` i.i.d. uniform draws. Without replacement and
/// sample split: the first `m` entries of a seeded uniform permutation.
pub fn draw_indices(scheme: Scheme, n: usize, m: usize, seed: u64) -> Result<Vec<usize>, ResampleError> {
    check_sizes(scheme, n, m)?;
    let mut rng = crate::rng::stream(seed);
    Ok(match scheme {
        Scheme::WithReplacement => (0..m).map(|_| rng.random_range(0..n)).collect(),
        Scheme::WithoutReplacement | Scheme::SampleSplit => {
            let mut perm: Vec<usize> = (0..n).collect();
            let (head, _) = perm.partial_shuffle(&mut rng, m);
            head.to_vec()
        }
    })
}

/// Builds replicate `b` of `plan` for a source with `n` rows.
pub fn replicate(plan: &ResamplingPlan, n: usize, b: usize) -> Result<Replicate, ResampleError> {
    if b == 0 {
        return Err(ResampleError::InvalidPlan("replicate numbers start at 1".into()));
    }
    let seed = derive_seed(plan.master_seed, b as u64);
    let row_indices = draw_indices(plan.scheme, n, plan.m, seed)?;
    let complement = (plan.scheme == Scheme::SampleSplit).then(|| {
        let mut used = vec![false; n];
        for &i in &row_indices {
            used[i] = true;
        }
        (0..n).filter(|&i| !used[i]).collect()
    });
    Ok(Replicate {
        b,
        row_indices,
        seed,
        complement,
    })
}

/// Covariate rows of `rep`; the outcome is dropped and row ids become
/// `b<b>_r<source id>`.
pub fn materialize(ds: &Dataset, rep: &Replicate) -> Result<Dataset, ResampleError> {
    let n = ds.n();
    if let Some(&index) = rep.row_indices.iter().find(|&&i| i >= n) {
        return Err(ResampleError::IndexOutOfRange { index, n });
    }
    let x = ds.x().select_rows(&rep.row_indices);
    let ids = rep
        .row_indices
        .iter()
        .map(|&i| format!("b{}_r{}", rep.b, ds.row_ids()[i]))
        .collect();
    Ok(Dataset::new(ids, ds.column_names().to_vec(), x, None, None)?)
}

/// Lazily yields the `N` replicates of `plan` in order of `b`.
///
/// Each item is produced on demand, so only one replicate is held at a time.
pub fn generate_replicates<'a>(
    ds: &'a Dataset,
    plan: &'a ResamplingPlan,
) -> Result<impl Iterator<Item = Result<(Replicate, Dataset), ResampleError>> + 'a, ResampleError> {
    plan.validate(ds.n())?;
    Ok((1..=plan.n_replicates).map(move |b| {
        let rep = replicate(plan, ds.n(), b)?;
        let data = materialize(ds, &rep)?;
        Ok((rep, data))
    }))
}

/// Persists replicates as `plasmodes/b_XXXX.csv` and `indices/b_XXXX.txt`
/// (1-based source row numbers, one per line).
pub fn persist_replicate(out_dir: &Path, rep: &Replicate, data: &Dataset, width: usize) -> Result<(), ResampleError> {
    let plasmodes = out_dir.join("plasmodes");
    let indices = out_dir.join("indices");
    fs::create_dir_all(&plasmodes).map_err(DataError::Io)?;
    fs::create_dir_all(&indices).map_err(DataError::Io)?;
    let stem = replicate_stem(rep.b, width);
    dataio::write_csv(data, plasmodes.join(format!("{stem}.csv")))?;
    let mut body = String::with_capacity(rep.row_indices.len() * 6);
    for i in &rep.row_indices {
        body.push_str(&(i + 1).to_string());
        body.push('\n');
    }
    fs::write(indices.join(format!("{stem}.txt")), body).map_err(DataError::Io)?;
    Ok(())
}

/// `b_0001` style file stem; width grows with `N` (at least four digits).
pub fn replicate_stem(b: usize, width: usize) -> String {
    format!("b_{b:0width$}", width = width.max(4))
}

pub fn stem_width(n_replicates: usize) -> usize {
    n_replicates.to_string().len().max(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dataset(n: usize, p: usize) -> Dataset {
        let x = DMatrix::from_fn(n, p, |i, j| (i * p + j) as f64);
        let names = (0..p).map(|j| format!("c{j}")).collect();
        Dataset::from_matrix(names, x, None, None).unwrap()
    }

    #[test]
    fn exhaustive_draw_is_permutation() {
        let mut idx = draw_indices(Scheme::WithoutReplacement, 5, 5, 3).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn single_atom_with_replacement() {
        assert_eq!(draw_indices(Scheme::WithReplacement, 1, 4, 9).unwrap(), vec![0; 4]);
    }

    #[test]
    fn uniform_frequencies() {
        let idx = draw_indices(Scheme::WithReplacement, 5, 10_000, 2024).unwrap();
        let mut counts = [0usize; 5];
        for i in idx {
            counts[i] += 1;
        }
        for c in counts {
            assert!((1900..=2100).contains(&c), "count {c} outside 2000 ± 5%");
        }
    }

    #[test]
    fn without_replacement_rejects_large_m() {
        assert!(matches!(
            draw_indices(Scheme::WithoutReplacement, 3, 4, 0),
            Err(ResampleError::MGreaterThanN { m: 4, n: 3 })
        ));
        assert!(matches!(
            draw_indices(Scheme::SampleSplit, 3, 4, 0),
            Err(ResampleError::MGreaterThanN { .. })
        ));
        assert!(draw_indices(Scheme::WithReplacement, 3, 4, 0).is_ok());
    }

    #[test]
    fn materialize_identity_and_duplicates() {
        let ds = dataset(3, 2);
        let id = Replicate {
            b: 1,
            row_indices: vec![0, 1, 2],
            seed: 0,
            complement: None,
        };
        assert_eq!(materialize(&ds, &id).unwrap().x(), ds.x());
        let dup = Replicate {
            b: 2,
            row_indices: vec![1, 1],
            seed: 0,
            complement: None,
        };
        let out = materialize(&ds, &dup).unwrap();
        assert_eq!(out.n(), 2);
        assert_eq!(out.x().row(0), ds.x().row(1));
        assert_eq!(out.x().row(1), ds.x().row(1));
        assert!(out.y().is_none());
        assert_eq!(out.row_ids()[0], "b2_rr000002");
        let bad = Replicate {
            b: 3,
            row_indices: vec![3],
            seed: 0,
            complement: None,
        };
        assert!(matches!(
            materialize(&ds, &bad),
            Err(ResampleError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn stream_yields_n_replicates_of_size_m() {
        let ds = dataset(732, 3);
        let plan = ResamplingPlan::new(Scheme::WithReplacement, 711, 500, 1);
        let mut count = 0;
        for item in generate_replicates(&ds, &plan).unwrap() {
            let (rep, data) = item.unwrap();
            count += 1;
            assert_eq!(rep.b, count);
            assert_eq!(data.n(), 711);
        }
        assert_eq!(count, 500);
    }

    #[test]
    fn single_permuted_copy() {
        let ds = dataset(7, 2);
        let plan = ResamplingPlan::new(Scheme::WithoutReplacement, 7, 1, 77);
        let reps: Vec<_> = generate_replicates(&ds, &plan).unwrap().map(Result::unwrap).collect();
        assert_eq!(reps.len(), 1);
        let mut idx = reps[0].0.row_indices.clone();
        idx.sort_unstable();
        assert_eq!(idx, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn replicates_are_order_independent() {
        let plan = ResamplingPlan::new(Scheme::WithReplacement, 20, 10, 5);
        let forward: Vec<_> = (1..=10).map(|b| replicate(&plan, 30, b).unwrap()).collect();
        let backward: Vec<_> = (1..=10).rev().map(|b| replicate(&plan, 30, b).unwrap()).collect();
        for r in &forward {
            assert_eq!(Some(r), backward.iter().find(|x| x.b == r.b));
        }
    }

    #[test]
    fn sample_split_keeps_complement() {
        let plan = ResamplingPlan::new(Scheme::SampleSplit, 6, 1, 8);
        let rep = replicate(&plan, 10, 1).unwrap();
        let comp = rep.complement.clone().unwrap();
        assert_eq!(comp.len(), 4);
        assert!(comp.iter().all(|c| !rep.row_indices.contains(c)));
    }

    #[test]
    fn plan_validation() {
        let mut plan = ResamplingPlan::new(Scheme::WithReplacement, 5, 0, 1);
        assert!(plan.validate(10).is_err());
        plan.n_replicates = 2;
        plan.cluster_column = Some("clinic".into());
        assert!(matches!(plan.validate(10), Err(ResampleError::ClusteredData(_))));
    }

    #[test]
    fn persisted_layout_is_byte_identical_across_runs() {
        let ds = dataset(12, 2);
        let plan = ResamplingPlan::new(Scheme::WithReplacement, 8, 3, 4);
        let mut trees = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            for item in generate_replicates(&ds, &plan).unwrap() {
                let (rep, data) = item.unwrap();
                persist_replicate(dir.path(), &rep, &data, stem_width(plan.n_replicates)).unwrap();
            }
            let a = fs::read(dir.path().join("plasmodes/b_0002.csv")).unwrap();
            let b = fs::read(dir.path().join("indices/b_0003.txt")).unwrap();
            trees.push((a, b));
        }
        assert_eq!(trees[0], trees[1]);
        let idx = String::from_utf8(trees[0].1.clone()).unwrap();
        assert_eq!(idx.lines().count(), 8);
        assert!(idx.lines().all(|l| (1..=12).contains(&l.parse::<usize>().unwrap())));
    }
}
