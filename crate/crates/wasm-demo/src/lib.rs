//! Browser bindings for three small plasmode experiments on synthetic data.
//!
//! Each exported function returns a JSON string; the `*_report` functions
//! underneath are plain Rust so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use plasmode::dataio::{split_train_test, SplitResult};
use plasmode::harness::{aggregate, convergence_trace, mab, msep, synthetic_dataset, ModelName};
use plasmode::mselect::{select_m, MSelectionConfig};
use plasmode::ogm::{self, EffectSpec, SparsitySummary};
use plasmode::regress::CvSpec;
use plasmode::resampler::{derive_seed, generate_replicates, ResamplingPlan, Scheme};
use plasmode::rng::streams;

const FOLDS: usize = 5;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn split(n: usize, p: usize, seed: u64) -> Result<SplitResult, String> {
    let ds = synthetic_dataset(n, p, 1.0, seed).map_err(err)?;
    split_train_test(&ds, (2, 1), seed).map_err(err)
}

fn lasso_truth(train: &plasmode::dataio::Dataset, seed: u64) -> Result<(EffectSpec, SparsitySummary), String> {
    let cv = CvSpec {
        folds: FOLDS,
        seed,
        ..Default::default()
    };
    ogm::effects_from_lasso(train, &cv).map_err(err)
}

#[derive(Debug, Serialize)]
pub struct MCurve {
    pub n: usize,
    pub candidates: Vec<usize>,
    pub distances: Vec<f64>,
    pub m_star: usize,
}

pub fn mselect_report(n: usize, p: usize, q: f64, draws: usize, seed: u64) -> Result<MCurve, String> {
    let s = split(n, p, seed)?;
    let cfg = MSelectionConfig {
        q,
        draws,
        seed,
        ..Default::default()
    };
    let r = select_m(&s.train, &cfg).map_err(err)?;
    Ok(MCurve {
        n: s.train.n(),
        candidates: r.candidates,
        distances: r.distances,
        m_star: r.m_star,
    })
}

#[derive(Debug, Serialize)]
pub struct Quality {
    pub edges: Vec<f64>,
    pub original: Vec<usize>,
    pub pooled: Vec<usize>,
    /// Histograms of the first few replicates.
    pub replicates: Vec<Vec<usize>>,
    pub ks_pooled: f64,
    pub ks_threshold: f64,
    pub range_within_original: bool,
    pub range_within_predictor: Option<bool>,
    pub nonzero_effects: usize,
    pub p: usize,
}

pub fn quality_report(
    n: usize,
    p: usize,
    m: usize,
    replicates: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Quality, String> {
    let s = split(n, p, seed)?;
    let (spec, sparsity) = lasso_truth(&s.train, seed)?;
    let spec = spec.with_noise(noise_sd).map_err(err)?;
    let plan = ResamplingPlan::new(Scheme::WithReplacement, m, replicates, seed);
    let mut ys = Vec::with_capacity(replicates);
    for item in generate_replicates(&s.train, &plan).map_err(err)? {
        let (rep, data) = item.map_err(err)?;
        ys.push(ogm::generate_outcome(data.x(), &spec, derive_seed(rep.seed, streams::OUTCOME_NOISE)).map_err(err)?);
    }
    let y = s.train.y().ok_or("training data has no outcome")?;
    let range = ogm::achievable_range(s.train.x(), &spec).map_err(err)?;
    let q = ogm::quality_check(y, &ys, ogm::DEFAULT_BINS, ogm::DEFAULT_KS_THRESHOLD)
        .map_err(err)?
        .with_predictor_range(range);
    Ok(Quality {
        edges: q.edges,
        original: q.original.histogram,
        pooled: q.pooled.histogram,
        replicates: q.replicates.into_iter().take(3).map(|r| r.histogram).collect(),
        ks_pooled: q.pooled.ks_statistic,
        ks_threshold: q.ks_threshold,
        range_within_original: q.verdict.range_within_original,
        range_within_predictor: q.verdict.range_within_predictor,
        nonzero_effects: sparsity.nonzero,
        p: sparsity.p,
    })
}

#[derive(Debug, Serialize)]
pub struct ModelCurve {
    pub model: &'static str,
    pub mab: Vec<f64>,
    pub msep: Vec<f64>,
    pub running_mab: Vec<f64>,
    pub running_msep: Vec<f64>,
    pub mab_hat: f64,
    pub msep_hat: f64,
    pub converged_at_mab: Option<usize>,
    pub converged_at_msep: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Convergence {
    pub window: usize,
    pub tol: f64,
    pub models: Vec<ModelCurve>,
}

#[allow(clippy::too_many_arguments)]
pub fn convergence_report(
    n: usize,
    p: usize,
    m: usize,
    replicates: usize,
    noise_sd: f64,
    window: usize,
    tol: f64,
    seed: u64,
) -> Result<Convergence, String> {
    let s = split(n, p, seed)?;
    let (spec, _) = lasso_truth(&s.train, seed)?;
    let spec = spec.with_noise(noise_sd).map_err(err)?;
    let y_test = spec.linear_predictor(s.test.x()).map_err(err)?;
    let models = [ModelName::RidgeCv, ModelName::LmmReml];
    let mut scores = vec![(Vec::new(), Vec::new()); models.len()];
    let plan = ResamplingPlan::new(Scheme::WithReplacement, m, replicates, seed);
    for item in generate_replicates(&s.train, &plan).map_err(err)? {
        let (rep, data) = item.map_err(err)?;
        let y = ogm::generate_outcome(data.x(), &spec, derive_seed(rep.seed, streams::OUTCOME_NOISE)).map_err(err)?;
        let cv = CvSpec {
            folds: FOLDS,
            seed: derive_seed(rep.seed, streams::MODEL_CV),
            ..Default::default()
        };
        for (k, model) in models.iter().enumerate() {
            let fit = model.fit(data.x(), &y, &cv).map_err(err)?;
            scores[k].0.push(mab(&fit, &spec).map_err(err)?);
            scores[k].1.push(msep(&fit, s.test.x(), &y_test).map_err(err)?);
        }
    }
    let mut out = Vec::new();
    for (model, (mab_v, msep_v)) in models.iter().zip(scores) {
        let (running_mab, converged_at_mab) = convergence_trace(&mab_v, window, tol).map_err(err)?;
        let (running_msep, converged_at_msep) = convergence_trace(&msep_v, window, tol).map_err(err)?;
        out.push(ModelCurve {
            model: model.as_str(),
            mab_hat: aggregate(&mab_v).map_err(err)?,
            msep_hat: aggregate(&msep_v).map_err(err)?,
            mab: mab_v,
            msep: msep_v,
            running_mab,
            running_msep,
            converged_at_mab,
            converged_at_msep,
        });
    }
    Ok(Convergence {
        window,
        tol,
        models: out,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Distances between neighbouring candidate sizes and the chosen `m`.
#[wasm_bindgen]
pub fn mselect_curve(n: usize, p: usize, q: f64, draws: usize, seed: u64) -> Result<String, JsError> {
    to_js(mselect_report(n, p, q, draws, seed))
}

/// Histograms of the original and plasmode outcomes.
#[wasm_bindgen]
pub fn outcome_quality(
    n: usize,
    p: usize,
    m: usize,
    replicates: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<String, JsError> {
    to_js(quality_report(n, p, m, replicates, noise_sd, seed))
}

/// Per-replicate scores and running means for ridge and the mixed model.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn convergence(
    n: usize,
    p: usize,
    m: usize,
    replicates: usize,
    noise_sd: f64,
    window: usize,
    tol: f64,
    seed: u64,
) -> Result<String, JsError> {
    to_js(convergence_report(n, p, m, replicates, noise_sd, window, tol, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mselect_picks_a_candidate() {
        let r = mselect_report(150, 4, 0.9, 20, 1).unwrap();
        assert_eq!(r.candidates[0], r.n);
        assert_eq!(r.distances.len(), r.candidates.len() - 1);
        assert!(r.candidates.contains(&r.m_star));
    }

    #[test]
    fn quality_histograms_cover_all_rows() {
        let q = quality_report(150, 5, 60, 10, 0.5, 2).unwrap();
        assert_eq!(q.original.iter().sum::<usize>(), 100);
        assert_eq!(q.pooled.iter().sum::<usize>(), 600);
        assert_eq!(q.replicates.len(), 3);
        assert_eq!(q.edges.len(), q.original.len() + 1);
    }

    #[test]
    fn convergence_traces_are_running_means() {
        let c = convergence_report(120, 4, 50, 12, 1.0, 4, 0.05, 3).unwrap();
        assert_eq!(c.models.len(), 2);
        for m in &c.models {
            assert_eq!(m.running_msep.len(), 12);
            let mean = m.msep.iter().sum::<f64>() / 12.0;
            assert!((m.running_msep[11] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
        }
    }

    #[test]
    fn bad_input_is_an_error_not_a_panic() {
        assert!(quality_report(150, 5, 0, 10, 0.5, 2).is_err());
        assert!(mselect_report(150, 4, 1.5, 20, 1).is_err());
    }
}
