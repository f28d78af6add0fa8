//! Linear fitters used both to build outcome-generating models and as the
//! methods under comparison.
//!
//! All three models share `y = μ1 + Xβ + ε` with an unpenalised intercept:
//!
//! * ridge: `min ‖y − μ1 − Xβ‖² + λ‖β‖²` on the original covariate scale;
//! * LASSO: `min (1/2m)‖y − μ1 − Xβ‖² + λ‖β̃‖₁` over standardized columns,
//!   coefficients reported on the original scale;
//! * variance-components mixed model: `β ~ N(0, σ_β² I)`,
//!   `ε ~ N(0, σ_ε² I)`, variances by REML, `β̂` the BLUP.
//!
//! At a fixed ratio `γ = σ_ε²/σ_β²` the BLUP coincides with the ridge
//! solution at `λ = γ` (Henderson's equations are the ridge normal
//! equations), which the test-suite checks across the two code paths.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{center_columns, mean, sorted_eigen, KernelSpectrum};

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("normal equations are singular (lambda = 0 with collinear columns)")]
    SingularSystem,
    #[error("coordinate descent did not converge in {max_iter} sweeps (last max change {max_change:e})")]
    NoConvergence { max_iter: usize, max_change: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("kernel X Xᵀ is numerically zero")]
    DegenerateKernel,
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lasso,
    Ridge,
    Lmm,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Hyper {
    pub lambda: Option<f64>,
    pub sigma_beta2: Option<f64>,
    pub sigma_eps2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub mu_hat: f64,
    pub beta_hat: DVector<f64>,
    pub hyper: Hyper,
    pub model_kind: ModelKind,
}

/// Penalty grid for cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LambdaGrid {
    /// Log-spaced from a data-derived maximum down to `min_ratio` times it.
    Auto { n_lambda: usize, min_ratio: f64 },
    /// Strictly decreasing positive values.
    Explicit { values: Vec<f64> },
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            n_lambda: 100,
            min_ratio: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    MinCvError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSpec {
    pub folds: usize,
    pub lambda_grid: LambdaGrid,
    pub seed: u64,
    #[serde(default)]
    pub selection: Selection,
}

impl Default for CvSpec {
    fn default() -> Self {
        Self {
            folds: 10,
            lambda_grid: LambdaGrid::default(),
            seed: 0,
            selection: Selection::MinCvError,
        }
    }
}

impl CvSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn resolve(&self, m: usize, lambda_max: impl FnOnce() -> f64) -> Result<Vec<f64>, FitError> {
        if self.folds < 2 || self.folds > m {
            return Err(FitError::Invalid(format!("{} folds for {m} rows", self.folds)));
        }
        match &self.lambda_grid {
            LambdaGrid::Explicit { values } => {
                if values.is_empty()
                    || values.iter().any(|v| !(v.is_finite() && *v > 0.0))
                    || values.windows(2).any(|w| w[0] <= w[1])
                {
                    return Err(FitError::Invalid(
                        "lambda grid must be positive and strictly decreasing".into(),
                    ));
                }
                Ok(values.clone())
            }
            LambdaGrid::Auto { n_lambda, min_ratio } => {
                if *n_lambda == 0 || !(*min_ratio > 0.0 && *min_ratio < 1.0) {
                    return Err(FitError::Invalid(
                        "auto grid needs n_lambda >= 1 and min_ratio in (0, 1)".into(),
                    ));
                }
                let top = lambda_max();
                let top = if top > 0.0 { top } else { 1.0 };
                Ok(log_grid(top, top * min_ratio, *n_lambda))
            }
        }
    }
}

/// `n` log-spaced values from `hi` down to `lo`.
pub fn log_grid(hi: f64, lo: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn check_xy(x: &DMatrix<f64>, y: &DVector<f64>, min_rows: usize) -> Result<(), FitError> {
    if x.nrows() != y.len() {
        return Err(FitError::DimensionMismatch(format!(
            "{} rows in X, {} outcomes",
            x.nrows(),
            y.len()
        )));
    }
    if x.nrows() < min_rows {
        return Err(FitError::TooFewRows {
            needed: min_rows,
            found: x.nrows(),
        });
    }
    if x.ncols() == 0 {
        return Err(FitError::Invalid("no covariates".into()));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(FitError::Invalid("non-finite input".into()));
    }
    Ok(())
}

/// `μ̂ + X_new β̂`.
pub fn predict(fit: &FitResult, x_new: &DMatrix<f64>) -> Result<DVector<f64>, FitError> {
    if x_new.ncols() != fit.beta_hat.len() {
        return Err(FitError::DimensionMismatch(format!(
            "{} columns for {} coefficients",
            x_new.ncols(),
            fit.beta_hat.len()
        )));
    }
    let mut out = x_new * &fit.beta_hat;
    out.add_scalar_mut(fit.mu_hat);
    Ok(out)
}

// ---------------------------------------------------------------- ridge

/// Ridge regression by a direct Cholesky solve of the primal (`p ≤ m`) or
/// dual (`p > m`) normal equations of the centered problem.
pub fn fit_ridge(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FitResult, FitError> {
    check_xy(x, y, 2)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FitError::Invalid(format!("lambda = {lambda}")));
    }
    let (xc, means) = center_columns(x);
    let ybar = mean(y);
    let yc = y.add_scalar(-ybar);
    let (m, p) = xc.shape();

    let beta = if p <= m {
        let mut a = xc.tr_mul(&xc);
        if lambda == 0.0 {
            ensure_nonsingular(&a)?;
        }
        for i in 0..p {
            a[(i, i)] += lambda;
        }
        let rhs = xc.tr_mul(&yc);
        a.cholesky().ok_or(FitError::SingularSystem)?.solve(&rhs)
    } else {
        let mut k = &xc * xc.transpose();
        if lambda == 0.0 {
            // Centering leaves 1 in the kernel null space: the dual is singular.
            ensure_nonsingular(&k)?;
        }
        for i in 0..m {
            k[(i, i)] += lambda;
        }
        let alpha = k.cholesky().ok_or(FitError::SingularSystem)?.solve(&yc);
        xc.tr_mul(&alpha)
    };
    Ok(FitResult {
        mu_hat: ybar - means.dot(&beta),
        beta_hat: beta,
        hyper: Hyper {
            lambda: Some(lambda),
            ..Default::default()
        },
        model_kind: ModelKind::Ridge,
    })
}

fn ensure_nonsingular(a: &DMatrix<f64>) -> Result<(), FitError> {
    let (vals, _) = sorted_eigen(a.clone());
    let top = vals[0].abs();
    let low = vals[vals.len() - 1];
    if top == 0.0 || low <= top * a.nrows() as f64 * 1e-13 {
        return Err(FitError::SingularSystem);
    }
    Ok(())
}

/// Default top of the ridge grid: `10 · tr(X_cᵀ X_c)`, at which every
/// direction is shrunk by at least a factor 11.
pub fn ridge_lambda_max(x: &DMatrix<f64>) -> f64 {
    let (xc, _) = center_columns(x);
    10.0 * xc.norm_squared()
}

/// Ridge with `λ` chosen by K-fold cross-validation (minimum mean held-out
/// squared error; ties favour the larger penalty), refitted on all rows.
pub fn fit_ridge_cv(x: &DMatrix<f64>, y: &DVector<f64>, cv: &CvSpec) -> Result<FitResult, FitError> {
    check_xy(x, y, 2)?;
    let grid = cv.resolve(x.nrows(), || ridge_lambda_max(x))?;
    let errors = ridge_cv_errors(x, y, &grid, cv)?;
    let best = argmin_first(&errors);
    fit_ridge(x, y, grid[best])
}

/// Mean held-out squared error for every grid value.
pub fn ridge_cv_errors(x: &DMatrix<f64>, y: &DVector<f64>, grid: &[f64], cv: &CvSpec) -> Result<Vec<f64>, FitError> {
    let m = x.nrows();
    let folds = fold_assignment(m, cv.folds, cv.seed);
    let mut sse = vec![0.0; grid.len()];
    for f in 0..cv.folds {
        let (train, test) = split_fold(&folds, f);
        let xt = x.select_rows(&train);
        let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let (xc, means) = center_columns(&xt);
        let ybar = mean(&yt);
        let yc = yt.add_scalar(-ybar);
        let spec = KernelSpectrum::of(&xc);

        let mut xte = x.select_rows(&test);
        for (mut col, mu) in xte.column_iter_mut().zip(means.iter()) {
            col.add_scalar_mut(-mu);
        }
        // ŷ(λ) = ȳ + X̃_te X_cᵀ U (Λ + λ)⁻¹ Uᵀ y_c
        let tu = (&xte * xc.transpose()) * &spec.basis;
        let uy = spec.project(&yc);
        let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        for (g, &lambda) in grid.iter().enumerate() {
            let w = DVector::from_iterator(spec.rank(), (0..spec.rank()).map(|k| uy[k] / (spec.values[k] + lambda)));
            let pred = &tu * w;
            for (i, &obs) in yte.iter().enumerate() {
                let r = ybar + pred[i] - obs;
                sse[g] += r * r;
            }
        }
    }
    Ok(sse.into_iter().map(|s| s / m as f64).collect())
}

/// Seeded balanced fold labels: a permutation of the rows dealt round-robin.
pub fn fold_assignment(m: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut crate::rng::stream(seed));
    let mut out = vec![0; m];
    for (pos, &row) in perm.iter().enumerate() {
        out[row] = pos % folds;
    }
    out
}

fn split_fold(labels: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::with_capacity(labels.len());
    let mut test = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if l == f {
            test.push(i);
        } else {
            train.push(i);
        }
    }
    (train, test)
}

fn argmin_first(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] < v[best] {
            best = i;
        }
    }
    best
}

// ---------------------------------------------------------------- lasso

/// Convergence threshold on the largest standardized coefficient change.
pub const LASSO_TOL: f64 = 1e-7;
/// Stationarity tolerance of returned LASSO solutions.
pub const KKT_TOL: f64 = 1e-6;
// Internal acceptance gate, with headroom under KKT_TOL for the rescaling round trip.
const KKT_INNER_TOL: f64 = 0.5 * KKT_TOL;
pub const LASSO_MAX_SWEEPS: usize = 100_000;

/// Standardized design: centered columns scaled to unit (ML) variance.
/// Zero-variance columns are kept as zero columns and never enter the model.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub xs: DMatrix<f64>,
    pub means: DVector<f64>,
    pub sds: DVector<f64>,
    pub ybar: f64,
    pub yc: DVector<f64>,
}

impl Standardized {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let m = x.nrows() as f64;
        let (mut xs, means) = center_columns(x);
        let mut sds = DVector::zeros(x.ncols());
        for (j, mut col) in xs.column_iter_mut().enumerate() {
            let sd = (col.norm_squared() / m).sqrt();
            if sd > 1e-12 * (1.0 + means[j].abs()) {
                col /= sd;
                sds[j] = sd;
            } else {
                col.fill(0.0);
            }
        }
        let ybar = mean(y);
        Self {
            xs,
            means,
            sds,
            ybar,
            yc: y.add_scalar(-ybar),
        }
    }

    /// `max_j |x̃_jᵀ (y − ȳ)| / m`: the smallest penalty with an all-zero solution.
    pub fn lambda_max(&self) -> f64 {
        let m = self.xs.nrows() as f64;
        self.xs
            .column_iter()
            .map(|c| (c.dot(&self.yc) / m).abs())
            .fold(0.0, f64::max)
    }

    fn to_original(&self, b: &DVector<f64>) -> (f64, DVector<f64>) {
        let beta = DVector::from_iterator(
            b.len(),
            b.iter()
                .zip(self.sds.iter())
                .map(|(bj, sd)| if *sd > 0.0 { bj / sd } else { 0.0 }),
        );
        (self.ybar - self.means.dot(&beta), beta)
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Cyclic coordinate descent at one penalty, warm-started from `b` (updated
/// in place) with its residual `r = y_c − X̃ b`.
fn lasso_cd(st: &Standardized, lambda: f64, b: &mut DVector<f64>, r: &mut DVector<f64>) -> Result<(), FitError> {
    let (m, p) = st.xs.shape();
    let mf = m as f64;
    let usable: Vec<usize> = (0..p).filter(|&j| st.sds[j] > 0.0).collect();
    let sweep = |set: &[usize], b: &mut DVector<f64>, r: &mut DVector<f64>| -> f64 {
        let mut max_change = 0.0_f64;
        for &j in set {
            let col = st.xs.column(j);
            let old = b[j];
            let rho = col.dot(r) / mf + old;
            let new = soft_threshold(rho, lambda);
            if new != old {
                r.axpy(old - new, &col, 1.0);
                b[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    };

    let mut sweeps = 0usize;
    let mut last;
    loop {
        // Full pass, then iterate on the active set until it settles.
        last = sweep(&usable, b, r);
        sweeps += 1;
        let active: Vec<usize> = usable.iter().copied().filter(|&j| b[j] != 0.0).collect();
        let mut inner = 0usize;
        while last >= LASSO_TOL && sweeps < LASSO_MAX_SWEEPS {
            last = sweep(&active, b, r);
            sweeps += 1;
            inner += 1;
            if inner.is_multiple_of(POLISH_EVERY) {
                // Slow crawl near interpolation: jump to the active-set
                // solution, or stop once stationarity already holds.
                if polish_active(st, lambda, &active, b, r) {
                    break;
                }
                *r = &st.yc - &st.xs * &*b;
                if kkt_violation_std(st, lambda, b, r) <= KKT_INNER_TOL {
                    return Ok(());
                }
            }
        }
        if sweeps >= LASSO_MAX_SWEEPS {
            break;
        }
        // Refresh the residual to shed accumulated rounding, then audit.
        *r = &st.yc - &st.xs * &*b;
        let final_change = sweep(&usable, b, r);
        sweeps += 1;
        if final_change < LASSO_TOL && kkt_violation_std(st, lambda, b, r) <= KKT_INNER_TOL {
            return Ok(());
        }
        if sweeps >= LASSO_MAX_SWEEPS {
            last = final_change;
            break;
        }
    }
    Err(FitError::NoConvergence {
        max_iter: LASSO_MAX_SWEEPS,
        max_change: last,
    })
}

const POLISH_EVERY: usize = 200;

/// Solve the stationarity equations on `active` with the current signs held
/// fixed. Kept only when the solution has the same signs.
fn polish_active(st: &Standardized, lambda: f64, active: &[usize], b: &mut DVector<f64>, r: &mut DVector<f64>) -> bool {
    if active.is_empty() || active.len() >= st.xs.nrows() {
        return false;
    }
    let mf = st.xs.nrows() as f64;
    let xa = st.xs.select_columns(active);
    let signs = DVector::from_iterator(active.len(), active.iter().map(|&j| b[j].signum()));
    let gram = xa.tr_mul(&xa);
    let rhs = xa.tr_mul(&st.yc) - signs.scale(mf * lambda);
    let Some(chol) = gram.cholesky() else {
        return false;
    };
    let ba = chol.solve(&rhs);
    if ba.iter().zip(signs.iter()).any(|(v, s)| !(v * s > 0.0)) {
        return false;
    }
    for (k, &j) in active.iter().enumerate() {
        b[j] = ba[k];
    }
    *r = &st.yc - &st.xs * &*b;
    true
}

fn kkt_violation_std(st: &Standardized, lambda: f64, b: &DVector<f64>, r: &DVector<f64>) -> f64 {
    let mf = st.xs.nrows() as f64;
    let mut worst = 0.0_f64;
    for j in 0..b.len() {
        if st.sds[j] == 0.0 {
            continue;
        }
        let g = st.xs.column(j).dot(r) / mf;
        let v = if b[j] == 0.0 {
            (g.abs() - lambda).max(0.0)
        } else {
            (g - lambda * b[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Largest violation of the LASSO stationarity conditions by `fit` on
/// `(x, y)`, measured on standardized columns.
pub fn lasso_kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, fit: &FitResult) -> f64 {
    let st = Standardized::new(x, y);
    let lambda = fit.hyper.lambda.unwrap_or(0.0);
    let b = DVector::from_iterator(
        fit.beta_hat.len(),
        fit.beta_hat.iter().zip(st.sds.iter()).map(|(bj, sd)| bj * sd),
    );
    let r = &st.yc - &st.xs * &b;
    kkt_violation_std(&st, lambda, &b, &r)
}

fn lasso_result(st: &Standardized, b: &DVector<f64>, lambda: f64) -> FitResult {
    let (mu_hat, beta_hat) = st.to_original(b);
    FitResult {
        mu_hat,
        beta_hat,
        hyper: Hyper {
            lambda: Some(lambda),
            ..Default::default()
        },
        model_kind: ModelKind::Lasso,
    }
}

pub fn fit_lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<FitResult, FitError> {
    check_xy(x, y, 2)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(FitError::Invalid(format!("lambda = {lambda}")));
    }
    let st = Standardized::new(x, y);
    let mut b = DVector::zeros(x.ncols());
    let mut r = st.yc.clone();
    // Warm-start down a short path when the target penalty is small.
    let top = st.lambda_max();
    if lambda < top {
        for l in log_grid(top, lambda.max(top * 1e-4), 20) {
            if l > lambda {
                lasso_cd(&st, l, &mut b, &mut r)?;
            }
        }
    }
    lasso_cd(&st, lambda, &mut b, &mut r)?;
    Ok(lasso_result(&st, &b, lambda))
}

/// Solutions along a decreasing grid, warm-starting each from the previous.
pub fn lasso_path(x: &DMatrix<f64>, y: &DVector<f64>, grid: &[f64]) -> Result<Vec<FitResult>, FitError> {
    check_xy(x, y, 2)?;
    let st = Standardized::new(x, y);
    let mut b = DVector::zeros(x.ncols());
    let mut r = st.yc.clone();
    let mut out = Vec::with_capacity(grid.len());
    for &lambda in grid {
        lasso_cd(&st, lambda, &mut b, &mut r)?;
        out.push(lasso_result(&st, &b, lambda));
    }
    Ok(out)
}

pub fn fit_lasso_cv(x: &DMatrix<f64>, y: &DVector<f64>, cv: &CvSpec) -> Result<FitResult, FitError> {
    check_xy(x, y, 2)?;
    let grid = cv.resolve(x.nrows(), || Standardized::new(x, y).lambda_max())?;
    let errors = lasso_cv_errors(x, y, &grid, cv)?;
    let best = argmin_first(&errors);
    let mut path = lasso_path(x, y, &grid[..=best])?;
    Ok(path.pop().expect("non-empty path"))
}

pub fn lasso_cv_errors(x: &DMatrix<f64>, y: &DVector<f64>, grid: &[f64], cv: &CvSpec) -> Result<Vec<f64>, FitError> {
    let m = x.nrows();
    let folds = fold_assignment(m, cv.folds, cv.seed);
    let mut sse = vec![0.0; grid.len()];
    for f in 0..cv.folds {
        let (train, test) = split_fold(&folds, f);
        let xt = x.select_rows(&train);
        let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let xte = x.select_rows(&test);
        for (g, fit) in lasso_path(&xt, &yt, grid)?.iter().enumerate() {
            let pred = predict(fit, &xte)?;
            for (k, &i) in test.iter().enumerate() {
                let r = pred[k] - y[i];
                sse[g] += r * r;
            }
        }
    }
    Ok(sse.into_iter().map(|s| s / m as f64).collect())
}

// ---------------------------------------------------------------- mixed model

/// Search range for the variance ratio `γ = σ_ε² / σ_β²`.
pub const GAMMA_BOUNDS: (f64, f64) = (1e-6, 1e6);
const GAMMA_GRID_POINTS: usize = 121;

/// Pre-rotated quantities of `(X, y)` for repeated REML evaluations.
struct RemlSystem {
    spec: KernelSpectrum,
    m: usize,
    py: DVector<f64>,
    p1: DVector<f64>,
    perp_yy: f64,
    perp_y1: f64,
    perp_11: f64,
}

struct RemlPoint {
    loglik: f64,
    mu: f64,
    ypy: f64,
}

impl RemlSystem {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        let spec = KernelSpectrum::of(x);
        let m = x.nrows();
        let ones = DVector::from_element(m, 1.0);
        Self {
            py: spec.project(y),
            p1: spec.project(&ones),
            perp_yy: spec.perp_dot(y, y),
            perp_y1: spec.perp_dot(y, &ones),
            perp_11: spec.perp_dot(&ones, &ones),
            spec,
            m,
        }
    }

    fn eval(&self, gamma: f64) -> RemlPoint {
        let a = self.spec.inv_form(&self.p1, &self.p1, self.perp_11, gamma);
        let b = self.spec.inv_form(&self.p1, &self.py, self.perp_y1, gamma);
        let c = self.spec.inv_form(&self.py, &self.py, self.perp_yy, gamma);
        let ypy = (c - b * b / a).max(f64::MIN_POSITIVE);
        let dof = (self.m - 1) as f64;
        let loglik = -0.5 * (dof * (ypy / dof).ln() + self.spec.log_det(gamma) + a.ln());
        RemlPoint { loglik, mu: b / a, ypy }
    }
}

/// GLS intercept and BLUP of `β` at a fixed variance ratio `γ`:
/// `μ̂ = 1ᵀH⁻¹y / 1ᵀH⁻¹1`, `β̂ = Xᵀ H⁻¹ (y − μ̂1)` with `H = XXᵀ + γI`.
pub fn blup_at_ratio(x: &DMatrix<f64>, y: &DVector<f64>, gamma: f64) -> Result<(f64, DVector<f64>), FitError> {
    check_xy(x, y, 2)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(FitError::Invalid(format!("gamma = {gamma}")));
    }
    let sys = RemlSystem::new(x, y);
    if sys.spec.rank() == 0 {
        return Err(FitError::DegenerateKernel);
    }
    let mu = sys.eval(gamma).mu;
    Ok((mu, blup_beta(&sys.spec, x, y, mu, gamma)))
}

fn blup_beta(spec: &KernelSpectrum, x: &DMatrix<f64>, y: &DVector<f64>, mu: f64, gamma: f64) -> DVector<f64> {
    let resid = y.add_scalar(-mu);
    x.tr_mul(&spec.range_apply(&resid, gamma))
}

/// REML fit of the variance-components model. The ratio `γ` is located on
/// a log grid over [`GAMMA_BOUNDS`] and refined by golden-section search.
/// An optimum at the upper bound is reported as a pure-noise fit
/// (`σ_β² = 0`, `β̂ = 0`); at the lower bound as a pure-signal fit
/// (`σ_ε² = 0`, BLUP at the bound).
pub fn fit_lmm_reml(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<FitResult, FitError> {
    check_xy(x, y, 3)?;
    let m = x.nrows();
    let ybar = mean(y);
    let spread = (y.add_scalar(-ybar)).norm();
    let p = x.ncols();
    if spread <= 1e-12 * (1.0 + ybar.abs()) * (m as f64).sqrt() {
        return Ok(lmm_result(ybar, DVector::zeros(p), 0.0, 0.0));
    }
    let sys = RemlSystem::new(x, y);
    if sys.spec.rank() == 0 || sys.spec.values[0] <= f64::MIN_POSITIVE {
        return Err(FitError::DegenerateKernel);
    }

    let (lo, hi) = (GAMMA_BOUNDS.0.ln(), GAMMA_BOUNDS.1.ln());
    let step = (hi - lo) / (GAMMA_GRID_POINTS - 1) as f64;
    let t_at = |i: usize| {
        if i + 1 == GAMMA_GRID_POINTS {
            hi
        } else {
            lo + step * i as f64
        }
    };
    let objective = |t: f64| sys.eval(t.exp()).loglik;
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..GAMMA_GRID_POINTS {
        let v = objective(t_at(i));
        if v > best_val {
            best_val = v;
            best = i;
        }
    }

    let dof = (m - 1) as f64;
    if best + 1 == GAMMA_GRID_POINTS {
        let sigma_eps2 = spread * spread / dof;
        return Ok(lmm_result(ybar, DVector::zeros(p), 0.0, sigma_eps2));
    }
    if best == 0 {
        let gamma = GAMMA_BOUNDS.0;
        let pt = sys.eval(gamma);
        let beta = blup_beta(&sys.spec, x, y, pt.mu, gamma);
        return Ok(lmm_result(pt.mu, beta, pt.ypy / dof, 0.0));
    }
    let t = golden_max(objective, t_at(best - 1), t_at(best + 1), 1e-10);
    let gamma = t.exp();
    let pt = sys.eval(gamma);
    let sigma_beta2 = pt.ypy / dof;
    let beta = blup_beta(&sys.spec, x, y, pt.mu, gamma);
    Ok(lmm_result(pt.mu, beta, sigma_beta2, gamma * sigma_beta2))
}

fn lmm_result(mu: f64, beta: DVector<f64>, sigma_beta2: f64, sigma_eps2: f64) -> FitResult {
    FitResult {
        mu_hat: mu,
        beta_hat: beta,
        hyper: Hyper {
            lambda: None,
            sigma_beta2: Some(sigma_beta2),
            sigma_eps2: Some(sigma_eps2),
        },
        model_kind: ModelKind::Lmm,
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
