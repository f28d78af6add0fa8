//! Sample covariance, Ledoit-Wolf linear shrinkage toward a scaled identity,
//! and the matrix norms used as resampling statistics.
//!
//! With centered rows `z_t` (t = 1..m) and `S = (1/m) Σ z_t z_tᵀ`:
//!
//! ```text
//! mu    = tr(S) / p
//! d²    = ‖S − mu·I‖²_F
//! b̄²    = (1/m²) Σ_t ‖z_t z_tᵀ − S‖²_F
//! rho   = min(b̄² / d², 1)
//! sigma = (1 − rho)·S + rho·mu·I
//! ```
//!
//! The normalisation of the Frobenius norm by `p` used in the original
//! derivation cancels in `rho`, so plain Frobenius norms are used here.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::center_columns;

#[derive(Debug, Error, PartialEq)]
pub enum CovError {
    #[error("covariance needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("shrinkage intensity {0} outside [0, 1]")]
    BadIntensity(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    #[default]
    Frobenius,
    Spectral,
}

impl NormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NormKind::Frobenius => "frobenius",
            NormKind::Spectral => "spectral",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frobenius" => Ok(NormKind::Frobenius),
            "spectral" => Ok(NormKind::Spectral),
            other => Err(format!("unknown norm kind '{other}' (expected frobenius | spectral)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrunkenCovariance {
    pub sigma: DMatrix<f64>,
    pub rho: f64,
    pub mu: f64,
    pub sample_cov: DMatrix<f64>,
}

/// Maximum-likelihood covariance `(1/m) Σ (x_i − x̄)(x_i − x̄)ᵀ`.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>, CovError> {
    let m = x.nrows();
    if m < 2 {
        return Err(CovError::TooFewRows(m));
    }
    let (z, _) = center_columns(x);
    Ok(z.tr_mul(&z) / m as f64)
}

/// Ledoit-Wolf estimate with the optimal intensity clipped to `[0, 1]`.
pub fn ledoit_wolf(x: &DMatrix<f64>) -> Result<ShrunkenCovariance, CovError> {
    let m = x.nrows();
    if m < 2 {
        return Err(CovError::TooFewRows(m));
    }
    let (z, _) = center_columns(x);
    let s = z.tr_mul(&z) / m as f64;
    let p = s.nrows();
    let mu = s.trace() / p as f64;

    let d2 = (0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .map(|(i, j)| {
            let t = s[(i, j)] - if i == j { mu } else { 0.0 };
            t * t
        })
        .sum::<f64>();
    let mut b_bar2 = 0.0;
    for row in z.row_iter() {
        for i in 0..p {
            for j in 0..p {
                let t = row[i] * row[j] - s[(i, j)];
                b_bar2 += t * t;
            }
        }
    }
    b_bar2 /= (m * m) as f64;
    let rho = intensity(b_bar2, d2);
    Ok(assemble(s, rho, mu))
}

/// Same estimator with a caller-chosen intensity; `rho = 0` returns `S`.
pub fn ledoit_wolf_with_intensity(x: &DMatrix<f64>, rho: f64) -> Result<ShrunkenCovariance, CovError> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(CovError::BadIntensity(rho));
    }
    let s = sample_covariance(x)?;
    let mu = s.trace() / s.nrows() as f64;
    Ok(assemble(s, rho, mu))
}

fn intensity(b_bar2: f64, d2: f64) -> f64 {
    if d2 <= 0.0 {
        // S already equals mu·I.
        return 0.0;
    }
    let raw = b_bar2 / d2;
    if raw > 1.0 {
        log::debug!("ledoit-wolf intensity {raw:.4} clipped to 1");
        1.0
    } else {
        raw.max(0.0)
    }
}

fn assemble(s: DMatrix<f64>, rho: f64, mu: f64) -> ShrunkenCovariance {
    let mut sigma = &s * (1.0 - rho);
    for i in 0..sigma.nrows() {
        sigma[(i, i)] += rho * mu;
    }
    ShrunkenCovariance {
        sigma,
        rho,
        mu,
        sample_cov: s,
    }
}

pub fn matrix_l2_norm(a: &DMatrix<f64>, kind: NormKind) -> Result<f64, CovError> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(CovError::NonFinite);
    }
    Ok(match kind {
        NormKind::Frobenius => a.norm(),
        NormKind::Spectral => {
            if a.is_empty() {
                0.0
            } else {
                let sym = (a + a.transpose()) * 0.5;
                SymmetricEigen::new(sym).eigenvalues.amax()
            }
        }
    })
}

/// Norm of the Ledoit-Wolf estimate computed from the smaller Gram matrix
/// of the centered data, never forming the `p × p` covariance when `p > m`.
///
/// Returns `(norm, rho)`. Agrees with
/// `matrix_l2_norm(&ledoit_wolf(x)?.sigma, kind)` up to rounding.
pub fn ledoit_wolf_norm(x: &DMatrix<f64>, kind: NormKind) -> Result<(f64, f64), CovError> {
    let (m, p) = x.shape();
    if m < 2 {
        return Err(CovError::TooFewRows(m));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CovError::NonFinite);
    }
    let (z, _) = center_columns(x);
    let mf = m as f64;
    let gram = if m <= p { &z * z.transpose() } else { z.tr_mul(&z) };
    let row_sq: Vec<f64> = z.row_iter().map(|r| r.norm_squared()).collect();

    let tr_s = row_sq.iter().sum::<f64>() / mf;
    let s_fro2 = gram.norm_squared() / (mf * mf);
    let mu = tr_s / p as f64;
    let fourth: f64 = row_sq.iter().map(|v| v * v).sum();
    let b_bar2 = ((fourth - mf * s_fro2) / (mf * mf)).max(0.0);
    let d2 = (s_fro2 - p as f64 * mu * mu).max(0.0);
    let rho = intensity(b_bar2, d2);

    let norm = match kind {
        NormKind::Frobenius => {
            let a = 1.0 - rho;
            let sq = a * a * s_fro2 + 2.0 * a * rho * mu * tr_s + rho * rho * mu * mu * p as f64;
            sq.max(0.0).sqrt()
        }
        NormKind::Spectral => {
            let top = SymmetricEigen::new(gram).eigenvalues.max().max(0.0) / mf;
            (1.0 - rho) * top + rho * mu
        }
    };
    Ok((norm, rho))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(m: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut r = crate::rng::stream(seed);
        DMatrix::from_fn(m, p, |_, _| r.sample(StandardNormal))
    }

    #[test]
    fn identical_rows_give_zero() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
        assert_eq!(sample_covariance(&x).unwrap(), DMatrix::zeros(3, 3));
        let lw = ledoit_wolf(&x).unwrap();
        assert_eq!(lw.mu, 0.0);
        assert_eq!(lw.sigma, DMatrix::zeros(3, 3));
    }

    #[test]
    fn hand_computed_one_column() {
        let x = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        assert_eq!(sample_covariance(&x).unwrap()[(0, 0)], 1.0);
    }

    #[test]
    fn column_permutation_equivariance() {
        let x = gaussian(30, 4, 1);
        let perm = [2usize, 0, 3, 1];
        let xp = x.select_columns(&perm);
        let s = sample_covariance(&x).unwrap();
        let sp = sample_covariance(&xp).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(sp[(i, j)], s[(perm[i], perm[j])], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert_eq!(sample_covariance(&x), Err(CovError::TooFewRows(1)));
        assert!(ledoit_wolf(&x).is_err());
        assert!(ledoit_wolf_norm(&x, NormKind::Frobenius).is_err());
    }

    #[test]
    fn zero_intensity_returns_sample_covariance() {
        let x = gaussian(20, 3, 2);
        let lw = ledoit_wolf_with_intensity(&x, 0.0).unwrap();
        assert_eq!(lw.sigma, lw.sample_cov);
        assert!(ledoit_wolf_with_intensity(&x, 1.5).is_err());
        let full = ledoit_wolf_with_intensity(&x, 1.0).unwrap();
        assert_abs_diff_eq!(full.sigma, DMatrix::identity(3, 3) * full.mu, epsilon = 1e-15);
    }

    #[test]
    fn intensity_hits_upper_clip() {
        // Nearly isotropic S: d² = 2 * 0.0525² while b̄² = 4 * 0.616 / 16.
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.1, 0.0, -1.1]);
        let lw = ledoit_wolf(&x).unwrap();
        assert_eq!(lw.rho, 1.0);
        assert_abs_diff_eq!(lw.sigma, DMatrix::identity(2, 2) * 0.5525, epsilon = 1e-15);
    }

    #[test]
    fn norms_closed_forms() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(matrix_l2_norm(&z, NormKind::Frobenius).unwrap(), 0.0);
        assert_eq!(matrix_l2_norm(&z, NormKind::Spectral).unwrap(), 0.0);
        let i4 = DMatrix::<f64>::identity(4, 4);
        assert_abs_diff_eq!(matrix_l2_norm(&i4, NormKind::Frobenius).unwrap(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(matrix_l2_norm(&i4, NormKind::Spectral).unwrap(), 1.0, epsilon = 1e-15);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -4.0]));
        assert_abs_diff_eq!(matrix_l2_norm(&d, NormKind::Frobenius).unwrap(), 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(matrix_l2_norm(&d, NormKind::Spectral).unwrap(), 4.0, epsilon = 1e-14);
        let mut bad = i4.clone();
        bad[(0, 1)] = f64::NAN;
        assert_eq!(matrix_l2_norm(&bad, NormKind::Frobenius), Err(CovError::NonFinite));
    }

    #[test]
    fn gram_route_matches_full_route() {
        for (m, p, seed) in [(10, 30, 4), (40, 6, 5), (12, 12, 6), (3, 50, 7)] {
            let x = gaussian(m, p, seed);
            let lw = ledoit_wolf(&x).unwrap();
            for kind in [NormKind::Frobenius, NormKind::Spectral] {
                let (fast, rho) = ledoit_wolf_norm(&x, kind).unwrap();
                let slow = matrix_l2_norm(&lw.sigma, kind).unwrap();
                assert!(
                    (fast - slow).abs() <= 1e-9 * slow.max(1.0),
                    "{m}x{p} {kind:?}: {fast} vs {slow}"
                );
                assert!((rho - lw.rho).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn eigenvalue_floor() {
        let x = gaussian(15, 5, 8);
        let lw = ledoit_wolf(&x).unwrap();
        let lo = SymmetricEigen::new(lw.sample_cov.clone()).eigenvalues.min();
        let lo_sigma = SymmetricEigen::new(lw.sigma.clone()).eigenvalues.min();
        assert!(lo_sigma >= (1.0 - lw.rho) * lo + lw.rho * lw.mu - 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn convex_combination_identity(m in 2usize..25, p in 1usize..12, seed in any::<u64>()) {
            let x = gaussian(m, p, seed) * 3.0;
            let lw = ledoit_wolf(&x).unwrap();
            prop_assert!((0.0..=1.0).contains(&lw.rho));
            let resid = &lw.sigma - &lw.sample_cov * (1.0 - lw.rho) - DMatrix::identity(p, p) * (lw.rho * lw.mu);
            prop_assert!(resid.amax() <= 1e-10);
            prop_assert!((&lw.sigma - lw.sigma.transpose()).amax() <= 1e-12);
        }

        #[test]
        fn norm_axioms(p in 1usize..7, seed in any::<u64>(), c in -5.0f64..5.0) {
            let mut r = crate::rng::stream(seed);
            let mut sym = || {
                let a = DMatrix::from_fn(p, p, |_, _| r.random_range(-2.0..2.0));
                &a + a.transpose()
            };
            let a = sym();
            let b = sym();
            for kind in [NormKind::Frobenius, NormKind::Spectral] {
                let na = matrix_l2_norm(&a, kind).unwrap();
                let nb = matrix_l2_norm(&b, kind).unwrap();
                let nab = matrix_l2_norm(&(&a + &b), kind).unwrap();
                let nca = matrix_l2_norm(&(&a * c), kind).unwrap();
                prop_assert!(na >= 0.0);
                prop_assert!(nab <= na + nb + 1e-10);
                prop_assert!((nca - c.abs() * na).abs() <= 1e-10 * (1.0 + na));
            }
        }
    }
}
