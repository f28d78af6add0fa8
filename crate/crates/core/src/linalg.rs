//! Dense linear-algebra helpers shared by the fitters and covariance code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Column means of `x`.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    let m = x.nrows() as f64;
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / m))
}

/// `x` with every column shifted to mean zero, together with the means.
pub fn center_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let means = column_means(x);
    let mut xc = x.clone();
    for (mut col, mu) in xc.column_iter_mut().zip(means.iter()) {
        col.add_scalar_mut(-mu);
    }
    (xc, means)
}

pub fn mean(v: &DVector<f64>) -> f64 {
    v.sum() / v.len() as f64
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
pub fn sorted_eigen(a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(&order);
    (values, vectors)
}

/// Nonzero spectrum of the row kernel `K = Z Zᵀ` (m × m) of a data matrix
/// `Z`, computed from whichever Gram matrix is smaller.
///
/// `basis` has orthonormal columns spanning the range of `K`; `values` holds
/// the matching positive eigenvalues. Directions orthogonal to `basis` carry
/// eigenvalue zero.
#[derive(Debug, Clone)]
pub struct KernelSpectrum {
    pub values: DVector<f64>,
    pub basis: DMatrix<f64>,
}

impl KernelSpectrum {
    pub fn of(z: &DMatrix<f64>) -> Self {
        let (m, p) = z.shape();
        if m <= p {
            let (vals, vecs) = sorted_eigen(z * z.transpose());
            Self::truncate(vals, vecs)
        } else {
            // K = Z V Λ Vᵀ Zᵀ / Λ: left singular vectors from the p × p side.
            let (vals, vecs) = sorted_eigen(z.transpose() * z);
            let tol = rank_tol(&vals, m.max(p));
            let r = vals.iter().take_while(|&&v| v > tol).count();
            let mut basis = z * vecs.columns(0, r);
            for (k, mut col) in basis.column_iter_mut().enumerate() {
                col /= vals[k].sqrt();
            }
            Self {
                values: vals.rows(0, r).into_owned(),
                basis,
            }
        }
    }

    fn truncate(vals: DVector<f64>, vecs: DMatrix<f64>) -> Self {
        let tol = rank_tol(&vals, vals.len());
        let r = vals.iter().take_while(|&&v| v > tol).count();
        Self {
            values: vals.rows(0, r).into_owned(),
            basis: vecs.columns(0, r).into_owned(),
        }
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Quadratic forms `aᵀ (K + γI)⁻¹ b` for several right-hand sides at once
    /// are built from these projections.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.tr_mul(v)
    }

    /// Inner product of the parts of `a` and `b` outside the range of `K`,
    /// formed from explicit residuals rather than `aᵀb − paᵀpb`.
    pub fn perp_dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let ra = a - &self.basis * self.project(a);
        let rb = b - &self.basis * self.project(b);
        ra.dot(&rb)
    }

    /// `aᵀ (K + γI)⁻¹ b` from the projections and [`Self::perp_dot`].
    pub fn inv_form(&self, pa: &DVector<f64>, pb: &DVector<f64>, perp: f64, gamma: f64) -> f64 {
        let mut in_range = 0.0;
        for k in 0..self.rank() {
            in_range += pa[k] * pb[k] / (self.values[k] + gamma);
        }
        in_range + perp / gamma
    }

    /// The in-range part of `(K + γI)⁻¹ v`. Sufficient whenever the result
    /// is multiplied by `Zᵀ`, which annihilates the rest; skipping the
    /// `1/γ` term keeps small `γ` free of amplified round-off.
    pub fn range_apply(&self, v: &DVector<f64>, gamma: f64) -> DVector<f64> {
        let pv = self.project(v);
        let coef = DVector::from_fn(self.rank(), |k, _| pv[k] / (self.values[k] + gamma));
        &self.basis * coef
    }

    /// `(K + γI)⁻¹ v`.
    pub fn inv_apply(&self, v: &DVector<f64>, gamma: f64) -> DVector<f64> {
        let pv = self.project(v);
        let mut out = v / gamma;
        let mut coef = DVector::zeros(self.rank());
        for k in 0..self.rank() {
            coef[k] = pv[k] / (self.values[k] + gamma) - pv[k] / gamma;
        }
        out += &self.basis * coef;
        out
    }

    /// `log det (K + γI)`.
    pub fn log_det(&self, gamma: f64) -> f64 {
        let r = self.rank();
        self.values.iter().map(|v| (v + gamma).ln()).sum::<f64>() + (self.dim() - r) as f64 * gamma.ln()
    }
}

fn rank_tol(vals: &DVector<f64>, dim: usize) -> f64 {
    let top = vals.iter().cloned().fold(0.0_f64, f64::max);
    top * dim as f64 * f64::EPSILON * 4.0
}
