//! Dense symmetric spectra, Schur products and the Schur-power contraction
//! certificate.
//!
//! All matrices here are small and dense, so every spectrum is computed with a
//! full symmetric eigendecomposition (Householder tridiagonalization followed
//! by implicit QR, as provided by `nalgebra`).

mod io;
mod nystrom;
pub mod random;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

pub use io::{matrix_from_csv, matrix_from_json, matrix_to_json, MatrixJson};
pub use nystrom::{
    brownian_corr_kernel, nystrom_eigs, richardson_extrapolate, Extrapolation, KernelGrid,
};

/// Symmetry tolerance accepted at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Largest negative eigenvalue tolerated in a correlation matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Slack allowed when comparing a Schur-power spectrum with the base spectrum.
pub const CONTRACTION_TOL: f64 = 1e-8;

/// A finite, exactly symmetric real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Validates and symmetrizes `m`. Off-diagonal pairs may disagree by at
    /// most `SYMMETRY_TOL` (relative to their magnitude); the stored matrix
    /// is the exact average.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        let p = m.nrows();
        for j in 0..p {
            for k in 0..p {
                if !m[(j, k)].is_finite() {
                    return Err(Error::NonFinite { row: j, col: k });
                }
            }
        }
        let mut out = m;
        for j in 0..p {
            for k in (j + 1)..p {
                let (a, b) = (out[(j, k)], out[(k, j)]);
                let gap = (a - b).abs();
                if gap > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::NotSymmetric { row: j, col: k, gap });
                }
                let avg = 0.5 * (a + b);
                out[(j, k)] = avg;
                out[(k, j)] = avg;
            }
        }
        Ok(SymMatrix(out))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        for r in rows {
            if r.len() != p {
                return Err(Error::NotSquare { rows: p, cols: r.len() });
            }
        }
        Self::new(DMatrix::from_fn(p, p, |j, k| rows[j][k]))
    }

    /// Builds `f(j, k)` over the upper triangle and mirrors it.
    pub fn from_fn(p: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut m = DMatrix::zeros(p, p);
        for j in 0..p {
            for k in j..p {
                let v = f(j, k);
                m[(j, k)] = v;
                m[(k, j)] = v;
            }
        }
        Self::new(m)
    }

    pub fn identity(p: usize) -> Self {
        SymMatrix(DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0[(j, k)]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|j| self.0.row(j).iter().copied().collect()).collect()
    }

    /// Principal submatrix on `idx`.
    pub fn restrict(&self, idx: &[usize]) -> SymMatrix {
        let q = idx.len();
        SymMatrix(DMatrix::from_fn(q, q, |a, b| self.0[(idx[a], idx[b])]))
    }

    /// Entrywise `m`-th power.
    pub fn elementwise_pow(&self, m: u32) -> SymMatrix {
        SymMatrix(self.0.map(|v| v.powi(m as i32)))
    }

    /// Simultaneous row/column permutation: entry `(a, b)` of the result is
    /// entry `(perm[a], perm[b])` of `self`.
    pub fn permute(&self, perm: &[usize]) -> SymMatrix {
        self.restrict(perm)
    }
}

/// A symmetric PSD matrix with unit diagonal and entries bounded by one.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrMatrix(SymMatrix);

impl CorrMatrix {
    pub fn new(m: SymMatrix) -> Result<Self> {
        let p = m.dim();
        for j in 0..p {
            let d = m.get(j, j);
            if (d - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::NotCorrelation(format!("diagonal entry {j} equals {d}")));
            }
            for k in 0..p {
                if m.get(j, k).abs() > 1.0 + SYMMETRY_TOL {
                    return Err(Error::NotCorrelation(format!(
                        "entry ({j}, {k}) = {} exceeds one in magnitude",
                        m.get(j, k)
                    )));
                }
            }
        }
        let (lo, _) = extreme_eigs(&m);
        if lo < -PSD_TOL {
            return Err(Error::NotCorrelation(format!("smallest eigenvalue {lo:e} is negative")));
        }
        let mut inner = m.into_matrix();
        for j in 0..p {
            inner[(j, j)] = 1.0;
        }
        Ok(CorrMatrix(SymMatrix(inner)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SymMatrix::from_rows(rows)?)
    }

    pub fn identity(p: usize) -> Self {
        CorrMatrix(SymMatrix::identity(p))
    }

    /// Equicorrelation matrix with off-diagonal `rho`.
    pub fn equicorrelated(p: usize, rho: f64) -> Result<Self> {
        Self::new(SymMatrix::from_fn(p, |j, k| if j == k { 1.0 } else { rho })?)
    }

    /// `Sigma[j][k] = beta^|j-k|`.
    pub fn ar1(p: usize, beta: f64) -> Result<Self> {
        Self::new(SymMatrix::from_fn(p, |j, k| beta.powi(j.abs_diff(k) as i32))?)
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0.get(j, k)
    }
}

/// A symmetric matrix with nonnegative entries.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(SymMatrix);

impl WeightMatrix {
    pub fn new(m: SymMatrix) -> Result<Self> {
        let p = m.dim();
        for j in 0..p {
            for k in 0..p {
                let v = m.get(j, k);
                if v < 0.0 {
                    return Err(Error::NegativeWeight { row: j, col: k, value: v });
                }
            }
        }
        Ok(WeightMatrix(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(SymMatrix::from_rows(rows)?)
    }

    /// All-ones weights, the Schur identity.
    pub fn ones(p: usize) -> Self {
        WeightMatrix(SymMatrix(DMatrix::from_element(p, p, 1.0)))
    }

    /// `W[j][k] = 1{j != k}`, which turns a correlation matrix into its
    /// off-diagonal part.
    pub fn offdiag(p: usize) -> Self {
        WeightMatrix(SymMatrix(DMatrix::from_fn(p, p, |j, k| if j == k { 0.0 } else { 1.0 })))
    }

    pub fn identity(p: usize) -> Self {
        WeightMatrix(SymMatrix::identity(p))
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0.get(j, k)
    }

    pub fn restrict(&self, idx: &[usize]) -> WeightMatrix {
        WeightMatrix(self.0.restrict(idx))
    }

    /// Largest absolute row sum, an upper bound on the spectral radius of
    /// any `C o W` with `|C| <= 1` entrywise.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.dim())
            .map(|j| (0..self.dim()).map(|k| self.get(j, k)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Elementwise (Schur, Hadamard) product.
pub fn schur(a: &SymMatrix, b: &SymMatrix) -> Result<SymMatrix> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(SymMatrix(a.0.component_mul(&b.0)))
}

/// Full spectrum in ascending order.
pub fn spectrum(m: &SymMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m.0.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenpairs sorted by ascending eigenvalue.
pub fn eigen_decomposition(m: &SymMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.0.clone());
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.dim(), m.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// `(lambda_min, lambda_max)`.
pub fn extreme_eigs(m: &SymMatrix) -> (f64, f64) {
    let ev = spectrum(m);
    (ev[0], ev[ev.len() - 1])
}

/// Extreme eigenvalues of `Sigma - I`, i.e. the extreme nonlinear
/// correlations of a pairwise Gaussian vector with unit off-diagonal weights.
pub fn offdiag_extremes(sigma: &CorrMatrix) -> (f64, f64) {
    let (lo, hi) = extreme_eigs(sigma.as_sym());
    (lo - 1.0, hi - 1.0)
}

/// Result of comparing `spectrum(Sigma^{om} o W)` with
/// `[lambda_min(Sigma o W), lambda_max(Sigma o W)]`.
#[derive(Debug, Clone, Serialize)]
pub struct ContractionCertificate {
    pub holds: bool,
    /// Signed distance of the inner spectrum to the outer endpoints;
    /// negative when the inner spectrum escapes.
    pub margin: f64,
    pub inner: Vec<f64>,
    pub outer: [f64; 2],
}

pub fn schur_power_contraction_check(
    sigma: &CorrMatrix,
    w: &WeightMatrix,
    m: u32,
) -> Result<ContractionCertificate> {
    if m == 0 {
        return Err(Error::InvalidArgument("Schur power m must be at least 1".into()));
    }
    let base = schur(sigma.as_sym(), w.as_sym())?;
    let powered = schur(&sigma.as_sym().elementwise_pow(m), w.as_sym())?;
    let (lo, hi) = extreme_eigs(&base);
    let inner = spectrum(&powered);
    let margin = (inner[0] - lo).min(hi - inner[inner.len() - 1]);
    Ok(ContractionCertificate { holds: margin >= -CONTRACTION_TOL, margin, inner, outer: [lo, hi] })
}

/// Rayleigh quotient `v' M v / v' v`.
pub fn rayleigh(m: &SymMatrix, v: &DVector<f64>) -> f64 {
    (v.transpose() * &m.0 * v)[(0, 0)] / v.norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(rho: f64) -> CorrMatrix {
        CorrMatrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap()
    }

    #[test]
    fn schur_examples() {
        let i = SymMatrix::identity(3);
        assert_eq!(schur(&i, &i).unwrap(), i);

        let a = pair(0.8);
        let sq = schur(a.as_sym(), a.as_sym()).unwrap();
        assert!((sq.get(0, 1) - 0.64).abs() < 1e-15);
        assert_eq!(sq.get(0, 0), 1.0);

        let ones = WeightMatrix::ones(2);
        assert_eq!(&schur(a.as_sym(), ones.as_sym()).unwrap(), a.as_sym());
    }

    #[test]
    fn schur_dimension_mismatch() {
        let err = schur(&SymMatrix::identity(2), &SymMatrix::identity(3)).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn extreme_eigs_examples() {
        for p in [1, 4, 9] {
            assert_eq!(extreme_eigs(&SymMatrix::identity(p)), (1.0, 1.0));
        }
        let (lo, hi) = extreme_eigs(pair(0.8).as_sym());
        assert!((lo - 0.2).abs() < 1e-14 && (hi - 1.8).abs() < 1e-14);

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let (lo, hi) = extreme_eigs(pair(r).as_sym());
        assert!((lo - (1.0 - r)).abs() < 1e-14);
        assert!((hi - (1.0 + r)).abs() < 1e-14);
    }

    #[test]
    fn offdiag_examples() {
        assert_eq!(offdiag_extremes(&CorrMatrix::identity(3)), (0.0, 0.0));
        let (lo, hi) = offdiag_extremes(&pair(0.8));
        assert!((lo + 0.8).abs() < 1e-14 && (hi - 0.8).abs() < 1e-14);
        let (lo, hi) = offdiag_extremes(&CorrMatrix::equicorrelated(3, 0.5).unwrap());
        assert!((lo + 0.5).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
    }

    #[test]
    fn contraction_examples() {
        let cert =
            schur_power_contraction_check(&CorrMatrix::identity(4), &WeightMatrix::ones(4), 5)
                .unwrap();
        assert!(cert.holds);
        assert_eq!(cert.outer, [1.0, 1.0]);

        let cert = schur_power_contraction_check(&pair(0.8), &WeightMatrix::ones(2), 2).unwrap();
        assert!(cert.holds);
        assert!((cert.inner[0] - 0.36).abs() < 1e-14);
        assert!((cert.inner[1] - 1.64).abs() < 1e-14);
        assert!((cert.outer[0] - 0.2).abs() < 1e-14);
        assert!((cert.margin - 0.16).abs() < 1e-14);
    }

    #[test]
    fn contraction_rejects_zero_power_and_mismatch() {
        let s = CorrMatrix::identity(2);
        assert!(schur_power_contraction_check(&s, &WeightMatrix::ones(2), 0).is_err());
        assert!(matches!(
            schur_power_contraction_check(&s, &WeightMatrix::ones(3), 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_validation() {
        assert!(matches!(
            SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]),
            Err(Error::NotSymmetric { .. })
        ));
        assert!(matches!(
            SymMatrix::from_rows(&[vec![1.0, f64::NAN], vec![f64::NAN, 1.0]]),
            Err(Error::NonFinite { .. })
        ));
        // Tiny asymmetry is absorbed.
        let m = SymMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5 + 1e-14, 1.0]]).unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0));

        assert!(CorrMatrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 1.0]]).is_err());
        assert!(CorrMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).is_err());
        // Bounded entries but indefinite.
        let bad = vec![vec![1.0, 0.9, -0.9], vec![0.9, 1.0, 0.9], vec![-0.9, 0.9, 1.0]];
        assert!(CorrMatrix::from_rows(&bad).is_err());

        assert!(matches!(
            WeightMatrix::from_rows(&[vec![1.0, -0.1], vec![-0.1, 1.0]]),
            Err(Error::NegativeWeight { .. })
        ));
    }

    #[test]
    fn eigenvectors_match_values() {
        let s = CorrMatrix::equicorrelated(4, 0.3).unwrap();
        let (vals, vecs) = eigen_decomposition(s.as_sym());
        for (c, &lambda) in vals.iter().enumerate() {
            let v = vecs.column(c).into_owned();
            assert!((rayleigh(s.as_sym(), &v) - lambda).abs() < 1e-13);
        }
    }
}
