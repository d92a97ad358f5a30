use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, DEFAULT_SEED};
use crate::spectra::{eigen_decomposition, extreme_eigs, CorrMatrix, PSD_TOL};
use crate::transform::Transform;

/// Rows drawn per RNG stream when sampling.
pub const SAMPLE_BLOCK: usize = 4096;

/// A Gaussian-copula design `X_j = T_j(Z_j)` with `Corr(Z) = Σ^z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaDesign {
    pub sigma_z: CorrMatrix,
    pub transforms: Vec<Transform>,
    pub n: usize,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MatrixField {
    Rows(Vec<Vec<f64>>),
    Tagged { rows: Vec<Vec<f64>> },
}

#[derive(Deserialize)]
struct DesignJson {
    sigma_z: MatrixField,
    transforms: Vec<String>,
    n: usize,
    seed: Option<u64>,
}

impl CopulaDesign {
    pub fn new(sigma_z: CorrMatrix, transforms: Vec<Transform>, n: usize, seed: u64) -> Result<Self> {
        if transforms.len() != sigma_z.dim() {
            return Err(Error::DimensionMismatch { expected: sigma_z.dim(), found: transforms.len() });
        }
        if let Some(j) = transforms.iter().position(|t| *t == Transform::Zero) {
            return Err(Error::DegenerateVariable { index: j });
        }
        if n < 2 {
            return Err(Error::InvalidArgument("a design needs at least two rows".into()));
        }
        Ok(CopulaDesign { sigma_z, transforms, n, seed })
    }

    /// `{"sigma_z": [[...]] | {"dim": p, "rows": [[...]]}, "transforms": [...], "n": n, "seed": s}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: DesignJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("design JSON: {e}")))?;
        let rows = match raw.sigma_z {
            MatrixField::Rows(r) | MatrixField::Tagged { rows: r } => r,
        };
        let sigma = CorrMatrix::from_rows(&rows)?;
        let transforms = raw.transforms.iter().map(|s| s.parse()).collect::<Result<Vec<Transform>>>()?;
        Self::new(sigma, transforms, raw.n, raw.seed.unwrap_or(DEFAULT_SEED))
    }

    pub fn dim(&self) -> usize {
        self.sigma_z.dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CopulaBound {
    /// `λ_min(Σ^z)`.
    pub kappa0: f64,
    /// `λ_max(Σ^z)`.
    pub lambda_max: f64,
}

/// Spectral bounds of the latent correlation; they do not depend on the
/// marginal transforms.
pub fn copula_bound(sigma_z: &CorrMatrix) -> CopulaBound {
    let (kappa0, lambda_max) = extreme_eigs(sigma_z.as_sym());
    CopulaBound { kappa0, lambda_max }
}

/// Symmetric square-root factor `L` with `L L^T = Σ`.
pub(crate) fn factor(sigma: &CorrMatrix) -> Result<DMatrix<f64>> {
    let (values, vectors) = eigen_decomposition(sigma.as_sym());
    if values[0] < -PSD_TOL {
        return Err(Error::NotCorrelation(format!("latent correlation has eigenvalue {}", values[0])));
    }
    let mut l = vectors;
    for (mut col, v) in l.column_iter_mut().zip(&values) {
        col *= v.max(0.0).sqrt();
    }
    Ok(l)
}

/// Latent Gaussian draws `Z` (`n x p`), blockwise in parallel with one RNG
/// stream per block.
pub fn sample_latent(sigma: &CorrMatrix, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let l = factor(sigma)?;
    let p = sigma.dim();
    let blocks: Vec<Vec<f64>> = (0..n.div_ceil(SAMPLE_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let rows = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
            let mut out = Vec::with_capacity(rows * p);
            let mut g = vec![0.0; p];
            for _ in 0..rows {
                g.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
                for i in 0..p {
                    out.push((0..p).map(|k| l[(i, k)] * g[k]).sum());
                }
            }
            out
        })
        .collect();
    Ok(DMatrix::from_row_iterator(n, p, blocks.into_iter().flatten()))
}

/// `n` i.i.d. rows of `(T_1(Z_1), ..., T_p(Z_p))`.
pub fn sample_design(d: &CopulaDesign) -> Result<DMatrix<f64>> {
    let mut z = sample_latent(&d.sigma_z, d.n, d.seed)?;
    for (mut col, t) in z.column_iter_mut().zip(&d.transforms) {
        col.apply(|x| *x = t.eval(*x));
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn bounds() {
        let b = copula_bound(&CorrMatrix::identity(4));
        assert!((b.kappa0 - 1.0).abs() < 1e-14 && (b.lambda_max - 1.0).abs() < 1e-14);
        let b = copula_bound(&CorrMatrix::equicorrelated(3, 0.5).unwrap());
        assert!((b.kappa0 - 0.5).abs() < 1e-14 && (b.lambda_max - 2.0).abs() < 1e-14);
        let b = copula_bound(&CorrMatrix::ar1(50, 0.5).unwrap());
        assert!(b.kappa0 >= 1.0 / 3.0 && b.lambda_max <= 3.0);
    }

    #[test]
    fn independent_columns_are_uncorrelated() {
        let d = CopulaDesign::new(CorrMatrix::identity(3), vec![Transform::Identity; 3], 20_000, 3).unwrap();
        let x = sample_design(&d).unwrap();
        let cols: Vec<Vec<f64>> = x.column_iter().map(|c| c.iter().copied().collect()).collect();
        let bound = 4.0 / (d.n as f64).sqrt();
        for j in 0..3 {
            for k in (j + 1)..3 {
                assert!(corr(&cols[j], &cols[k]).abs() <= bound);
            }
        }
    }

    #[test]
    fn probit_columns_are_uniform() {
        let n = 20_000;
        let d = CopulaDesign::new(
            CorrMatrix::equicorrelated(2, 0.7).unwrap(),
            vec![Transform::ProbitUniform; 2],
            n,
            11,
        )
        .unwrap();
        let x = sample_design(&d).unwrap();
        for col in x.column_iter() {
            let mut v: Vec<f64> = col.iter().copied().collect();
            v.sort_by(f64::total_cmp);
            let ks = v
                .iter()
                .enumerate()
                .map(|(i, &u)| ((i + 1) as f64 / n as f64 - u).abs().max((u - i as f64 / n as f64).abs()))
                .fold(0.0, f64::max);
            // 1% critical value of the one-sample KS statistic.
            assert!(ks < 1.63 / (n as f64).sqrt(), "KS = {ks}");
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let d = CopulaDesign::new(
            CorrMatrix::equicorrelated(3, 0.3).unwrap(),
            vec![Transform::Identity, Transform::Exp, Transform::Cube],
            9_000,
            5,
        )
        .unwrap();
        let a = sample_design(&d).unwrap();
        let b = sample_design(&d).unwrap();
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        let other = sample_design(&CopulaDesign { seed: 6, ..d }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn design_json() {
        let d = CopulaDesign::from_json_str(
            r#"{"sigma_z": [[1, 0.5], [0.5, 1]], "transforms": ["identity", "probit_uniform"], "n": 100, "seed": 9}"#,
        )
        .unwrap();
        assert_eq!(d.transforms[1], Transform::ProbitUniform);
        assert_eq!(d.seed, 9);
        let tagged = CopulaDesign::from_json_str(
            r#"{"sigma_z": {"dim": 2, "rows": [[1, 0.5], [0.5, 1]]}, "transforms": ["exp", "exp"], "n": 10}"#,
        )
        .unwrap();
        assert_eq!(tagged.seed, DEFAULT_SEED);
        assert!(CopulaDesign::from_json_str(
            r#"{"sigma_z": [[1, 0.5], [0.5, 1]], "transforms": ["identity"], "n": 10}"#
        )
        .is_err());
    }
}
