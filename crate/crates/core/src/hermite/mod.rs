//! Normalized Hermite polynomials and the Gaussian covariance identities
//! built on them.
//!
//! `H_m` is the probabilists' Hermite polynomial scaled to unit variance under
//! `N(0, 1)`. For a bivariate normal pair with correlation `rho`,
//! `E[H_m(X) H_n(Y)] = rho^m 1{m = n}`, so the covariance of centered
//! transforms `f = sum a_m H_m`, `g = sum b_m H_m` is `sum a_m b_m rho^m`.

mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{CorrMatrix, SymMatrix, WeightMatrix};

pub use quadrature::{cached_rule, gauss_hermite_rule, QuadratureRule};

/// Default truncation order for expansions.
pub const DEFAULT_ORDER: usize = 16;

/// `H_m(x)` via `sqrt(m+1) H_{m+1} = x H_m - sqrt(m) H_{m-1}`.
pub fn hermite_eval(m: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..m {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `[H_0(x), ..., H_order(x)]`.
pub fn hermite_all(order: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(order + 1);
    out.push(1.0);
    if order >= 1 {
        out.push(x);
    }
    for k in 1..order {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Truncated expansion `f(x) - E f = sum_{m=1}^M a_m H_m(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteExpansion {
    pub variable: usize,
    /// `a_1, ..., a_M`; the constant term is excluded.
    pub coeffs: Vec<f64>,
    /// `a_0 = E f(Z)`, the discarded mean.
    pub mean: f64,
    /// Estimated `sum_{m > M} a_m^2`, the variance the truncation misses.
    pub tail_mass: f64,
}

impl HermiteExpansion {
    pub fn from_coeffs(variable: usize, coeffs: Vec<f64>) -> Self {
        HermiteExpansion { variable, coeffs, mean: 0.0, tail_mass: 0.0 }
    }

    /// The pure order-`k` polynomial `H_k` truncated at order `order`.
    pub fn unit(variable: usize, k: usize, order: usize) -> Self {
        assert!((1..=order).contains(&k), "unit order {k} outside 1..={order}");
        let mut coeffs = vec![0.0; order];
        coeffs[k - 1] = 1.0;
        Self::from_coeffs(variable, coeffs)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `sum a_m^2`, the variance of the truncated function.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum()
    }

    pub fn to_json(&self) -> ExpansionJson {
        ExpansionJson { order: self.order(), coeffs: self.coeffs.clone() }
    }
}

/// Wire form `{"M": M, "coeffs": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionJson {
    #[serde(rename = "M")]
    pub order: usize,
    pub coeffs: Vec<f64>,
}

impl ExpansionJson {
    pub fn into_expansion(self, variable: usize) -> Result<HermiteExpansion> {
        if self.coeffs.len() != self.order {
            return Err(Error::Parse(format!(
                "expansion declares M = {} but carries {} coefficients",
                self.order,
                self.coeffs.len()
            )));
        }
        Ok(HermiteExpansion::from_coeffs(variable, self.coeffs))
    }
}

/// Projects `f` onto `H_1..H_M` with the quadrature `rule`.
pub fn expand(
    f: impl Fn(f64) -> f64,
    order: usize,
    rule: &QuadratureRule,
) -> Result<HermiteExpansion> {
    if order == 0 {
        return Err(Error::InvalidArgument("expansion order must be positive".into()));
    }
    if rule.len() <= order {
        return Err(Error::InvalidArgument(format!(
            "a {}-point rule cannot resolve order {order}",
            rule.len()
        )));
    }
    let mut raw = vec![0.0; order + 1];
    let mut second = 0.0;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::CoefficientOverflow { order: 0 });
        }
        second += w * fx * fx;
        for (m, h) in hermite_all(order, x).into_iter().enumerate() {
            raw[m] += w * fx * h;
        }
    }
    if let Some(m) = raw.iter().position(|a| !a.is_finite()) {
        return Err(Error::CoefficientOverflow { order: m });
    }
    if !second.is_finite() {
        return Err(Error::CoefficientOverflow { order });
    }
    let captured: f64 = raw.iter().map(|a| a * a).sum();
    Ok(HermiteExpansion {
        variable: 0,
        mean: raw[0],
        coeffs: raw[1..].to_vec(),
        tail_mass: (second - captured).max(0.0),
    })
}

/// `Cov(f(X), g(Y)) = sum_m a_m b_m rho^m` for a standard bivariate normal
/// pair with correlation `rho`, `|rho| <= 1`.
pub fn pairwise_gaussian_cov(a: &HermiteExpansion, b: &HermiteExpansion, rho: f64) -> f64 {
    debug_assert!(rho.abs() <= 1.0 + 1e-12, "correlation {rho} outside [-1, 1]");
    let mut power = 1.0;
    let mut sum = 0.0;
    for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
        power *= rho;
        sum += x * y * power;
    }
    sum
}

/// Weighted correlation matrix of the transformed variables,
/// `W_jk Corr(f_j(X_j), f_k(X_k))`, for a pairwise Gaussian vector with
/// correlation `sigma`.
pub fn nl_gram(
    sigma: &CorrMatrix,
    expansions: &[HermiteExpansion],
    w: &WeightMatrix,
) -> Result<SymMatrix> {
    let p = sigma.dim();
    if expansions.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: expansions.len() });
    }
    if w.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, found: w.dim() });
    }
    let norms: Vec<f64> = expansions.iter().map(|e| e.norm_sq().sqrt()).collect();
    if let Some(j) = norms.iter().position(|&n| !(n > 0.0)) {
        return Err(Error::ZeroNorm { index: j });
    }
    SymMatrix::from_fn(p, |j, k| {
        if j == k {
            w.get(j, j)
        } else {
            let cov = pairwise_gaussian_cov(&expansions[j], &expansions[k], sigma.get(j, k));
            w.get(j, k) * cov / (norms[j] * norms[k])
        }
    })
}
