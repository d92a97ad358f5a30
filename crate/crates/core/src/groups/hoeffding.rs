use serde::Serialize;

use super::law::DiscreteLaw;
use super::system::{binomial, GroupSystem, ENUMERATION_BUDGET};
use crate::error::{Error, Result};
use crate::spectra::SymMatrix;

/// Tolerance for the symmetry and centering checks on a tabulated `f_0`.
pub const TABLE_TOL: f64 = 1e-12;

/// Flat index of `digits` (base `s`, last coordinate fastest).
fn flat(digits: &[usize], s: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * s + d)
}

fn unflat(mut i: usize, s: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = i % s;
        i /= s;
    }
    out
}

fn table_size(s: usize, m: usize) -> Result<usize> {
    let required = (s as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if required > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { required, budget: ENUMERATION_BUDGET });
    }
    Ok(required as usize)
}

/// Tabulates `f` on `support^m`, last coordinate fastest.
pub fn tabulate(law: &DiscreteLaw, m: usize, mut f: impl FnMut(&[f64]) -> f64) -> Result<Vec<f64>> {
    let s = law.len();
    let n = table_size(s, m)?;
    Ok((0..n)
        .map(|i| {
            let y: Vec<f64> = unflat(i, s, m).into_iter().map(|d| law.values()[d]).collect();
            f(&y)
        })
        .collect())
}

/// Components `f_{0,ℓ}` of a centered symmetric `f_0(Y_1..Y_m)`, each
/// tabulated on `support^ℓ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoeffdingDecomposition {
    pub m: usize,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
    /// The centered input.
    pub f0: Vec<f64>,
    /// Mean subtracted from the input before decomposing.
    pub removed_mean: f64,
    /// `components[ℓ - 1]` is `f_{0,ℓ}`.
    pub components: Vec<Vec<f64>>,
}

/// Hoeffding decomposition by inclusion-exclusion over conditional means:
/// `f_{0,k}(y_1..y_k) = sum_{S ⊆ [k]} (-1)^{k-|S|} g_{|S|}(y_S)` with
/// `g_r(y_1..y_r) = E f_0(y_1..y_r, Y_{r+1}..Y_m)`.
pub fn hoeffding_decompose(f0: &[f64], law: &DiscreteLaw, m: usize) -> Result<HoeffdingDecomposition> {
    if m == 0 {
        return Err(Error::InvalidArgument("order m must be positive".into()));
    }
    let s = law.len();
    let n = table_size(s, m)?;
    if f0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: f0.len() });
    }
    if let Some(i) = f0.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let scale = f0.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..n {
        let a = unflat(i, s, m);
        let mut b = a.clone();
        b.sort_unstable();
        if (f0[i] - f0[flat(&b, s)]).abs() > TABLE_TOL * scale {
            return Err(Error::Asymmetric { a, b });
        }
    }

    // g[r] tabulated on support^r, by averaging out trailing coordinates.
    let q = law.probs();
    let mut g: Vec<Vec<f64>> = vec![Vec::new(); m + 1];
    g[m] = f0.to_vec();
    for r in (0..m).rev() {
        g[r] = (0..s.pow(r as u32)).map(|i| (0..s).map(|c| q[c] * g[r + 1][i * s + c]).sum()).collect();
    }
    let mean = g[0][0];
    for level in g.iter_mut() {
        level.iter_mut().for_each(|v| *v -= mean);
    }

    let mut components = Vec::with_capacity(m);
    for k in 1..=m {
        let table: Vec<f64> = (0..s.pow(k as u32))
            .map(|i| {
                let y = unflat(i, s, k);
                let mut total = 0.0;
                for mask in 0u32..(1 << k) {
                    let sub: Vec<usize> = (0..k).filter(|&b| mask >> b & 1 == 1).map(|b| y[b]).collect();
                    let sign = if (k - sub.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
                    total += sign * g[sub.len()][flat(&sub, s)];
                }
                total
            })
            .collect();
        components.push(table);
    }
    Ok(HoeffdingDecomposition {
        m,
        values: law.values().to_vec(),
        probs: law.probs().to_vec(),
        f0: g.pop().unwrap(),
        removed_mean: mean,
        components,
    })
}

impl HoeffdingDecomposition {
    fn s(&self) -> usize {
        self.values.len()
    }

    /// `max over atoms |f_0(y) - sum_{∅ != S ⊆ [m]} f_{0,|S|}(y_S)|`.
    pub fn reconstruction_error(&self) -> f64 {
        let (s, m) = (self.s(), self.m);
        (0..self.f0.len())
            .map(|i| {
                let y = unflat(i, s, m);
                let mut total = 0.0;
                for mask in 1u32..(1 << m) {
                    let sub: Vec<usize> = (0..m).filter(|&b| mask >> b & 1 == 1).map(|b| y[b]).collect();
                    total += self.components[sub.len() - 1][flat(&sub, s)];
                }
                (self.f0[i] - total).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `max |E[f_{0,ℓ}(y_1..Y_s..y_ℓ)]|` over every order, free coordinate
    /// and fixed values.
    pub fn conditional_mean_error(&self) -> f64 {
        let s = self.s();
        let mut worst = 0.0f64;
        for (k, table) in self.components.iter().enumerate().map(|(i, t)| (i + 1, t)) {
            for i in 0..table.len() {
                let y = unflat(i, s, k);
                for pos in 0..k {
                    if y[pos] != 0 {
                        continue;
                    }
                    let mut z = y.clone();
                    let mut e = 0.0;
                    for c in 0..s {
                        z[pos] = c;
                        e += self.probs[c] * table[flat(&z, s)];
                    }
                    worst = worst.max(e.abs());
                }
            }
        }
        worst
    }

    /// `E f_{0,ℓ}^2` for `ℓ = 1..m`.
    pub fn component_energies(&self) -> Vec<f64> {
        let s = self.s();
        self.components
            .iter()
            .enumerate()
            .map(|(i, table)| {
                let k = i + 1;
                table
                    .iter()
                    .enumerate()
                    .map(|(idx, v)| {
                        let w: f64 = unflat(idx, s, k).iter().map(|&d| self.probs[d]).product();
                        w * v * v
                    })
                    .sum()
            })
            .collect()
    }

    pub fn variance(&self) -> f64 {
        let (s, m) = (self.s(), self.m);
        self.f0
            .iter()
            .enumerate()
            .map(|(i, v)| unflat(i, s, m).iter().map(|&d| self.probs[d]).product::<f64>() * v * v)
            .sum()
    }

    /// `|Var f_0 - sum_ℓ C(m, ℓ) E f_{0,ℓ}^2|`.
    pub fn variance_identity_gap(&self) -> f64 {
        let decomposed: f64 = self
            .component_energies()
            .iter()
            .enumerate()
            .map(|(i, e)| binomial(self.m, i + 1) * e)
            .sum();
        (self.variance() - decomposed).abs()
    }
}

/// Mean-zero, unit-variance version of `h0` (values on the law's support).
pub fn standardize(h0: &[f64], law: &DiscreteLaw) -> Result<Vec<f64>> {
    if h0.len() != law.len() {
        return Err(Error::DimensionMismatch { expected: law.len(), found: h0.len() });
    }
    let mean: f64 = h0.iter().zip(law.probs()).map(|(h, q)| h * q).sum();
    let var: f64 = h0.iter().zip(law.probs()).map(|(h, q)| q * (h - mean).powi(2)).sum();
    if !(var > 1e-300) {
        return Err(Error::InvalidArgument("h0 has zero variance under the law".into()));
    }
    let sd = var.sqrt();
    Ok(h0.iter().map(|h| (h - mean) / sd).collect())
}

/// Elementary symmetric polynomial `e_ℓ(x_1..x_n)`.
pub fn elementary_symmetric(xs: &[f64], ell: usize) -> f64 {
    let mut e = vec![0.0; ell + 1];
    e[0] = 1.0;
    for &x in xs {
        for r in (1..=ell.min(xs.len())).rev() {
            e[r] += x * e[r - 1];
        }
    }
    e[ell]
}

/// `h^(ℓ)_{0,j} = C(|G_j|, ℓ)^{-1/2} e_ℓ(h_0(Y_i) : i ∈ G_j)`, tabulated on
/// `support^{|G_j|}` in the order of `G_j`'s labels.
pub fn product_basis(g: &GroupSystem, j: usize, ell: usize, h0: &[f64], law: &DiscreteLaw) -> Result<Vec<f64>> {
    if j >= g.len() {
        return Err(Error::InvalidArgument(format!("group index {j} out of range")));
    }
    let size = g.sizes()[j];
    if ell == 0 || ell > size {
        return Err(Error::InvalidArgument(format!("order {ell} needs 1 <= ℓ <= |G_j| = {size}")));
    }
    let h = standardize(h0, law)?;
    let norm = binomial(size, ell).sqrt();
    let s = law.len();
    let n = table_size(s, size)?;
    Ok((0..n)
        .map(|i| {
            let xs: Vec<f64> = unflat(i, s, size).into_iter().map(|d| h[d]).collect();
            elementary_symmetric(&xs, ell) / norm
        })
        .collect())
}

/// Covariance matrix of the order-`ℓ` product basis over the active groups,
/// by exact enumeration of the label universe.
pub fn product_basis_covariance(g: &GroupSystem, ell: usize, h0: &[f64], law: &DiscreteLaw) -> Result<SymMatrix> {
    let h = standardize(h0, law)?;
    let sizes = g.sizes();
    let active: Vec<usize> = (0..g.len()).filter(|&j| sizes[j] >= ell).collect();
    if ell == 0 || active.is_empty() {
        return Err(Error::InvalidArgument(format!("order {ell} has no active groups")));
    }
    let universe = g.universe();
    let s = law.len();
    let n = table_size(s, universe.len())?;
    let members: Vec<Vec<usize>> = active
        .iter()
        .map(|&j| g.group(j).iter().map(|l| universe.binary_search(l).unwrap()).collect())
        .collect();
    let norms: Vec<f64> = active.iter().map(|&j| binomial(sizes[j], ell).sqrt()).collect();
    let a = active.len();
    let mut cov = vec![vec![0.0; a]; a];
    let mut vals = vec![0.0; a];
    for i in 0..n {
        let digits = unflat(i, s, universe.len());
        let w: f64 = digits.iter().map(|&d| law.probs()[d]).product();
        if w == 0.0 {
            continue;
        }
        for (v, (mem, norm)) in vals.iter_mut().zip(members.iter().zip(&norms)) {
            let xs: Vec<f64> = mem.iter().map(|&u| h[digits[u]]).collect();
            *v = elementary_symmetric(&xs, ell) / norm;
        }
        for r in 0..a {
            for c in r..a {
                cov[r][c] += w * vals[r] * vals[c];
            }
        }
    }
    SymMatrix::from_fn(a, |r, c| cov[r.min(c)][r.max(c)])
}
