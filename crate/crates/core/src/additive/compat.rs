use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::spectra::{eigen_decomposition, SymMatrix};

/// Relative eigenvalue cutoff when whitening a block Gram.
pub const RANK_TOL: f64 = 1e-10;
/// Cone directions drawn per RNG stream.
const DIRECTION_SHARD: usize = 256;
/// Rows accumulated per parallel Gram chunk.
const GRAM_CHUNK: usize = 8192;

/// Per-variable sieve used to represent the additive components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum BasisSpec {
    /// Indicators of `bins` equal-width cells of the quantile scale.
    Histogram { bins: usize },
    /// Local polynomials of degree `degree` on `bins` cells.
    PiecewisePolynomial { bins: usize, degree: usize },
}

impl BasisSpec {
    pub fn histogram(bins: usize) -> Self {
        BasisSpec::Histogram { bins }
    }

    pub fn width(&self) -> usize {
        match *self {
            BasisSpec::Histogram { bins } => bins,
            BasisSpec::PiecewisePolynomial { bins, degree } => bins * (degree + 1),
        }
    }

    fn validate(&self) -> Result<()> {
        let bins = match *self {
            BasisSpec::Histogram { bins } | BasisSpec::PiecewisePolynomial { bins, .. } => bins,
        };
        if bins < 2 {
            return Err(Error::InvalidArgument("a basis needs at least two cells".into()));
        }
        Ok(())
    }

    /// Writes the basis values at `u ∈ (0, 1)` into `out[..width]`.
    fn eval_into(&self, u: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        match *self {
            BasisSpec::Histogram { bins } => {
                let b = ((u * bins as f64) as usize).min(bins - 1);
                out[b] = 1.0;
            }
            BasisSpec::PiecewisePolynomial { bins, degree } => {
                let s = u * bins as f64;
                let b = (s as usize).min(bins - 1);
                let local = 2.0 * (s - b as f64) - 1.0;
                let mut pow = 1.0;
                for k in 0..=degree {
                    out[b * (degree + 1) + k] = pow;
                    pow *= local;
                }
            }
        }
    }
}

/// Column-wise `(rank - 0.5) / n` with average ranks for ties.
pub fn quantile_standardize(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = data.nrows();
    let mut out = DMatrix::zeros(n, data.ncols());
    for (j, col) in data.column_iter().enumerate() {
        if let Some(i) = col.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: i, col: j });
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && col[order[end]] == col[order[start]] {
                end += 1;
            }
            let rank = (start + end + 1) as f64 / 2.0;
            for &i in &order[start..end] {
                out[(i, j)] = (rank - 0.5) / n as f64;
            }
            start = end;
        }
    }
    Ok(out)
}

/// Active set, cone aperture and norm exponent of a compatibility query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityQuery {
    /// Zero-based active indices.
    pub active: Vec<usize>,
    pub xi0: f64,
    pub q: u8,
}

impl CompatibilityQuery {
    pub fn new(mut active: Vec<usize>, xi0: f64, q: u8, p: usize) -> Result<Self> {
        active.sort_unstable();
        active.dedup();
        if active.is_empty() {
            return Err(Error::InvalidArgument("the active set must be nonempty".into()));
        }
        if let Some(&j) = active.iter().find(|&&j| j >= p) {
            return Err(Error::InvalidArgument(format!("active index {j} out of range for p = {p}")));
        }
        if !(xi0 > 0.0 && xi0.is_finite()) {
            return Err(Error::InvalidArgument(format!("xi0 must be positive, got {xi0}")));
        }
        if q != 1 && q != 2 {
            return Err(Error::InvalidArgument(format!("q must be 1 or 2, got {q}")));
        }
        Ok(CompatibilityQuery { active, xi0, q })
    }

    fn is_active(&self, j: usize) -> bool {
        self.active.binary_search(&j).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiOptions {
    pub n_directions: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Default for PhiOptions {
    fn default() -> Self {
        PhiOptions { n_directions: 2000, batches: 20, seed: crate::rng::DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiReport {
    /// Smallest ratio found over the sampled cone directions.
    pub phi_hat: f64,
    /// `λ_min` of the whitened Gram; no cone direction can go below it.
    pub phi_lower: f64,
    /// Batch-means standard error of `phi_hat`.
    pub se: f64,
    /// Whitened coefficients of the minimizing direction, one block per variable.
    pub minimizing_direction: Vec<Vec<f64>>,
    /// Per-variable whitened dimension.
    pub ranks: Vec<usize>,
    pub n: usize,
    pub directions: usize,
}

/// Whitened Gram of one sample plus the block layout.
struct Whitened {
    gram: DMatrix<f64>,
    offsets: Vec<usize>,
}

impl Whitened {
    fn block<'a>(&self, a: &'a DVector<f64>, j: usize) -> &'a [f64] {
        &a.as_slice()[self.offsets[j]..self.offsets[j + 1]]
    }

    fn ranks(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

fn whitened_gram(u: &DMatrix<f64>, basis: &BasisSpec) -> Result<Whitened> {
    let (n, p) = (u.nrows(), u.ncols());
    let m = basis.width();
    let d = p * m;
    let partial: Vec<(DMatrix<f64>, DVector<f64>)> = (0..n.div_ceil(GRAM_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut g = DMatrix::zeros(d, d);
            let mut s = DVector::zeros(d);
            let mut row = DVector::zeros(d);
            for i in (c * GRAM_CHUNK)..((c + 1) * GRAM_CHUNK).min(n) {
                for j in 0..p {
                    basis.eval_into(u[(i, j)], &mut row.as_mut_slice()[j * m..(j + 1) * m]);
                }
                g.syger(1.0, &row, &row, 1.0);
                s += &row;
            }
            (g, s)
        })
        .collect();
    let (mut g, mut s) = (DMatrix::zeros(d, d), DVector::zeros(d));
    for (pg, ps) in partial {
        g += pg;
        s += ps;
    }
    g.fill_upper_triangle_with_lower_triangle();
    let nf = n as f64;
    let mean = s / nf;
    let cov = g / nf - &mean * mean.transpose();

    let mut whiten: Vec<DMatrix<f64>> = Vec::with_capacity(p);
    let mut offsets = vec![0];
    for j in 0..p {
        let block = SymMatrix::new(cov.view((j * m, j * m), (m, m)).into_owned())?;
        let (vals, vecs) = eigen_decomposition(&block);
        let top = vals.last().copied().unwrap_or(0.0).max(0.0);
        let keep: Vec<usize> = (0..m).filter(|&k| top > 0.0 && vals[k] > RANK_TOL * top).collect();
        let w = DMatrix::from_fn(m, keep.len(), |r, c| vecs[(r, keep[c])] / vals[keep[c]].sqrt());
        offsets.push(offsets[j] + keep.len());
        whiten.push(w);
    }
    let r = offsets[p];
    let mut gram = DMatrix::zeros(r, r);
    for j in 0..p {
        for k in 0..p {
            let cjk = cov.view((j * m, k * m), (m, m));
            let b = whiten[j].transpose() * cjk * &whiten[k];
            gram.view_mut((offsets[j], offsets[k]), (b.nrows(), b.ncols())).copy_from(&b);
        }
    }
    let gram = (&gram + gram.transpose()) * 0.5;
    Ok(Whitened { gram, offsets })
}

/// `|I|^{2-q} ‖Σ f_j‖² / (Σ_J ‖f_j‖^q)^{2/q}` in whitened coordinates, or
/// `None` off the cone.
fn cone_ratio(w: &Whitened, query: &CompatibilityQuery, a: &DVector<f64>) -> Option<f64> {
    let p = w.offsets.len() - 1;
    let norms: Vec<f64> = (0..p).map(|j| w.block(a, j).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let on: f64 = query.active.iter().map(|&j| norms[j]).sum();
    let off: f64 = (0..p).filter(|&j| !query.is_active(j)).map(|j| norms[j]).sum();
    if on <= 0.0 || on <= query.xi0 * off {
        return None;
    }
    let quad = a.dot(&(&w.gram * a));
    let denom = match query.q {
        2 => norms.iter().map(|x| x * x).sum::<f64>(),
        _ => on * on,
    };
    let scale = (query.active.len() as f64).powi(2 - i32::from(query.q));
    Some(scale * quad.max(0.0) / denom)
}

/// Shrinks the inactive part of `a` by a factor in `[0, 1)` so that it lies
/// strictly inside the cone.
fn into_cone(w: &Whitened, query: &CompatibilityQuery, a: &mut DVector<f64>, shrink: f64) {
    let p = w.offsets.len() - 1;
    let norm = |a: &DVector<f64>, j: usize| w.block(a, j).iter().map(|x| x * x).sum::<f64>().sqrt();
    let on: f64 = query.active.iter().map(|&j| norm(a, j)).sum();
    let off: f64 = (0..p).filter(|&j| !query.is_active(j)).map(|j| norm(a, j)).sum();
    if off == 0.0 || on > query.xi0 * off {
        return;
    }
    let gamma = shrink * on / (query.xi0 * off);
    for j in (0..p).filter(|&j| !query.is_active(j)) {
        a.rows_mut(w.offsets[j], w.offsets[j + 1] - w.offsets[j]).scale_mut(gamma);
    }
}

fn candidate_directions(w: &Whitened, query: &CompatibilityQuery, opts: &PhiOptions) -> Vec<DVector<f64>> {
    let r = w.gram.nrows();
    let shards = opts.n_directions.div_ceil(DIRECTION_SHARD);
    let mut dirs: Vec<DVector<f64>> = (0..shards)
        .into_par_iter()
        .flat_map_iter(|s| {
            let mut rng = stream_rng(opts.seed, s as u64);
            let count = DIRECTION_SHARD.min(opts.n_directions - s * DIRECTION_SHARD);
            (0..count)
                .map(|_| {
                    let mut a = DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let shrink: f64 = rng.random();
                    into_cone(w, query, &mut a, shrink);
                    a
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (_, vecs) = eigen_decomposition(&SymMatrix::new(w.gram.clone()).expect("symmetrized"));
    for c in 0..r.min(3) {
        for shrink in [0.0, 0.5, 1.0 - 1e-9] {
            let mut a = vecs.column(c).into_owned();
            into_cone(w, query, &mut a, shrink);
            dirs.push(a);
        }
    }
    dirs
}

fn min_ratio(w: &Whitened, query: &CompatibilityQuery, dirs: &[DVector<f64>]) -> Option<(f64, usize)> {
    dirs.iter()
        .enumerate()
        .filter_map(|(i, a)| cone_ratio(w, query, a).map(|v| (v, i)))
        .min_by(|x, y| x.0.total_cmp(&y.0))
}

fn project_from(w: &Whitened, query: &CompatibilityQuery) -> Result<()> {
    if query.active.iter().all(|&j| w.offsets[j + 1] == w.offsets[j]) {
        return Err(Error::DegenerateCone("every active block is constant on the sample".into()));
    }
    Ok(())
}

/// Monte Carlo estimate of the compatibility constant from data
/// (`n x p`, one column per covariate).
pub fn empirical_phi_star(
    data: &DMatrix<f64>,
    basis: &BasisSpec,
    query: &CompatibilityQuery,
    opts: &PhiOptions,
) -> Result<PhiReport> {
    basis.validate()?;
    let (n, p) = (data.nrows(), data.ncols());
    if query.active.iter().any(|&j| j >= p) {
        return Err(Error::DimensionMismatch { expected: p, found: query.active.iter().max().unwrap() + 1 });
    }
    if opts.n_directions == 0 {
        return Err(Error::InvalidArgument("at least one direction is required".into()));
    }
    let batches = opts.batches.max(2);
    if n < 2 * batches {
        return Err(Error::InvalidArgument(format!("{n} rows are too few for {batches} batches")));
    }
    let u = quantile_standardize(data)?;
    let w = whitened_gram(&u, basis)?;
    project_from(&w, query)?;
    let dirs = candidate_directions(&w, query, opts);
    let (phi_hat, best) = min_ratio(&w, query, &dirs)
        .ok_or_else(|| Error::DegenerateCone("no sampled direction lies in the cone".into()))?;
    let phi_lower = eigen_decomposition(&SymMatrix::new(w.gram.clone())?).0[0];

    let size = n / batches;
    let estimates: Vec<f64> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let rows: Vec<usize> = (b * size..(b + 1) * size).collect();
            let sub = quantile_standardize(&data.select_rows(&rows))?;
            let wb = whitened_gram(&sub, basis)?;
            if wb.offsets != w.offsets {
                // Rank changed on the batch; fall back to its own candidates.
                let d = candidate_directions(&wb, query, opts);
                return Ok(min_ratio(&wb, query, &d).map_or(f64::NAN, |x| x.0));
            }
            Ok(min_ratio(&wb, query, &dirs).map_or(f64::NAN, |x| x.0))
        })
        .collect::<Result<_>>()?;
    let finite: Vec<f64> = estimates.into_iter().filter(|x| x.is_finite()).collect();
    let se = batch_se(&finite);

    let a = &dirs[best];
    Ok(PhiReport {
        phi_hat,
        phi_lower,
        se,
        minimizing_direction: (0..p).map(|j| w.block(a, j).to_vec()).collect(),
        ranks: w.ranks(),
        n,
        directions: dirs.len(),
    })
}

/// Standard error of the mean of `b` batch estimates.
pub(crate) fn batch_se(values: &[f64]) -> f64 {
    let b = values.len();
    if b < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / b as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    (var / b as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::additive::{sample_design, CopulaDesign};
    use crate::spectra::CorrMatrix;
    use crate::transform::Transform;

    fn design(sigma: CorrMatrix, n: usize, seed: u64) -> DMatrix<f64> {
        let p = sigma.dim();
        sample_design(&CopulaDesign::new(sigma, vec![Transform::Identity; p], n, seed).unwrap()).unwrap()
    }

    #[test]
    fn quantile_scale_is_invariant_to_monotone_maps() {
        let x = DMatrix::from_row_slice(5, 1, &[3.0, -1.0, 7.0, 0.0, 2.0]);
        let y = x.map(|v: f64| v.exp());
        let ux = quantile_standardize(&x).unwrap();
        assert_eq!(ux, quantile_standardize(&y).unwrap());
        assert_eq!(ux.as_slice(), &[0.7, 0.1, 0.9, 0.3, 0.5]);
        let ties = quantile_standardize(&DMatrix::from_row_slice(4, 1, &[1.0, 1.0, 2.0, 0.0])).unwrap();
        assert_eq!(ties.as_slice(), &[0.5, 0.5, 0.875, 0.125]);
    }

    #[test]
    fn independent_design_is_near_one() {
        let data = design(CorrMatrix::identity(3), 20_000, 1);
        let q = CompatibilityQuery::new(vec![0], 3.0, 1, 3).unwrap();
        let r = empirical_phi_star(&data, &BasisSpec::histogram(6), &q, &PhiOptions::default()).unwrap();
        assert!(r.phi_hat >= 0.9, "{r:?}");
        assert!(r.phi_lower <= r.phi_hat + 1e-12);
        assert_eq!(r.ranks, vec![5, 5, 5]);
    }

    #[test]
    fn single_variable_ratio_is_exactly_one() {
        let data = design(CorrMatrix::identity(1), 2_000, 2);
        for q in [1, 2] {
            let query = CompatibilityQuery::new(vec![0], 1.0, q, 1).unwrap();
            let r = empirical_phi_star(&data, &BasisSpec::histogram(4), &query, &PhiOptions::default()).unwrap();
            assert!((r.phi_hat - 1.0).abs() < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn ratio_never_falls_below_whitened_floor() {
        let data = design(CorrMatrix::equicorrelated(4, 0.6).unwrap(), 5_000, 3);
        for (active, q) in [(vec![0], 1u8), (vec![0, 2], 2), (vec![1, 2, 3], 1)] {
            let query = CompatibilityQuery::new(active, 0.5, q, 4).unwrap();
            let basis = BasisSpec::PiecewisePolynomial { bins: 3, degree: 1 };
            let r = empirical_phi_star(&data, &basis, &query, &PhiOptions::default()).unwrap();
            assert!(r.phi_hat >= r.phi_lower - 1e-10, "{r:?}");
            assert!(r.se.is_finite() && r.se >= 0.0);
        }
    }

    #[test]
    fn rejects_bad_queries() {
        assert!(CompatibilityQuery::new(vec![], 1.0, 2, 3).is_err());
        assert!(CompatibilityQuery::new(vec![3], 1.0, 2, 3).is_err());
        assert!(CompatibilityQuery::new(vec![0], 0.0, 2, 3).is_err());
        assert!(CompatibilityQuery::new(vec![0], 1.0, 3, 3).is_err());
        let constant = DMatrix::from_element(100, 2, 1.0);
        let q = CompatibilityQuery::new(vec![0], 1.0, 2, 2).unwrap();
        assert!(matches!(
            empirical_phi_star(&constant, &BasisSpec::histogram(4), &q, &PhiOptions::default()),
            Err(Error::DegenerateCone(_))
        ));
    }
}
