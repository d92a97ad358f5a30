use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::joint::{DiscreteJoint, Label};
use super::oracle::{BlockFunctionVector, Extreme, ExtremeResult, ZERO_BLOCK_TOL};
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::spectra::WeightMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AceOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
    /// Quantile-bin each column into this many cells before estimating.
    pub bins: Option<usize>,
}

impl Default for AceOptions {
    fn default() -> Self {
        AceOptions { max_iter: 10_000, tol: 1e-12, seed: crate::rng::DEFAULT_SEED, bins: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AceReport {
    pub extremes: ExtremeResult,
    pub converged: bool,
    pub iterations: [usize; 2],
    pub last_change: [f64; 2],
}

impl AceReport {
    /// Turns a non-converged run into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations[0].max(self.iterations[1]),
                last_change: self.last_change[0].max(self.last_change[1]),
            })
        }
    }
}

/// Cell index of every value when the column is cut at its empirical
/// `k / bins` quantiles. Ties always share a cell.
pub fn quantile_bins(column: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins < 2 {
        return Err(Error::InvalidArgument("need at least two bins".into()));
    }
    if column.is_empty() {
        return Err(Error::InvalidArgument("empty column".into()));
    }
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let cuts: Vec<f64> = (1..bins).map(|k| sorted[(k * n / bins).min(n - 1)]).collect();
    Ok(column.iter().map(|x| cuts.partition_point(|c| c <= x)).collect())
}

/// Empirical joint of the rows of `samples`; each column's distinct values
/// (or quantile cells) become its support.
pub fn empirical_joint(samples: &[Vec<f64>], bins: Option<usize>) -> Result<DiscreteJoint> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let p = samples[0].len();
    if let Some(row) = samples.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch { expected: p, found: row.len() });
    }
    if let Some((i, j)) = samples
        .iter()
        .enumerate()
        .find_map(|(i, r)| r.iter().position(|v| !v.is_finite()).map(|j| (i, j)))
    {
        return Err(Error::NonFinite { row: i, col: j });
    }
    let mut supports = Vec::with_capacity(p);
    let mut codes = vec![vec![0usize; p]; n];
    for j in 0..p {
        let column: Vec<f64> = samples.iter().map(|r| r[j]).collect();
        match bins {
            Some(b) => {
                let cells = quantile_bins(&column, b)?;
                for (code, c) in codes.iter_mut().zip(cells) {
                    code[j] = c;
                }
                supports.push((0..b).map(|c| Label::Num(c as f64)).collect());
            }
            None => {
                let mut distinct = column.clone();
                distinct.sort_by(f64::total_cmp);
                distinct.dedup();
                for (code, v) in codes.iter_mut().zip(&column) {
                    code[j] = distinct.partition_point(|d| d < v);
                }
                supports.push(distinct.into_iter().map(Label::Num).collect());
            }
        }
    }
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for code in codes {
        *counts.entry(code).or_insert(0) += 1;
    }
    let atoms = counts.into_iter().map(|(idx, c)| (idx, c as f64 / n as f64)).collect();
    DiscreteJoint::new(supports, atoms)
}

/// Samples from a CSV with a header row, one column per variable.
pub fn samples_from_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("samples line {}: {e}", line + 2)))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("samples line {}: {e}", line + 2))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Conditional-expectation operators `E[f_k(X_k) | X_j]` as row-stochastic
/// matrices `D_j^{-1} P_jk`.
struct Conditionals {
    ops: Vec<Vec<Option<DMatrix<f64>>>>,
    marginals: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

impl Conditionals {
    fn new(joint: &DiscreteJoint, w: &WeightMatrix) -> Self {
        let p = joint.dim();
        let pairs = joint.all_bivariates();
        let mut ops = vec![vec![None; p]; p];
        for j in 0..p {
            for k in (j + 1)..p {
                if w.get(j, k) == 0.0 {
                    continue;
                }
                let pjk = &pairs[j][k];
                let mut a = pjk.clone();
                for (i, m) in joint.marginal(j).iter().enumerate() {
                    a.row_mut(i).scale_mut(w.get(j, k) / m);
                }
                let mut b = pjk.transpose();
                for (i, m) in joint.marginal(k).iter().enumerate() {
                    b.row_mut(i).scale_mut(w.get(j, k) / m);
                }
                ops[j][k] = Some(a);
                ops[k][j] = Some(b);
            }
        }
        Conditionals {
            ops,
            marginals: (0..p).map(|j| joint.marginal(j).to_vec()).collect(),
            diag: (0..p).map(|j| w.get(j, j)).collect(),
        }
    }

    /// `(T f)_j = W_jj f_j + sum_{k != j} W_jk E[f_k | X_j]`.
    fn apply(&self, f: &[DVector<f64>]) -> Vec<DVector<f64>> {
        (0..f.len())
            .map(|j| {
                let mut out = &f[j] * self.diag[j];
                for (k, op) in self.ops[j].iter().enumerate() {
                    if let Some(a) = op {
                        out += a * &f[k];
                    }
                }
                out
            })
            .collect()
    }

    fn inner(&self, f: &[DVector<f64>], g: &[DVector<f64>]) -> f64 {
        f.iter()
            .zip(g)
            .zip(&self.marginals)
            .map(|((a, b), m)| a.iter().zip(b.iter()).zip(m).map(|((x, y), p)| x * y * p).sum::<f64>())
            .sum()
    }

    fn center(&self, f: &mut [DVector<f64>]) {
        for (v, m) in f.iter_mut().zip(&self.marginals) {
            let mean: f64 = v.iter().zip(m).map(|(x, p)| x * p).sum();
            v.add_scalar_mut(-mean);
        }
    }

    fn normalize(&self, f: &mut [DVector<f64>]) -> bool {
        let norm = self.inner(f, f).sqrt();
        if !(norm > 0.0) {
            return false;
        }
        f.iter_mut().for_each(|v| *v /= norm);
        true
    }
}

struct Run {
    value: f64,
    f: Vec<DVector<f64>>,
    iterations: usize,
    change: f64,
    converged: bool,
}

fn power_iterate(c: &Conditionals, shift: f64, sign: f64, seed: u64, stream: u64, opts: &AceOptions) -> Run {
    let mut rng = stream_rng(seed, stream);
    let mut f: Vec<DVector<f64>> = c
        .marginals
        .iter()
        .map(|m| DVector::from_fn(m.len(), |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    c.center(&mut f);
    c.normalize(&mut f);
    let mut value = c.inner(&f, &c.apply(&f));
    let mut change = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let tf = c.apply(&f);
        // (shift I + sign T) f, which has a nonnegative spectrum.
        let mut next: Vec<DVector<f64>> =
            f.iter().zip(&tf).map(|(a, b)| a * shift + b * sign).collect();
        c.center(&mut next);
        if !c.normalize(&mut next) {
            return Run { value, f, iterations: it, change: 0.0, converged: true };
        }
        f = next;
        let new_value = c.inner(&f, &c.apply(&f));
        change = (new_value - value).abs();
        value = new_value;
        if change < opts.tol {
            return Run { value, f, iterations: it, change, converged: true };
        }
    }
    Run { value, f, iterations: opts.max_iter, change, converged: false }
}

fn to_extreme(run: &Run, c: &Conditionals) -> Extreme {
    let functions = BlockFunctionVector(run.f.iter().map(|v| v.iter().copied().collect()).collect());
    let variances: Vec<f64> = run
        .f
        .iter()
        .zip(&c.marginals)
        .map(|(v, m)| v.iter().zip(m).map(|(x, p)| x * x * p).sum())
        .collect();
    let zero_blocks =
        variances.iter().enumerate().filter(|(_, &v)| v < ZERO_BLOCK_TOL).map(|(j, _)| j).collect();
    Extreme { value: run.value, functions, variances, zero_blocks }
}

/// Alternating-conditional-expectations estimate of the extreme weighted
/// maximal correlations of a discrete joint (typically an empirical one).
pub fn ace_on_joint(joint: &DiscreteJoint, w: &WeightMatrix, opts: &AceOptions) -> Result<AceReport> {
    if w.dim() != joint.dim() {
        return Err(Error::DimensionMismatch { expected: joint.dim(), found: w.dim() });
    }
    if opts.max_iter == 0 || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("max_iter and tol must be positive".into()));
    }
    let c = Conditionals::new(joint, w);
    let shift = w.max_row_sum();
    let top = power_iterate(&c, shift, 1.0, opts.seed, 0, opts);
    let bottom = power_iterate(&c, shift, -1.0, opts.seed, 1, opts);
    Ok(AceReport {
        extremes: ExtremeResult { rho_max: to_extreme(&top, &c), rho_min: to_extreme(&bottom, &c) },
        converged: top.converged && bottom.converged,
        iterations: [top.iterations, bottom.iterations],
        last_change: [top.change, bottom.change],
    })
}

/// ACE on raw samples (rows are observations).
pub fn ace_estimate(samples: &[Vec<f64>], w: &WeightMatrix, opts: &AceOptions) -> Result<AceReport> {
    let joint = empirical_joint(samples, opts.bins)?;
    ace_on_joint(&joint, w, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxcorr::oracle::exact_extremes;

    #[test]
    fn bins_are_balanced_and_tie_safe() {
        let col: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let cells = quantile_bins(&col, 4).unwrap();
        for c in 0..4 {
            assert_eq!(cells.iter().filter(|&&x| x == c).count(), 25);
        }
        let tied = quantile_bins(&[1.0, 1.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(tied[0], tied[1]);
        assert!(quantile_bins(&col, 1).is_err());
    }

    #[test]
    fn empirical_joint_counts() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let j = empirical_joint(&rows, None).unwrap();
        assert_eq!(j.marginal(0), &[0.5, 0.5]);
        assert_eq!(j.marginal(1), &[0.25, 0.75]);
        assert!(empirical_joint(&[vec![0.0, f64::NAN]], None).is_err());
    }

    #[test]
    fn matches_exact_extremes() {
        let j = DiscreteJoint::new(
            vec![(0..3).map(|i| Label::Num(i as f64)).collect(); 3],
            vec![
                (vec![0, 0, 1], 0.2),
                (vec![1, 2, 0], 0.15),
                (vec![2, 1, 1], 0.25),
                (vec![0, 2, 2], 0.1),
                (vec![1, 0, 2], 0.3),
            ],
        )
        .unwrap();
        let w = WeightMatrix::ones(3);
        let exact = exact_extremes(&j, &w).unwrap();
        let est = ace_on_joint(&j, &w, &AceOptions { tol: 1e-14, ..AceOptions::default() })
            .unwrap()
            .require_converged()
            .unwrap();
        assert!((est.extremes.rho_max.value - exact.rho_max.value).abs() < 1e-9);
        assert!((est.extremes.rho_min.value - exact.rho_min.value).abs() < 1e-9);
    }

    #[test]
    fn reports_non_convergence() {
        let s = vec![Label::Num(0.0), Label::Num(1.0)];
        let atoms = vec![(vec![0, 0], 0.4), (vec![0, 1], 0.1), (vec![1, 0], 0.2), (vec![1, 1], 0.3)];
        let j = DiscreteJoint::new(vec![s.clone(), s], atoms).unwrap();
        let w = WeightMatrix::offdiag(2);
        let r = ace_on_joint(&j, &w, &AceOptions { max_iter: 1, tol: 1e-300, ..AceOptions::default() });
        let r = r.unwrap();
        assert!(!r.converged);
        assert!(matches!(r.require_converged(), Err(Error::NotConverged { .. })));
    }

    #[test]
    fn csv_samples() {
        let rows = samples_from_csv("x,y\n1,2\n3,4\n").unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(samples_from_csv("x,y\n1,a\n").is_err());
    }
}
