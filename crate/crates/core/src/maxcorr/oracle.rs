use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::joint::DiscreteJoint;
use crate::error::{Error, Result};
use crate::spectra::{eigen_decomposition, SymMatrix, WeightMatrix};

/// One function per variable, stored as its values on that variable's
/// support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockFunctionVector(pub Vec<Vec<f64>>);

impl BlockFunctionVector {
    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.0
    }

    /// `E f_j(X_j)` for every block.
    pub fn means(&self, joint: &DiscreteJoint) -> Vec<f64> {
        self.0.iter().enumerate().map(|(j, f)| dot(f, joint.marginal(j))).collect()
    }

    /// `E f_j(X_j)^2` for every block.
    pub fn second_moments(&self, joint: &DiscreteJoint) -> Vec<f64> {
        self.0
            .iter()
            .enumerate()
            .map(|(j, f)| f.iter().zip(joint.marginal(j)).map(|(v, p)| v * v * p).sum())
            .collect()
    }
}

/// An extreme value together with a function vector attaining it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Extreme {
    pub value: f64,
    pub functions: BlockFunctionVector,
    /// `Var f_j(X_j)`; the vector is normalized so these sum to one.
    pub variances: Vec<f64>,
    /// Blocks whose variance is numerically zero.
    pub zero_blocks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremeResult {
    pub rho_max: Extreme,
    pub rho_min: Extreme,
}

/// Variance below which a block counts as identically zero.
pub const ZERO_BLOCK_TOL: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Orthonormal basis of the complement of `q` (a unit vector) via one
/// Householder reflection; returned as an `s x (s - 1)` matrix.
fn complement_basis(q: &DVector<f64>) -> DMatrix<f64> {
    let s = q.len();
    let sign = if q[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = q.clone();
    v[0] += sign;
    let vv = v.dot(&v);
    let reflector = DMatrix::identity(s, s) - (&v * v.transpose()) * (2.0 / vv);
    reflector.columns(1, s - 1).into_owned()
}

/// Per-variable map from whitened centered coordinates to function values,
/// `B_j = D_j^{-1/2} V_j`, so that `E f_j = 0` and `E f_j^2 = |u_j|^2` for
/// `f_j = B_j u_j`.
fn centered_bases(joint: &DiscreteJoint) -> Vec<DMatrix<f64>> {
    (0..joint.dim())
        .map(|j| {
            let pm = joint.marginal(j);
            let q = DVector::from_iterator(pm.len(), pm.iter().map(|p| p.sqrt()));
            let mut b = complement_basis(&q);
            for (mut row, p) in b.row_iter_mut().zip(pm) {
                row /= p.sqrt();
            }
            b
        })
        .collect()
}

fn check_weights(joint: &DiscreteJoint, w: &WeightMatrix) -> Result<()> {
    if w.dim() != joint.dim() {
        return Err(Error::DimensionMismatch { expected: joint.dim(), found: w.dim() });
    }
    Ok(())
}

struct Operator {
    matrix: SymMatrix,
    bases: Vec<DMatrix<f64>>,
    offsets: Vec<usize>,
}

fn build_operator(joint: &DiscreteJoint, w: &WeightMatrix) -> Result<Operator> {
    check_weights(joint, w)?;
    let p = joint.dim();
    let bases = centered_bases(joint);
    let mut offsets = Vec::with_capacity(p + 1);
    offsets.push(0);
    for b in &bases {
        offsets.push(offsets.last().unwrap() + b.ncols());
    }
    let n = offsets[p];
    let mut h = DMatrix::zeros(n, n);
    for j in 0..p {
        for i in 0..bases[j].ncols() {
            h[(offsets[j] + i, offsets[j] + i)] = w.get(j, j);
        }
    }
    let pairs = joint.all_bivariates();
    for j in 0..p {
        for k in (j + 1)..p {
            let wjk = w.get(j, k);
            if wjk == 0.0 {
                continue;
            }
            let block = bases[j].transpose() * &pairs[j][k] * &bases[k] * wjk;
            let (rj, rk) = (bases[j].ncols(), bases[k].ncols());
            h.view_mut((offsets[j], offsets[k]), (rj, rk)).copy_from(&block);
            h.view_mut((offsets[k], offsets[j]), (rk, rj)).copy_from(&block.transpose());
        }
    }
    Ok(Operator { matrix: SymMatrix::new(h)?, bases, offsets })
}

/// Symmetric matrix of the bilinear form `sum_jk W_jk E[f_j f_k]` on centered
/// functions, in whitened coordinates. Its extreme eigenvalues are the extreme
/// weighted maximal correlations.
pub fn oracle_matrix(joint: &DiscreteJoint, w: &WeightMatrix) -> Result<SymMatrix> {
    Ok(build_operator(joint, w)?.matrix)
}

fn extreme_from(op: &Operator, joint: &DiscreteJoint, value: f64, u: &DVector<f64>) -> Extreme {
    let blocks: Vec<Vec<f64>> = op
        .bases
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let uj = u.rows(op.offsets[j], b.ncols());
            (b * uj).iter().copied().collect()
        })
        .collect();
    let functions = BlockFunctionVector(blocks);
    let variances = functions.second_moments(joint);
    let zero_blocks =
        variances.iter().enumerate().filter(|(_, &v)| v < ZERO_BLOCK_TOL).map(|(j, _)| j).collect();
    Extreme { value, functions, variances, zero_blocks }
}

/// Exact `rho_max` and `rho_min` of a discrete joint with weights `w`, with
/// attaining function vectors.
pub fn exact_extremes(joint: &DiscreteJoint, w: &WeightMatrix) -> Result<ExtremeResult> {
    let op = build_operator(joint, w)?;
    let (values, vectors) = eigen_decomposition(&op.matrix);
    let last = values.len() - 1;
    let top = vectors.column(last).into_owned();
    let bottom = vectors.column(0).into_owned();
    Ok(ExtremeResult {
        rho_max: extreme_from(&op, joint, values[last], &top),
        rho_min: extreme_from(&op, joint, values[0], &bottom),
    })
}

/// Ratio `sum_jk W_jk E[f_j f_k] / sum_j E f_j^2` evaluated atom by atom
/// after centering each block.
pub fn rayleigh_ratio(joint: &DiscreteJoint, w: &WeightMatrix, f: &BlockFunctionVector) -> Result<f64> {
    check_weights(joint, w)?;
    let sizes = joint.support_sizes();
    if f.0.len() != sizes.len() {
        return Err(Error::DimensionMismatch { expected: sizes.len(), found: f.0.len() });
    }
    if let Some((j, b)) = f.0.iter().enumerate().find(|(j, b)| b.len() != sizes[*j]) {
        return Err(Error::DimensionMismatch { expected: sizes[j], found: b.len() });
    }
    let means = f.means(joint);
    let centered: Vec<Vec<f64>> =
        f.0.iter().zip(&means).map(|(b, m)| b.iter().map(|v| v - m).collect()).collect();
    let p = sizes.len();
    let (mut num, mut den) = (0.0, 0.0);
    let mut vals = vec![0.0; p];
    for (idx, prob) in joint.atoms() {
        for j in 0..p {
            vals[j] = centered[j][idx[j]];
        }
        for j in 0..p {
            den += prob * vals[j] * vals[j];
            for k in 0..p {
                num += prob * w.get(j, k) * vals[j] * vals[k];
            }
        }
    }
    if den <= 0.0 {
        return Err(Error::InvalidArgument("function vector has zero variance".into()));
    }
    Ok(num / den)
}

/// Maximal correlation of a pair: the second singular value of
/// `D_1^{-1/2} P_12 D_2^{-1/2}` (the first is always one).
pub fn pair_max_corr(joint: &DiscreteJoint) -> Result<f64> {
    if joint.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, found: joint.dim() });
    }
    let mut c = joint.bivariate(0, 1);
    for (i, p) in joint.marginal(0).iter().enumerate() {
        c.row_mut(i).scale_mut(1.0 / p.sqrt());
    }
    for (k, p) in joint.marginal(1).iter().enumerate() {
        c.column_mut(k).scale_mut(1.0 / p.sqrt());
    }
    let mut sv: Vec<f64> = c.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv[1].clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxcorr::joint::Label;

    fn pair(probs: &[[f64; 2]; 2]) -> DiscreteJoint {
        let s = vec![Label::Num(0.0), Label::Num(1.0)];
        let atoms = (0..2)
            .flat_map(|a| (0..2).map(move |b| (vec![a, b], probs[a][b])))
            .collect();
        DiscreteJoint::new(vec![s.clone(), s], atoms).unwrap()
    }

    #[test]
    fn binary_pair_is_absolute_correlation() {
        // For binary variables the maximal correlation is |corr|.
        let j = pair(&[[0.4, 0.1], [0.2, 0.3]]);
        let (p1, p2): (f64, f64) = (0.5, 0.4);
        let cov = 0.3 - p1 * p2;
        let corr = cov / (p1 * (1.0 - p1) * p2 * (1.0 - p2)).sqrt();
        assert!((pair_max_corr(&j).unwrap() - corr.abs()).abs() < 1e-14);
        let res = exact_extremes(&j, &WeightMatrix::offdiag(2)).unwrap();
        assert!((res.rho_max.value - corr.abs()).abs() < 1e-14);
        assert!((res.rho_min.value + corr.abs()).abs() < 1e-14);
    }

    #[test]
    fn independent_gives_diagonal_spectrum() {
        let j = DiscreteJoint::independent(&[vec![0.3, 0.7], vec![0.2, 0.3, 0.5]]).unwrap();
        let h = oracle_matrix(&j, &WeightMatrix::ones(2)).unwrap();
        assert_eq!(h.dim(), 3);
        let res = exact_extremes(&j, &WeightMatrix::ones(2)).unwrap();
        assert!((res.rho_max.value - 1.0).abs() < 1e-14);
        assert!((res.rho_min.value - 1.0).abs() < 1e-14);
        assert!(pair_max_corr(&j).unwrap() < 1e-14);
    }

    #[test]
    fn achievers_are_centered_and_attain_the_value() {
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
        let w = WeightMatrix::from_rows(&[
            vec![1.0, 0.4, 2.0],
            vec![0.4, 0.5, 1.0],
            vec![2.0, 1.0, 1.0],
        ])
        .unwrap();
        let res = exact_extremes(&j, &w).unwrap();
        for ex in [&res.rho_max, &res.rho_min] {
            for m in ex.functions.means(&j) {
                assert!(m.abs() < 1e-13);
            }
            assert!((ex.variances.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let r = rayleigh_ratio(&j, &w, &ex.functions).unwrap();
            assert!((r - ex.value).abs() < 1e-12);
        }
        assert!(res.rho_min.value <= res.rho_max.value);
    }

    #[test]
    fn dimension_errors() {
        let j = pair(&[[0.25, 0.25], [0.25, 0.25]]);
        assert!(matches!(
            exact_extremes(&j, &WeightMatrix::ones(3)),
            Err(Error::DimensionMismatch { .. })
        ));
        let j3 = DiscreteJoint::independent(&vec![vec![0.5, 0.5]; 3]).unwrap();
        assert!(pair_max_corr(&j3).is_err());
    }
}
