use nalgebra::DMatrix;
use serde::Serialize;

use super::{spectrum, SymMatrix};
use crate::error::{Error, Result};

/// A correlation kernel sampled on a quadrature grid of `[0, 1]`.
#[derive(Debug, Clone)]
pub struct KernelGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    values: DMatrix<f64>,
}

impl KernelGrid {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>, values: DMatrix<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < 2 {
            return Err(Error::InvalidArgument("a kernel grid needs at least two nodes".into()));
        }
        if weights.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: weights.len() });
        }
        if values.nrows() != n || values.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: values.nrows() });
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) || nodes[0] < 0.0 || nodes[n - 1] > 1.0 {
            return Err(Error::InvalidArgument("nodes must increase strictly inside [0, 1]".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument("quadrature weights must be positive".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (values[(i, j)], values[(j, i)]);
                if !a.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::AsymmetricKernel { row: i, col: j });
                }
            }
        }
        Ok(KernelGrid { nodes, weights, values })
    }

    /// Midpoint grid `t_i = (i - 1/2) / n` with uniform weights `1/n`. The
    /// grid never touches 0, so kernels singular at the origin are fine.
    pub fn midpoint<F>(n: usize, kernel: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<f64>,
    {
        if n < 2 {
            return Err(Error::InvalidArgument("a kernel grid needs at least two nodes".into()));
        }
        let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let mut values = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = kernel(nodes[i], nodes[j])?;
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        Self::new(nodes, vec![1.0 / n as f64; n], values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// The symmetrized Nystrom matrix `sqrt(w_i) K(t_i, t_j) sqrt(w_j)`.
    pub fn nystrom_matrix(&self) -> SymMatrix {
        let sw: Vec<f64> = self.weights.iter().map(|w| w.sqrt()).collect();
        let n = self.len();
        let m = DMatrix::from_fn(n, n, |i, j| sw[i] * self.values[(i, j)] * sw[j]);
        SymMatrix::new(m).expect("validated kernel grid yields a symmetric matrix")
    }
}

/// Eigenvalues (ascending) of the Nystrom discretization of `K`.
pub fn nystrom_eigs(k: &KernelGrid) -> Vec<f64> {
    spectrum(&k.nystrom_matrix())
}

/// Correlation kernel of standard Brownian motion, `(s ^ t) / sqrt(s t)`.
pub fn brownian_corr_kernel(s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0) || !(t > 0.0) {
        return Err(Error::SingularKernel { s, t });
    }
    if s == t {
        return Ok(1.0);
    }
    Ok((s.min(t) / s.max(t)).sqrt())
}

/// Richardson extrapolation of a sequence computed at `n`, `2n`, `4n`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Extrapolation {
    pub estimate: f64,
    /// Fitted convergence order `alpha` in `value(n) ~ limit + C n^-alpha`.
    pub order: f64,
}

/// Extrapolates three values computed on successively doubled grids. Returns
/// `None` when the successive differences do not contract geometrically.
pub fn richardson_extrapolate(v1: f64, v2: f64, v4: f64) -> Option<Extrapolation> {
    let d1 = v1 - v2;
    let d2 = v2 - v4;
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() || d2.abs() >= d1.abs() {
        return None;
    }
    let order = (d1 / d2).log2();
    let estimate = v4 - d2 / ((2f64).powf(order) - 1.0);
    Some(Extrapolation { estimate, order })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brownian_kernel_values() {
        assert_eq!(brownian_corr_kernel(0.3, 0.3).unwrap(), 1.0);
        assert!((brownian_corr_kernel(0.25, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(brownian_corr_kernel(0.0, 0.5).is_err());
        assert!(brownian_corr_kernel(0.5, -1.0).is_err());
    }

    #[test]
    fn rank_one_kernels() {
        let ones = KernelGrid::midpoint(64, |_, _| Ok(1.0)).unwrap();
        let ev = nystrom_eigs(&ones);
        assert!((ev[ev.len() - 1] - 1.0).abs() < 1e-12);
        assert!(ev[0].abs() < 1e-12);

        // Midpoint rule on t^2: sum ((i-1/2)/n)^2 / n = 1/3 - 1/(12 n^2).
        let n = 200;
        let st = KernelGrid::midpoint(n, |s, t| Ok(s * t)).unwrap();
        let top = *nystrom_eigs(&st).last().unwrap();
        let exact = 1.0 / 3.0 - 1.0 / (12.0 * (n * n) as f64);
        assert!((top - exact).abs() < 1e-12);
    }

    #[test]
    fn midpoint_weights_sum_to_one() {
        let g = KernelGrid::midpoint(37, |_, _| Ok(0.0)).unwrap();
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.nodes()[0] > 0.0);
    }

    #[test]
    fn asymmetric_grid_rejected() {
        let vals = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.3, 1.0]);
        assert!(matches!(
            KernelGrid::new(vec![0.25, 0.75], vec![0.5, 0.5], vals),
            Err(Error::AsymmetricKernel { .. })
        ));
        assert!(KernelGrid::midpoint(1, |_, _| Ok(1.0)).is_err());
    }

    #[test]
    fn richardson_recovers_power_law() {
        let f = |n: f64| 2.0 + 3.0 / (n * n);
        let ex = richardson_extrapolate(f(10.0), f(20.0), f(40.0)).unwrap();
        assert!((ex.estimate - 2.0).abs() < 1e-12);
        assert!((ex.order - 2.0).abs() < 1e-9);
        assert!(richardson_extrapolate(1.0, 1.0, 1.0).is_none());
    }
}
