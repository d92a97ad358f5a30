use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::Serialize;

use super::hermite_eval;
use crate::error::{Error, Result};

/// Gauss-Hermite rule for the standard normal density: `sum_i w_i g(x_i)`
/// approximates `E g(Z)` and is exact for polynomials of degree `< 2n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `sum_i w_i g(x_i)`.
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }
}

/// Builds the `n`-point rule from the Jacobi matrix of the normalized
/// probabilists' Hermite recurrence (nodes are its eigenvalues), then polishes
/// each node with Newton steps on `H_n` and recomputes the weights from the
/// Christoffel function `w_i = 1 / sum_{k<n} H_k(x_i)^2`.
pub fn gauss_hermite_rule(n: usize) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::InvalidArgument("quadrature needs at least one node".into()));
    }
    if n == 1 {
        return Ok(QuadratureRule { nodes: vec![0.0], weights: vec![1.0] });
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let sqrt_n = (n as f64).sqrt();
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (hn, hn1) = (hermite_eval(n, *x), hermite_eval(n - 1, *x));
            let step = hn / (sqrt_n * hn1);
            if !step.is_finite() {
                break;
            }
            *x -= step;
        }
    }
    // Exact reflection symmetry about zero.
    for i in 0..n / 2 {
        let x = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    let mut weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let (mut prev, mut cur) = (0.0, 1.0);
            let mut sum = 1.0;
            for k in 1..n {
                let next = (x * cur - ((k - 1) as f64).sqrt() * prev) / (k as f64).sqrt();
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();
    for i in 0..n / 2 {
        let w = 0.5 * (weights[i] + weights[n - 1 - i]);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule { nodes, weights })
}

/// Shared, lazily built rules keyed by node count.
pub fn cached_rule(n: usize) -> Result<Arc<QuadratureRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&n) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(gauss_hermite_rule(n)?);
    cache.lock().expect("rule cache poisoned").insert(n, Arc::clone(&rule));
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            // (k - 1)!!
            (1..k).step_by(2).map(|v| v as f64).product()
        }
    }

    #[test]
    fn small_rules() {
        assert_eq!(
            gauss_hermite_rule(1).unwrap(),
            QuadratureRule { nodes: vec![0.0], weights: vec![1.0] }
        );
        let r2 = gauss_hermite_rule(2).unwrap();
        assert!((r2.nodes[0] + 1.0).abs() < 1e-15 && (r2.nodes[1] - 1.0).abs() < 1e-15);
        assert!((r2.weights[0] - 0.5).abs() < 1e-15 && (r2.weights[1] - 0.5).abs() < 1e-15);
        let r3 = gauss_hermite_rule(3).unwrap();
        assert!((r3.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-13);
        assert!(gauss_hermite_rule(0).is_err());
    }

    #[test]
    fn exact_on_monomials() {
        for n in [4usize, 9, 20, 40] {
            let rule = gauss_hermite_rule(n).unwrap();
            assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
            for k in 0..(2 * n as u32).min(24) {
                let got = rule.integrate(|x| x.powi(k as i32));
                let want = normal_moment(k);
                let scale = rule.integrate(|x| x.abs().powi(k as i32)).max(1.0);
                assert!(
                    (got - want).abs() <= 1e-11 * scale,
                    "n={n} k={k}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn cache_returns_shared_rule() {
        let a = cached_rule(12).unwrap();
        let b = cached_rule(12).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }
}
