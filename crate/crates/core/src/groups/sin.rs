use rayon::prelude::*;
use serde::Serialize;

use super::law::Law;
use super::system::ENUMERATION_BUDGET;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, DEFAULT_SEED};

/// First moments and second-moment matrix.
type Moments = (Vec<f64>, Vec<Vec<f64>>);

/// Atoms `(value, probability)` of each increment.
type Increments = [Vec<(f64, f64)>];

/// Below this, `E cos(tY)` or `sin(t(y_a - y_b))` counts as zero.
const ZERO_TOL: f64 = 1e-12;

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidT { t, reason: "t must be positive and finite".into() });
    }
    Ok(())
}

/// `c_t ∈ (-π/2, π/2)` solving `E sin(tY - c_t) = 0`, i.e.
/// `tan c_t = E sin(tY) / E cos(tY)`.
pub fn solve_ct(t: f64, law: &Law) -> Result<f64> {
    check_t(t)?;
    match law {
        Law::Cauchy => Ok(0.0),
        Law::Discrete(d) => {
            let es = d.expect(|y| (t * y).sin());
            let ec = d.expect(|y| (t * y).cos());
            if ec.abs() < ZERO_TOL {
                return Err(Error::InvalidT { t, reason: "E cos(tY) vanishes".into() });
            }
            let support: Vec<f64> =
                d.values().iter().zip(d.probs()).filter(|(_, &q)| q > 0.0).map(|(&y, _)| y).collect();
            let degenerate = support
                .iter()
                .all(|&a| support.iter().all(|&b| (t * (a - b)).sin().abs() < ZERO_TOL));
            if degenerate {
                return Err(Error::InvalidT { t, reason: "sin(t(Y1 - Y2)) = 0 almost surely".into() });
            }
            Ok((es / ec).atan())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SinMethod {
    Exact,
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinCorr {
    pub t: f64,
    pub c_t: f64,
    pub method: SinMethod,
    pub matrix: Vec<Vec<f64>>,
    /// Entrywise standard errors for Monte Carlo estimates.
    pub standard_errors: Option<Vec<Vec<f64>>>,
    /// Atoms enumerated by the exact path.
    pub atoms: Option<u128>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinOptions {
    pub budget: u128,
    /// Sample size for the Monte Carlo fallback; `None` turns the fallback
    /// off.
    pub monte_carlo: Option<usize>,
    pub seed: u64,
}

impl Default for SinOptions {
    fn default() -> Self {
        SinOptions { budget: ENUMERATION_BUDGET, monte_carlo: Some(200_000), seed: DEFAULT_SEED }
    }
}

/// Sorting permutation of `m` and the increments between consecutive sorted
/// sizes.
fn increments(m: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by_key(|&j| m[j]);
    let mut prev = 0;
    let inc = order
        .iter()
        .map(|&j| {
            let d = m[j] - prev;
            prev = m[j];
            d
        })
        .collect();
    (order, inc)
}

fn corr_from_moments(mean: &[f64], second: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let p = mean.len();
    let var: Vec<f64> = (0..p).map(|j| second[j][j] - mean[j] * mean[j]).collect();
    if let Some(j) = var.iter().position(|&v| !(v > 1e-300)) {
        return Err(Error::DegenerateVariable { index: j });
    }
    Ok((0..p)
        .map(|j| {
            (0..p)
                .map(|k| {
                    if j == k {
                        1.0
                    } else {
                        (second[j][k] - mean[j] * mean[k]) / (var[j] * var[k]).sqrt()
                    }
                })
                .collect()
        })
        .collect())
}

/// Moments of `sin(t S - m c)` along the sorted nested chain, by
/// enumerating increment atoms; the first increment is sharded across
/// workers and reduced in order.
fn exact_moments(t: f64, c: f64, sorted_m: &[usize], inc: &[Vec<(f64, f64)>]) -> Moments {
    let p = sorted_m.len();
    fn walk(
        depth: usize,
        sum: f64,
        prob: f64,
        x: &mut Vec<f64>,
        ctx: (f64, f64, &[usize], &Increments),
        acc: &mut Moments,
    ) {
        let (t, c, m, inc) = ctx;
        if depth == m.len() {
            for j in 0..m.len() {
                acc.0[j] += prob * x[j];
                for k in j..m.len() {
                    acc.1[j][k] += prob * x[j] * x[k];
                }
            }
            return;
        }
        for &(d, q) in &inc[depth] {
            let s = sum + d;
            x[depth] = (t * s - m[depth] as f64 * c).sin();
            walk(depth + 1, s, prob * q, x, ctx, acc);
        }
    }
    let parts: Vec<(Vec<f64>, Vec<Vec<f64>>)> = inc[0]
        .par_iter()
        .map(|&(d, q)| {
            let mut acc = (vec![0.0; p], vec![vec![0.0; p]; p]);
            let mut x = vec![0.0; p];
            x[0] = (t * d - sorted_m[0] as f64 * c).sin();
            walk(1, d, q, &mut x, (t, c, sorted_m, inc), &mut acc);
            acc
        })
        .collect();
    let mut mean = vec![0.0; p];
    let mut second = vec![vec![0.0; p]; p];
    for (m1, m2) in parts {
        for j in 0..p {
            mean[j] += m1[j];
            for k in j..p {
                second[j][k] += m2[j][k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            second[j][k] = second[k][j];
        }
    }
    (mean, second)
}

fn monte_carlo(t: f64, c: f64, m: &[usize], law: &Law, n: usize, seed: u64) -> Result<[Vec<Vec<f64>>; 2]> {
    const SHARD: usize = 10_000;
    let p = m.len();
    let (order, inc) = increments(m);
    let shards = n.div_ceil(SHARD);
    let parts: Vec<(Vec<f64>, Vec<Vec<f64>>)> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = stream_rng(seed, shard as u64);
            let rows = SHARD.min(n - shard * SHARD);
            let mut s1 = vec![0.0; p];
            let mut s2 = vec![vec![0.0; p]; p];
            let mut x = vec![0.0; p];
            for _ in 0..rows {
                let mut s = 0.0;
                for (pos, (&j, &d)) in order.iter().zip(&inc).enumerate() {
                    for _ in 0..d {
                        s += law.sample(&mut rng);
                    }
                    x[pos] = (t * s - m[j] as f64 * c).sin();
                }
                for a in 0..p {
                    s1[a] += x[a];
                    for b in a..p {
                        s2[a][b] += x[a] * x[b];
                    }
                }
            }
            (s1, s2)
        })
        .collect();
    let mut mean = vec![0.0; p];
    let mut second = vec![vec![0.0; p]; p];
    for (s1, s2) in parts {
        for a in 0..p {
            mean[a] += s1[a] / n as f64;
            for b in a..p {
                second[a][b] += s2[a][b] / n as f64;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            second[a][b] = second[b][a];
        }
    }
    let sorted = corr_from_moments(&mean, &second)?;
    let mut matrix = vec![vec![0.0; p]; p];
    let mut se = vec![vec![0.0; p]; p];
    for (a, &j) in order.iter().enumerate() {
        for (b, &k) in order.iter().enumerate() {
            let r = sorted[a][b];
            matrix[j][k] = r;
            se[j][k] = if j == k { 0.0 } else { (1.0 - r * r) / (n as f64).sqrt() };
        }
    }
    Ok([matrix, se])
}

/// Correlation matrix of `sin(t S_{m_j} - m_j c_t)` for nested partial sums
/// `S_{m_j}` of i.i.d. draws from `law`.
pub fn sin_construction_corr(t: f64, m: &[usize], law: &Law, opts: &SinOptions) -> Result<SinCorr> {
    if m.is_empty() || m.contains(&0) {
        return Err(Error::InvalidArgument("nested sizes must be positive".into()));
    }
    let c = solve_ct(t, law)?;
    let p = m.len();

    if let Law::Cauchy = law {
        let phi = |u: f64| law.symmetric_cf(u).expect("symmetric law");
        let (p1, p2) = (phi(t), phi(2.0 * t));
        let var = |mj: usize| 0.5 * (1.0 - p2.powi(mj as i32));
        let matrix = (0..p)
            .map(|j| {
                (0..p)
                    .map(|k| {
                        let (lo, hi) = (m[j].min(m[k]), m[j].max(m[k]));
                        if j == k {
                            1.0
                        } else {
                            p1.powi((hi - lo) as i32) * (var(lo) / var(hi)).sqrt()
                        }
                    })
                    .collect()
            })
            .collect();
        return Ok(SinCorr { t, c_t: c, method: SinMethod::Analytic, matrix, standard_errors: None, atoms: None });
    }
    let Law::Discrete(d) = law else { unreachable!() };

    let (order, inc) = increments(m);
    let inc_laws: Vec<Vec<(f64, f64)>> = inc.iter().map(|&k| d.convolve_power(k)).collect();
    let required = inc_laws.iter().try_fold(1u128, |acc, l| acc.checked_mul(l.len() as u128)).unwrap_or(u128::MAX);
    if required > opts.budget {
        let Some(n) = opts.monte_carlo else {
            return Err(Error::BudgetExceeded { required, budget: opts.budget });
        };
        let [matrix, se] = monte_carlo(t, c, m, law, n, opts.seed)?;
        return Ok(SinCorr {
            t,
            c_t: c,
            method: SinMethod::MonteCarlo,
            matrix,
            standard_errors: Some(se),
            atoms: None,
        });
    }
    let sorted_m: Vec<usize> = order.iter().map(|&j| m[j]).collect();
    let (mean, second) = exact_moments(t, c, &sorted_m, &inc_laws);
    let sorted = corr_from_moments(&mean, &second)
        .map_err(|_| Error::InvalidT { t, reason: "a transformed sum is constant".into() })?;
    let mut matrix = vec![vec![0.0; p]; p];
    for (a, &j) in order.iter().enumerate() {
        for (b, &k) in order.iter().enumerate() {
            matrix[j][k] = sorted[a][b];
        }
    }
    Ok(SinCorr { t, c_t: c, method: SinMethod::Exact, matrix, standard_errors: None, atoms: Some(required) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::DiscreteLaw;

    #[test]
    fn ct_examples() {
        let r = Law::Discrete(DiscreteLaw::rademacher());
        for t in [0.1, 0.7, 2.0] {
            assert_eq!(solve_ct(t, &r).unwrap(), 0.0);
        }
        let b = Law::Discrete(DiscreteLaw::bernoulli(0.5).unwrap());
        for t in [0.1, 0.7, 2.0] {
            let c = solve_ct(t, &b).unwrap();
            assert!((c - t / 2.0).abs() < 1e-14);
            if let Law::Discrete(d) = &b {
                assert!(d.expect(|y| (t * y - c).sin()).abs() < 1e-12);
            }
        }
        assert_eq!(solve_ct(0.5, &Law::Cauchy).unwrap(), 0.0);
    }

    #[test]
    fn invalid_t() {
        let r = Law::Discrete(DiscreteLaw::rademacher());
        // E cos(tY) = cos t vanishes at π/2.
        assert!(matches!(solve_ct(std::f64::consts::FRAC_PI_2, &r), Err(Error::InvalidT { .. })));
        // Bernoulli with t = 2π: sin(t(Y1 - Y2)) is always zero.
        let b = Law::Discrete(DiscreteLaw::bernoulli(0.3).unwrap());
        assert!(matches!(solve_ct(2.0 * std::f64::consts::PI, &b), Err(Error::InvalidT { .. })));
        assert!(solve_ct(0.0, &r).is_err());
        assert!(solve_ct(-1.0, &r).is_err());
    }

    #[test]
    fn rademacher_pair() {
        let r = Law::Discrete(DiscreteLaw::rademacher());
        let out = sin_construction_corr(0.01, &[1, 2], &r, &SinOptions::default()).unwrap();
        assert_eq!(out.method, SinMethod::Exact);
        assert!((out.matrix[0][1] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
    }

    #[test]
    fn exact_agrees_with_characteristic_function_for_symmetric_laws() {
        let law = DiscreteLaw::new(vec![-2.0, 0.0, 2.0], vec![0.25, 0.5, 0.25]).unwrap();
        let t = 0.3;
        let phi = |u: f64| law.expect(|y| (u * y).cos());
        let m = [3usize, 1, 2];
        let out = sin_construction_corr(t, &m, &Law::Discrete(law.clone()), &SinOptions::default()).unwrap();
        let var = |k: usize| 1.0 - phi(2.0 * t).powi(k as i32);
        for j in 0..3 {
            for k in 0..3 {
                if j == k {
                    continue;
                }
                let (lo, hi) = (m[j].min(m[k]), m[j].max(m[k]));
                let want = phi(t).powi((hi - lo) as i32) * (var(lo) / var(hi)).sqrt();
                assert!((out.matrix[j][k] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn monte_carlo_fallback() {
        let r = Law::Discrete(DiscreteLaw::rademacher());
        let opts = SinOptions { budget: 4, monte_carlo: Some(40_000), seed: 7 };
        let out = sin_construction_corr(0.2, &[1, 2, 4], &r, &opts).unwrap();
        assert_eq!(out.method, SinMethod::MonteCarlo);
        let exact = sin_construction_corr(0.2, &[1, 2, 4], &r, &SinOptions::default()).unwrap();
        let se = out.standard_errors.unwrap();
        for j in 0..3 {
            for k in 0..3 {
                assert!((out.matrix[j][k] - exact.matrix[j][k]).abs() <= 5.0 * se[j][k] + 1e-12);
            }
        }
        let strict = SinOptions { budget: 4, monte_carlo: None, seed: 7 };
        assert!(matches!(
            sin_construction_corr(0.2, &[1, 2, 4], &r, &strict),
            Err(Error::BudgetExceeded { .. })
        ));
    }
}
