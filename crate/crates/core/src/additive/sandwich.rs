use rayon::prelude::*;
use serde::Serialize;

use super::compat::batch_se;
use super::design::{copula_bound, sample_latent};
use crate::error::{Error, Result};
use crate::spectra::CorrMatrix;
use crate::transform::Transform;

/// Width of the Monte Carlo acceptance band, in standard errors.
pub const SANDWICH_Z: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichOptions {
    pub n_mc: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        SandwichOptions { n_mc: 200_000, batches: 20, seed: crate::rng::DEFAULT_SEED }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    /// `Var(Σ_j d_j(X_j))`.
    pub variance: f64,
    /// `Σ_j Var(d_j(X_j))`.
    pub energy: f64,
    pub component_energies: Vec<f64>,
    /// `λ_min(Σ^z) · energy`.
    pub lower: f64,
    /// `λ_max(Σ^z) · energy`.
    pub upper: f64,
    pub se_lower_gap: f64,
    pub se_upper_gap: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
    pub holds: bool,
    /// Every difference vanished identically on the sample.
    pub degenerate: bool,
    pub n_mc: usize,
}

struct Moments {
    variance: f64,
    energies: Vec<f64>,
}

fn moments(d: &[Vec<f64>], rows: std::ops::Range<usize>) -> Moments {
    let n = rows.len() as f64;
    let var = |v: &mut dyn Iterator<Item = f64>| {
        let (mut s, mut s2) = (0.0, 0.0);
        for x in v {
            s += x;
            s2 += x * x;
        }
        (s2 / n - (s / n).powi(2)).max(0.0) * n / (n - 1.0)
    };
    let energies = d.iter().map(|col| var(&mut col[rows.clone()].iter().copied())).collect();
    let variance = var(&mut rows.map(|i| d.iter().map(|col| col[i]).sum::<f64>()));
    Moments { variance, energies }
}

/// Monte Carlo check of `λ_min E ≤ Var(Σ d_j) ≤ λ_max E` for the differences
/// `d_j = f̂_j - f_j` evaluated at `X_j = T_j(Z_j)`.
pub fn sandwich_check(
    sigma_z: &CorrMatrix,
    transforms: &[Transform],
    f: &[Transform],
    f_hat: &[Transform],
    opts: &SandwichOptions,
) -> Result<SandwichReport> {
    let p = sigma_z.dim();
    for len in [transforms.len(), f.len(), f_hat.len()] {
        if len != p {
            return Err(Error::DimensionMismatch { expected: p, found: len });
        }
    }
    let batches = opts.batches.max(2);
    if opts.n_mc < 2 * batches {
        return Err(Error::InvalidArgument(format!("n_mc = {} is too small for {batches} batches", opts.n_mc)));
    }
    let bound = copula_bound(sigma_z);
    let z = sample_latent(sigma_z, opts.n_mc, opts.seed)?;
    let d: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|j| {
            z.column(j)
                .iter()
                .map(|&zj| {
                    let x = transforms[j].eval(zj);
                    f_hat[j].eval(x) - f[j].eval(x)
                })
                .collect()
        })
        .collect();
    if let Some((j, _)) = d.iter().enumerate().find(|(_, c)| c.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite { row: 0, col: j });
    }

    let n = opts.n_mc;
    if d.iter().all(|c| c.iter().all(|&v| v == 0.0)) {
        return Ok(SandwichReport {
            variance: 0.0,
            energy: 0.0,
            component_energies: vec![0.0; p],
            lower: 0.0,
            upper: 0.0,
            se_lower_gap: 0.0,
            se_upper_gap: 0.0,
            lower_holds: true,
            upper_holds: true,
            holds: true,
            degenerate: true,
            n_mc: n,
        });
    }

    let full = moments(&d, 0..n);
    let energy: f64 = full.energies.iter().sum();
    let size = n / batches;
    let gaps: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let m = moments(&d, b * size..(b + 1) * size);
            let e: f64 = m.energies.iter().sum();
            (m.variance - bound.kappa0 * e, bound.lambda_max * e - m.variance)
        })
        .collect();
    let lower_gaps: Vec<f64> = gaps.iter().map(|g| g.0).collect();
    let upper_gaps: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    let se_lower_gap = batch_se(&lower_gaps);
    let se_upper_gap = batch_se(&upper_gaps);
    let lower = bound.kappa0 * energy;
    let upper = bound.lambda_max * energy;
    let lower_holds = full.variance - lower >= -SANDWICH_Z * se_lower_gap;
    let upper_holds = upper - full.variance >= -SANDWICH_Z * se_upper_gap;
    Ok(SandwichReport {
        variance: full.variance,
        energy,
        component_energies: full.energies,
        lower,
        upper,
        se_lower_gap,
        se_upper_gap,
        lower_holds,
        upper_holds,
        holds: lower_holds && upper_holds,
        degenerate: false,
        n_mc: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_hermite_matches_closed_form() {
        let sigma = CorrMatrix::equicorrelated(3, 0.5).unwrap();
        let id = vec![Transform::Identity; 3];
        let zero = vec![Transform::Zero; 3];
        let h2 = vec![Transform::Hermite { order: 2 }; 3];
        let opts = SandwichOptions { n_mc: 400_000, ..SandwichOptions::default() };
        let r = sandwich_check(&sigma, &id, &zero, &h2, &opts).unwrap();
        assert!(r.holds && !r.degenerate);
        // Var(Σ H_2) = Σ_jk ρ_jk² = 4.5, energy = 3.
        assert!((r.variance - 4.5).abs() < 0.1, "{r:?}");
        assert!((r.energy - 3.0).abs() < 0.05, "{r:?}");
        assert!((r.lower - 1.5).abs() < 0.05 && (r.upper - 6.0).abs() < 0.2);
    }

    #[test]
    fn identical_fits_are_degenerate() {
        let sigma = CorrMatrix::identity(2);
        let t = vec![Transform::Exp, Transform::Cube];
        let r = sandwich_check(&sigma, &t, &t, &t, &SandwichOptions { n_mc: 1000, ..Default::default() }).unwrap();
        assert!(r.degenerate && r.holds && r.energy == 0.0);
    }

    #[test]
    fn independent_design_is_additive() {
        let sigma = CorrMatrix::identity(3);
        let t = vec![Transform::ProbitUniform; 3];
        let f = vec![Transform::Zero; 3];
        let fh = vec![Transform::Square, Transform::Sin { scale: 3.0 }, Transform::Exp];
        let r = sandwich_check(&sigma, &t, &f, &fh, &SandwichOptions { n_mc: 100_000, ..Default::default() }).unwrap();
        assert!(r.holds);
        assert!((r.variance - r.energy).abs() < 4.0 * r.se_lower_gap.max(1e-3), "{r:?}");
    }

    #[test]
    fn length_mismatch() {
        let sigma = CorrMatrix::identity(2);
        let t = vec![Transform::Identity; 2];
        assert!(sandwich_check(&sigma, &t, &t, &t[..1], &SandwichOptions::default()).is_err());
    }
}
