//! Random instance generators for property sweeps.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{CorrMatrix, SymMatrix, WeightMatrix};

/// `normalize(A A' + eps I)` with standard normal `A` (`p x p`) and
/// `eps = 1e-6`, a generic full-rank correlation matrix.
pub fn random_corr<R: Rng + ?Sized>(p: usize, rng: &mut R) -> CorrMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut c = &a * a.transpose();
    for j in 0..p {
        c[(j, j)] += 1e-6;
    }
    let d: Vec<f64> = (0..p).map(|j| c[(j, j)].sqrt()).collect();
    let m = DMatrix::from_fn(p, p, |j, k| if j == k { 1.0 } else { c[(j, k)] / (d[j] * d[k]) });
    CorrMatrix::new(SymMatrix::new(m).expect("symmetric by construction"))
        .expect("normalized Gram matrix is a correlation matrix")
}

/// `|B| + |B|'` with standard normal `B`.
pub fn random_weight<R: Rng + ?Sized>(p: usize, rng: &mut R) -> WeightMatrix {
    let b = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal).abs());
    let w = &b + b.transpose();
    WeightMatrix::new(SymMatrix::new(w).expect("symmetric by construction"))
        .expect("nonnegative by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::spectra::extreme_eigs;

    #[test]
    fn generators_are_valid_and_deterministic() {
        let mut r1 = stream_rng(7, 3);
        let mut r2 = stream_rng(7, 3);
        let a = random_corr(5, &mut r1);
        let b = random_corr(5, &mut r2);
        assert_eq!(a, b);
        assert!(extreme_eigs(a.as_sym()).0 > 0.0);
        let w = random_weight(5, &mut r1);
        assert!((0..5).all(|j| (0..5).all(|k| w.get(j, k) >= 0.0)));
    }
}
