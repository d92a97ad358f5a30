use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite law `P(Y = values[i]) = probs[i]` with at least two atoms of
/// positive mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLaw {
    values: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::DimensionMismatch { expected: values.len(), found: probs.len() });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("support values must be finite".into()));
        }
        if probs.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
            return Err(Error::InvalidDistribution("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}, not 1")));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidDistribution("support values must be distinct".into()));
        }
        if probs.iter().filter(|&&q| q > 0.0).count() < 2 {
            return Err(Error::DegenerateVariable { index: 0 });
        }
        Ok(DiscreteLaw { values, probs })
    }

    pub fn rademacher() -> Self {
        DiscreteLaw { values: vec![-1.0, 1.0], probs: vec![0.5, 0.5] }
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidDistribution(format!("bernoulli parameter {p} not in (0, 1)")));
        }
        Self::new(vec![0.0, 1.0], vec![1.0 - p, p])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `E g(Y)`.
    pub fn expect(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.values.iter().zip(&self.probs).map(|(&y, &q)| q * g(y)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|y| y)
    }

    /// Law of `Y_1 + ... + Y_n`; sums that agree to rounding are merged.
    pub fn convolve_power(&self, n: usize) -> Vec<(f64, f64)> {
        let mut atoms = vec![(0.0, 1.0)];
        for _ in 0..n {
            let mut next: Vec<(f64, f64)> = atoms
                .iter()
                .flat_map(|&(s, p)| self.values.iter().zip(&self.probs).map(move |(&y, &q)| (s + y, p * q)))
                .filter(|&(_, p)| p > 0.0)
                .collect();
            next.sort_by(|a, b| a.0.total_cmp(&b.0));
            atoms = merge_close(next);
        }
        atoms
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (&y, &q) in self.values.iter().zip(&self.probs) {
            acc += q;
            if u < acc {
                return y;
            }
        }
        *self.values.last().unwrap()
    }
}

/// Merges sorted `(value, mass)` pairs whose values coincide up to rounding.
pub(crate) fn merge_close(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (v, p) in sorted {
        match out.last_mut() {
            Some(last) if (v - last.0).abs() <= 1e-12 * v.abs().max(last.0.abs()).max(1.0) => last.1 += p,
            _ => out.push((v, p)),
        }
    }
    out
}

/// A law for the summands: finite and tabulated, or a named continuous law
/// handled through its characteristic function.
#[derive(Debug, Clone, PartialEq)]
pub enum Law {
    Discrete(DiscreteLaw),
    /// Standard Cauchy, characteristic function `exp(-|t|)`.
    Cauchy,
}

impl Law {
    /// Characteristic function at `t` for laws symmetric about zero.
    pub fn symmetric_cf(&self, t: f64) -> Option<f64> {
        match self {
            Law::Cauchy => Some((-t.abs()).exp()),
            Law::Discrete(d) => {
                let odd = d.expect(|y| (t * y).sin());
                (odd.abs() < 1e-15).then(|| d.expect(|y| (t * y).cos()))
            }
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Law::Discrete(d) => d.sample(rng),
            Law::Cauchy => {
                let u: f64 = rng.random();
                (std::f64::consts::PI * (u - 0.5)).tan()
            }
        }
    }

    /// Parses `{"values": [...], "probs": [...]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Table {
            values: Vec<f64>,
            probs: Vec<f64>,
        }
        let t: Table = serde_json::from_str(text).map_err(|e| Error::Parse(format!("law JSON: {e}")))?;
        Ok(Law::Discrete(DiscreteLaw::new(t.values, t.probs)?))
    }
}

impl FromStr for Law {
    type Err = Error;

    /// `rademacher`, `bernoulli(p)` (or `bernoulli:p`) and `cauchy`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "rademacher" {
            return Ok(Law::Discrete(DiscreteLaw::rademacher()));
        }
        if s == "cauchy" {
            return Ok(Law::Cauchy);
        }
        if let Some(rest) = s.strip_prefix("bernoulli") {
            let arg = rest.trim_start_matches([':', '(']).trim_end_matches(')');
            let p: f64 = arg.parse().map_err(|_| Error::Parse(format!("bad bernoulli parameter in '{s}'")))?;
            return Ok(Law::Discrete(DiscreteLaw::bernoulli(p)?));
        }
        Err(Error::Parse(format!("unknown law '{s}'")))
    }
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Law::Cauchy => write!(f, "cauchy"),
            Law::Discrete(d) => write!(f, "discrete({} atoms)", d.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_named_laws() {
        assert_eq!("rademacher".parse::<Law>().unwrap(), Law::Discrete(DiscreteLaw::rademacher()));
        assert_eq!("Cauchy".parse::<Law>().unwrap(), Law::Cauchy);
        let b = "bernoulli(0.25)".parse::<Law>().unwrap();
        assert_eq!(b, Law::Discrete(DiscreteLaw::bernoulli(0.25).unwrap()));
        assert_eq!("bernoulli:0.25".parse::<Law>().unwrap(), b);
        assert!("bernoulli(1.5)".parse::<Law>().is_err());
        assert!("normal".parse::<Law>().is_err());
        let t = Law::from_json_str(r#"{"values": [0, 1, 5], "probs": [0.2, 0.3, 0.5]}"#).unwrap();
        assert!(matches!(t, Law::Discrete(ref d) if d.len() == 3));
    }

    #[test]
    fn rejects_degenerate_laws() {
        assert_eq!(
            DiscreteLaw::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap_err(),
            Error::DegenerateVariable { index: 0 }
        );
        assert!(DiscreteLaw::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteLaw::new(vec![0.0, 1.0], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn convolution_matches_binomial() {
        let b = DiscreteLaw::bernoulli(0.5).unwrap();
        let c = b.convolve_power(4);
        let want = [1.0, 4.0, 6.0, 4.0, 1.0];
        assert_eq!(c.len(), 5);
        for (k, (v, p)) in c.iter().enumerate() {
            assert_eq!(*v, k as f64);
            assert!((p - want[k] / 16.0).abs() < 1e-16);
        }
        assert_eq!(b.convolve_power(0), vec![(0.0, 1.0)]);
    }

    #[test]
    fn characteristic_functions() {
        assert!((Law::Cauchy.symmetric_cf(0.3).unwrap() - (-0.3f64).exp()).abs() < 1e-16);
        let r = Law::Discrete(DiscreteLaw::rademacher());
        assert!((r.symmetric_cf(0.3).unwrap() - 0.3f64.cos()).abs() < 1e-16);
        let b = Law::Discrete(DiscreteLaw::bernoulli(0.5).unwrap());
        assert!(b.symmetric_cf(0.3).is_none());
    }
}
