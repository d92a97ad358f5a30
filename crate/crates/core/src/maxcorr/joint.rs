use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A support point label. Numeric labels come from data; text labels from
/// hand-written joint files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Num(f64),
    Text(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Num(v) => write!(f, "{v}"),
            Label::Text(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for Label {
    fn from(v: f64) -> Self {
        Label::Num(v)
    }
}

/// Joint probability mass function over a product of finite supports.
///
/// Construction merges duplicate atoms, drops zero-mass atoms and prunes
/// support points with zero marginal mass; each variable must keep at least
/// two support points.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    supports: Vec<Vec<Label>>,
    atoms: Vec<(Vec<usize>, f64)>,
    marginals: Vec<Vec<f64>>,
}

/// Tolerance on the total probability mass.
pub const MASS_TOL: f64 = 1e-12;

impl DiscreteJoint {
    pub fn new(supports: Vec<Vec<Label>>, atoms: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        let p = supports.len();
        if p == 0 {
            return Err(Error::InvalidDistribution("a joint needs at least one variable".into()));
        }
        let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        let mut total = 0.0;
        for (idx, prob) in atoms {
            if idx.len() != p {
                return Err(Error::InvalidDistribution(format!(
                    "atom {idx:?} has {} coordinates, expected {p}",
                    idx.len()
                )));
            }
            if let Some((j, &i)) = idx.iter().enumerate().find(|(j, &i)| i >= supports[*j].len()) {
                return Err(Error::InvalidDistribution(format!(
                    "atom index {i} out of range for variable {j}"
                )));
            }
            if !(prob >= 0.0) || !prob.is_finite() {
                return Err(Error::InvalidDistribution(format!("atom {idx:?} has mass {prob}")));
            }
            total += prob;
            if prob > 0.0 {
                *merged.entry(idx).or_insert(0.0) += prob;
            }
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
        }

        // Prune support points without mass and reindex.
        let mut used: Vec<Vec<bool>> = supports.iter().map(|s| vec![false; s.len()]).collect();
        for idx in merged.keys() {
            for (j, &i) in idx.iter().enumerate() {
                used[j][i] = true;
            }
        }
        let remap: Vec<Vec<Option<usize>>> = used
            .iter()
            .map(|u| {
                let mut next = 0;
                u.iter()
                    .map(|&keep| {
                        keep.then(|| {
                            next += 1;
                            next - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let supports: Vec<Vec<Label>> = supports
            .into_iter()
            .zip(&used)
            .map(|(s, u)| s.into_iter().zip(u).filter(|(_, &k)| k).map(|(l, _)| l).collect())
            .collect();
        if let Some(j) = supports.iter().position(|s| s.len() < 2) {
            return Err(Error::DegenerateVariable { index: j });
        }

        let atoms: Vec<(Vec<usize>, f64)> = merged
            .into_iter()
            .map(|(idx, prob)| {
                let idx = idx.iter().enumerate().map(|(j, &i)| remap[j][i].unwrap()).collect();
                (idx, prob / total)
            })
            .collect();
        let mut marginals: Vec<Vec<f64>> = supports.iter().map(|s| vec![0.0; s.len()]).collect();
        for (idx, prob) in &atoms {
            for (j, &i) in idx.iter().enumerate() {
                marginals[j][i] += prob;
            }
        }
        Ok(DiscreteJoint { supports, atoms, marginals })
    }

    /// Joint of `p` independent variables with the given marginal pmfs.
    pub fn independent(marginals: &[Vec<f64>]) -> Result<Self> {
        let supports =
            marginals.iter().map(|m| (0..m.len()).map(|i| Label::Num(i as f64)).collect()).collect();
        let mut atoms = vec![(Vec::new(), 1.0)];
        for m in marginals {
            atoms = atoms
                .into_iter()
                .flat_map(|(idx, prob)| {
                    m.iter().enumerate().map(move |(i, &q)| {
                        let mut next = idx.clone();
                        next.push(i);
                        (next, prob * q)
                    })
                })
                .collect();
        }
        Self::new(supports, atoms)
    }

    pub fn dim(&self) -> usize {
        self.supports.len()
    }

    pub fn support_sizes(&self) -> Vec<usize> {
        self.supports.iter().map(Vec::len).collect()
    }

    pub fn supports(&self) -> &[Vec<Label>] {
        &self.supports
    }

    pub fn atoms(&self) -> &[(Vec<usize>, f64)] {
        &self.atoms
    }

    pub fn marginal(&self, j: usize) -> &[f64] {
        &self.marginals[j]
    }

    /// Bivariate pmf matrix `P_jk[a][b] = P(X_j = a, X_k = b)`.
    pub fn bivariate(&self, j: usize, k: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.supports[j].len(), self.supports[k].len());
        for (idx, prob) in &self.atoms {
            m[(idx[j], idx[k])] += prob;
        }
        m
    }

    /// All bivariate pmfs for `j < k`, in one pass over the atoms.
    pub(crate) fn all_bivariates(&self) -> Vec<Vec<DMatrix<f64>>> {
        let p = self.dim();
        let sizes = self.support_sizes();
        let mut out: Vec<Vec<DMatrix<f64>>> = (0..p)
            .map(|j| (0..p).map(|k| if k > j { DMatrix::zeros(sizes[j], sizes[k]) } else { DMatrix::zeros(0, 0) }).collect())
            .collect();
        for (idx, prob) in &self.atoms {
            for j in 0..p {
                for k in (j + 1)..p {
                    out[j][k][(idx[j], idx[k])] += prob;
                }
            }
        }
        out
    }

    /// Relabels variable `j` by the permutation `perm` (new position `i`
    /// holds old support point `perm[i]`).
    pub fn permute_support(&self, j: usize, perm: &[usize]) -> Result<Self> {
        let s = self.supports[j].len();
        if perm.len() != s {
            return Err(Error::DimensionMismatch { expected: s, found: perm.len() });
        }
        let mut inverse = vec![0; s];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut supports = self.supports.clone();
        supports[j] = perm.iter().map(|&old| self.supports[j][old].clone()).collect();
        let atoms = self
            .atoms
            .iter()
            .map(|(idx, prob)| {
                let mut idx = idx.clone();
                idx[j] = inverse[idx[j]];
                (idx, *prob)
            })
            .collect();
        Self::new(supports, atoms)
    }

    pub fn to_json(&self) -> JointJson {
        JointJson {
            supports: self.supports.clone(),
            atoms: self.atoms.iter().map(|(idx, p)| AtomJson { idx: idx.clone(), p: *p }).collect(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let parsed: JointJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("joint JSON: {e}")))?;
        parsed.into_joint()
    }
}

/// Wire form `{"supports": [[...]], "atoms": [{"idx": [...], "p": prob}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointJson {
    pub supports: Vec<Vec<Label>>,
    pub atoms: Vec<AtomJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomJson {
    pub idx: Vec<usize>,
    pub p: f64,
}

impl JointJson {
    pub fn into_joint(self) -> Result<DiscreteJoint> {
        DiscreteJoint::new(self.supports, self.atoms.into_iter().map(|a| (a.idx, a.p)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<Label> {
        (0..n).map(|i| Label::Num(i as f64)).collect()
    }

    #[test]
    fn merges_and_prunes() {
        let j = DiscreteJoint::new(
            vec![labels(3), labels(2)],
            vec![(vec![0, 0], 0.25), (vec![0, 0], 0.25), (vec![2, 1], 0.5), (vec![1, 1], 0.0)],
        )
        .unwrap();
        assert_eq!(j.support_sizes(), vec![2, 2]);
        assert_eq!(j.supports()[0], vec![Label::Num(0.0), Label::Num(2.0)]);
        assert_eq!(j.marginal(0), &[0.5, 0.5]);
        assert_eq!(j.atoms().len(), 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = vec![labels(2), labels(2)];
        assert!(matches!(
            DiscreteJoint::new(s.clone(), vec![(vec![0, 0], 0.5), (vec![1, 1], 0.4)]),
            Err(Error::InvalidDistribution(_))
        ));
        assert!(DiscreteJoint::new(s.clone(), vec![(vec![0, 0], -0.5), (vec![1, 1], 1.5)]).is_err());
        assert!(DiscreteJoint::new(s.clone(), vec![(vec![0, 2], 1.0)]).is_err());
        assert!(DiscreteJoint::new(s.clone(), vec![(vec![0], 1.0)]).is_err());
        assert_eq!(
            DiscreteJoint::new(s, vec![(vec![0, 0], 0.5), (vec![0, 1], 0.5)]).unwrap_err(),
            Error::DegenerateVariable { index: 0 }
        );
    }

    #[test]
    fn json_schema() {
        let text = r#"{"supports": [["a", "b"], [-1, 1]],
                       "atoms": [{"idx": [0, 0], "p": 0.5}, {"idx": [1, 1], "p": 0.5}]}"#;
        let j = DiscreteJoint::from_json_str(text).unwrap();
        assert_eq!(j.supports()[0][1], Label::Text("b".into()));
        assert_eq!(j.supports()[1][0], Label::Num(-1.0));
        let back = serde_json::to_string(&j.to_json()).unwrap();
        assert_eq!(DiscreteJoint::from_json_str(&back).unwrap(), j);
        assert!(DiscreteJoint::from_json_str("{").is_err());
    }

    #[test]
    fn bivariate_and_permutation() {
        let j = DiscreteJoint::independent(&[vec![0.2, 0.8], vec![0.5, 0.3, 0.2]]).unwrap();
        let b = j.bivariate(0, 1);
        assert!((b[(1, 2)] - 0.16).abs() < 1e-15);
        let q = j.permute_support(1, &[2, 0, 1]).unwrap();
        for (got, want) in q.marginal(1).iter().zip([0.2, 0.5, 0.3]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert_eq!(q.supports()[1][0], Label::Num(2.0));
    }
}
