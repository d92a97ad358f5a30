use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::law::DiscreteLaw;
use crate::error::{Error, Result};
use crate::maxcorr::{DiscreteJoint, Label};
use crate::spectra::{extreme_eigs, schur, CorrMatrix, SymMatrix, WeightMatrix};

/// Largest number of atoms any exact enumeration may visit.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

/// Groups `G_1, ..., G_p` of positive-integer labels indexing i.i.d.
/// summands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSystem {
    groups: Vec<BTreeSet<u64>>,
}

#[derive(Serialize, Deserialize)]
struct GroupsJson {
    groups: Vec<Vec<u64>>,
}

impl GroupSystem {
    pub fn new(groups: Vec<Vec<u64>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidArgument("a group system needs at least one group".into()));
        }
        let mut sets = Vec::with_capacity(groups.len());
        for (j, g) in groups.into_iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidArgument(format!("group {} is empty", j + 1)));
            }
            if g.contains(&0) {
                return Err(Error::InvalidArgument(format!("group {} has label 0; labels are positive", j + 1)));
            }
            sets.push(g.into_iter().collect());
        }
        Ok(GroupSystem { groups: sets })
    }

    /// Nested groups `{1..m_j}`.
    pub fn nested(m: &[usize]) -> Result<Self> {
        if m.contains(&0) {
            return Err(Error::InvalidArgument("nested sizes must be positive".into()));
        }
        Self::new(m.iter().map(|&mj| (1..=mj as u64).collect()).collect())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let parsed: GroupsJson =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("groups JSON: {e}")))?;
        Self::new(parsed.groups)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(GroupsJson { groups: self.groups() }).expect("groups serialize")
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> Vec<Vec<u64>> {
        self.groups.iter().map(|g| g.iter().copied().collect()).collect()
    }

    pub fn group(&self, j: usize) -> &BTreeSet<u64> {
        &self.groups[j]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(BTreeSet::len).collect()
    }

    /// `max_j |G_j|`.
    pub fn ell_star(&self) -> usize {
        self.sizes().into_iter().max().unwrap_or(0)
    }

    pub fn intersection_size(&self, j: usize, k: usize) -> usize {
        self.groups[j].intersection(&self.groups[k]).count()
    }

    /// Sorted union of all labels.
    pub fn universe(&self) -> Vec<u64> {
        self.groups.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Smallest label shared by every group.
    pub fn common_element(&self) -> Option<u64> {
        let mut it = self.groups.iter();
        let first = it.next()?.clone();
        it.fold(first, |acc, g| acc.intersection(g).copied().collect()).into_iter().next()
    }
}

/// `C(n, k)` in floating point.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `R_jk = min(m_j, m_k) / sqrt(m_j m_k)`, the maximal-correlation matrix of
/// nested partial sums.
pub fn nested_sum_matrix(m: &[usize]) -> Result<CorrMatrix> {
    if m.is_empty() {
        return Err(Error::InvalidArgument("need at least one sum".into()));
    }
    if m.contains(&0) {
        return Err(Error::InvalidArgument("nested sizes must be positive".into()));
    }
    let r = SymMatrix::from_fn(m.len(), |j, k| {
        if j == k {
            1.0
        } else {
            m[j].min(m[k]) as f64 / ((m[j] * m[k]) as f64).sqrt()
        }
    })?;
    CorrMatrix::new(r)
}

/// The order-`ℓ` group correlation matrix with its active set.
#[derive(Debug, Clone, PartialEq)]
pub struct EllMatrix {
    pub order: usize,
    /// Full `p x p` matrix; rows and columns outside `active` are zero.
    pub matrix: SymMatrix,
    /// Indices `j` with `|G_j| >= ℓ`.
    pub active: Vec<usize>,
}

impl EllMatrix {
    pub fn restricted(&self) -> SymMatrix {
        self.matrix.restrict(&self.active)
    }
}

/// `R^(ℓ)_jk = C(|G_j ∩ G_k|, ℓ) / sqrt(C(|G_j|, ℓ) C(|G_k|, ℓ))` on the
/// active set.
pub fn group_matrix(g: &GroupSystem, ell: usize) -> Result<EllMatrix> {
    let star = g.ell_star();
    if ell == 0 || ell > star {
        return Err(Error::InvalidArgument(format!("order {ell} outside 1..={star}")));
    }
    let sizes = g.sizes();
    let active: Vec<usize> = (0..g.len()).filter(|&j| sizes[j] >= ell).collect();
    let is_active: Vec<bool> = sizes.iter().map(|&s| s >= ell).collect();
    let matrix = SymMatrix::from_fn(g.len(), |j, k| {
        if !is_active[j] || !is_active[k] {
            0.0
        } else if j == k {
            1.0
        } else {
            binomial(g.intersection_size(j, k), ell)
                / (binomial(sizes[j], ell) * binomial(sizes[k], ell)).sqrt()
        }
    })?;
    Ok(EllMatrix { order: ell, matrix, active })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSpectrum {
    pub order: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub active: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymmExtremes {
    pub rho_max: f64,
    pub rho_min: f64,
    /// Smallest order attaining `rho_min`.
    pub argmin_ell: usize,
    pub orders: Vec<OrderSpectrum>,
}

/// Ties between orders closer than this resolve to the smaller order.
pub const ARGMIN_TIE_TOL: f64 = 1e-10;

/// Extreme symmetric nonlinear correlations of group sums:
/// `rho_max = λ_max(R ∘ W)` and `rho_min = min_ℓ λ_min((R^(ℓ) ∘ W)_{J^(ℓ)})`.
pub fn extreme_symm(g: &GroupSystem, w: &WeightMatrix) -> Result<SymmExtremes> {
    if w.dim() != g.len() {
        return Err(Error::DimensionMismatch { expected: g.len(), found: w.dim() });
    }
    let mut orders = Vec::with_capacity(g.ell_star());
    for ell in 1..=g.ell_star() {
        let r = group_matrix(g, ell)?;
        let rw = schur(&r.restricted(), w.restrict(&r.active).as_sym())?;
        let (lambda_min, lambda_max) = extreme_eigs(&rw);
        orders.push(OrderSpectrum { order: ell, lambda_min, lambda_max, active: r.active });
    }
    let rho_max = orders[0].lambda_max;
    let mut argmin = 0;
    for (i, o) in orders.iter().enumerate().skip(1) {
        if o.lambda_min < orders[argmin].lambda_min - ARGMIN_TIE_TOL {
            argmin = i;
        }
    }
    Ok(SymmExtremes { rho_max, rho_min: orders[argmin].lambda_min, argmin_ell: argmin + 1, orders })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AssumptionCStatus {
    /// Witness `G_j \ {i_0}` for a common element `i_0`.
    Shortcut,
    /// Witness found by search.
    Found,
    /// The search budget ran out before a witness was found. This is not a
    /// proof of infeasibility.
    NotFoundWithinBound,
    /// The search finished without a witness: no shadow system exists.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssumptionCReport {
    pub feasible: bool,
    pub status: AssumptionCStatus,
    pub witness: Option<Vec<Vec<u64>>>,
    pub nodes_explored: usize,
}

/// Search budget for [`assumption_c_check`].
pub const SEARCH_NODE_BUDGET: usize = 200_000;

/// True when `witness` satisfies `|G0_j ∩ G0_k| = (|G_j ∩ G_k| - 1)_+` for
/// `j != k` and `|G0_j| <= |G_j| - 1`.
pub fn verify_witness(g: &GroupSystem, witness: &[Vec<u64>]) -> bool {
    if witness.len() != g.len() {
        return false;
    }
    let sets: Vec<BTreeSet<u64>> = witness.iter().map(|w| w.iter().copied().collect()).collect();
    let sizes = g.sizes();
    for j in 0..g.len() {
        if sets[j].len() != witness[j].len() || sets[j].len() + 1 > sizes[j] || sets[j].contains(&0) {
            return false;
        }
        for k in (j + 1)..g.len() {
            let target = g.intersection_size(j, k).saturating_sub(1);
            if sets[j].intersection(&sets[k]).count() != target {
                return false;
            }
        }
    }
    true
}

struct Search {
    p: usize,
    residual: Vec<Vec<usize>>,
    slack: Vec<usize>,
    chosen: Vec<u32>,
    nodes: usize,
    budget: usize,
}

impl Search {
    fn first_open_pair(&self) -> Option<(usize, usize)> {
        (0..self.p).flat_map(|j| ((j + 1)..self.p).map(move |k| (j, k))).find(|&(j, k)| self.residual[j][k] > 0)
    }

    fn fits(&self, mask: u32) -> bool {
        let members: Vec<usize> = (0..self.p).filter(|&j| mask >> j & 1 == 1).collect();
        members.iter().all(|&j| self.slack[j] > 0)
            && members.iter().enumerate().all(|(a, &j)| members[a + 1..].iter().all(|&k| self.residual[j][k] > 0))
    }

    fn apply(&mut self, mask: u32, sign: isize) {
        let members: Vec<usize> = (0..self.p).filter(|&j| mask >> j & 1 == 1).collect();
        for (a, &j) in members.iter().enumerate() {
            self.slack[j] = (self.slack[j] as isize - sign) as usize;
            for &k in &members[a + 1..] {
                self.residual[j][k] = (self.residual[j][k] as isize - sign) as usize;
            }
        }
    }

    fn viable(&self) -> bool {
        (0..self.p).all(|j| {
            (0..self.p).filter(|&k| k != j).map(|k| self.residual[j.min(k)][j.max(k)]).max().unwrap_or(0)
                <= self.slack[j]
        })
    }

    /// Depth-first search over membership patterns covering the first open
    /// pair. `None` means the node budget ran out.
    fn run(&mut self) -> Option<bool> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        let Some((j, k)) = self.first_open_pair() else {
            return Some(true);
        };
        let base = (1u32 << j) | (1u32 << k);
        let mut mask = (1u32 << self.p) - 1;
        loop {
            if mask & base == base && self.fits(mask) {
                self.apply(mask, 1);
                self.chosen.push(mask);
                if self.viable() {
                    match self.run() {
                        Some(true) => return Some(true),
                        None => return None,
                        Some(false) => {}
                    }
                }
                self.chosen.pop();
                self.apply(mask, -1);
            }
            if mask == base {
                break;
            }
            mask -= 1;
            if mask < base {
                break;
            }
        }
        Some(false)
    }
}

/// Looks for shadow groups `G0_j` with `|G0_j ∩ G0_k| = (|G_j ∩ G_k| - 1)_+`
/// and `|G0_j| <= |G_j| - 1`.
pub fn assumption_c_check(g: &GroupSystem) -> AssumptionCReport {
    if let Some(i0) = g.common_element() {
        let witness = g.groups.iter().map(|s| s.iter().copied().filter(|&i| i != i0).collect()).collect();
        return AssumptionCReport {
            feasible: true,
            status: AssumptionCStatus::Shortcut,
            witness: Some(witness),
            nodes_explored: 0,
        };
    }
    let p = g.len();
    let sizes = g.sizes();
    let not_found = |nodes| AssumptionCReport {
        feasible: false,
        status: AssumptionCStatus::NotFoundWithinBound,
        witness: None,
        nodes_explored: nodes,
    };
    if p > 20 {
        return not_found(0);
    }
    let mut residual = vec![vec![0; p]; p];
    for j in 0..p {
        for k in (j + 1)..p {
            residual[j][k] = g.intersection_size(j, k).saturating_sub(1);
        }
    }
    let mut search = Search {
        p,
        residual,
        slack: sizes.iter().map(|s| s - 1).collect(),
        chosen: Vec::new(),
        nodes: 0,
        budget: SEARCH_NODE_BUDGET,
    };
    let outcome = if search.viable() { search.run() } else { Some(false) };
    match outcome {
        Some(true) => {}
        Some(false) => {
            return AssumptionCReport {
                feasible: false,
                status: AssumptionCStatus::Infeasible,
                witness: None,
                nodes_explored: search.nodes,
            }
        }
        None => return not_found(search.nodes),
    }

    // Fresh labels: one per chosen pattern, then private padding.
    let mut witness: Vec<Vec<u64>> = vec![Vec::new(); p];
    let mut next = 1u64;
    for &mask in &search.chosen {
        for (j, w) in witness.iter_mut().enumerate() {
            if mask >> j & 1 == 1 {
                w.push(next);
            }
        }
        next += 1;
    }
    for (j, w) in witness.iter_mut().enumerate() {
        while w.len() + 1 < sizes[j] {
            w.push(next);
            next += 1;
        }
    }
    AssumptionCReport {
        feasible: true,
        status: AssumptionCStatus::Found,
        witness: Some(witness),
        nodes_explored: search.nodes,
    }
}

/// Exact joint of the group sums `S_j = sum_{i in G_j} Y_i` with i.i.d.
/// `Y_i ~ law`, by enumerating the label universe.
pub fn sums_joint(g: &GroupSystem, law: &DiscreteLaw) -> Result<DiscreteJoint> {
    let universe = g.universe();
    let s = law.len();
    let required = (s as u128).checked_pow(universe.len() as u32).unwrap_or(u128::MAX);
    if required > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded { required, budget: ENUMERATION_BUDGET });
    }
    let position: HashMap<u64, usize> = universe.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let members: Vec<Vec<usize>> = g.groups.iter().map(|grp| grp.iter().map(|l| position[l]).collect()).collect();

    // Support of each sum from its size alone.
    let supports: Vec<Vec<f64>> =
        g.sizes().iter().map(|&m| law.convolve_power(m).into_iter().map(|(v, _)| v).collect()).collect();
    let locate = |sup: &[f64], v: f64| -> usize {
        let i = sup.partition_point(|&x| x < v);
        match (i.checked_sub(1), sup.get(i)) {
            (Some(a), Some(&b)) if (v - sup[a]).abs() < (b - v).abs() => a,
            (Some(a), None) => a,
            _ => i,
        }
    };

    let n_atoms = required as usize;
    let mut digits = vec![0usize; universe.len()];
    let mut atoms = Vec::with_capacity(n_atoms);
    for _ in 0..n_atoms {
        let prob: f64 = digits.iter().map(|&d| law.probs()[d]).product();
        if prob > 0.0 {
            let idx = members
                .iter()
                .zip(&supports)
                .map(|(m, sup)| locate(sup, m.iter().map(|&i| law.values()[digits[i]]).sum()))
                .collect();
            atoms.push((idx, prob));
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < s {
                break;
            }
            *d = 0;
        }
    }
    let labels = supports.into_iter().map(|sup| sup.into_iter().map(Label::Num).collect()).collect();
    DiscreteJoint::new(labels, atoms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maxcorr::exact_extremes;
    use crate::spectra::spectrum;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn nested_examples() {
        let r = nested_sum_matrix(&[3, 3, 3]).unwrap();
        assert!(r.as_sym().rows().iter().flatten().all(|&v| (v - 1.0).abs() < 1e-15));
        let r = nested_sum_matrix(&[1, 2]).unwrap();
        assert!((r.get(0, 1) - H).abs() < 1e-15);
        let r = nested_sum_matrix(&[1, 2, 3]).unwrap();
        assert!((r.get(0, 2) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((r.get(1, 2) - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(nested_sum_matrix(&[0, 2]).is_err());
    }

    #[test]
    fn nested_matrix_is_the_covariance_of_rademacher_sums() {
        // Cov(S_a, S_b) = min(a, b) for Rademacher partial sums.
        let m = [1usize, 2, 3];
        let g = GroupSystem::nested(&m).unwrap();
        let joint = sums_joint(&g, &DiscreteLaw::rademacher()).unwrap();
        let r = nested_sum_matrix(&m).unwrap();
        for j in 0..3 {
            for k in 0..3 {
                let mut cov = 0.0;
                for (idx, p) in joint.atoms() {
                    let v = |i: usize| match &joint.supports()[i][idx[i]] {
                        Label::Num(x) => *x,
                        Label::Text(_) => unreachable!(),
                    };
                    cov += p * v(j) * v(k);
                }
                let corr = cov / ((m[j] * m[k]) as f64).sqrt();
                assert!((corr - r.get(j, k)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn group_matrix_examples() {
        let g = GroupSystem::new(vec![vec![1, 2], vec![1, 2, 3]]).unwrap();
        let r2 = group_matrix(&g, 2).unwrap();
        assert!((r2.matrix.get(0, 1) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let r3 = group_matrix(&g, 3).unwrap();
        assert_eq!(r3.active, vec![1]);
        assert_eq!(r3.matrix.get(0, 0), 0.0);
        assert!(group_matrix(&g, 4).is_err());
        assert!(group_matrix(&g, 0).is_err());

        let nested = GroupSystem::nested(&[1, 2, 3]).unwrap();
        let r1 = group_matrix(&nested, 1).unwrap();
        assert_eq!(&r1.matrix, nested_sum_matrix(&[1, 2, 3]).unwrap().as_sym());

        let disjoint = GroupSystem::new(vec![vec![1, 2], vec![3, 4], vec![5]]).unwrap();
        for ell in 1..=2 {
            let r = group_matrix(&disjoint, ell).unwrap();
            let rr = r.restricted();
            for j in 0..rr.dim() {
                for k in 0..rr.dim() {
                    assert_eq!(rr.get(j, k), if j == k { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn extreme_symm_examples() {
        let disjoint = GroupSystem::new(vec![vec![1, 2], vec![3, 4], vec![5]]).unwrap();
        let e = extreme_symm(&disjoint, &WeightMatrix::ones(3)).unwrap();
        assert!((e.rho_max - 1.0).abs() < 1e-14 && (e.rho_min - 1.0).abs() < 1e-14);

        let nested = GroupSystem::nested(&[1, 2, 3]).unwrap();
        let e = extreme_symm(&nested, &WeightMatrix::ones(3)).unwrap();
        let sp = spectrum(nested_sum_matrix(&[1, 2, 3]).unwrap().as_sym());
        assert!((e.rho_min - sp[0]).abs() < 1e-12 && (e.rho_max - sp[2]).abs() < 1e-12);
        assert_eq!(e.argmin_ell, 1);

        let chain = GroupSystem::new(vec![vec![1, 2], vec![2, 3], vec![3, 4]]).unwrap();
        let e = extreme_symm(&chain, &WeightMatrix::ones(3)).unwrap();
        assert!((e.rho_max - (1.0 + H)).abs() < 1e-12);
        assert!(extreme_symm(&chain, &WeightMatrix::ones(2)).is_err());
    }

    #[test]
    fn assumption_c_examples() {
        let nested = GroupSystem::nested(&[2, 3, 4]).unwrap();
        let rep = assumption_c_check(&nested);
        assert_eq!(rep.status, AssumptionCStatus::Shortcut);
        assert_eq!(rep.witness.as_ref().unwrap()[0], vec![2]);
        assert!(verify_witness(&nested, rep.witness.as_ref().unwrap()));

        let disjoint = GroupSystem::new(vec![vec![1, 2], vec![3, 4]]).unwrap();
        let rep = assumption_c_check(&disjoint);
        assert!(rep.feasible);
        assert!(verify_witness(&disjoint, rep.witness.as_ref().unwrap()));

        let triangle = GroupSystem::new(vec![vec![1, 2], vec![2, 3], vec![1, 3]]).unwrap();
        let rep = assumption_c_check(&triangle);
        assert_eq!(rep.status, AssumptionCStatus::Found);
        let w = rep.witness.unwrap();
        assert!(verify_witness(&triangle, &w));
        assert!(w.iter().all(|s| s.len() == 1));
    }

    #[test]
    fn assumption_c_search_needs_shared_patterns() {
        // Pairwise targets of 1 among three groups of size 3 without a common
        // label.
        let g = GroupSystem::new(vec![vec![1, 2, 5], vec![1, 2, 3, 6], vec![2, 3, 4, 1, 7], vec![3, 4, 8]])
            .unwrap();
        assert!(g.common_element().is_none());
        let rep = assumption_c_check(&g);
        assert!(rep.feasible);
        assert!(verify_witness(&g, rep.witness.as_ref().unwrap()));
    }

    #[test]
    fn search_without_common_element() {
        let g = GroupSystem::new(vec![vec![1, 2, 3], vec![1, 2, 4], vec![3, 4, 5]]).unwrap();
        let rep = assumption_c_check(&g);
        assert_eq!(rep.status, AssumptionCStatus::Found);
        let w = rep.witness.unwrap();
        assert!(verify_witness(&g, &w));
        assert_eq!(w.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 2, 2]);
    }

    #[test]
    fn sums_joint_budget_and_oracle() {
        let g = GroupSystem::nested(&[1, 2]).unwrap();
        let joint = sums_joint(&g, &DiscreteLaw::rademacher()).unwrap();
        assert_eq!(joint.support_sizes(), vec![2, 3]);
        let e = exact_extremes(&joint, &WeightMatrix::offdiag(2)).unwrap();
        assert!((e.rho_max.value - H).abs() < 1e-12);

        let big = GroupSystem::nested(&[21]).unwrap();
        assert!(matches!(
            sums_joint(&big, &DiscreteLaw::rademacher()),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let g = GroupSystem::from_json_str(r#"{"groups": [[1, 2], [2, 3, 3]]}"#).unwrap();
        assert_eq!(g.sizes(), vec![2, 2]);
        assert_eq!(GroupSystem::from_json_str(&g.to_json().to_string()).unwrap(), g);
        assert!(GroupSystem::from_json_str(r#"{"groups": [[]]}"#).is_err());
        assert!(GroupSystem::from_json_str(r#"{"groups": [[0, 1]]}"#).is_err());
    }
}
