//! State correspondence between a true and an estimated HMM.
//!
//! When the state counts differ, the smaller model is padded with duplicated
//! states. The ROI metric duplicates Gaussians only; the state metric uses
//! [`augment_states`], which leaves sequence likelihoods unchanged. Both
//! searches are exhaustive over duplication multisets and permutations.

use super::overlap::l1_gaussian;
use super::DissimError;
use crate::hmm::Hmm;
use serde::{Deserialize, Serialize};

/// `mapping[j]` is the estimated state matched to reference state `j`.
/// Indices refer to the augmented models when an augmentation was applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Permutation {
    pub mapping: Vec<usize>,
}

impl Permutation {
    pub fn identity(k: usize) -> Self {
        Permutation {
            mapping: (0..k).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.mapping.len()];
        for &m in &self.mapping {
            if m >= seen.len() || seen[m] {
                return false;
            }
            seen[m] = true;
        }
        true
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.mapping.len()];
        for (j, &m) in self.mapping.iter().enumerate() {
            inv[m] = j;
        }
        Permutation { mapping: inv }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentedModel {
    True,
    Estimated,
}

/// Duplications applied, in order, to the smaller model. Each pair is
/// `(source state, new state index)`; new states are appended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub target: AugmentedModel,
    pub duplications: Vec<(usize, usize)>,
}

impl AugmentationPlan {
    fn from_sources(target: AugmentedModel, base: usize, sources: &[usize]) -> Self {
        AugmentationPlan {
            target,
            duplications: sources.iter().enumerate().map(|(i, &s)| (s, base + i)).collect(),
        }
    }
}

/// Split states so that `h` gains one state per duplication.
///
/// Duplicating `j` into `j'` halves every incoming probability `a_ij`
/// between `j` and `j'`, copies row `j` to row `j'`, halves `π_j` between
/// the two and copies the emission.
pub fn augment_states(h: &Hmm, duplications: &[(usize, usize)]) -> Result<Hmm, DissimError> {
    let mut prior = h.prior().to_vec();
    let mut rows = h.transition_rows();
    let mut emissions = h.emissions().to_vec();
    for &(source, new_state) in duplications {
        let k = prior.len();
        if source >= k {
            return Err(DissimError::InvalidSource { state: source, states: k });
        }
        if new_state != k {
            return Err(DissimError::InvalidNewState { found: new_state, expected: k });
        }
        for row in rows.iter_mut() {
            let half = 0.5 * row[source];
            row[source] = half;
            row.push(half);
        }
        rows.push(rows[source].clone());
        let half = 0.5 * prior[source];
        prior[source] = half;
        prior.push(half);
        emissions.push(emissions[source].clone());
    }
    Ok(Hmm::new(prior, rows, emissions).expect("splitting preserves validity"))
}

/// All non-decreasing length-`m` sequences over `0..n`, lexicographically.
pub(crate) fn multisets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, m: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for s in start..n {
            cur.push(s);
            rec(n, m, s, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, m, 0, &mut Vec::with_capacity(m), &mut out);
    out
}

/// Advance to the next lexicographic permutation; false after the last.
pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    let n = p.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Which side needs padding, and the duplication multisets to try.
fn augmentation_candidates(k_true: usize, k_est: usize) -> (Option<AugmentedModel>, Vec<Vec<usize>>) {
    use std::cmp::Ordering::*;
    match k_true.cmp(&k_est) {
        Equal => (None, vec![Vec::new()]),
        Less => (Some(AugmentedModel::True), multisets(k_true, k_est - k_true)),
        Greater => (Some(AugmentedModel::Estimated), multisets(k_est, k_true - k_est)),
    }
}

/// Sums of nonnegative terms in fixed point, so that the total does not
/// depend on the order of the terms and equivalent candidates tie exactly.
const FIXED_SCALE: f64 = 79228162514264337593543950336.0; // 2^96

pub(crate) fn to_fixed(x: f64) -> u128 {
    (x * FIXED_SCALE) as u128
}

pub(crate) fn from_fixed(x: u128) -> f64 {
    x as f64 / FIXED_SCALE
}

fn with_sources(k: usize, extra: &[usize]) -> Vec<usize> {
    (0..k).chain(extra.iter().copied()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiMatch {
    /// `(1/K_max) Σ_j ψ` under the optimal correspondence, in `[0, 1]`.
    pub l_roi: f64,
    pub permutation: Permutation,
    pub augmentation: Option<AugmentationPlan>,
}

pub fn match_rois(true_h: &Hmm, est_h: &Hmm) -> RoiMatch {
    let (kt, ke) = (true_h.k(), est_h.k());
    let psi: Vec<Vec<f64>> = true_h
        .emissions()
        .iter()
        .map(|a| est_h.emissions().iter().map(|b| l1_gaussian(a, b)).collect())
        .collect();
    let n = kt.max(ke);
    let (target, plans) = augmentation_candidates(kt, ke);

    let mut best: Option<(u128, Vec<usize>, usize)> = None;
    for (pi, plan) in plans.iter().enumerate() {
        let (src_t, src_e) = match target {
            Some(AugmentedModel::True) => (with_sources(kt, plan), with_sources(ke, &[])),
            Some(AugmentedModel::Estimated) => (with_sources(kt, &[]), with_sources(ke, plan)),
            None => (with_sources(kt, &[]), with_sources(ke, &[])),
        };
        let cost: Vec<Vec<u128>> = src_t
            .iter()
            .map(|&a| src_e.iter().map(|&b| to_fixed(psi[a][b])).collect())
            .collect();
        let mut p: Vec<usize> = (0..n).collect();
        loop {
            let total: u128 = (0..n).map(|j| cost[j][p[j]]).sum();
            if best.as_ref().is_none_or(|(b, _, _)| total < *b) {
                best = Some((total, p.clone(), pi));
            }
            if !next_permutation(&mut p) {
                break;
            }
        }
    }
    let (total, mapping, pi) = best.expect("at least one candidate");
    RoiMatch {
        l_roi: (from_fixed(total) / n as f64).clamp(0.0, 1.0),
        permutation: Permutation { mapping },
        augmentation: target.map(|t| AugmentationPlan::from_sources(t, t_base(t, kt, ke), &plans[pi])),
    }
}

fn t_base(t: AugmentedModel, kt: usize, ke: usize) -> usize {
    match t {
        AugmentedModel::True => kt,
        AugmentedModel::Estimated => ke,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMatch {
    /// `(1/K_max) Ψ(A, P(Â))`.
    pub l_trans: f64,
    /// `Ψ(π, P(π̂))`, unhalved, so in `[0, 2]`.
    pub l_prior: f64,
    pub permutation: Permutation,
    pub augmentation: Option<AugmentationPlan>,
}

/// Unhalved L1 parts of the state-matching objective for one candidate.
pub(crate) fn state_objective(a: &[f64], pa: &[f64], b: &[f64], pb: &[f64], p: &[usize]) -> (u128, u128) {
    let n = p.len();
    let mut trans = 0;
    for i in 0..n {
        for j in 0..n {
            trans += to_fixed((a[i * n + j] - b[p[i] * n + p[j]]).abs());
        }
    }
    let mut prior = 0;
    for j in 0..n {
        prior += to_fixed((pa[j] - pb[p[j]]).abs());
    }
    (trans, prior)
}

pub(crate) fn flat_transition(h: &Hmm) -> Vec<f64> {
    h.transition_rows().concat()
}

pub fn match_states(true_h: &Hmm, est_h: &Hmm) -> StateMatch {
    let (kt, ke) = (true_h.k(), est_h.k());
    let n = kt.max(ke);
    let (target, plans) = augmentation_candidates(kt, ke);

    let mut best: Option<(u128, u128, u128, Vec<usize>, usize)> = None;
    for (pi, plan) in plans.iter().enumerate() {
        let dups = |base: usize| -> Vec<(usize, usize)> { plan.iter().enumerate().map(|(i, &s)| (s, base + i)).collect() };
        let (r, e) = match target {
            Some(AugmentedModel::True) => (augment_states(true_h, &dups(kt)).expect("valid plan"), est_h.clone()),
            Some(AugmentedModel::Estimated) => (true_h.clone(), augment_states(est_h, &dups(ke)).expect("valid plan")),
            None => (true_h.clone(), est_h.clone()),
        };
        let (ra, ea) = (flat_transition(&r), flat_transition(&e));
        let mut p: Vec<usize> = (0..n).collect();
        loop {
            let (trans, prior) = state_objective(&ra, r.prior(), &ea, e.prior(), &p);
            let obj = trans + prior;
            if best.as_ref().is_none_or(|b| obj < b.0) {
                best = Some((obj, trans, prior, p.clone(), pi));
            }
            if !next_permutation(&mut p) {
                break;
            }
        }
    }
    let (_, trans, prior, mapping, pi) = best.expect("at least one candidate");
    StateMatch {
        l_trans: from_fixed(trans) / n as f64,
        l_prior: from_fixed(prior),
        permutation: Permutation { mapping },
        augmentation: target.map(|t| AugmentationPlan::from_sources(t, t_base(t, kt, ke), &plans[pi])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::test_support::random_hmm;
    use crate::hmm::{log_likelihood, sample_sequences, GaussianEmission};
    use crate::linalg::{Point2, SymMat2};
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn unit_at(x: f64, y: f64) -> GaussianEmission {
        GaussianEmission::new(Point2::new(x, y), SymMat2::scaled_identity(100.0)).unwrap()
    }

    #[test]
    fn enumeration_helpers() {
        assert_eq!(multisets(2, 2), vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(multisets(3, 0), vec![Vec::<usize>::new()]);
        let mut p = vec![0, 1, 2];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 6);
        assert_eq!(p, vec![2, 1, 0]);
    }

    #[test]
    fn duplicate_single_state() {
        let h = Hmm::new(vec![1.0], vec![vec![1.0]], vec![unit_at(0.0, 0.0)]).unwrap();
        let a = augment_states(&h, &[(0, 1)]).unwrap();
        assert_eq!(a.prior(), &[0.5, 0.5]);
        assert_eq!(a.transition_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(a.emission(0), a.emission(1));
    }

    #[test]
    fn augmentation_rejects_bad_plans() {
        let h = random_hmm(2, &mut RngStream::new(60, 0));
        assert_eq!(augment_states(&h, &[(2, 2)]).unwrap_err(), DissimError::InvalidSource { state: 2, states: 2 });
        assert_eq!(
            augment_states(&h, &[(0, 3)]).unwrap_err(),
            DissimError::InvalidNewState { found: 3, expected: 2 }
        );
    }

    #[test]
    fn augmentation_preserves_likelihood() {
        let mut rng = RngStream::new(61, 0);
        for k in 1..=4 {
            let h = random_hmm(k, &mut rng);
            let plan = [(0, k), (k - 1, k + 1), (0, k + 2)];
            let a = augment_states(&h, &plan).unwrap();
            for row in a.transition_rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for s in sample_sequences(&h, 100, 7, &mut rng) {
                let (x, y) = (log_likelihood(&h, &s), log_likelihood(&a, &s));
                assert!((x - y).abs() < 1e-9 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn reversed_states_are_matched_exactly() {
        let h = random_hmm(4, &mut RngStream::new(62, 0));
        let rev = h.permuted(&[3, 2, 1, 0]);
        let r = match_rois(&h, &rev);
        assert_eq!(r.l_roi, 0.0);
        assert_eq!(r.permutation.mapping, vec![3, 2, 1, 0]);
        let s = match_states(&h, &rev);
        assert_eq!((s.l_trans, s.l_prior), (0.0, 0.0));
        assert_eq!(s.permutation.mapping, vec![3, 2, 1, 0]);
        assert!(r.augmentation.is_none());
    }

    #[test]
    fn missing_far_roi_costs_one_third() {
        let near = [unit_at(100.0, 100.0), unit_at(140.0, 100.0)];
        let far = unit_at(400.0, 300.0);
        let u3 = vec![vec![1.0 / 3.0; 3]; 3];
        let t = Hmm::new(vec![1.0 / 3.0; 3], u3, vec![near[0].clone(), near[1].clone(), far.clone()]).unwrap();
        let e = Hmm::new(vec![0.5, 0.5], vec![vec![0.5; 2]; 2], near.to_vec()).unwrap();
        let r = match_rois(&t, &e);
        let nearer = if l1_gaussian(&far, &near[0]) <= l1_gaussian(&far, &near[1]) { 0 } else { 1 };
        assert_eq!(r.l_roi, l1_gaussian(&far, &near[nearer]) / 3.0);
        assert_eq!(
            r.augmentation,
            Some(AugmentationPlan {
                target: AugmentedModel::Estimated,
                duplications: vec![(nearer, 2)]
            })
        );
        assert_eq!(r.permutation.mapping, vec![0, 1, 2]);
    }

    #[test]
    fn prior_shift_keeps_identity() {
        let em = vec![unit_at(0.0, 0.0), unit_at(200.0, 0.0)];
        let a = vec![vec![0.8, 0.2], vec![0.3, 0.7]];
        let t = Hmm::new(vec![0.5, 0.5], a.clone(), em.clone()).unwrap();
        let e = Hmm::new(vec![0.6, 0.4], a, em).unwrap();
        let s = match_states(&t, &e);
        assert_eq!(s.permutation, Permutation::identity(2));
        assert!((s.l_prior - 0.2).abs() < 1e-15);
        assert_eq!(s.l_trans, 0.0);
    }

    #[test]
    fn two_versus_one_uses_the_split_model() {
        let mut rng = RngStream::new(63, 0);
        let t = random_hmm(2, &mut rng);
        let e = random_hmm(1, &mut rng);
        let s = match_states(&t, &e);
        let split = augment_states(&e, &[(0, 1)]).unwrap();
        let (ta, sa) = (flat_transition(&t), flat_transition(&split));
        let candidates = [[0, 1], [1, 0]].map(|p| state_objective(&ta, t.prior(), &sa, split.prior(), &p));
        let expected = if candidates[1].0 + candidates[1].1 < candidates[0].0 + candidates[0].1 {
            candidates[1]
        } else {
            candidates[0]
        };
        // The split states are identical, so both permutations tie.
        assert_eq!((s.l_trans, s.l_prior), (from_fixed(expected.0) / 2.0, from_fixed(expected.1)));
        assert_eq!(s.augmentation.unwrap().duplications, vec![(0, 1)]);
    }

    /// Independent exhaustive search: plans as filtered K^m sequences,
    /// permutations by recursive insertion.
    fn brute_force(t: &Hmm, e: &Hmm) -> (f64, f64, f64) {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![Vec::new()];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for pos in 0..=p.len() {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        let (kt, ke) = (t.k(), e.k());
        let n = kt.max(ke);
        let (small, m) = (kt.min(ke), kt.abs_diff(ke));
        let mut plans = Vec::new();
        for code in 0..small.pow(m as u32).max(1) {
            let seq: Vec<usize> = (0..m).map(|i| (code / small.pow(i as u32)) % small).rev().collect();
            if seq.windows(2).all(|w| w[0] <= w[1]) {
                plans.push(seq);
            }
        }
        let mut best_roi = u128::MAX;
        let mut best_state = (u128::MAX, 0, 0);
        for plan in &plans {
            let dups: Vec<(usize, usize)> = plan.iter().enumerate().map(|(i, &s)| (s, small + i)).collect();
            let (ta, ea) = if kt < ke {
                (augment_states(t, &dups).unwrap(), e.clone())
            } else {
                (t.clone(), augment_states(e, &dups).unwrap())
            };
            let (fa, fb) = (flat_transition(&ta), flat_transition(&ea));
            for p in perms(n) {
                let roi: u128 = (0..n).map(|j| to_fixed(l1_gaussian(ta.emission(j), ea.emission(p[j])))).sum();
                best_roi = best_roi.min(roi);
                let (tr, pr) = state_objective(&fa, ta.prior(), &fb, ea.prior(), &p);
                if tr + pr < best_state.0 {
                    best_state = (tr + pr, tr, pr);
                }
            }
        }
        (from_fixed(best_roi) / n as f64, from_fixed(best_state.1) / n as f64, from_fixed(best_state.2))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn matches_brute_force(seed in any::<u64>(), kt in 1usize..=4, delta in -1i32..=1) {
            let ke = (kt as i32 + delta).clamp(1, 4) as usize;
            let mut rng = RngStream::new(seed, 0);
            let t = random_hmm(kt, &mut rng);
            let e = random_hmm(ke, &mut rng);
            let (roi, trans, prior) = brute_force(&t, &e);
            prop_assert_eq!(match_rois(&t, &e).l_roi, roi);
            let s = match_states(&t, &e);
            prop_assert_eq!((s.l_trans, s.l_prior), (trans, prior));
        }

        #[test]
        fn relabeling_estimate_changes_nothing(seed in any::<u64>(), kt in 1usize..=4, ke in 1usize..=4) {
            let mut rng = RngStream::new(seed, 0);
            let t = random_hmm(kt, &mut rng);
            let e = random_hmm(ke, &mut rng);
            let mut order: Vec<usize> = (0..ke).collect();
            order.shuffle(&mut rng);
            let pe = e.permuted(&order);
            prop_assert_eq!(match_rois(&t, &e).l_roi, match_rois(&t, &pe).l_roi);
            let (a, b) = (match_states(&t, &e), match_states(&t, &pe));
            prop_assert_eq!((a.l_trans, a.l_prior), (b.l_trans, b.l_prior));
        }

        #[test]
        fn permuted_copy_is_recovered(seed in any::<u64>(), k in 1usize..=6) {
            let mut rng = RngStream::new(seed, 0);
            let h = random_hmm(k, &mut rng);
            let mut order: Vec<usize> = (0..k).collect();
            order.shuffle(&mut rng);
            let p = h.permuted(&order);
            let inv = Permutation { mapping: order }.inverse();
            let r = match_rois(&h, &p);
            prop_assert_eq!(r.l_roi, 0.0);
            prop_assert_eq!(&r.permutation, &inv);
            let s = match_states(&h, &p);
            prop_assert_eq!((s.l_trans, s.l_prior), (0.0, 0.0));
            prop_assert_eq!(&s.permutation, &inv);
        }
    }
}
