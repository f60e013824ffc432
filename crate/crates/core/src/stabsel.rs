//! Complementary-pairs stability selection.
//!
//! Wraps any base selector (a map from a dataset to a set of feature
//! indices) in repeated fitting over complementary half-sample pairs,
//! aggregates per-feature selection frequencies, and thresholds them —
//! either at a user-chosen cutoff or at the smallest cutoff whose certified
//! bound on the expected number of false positives stays within a target.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::bounds::{fp_bound, BoundMethod};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, purpose};

/// B complementary pairs of disjoint row sets, each of size `n / 2` (odd n
/// leaves one row per pair unused).
#[derive(Debug, Clone)]
pub struct SubsamplePlan {
    pairs: Vec<(Vec<usize>, Vec<usize>)>,
    n: usize,
    seed: u64,
}

impl SubsamplePlan {
    pub fn b_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pairs(&self) -> &[(Vec<usize>, Vec<usize>)] {
        &self.pairs
    }

    /// Subsamples in fit order: pair 0 first half, pair 0 second half, ...
    pub fn subsamples(&self) -> impl Iterator<Item = &[usize]> {
        self.pairs
            .iter()
            .flat_map(|(a, b)| [a.as_slice(), b.as_slice()])
    }
}

/// Draws B independent uniformly random partitions of `0..n` into
/// complementary half samples.
pub fn draw_plan(n: usize, b_pairs: usize, seed: u64) -> Result<SubsamplePlan> {
    if n < 4 {
        return Err(Error::invalid("need at least 4 observations to subsample"));
    }
    if b_pairs == 0 {
        return Err(Error::invalid("need at least one complementary pair"));
    }
    let half = n / 2;
    let mut pairs = Vec::with_capacity(b_pairs);
    for b in 0..b_pairs {
        let mut rng = rng::stream(seed, &[purpose::SUBSAMPLES, b as u64]);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut first: Vec<usize> = order[..half].to_vec();
        let mut second: Vec<usize> = order[half..2 * half].to_vec();
        // Sorted row order keeps downstream fits independent of shuffle order.
        first.sort_unstable();
        second.sort_unstable();
        pairs.push((first, second));
    }
    Ok(SubsamplePlan { pairs, n, seed })
}

/// Per-feature selection frequencies over the 2B subsample fits.
#[derive(Debug, Clone)]
pub struct FrequencyProfile {
    freq: Vec<f64>,
    q_avg: f64,
    per_fit_sets: Vec<Vec<usize>>,
    failures: usize,
}

impl FrequencyProfile {
    pub fn p(&self) -> usize {
        self.freq.len()
    }

    pub fn freq(&self) -> &[f64] {
        &self.freq
    }

    /// Average number of features selected per subsample fit.
    pub fn q_avg(&self) -> f64 {
        self.q_avg
    }

    pub fn per_fit_sets(&self) -> &[Vec<usize>] {
        &self.per_fit_sets
    }

    /// Subsample fits whose selector failed (they contribute empty sets).
    pub fn failures(&self) -> usize {
        self.failures
    }

    /// Builds a profile directly from per-fit selected sets.
    pub fn from_sets(p: usize, sets: Vec<Vec<usize>>, failures: usize) -> Self {
        let fits = sets.len().max(1);
        let mut counts = vec![0usize; p];
        let mut total = 0usize;
        for set in &sets {
            for &j in set {
                counts[j] += 1;
            }
            total += set.len();
        }
        FrequencyProfile {
            freq: counts.iter().map(|&c| c as f64 / fits as f64).collect(),
            q_avg: total as f64 / fits as f64,
            per_fit_sets: sets,
            failures,
        }
    }
}

/// Runs the base selector on every subsample of the plan and aggregates
/// selection frequencies.
///
/// A selector failure contributes the empty set and is counted in
/// `failures`. Fits run in parallel; aggregation order is fixed, so the
/// result does not depend on thread scheduling.
pub fn estimate_frequencies<F>(
    dataset: &Dataset,
    selector: F,
    plan: &SubsamplePlan,
) -> Result<FrequencyProfile>
where
    F: Fn(&Dataset) -> Result<Vec<usize>> + Sync,
{
    if plan.n() != dataset.n() {
        return Err(Error::invalid(format!(
            "plan drawn for n = {}, dataset has n = {}",
            plan.n(),
            dataset.n()
        )));
    }
    let subsamples: Vec<&[usize]> = plan.subsamples().collect();
    let results: Vec<Option<Vec<usize>>> = subsamples
        .par_iter()
        .map(|rows| {
            let sub = dataset.subset_rows(rows).ok()?;
            selector(&sub).ok()
        })
        .collect();

    let mut failures = 0;
    let sets: Vec<Vec<usize>> = results
        .into_iter()
        .map(|r| match r {
            Some(set) => set,
            None => {
                failures += 1;
                Vec::new()
            }
        })
        .collect();
    Ok(FrequencyProfile::from_sets(dataset.p(), sets, failures))
}

/// How an optimal-threshold inversion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdStatus {
    /// The certified bound meets the target at the returned threshold.
    Achieved,
    /// No grid threshold met the target; threshold 1.0 returned.
    NotAchieved,
    /// Every subsample fit selected nothing; any threshold gives an empty set.
    DegenerateEmpty,
}

/// Result of inverting the false-positive bound for a threshold.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdChoice {
    pub tau: f64,
    pub bound_e_v: f64,
    pub status: ThresholdStatus,
}

/// Smallest threshold (grid step 0.01, starting at 0.50) whose certified
/// r-concave bound on the expected false-positive count is at most
/// `v_target`.
///
/// The grid starts at one half because the complementary-pairs guarantees
/// anchor there; at exactly 0.50 the certificate rests on the single-fit
/// selection-proportion bound alone (the simultaneous-selection term is
/// vacuous at that point).
pub fn optimal_threshold(
    profile: &FrequencyProfile,
    b_pairs: usize,
    v_target: f64,
) -> Result<ThresholdChoice> {
    if !(v_target > 0.0) {
        return Err(Error::invalid("v_target must be positive"));
    }
    let p = profile.p() as f64;
    if profile.q_avg() == 0.0 {
        return Ok(ThresholdChoice {
            tau: 0.5,
            bound_e_v: 0.0,
            status: ThresholdStatus::DegenerateEmpty,
        });
    }
    let theta = profile.q_avg() / p;
    for k in 50..=100u32 {
        let tau = k as f64 / 100.0;
        if tau <= theta {
            continue;
        }
        let bound = p * fp_bound(theta, tau, b_pairs, BoundMethod::RConcave)?;
        if bound <= v_target {
            return Ok(ThresholdChoice {
                tau,
                bound_e_v: bound,
                status: ThresholdStatus::Achieved,
            });
        }
    }
    let bound_at_one = if theta < 1.0 {
        p * fp_bound(theta, 1.0, b_pairs, BoundMethod::RConcave)?
    } else {
        f64::INFINITY
    };
    Ok(ThresholdChoice {
        tau: 1.0,
        bound_e_v: bound_at_one,
        status: ThresholdStatus::NotAchieved,
    })
}

/// The stable set at a threshold together with its certificate.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    /// Features whose selection frequency reaches the threshold.
    pub stable_set: Vec<usize>,
    pub threshold: f64,
    /// Certified bound on the expected number of false positives at this
    /// threshold (infinite when no bound is valid there).
    pub bound_e_v: f64,
    /// Name of the bound that produced the certificate.
    pub bound_method: &'static str,
    /// Target used when the threshold came from bound inversion.
    pub v_target: Option<f64>,
    /// Identity of the procedure that produced this outcome.
    pub procedure: String,
}

impl SelectionOutcome {
    pub fn with_procedure(mut self, procedure: impl Into<String>) -> Self {
        self.procedure = procedure.into();
        self
    }

    pub fn with_v_target(mut self, v_target: f64) -> Self {
        self.v_target = Some(v_target);
        self
    }
}

/// Thresholds the frequency profile at `tau` and attaches the tightest valid
/// certificate (r-concave when defined, otherwise the classic bound).
pub fn stable_set(
    profile: &FrequencyProfile,
    tau: f64,
    b_pairs: usize,
) -> Result<SelectionOutcome> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid(format!("threshold {tau} outside (0, 1]")));
    }
    let selected: Vec<usize> = profile
        .freq()
        .iter()
        .enumerate()
        .filter_map(|(j, &f)| (f >= tau).then_some(j))
        .collect();

    let p = profile.p() as f64;
    let theta = profile.q_avg() / p;
    let (bound_e_v, bound_method) = if theta == 0.0 {
        (0.0, "r-concave")
    } else if theta < tau {
        (
            p * fp_bound(theta, tau, b_pairs, BoundMethod::RConcave)?,
            "r-concave",
        )
    } else if tau > 0.5 && theta < 1.0 {
        (
            p * fp_bound(theta, tau, b_pairs, BoundMethod::MeinshausenBuhlmann)?,
            "MB",
        )
    } else {
        (f64::INFINITY, "none")
    };

    Ok(SelectionOutcome {
        stable_set: selected,
        threshold: tau,
        bound_e_v,
        bound_method,
        v_target: None,
        procedure: format!("threshold_{tau:.2}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{Array1, Array2};

    fn noise_dataset(n: usize, p: usize, seed: u64) -> Dataset {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((n, p));
        for v in x.iter_mut() {
            *v = rng.gen::<f64>() - 0.5;
        }
        let y: Array1<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        Dataset::new(x, y, vec![p]).unwrap()
    }

    #[test]
    fn plan_has_disjoint_half_samples() {
        let plan = draw_plan(100, 50, 42).unwrap();
        assert_eq!(plan.b_pairs(), 50);
        for (a, b) in plan.pairs() {
            assert_eq!(a.len(), 50);
            assert_eq!(b.len(), 50);
            let mut union: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
            union.sort_unstable();
            union.dedup();
            assert_eq!(union.len(), 100, "pair halves must be disjoint");
        }
    }

    #[test]
    fn odd_n_leaves_one_out() {
        let plan = draw_plan(5, 10, 7).unwrap();
        for (a, b) in plan.pairs() {
            assert_eq!(a.len(), 2);
            assert_eq!(b.len(), 2);
            let mut union: Vec<usize> = a.iter().chain(b.iter()).copied().collect();
            union.sort_unstable();
            union.dedup();
            assert_eq!(union.len(), 4);
        }
    }

    #[test]
    fn plans_are_deterministic() {
        let a = draw_plan(30, 8, 5).unwrap();
        let b = draw_plan(30, 8, 5).unwrap();
        assert_eq!(a.pairs(), b.pairs());
        let c = draw_plan(30, 8, 6).unwrap();
        assert_ne!(a.pairs(), c.pairs());
    }

    #[test]
    fn constant_selector_gives_unit_frequencies() {
        let ds = noise_dataset(20, 6, 1);
        let plan = draw_plan(20, 10, 3).unwrap();
        let profile = estimate_frequencies(&ds, |_| Ok(vec![1, 2]), &plan).unwrap();
        assert_eq!(profile.freq()[1], 1.0);
        assert_eq!(profile.freq()[2], 1.0);
        assert_eq!(profile.freq()[0], 0.0);
        assert_abs_diff_eq!(profile.q_avg(), 2.0);
        assert_eq!(profile.failures(), 0);
    }

    #[test]
    fn empty_selector_gives_zero_profile() {
        let ds = noise_dataset(20, 6, 2);
        let plan = draw_plan(20, 5, 3).unwrap();
        let profile = estimate_frequencies(&ds, |_| Ok(vec![]), &plan).unwrap();
        assert!(profile.freq().iter().all(|&f| f == 0.0));
        assert_eq!(profile.q_avg(), 0.0);
    }

    #[test]
    fn failed_fits_count_and_contribute_empty_sets() {
        let ds = noise_dataset(20, 4, 3);
        let plan = draw_plan(20, 4, 9).unwrap();
        let profile = estimate_frequencies(
            &ds,
            |sub| {
                if sub.y()[0] == 0.0 {
                    Err(Error::invalid("synthetic failure"))
                } else {
                    Ok(vec![0])
                }
            },
            &plan,
        )
        .unwrap();
        assert_eq!(
            profile.failures() + (profile.freq()[0] * 8.0).round() as usize,
            8
        );
    }

    #[test]
    fn frequency_count_identity() {
        let ds = noise_dataset(24, 10, 4);
        let plan = draw_plan(24, 6, 11).unwrap();
        let profile = estimate_frequencies(
            &ds,
            |sub| {
                let k = (sub.y()[0] as usize + 2) % 5;
                Ok((0..k).collect())
            },
            &plan,
        )
        .unwrap();
        let sum: f64 = profile.freq().iter().sum();
        assert_abs_diff_eq!(sum, profile.q_avg(), epsilon = 1e-12);
    }

    #[test]
    fn stable_sets_nest() {
        let sets = vec![vec![0, 1], vec![0], vec![0, 1, 2], vec![0, 2]];
        let profile = FrequencyProfile::from_sets(4, sets, 0);
        let loose = stable_set(&profile, 0.4, 2).unwrap();
        let strict = stable_set(&profile, 0.8, 2).unwrap();
        let tight = stable_set(&profile, 1.0, 2).unwrap();
        assert!(strict.stable_set.iter().all(|j| loose.stable_set.contains(j)));
        assert!(tight.stable_set.iter().all(|j| strict.stable_set.contains(j)));
        assert_eq!(tight.stable_set, vec![0]);
    }

    #[test]
    fn low_threshold_returns_everything_ever_selected() {
        let sets = vec![vec![0], vec![2], vec![0, 3], vec![3]];
        let profile = FrequencyProfile::from_sets(5, sets, 0);
        let outcome = stable_set(&profile, 0.25, 2).unwrap();
        assert_eq!(outcome.stable_set, vec![0, 2, 3]);
    }

    #[test]
    fn optimal_threshold_monotone_in_target() {
        let sets: Vec<Vec<usize>> = (0..100)
            .map(|i| (0..(20 + i % 3)).collect::<Vec<usize>>())
            .collect();
        let profile = FrequencyProfile::from_sets(1000, sets, 0);
        let mut prev_tau = 1.0;
        for v in [0.5, 1.0, 2.0, 4.0, 8.0, 1000.0] {
            let choice = optimal_threshold(&profile, 50, v).unwrap();
            assert!(choice.tau <= prev_tau + 1e-12, "tau rose as target grew");
            prev_tau = choice.tau;
            if choice.status == ThresholdStatus::Achieved {
                assert!(choice.bound_e_v <= v);
            }
        }
        // A vacuous target is met at the low end of the search grid.
        let vacuous = optimal_threshold(&profile, 50, 1000.0).unwrap();
        assert_eq!(vacuous.tau, 0.5);
    }

    #[test]
    fn optimal_threshold_degenerate_empty() {
        let profile = FrequencyProfile::from_sets(10, vec![vec![], vec![]], 0);
        let choice = optimal_threshold(&profile, 1, 2.0).unwrap();
        assert_eq!(choice.status, ThresholdStatus::DegenerateEmpty);
        assert_eq!(choice.tau, 0.5);
        assert_eq!(choice.bound_e_v, 0.0);
    }

    #[test]
    fn certificates_attach_to_manual_thresholds() {
        let sets: Vec<Vec<usize>> = (0..20).map(|_| vec![0, 1, 2]).collect();
        let profile = FrequencyProfile::from_sets(100, sets, 0);
        for tau in [0.7, 0.8] {
            let outcome = stable_set(&profile, tau, 10).unwrap();
            assert_eq!(outcome.bound_method, "r-concave");
            assert!(outcome.bound_e_v.is_finite());
            assert_eq!(outcome.stable_set, vec![0, 1, 2]);
        }
    }
}
