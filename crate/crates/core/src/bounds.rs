//! Bounds on the expected number of falsely selected variables under
//! complementary-pairs stability selection.
//!
//! Both bounds take `theta` (the average fraction of features selected per
//! subsample fit, `q_avg / p`) and a frequency threshold `tau`, and return a
//! bound on `E[V] / p`; callers multiply by `p` to get the expected
//! false-positive count.

use crate::error::{Error, Result};

/// Which tail bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// Classic `theta^2 / (2 tau - 1)` bound, valid for `tau` in (1/2, 1].
    MeinshausenBuhlmann,
    /// Tail bound over r-concave selection-proportion distributions, valid
    /// for `tau` in (theta, 1]. Tighter than the classic bound wherever both
    /// are defined.
    RConcave,
}

impl BoundMethod {
    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::MeinshausenBuhlmann => "MB",
            BoundMethod::RConcave => "r-concave",
        }
    }
}

/// Bound on `E[V] / p` at threshold `tau` for a selector with per-fit
/// selection fraction `theta`, using `b_pairs` complementary pairs.
pub fn fp_bound(theta: f64, tau: f64, b_pairs: usize, method: BoundMethod) -> Result<f64> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(format!(
            "theta must be in (0, 1), got {theta}"
        )));
    }
    if b_pairs == 0 {
        return Err(Error::invalid("need at least one complementary pair"));
    }
    match method {
        BoundMethod::MeinshausenBuhlmann => {
            if !(tau > 0.5 && tau <= 1.0) {
                return Err(Error::BoundRegion {
                    method: "MB",
                    tau,
                    lo: 0.5,
                    hi: 1.0,
                });
            }
            Ok((theta * theta / (2.0 * tau - 1.0)).min(1.0))
        }
        BoundMethod::RConcave => {
            if !(tau > theta && tau <= 1.0) {
                return Err(Error::BoundRegion {
                    method: "r-concave",
                    tau,
                    lo: theta,
                    hi: 1.0,
                });
            }
            // Proportions over the 2B individual subsample fits are
            // (-1/4)-concave with mean theta; simultaneous selection
            // proportions over the B pairs are (-1/2)-concave with mean
            // theta^2 and the tail point shifts to 2 tau - 1.
            let d_single = d_tail_max(tau, theta, 2 * b_pairs, -0.25);
            let mut bound = d_single;
            if 2.0 * tau - 1.0 > theta * theta {
                let d_simult = d_tail_max(2.0 * tau - 1.0, theta * theta, b_pairs, -0.5);
                bound = bound.min(d_simult);
            }
            Ok(bound.min(1.0))
        }
    }
}

/// Largest achievable `P(X >= eta)` over r-concave random variables on
/// `{0, 1/b, ..., 1}` with mean at most `mean`.
///
/// A pmf `f` on `{0, ..., b}` is r-concave (r < 0) when the sequence
/// `f(k)^r` is convex on a contiguous support. The tail supremum is attained
/// by pmfs of the form `f(k) ∝ (a + k)^(1/r)` on a support `{0, ..., m}`,
/// with the mean constraint active; we solve for `a` by bisection at every
/// admissible support length and keep the largest tail.
pub fn d_tail_max(eta: f64, mean: f64, b: usize, r: f64) -> f64 {
    debug_assert!(r < 0.0);
    if mean <= 0.0 {
        return if eta <= 0.0 { 1.0 } else { 0.0 };
    }
    if mean >= 1.0 || eta <= 0.0 {
        return 1.0;
    }
    let bf = b as f64;
    // First grid index inside the tail; the epsilon absorbs float fuzz when
    // eta * b is an exact integer.
    let k_star = (eta * bf - 1e-9).ceil().max(0.0) as usize;
    if k_star == 0 {
        return 1.0;
    }
    if k_star > b {
        return 0.0;
    }
    let target = mean * bf;
    if target >= k_star as f64 {
        // A point mass at k_star is feasible and r-concave.
        return 1.0;
    }

    let s = 1.0 / r;
    let mut best = 0.0f64;
    for support_end in k_star..=b {
        let tail = tail_for_support(support_end, k_star, target, s);
        if tail > best {
            best = tail;
        }
    }
    best.min(1.0)
}

/// Tail mass of the extremal pmf on `{0, ..., m}` with mean pinned to
/// `target` (index units), shape `f(k) ∝ (a + k)^s`.
fn tail_for_support(m: usize, k_star: usize, target: f64, s: f64) -> f64 {
    // Uniform limit: if even the uniform pmf on {0..m} satisfies the mean
    // budget, the constraint is slack for every `a`, so take the uniform tail.
    let uniform_mean = m as f64 / 2.0;
    if target >= uniform_mean {
        return (m - k_star + 1) as f64 / (m + 1) as f64;
    }

    // mean(a) grows monotonically from 0 (mass collapses onto k = 0) to m/2
    // (uniform); bisect log(a) until the mean matches the budget.
    let (mut lo, mut hi) = (-80.0f64, 80.0f64);
    for _ in 0..96 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid.exp(), m, s) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = (0.5 * (lo + hi)).exp();
    let (total, _, tail) = sums_at(a, m, s, k_star);
    tail / total
}

fn mean_at(a: f64, m: usize, s: f64) -> f64 {
    let (total, first_moment, _) = sums_at(a, m, s, m + 1);
    first_moment / total
}

/// Sums of the unnormalized weights `w_k = ((a + k)/a)^s` on `{0..m}`:
/// total, first moment, and tail mass from `k_star`.
fn sums_at(a: f64, m: usize, s: f64, k_star: usize) -> (f64, f64, f64) {
    let mut total = 0.0;
    let mut first = 0.0;
    let mut tail = 0.0;
    for k in 0..=m {
        let w = (1.0 + k as f64 / a).powf(s);
        total += w;
        first += k as f64 * w;
        if k >= k_star {
            tail += w;
        }
    }
    (total, first, tail)
}
