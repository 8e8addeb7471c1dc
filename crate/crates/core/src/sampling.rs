//! Rejection sampling over Voronoi areas.
//!
//! A uniformly random target lands in node `v`'s cell with probability `a_v`.
//! Node `v` accepts with probability `r_v = min(τ/a_v, 1)`, which flattens the
//! induced selection distribution to `q_v ∝ min(τ, a_v)`. The threshold `τ` is
//! the area quantile at level `min(ν, μ/(1+μ))`: at most `νn` nodes end up
//! undersampled and none is sampled with probability above `(1+μ)/n`.

use std::cmp::Ordering;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Network, Point};
use crate::routing::{greedy_route, RoutePath};
use crate::scalar::Scalar;

pub const DEFAULT_NU: f64 = 0.1;
pub const DEFAULT_MU: f64 = 0.1;

/// Threshold, acceptance probabilities and the induced sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingPolicy<S> {
    pub tau: S,
    pub nu: S,
    pub mu: S,
    /// `r_v`
    pub accept_prob: Vec<S>,
    /// `q_v`
    pub q: Vec<S>,
    /// Probability that a single query is accepted.
    pub p_accept: S,
}

fn check_nu_mu<S: Scalar>(nu: S, mu: S) -> Result<()> {
    if !(nu > S::zero() && nu < S::one()) {
        return Err(Error::param(format!("nu must lie in (0, 1), got {nu}")));
    }
    if !(mu > S::zero() && mu.is_finite()) {
        return Err(Error::param(format!("mu must be positive, got {mu}")));
    }
    Ok(())
}

/// Area quantile at level `min(ν, μ/(1+μ))`.
///
/// Returns the largest area value `τ` such that the fraction of areas `<= τ`
/// does not exceed the level. When no area qualifies, `τ = min(areas)/2`.
pub fn choose_threshold<S: Scalar>(areas: &[S], nu: S, mu: S) -> Result<S> {
    check_nu_mu(nu, mu)?;
    let level = nu.min(mu / (S::one() + mu));
    threshold_at_level(areas, level)
}

pub fn threshold_at_level<S: Scalar>(areas: &[S], level: S) -> Result<S> {
    if areas.is_empty() || areas.iter().any(|&a| !(a > S::zero())) {
        return Err(Error::input("areas must be non-empty and positive"));
    }
    let mut sorted = areas.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = sorted.len();
    // Guard against 0.1 * 500 landing a hair under 50.
    let budget = (level * S::of_usize(n) + S::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0);
    let budget = budget.min(n);
    // Step down past ties so that #{a <= τ} never exceeds the budget.
    let mut k = budget;
    while k > 0 && k < n && sorted[k - 1] == sorted[k] {
        k -= 1;
    }
    Ok(if k == 0 {
        sorted[0] / S::lit(2.0)
    } else {
        sorted[k - 1]
    })
}

impl<S: Scalar> SamplingPolicy<S> {
    /// Policy with the threshold picked by [`choose_threshold`].
    pub fn new(areas: &[S], nu: S, mu: S) -> Result<Self> {
        let tau = choose_threshold(areas, nu, mu)?;
        Self::with_threshold(areas, tau, nu, mu)
    }

    pub fn with_defaults(areas: &[S]) -> Result<Self> {
        Self::new(areas, S::lit(DEFAULT_NU), S::lit(DEFAULT_MU))
    }

    /// Threshold below every area: all nodes reject proportionally and `q` is uniform.
    pub fn uniform(areas: &[S]) -> Result<Self> {
        let min = areas.iter().copied().fold(S::infinity(), S::min);
        Self::with_threshold(
            areas,
            min / S::lit(2.0),
            S::lit(DEFAULT_NU),
            S::lit(DEFAULT_MU),
        )
    }

    pub fn with_threshold(areas: &[S], tau: S, nu: S, mu: S) -> Result<Self> {
        check_nu_mu(nu, mu)?;
        if areas.is_empty() || areas.iter().any(|&a| !(a > S::zero())) {
            return Err(Error::input("areas must be non-empty and positive"));
        }
        if !(tau > S::zero()) {
            return Err(Error::param(format!(
                "threshold must be positive, got {tau}"
            )));
        }
        let accept_prob: Vec<S> = areas.iter().map(|&a| (tau / a).min(S::one())).collect();
        let weights: Vec<S> = areas.iter().map(|&a| a.min(tau)).collect();
        let p_accept: S = weights.iter().copied().sum();
        let q = weights.iter().map(|&w| w / p_accept).collect();
        Ok(Self {
            tau,
            nu,
            mu,
            accept_prob,
            q,
            p_accept,
        })
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }
}

/// Mean number of queries per round, `1/P_a`.
pub fn expected_queries<S: Scalar>(policy: &SamplingPolicy<S>) -> Result<S> {
    if !(policy.p_accept > S::zero()) {
        return Err(Error::InvalidPolicy(format!(
            "acceptance probability {} is not positive",
            policy.p_accept
        )));
    }
    Ok(S::one() / policy.p_accept)
}

/// Lower bound `1 - 4c` on `P(a_v > c/n)`.
pub fn acceptance_lower_bound(c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 0.25) {
        return Err(Error::param(format!("c must lie in (0, 1/4), got {c}")));
    }
    Ok(1.0 - 4.0 * c)
}

/// Query count `m` such that the maximum of `K` i.i.d. geometric(`P_a`) query
/// counts stays `<= m` with probability at least `1 - ε/2`:
/// `m = ceil(-ρ log K / log(1 - P_a))` with `ρ = log(2/ε)/log K + 1`.
pub fn max_queries_bound(rounds: u64, epsilon: f64, p_accept: f64) -> Result<u64> {
    if rounds < 2 {
        return Err(Error::param(format!(
            "round count must be >= 2, got {rounds}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if !(p_accept > 0.0 && p_accept <= 1.0) {
        return Err(Error::param(format!(
            "p_accept must lie in (0, 1], got {p_accept}"
        )));
    }
    if p_accept == 1.0 {
        return Ok(1);
    }
    let log_k = (rounds as f64).ln();
    let rho = (2.0 / epsilon).ln() / log_k + 1.0;
    let m = -rho * log_k / (1.0 - p_accept).ln();
    // Absorb rounding so exact integers (e.g. 12.000000000000002) stay put.
    Ok((m * (1.0 - 1e-12)).ceil().max(1.0) as u64)
}

/// `(‖q - 1/n‖₁, ‖q - 1/n‖₂)`.
pub fn q_distance_to_uniform<S: Scalar>(policy: &SamplingPolicy<S>) -> (S, S) {
    distance_to_uniform(&policy.q)
}

pub fn distance_to_uniform<S: Scalar>(q: &[S]) -> (S, S) {
    let u = S::one() / S::of_usize(q.len());
    let l1 = q.iter().map(|&v| (v - u).abs()).sum();
    let l2 = q.iter().map(|&v| (v - u) * (v - u)).sum::<S>().sqrt();
    (l1, l2)
}

/// Outcome of one rejection-sampling round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RejectionSample<S> {
    pub accepted: usize,
    /// Number of queries `Q`, including the accepted one.
    pub queries: u32,
    /// Hops summed over all route legs.
    pub hops: u64,
    pub targets: Vec<Point<S>>,
    pub legs: Vec<RoutePath>,
}

/// A round abandoned because a route leg dead-ended. Hops already spent are kept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundFailure<S> {
    pub queries: u32,
    pub hops: u64,
    pub targets: Vec<Point<S>>,
    pub legs: Vec<RoutePath>,
}

/// Routes to uniform targets until some terminal node accepts.
///
/// The first leg leaves `origin`; after a rejection the next leg leaves the
/// rejecting node.
pub fn sample_with_rejection<S: Scalar, R: Rng + ?Sized>(
    policy: &SamplingPolicy<S>,
    net: &Network<S>,
    origin: usize,
    rng: &mut R,
) -> Result<RejectionSample<S>, RoundFailure<S>> {
    debug_assert_eq!(policy.n(), net.n);
    let mut holder = origin;
    let mut hops = 0u64;
    let mut targets = Vec::new();
    let mut legs = Vec::new();
    loop {
        let target = Point::uniform(rng);
        let leg = greedy_route(net, holder, &target);
        hops += leg.hop_count as u64;
        let queries = legs.len() as u32 + 1;
        let (terminal, dead_end) = (leg.terminal, leg.dead_end);
        targets.push(target);
        legs.push(leg);
        if dead_end {
            return Err(RoundFailure {
                queries,
                hops,
                targets,
                legs,
            });
        }
        let u: S = crate::rng::unit(rng);
        if u < policy.accept_prob[terminal] {
            return Ok(RejectionSample {
                accepted: terminal,
                queries,
                hops,
                targets,
                legs,
            });
        }
        holder = terminal;
    }
}

/// Diagnostic summary of a policy.
#[derive(Debug, Clone, Serialize)]
pub struct PolicyReport {
    pub n: usize,
    pub tau: f64,
    pub nu: f64,
    pub mu: f64,
    pub p_accept: f64,
    pub expected_queries: f64,
    pub l1_to_uniform: f64,
    pub l2_to_uniform: f64,
    pub undersampled: usize,
    pub max_q_times_n: f64,
    /// Bin edges over `n·q_v`.
    pub q_histogram_edges: Vec<f64>,
    pub q_histogram_counts: Vec<usize>,
}

impl<S: Scalar> SamplingPolicy<S> {
    pub fn report(&self, bins: usize) -> PolicyReport {
        let n = self.n();
        let nf = n as f64;
        let scaled: Vec<f64> = self.q.iter().map(|&v| v.to_f64_lossy() * nf).collect();
        let hi = scaled.iter().copied().fold(0.0, f64::max);
        let bins = bins.max(1);
        let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
        let mut counts = vec![0; bins];
        for &s in &scaled {
            counts[((s / width) as usize).min(bins - 1)] += 1;
        }
        let (l1, l2) = q_distance_to_uniform(self);
        PolicyReport {
            n,
            tau: self.tau.to_f64_lossy(),
            nu: self.nu.to_f64_lossy(),
            mu: self.mu.to_f64_lossy(),
            p_accept: self.p_accept.to_f64_lossy(),
            expected_queries: 1.0 / self.p_accept.to_f64_lossy(),
            l1_to_uniform: l1.to_f64_lossy(),
            l2_to_uniform: l2.to_f64_lossy(),
            undersampled: scaled.iter().filter(|&&s| s < 1.0).count(),
            max_q_times_n: hi,
            q_histogram_edges: (0..=bins).map(|b| b as f64 * width).collect(),
            q_histogram_counts: counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_network, transmission_radius};
    use crate::rng;

    #[test]
    fn quantile_by_counting() {
        let tau = threshold_at_level(&[0.3, 0.1, 0.4, 0.2], 0.25).unwrap();
        assert_eq!(tau, 0.1);
    }

    #[test]
    fn equal_areas_fall_back_and_stay_uniform() {
        let n = 8;
        let areas = vec![1.0 / n as f64; n];
        let tau = choose_threshold(&areas, 0.1, 0.1).unwrap();
        assert_eq!(tau, 0.5 / n as f64);
        let p = SamplingPolicy::with_threshold(&areas, tau, 0.1, 0.1).unwrap();
        for &q in &p.q {
            assert!((q - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_nu_mu_rejected() {
        let a = [0.5, 0.5];
        for (nu, mu) in [(0.0, 0.1), (1.0, 0.1), (0.1, 0.0), (0.1, -1.0)] {
            assert!(matches!(
                choose_threshold(&a, nu, mu),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn ties_never_exceed_level() {
        let areas = [0.1, 0.1, 0.1, 0.7];
        // Level 0.5 allows two areas, but three are tied at 0.1.
        let tau = threshold_at_level(&areas, 0.5).unwrap();
        assert_eq!(tau, 0.05);
    }

    #[test]
    fn policy_formulas() {
        let areas: [f64; 4] = [0.05, 0.15, 0.3, 0.5];
        let p = SamplingPolicy::with_threshold(&areas, 0.2, 0.1, 0.1).unwrap();
        let pa = 2.0 * 0.2 + 0.05 + 0.15;
        assert!((p.p_accept - pa).abs() < 1e-12);
        let direct: f64 = areas.iter().zip(&p.accept_prob).map(|(a, r)| a * r).sum();
        assert!((direct - pa).abs() < 1e-12);
        assert_eq!(p.accept_prob, vec![1.0, 1.0, 0.2 / 0.3, 0.2 / 0.5]);
        assert!((p.q.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p.q[2], p.q[3]);
        assert!((p.q[1] / p.q[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn expected_queries_values() {
        let full = SamplingPolicy::with_threshold(&[0.5f64, 0.5], 1.0, 0.1, 0.1).unwrap();
        assert_eq!(expected_queries(&full).unwrap(), 1.0);
        let half = SamplingPolicy::with_threshold(&[0.5f64, 0.5], 0.25, 0.1, 0.1).unwrap();
        assert!((expected_queries(&half).unwrap() - 2.0).abs() < 1e-15);
        let mut broken = half.clone();
        broken.p_accept = 0.0;
        assert!(matches!(
            expected_queries(&broken),
            Err(Error::InvalidPolicy(_))
        ));
    }

    #[test]
    fn bound_values() {
        assert_eq!(acceptance_lower_bound(1.0 / 16.0).unwrap(), 0.75);
        assert!((acceptance_lower_bound(1e-9).unwrap() - 1.0).abs() < 1e-8);
        assert!(acceptance_lower_bound(0.25).is_err());
        assert!(acceptance_lower_bound(0.0).is_err());
    }

    #[test]
    fn max_queries_formula() {
        assert_eq!(max_queries_bound(1024, 0.5, 0.5).unwrap(), 12);
        assert_eq!(max_queries_bound(1024, 0.5, 1.0).unwrap(), 1);
        assert!(max_queries_bound(1, 0.5, 0.5).is_err());
        assert!(max_queries_bound(10, 1.0, 0.5).is_err());
        let mut prev = 0;
        for k in 2..2000u64 {
            let m = max_queries_bound(k, 0.1, 0.6).unwrap();
            assert!(m >= prev);
            prev = m;
        }
        let mut prev = 0;
        for i in 1..100 {
            let m = max_queries_bound(500, 1.0 / (1.0 + i as f64), 0.6).unwrap();
            assert!(m >= prev);
            prev = m;
        }
    }

    #[test]
    fn distances_to_uniform() {
        assert_eq!(distance_to_uniform(&[0.25; 4]), (0.0, 0.0));
        let (l1, l2) = distance_to_uniform(&[1.0f64, 0.0]);
        assert!((l1 - 1.0).abs() < 1e-15);
        assert!((l2 - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn always_accepting_policy_uses_one_query() {
        let g = generate_network::<f64>(60, transmission_radius(60).unwrap(), 4).unwrap();
        let p = SamplingPolicy::with_threshold(&g.areas, 1.0, 0.1, 0.1).unwrap();
        assert!(p.accept_prob.iter().all(|&r| r == 1.0));
        let mut r = rng::stream(1, 1);
        for _ in 0..500 {
            if let Ok(s) = sample_with_rejection(&p, &g, 0, &mut r) {
                assert_eq!(s.queries, 1);
            }
        }
    }

    #[test]
    fn symmetric_pair_is_fair() {
        let g = Network::from_positions(vec![Point::new(0.25, 0.5), Point::new(0.75, 0.5)], 1.0)
            .unwrap();
        let p = SamplingPolicy::with_defaults(&g.areas).unwrap();
        let mut r = rng::stream(99, 0);
        let draws = 10_000;
        let hits = (0..draws)
            .filter(|_| sample_with_rejection(&p, &g, 0, &mut r).unwrap().accepted == 0)
            .count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn report_shape() {
        let g = generate_network::<f64>(100, transmission_radius(100).unwrap(), 2).unwrap();
        let rep = SamplingPolicy::with_defaults(&g.areas).unwrap().report(10);
        assert_eq!(rep.q_histogram_counts.iter().sum::<usize>(), 100);
        assert_eq!(rep.q_histogram_edges.len(), 11);
        assert!(rep.undersampled <= 10);
    }
}
