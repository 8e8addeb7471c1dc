//! Asynchronous gossip: one uniformly random node activates per global clock tick.
//!
//! Only tick counts matter for the averaging time and the transmission cost, so
//! the Poisson inter-arrival times themselves are not simulated. Rounds are
//! strictly sequential: at most one packet is in flight at a time.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Network, Point};
use crate::routing::{greedy_route, RoutePath};
use crate::sampling::{sample_with_rejection, SamplingPolicy};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    /// Partner is the node nearest a uniform random point, reached by greedy
    /// routing and filtered by rejection sampling.
    Geographic,
    /// Partner is a uniformly chosen one-hop neighbor.
    #[serde(alias = "standard")]
    StandardUniform,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 2] = [ProtocolKind::Geographic, ProtocolKind::StandardUniform];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Geographic => "geographic",
            ProtocolKind::StandardUniform => "standard",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geographic" | "geo" => Ok(ProtocolKind::Geographic),
            "standard" | "standard-uniform" | "std" => Ok(ProtocolKind::StandardUniform),
            other => Err(Error::param(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Estimates plus cost counters of one gossip run.
#[derive(Debug, Clone)]
pub struct GossipState<S> {
    pub estimates: Vec<S>,
    pub tick: u64,
    /// Cumulative one-hop radio transmissions.
    pub transmissions: u64,
    pub rounds_failed: u64,
    /// Query count `Q` of every round, in tick order.
    pub q_history: Vec<u32>,
    pub forward_hops: u64,
    pub return_hops: u64,
    initial_norm: S,
    mean: S,
    /// `‖x - x̄·1‖²`, maintained incrementally and resynchronised periodically.
    deviation_sq: S,
    since_resync: usize,
}

impl<S: Scalar> GossipState<S> {
    pub fn new(initial: Vec<S>) -> Result<Self> {
        if initial.is_empty() {
            return Err(Error::input("empty estimate vector"));
        }
        let initial_norm = initial.iter().map(|&v| v * v).sum::<S>().sqrt();
        if !(initial_norm > S::zero()) || !initial_norm.is_finite() {
            return Err(Error::input(
                "initial field must have a positive finite norm",
            ));
        }
        let mean = initial.iter().copied().sum::<S>() / S::of_usize(initial.len());
        let mut state = Self {
            estimates: initial,
            tick: 0,
            transmissions: 0,
            rounds_failed: 0,
            q_history: Vec::new(),
            forward_hops: 0,
            return_hops: 0,
            initial_norm,
            mean,
            deviation_sq: S::zero(),
            since_resync: 0,
        };
        state.resync();
        Ok(state)
    }

    /// Network-wide average of the initial values.
    pub fn target_mean(&self) -> S {
        self.mean
    }

    pub fn initial_norm(&self) -> S {
        self.initial_norm
    }

    /// `‖x(k) - x̄·1‖₂ / ‖x(0)‖₂`, recomputed from the estimates.
    pub fn error(&self) -> S {
        self.exact_deviation_sq().sqrt() / self.initial_norm
    }

    /// Cheap running value of [`Self::error`].
    pub fn tracked_error(&self) -> S {
        self.deviation_sq.max(S::zero()).sqrt() / self.initial_norm
    }

    pub fn sum(&self) -> S {
        self.estimates.iter().copied().sum()
    }

    pub fn max_q(&self) -> u32 {
        self.q_history.iter().copied().max().unwrap_or(0)
    }

    fn exact_deviation_sq(&self) -> S {
        self.estimates
            .iter()
            .map(|&v| (v - self.mean) * (v - self.mean))
            .sum()
    }

    fn resync(&mut self) {
        self.deviation_sq = self.exact_deviation_sq();
        self.since_resync = 0;
    }

    fn average_pair(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (xa, xb) = (self.estimates[a], self.estimates[b]);
        let avg = (xa + xb) / S::lit(2.0);
        self.estimates[a] = avg;
        self.estimates[b] = avg;
        let diff = xa - xb;
        self.deviation_sq = self.deviation_sq - diff * diff / S::lit(2.0);
        debug_assert!(
            self.deviation_sq >= -S::lit(1e-9) * self.initial_norm * self.initial_norm,
            "pairwise averaging increased the deviation"
        );
    }

    fn after_tick(&mut self) {
        self.tick += 1;
        self.since_resync += 1;
        if self.since_resync >= self.estimates.len().max(64) {
            self.resync();
        }
    }
}

/// Everything that happened during one tick; the trace-mode record.
#[derive(Debug, Clone, Serialize)]
pub struct RoundEvent<S> {
    /// Tick index of this round (0-based).
    pub tick: u64,
    /// Activated node.
    pub s: usize,
    /// Uniform targets drawn, one per query.
    pub targets: Vec<Point<S>>,
    /// Forward route legs as node id sequences.
    pub path: Vec<Vec<usize>>,
    pub return_path: Option<Vec<usize>>,
    #[serde(rename = "Q")]
    pub queries: u32,
    /// Averaging partner, `None` when the round failed or was a no-op.
    pub accepted: Option<usize>,
    pub failed: bool,
    /// Transmissions charged for this round.
    pub cost: u64,
}

fn leg_ids(legs: Vec<RoutePath>) -> Vec<Vec<usize>> {
    legs.into_iter().map(|l| l.hops).collect()
}

/// Runs one gossip round for a uniformly chosen node.
///
/// A geographic round charges every forward hop plus the greedy return route
/// to the initiator. A dead-ended leg abandons the round: hops stay charged,
/// values are untouched and `rounds_failed` is incremented.
pub fn activate_tick<S: Scalar, R: Rng + ?Sized>(
    state: &mut GossipState<S>,
    net: &Network<S>,
    policy: &SamplingPolicy<S>,
    kind: ProtocolKind,
    rng: &mut R,
) -> RoundEvent<S> {
    let n = net.n;
    let s = rng.gen_range(0..n);
    let tick = state.tick;
    let event = match kind {
        ProtocolKind::StandardUniform => {
            let deg = net.degree(s);
            if deg == 0 {
                log::debug!("tick {tick}: node {s} is isolated, standard round skipped");
                RoundEvent {
                    tick,
                    s,
                    targets: Vec::new(),
                    path: vec![vec![s]],
                    return_path: None,
                    queries: 0,
                    accepted: None,
                    failed: false,
                    cost: 0,
                }
            } else {
                let j = net.adjacency[s][rng.gen_range(0..deg)];
                state.average_pair(s, j);
                state.transmissions += 1;
                state.forward_hops += 1;
                state.q_history.push(1);
                RoundEvent {
                    tick,
                    s,
                    targets: Vec::new(),
                    path: vec![vec![s, j]],
                    return_path: None,
                    queries: 1,
                    accepted: Some(j),
                    failed: false,
                    cost: 1,
                }
            }
        }
        ProtocolKind::Geographic => match sample_with_rejection(policy, net, s, rng) {
            Ok(sample) => {
                let v = sample.accepted;
                let back = greedy_route(net, v, &net.positions[s]);
                let back_hops = back.hop_count as u64;
                let cost = sample.hops + back_hops;
                state.transmissions += cost;
                state.forward_hops += sample.hops;
                state.return_hops += back_hops;
                state.q_history.push(sample.queries);
                let failed = back.terminal != s;
                if failed {
                    log::debug!(
                        "tick {tick}: return route {v} -> {s} dead-ended at {}",
                        back.terminal
                    );
                    state.rounds_failed += 1;
                } else {
                    state.average_pair(s, v);
                }
                RoundEvent {
                    tick,
                    s,
                    targets: sample.targets,
                    path: leg_ids(sample.legs),
                    return_path: Some(back.hops),
                    queries: sample.queries,
                    accepted: (!failed).then_some(v),
                    failed,
                    cost,
                }
            }
            Err(fail) => {
                log::debug!("tick {tick}: forward route from {s} dead-ended");
                state.transmissions += fail.hops;
                state.forward_hops += fail.hops;
                state.rounds_failed += 1;
                state.q_history.push(fail.queries);
                RoundEvent {
                    tick,
                    s,
                    targets: fail.targets,
                    path: leg_ids(fail.legs),
                    return_path: None,
                    queries: fail.queries,
                    accepted: None,
                    failed: true,
                    cost: fail.hops,
                }
            }
        },
    };
    state.after_tick();
    event
}

/// Snapshot written at each checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub tick: u64,
    pub transmissions: u64,
    pub error: f64,
    pub rounds_failed: u64,
    pub max_q: u32,
}

/// First tick at which the error dropped to `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub epsilon: f64,
    pub tick: Option<u64>,
    pub transmissions: Option<u64>,
}

/// Time series and summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub protocol: ProtocolKind,
    /// Smallest tolerance of the run; the run stops once it is reached.
    pub epsilon: f64,
    pub converged: bool,
    pub crossings: Vec<Crossing>,
    pub checkpoints: Vec<Checkpoint>,
    pub ticks: u64,
    pub transmissions: u64,
    pub rounds_failed: u64,
    pub max_q: u32,
    pub total_queries: u64,
    pub forward_hops: u64,
    pub return_hops: u64,
}

impl TrialRecord {
    pub fn crossing(&self, epsilon: f64) -> Option<&Crossing> {
        self.crossings
            .iter()
            .find(|c| (c.epsilon - epsilon).abs() <= 1e-12 * epsilon.abs().max(1.0))
    }

    /// Tick at which the error first reached the run tolerance.
    pub fn first_crossing_tick(&self) -> Option<u64> {
        self.crossing(self.epsilon).and_then(|c| c.tick)
    }

    pub fn transmissions_to_epsilon(&self) -> Option<u64> {
        self.crossing(self.epsilon).and_then(|c| c.transmissions)
    }

    pub fn mean_queries(&self) -> f64 {
        if self.ticks == 0 {
            0.0
        } else {
            self.total_queries as f64 / self.ticks as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Tolerances whose first crossings are recorded; the run stops at the smallest.
    pub epsilons: Vec<f64>,
    pub max_ticks: u64,
    /// Ratio between successive checkpoint transmission counts.
    pub checkpoint_growth: f64,
}

impl RunOptions {
    pub fn new(epsilon: f64, max_ticks: u64) -> Self {
        Self {
            epsilons: vec![epsilon],
            max_ticks,
            checkpoint_growth: 1.25,
        }
    }
}

/// Gossips until the normalized error reaches `epsilon` or `max_ticks` pass.
pub fn run_until<S: Scalar, R: Rng + ?Sized>(
    state: &mut GossipState<S>,
    net: &Network<S>,
    policy: &SamplingPolicy<S>,
    kind: ProtocolKind,
    epsilon: f64,
    max_ticks: u64,
    rng: &mut R,
) -> Result<TrialRecord> {
    run_with(
        state,
        net,
        policy,
        kind,
        &RunOptions::new(epsilon, max_ticks),
        rng,
        None,
    )
}

/// [`run_until`] with several tolerances, custom checkpoints and an optional
/// per-round observer (trace mode).
pub fn run_with<S: Scalar, R: Rng + ?Sized>(
    state: &mut GossipState<S>,
    net: &Network<S>,
    policy: &SamplingPolicy<S>,
    kind: ProtocolKind,
    opts: &RunOptions,
    rng: &mut R,
    mut observer: Option<&mut dyn FnMut(&RoundEvent<S>, &GossipState<S>)>,
) -> Result<TrialRecord> {
    if opts.epsilons.is_empty() || opts.epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::param("tolerances must be positive"));
    }
    if state.estimates.len() != net.n {
        return Err(Error::input("estimate vector and network sizes differ"));
    }
    if !(opts.checkpoint_growth > 1.0) {
        return Err(Error::param("checkpoint growth must exceed 1"));
    }
    let mut eps = opts.epsilons.clone();
    eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eps.dedup();
    let target = *eps.last().unwrap();
    let mut crossings: Vec<Crossing> = eps
        .iter()
        .map(|&epsilon| Crossing {
            epsilon,
            tick: None,
            transmissions: None,
        })
        .collect();
    // Index of the largest tolerance not yet crossed.
    let mut pending = 0;

    let mut checkpoints = Vec::new();
    let record = |state: &GossipState<S>, error: f64, cps: &mut Vec<Checkpoint>| {
        if cps
            .last()
            .map_or(true, |c: &Checkpoint| c.tick < state.tick)
        {
            cps.push(Checkpoint {
                tick: state.tick,
                transmissions: state.transmissions,
                error,
                rounds_failed: state.rounds_failed,
                max_q: state.max_q(),
            });
        }
    };

    let mut error = state.error().to_f64_lossy();
    record(state, error, &mut checkpoints);
    let mut next_mark = 1.0f64;
    let start_tick = state.tick;
    let mut total_queries = 0u64;

    loop {
        // Crossings are checked against the exact error; the tracked value only
        // decides when the exact recomputation is worth doing.
        while pending < crossings.len() && error <= crossings[pending].epsilon {
            crossings[pending].tick = Some(state.tick);
            crossings[pending].transmissions = Some(state.transmissions);
            pending += 1;
        }
        if pending == crossings.len() {
            record(state, error, &mut checkpoints);
            break;
        }
        if state.tick - start_tick >= opts.max_ticks {
            record(state, error, &mut checkpoints);
            break;
        }

        let event = activate_tick(state, net, policy, kind, rng);
        total_queries += event.queries as u64;
        if let Some(obs) = observer.as_deref_mut() {
            obs(&event, state);
        }

        let tracked = state.tracked_error().to_f64_lossy();
        let next_eps = crossings[pending].epsilon;
        let checkpoint_due = state.transmissions as f64 >= next_mark;
        if tracked <= next_eps * (1.0 + 1e-6) || checkpoint_due {
            error = state.error().to_f64_lossy();
        } else {
            error = tracked;
        }
        if checkpoint_due {
            record(state, error, &mut checkpoints);
            next_mark = (next_mark * opts.checkpoint_growth).max(state.transmissions as f64 + 1.0);
        }
    }

    Ok(TrialRecord {
        protocol: kind,
        epsilon: target,
        converged: pending == crossings.len(),
        crossings,
        checkpoints,
        ticks: state.tick - start_tick,
        transmissions: state.transmissions,
        rounds_failed: state.rounds_failed,
        max_q: state.max_q(),
        total_queries,
        forward_hops: state.forward_hops,
        return_hops: state.return_hops,
    })
}

/// Upper `(1-ε)`-quantile of first-crossing ticks across i.i.d. trials: the
/// `⌊(1-ε)m⌋`-th order statistic (0-based, clamped) of the `m` crossing ticks.
pub fn averaging_time_estimate(records: &[TrialRecord], epsilon: f64) -> Result<u64> {
    const MIN_RECORDS: usize = 20;
    if records.len() < MIN_RECORDS {
        return Err(Error::input(format!(
            "need at least {MIN_RECORDS} trial records, got {}",
            records.len()
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::param(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let mut ticks = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let c = r
            .crossing(epsilon)
            .ok_or_else(|| Error::input(format!("record {i} does not track epsilon {epsilon}")))?;
        ticks.push(c.tick.unwrap_or(u64::MAX));
    }
    ticks.sort_unstable();
    let m = ticks.len();
    let idx = (((1.0 - epsilon) * m as f64).floor() as usize).min(m - 1);
    match ticks[idx] {
        u64::MAX => Err(Error::NumericalFailure(format!(
            "fewer than a {:.3} fraction of trials reached epsilon {epsilon}",
            1.0 - epsilon
        ))),
        t => Ok(t),
    }
}
