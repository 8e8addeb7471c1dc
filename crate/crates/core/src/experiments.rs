//! Initial fields, experiment sweeps and their CSV output.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_with, GossipState, ProtocolKind, RunOptions, TrialRecord};
use crate::error::{Error, Result};
use crate::geometry::{generate_network_with, is_connected, transmission_radius, Network, Point};
use crate::rng;
use crate::sampling::{SamplingPolicy, DEFAULT_MU, DEFAULT_NU};
use crate::scalar::Scalar;

const MAX_RESAMPLES: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub x: f64,
    pub y: f64,
    /// Defaults to `n/3`.
    #[serde(default)]
    pub amplitude: Option<f64>,
}

/// Initial sensor field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    /// The node's coordinate along one axis.
    Linear {
        #[serde(default)]
        axis: Axis,
    },
    /// Point sources deposited at their nearest nodes, then smoothed by
    /// repeated local averaging.
    #[serde(alias = "diffusion-sources")]
    Diffusion {
        #[serde(default)]
        sources: Option<Vec<Source>>,
        #[serde(default = "default_passes")]
        passes: usize,
    },
    /// Zero everywhere except one node.
    Spike {
        /// Defaults to the node nearest the centre of the square.
        #[serde(default)]
        node: Option<usize>,
        /// Defaults to `n`, so the network average is 1.
        #[serde(default)]
        amplitude: Option<f64>,
    },
}

fn default_passes() -> usize {
    10
}

impl FieldSpec {
    pub fn linear() -> Self {
        FieldSpec::Linear { axis: Axis::X }
    }

    pub fn diffusion() -> Self {
        FieldSpec::Diffusion {
            sources: None,
            passes: default_passes(),
        }
    }

    pub fn spike() -> Self {
        FieldSpec::Spike {
            node: None,
            amplitude: None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FieldSpec::Linear { .. } => "linear",
            FieldSpec::Diffusion { .. } => "diffusion",
            FieldSpec::Spike { .. } => "spike",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Self::linear()),
            "diffusion" | "diffusion-sources" => Ok(Self::diffusion()),
            "spike" => Ok(Self::spike()),
            other => Err(Error::param(format!("unknown field kind {other:?}"))),
        }
    }
}

pub const DEFAULT_SOURCES: [(f64, f64); 3] = [(0.2, 0.2), (0.8, 0.3), (0.5, 0.8)];

/// Evaluates a field on the nodes of `net`.
pub fn make_field<S: Scalar>(spec: &FieldSpec, net: &Network<S>) -> Result<Vec<S>> {
    let n = net.n;
    let nf = S::of_usize(n);
    match spec {
        FieldSpec::Linear { axis } => Ok(net
            .positions
            .iter()
            .map(|p| match axis {
                Axis::X => p.x,
                Axis::Y => p.y,
            })
            .collect()),
        FieldSpec::Spike { node, amplitude } => {
            let centre = Point::new(S::lit(0.5), S::lit(0.5));
            let node = node.unwrap_or_else(|| net.nearest_node(&centre));
            if node >= n {
                return Err(Error::param(format!(
                    "spike node {node} out of range for n = {n}"
                )));
            }
            let mut x = vec![S::zero(); n];
            x[node] = amplitude.map(S::lit).unwrap_or(nf);
            Ok(x)
        }
        FieldSpec::Diffusion { sources, passes } => {
            let defaults: Vec<Source> = DEFAULT_SOURCES
                .iter()
                .map(|&(x, y)| Source {
                    x,
                    y,
                    amplitude: None,
                })
                .collect();
            let sources = sources.as_deref().unwrap_or(&defaults);
            let mut x = vec![S::zero(); n];
            for src in sources {
                let at = Point::new(S::lit(src.x), S::lit(src.y));
                if !at.in_unit_square() {
                    return Err(Error::param(format!(
                        "source ({}, {}) outside the square",
                        src.x, src.y
                    )));
                }
                let amp = src.amplitude.map(S::lit).unwrap_or(nf / S::lit(3.0));
                let v = net.nearest_node(&at);
                x[v] = x[v] + amp;
            }
            for _ in 0..*passes {
                x = smooth_pass(net, &x);
            }
            Ok(x)
        }
    }
}

/// One step of Metropolis-weighted diffusion: every edge `uv` moves
/// `(x_u - x_v)/(1 + max(d_u, d_v))` between its endpoints, so the sum is kept.
fn smooth_pass<S: Scalar>(net: &Network<S>, x: &[S]) -> Vec<S> {
    let mut next = x.to_vec();
    for u in 0..net.n {
        for &v in &net.adjacency[u] {
            if v <= u {
                continue;
            }
            let w = S::one() / S::of_usize(1 + net.degree(u).max(net.degree(v)));
            let flow = (x[v] - x[u]) * w;
            next[u] = next[u] + flow;
            next[v] = next[v] - flow;
        }
    }
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default = "default_protocols")]
    pub protocols: Vec<ProtocolKind>,
    #[serde(default = "default_fields")]
    pub fields: Vec<FieldSpec>,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Ratio between successive checkpoint transmission counts.
    #[serde(default = "default_growth")]
    pub checkpoint_growth: f64,
    /// Tick budget per run; defaults to `20·n²`.
    #[serde(default)]
    pub max_ticks: Option<u64>,
}

fn default_protocols() -> Vec<ProtocolKind> {
    ProtocolKind::ALL.to_vec()
}
fn default_fields() -> Vec<FieldSpec> {
    vec![FieldSpec::spike()]
}
fn default_nu() -> f64 {
    DEFAULT_NU
}
fn default_mu() -> f64 {
    DEFAULT_MU
}
fn default_growth() -> f64 {
    1.25
}

impl ExperimentConfig {
    pub fn new(sizes: Vec<usize>, epsilons: Vec<f64>, trials: usize, master_seed: u64) -> Self {
        Self {
            sizes,
            epsilons,
            trials,
            master_seed,
            protocols: default_protocols(),
            fields: default_fields(),
            nu: DEFAULT_NU,
            mu: DEFAULT_MU,
            checkpoint_growth: default_growth(),
            max_ticks: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Configuration(m.to_string()));
        if self.trials < 1 {
            return bad("trials must be >= 1");
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 2) {
            return bad("sizes must be non-empty and each >= 2");
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad("epsilons must be non-empty and lie in (0, 1)");
        }
        if self.protocols.is_empty() || self.fields.is_empty() {
            return bad("at least one protocol and one field are required");
        }
        if !(self.nu > 0.0 && self.nu < 1.0 && self.mu > 0.0) {
            return bad("nu must lie in (0, 1) and mu must be positive");
        }
        if !(self.checkpoint_growth > 1.0) {
            return bad("checkpoint_growth must exceed 1");
        }
        Ok(())
    }

    pub fn max_ticks_for(&self, n: usize) -> u64 {
        self.max_ticks.unwrap_or(20 * (n as u64) * (n as u64))
    }
}

/// Draws networks for `(n, trial)` until one is connected.
/// Returns the network and the number of rejected draws.
///
/// For tiny `n` the connectivity radius exceeds the square's diagonal and is
/// capped at `sqrt(2)`.
pub fn connected_network<S: Scalar>(
    n: usize,
    master_seed: u64,
    trial: u64,
) -> Result<(Network<S>, u32)> {
    let radius = transmission_radius::<S>(n)?.min(S::SQRT_2());
    for attempt in 0..=MAX_RESAMPLES {
        let seed = rng::derive_seed(master_seed, &[n as u64, trial, attempt as u64]);
        let net = generate_network_with(n, radius, &mut rng::stream(seed, 0))?;
        if is_connected(&net) {
            if attempt > 0 {
                log::info!("n={n} trial={trial}: connected after {attempt} resamples");
            }
            return Ok((net, attempt));
        }
    }
    Err(Error::Configuration(format!(
        "no connected network for n={n} after {MAX_RESAMPLES} resamples"
    )))
}

/// Random stream driving the gossip run for one `(n, trial, field, protocol)`
/// cell of a sweep.
pub fn gossip_stream(
    master_seed: u64,
    n: usize,
    trial: usize,
    field_index: usize,
    kind: ProtocolKind,
) -> rng::StreamRng {
    let seed = rng::derive_seed(
        master_seed,
        &[n as u64, trial as u64, field_index as u64, kind as u64],
    );
    rng::stream(seed, 1)
}

/// One gossip run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub n: usize,
    pub field: String,
    pub protocol: ProtocolKind,
    pub trial: usize,
    /// Disconnected networks discarded before this trial's network.
    pub resamples: u32,
    pub record: TrialRecord,
}

/// Runs every `(n, field, protocol, trial)` combination of `cfg`.
///
/// Each `(n, trial)` pair gets one connected network shared by all fields and
/// protocols. Trials run in parallel; rows come back sorted by
/// `(n, field, protocol, trial)` regardless of scheduling.
pub fn run_experiment<S: Scalar>(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&n| (0..cfg.trials).map(move |t| (n, t)))
        .collect();
    let batches: Vec<Result<Vec<TrialResult>>> = jobs
        .par_iter()
        .map(|&(n, trial)| run_network_trial::<S>(cfg, n, trial))
        .collect();
    let mut rows = Vec::new();
    for b in batches {
        rows.extend(b?);
    }
    rows.sort_by(|a, b| {
        (a.n, a.field.as_str(), a.protocol.name(), a.trial).cmp(&(
            b.n,
            b.field.as_str(),
            b.protocol.name(),
            b.trial,
        ))
    });
    Ok(rows)
}

fn run_network_trial<S: Scalar>(
    cfg: &ExperimentConfig,
    n: usize,
    trial: usize,
) -> Result<Vec<TrialResult>> {
    let (net, resamples) = connected_network::<S>(n, cfg.master_seed, trial as u64)?;
    let policy = SamplingPolicy::new(&net.areas, S::lit(cfg.nu), S::lit(cfg.mu))?;
    let opts = RunOptions {
        epsilons: cfg.epsilons.clone(),
        max_ticks: cfg.max_ticks_for(n),
        checkpoint_growth: cfg.checkpoint_growth,
    };
    let mut out = Vec::new();
    for (fi, field) in cfg.fields.iter().enumerate() {
        let x0 = make_field(field, &net)?;
        for &kind in &cfg.protocols {
            let mut gossip_rng = gossip_stream(cfg.master_seed, n, trial, fi, kind);
            let mut state = GossipState::new(x0.clone())?;
            let record = run_with(
                &mut state,
                &net,
                &policy,
                kind,
                &opts,
                &mut gossip_rng,
                None,
            )?;
            if !record.converged {
                log::warn!(
                    "n={n} field={} protocol={kind} trial={trial}: tick budget exhausted",
                    field.name()
                );
            }
            out.push(TrialResult {
                n,
                field: field.name().to_string(),
                protocol: kind,
                trial,
                resamples,
                record,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    n: usize,
    field: &'a str,
    protocol: &'a str,
    trial: usize,
    tick: u64,
    transmissions: u64,
    error: f64,
    rounds_failed: u64,
    max_q: u32,
}

/// Writes one CSV row per checkpoint:
/// `n,field,protocol,trial,tick,transmissions,error,rounds_failed,max_q`.
pub fn write_results_csv<W: Write>(results: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        for c in &r.record.checkpoints {
            w.serialize(CsvRow {
                n: r.n,
                field: &r.field,
                protocol: r.protocol.name(),
                trial: r.trial,
                tick: c.tick,
                transmissions: c.transmissions,
                error: c.error,
                rounds_failed: c.rounds_failed,
                max_q: c.max_q,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Median transmissions-to-ε for one `(n, field, protocol)` group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n: usize,
    pub field: String,
    pub protocol: ProtocolKind,
    /// `None` when at least half of the trials never reached ε.
    pub median_transmissions_to_eps: Option<f64>,
    /// Standard median over geographic median for this `(n, field)`.
    pub ratio_std_over_geo: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTrend {
    pub field: String,
    pub n_small: usize,
    pub n_large: usize,
    /// `ratio(n_large) / ratio(n_small)`
    pub growth: f64,
    /// Ratio never decreases from one size to the next.
    pub nondecreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    pub trends: Vec<RatioTrend>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = v.len();
    let mid = if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    };
    mid.is_finite().then_some(mid)
}

/// Medians per `(n, field, protocol)` of the transmissions needed to reach each
/// record's target tolerance, with standard/geographic ratios and their trend.
pub fn summarize(results: &[TrialResult]) -> Summary {
    let mut keys: Vec<(usize, String, ProtocolKind)> = results
        .iter()
        .map(|r| (r.n, r.field.clone(), r.protocol))
        .collect();
    keys.sort_by(|a, b| (a.0, a.1.as_str(), a.2.name()).cmp(&(b.0, b.1.as_str(), b.2.name())));
    keys.dedup();

    let mut rows: Vec<SummaryRow> = keys
        .into_iter()
        .map(|(n, field, protocol)| {
            let costs = results
                .iter()
                .filter(|r| r.n == n && r.field == field && r.protocol == protocol)
                .map(|r| {
                    r.record
                        .transmissions_to_epsilon()
                        .map_or(f64::INFINITY, |t| t as f64)
                })
                .collect();
            SummaryRow {
                n,
                field,
                protocol,
                median_transmissions_to_eps: median(costs),
                ratio_std_over_geo: None,
            }
        })
        .collect();

    let lookup = |rows: &[SummaryRow], n: usize, field: &str, p: ProtocolKind| {
        rows.iter()
            .find(|r| r.n == n && r.field == field && r.protocol == p)
            .and_then(|r| r.median_transmissions_to_eps)
    };
    let ratios: Vec<Option<f64>> = rows
        .iter()
        .map(|r| {
            let std = lookup(&rows, r.n, &r.field, ProtocolKind::StandardUniform)?;
            let geo = lookup(&rows, r.n, &r.field, ProtocolKind::Geographic)?;
            (geo > 0.0).then(|| std / geo)
        })
        .collect();
    for (r, ratio) in rows.iter_mut().zip(ratios) {
        r.ratio_std_over_geo = ratio;
    }

    let mut fields: Vec<String> = rows.iter().map(|r| r.field.clone()).collect();
    fields.sort();
    fields.dedup();
    let trends = fields
        .into_iter()
        .filter_map(|field| {
            let mut per_n: Vec<(usize, f64)> = rows
                .iter()
                .filter(|r| r.field == field && r.protocol == ProtocolKind::Geographic)
                .filter_map(|r| Some((r.n, r.ratio_std_over_geo?)))
                .collect();
            per_n.sort_by_key(|p| p.0);
            if per_n.len() < 2 {
                return None;
            }
            let (first, last) = (per_n[0], per_n[per_n.len() - 1]);
            Some(RatioTrend {
                field,
                n_small: first.0,
                n_large: last.0,
                growth: last.1 / first.1,
                nondecreasing: per_n.windows(2).all(|w| w[1].1 >= w[0].1),
            })
        })
        .collect();
    Summary { rows, trends }
}

/// Writes `n,field,protocol,median_transmissions_to_eps[,ratio_std_over_geo]`.
/// The ratio column is dropped when no row has both protocols.
pub fn write_summary_csv<W: Write>(summary: &Summary, out: W) -> Result<()> {
    let with_ratio = summary.rows.iter().any(|r| r.ratio_std_over_geo.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n", "field", "protocol", "median_transmissions_to_eps"];
    if with_ratio {
        header.push("ratio_std_over_geo");
    }
    w.write_record(&header)?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &summary.rows {
        let mut rec = vec![
            r.n.to_string(),
            r.field.clone(),
            r.protocol.name().to_string(),
            fmt(r.median_transmissions_to_eps),
        ];
        if with_ratio {
            rec.push(fmt(r.ratio_std_over_geo));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
