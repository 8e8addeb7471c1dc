//! Command-line front end for the geographic gossip simulator.
//!
//! All logic lives here so it can be driven from tests; `main.rs` only wires
//! up logging and process exit.

use std::collections::hash_map::RandomState;
use std::ffi::OsString;
use std::fs::{self, File};
use std::hash::{BuildHasher, Hasher};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;

use geogossip::analysis::{build_w, certificate_for, spectral_report, SpectralReport};
use geogossip::engine::{run_with, RoundEvent, RunOptions};
use geogossip::experiments::{
    connected_network, gossip_stream, make_field, run_experiment, summarize, write_results_csv,
    write_summary_csv, TrialResult,
};
use geogossip::geometry::{generate_network, is_connected, transmission_radius};
use geogossip::sampling::{DEFAULT_MU, DEFAULT_NU};
use geogossip::{
    Error, ExperimentConfig, FieldSpec, GossipState, Network, ProtocolKind, SamplingPolicy,
};

#[derive(Debug, Parser)]
#[command(
    name = "geogossip",
    version,
    about = "Geographic vs standard gossip on random geometric graphs"
)]
pub struct Cli {
    /// Worker threads for parallel trials (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a random geometric graph and write it as JSON.
    GenNetwork(GenNetworkArgs),
    /// Run one gossip instance and write its checkpoint CSV.
    Simulate(SimulateArgs),
    /// Spectral report for the expected update matrix of one instance.
    Analyze(AnalyzeArgs),
    /// Check the Weyl bound on lambda2 over many instances.
    Certify(CertifyArgs),
    /// Run a full sweep described by a TOML config.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Master seed; a fresh one is drawn and printed to stderr when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long, default_value_t = DEFAULT_NU)]
    pub nu: f64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    pub mu: f64,
    /// Pick tau below every cell area so that q is exactly uniform.
    #[arg(long, conflicts_with_all = ["nu", "mu"])]
    pub uniform_q: bool,
}

#[derive(Debug, Args)]
pub struct GenNetworkArgs {
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Transmission radius; defaults to sqrt(10 ln n / n), capped at sqrt(2).
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Node count; a connected instance is drawn from the seed.
    #[arg(long, required_unless_present = "network", conflicts_with = "network")]
    pub n: Option<usize>,
    /// Network JSON written by `gen-network`.
    #[arg(long, value_name = "PATH")]
    pub network: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[arg(long, default_value = "geographic")]
    pub protocol: ProtocolKind,
    #[arg(long, default_value = "spike")]
    pub field: String,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Tick budget; defaults to 20 n^2.
    #[arg(long)]
    pub max_ticks: Option<u64>,
    /// Write one JSON line per round to this file.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, required_unless_present = "network", conflicts_with = "network")]
    pub n: Option<usize>,
    #[arg(long, value_name = "PATH")]
    pub network: Option<PathBuf>,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 0.01)]
    pub epsilon: f64,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub n: usize,
    /// Number of connected instances to check.
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = DEFAULT_NU)]
    pub nu: f64,
    #[arg(long, default_value_t = DEFAULT_MU)]
    pub mu: f64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Directory receiving `results.csv` and `summary.csv`.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    /// Overrides `master_seed` from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `trials` from the config.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub max_ticks: Option<u64>,
}

type CliResult<T = ()> = Result<T, Error>;

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
                if !rendered.contains("Usage:") {
                    let _ = writeln!(stderr, "\n{}", usage_for(&args));
                }
            }
            return code;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            1
        }
    }
}

/// Usage line of the subcommand named in `args`, or of the whole program.
fn usage_for(args: &[OsString]) -> String {
    let mut cmd = Cli::command();
    let name = args
        .iter()
        .skip(1)
        .filter_map(|a| a.to_str())
        .find(|a| cmd.find_subcommand(a).is_some())
        .map(str::to_owned);
    match name.and_then(|n| cmd.find_subcommand(&n).cloned()) {
        Some(sub) => {
            let bin = format!("geogossip {}", sub.get_name());
            sub.bin_name(bin).render_usage().to_string()
        }
        None => cmd.render_usage().to_string(),
    }
}

pub fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::Configuration("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Configuration(e.to_string()))?;
    match cli.command {
        Command::GenNetwork(a) => gen_network(a, stdout, stderr),
        Command::Simulate(a) => simulate(a, stdout, stderr),
        Command::Analyze(a) => analyze(a, stdout, stderr),
        Command::Certify(a) => certify(a, &pool, stdout, stderr),
        Command::Experiment(a) => experiment(a, &pool, stderr),
    }
}

fn resolve_seed(seed: &SeedArg, stderr: &mut dyn Write) -> u64 {
    match seed.seed {
        Some(s) => s,
        None => {
            let s = RandomState::new().build_hasher().finish();
            let _ = writeln!(stderr, "seed: {s}");
            s
        }
    }
}

/// Buffers output for `path`, or for stdout when no path is given.
fn with_output(
    path: Option<&Path>,
    stdout: &mut dyn Write,
    body: impl FnOnce(&mut dyn Write) -> CliResult,
) -> CliResult {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| Error::io(p, e))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush().map_err(|e| Error::io(p, e))
        }
        None => {
            body(stdout)?;
            stdout.flush().map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn write_json<T: Serialize>(value: &T, w: &mut dyn Write) -> CliResult {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w).map_err(|e| Error::io("<output>", e))
}

fn load_network(path: &Path) -> CliResult<Network> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Network::from_json(&text).map_err(|e| match e {
        Error::Json(j) => Error::InvalidInput(format!("{}: {j}", path.display())),
        other => other,
    })
}

fn instance(
    n: Option<usize>,
    network: Option<&Path>,
    seed: &SeedArg,
    stderr: &mut dyn Write,
) -> CliResult<(Network, u64)> {
    let seed = resolve_seed(seed, stderr);
    match (n, network) {
        (_, Some(path)) => Ok((load_network(path)?, seed)),
        (Some(n), None) => Ok((connected_network::<f64>(n, seed, 0)?.0, seed)),
        (None, None) => Err(Error::Configuration(
            "one of --n or --network is required".into(),
        )),
    }
}

fn policy_for(net: &Network, args: &PolicyArgs) -> CliResult<SamplingPolicy> {
    if args.uniform_q {
        SamplingPolicy::uniform(&net.areas)
    } else {
        SamplingPolicy::new(&net.areas, args.nu, args.mu)
    }
}

fn gen_network(a: GenNetworkArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let seed = resolve_seed(&a.seed, stderr);
    let radius = match a.radius {
        Some(r) => r,
        None => transmission_radius::<f64>(a.n)?.min(std::f64::consts::SQRT_2),
    };
    let net = generate_network::<f64>(a.n, radius, seed)?;
    if !is_connected(&net) {
        let _ = writeln!(stderr, "warning: generated network is disconnected");
    }
    with_output(a.out.as_deref(), stdout, |w| {
        w.write_all(net.to_json()?.as_bytes())
            .and_then(|_| writeln!(w))
            .map_err(|e| Error::io("<output>", e))
    })
}

fn simulate(a: SimulateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let (net, seed) = instance(a.n, a.network.as_deref(), &a.seed, stderr)?;
    let field = FieldSpec::from_name(&a.field)?;
    let policy = policy_for(&net, &a.policy)?;
    let x0 = make_field(&field, &net)?;
    let n = net.n;
    let opts = RunOptions::new(
        a.epsilon,
        a.max_ticks.unwrap_or(20 * (n as u64) * (n as u64)),
    );
    let mut rng = gossip_stream(seed, n, 0, 0, a.protocol);
    let mut state = GossipState::new(x0)?;

    let record = match &a.trace {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            let mut failure: Option<io::Error> = None;
            let mut observer = |ev: &RoundEvent<f64>, _: &GossipState| {
                if failure.is_some() {
                    return;
                }
                let line = serde_json::to_string(ev).expect("round events serialize");
                if let Err(e) = writeln!(w, "{line}") {
                    failure = Some(e);
                }
            };
            let record = run_with(
                &mut state,
                &net,
                &policy,
                a.protocol,
                &opts,
                &mut rng,
                Some(&mut observer),
            )?;
            if let Some(e) = failure {
                return Err(Error::io(path, e));
            }
            w.flush().map_err(|e| Error::io(path, e))?;
            record
        }
        None => run_with(&mut state, &net, &policy, a.protocol, &opts, &mut rng, None)?,
    };

    let _ = writeln!(
        stderr,
        "{} n={n} converged={} ticks={} transmissions={} rounds_failed={}",
        a.protocol, record.converged, record.ticks, record.transmissions, record.rounds_failed
    );
    let result = TrialResult {
        n,
        field: field.name().to_string(),
        protocol: a.protocol,
        trial: 0,
        resamples: 0,
        record,
    };
    with_output(a.out.as_deref(), stdout, |w| {
        write_results_csv(std::slice::from_ref(&result), w)
    })
}

#[derive(Debug, Serialize)]
struct AnalyzeReport {
    seed: u64,
    uniform_q: bool,
    tau: f64,
    p_accept: f64,
    #[serde(flatten)]
    spectral: SpectralReport,
}

fn analyze(a: AnalyzeArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult {
    let (net, seed) = instance(a.n, a.network.as_deref(), &a.seed, stderr)?;
    let policy = policy_for(&net, &a.policy)?;
    let report = AnalyzeReport {
        seed,
        uniform_q: a.policy.uniform_q,
        tau: policy.tau,
        p_accept: policy.p_accept,
        spectral: spectral_report(&policy.q, a.epsilon)?,
    };
    with_output(a.out.as_deref(), stdout, |w| write_json(&report, w))
}

#[derive(Debug, Serialize)]
struct CertifyRow {
    trial: usize,
    resamples: u32,
    eps2: f64,
    bound: f64,
    lambda2: f64,
    holds: bool,
}

fn certify(
    a: CertifyArgs,
    pool: &ThreadPool,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> CliResult {
    if a.trials == 0 {
        return Err(Error::Configuration("--trials must be at least 1".into()));
    }
    let seed = resolve_seed(&a.seed, stderr);
    let rows: Vec<CertifyRow> = pool.install(|| {
        (0..a.trials)
            .into_par_iter()
            .map(|trial| {
                let (net, resamples) = connected_network::<f64>(a.n, seed, trial as u64)?;
                let policy = SamplingPolicy::new(&net.areas, a.nu, a.mu)?;
                let cert = certificate_for(&build_w(&policy.q)?);
                Ok(CertifyRow {
                    trial,
                    resamples,
                    eps2: cert.eps2,
                    bound: cert.bound,
                    lambda2: cert.lambda2,
                    holds: cert.holds,
                })
            })
            .collect::<CliResult<_>>()
    })?;
    let held = rows.iter().filter(|r| r.holds).count();
    let _ = writeln!(
        stderr,
        "certificate holds on {held}/{} instances",
        rows.len()
    );
    with_output(a.out.as_deref(), stdout, |w| {
        let mut csv = csv::Writer::from_writer(w);
        for r in &rows {
            csv.serialize(r)?;
        }
        csv.flush().map_err(|e| Error::io("<output>", e))
    })
}

fn experiment(a: ExperimentArgs, pool: &ThreadPool, stderr: &mut dyn Write) -> CliResult {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let mut cfg = ExperimentConfig::from_toml(&text).map_err(|e| match e {
        Error::Configuration(m) => Error::Configuration(format!("{}: {m}", a.config.display())),
        other => other,
    })?;
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if a.max_ticks.is_some() {
        cfg.max_ticks = a.max_ticks;
    }
    cfg.validate()?;

    let results = pool.install(|| run_experiment::<f64>(&cfg))?;
    let summary = summarize(&results);
    fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let results_path = a.out.join("results.csv");
    let summary_path = a.out.join("summary.csv");
    write_file(&results_path, |w| write_results_csv(&results, w))?;
    write_file(&summary_path, |w| write_summary_csv(&summary, w))?;
    for t in &summary.trends {
        let _ = writeln!(
            stderr,
            "field={} ratio growth n={}..{}: {:.3}",
            t.field, t.n_small, t.n_large, t.growth
        );
    }
    let _ = writeln!(
        stderr,
        "wrote {} and {}",
        results_path.display(),
        summary_path.display()
    );
    Ok(())
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> CliResult) -> CliResult {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}
