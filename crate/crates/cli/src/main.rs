//! `ppcheck`: WSSS membership and correctness checking for population protocols.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use tracing_subscriber::EnvFilter;

use ppcheck::consensus::{check_strong_consensus, RefinementOptions};
use ppcheck::correctness::check_correctness;
use ppcheck::eval_predicate;
use ppcheck::families::{sizes, Family};
use ppcheck::format::{
    consensus_document, correctness_document, layered_document, parse_predicate, parse_protocol,
    parse_verdict, replay_verdict, serialize_protocol, serialize_verdict, ConsensusDocument,
    CorrectnessDocument, LayeredDocument, ProtocolDocument, StatsDocument, VerdictDocument,
    VerdictKind, PROTOCOL_EXTENSION, VERDICT_EXTENSION,
};
use ppcheck::layered::find_layered_termination;
use ppcheck::oracle::{oracle_well_specified, Stabilization, DEFAULT_CAP};
use ppcheck::predicate::Predicate;
use ppcheck::protocol::Protocol;
use ppcheck::smtlink::{SolverConfig, SOLVER_ENV};

/// Exit status for malformed input, unreadable files or a missing solver.
const EXIT_INPUT: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "ppcheck",
    version,
    about = "Check population protocols for WSSS membership and correctness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log verbosity (repeat for more detail); RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide WSSS membership: LayeredTermination and StrongConsensus.
    Check(CheckArgs),
    /// Search for a layered termination certificate.
    Layered(LayeredArgs),
    /// Decide StrongConsensus.
    Consensus(VerifyArgs),
    /// Check that a WSSS protocol computes its predicate.
    Correct(CorrectArgs),
    /// Write a benchmark family instance as a protocol document.
    Gen(GenArgs),
    /// Classify every small input by explicit-state exploration.
    Oracle(OracleArgs),
    /// Generate and check family instances for a range of parameters.
    Bench(BenchArgs),
    /// Re-check the certificates of a verdict file.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    /// SMT solver executable speaking SMT-LIB2 on stdin/stdout.
    #[arg(long, env = SOLVER_ENV, default_value = "z3")]
    solver: PathBuf,
    /// Extra solver argument (repeatable); replaces the defaults.
    #[arg(long = "solver-arg", allow_hyphen_values = true)]
    solver_args: Vec<String>,
    /// Time limit per solver query, in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Write every solver script to this directory.
    #[arg(long)]
    dump_smt: Option<PathBuf>,
    /// Start a fresh solver for every query instead of using push/pop.
    #[arg(long)]
    non_incremental: bool,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            program: self.solver.clone(),
            args: self.solver_args.clone(),
            timeout: self.timeout.map(Duration::from_secs_f64),
            incremental: !self.non_incremental,
            dump_dir: self.dump_smt.clone(),
        };
        cfg.resolve()
            .with_context(|| format!("cannot use solver {:?}", self.solver))?;
        Ok(cfg)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum OutputFormat {
    Human,
    Json,
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Human-readable summary or one JSON record per line.
    #[arg(long, value_enum, default_value = "human")]
    format: OutputFormat,
    /// Verdict file (default: next to the input, with extension .verdict.json).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Protocol document (.pp.json).
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Give up the refinement loop after this many rounds.
    #[arg(long)]
    max_refinements: Option<usize>,
}

#[derive(Args, Debug)]
struct LayeredArgs {
    #[command(flatten)]
    common: VerifyArgs,
    /// Largest number of layers to try (default: number of non-silent transitions).
    #[arg(long)]
    k_max: Option<usize>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    common: VerifyArgs,
    #[arg(long)]
    k_max: Option<usize>,
    /// Skip StrongConsensus when LayeredTermination does not hold.
    #[arg(long)]
    fail_fast: bool,
}

#[derive(Args, Debug)]
struct CorrectArgs {
    #[command(flatten)]
    common: VerifyArgs,
    #[arg(long)]
    k_max: Option<usize>,
    /// Predicate document; defaults to the predicate embedded in the protocol.
    #[arg(long)]
    predicate: Option<PathBuf>,
    /// Skip the WSSS checks and assume membership.
    #[arg(long)]
    assume_wsss: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// majority, broadcast, threshold, remainder, flock-cms or flock-guidelines.
    family: String,
    /// Primary parameter: v_max, m or c.
    param: Option<i64>,
    /// Output file (default: stdout).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    input: PathBuf,
    /// Largest input size to classify.
    #[arg(long, default_value_t = 6)]
    max_agents: usize,
    /// Maximum number of configurations per input.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    /// Compare with this predicate instead of the embedded one.
    #[arg(long)]
    predicate: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "human")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct BenchArgs {
    family: String,
    /// Parameter values: integers or inclusive ranges `a..b`, comma separated.
    params: Vec<String>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    max_refinements: Option<usize>,
    /// Instances checked concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also run the correctness check against the family predicate.
    #[arg(long)]
    correct: bool,
    #[arg(long, value_enum, default_value = "human")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Verdict file (.verdict.json).
    input: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = ["warn", "info", "debug", "trace"][usize::from(cli.verbose).min(3)];
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Check(a) => cmd_verify(
            "check",
            &a.common,
            a.k_max,
            Phases {
                layered: true,
                consensus: true,
                fail_fast: a.fail_fast,
                correct: None,
            },
        ),
        Command::Layered(a) => cmd_verify(
            "layered",
            &a.common,
            a.k_max,
            Phases {
                layered: true,
                ..Phases::default()
            },
        ),
        Command::Consensus(a) => cmd_verify(
            "consensus",
            &a,
            None,
            Phases {
                consensus: true,
                ..Phases::default()
            },
        ),
        Command::Correct(a) => {
            let pd = match &a.predicate {
                Some(path) => Some(
                    parse_predicate(&read(path)?).with_context(|| format!("{}", path.display()))?,
                ),
                None => None,
            };
            let wsss = !a.assume_wsss;
            cmd_verify(
                "correct",
                &a.common,
                a.k_max,
                Phases {
                    layered: wsss,
                    consensus: wsss,
                    fail_fast: true,
                    correct: Some(pd),
                },
            )
        }
        Command::Gen(a) => cmd_gen(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path) -> Result<(ProtocolDocument, Protocol)> {
    let doc = parse_protocol(&read(path)?).with_context(|| format!("{}", path.display()))?;
    let p = doc
        .to_protocol()
        .with_context(|| format!("{}", path.display()))?;
    Ok((doc, p))
}

fn verdict_path(input: &Path, out: &Option<PathBuf>) -> PathBuf {
    if let Some(o) = out {
        return o.clone();
    }
    let name = input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let stem = name
        .strip_suffix(PROTOCOL_EXTENSION)
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(&name);
    input.with_file_name(format!("{stem}{VERDICT_EXTENSION}"))
}

#[derive(Debug, Default)]
struct Phases {
    layered: bool,
    consensus: bool,
    fail_fast: bool,
    /// Run the correctness check, with an explicit predicate or the embedded one.
    correct: Option<Option<Predicate>>,
}

struct PipelineSettings {
    solver: SolverConfig,
    k_max: Option<usize>,
    refine: RefinementOptions,
}

fn unknown_stats() -> StatsDocument {
    StatsDocument::default()
}

/// Run the requested phases and collect them into one verdict document.
fn pipeline(
    command: &str,
    doc: &ProtocolDocument,
    p: &Protocol,
    phases: &Phases,
    set: &PipelineSettings,
) -> Result<VerdictDocument> {
    let start = Instant::now();
    let mut v = VerdictDocument::new(command, doc.clone());
    if phases.layered {
        v.layered = Some(match find_layered_termination(p, set.k_max, &set.solver) {
            Ok(r) => layered_document(p, &r),
            Err(e) => LayeredDocument {
                kind: VerdictKind::Unknown,
                k: 0,
                partition: None,
                ranking: None,
                reason: Some(e.to_string()),
                stats: unknown_stats(),
            },
        });
    }
    let stop = |v: &VerdictDocument| {
        phases.fail_fast
            && v.layered
                .as_ref()
                .is_some_and(|l| l.kind != VerdictKind::Holds)
    };
    if phases.consensus && !stop(&v) {
        v.consensus = Some(match check_strong_consensus(p, &set.solver, &set.refine) {
            Ok(r) => consensus_document(p, &r),
            Err(e) => ConsensusDocument {
                kind: VerdictKind::Unknown,
                iterations: 0,
                traps: vec![],
                siphons: vec![],
                counterexample: None,
                reason: Some(e.to_string()),
                stats: unknown_stats(),
            },
        });
    }
    let wsss_ok = v
        .layered
        .as_ref()
        .is_none_or(|l| l.kind == VerdictKind::Holds)
        && v.consensus
            .as_ref()
            .is_none_or(|c| c.kind == VerdictKind::Holds);
    if let Some(explicit) = &phases.correct {
        let pd = explicit
            .clone()
            .or_else(|| doc.predicate.clone())
            .ok_or_else(|| {
                anyhow!("no predicate: embed one in the protocol or pass --predicate")
            })?;
        pd.validate(p.alphabet())?;
        if wsss_ok || !phases.fail_fast {
            v.correctness = Some(match check_correctness(p, &pd, &set.solver, &set.refine) {
                Ok(r) => correctness_document(p, &pd, &r),
                Err(e) => CorrectnessDocument {
                    kind: VerdictKind::Unknown,
                    predicate: pd.clone(),
                    iterations: 0,
                    traps: vec![],
                    siphons: vec![],
                    counterexample: None,
                    reason: Some(e.to_string()),
                    stats: unknown_stats(),
                },
            });
        }
    }
    v.finish(start.elapsed());
    Ok(v)
}

fn cmd_verify(command: &str, a: &VerifyArgs, k_max: Option<usize>, phases: Phases) -> Result<u8> {
    let (doc, p) = load(&a.input)?;
    let set = PipelineSettings {
        solver: a.solver.config()?,
        k_max,
        refine: RefinementOptions {
            max_refinements: a.max_refinements,
        },
    };
    let v = pipeline(command, &doc, &p, &phases, &set)?;
    let path = verdict_path(&a.input, &a.output.out);
    std::fs::write(&path, serialize_verdict(&v))
        .with_context(|| format!("cannot write {}", path.display()))?;
    match a.output.format {
        OutputFormat::Json => println!("{}", serde_json::to_string(&v)?),
        OutputFormat::Human => print!("{}", human_summary(&p, &v, &path)),
    }
    Ok(v.kind.exit_code() as u8)
}

fn human_summary(p: &Protocol, v: &VerdictDocument, path: &Path) -> String {
    let mut s = String::new();
    let (q, t) = sizes(p);
    let _ = writeln!(s, "protocol: {q} states, {t} non-silent transitions");
    if let Some(l) = &v.layered {
        let _ = write!(s, "LayeredTermination: {}", l.kind);
        if let Some(layers) = &l.partition {
            let _ = write!(s, " ({} layers)", layers.len());
        }
        if let Some(r) = &l.reason {
            let _ = write!(s, " — {r}");
        }
        let _ = writeln!(s, " [{:.2}s]", l.stats.wall_seconds);
    }
    if let Some(c) = &v.consensus {
        let _ = write!(
            s,
            "StrongConsensus: {} after {} refinement rounds",
            c.kind, c.iterations
        );
        if let Some(r) = &c.reason {
            let _ = write!(s, " — {r}");
        }
        let _ = writeln!(s, " [{:.2}s]", c.stats.wall_seconds);
        if let Some(cx) = &c.counterexample {
            let _ = writeln!(
                s,
                "  initial {:?} potentially reaches terminal {:?} and {:?}",
                cx.c0, cx.c1, cx.c2
            );
        }
    }
    if let Some(c) = &v.correctness {
        let _ = write!(
            s,
            "Correctness: {} after {} refinement rounds",
            c.kind, c.iterations
        );
        if let Some(r) = &c.reason {
            let _ = write!(s, " — {r}");
        }
        let _ = writeln!(s, " [{:.2}s]", c.stats.wall_seconds);
        if let Some(cx) = &c.counterexample {
            let _ = writeln!(
                s,
                "  input {:?} (predicate {}) potentially reaches terminal {:?}",
                cx.input, cx.expected.0 as u8, cx.c
            );
        }
    }
    let wsss = v.layered.is_some() && v.consensus.is_some();
    let headline = match (v.kind, wsss, v.failing.as_deref()) {
        (VerdictKind::Holds, true, _) if v.correctness.is_some() => {
            "in WSSS and computes the predicate".to_string()
        }
        (VerdictKind::Holds, true, _) => "in WSSS".to_string(),
        (VerdictKind::Holds, false, _) => "holds".to_string(),
        (VerdictKind::Fails, _, Some(f)) => {
            format!("fails: {f} does not hold (not in WSSS via {f})")
        }
        (VerdictKind::Fails, _, None) => "fails".to_string(),
        (VerdictKind::Unknown, _, f) => format!("unknown ({})", f.unwrap_or("inconclusive")),
    };
    let _ = writeln!(s, "verdict: {headline}");
    let _ = writeln!(s, "written: {}", path.display());
    s
}

fn cmd_gen(a: &GenArgs) -> Result<u8> {
    let family: Family = a.family.parse()?;
    let (p, pd) = family.instance(a.param)?;
    let text = serialize_protocol(&ProtocolDocument::from_protocol(&p, Some(pd)));
    match &a.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(0)
}

#[derive(Serialize)]
struct OracleRecord {
    input: BTreeMap<String, u64>,
    #[serde(flatten)]
    classification: ppcheck::oracle::InputClassification,
    #[serde(skip_serializing_if = "Option::is_none")]
    predicate: Option<bool>,
}

fn cmd_oracle(a: &OracleArgs) -> Result<u8> {
    let (doc, p) = load(&a.input)?;
    let pd = match &a.predicate {
        Some(path) => Some(parse_predicate(&read(path)?)?),
        None => doc.predicate.clone(),
    };
    if let Some(pd) = &pd {
        pd.validate(p.alphabet())?;
    }
    let report = oracle_well_specified(&p, a.max_agents, a.cap)?;
    let mut mismatches = 0;
    for (x, c) in &report.entries {
        let expected = pd.as_ref().map(|pd| eval_predicate(&p, pd, x));
        if expected.is_some() && c.value() != expected {
            mismatches += 1;
        }
        let named: BTreeMap<String, u64> = x
            .iter()
            .map(|(s, n)| (p.alphabet()[s].clone(), n))
            .collect();
        match a.format {
            OutputFormat::Json => {
                let rec = OracleRecord {
                    input: named,
                    classification: *c,
                    predicate: expected,
                };
                println!("{}", serde_json::to_string(&rec)?);
            }
            OutputFormat::Human => {
                let kind = match c.kind {
                    Stabilization::Stabilizes(b) => format!("stabilizes({})", b as u8),
                    Stabilization::Split => "split".into(),
                    Stabilization::NonConsensus => "non_consensus".into(),
                };
                let pred = expected
                    .map(|b| format!("  predicate={}", b as u8))
                    .unwrap_or_default();
                let input: Vec<String> = named.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "{:<40} {kind:<16} silent={} configurations={}{pred}",
                    input.join(" "),
                    c.silent,
                    c.configurations
                );
            }
        }
    }
    let ok = report.well_specified() && mismatches == 0;
    if a.format == OutputFormat::Human {
        println!(
            "inputs: {}, well-specified: {}, silent: {}, predicate mismatches: {}",
            report.entries.len(),
            report.well_specified(),
            report.all_silent(),
            mismatches
        );
    }
    Ok(if ok { 0 } else { 1 })
}

fn parse_params(specs: &[String]) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    for part in specs
        .iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (i64, i64) = (a.parse()?, b.trim_start_matches('=').parse()?);
                out.extend(a..=b);
            }
            None => out.push(
                part.parse()
                    .with_context(|| format!("bad parameter {part:?}"))?,
            ),
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct BenchRecord {
    family: String,
    param: Option<i64>,
    states: usize,
    transitions: usize,
    kind: VerdictKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    failing: Option<String>,
    layered_seconds: f64,
    layers: Option<usize>,
    consensus_seconds: f64,
    refinements: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    correctness_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn cmd_bench(a: &BenchArgs) -> Result<u8> {
    let family: Family = a.family.parse()?;
    let params: Vec<Option<i64>> = if family.takes_parameter() {
        let ps = parse_params(&a.params)?;
        if ps.is_empty() {
            bail!("family {family} needs parameter values");
        }
        ps.into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let set = PipelineSettings {
        solver: a.solver.config()?,
        k_max: a.k_max,
        refine: RefinementOptions {
            max_refinements: a.max_refinements,
        },
    };
    let phases = Phases {
        layered: true,
        consensus: true,
        fail_fast: false,
        correct: a.correct.then_some(None),
    };
    let run_one = |param: Option<i64>| -> BenchRecord {
        let mut rec = BenchRecord {
            family: family.to_string(),
            param,
            states: 0,
            transitions: 0,
            kind: VerdictKind::Unknown,
            failing: None,
            layered_seconds: 0.0,
            layers: None,
            consensus_seconds: 0.0,
            refinements: 0,
            correctness_seconds: None,
            error: None,
        };
        let (p, pd) = match family.instance(param) {
            Ok(x) => x,
            Err(e) => {
                rec.error = Some(e.to_string());
                return rec;
            }
        };
        (rec.states, rec.transitions) = sizes(&p);
        let doc = ProtocolDocument::from_protocol(&p, Some(pd));
        match pipeline("check", &doc, &p, &phases, &set) {
            Ok(v) => {
                rec.kind = v.kind;
                rec.failing = v.failing.clone();
                if let Some(l) = &v.layered {
                    rec.layered_seconds = l.stats.wall_seconds;
                    rec.layers = l.partition.as_ref().map(Vec::len);
                }
                if let Some(c) = &v.consensus {
                    rec.consensus_seconds = c.stats.wall_seconds;
                    rec.refinements = c.iterations;
                }
                rec.correctness_seconds = v.correctness.as_ref().map(|c| c.stats.wall_seconds);
            }
            Err(e) => rec.error = Some(format!("{e:#}")),
        }
        rec
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()?;
    let records: Vec<BenchRecord> =
        pool.install(|| params.par_iter().map(|&p| run_one(p)).collect());
    match a.format {
        OutputFormat::Json => {
            for r in &records {
                println!("{}", serde_json::to_string(r)?);
            }
        }
        OutputFormat::Human => {
            println!(
                "{:<18} {:>6} {:>6} {:>7} {:>8} {:>7} {:>11} {:>7} {:>9}",
                "family",
                "param",
                "|Q|",
                "|T|",
                "layered",
                "layers",
                "consensus",
                "rounds",
                "verdict"
            );
            for r in &records {
                let param = r.param.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
                let verdict = match (&r.error, r.kind) {
                    (Some(e), _) => format!("error: {e}"),
                    (None, k) => k.to_string(),
                };
                println!(
                    "{:<18} {:>6} {:>6} {:>7} {:>7.2}s {:>7} {:>10.2}s {:>7} {:>9}",
                    r.family,
                    param,
                    r.states,
                    r.transitions,
                    r.layered_seconds,
                    r.layers
                        .map(|l| l.to_string())
                        .unwrap_or_else(|| "-".into()),
                    r.consensus_seconds,
                    r.refinements,
                    verdict
                );
            }
        }
    }
    let worst = VerdictKind::all(records.iter().map(|r| {
        if r.error.is_some() {
            VerdictKind::Unknown
        } else {
            r.kind
        }
    }));
    Ok(worst.exit_code() as u8)
}

fn cmd_replay(a: &ReplayArgs) -> Result<u8> {
    let doc = parse_verdict(&read(&a.input)?).with_context(|| format!("{}", a.input.display()))?;
    let items = replay_verdict(&doc, &a.solver.config()?)?;
    for it in &items {
        println!(
            "{}: {} — {}",
            it.certificate,
            if it.ok { "ok" } else { "REJECTED" },
            it.detail
        );
    }
    if items.is_empty() {
        println!("no certificates to replay");
    }
    Ok(if items.iter().all(|i| i.ok) { 0 } else { 1 })
}
