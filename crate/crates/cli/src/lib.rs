//! The `agentrep` command line.
//!
//! Exit codes: 0 success, 1 domain error, 2 allocation failure, 64 usage.
//! Every output line is `key: value` or tab-separated, so callers can parse
//! it without a schema.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use agentrep_core::config::{parse_global_config, parse_task_spec, GlobalConfig};
use agentrep_core::evidence::{validate_event_with, EventFilter, Timestamp, Verdict};
use agentrep_core::ledger::LedgerError;
use agentrep_core::policy::{allocate, AllocationContext, AllocationError, Candidate};
use agentrep_core::regimes::parse_regime;
use agentrep_core::sim::{parse_scenario, run_showcase, run_sim_in, substream, ShowcaseError};
use agentrep_core::{
    AgentId, CardStore, ContextKey, Digest, EvidenceEvent, EvidenceStore, Ledger, RegimeCatalog,
    RegimeId, StrengthLevel, VerifierId, VerifierReliabilityTable,
};
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_ALLOCATION: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const DATA_ENV: &str = "AGENTREP_DATA";

const SYNOPSIS: &str =
    "usage: agentrep [--config FILE] [--data DIR] <regime|evidence|card|allocate|ledger|sim> <verb> [flags]";

#[derive(Debug, Parser)]
#[command(name = "agentrep", version, about = "Context-conditioned agent reputation")]
struct Cli {
    /// Global config file; for `sim run`, the scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Data directory (falls back to $AGENTREP_DATA, then the config).
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    #[command(subcommand)]
    Regime(RegimeCmd),
    #[command(subcommand)]
    Evidence(EvidenceCmd),
    #[command(subcommand)]
    Card(CardCmd),
    /// Pick an agent and verifier panel for a task.
    Allocate(AllocateArgs),
    #[command(subcommand)]
    Ledger(LedgerCmd),
    #[command(subcommand)]
    Sim(SimCmd),
}

#[derive(Debug, Subcommand)]
enum RegimeCmd {
    /// Check a regime document.
    Validate { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum EvidenceCmd {
    /// Append a JSON Lines file of events; all or nothing.
    Ingest {
        file: PathBuf,
        #[arg(long)]
        at: Option<Timestamp>,
    },
    Query(QueryArgs),
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    agent: Option<AgentId>,
    #[arg(long)]
    task_class: Option<String>,
    #[arg(long)]
    regime: Option<RegimeId>,
    #[arg(long)]
    min_strength: Option<StrengthLevel>,
    #[arg(long)]
    verdict: Option<Verdict>,
    #[arg(long)]
    from: Option<Timestamp>,
    #[arg(long)]
    to: Option<Timestamp>,
}

#[derive(Debug, Subcommand)]
enum CardCmd {
    Show {
        #[arg(long)]
        agent: AgentId,
        #[arg(long)]
        context: ContextKey,
        #[arg(long)]
        strength: StrengthLevel,
        #[arg(long)]
        at: Option<Timestamp>,
    },
}

#[derive(Debug, Args)]
struct AllocateArgs {
    #[arg(long)]
    task: PathBuf,
    /// Comma-separated candidate ids.
    #[arg(long, value_delimiter = ',', required = true)]
    agents: Vec<AgentId>,
    /// Verifier pool; defaults to every verifier seen in the evidence.
    #[arg(long, value_delimiter = ',')]
    verifiers: Vec<VerifierId>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    at: Option<Timestamp>,
}

#[derive(Debug, Subcommand)]
enum LedgerCmd {
    /// Commit pending events as a new epoch.
    Commit {
        #[arg(long)]
        at: Option<Timestamp>,
    },
    Verify,
    /// Print the inclusion proof of an event id.
    Prove {
        #[arg(long)]
        event: Digest,
    },
}

#[derive(Debug, Subcommand)]
enum SimCmd {
    /// Run the scenario given by --config.
    Run {
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; defaults to the data directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The two-agent security-audit allocation.
    PaperScenario {
        #[arg(long, default_value_t = 10)]
        alpha_security_successes: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Outcome of a failed command: exit code and the lines for stderr.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn domain(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DOMAIN,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: format!("{}\n{SYNOPSIS}", message.into()),
        }
    }
}

type Outcome = Result<(), Failure>;

/// Runs one invocation, reading `AGENTREP_DATA` from the process environment.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let env = std::env::var_os(DATA_ENV).map(PathBuf::from);
    run_with_env(args, env, out, err)
}

/// [`run`] with the data-directory fallback passed in explicitly.
pub fn run_with_env<I, S>(args: I, env_data: Option<PathBuf>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(err, "{first}\n{SYNOPSIS}");
            return EXIT_USAGE;
        }
    };
    match dispatch(&cli, env_data, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: &Cli, env_data: Option<PathBuf>, out: &mut dyn Write) -> Outcome {
    match &cli.command {
        Command::Regime(RegimeCmd::Validate { file }) => regime_validate(file, out),
        Command::Sim(SimCmd::PaperScenario {
            alpha_security_successes,
            seed,
        }) => showcase(*alpha_security_successes, *seed, out),
        Command::Sim(SimCmd::Run { seed, out: dir }) => {
            let data = || resolve_data(cli.data.clone(), env_data.clone(), None);
            sim_run(cli.config.as_deref(), *seed, dir.clone(), data, out)
        }
        cmd => {
            let env = Env::load(cli, env_data)?;
            match cmd {
                Command::Evidence(EvidenceCmd::Ingest { file, at }) => env.ingest(file, at.unwrap_or_else(now), out),
                Command::Evidence(EvidenceCmd::Query(q)) => env.query(q, out),
                Command::Card(CardCmd::Show {
                    agent,
                    context,
                    strength,
                    at,
                }) => env.card_show(agent, context, *strength, at.unwrap_or_else(now), out),
                Command::Allocate(a) => env.allocate(a, out),
                Command::Ledger(LedgerCmd::Commit { at }) => env.ledger_commit(at.unwrap_or_else(now), out),
                Command::Ledger(LedgerCmd::Verify) => env.ledger_verify(out),
                Command::Ledger(LedgerCmd::Prove { event }) => env.ledger_prove(event, out),
                Command::Regime(_) | Command::Sim(_) => unreachable!("handled above"),
            }
        }
    }
}

fn now() -> Timestamp {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn emit(out: &mut dyn Write, text: impl std::fmt::Display) -> Outcome {
    writeln!(out, "{text}").map_err(|e| Failure::domain(format!("write failed: {e}")))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))
}

fn joined(lines: impl IntoIterator<Item = impl std::fmt::Display>) -> String {
    lines.into_iter().map(|l| l.to_string()).collect::<Vec<_>>().join("\n")
}

fn resolve_data(flag: Option<PathBuf>, env: Option<PathBuf>, config: Option<PathBuf>) -> Result<PathBuf, Failure> {
    flag.or(env)
        .or(config)
        .ok_or_else(|| Failure::usage(format!("no data directory: pass --data, set {DATA_ENV}, or set data_dir")))
}

fn regime_validate(file: &Path, out: &mut dyn Write) -> Outcome {
    match parse_regime(&read(file)?) {
        Ok(r) => emit(out, format_args!("valid: {}", r.regime_id)),
        Err(errors) => {
            for e in &errors {
                emit(out, e)?;
            }
            Err(Failure::domain(format!("{}: {} problem(s)", file.display(), errors.len())))
        }
    }
}

fn showcase(k: u32, seed: u64, out: &mut dyn Write) -> Outcome {
    let result = match seed {
        0 => run_showcase(k),
        s => agentrep_core::sim::showcase_scenario(k).and_then(|sc| sc.allocate(s)),
    };
    let o = match result {
        Ok(o) => o,
        Err(e @ ShowcaseError::SuccessCountOutOfRange(_)) => return Err(Failure::usage(e.to_string())),
        Err(ShowcaseError::Allocation(e)) => return Err(allocation_failure(e)),
    };
    emit(out, format_args!("winner: {}", o.winner))?;
    emit(out, format_args!("alpha: {}", o.alpha.1))?;
    emit(out, format_args!("beta: {}", o.beta.1))?;
    emit(out, format_args!("alpha.assessment: {}", o.alpha.0))?;
    emit(out, format_args!("beta.assessment: {}", o.beta.0))?;
    emit(out, format_args!("panel: {}", joined(o.panel.iter().map(|v| v.to_string())).replace('\n', ",")))
}

fn sim_run(
    scenario: Option<&Path>,
    seed: Option<u64>,
    dir: Option<PathBuf>,
    data: impl FnOnce() -> Result<PathBuf, Failure>,
    out: &mut dyn Write,
) -> Outcome {
    let path = scenario.ok_or_else(|| Failure::usage("sim run needs --config <scenario>"))?;
    let mut cfg = parse_scenario(&read(path)?, path.parent()).map_err(|es| Failure::domain(joined(es)))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = match dir {
        Some(d) => d,
        None => data()?,
    };
    let _lock = lock(&dir)?;
    let run = run_sim_in(&cfg, Some(&dir)).map_err(|e| Failure::domain(e.to_string()))?;
    let report = run.metrics.to_report();
    fs::write(dir.join("metrics.txt"), &report).map_err(|e| Failure::domain(format!("metrics.txt: {e}")))?;
    write!(out, "{report}").map_err(|e| Failure::domain(e.to_string()))
}

/// Holds an exclusive advisory lock on `<dir>/.lock` until dropped.
fn lock(dir: &Path) -> Result<File, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::domain(format!("{}: {e}", dir.display())))?;
    let path = dir.join(".lock");
    let f = File::options()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&path)
        .map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
    f.lock().map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?;
    Ok(f)
}

fn allocation_failure(e: AllocationError<f64>) -> Failure {
    match e {
        AllocationError::UnknownRegime(_) | AllocationError::StrengthMismatch { .. } => Failure::domain(e.to_string()),
        AllocationError::NoEligibleAgent { ref decisions } => Failure {
            code: EXIT_ALLOCATION,
            message: std::iter::once(e.to_string())
                .chain(decisions.iter().map(|(a, _, d)| format!("{a}: {d}")))
                .collect::<Vec<_>>()
                .join("\n"),
        },
        AllocationError::Assign(_) => Failure {
            code: EXIT_ALLOCATION,
            message: e.to_string(),
        },
    }
}

fn ledger_failure(e: LedgerError) -> Failure {
    let shown = match &e {
        LedgerError::Broken { epoch, detail } => format!("Broken{{epoch={epoch}}}: {detail}"),
        LedgerError::Corrupt { path, detail } => format!("Corrupt{{path={path}}}: {detail}"),
        other => other.to_string(),
    };
    Failure::domain(shown)
}

/// A data directory with its config and catalog.
struct Env {
    config: GlobalConfig,
    catalog: RegimeCatalog,
    data: PathBuf,
}

impl Env {
    fn load(cli: &Cli, env_data: Option<PathBuf>) -> Result<Self, Failure> {
        let (mut config, base) = match &cli.config {
            Some(p) => {
                let cfg = parse_global_config(&read(p)?).map_err(|es| Failure::domain(joined(es)))?;
                (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (GlobalConfig::default(), PathBuf::new()),
        };
        config.data_dir = config.data_dir.map(|d| base.join(d));
        config.regimes_dir = config.regimes_dir.map(|d| base.join(d));
        let mut catalog = RegimeCatalog::starter();
        if let Some(d) = &config.regimes_dir {
            catalog
                .load_dir(d)
                .map_err(|e| Failure::domain(format!("{}: {e}", d.display())))?;
        }
        let data = resolve_data(cli.data.clone(), env_data, config.data_dir.clone())?;
        Ok(Self { config, catalog, data })
    }

    fn evidence(&self) -> Result<EvidenceStore, Failure> {
        let path = self.data.join("evidence.jsonl");
        if !path.exists() {
            return Ok(EvidenceStore::new(self.config.hash));
        }
        EvidenceStore::open(&path, self.config.hash).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))
    }

    fn ledger(&self) -> Result<Ledger, Failure> {
        Ledger::open(&self.data.join("ledger"), self.config.hash, self.config.epoch_cadence).map_err(ledger_failure)
    }

    fn reliability(&self) -> Result<VerifierReliabilityTable, Failure> {
        let path = self.data.join("reliability.tsv");
        match fs::read_to_string(&path) {
            Ok(text) => {
                VerifierReliabilityTable::from_tsv(&text).map_err(|e| Failure::domain(format!("{}: {e}", path.display())))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(VerifierReliabilityTable::new()),
            Err(e) => Err(Failure::domain(format!("{}: {e}", path.display()))),
        }
    }

    fn cards(&self, evidence: &EvidenceStore) -> Result<CardStore, Failure> {
        CardStore::from_events(evidence.events(), &self.config.aggregation).map_err(|e| Failure::domain(e.to_string()))
    }

    fn ingest(&self, file: &Path, at: Timestamp, out: &mut dyn Write) -> Outcome {
        let text = read(file)?;
        let _lock = lock(&self.data)?;
        let mut store = {
            let path = self.data.join("evidence.jsonl");
            EvidenceStore::open(&path, self.config.hash)
                .map_err(|e| Failure::domain(format!("{}: {e}", path.display())))?
        };
        let mut ledger = self.ledger()?;

        // Validate everything before writing anything.
        let mut events = Vec::new();
        let mut problems = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let n = i + 1;
            let event = match EvidenceEvent::from_json_line(line) {
                Ok(e) => e,
                Err(e) => {
                    problems.push(format!("line {n}: {e}"));
                    continue;
                }
            };
            match validate_event_with(event, &self.catalog, at, self.config.hash) {
                Ok(v) => {
                    if store.sequence_of(&v.id()).is_some() || !seen.insert(v.id()) {
                        problems.push(format!("line {n}: duplicate event {}", v.id()));
                    } else {
                        events.push(v);
                    }
                }
                Err(vs) => problems.extend(vs.iter().map(|v| format!("line {n}: {v}"))),
            }
        }
        if !problems.is_empty() {
            return Err(Failure::domain(problems.join("\n")));
        }
        for v in events {
            let commit = ledger.record_event(&v, at).map_err(ledger_failure)?;
            let receipt = store.append(v).map_err(|e| Failure::domain(e.to_string()))?;
            emit(out, format_args!("event {} {}", receipt.sequence_number, receipt.event_id))?;
            if let Some(r) = commit {
                emit(out, format_args!("epoch {} {}", r.epoch, r.root))?;
            }
        }
        Ok(())
    }

    fn query(&self, q: &QueryArgs, out: &mut dyn Write) -> Outcome {
        let store = self.evidence()?;
        let time_range = match (q.from, q.to) {
            (None, None) => None,
            (lo, hi) => Some((lo.unwrap_or(0), hi.unwrap_or(Timestamp::MAX))),
        };
        let filter = EventFilter {
            agent: q.agent.clone(),
            task_class: q.task_class.clone(),
            regime_id: q.regime.clone(),
            min_strength: q.min_strength,
            verdict: q.verdict,
            time_range,
        };
        let result = store.query(&filter);
        emit(out, format_args!("count: {}", result.count))?;
        for (seq, e) in result.events {
            emit(out, format_args!("{seq}\t{}", e.to_json_line().trim_end()))?;
        }
        Ok(())
    }

    fn card_show(
        &self,
        agent: &AgentId,
        context: &ContextKey,
        strength: StrengthLevel,
        at: Timestamp,
        out: &mut dyn Write,
    ) -> Outcome {
        let evidence = self.evidence()?;
        let cards = self.cards(&evidence)?;
        let a = cards.assess(agent, context, strength, at, &self.config.aggregation, &self.reliability()?);
        emit(out, a)
    }

    fn allocate(&self, args: &AllocateArgs, out: &mut dyn Write) -> Outcome {
        let task = parse_task_spec(&read(&args.task)?, &self.catalog).map_err(|es| Failure::domain(joined(es)))?;
        let evidence = self.evidence()?;
        let cards = self.cards(&evidence)?;
        let reliability = self.reliability()?;
        let pool: Vec<VerifierId> = if args.verifiers.is_empty() {
            evidence
                .events()
                .iter()
                .map(|e| e.verifier.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect()
        } else {
            args.verifiers.clone()
        };
        let candidates: Vec<Candidate<f64>> = args.agents.iter().cloned().map(Candidate::new).collect();
        let ctx = AllocationContext {
            cards: &cards,
            catalog: &self.catalog,
            aggregation: &self.config.aggregation,
            policy: &self.config.policy,
            reliability: &reliability,
            now: args.at.unwrap_or_else(now),
        };
        let mut rng = substream(args.seed, "allocate");
        let a = allocate(&ctx, &task, &candidates, &pool, &mut rng).map_err(allocation_failure)?;
        emit(out, format_args!("winner: {}", a.winner))?;
        emit(out, format_args!("decision: {}", a.decision))?;
        let stake = a.decision.required_stake().unwrap_or(0.0);
        emit(out, format_args!("stake: {stake:.6}"))?;
        emit(out, format_args!("panel: {}", joined(a.panel.iter()).replace('\n', ",")))?;
        for (agent, assessment, decision) in &a.decisions {
            emit(out, format_args!("candidate: {agent}\t{decision}\t{assessment}"))?;
        }
        Ok(())
    }

    fn ledger_commit(&self, at: Timestamp, out: &mut dyn Write) -> Outcome {
        let _lock = lock(&self.data)?;
        let mut ledger = self.ledger()?;
        let r = ledger.commit_epoch(at).map_err(ledger_failure)?;
        emit(out, format_args!("epoch: {}", r.epoch))?;
        emit(out, format_args!("root: {}", r.root))?;
        emit(out, format_args!("prev_hash: {}", r.prev_hash))?;
        emit(out, format_args!("event_count: {}", r.event_count))?;
        emit(out, format_args!("timestamp: {}", r.timestamp))
    }

    fn ledger_verify(&self, out: &mut dyn Write) -> Outcome {
        let summary = match self.ledger().and_then(|l| l.verify().map_err(ledger_failure)) {
            Ok(s) => s,
            Err(f) => {
                emit(out, &f.message)?;
                return Err(f);
            }
        };
        emit(out, "ok")?;
        emit(out, format_args!("epochs: {}", summary.epochs))?;
        emit(out, format_args!("committed_events: {}", summary.committed_events))?;
        emit(out, format_args!("pending_events: {}", summary.pending_events))?;
        let head = summary.head.map_or_else(|| "none".to_string(), |h| h.to_string());
        emit(out, format_args!("head: {head}"))
    }

    fn ledger_prove(&self, event: &Digest, out: &mut dyn Write) -> Outcome {
        let ledger = self.ledger()?;
        let p = ledger.inclusion_proof(event).map_err(ledger_failure)?;
        let root = ledger.records()[p.epoch as usize].root;
        emit(out, format_args!("epoch: {}", p.epoch))?;
        emit(out, format_args!("index: {}", p.index))?;
        emit(out, format_args!("events: {}", p.event_count))?;
        emit(out, format_args!("root: {root}"))?;
        for step in &p.path {
            let side = match step.side {
                agentrep_core::ledger::Side::Left => "left",
                agentrep_core::ledger::Side::Right => "right",
            };
            emit(out, format_args!("{side} {}", step.sibling))?;
        }
        Ok(())
    }
}
