//! `concord` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use concord_core::disclosure::{
    classify_sensitivity, decide, detect_privacy_intent, disclosed_content, ApprovalSignal, DecisionTrace,
    DisclosureRequest,
};
use concord_core::harness::{generate_fixture, load_dataset, run_episode, EpisodeTrace, Settings, TEMPLATES};
use concord_core::relationship::{assess_window, MarkerCounts, Thresholds};
use concord_core::speaker_gate::{calibrate_threshold, parse_scores, Label};
use concord_core::{
    evaluate, ApprovalPolicy, ConcordError, DisclosureOutcome, Lexicons, ProtocolQuery, QueryQuality,
    RelationshipAssessment, RelationshipLevel, Role, Sensitivity, Turn, Urgency,
};

#[derive(Parser)]
#[command(name = "concord", version, about = "Assistant-to-assistant context recovery over one-sided transcripts")]
struct Cli {
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pick the speaker-gate threshold for a target false-positive rate.
    Calibrate {
        /// Lines of `start end score label`, label `owner` or `impostor`.
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        target_fpr: f64,
    },
    /// Run one two-agent episode over a dataset record.
    Run(RunArgs),
    /// Score an episode trace against its dataset record.
    Eval {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// `key = value` settings, for `level.<label>` overrides.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Show how a disclosure request is decided. Without arguments, prints the full matrix.
    PolicyCheck(PolicyArgs),
    /// Write a seeded synthetic dataset record.
    GenFixtures {
        #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(TEMPLATES))]
        template: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PolicyArgs {
    /// Relationship level; derived from `--transcript` when absent.
    #[arg(long)]
    level: Option<RelationshipLevel>,
    /// Base grade; derived from `--answer` when absent.
    #[arg(long)]
    sensitivity: Option<Sensitivity>,
    /// Candidate answer text.
    #[arg(long)]
    answer: Option<String>,
    /// Slot the query asks about.
    #[arg(long, default_value = "GENERAL_ATTRIBUTE")]
    slot: String,
    /// The responder's own turns around the trigger, one per line.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Treat the owner as having signalled privacy.
    #[arg(long)]
    intent: bool,
    /// Owner answer to an approval prompt: `grant` or `deny`.
    #[arg(long)]
    approval: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Channel RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drop: Option<f64>,
    #[arg(long)]
    latency: Option<f64>,
    #[arg(long)]
    timeout: Option<f64>,
    /// `grant`, `deny`, `silent`, or `script FILE`.
    #[arg(long, num_args = 1..=2, value_names = ["POLICY", "FILE"])]
    approvals: Option<Vec<String>>,
    /// Write the episode trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `key = value` settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn settings(path: Option<&Path>) -> anyhow::Result<Settings> {
    match path {
        Some(p) => Ok(Settings::parse(&read(p)?).with_context(|| format!("in {}", p.display()))?),
        None => Ok(Settings::default()),
    }
}

fn approvals(args: &[String]) -> anyhow::Result<ApprovalPolicy> {
    match args {
        [p] => Ok(p.parse()?),
        [kw, file] if kw.eq_ignore_ascii_case("script") => {
            let path = Path::new(file);
            Ok(ApprovalPolicy::parse_script(&read(path)?).with_context(|| format!("in {}", path.display()))?)
        }
        _ => bail!(ConcordError::InvalidConfig(format!("bad --approvals `{}`", args.join(" ")))),
    }
}

fn calibrate(json: bool, scores: &Path, target_fpr: f64) -> anyhow::Result<()> {
    let windows = parse_scores(&read(scores)?).with_context(|| format!("in {}", scores.display()))?;
    let (mut imp, mut gen) = (Vec::new(), Vec::new());
    for w in &windows {
        match w.label {
            Label::Impostor => imp.push(w.window.score),
            Label::Owner => gen.push(w.window.score),
        }
    }
    let cal = calibrate_threshold(&imp, &gen, target_fpr)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&cal)?);
    } else {
        println!("impostor windows  {}", imp.len());
        println!("owner windows     {}", gen.len());
        println!("threshold         {:.6}", cal.threshold);
        println!("achieved FPR      {:.6}", cal.achieved_fpr);
        match cal.achieved_tpr {
            Some(t) => println!("achieved TPR      {t:.6}"),
            None => println!("achieved TPR      n/a"),
        }
    }
    Ok(())
}

fn run(json: bool, args: &RunArgs) -> anyhow::Result<()> {
    let mut s = settings(args.config.as_deref())?;
    if let Some(v) = args.seed {
        s.channel.rng_seed = v;
    }
    if let Some(v) = args.drop {
        s.channel.drop_probability = v;
    }
    if let Some(v) = args.latency {
        s.channel.latency = v;
    }
    if let Some(v) = args.timeout {
        s.channel.timeout = v;
    }
    if let Some(a) = &args.approvals {
        s.engine.approvals = approvals(a)?;
    }
    let record = load_dataset(&args.dataset).with_context(|| format!("loading {}", args.dataset.display()))?;
    let trace = run_episode(&record, &s.engine, &s.channel)?;
    if let Some(out) = &args.trace {
        write(out, &trace.to_jsonl())?;
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&trace)?);
        return Ok(());
    }
    println!("dataset {}  seed {}", trace.dataset_id, trace.seed);
    println!("{:<12} {:>6} {:<26} {:<16} {:>8}  content", "message", "turn", "slot", "status", "sent_at");
    for agent in &trace.agents {
        for q in &agent.queries {
            println!(
                "{:<12} {:>6} {:<26} {:<16} {:>8.2}  {}",
                q.message_id,
                q.query.trigger_turn_id,
                q.query.target_slot,
                q.status.to_string(),
                q.sent_at,
                q.content.as_deref().unwrap_or("-")
            );
        }
    }
    let a2a = trace.a2a_resolutions().count();
    let dispatched: usize = trace.agents.iter().map(|a| a.queries.len()).sum();
    println!("{dispatched} queries dispatched, {a2a} resolved by the peer");
    Ok(())
}

fn eval(json: bool, trace: &Path, dataset: &Path, report: Option<&Path>, config: Option<&Path>) -> anyhow::Result<()> {
    let s = settings(config)?;
    let episode = EpisodeTrace::from_jsonl(&read(trace)?).with_context(|| format!("in {}", trace.display()))?;
    let record = load_dataset(dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let rep = evaluate(&episode, &record, &s.levels)?;
    let text = serde_json::to_string_pretty(&rep)?;
    if let Some(out) = report {
        write(out, &text)?;
    }
    if json {
        println!("{text}");
        return Ok(());
    }
    println!("dataset {}", rep.dataset_id);
    for (name, value) in concord_core::EvalReport::RATE_NAMES.iter().zip(rep.rates()) {
        println!("{name:<28} {value:.3}");
    }
    println!();
    println!("{:<26} {:>5} {:>8}", "slot", "gold", "matched");
    for (slot, c) in &rep.per_slot {
        println!("{slot:<26} {:>5} {:>8}", c.gold, c.matched);
    }
    Ok(())
}

fn request(slot: &str, answer: &str, level: RelationshipLevel, sensitivity: Sensitivity, intent: bool) -> DisclosureRequest {
    DisclosureRequest {
        query: ProtocolQuery {
            trigger_turn_id: 1,
            intent: concord_core::RESOLVE_MISSING_ENTITY.into(),
            target_slot: slot.into(),
            urgency: Urgency::None,
            quality: QueryQuality::HighValue,
            natural_language_fallback: String::new(),
        },
        candidate_answer: answer.into(),
        sensitivity,
        relationship: RelationshipAssessment {
            level,
            counts: MarkerCounts::default(),
            evidence: Vec::new(),
            locked: false,
        },
        intent_elevated: intent,
    }
}

fn kind(o: &DisclosureOutcome) -> String {
    serde_json::to_value(o).ok().and_then(|v| v["kind"].as_str().map(String::from)).unwrap_or_default()
}

fn policy_check(json: bool, args: &PolicyArgs) -> anyhow::Result<()> {
    let signal = match args.approval.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None => None,
        Some("grant" | "granted") => Some(ApprovalSignal::Granted),
        Some("deny" | "denied") => Some(ApprovalSignal::Denied),
        Some(other) => bail!(ConcordError::InvalidConfig(format!("unknown approval `{other}`"))),
    };
    let lex = Lexicons::default();
    let answer = args.answer.as_deref().unwrap_or_default();
    let turns: Option<Vec<Turn>> = match &args.transcript {
        Some(p) => Some(
            read(p)?
                .lines()
                .filter(|l| !l.trim().is_empty())
                .enumerate()
                .map(|(i, l)| Turn::new(i as u32 + 1, Role::UserB, l.trim()))
                .collect(),
        ),
        None => None,
    };
    let level = args.level.or_else(|| turns.as_ref().map(|t| assess_window(t, &lex, &Thresholds::default()).level));
    let graded = args.answer.as_ref().map(|a| {
        let probe = request(&args.slot, a, RelationshipLevel::L3, Sensitivity::Low, false);
        classify_sensitivity(&probe.query, a, &lex)
    });
    let sensitivity = args.sensitivity.or(graded);
    let intent = args.intent || turns.as_ref().is_some_and(|t| detect_privacy_intent(t, &lex));

    let levels: Vec<_> = level.map_or(RelationshipLevel::ALL.to_vec(), |l| vec![l]);
    let grades: Vec<_> = sensitivity.map_or(Sensitivity::ALL.to_vec(), |s| vec![s]);
    let traces: Vec<DecisionTrace> = levels
        .iter()
        .flat_map(|&l| grades.iter().map(move |&s| (l, s)))
        .map(|(l, s)| decide(&request(&args.slot, answer, l, s, intent), signal, &lex))
        .collect();
    if json {
        println!("{}", serde_json::to_string_pretty(&traces)?);
        return Ok(());
    }
    println!("{:<6} {:<9} {:<7} {:<9} {:<14} {:<14} disclosed", "level", "base", "intent", "decided", "matrix", "outcome");
    for t in &traces {
        let matrix = t.matrix.as_ref().map_or("HardLock".to_string(), kind);
        let shown = if answer.is_empty() { None } else { disclosed_content(answer, &t.outcome) };
        println!(
            "{:<6} {:<9} {:<7} {:<9} {:<14} {:<14} {}",
            t.level.to_string(),
            t.base_sensitivity.to_string(),
            t.intent_elevated,
            t.sensitivity.to_string(),
            matrix,
            kind(&t.outcome),
            shown.as_deref().unwrap_or("-")
        );
    }
    Ok(())
}

fn gen_fixtures(template: &str, seed: u64, out: Option<&Path>) -> anyhow::Result<()> {
    let record = generate_fixture(template, seed)?;
    let text = serde_json::to_string_pretty(&record)? + "\n";
    match out {
        Some(p) => {
            write(p, &text)?;
            eprintln!("wrote {} ({} turns)", p.display(), record.conversation_transcript.len());
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// 1 for bad input, 2 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let input = err.chain().any(|cause| {
        matches!(
            cause.downcast_ref::<ConcordError>(),
            Some(
                ConcordError::Validation(_)
                    | ConcordError::Parse { .. }
                    | ConcordError::Schema { .. }
                    | ConcordError::Decode { .. }
                    | ConcordError::InvalidConfig(_)
                    | ConcordError::InvalidTranscript(_)
                    | ConcordError::EmptyTranscript
                    | ConcordError::DatasetMismatch { .. }
                    | ConcordError::UnknownTemplate(_)
                    | ConcordError::CalibrationInfeasible(_)
            )
        )
    });
    if input {
        1
    } else {
        2
    }
}

fn report(err: &anyhow::Error) {
    eprintln!("error: {err:#}");
    if let Some(ConcordError::Validation(violations)) = err.chain().find_map(|c| c.downcast_ref::<ConcordError>()) {
        for v in violations {
            eprintln!("  - {v}");
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Calibrate { scores, target_fpr } => calibrate(cli.json, scores, *target_fpr),
        Command::Run(args) => run(cli.json, args),
        Command::Eval { trace, dataset, report, config } => {
            eval(cli.json, trace, dataset, report.as_deref(), config.as_deref())
        }
        Command::PolicyCheck(args) => policy_check(cli.json, args),
        Command::GenFixtures { template, seed, out } => gen_fixtures(template, *seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            report(&e);
            ExitCode::from(exit_code(&e))
        }
    }
}
