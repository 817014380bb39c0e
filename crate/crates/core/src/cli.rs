//! Command-line front end.
//!
//! Exit codes: 0 success, 1 unreadable or malformed input, 2 well-formedness
//! violations, 3 inconsistent, not live or not analyzable, 4 infeasible,
//! 5 the simulation discarded a token, 64 bad usage.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::consistency::{
    compute_hyperperiod, compute_tick, repetition_vector, AnalysisError, Hyperperiod, InconsistencyReport,
    RepetitionVector,
};
use crate::graph::{validate_graph, Graph, ValidationReport};
use crate::liveness::{check_liveness, LivenessReport, ModeSequence};
use crate::model_text::parse_model;
use crate::rational::Rational;
use crate::report::Report;
use crate::sim::{export_gantt, parse_scenario, simulate, Event, GanttFormat, JoinerPolicy, SimTrace};
use crate::timing::{check_feasibility, timing_table, FeasibilityReport, Horizon};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_LIVE: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;
pub const EXIT_DISCARD: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "rmdf", version, about = "Analyze and simulate real-time mode-aware dataflow graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct Common {
    /// Graph description in the `.rmdf` format.
    spec: PathBuf,
    #[arg(long, value_enum, default_value = "human")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check structural well-formedness.
    Validate(Common),
    /// Consistency, tick, hyperperiod and liveness.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Replace a channel's initial tokens, e.g. `c6=0`.
        #[arg(long = "set-init", value_name = "CHANNEL=RATIONAL")]
        set_init: Vec<String>,
        /// Mode sequence for control tokens, applied cyclically; every mode by default.
        #[arg(long, value_delimiter = ',')]
        modes: Vec<String>,
    },
    /// Release, deadline and window of each job.
    Timing {
        /// Graph description in the `.rmdf` format.
        spec: PathBuf,
        /// First N jobs of every actor.
        #[arg(long, conflicts_with = "hyperperiod")]
        jobs: Option<u64>,
        /// Every job of one hyperperiod (the default).
        #[arg(long)]
        hyperperiod: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Largest admissible WCET per actor, compared with the declared one.
    Feasibility {
        #[command(flatten)]
        common: Common,
        /// Replace an actor's WCET, e.g. `Camera=3/5`.
        #[arg(long = "set-wcet", value_name = "ACTOR=RATIONAL")]
        set_wcet: Vec<String>,
    },
    /// Run a scenario and record the trace.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: PathBuf,
        /// Where to write the trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long = "trace-format", value_enum, default_value = "json")]
        trace_format: TraceFormat,
        /// Override the scenario's joiner policy.
        #[arg(long, value_enum)]
        joiner: Option<Joiner>,
    },
    /// Render a recorded trace.
    Gantt {
        /// A trace written by `simulate` in JSON.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Text chart destination; standard output when neither is given.
        #[arg(long)]
        text: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TraceFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Joiner {
    Naive,
    Rmdf,
}

struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type Outcome = Result<(String, i32), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| fail(EXIT_INPUT, format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| fail(EXIT_INPUT, format!("cannot write {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Graph, Failure> {
    parse_model(&read(path)?).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn assignment(text: &str) -> Result<(&str, Rational), Failure> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| fail(EXIT_USAGE, format!("expected NAME=VALUE, got `{text}`")))?;
    let value = value
        .trim()
        .parse()
        .map_err(|e| fail(EXIT_USAGE, format!("`{text}`: {e}")))?;
    Ok((name.trim(), value))
}

fn no_csv(format: Format) -> Result<(), Failure> {
    match format {
        Format::Csv => Err(fail(EXIT_USAGE, "csv output is only available for `timing`")),
        _ => Ok(()),
    }
}

fn json<T: Serialize>(command: &str, body: T) -> String {
    let mut s = Report::new(command, body).to_json();
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ValidateBody<'a> {
    model: String,
    valid: bool,
    #[serde(flatten)]
    report: &'a ValidationReport,
}

fn validation_text(report: &ValidationReport) -> String {
    let mut s = String::new();
    if report.is_ok() {
        s.push_str("well-formed\n");
    }
    for v in &report.violations {
        let _ = writeln!(s, "violation: {v}");
    }
    s
}

fn cmd_validate(c: &Common) -> Outcome {
    no_csv(c.format)?;
    let g = load(&c.spec)?;
    let report = validate_graph(&g);
    let code = if report.is_ok() { EXIT_OK } else { EXIT_INVALID };
    let text = match c.format {
        Format::Json => json(
            "validate",
            ValidateBody {
                model: c.spec.display().to_string(),
                valid: report.is_ok(),
                report: &report,
            },
        ),
        _ => validation_text(&report),
    };
    Ok((text, code))
}

#[derive(Serialize, Default)]
struct AnalyzeBody {
    model: String,
    valid: bool,
    violations: ValidationReport,
    consistent: bool,
    inconsistency: Option<InconsistencyReport>,
    repetition_vector: Option<RepetitionVector>,
    tick: Option<Rational>,
    hyperperiod: Option<Hyperperiod>,
    liveness: Option<LivenessReport>,
    live: bool,
    error: Option<String>,
}

fn analyze_text(b: &AnalyzeBody) -> String {
    let mut s = format!("model: {}\n", b.model);
    if !b.valid {
        s.push_str(&validation_text(&b.violations));
        return s;
    }
    match &b.inconsistency {
        Some(r) => {
            let _ = writeln!(s, "consistent: no\ninconsistency: {r}");
        }
        None => s.push_str("consistent: yes\n"),
    }
    if let Some(rv) = &b.repetition_vector {
        let parts: Vec<String> = rv.iter().map(|(a, n)| format!("{a}={n}")).collect();
        let _ = writeln!(s, "repetition vector: {}", parts.join(", "));
    }
    if let Some(t) = &b.tick {
        let _ = writeln!(s, "tick: {t} ms");
    }
    if let Some(h) = &b.hyperperiod {
        let _ = write!(s, "hyperperiod: {} ms", h.length);
        if let Some(l) = &b.liveness {
            let _ = write!(s, " ({} ticks)", l.ticks);
        }
        s.push('\n');
    }
    if let Some(l) = &b.liveness {
        for sc in &l.scenarios {
            match &sc.deadlock {
                None => {
                    let _ = writeln!(s, "liveness ({}): live", sc.label);
                }
                Some(d) => {
                    let _ = write!(s, "liveness ({}): deadlock\ndeadlock: tick {}, {} job {}", sc.label, d.tick, d.actor, d.job);
                    if let Some(c) = &d.channel {
                        let _ = write!(s, ", channel {c}");
                    }
                    if let Some(x) = &d.deficit {
                        let _ = write!(s, ", deficit {x}");
                    }
                    let _ = writeln!(s, " (blocked: {} job {} at {} ms)", d.blocked, d.blocked_job, d.time);
                }
            }
        }
    }
    if let Some(e) = &b.error {
        let _ = writeln!(s, "error: {e}");
    }
    let _ = writeln!(s, "verdict: {}", if b.live && b.consistent { "consistent and live" } else { "not live" });
    s
}

fn cmd_analyze(c: &Common, set_init: &[String], modes: &[String]) -> Outcome {
    no_csv(c.format)?;
    let mut g = load(&c.spec)?;
    for a in set_init {
        let (ch, value) = assignment(a)?;
        g = g
            .with_initial_tokens(ch, value)
            .map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    }
    let mut b = AnalyzeBody {
        model: c.spec.display().to_string(),
        violations: validate_graph(&g),
        ..Default::default()
    };
    b.valid = b.violations.is_ok();
    let code = if !b.valid {
        EXIT_INVALID
    } else {
        analyze_valid(&g, modes, &mut b)?;
        if b.consistent && b.live {
            EXIT_OK
        } else {
            EXIT_NOT_LIVE
        }
    };
    let text = match c.format {
        Format::Json => json("analyze", &b),
        _ => analyze_text(&b),
    };
    Ok((text, code))
}

fn analyze_valid(g: &Graph, modes: &[String], b: &mut AnalyzeBody) -> Result<(), Failure> {
    match repetition_vector(g, None) {
        Ok(rv) => {
            b.consistent = true;
            b.repetition_vector = Some(rv);
        }
        Err(AnalysisError::Inconsistent(r)) => {
            b.inconsistency = Some(*r);
            return Ok(());
        }
        Err(e) => {
            b.error = Some(e.to_string());
            return Ok(());
        }
    }
    if g.timed_actors().next().is_some() {
        match compute_tick(g).and_then(|t| Ok((t, compute_hyperperiod(g)?))) {
            Ok((t, h)) => {
                b.tick = Some(t);
                b.hyperperiod = Some(h);
            }
            Err(e) => {
                b.error = Some(e.to_string());
                return Ok(());
            }
        }
    }
    let sequence = if modes.is_empty() {
        ModeSequence::AllModes
    } else {
        ModeSequence::Sequence(modes.to_vec())
    };
    match check_liveness(g, &sequence) {
        Ok(l) => {
            b.live = l.is_live();
            b.liveness = Some(l);
        }
        Err(AnalysisError::Graph(e)) => return Err(fail(EXIT_USAGE, e.to_string())),
        Err(e) => b.error = Some(e.to_string()),
    }
    Ok(())
}

fn cmd_timing(spec: &Path, jobs: Option<u64>, format: Format) -> Outcome {
    let g = load(spec)?;
    let report = validate_graph(&g);
    if !report.is_ok() {
        return Ok((validation_text(&report), EXIT_INVALID));
    }
    let horizon = jobs.map_or(Horizon::Hyperperiod, Horizon::Jobs);
    let table = timing_table(&g, &horizon).map_err(analysis_failure)?;
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Json => json("timing", &table),
        Format::Human => table.to_human(),
    };
    Ok((text, EXIT_OK))
}

fn analysis_failure(e: AnalysisError) -> Failure {
    let code = match e {
        AnalysisError::Infeasible(_) => EXIT_INFEASIBLE,
        _ => EXIT_NOT_LIVE,
    };
    fail(code, e.to_string())
}

fn feasibility_text(r: &FeasibilityReport) -> String {
    let width = r.entries.iter().map(|e| e.actor.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:width$}  {:>16}  {:>5}  {:>10}  verdict\n", "actor", "max wcet", "job", "wcet");
    for e in &r.entries {
        let (bound, job) = match (&e.min_window, e.critical_job) {
            (Some(w), Some(j)) => (format!("{w} ({})", w.to_decimal(2)), j.to_string()),
            _ => ("unbounded".to_string(), "-".to_string()),
        };
        let _ = writeln!(
            s,
            "{:width$}  {:>16}  {:>5}  {:>10}  {}",
            e.actor,
            bound,
            job,
            e.wcet.to_string(),
            if e.pass { "ok" } else { "FAIL" }
        );
    }
    let _ = writeln!(s, "feasible: {}", if r.pass { "yes" } else { "no" });
    s
}

fn cmd_feasibility(c: &Common, set_wcet: &[String]) -> Outcome {
    no_csv(c.format)?;
    let mut g = load(&c.spec)?;
    for a in set_wcet {
        let (actor, value) = assignment(a)?;
        g.actor_mut(actor)
            .ok_or_else(|| fail(EXIT_USAGE, format!("unknown actor `{actor}`")))?
            .wcet = value;
    }
    let report = validate_graph(&g);
    if !report.is_ok() {
        return Ok((validation_text(&report), EXIT_INVALID));
    }
    let r = check_feasibility(&g).map_err(analysis_failure)?;
    let code = if r.pass { EXIT_OK } else { EXIT_INFEASIBLE };
    let text = match c.format {
        Format::Json => json("feasibility", &r),
        _ => feasibility_text(&r),
    };
    Ok((text, code))
}

#[derive(Serialize)]
struct SimulateBody<'a> {
    model: String,
    scenario: String,
    events: usize,
    discards: Vec<&'a Event>,
    truncated: usize,
    trace: Option<String>,
}

fn cmd_simulate(c: &Common, scenario: &Path, trace_out: Option<&Path>, trace_format: TraceFormat, joiner: Option<Joiner>) -> Outcome {
    no_csv(c.format)?;
    let g = load(&c.spec)?;
    let mut scn = parse_scenario(&read(scenario)?).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", scenario.display())))?;
    if let Some(j) = joiner {
        scn.config.joiner_policy = match j {
            Joiner::Naive => JoinerPolicy::NaiveFirstArrival,
            Joiner::Rmdf => JoinerPolicy::RmdfLexicographic,
        };
    }
    let g = scn.graph_for(&g).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let trace = simulate(&g, &scn.config).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    if let Some(path) = trace_out {
        let contents = match trace_format {
            TraceFormat::Json => trace.to_json(),
            TraceFormat::Text => trace.to_text(),
        };
        write_file(path, &contents)?;
    }
    let code = if trace.discard_count() > 0 { EXIT_DISCARD } else { EXIT_OK };
    let body = SimulateBody {
        model: c.spec.display().to_string(),
        scenario: scenario.display().to_string(),
        events: trace.events.len(),
        discards: trace.discards().collect(),
        truncated: trace.truncated.len(),
        trace: trace_out.map(|p| p.display().to_string()),
    };
    let text = match c.format {
        Format::Json => json("simulate", &body),
        _ => simulate_text(&body, &trace),
    };
    Ok((text, code))
}

fn simulate_text(b: &SimulateBody<'_>, trace: &SimTrace) -> String {
    let mut s = format!(
        "{} events up to {} ms, jobs cut off at the horizon: {}\n",
        b.events, trace.horizon, b.truncated
    );
    if b.discards.is_empty() {
        s.push_str("no discards\n");
    }
    for d in &b.discards {
        if let Event::TokenDiscard {
            time,
            actor,
            job,
            channel,
            expected,
            got,
            last_accepted,
            ..
        } = d
        {
            let _ = writeln!(
                s,
                "discard at {time} ms: {actor} job {job} got tag {got} on {channel} after {last_accepted} (expected {expected})"
            );
        }
    }
    if let Some(p) = &b.trace {
        let _ = writeln!(s, "trace written to {p}");
    }
    s
}

fn cmd_gantt(trace: &Path, svg: Option<&Path>, text: Option<&Path>) -> Outcome {
    let t = SimTrace::from_json(&read(trace)?).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", trace.display())))?;
    let mut out = String::new();
    if let Some(p) = svg {
        write_file(p, &export_gantt(&t, GanttFormat::Svg))?;
        let _ = writeln!(out, "wrote {}", p.display());
    }
    match text {
        Some(p) => {
            write_file(p, &export_gantt(&t, GanttFormat::Text))?;
            let _ = writeln!(out, "wrote {}", p.display());
        }
        None if svg.is_none() => out = export_gantt(&t, GanttFormat::Text),
        None => {}
    }
    Ok((out, EXIT_OK))
}

/// Parses `args` (program name first), runs one command and returns its exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let outcome = match &cli.command {
        Command::Validate(c) => cmd_validate(c),
        Command::Analyze { common, set_init, modes } => cmd_analyze(common, set_init, modes),
        Command::Timing {
            spec, jobs, format, ..
        } => cmd_timing(spec, *jobs, *format),
        Command::Feasibility { common, set_wcet } => cmd_feasibility(common, set_wcet),
        Command::Simulate {
            common,
            scenario,
            trace,
            trace_format,
            joiner,
        } => cmd_simulate(common, scenario, trace.as_deref(), *trace_format, *joiner),
        Command::Gantt { trace, svg, text } => cmd_gantt(trace, svg.as_deref(), text.as_deref()),
    };
    match outcome {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
