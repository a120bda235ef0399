//! Command-line front end. Exit codes: 0 ok, 1 input or schema error,
//! 2 planning or selection failure, 3 execution failure.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::ckg::{CapabilityGraph, NodeId};
use crate::config::{specs_path_for, Config};
use crate::evalbench::{evaluate, load_bench, load_outcomes, render_eval, score_all, RunOutcome, StringMatchJudge};
use crate::exec::{render_report, render_report_json, FinalStatus};
use crate::ingest::{ingest_cards, load_cards, load_pwc};
use crate::nlu::GenerationParams;
use crate::pipeline::{load_graph_file, render_plan, Engine};
use crate::selection::{BenchmarkConstraint, ConstraintSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_PLAN: i32 = 2;
pub const EXIT_EXEC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hive", version, about = "Plan, select models for, and run multi-step model queries")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Use recorded replies and keyword heuristics instead of a provider.
    #[arg(long, global = true)]
    pub offline: bool,
    /// Directory of recorded provider replies.
    #[arg(long, global = true)]
    pub fixtures: Option<PathBuf>,
    #[arg(long, global = true)]
    pub provider_url: Option<String>,
    /// Capability graph (line-delimited triples).
    #[arg(long, global = true)]
    pub ckg: Option<PathBuf>,
    #[arg(long, global = true)]
    pub specs: Option<PathBuf>,
    /// Directory of PDDL domain files.
    #[arg(long, global = true)]
    pub domains: Option<PathBuf>,
    /// Backend registry (JSON).
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    #[arg(long, global = true)]
    pub max_width: Option<usize>,
    #[arg(long, global = true)]
    pub max_expansions: Option<usize>,
}

#[derive(Debug, Args, Default, Clone)]
pub struct ConstraintArgs {
    /// Allowed licenses, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub licenses: Option<Vec<String>>,
    /// Prefer the smallest model.
    #[arg(long, conflicts_with = "benchmark")]
    pub smallest: bool,
    /// Rank by this benchmark's result (needs --metric).
    #[arg(long, requires = "metric")]
    pub benchmark: Option<String>,
    #[arg(long, requires = "benchmark")]
    pub metric: Option<String>,
}

impl ConstraintArgs {
    pub fn to_set(&self) -> Result<ConstraintSet, String> {
        let licenses = self
            .licenses
            .as_ref()
            .map(|l| l.iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect::<BTreeSet<_>>());
        let benchmark = match (&self.benchmark, &self.metric) {
            (Some(name), Some(metric)) => Some(BenchmarkConstraint { name: name.clone(), metric: metric.clone() }),
            _ => None,
        };
        ConstraintSet::new(licenses, self.smallest, benchmark).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a capability graph from model cards and benchmark records.
    Ingest {
        #[arg(long)]
        cards: PathBuf,
        #[arg(long)]
        pwc: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plan a query and select models, without executing.
    Plan {
        query: String,
        #[command(flatten)]
        constraints: ConstraintArgs,
    },
    /// Plan, select and execute a query.
    Run {
        query: String,
        #[command(flatten)]
        constraints: ConstraintArgs,
        /// Print the trace as JSON instead of the text report.
        #[arg(long)]
        json: bool,
        /// Also write the JSON trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score a benchmark from recorded outcomes or from live runs.
    Eval {
        #[arg(long)]
        bench: PathBuf,
        #[arg(long, required_unless_present = "live", conflicts_with = "live")]
        outcomes: Option<PathBuf>,
        #[arg(long)]
        live: bool,
        /// Expected output strings per record id (JSON), for live runs.
        #[arg(long)]
        judge: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Write the live outcomes here.
        #[arg(long)]
        save_outcomes: Option<PathBuf>,
        #[arg(long)]
        err_as_zero: bool,
        #[arg(long)]
        no_couple_fot: bool,
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        constraints: ConstraintArgs,
    },
    /// Inspect the capability graph.
    Ckg {
        #[command(subcommand)]
        command: CkgCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum CkgCommand {
    Stats,
    Query {
        #[arg(long)]
        task: String,
    },
}

/// Config file and environment, then flags.
pub fn effective_config(g: &GlobalArgs) -> Result<Config, String> {
    let mut c = Config::load(g.config.as_deref()).map_err(|e| e.to_string())?;
    if g.offline {
        c.provider.offline = true;
    }
    if let Some(v) = &g.fixtures {
        c.provider.fixtures = Some(v.clone());
    }
    if let Some(v) = &g.provider_url {
        c.provider.url = Some(v.clone());
    }
    if let Some(v) = &g.ckg {
        c.ckg.path = Some(v.clone());
    }
    if let Some(v) = &g.specs {
        c.ckg.specs = Some(v.clone());
    }
    if let Some(v) = &g.domains {
        c.pddl.domains = Some(v.clone());
    }
    if let Some(v) = &g.registry {
        c.registry.path = Some(v.clone());
    }
    if let Some(v) = g.max_width {
        c.planner.max_width = v;
    }
    if let Some(v) = g.max_expansions {
        c.planner.max_expansions = v;
    }
    Ok(c)
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn fail(&mut self, code: i32, msg: impl std::fmt::Display) -> i32 {
        let _ = writeln!(self.err, "error: {msg}");
        code
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    run_cli(&cli, out, err)
}

pub fn run_cli(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut io = Io { out, err };
    let config = match effective_config(&cli.global) {
        Ok(c) => c,
        Err(e) => return io.fail(EXIT_INPUT, e),
    };
    match &cli.command {
        Command::Ingest { cards, pwc, out } => cmd_ingest(&config, cards, pwc, out, &mut io),
        Command::Plan { query, constraints } => cmd_plan(&config, query, constraints, &mut io),
        Command::Run { query, constraints, json, trace } => {
            cmd_run(&config, query, constraints, *json, trace.as_deref(), &mut io)
        }
        Command::Eval {
            bench,
            outcomes,
            live,
            judge,
            jobs,
            save_outcomes,
            err_as_zero,
            no_couple_fot,
            json,
            constraints,
        } => {
            let mut config = config;
            config.eval.err_as_zero |= *err_as_zero;
            if *no_couple_fot {
                config.eval.couple_fot = false;
            }
            let source = if *live { None } else { outcomes.as_deref() };
            let opts = EvalOpts { judge: judge.as_deref(), jobs: *jobs, save: save_outcomes.as_deref(), json: *json };
            cmd_eval(&config, bench, source, constraints, &opts, &mut io)
        }
        Command::Ckg { command } => cmd_ckg(&config, command, &mut io),
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<(), String> {
    let err = |e: std::io::Error| format!("{}: {e}", path.display());
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, text).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(err)
}

fn cmd_ingest(config: &Config, cards: &Path, pwc: &Path, out_path: &Path, io: &mut Io<'_>) -> i32 {
    let cards = match load_cards(cards) {
        Ok(c) => c,
        Err(e) => return io.fail(EXIT_INPUT, e),
    };
    let records = match std::fs::read_to_string(pwc)
        .map_err(|e| e.to_string())
        .and_then(|t| load_pwc(&t).map_err(|e| e.to_string()))
    {
        Ok(r) => r,
        Err(e) => return io.fail(EXIT_INPUT, format!("{}: {e}", pwc.display())),
    };
    let provider = match config.provider() {
        Ok(p) => p,
        Err(e) => return io.fail(EXIT_INPUT, e),
    };
    let ingested = match ingest_cards(&cards, &records, provider.as_ref(), &GenerationParams::default()) {
        Ok(o) => o,
        Err(e) => return io.fail(EXIT_INPUT, e),
    };
    for w in &ingested.warnings {
        let _ = writeln!(io.err, "warning: {w}");
    }
    let specs_path = specs_path_for(out_path);
    let written = write_atomic(out_path, &ingested.graph.to_text())
        .and_then(|_| write_atomic(&specs_path, &ingested.specs.to_jsonl()));
    if let Err(e) = written {
        let _ = std::fs::remove_file(out_path);
        let _ = std::fs::remove_file(&specs_path);
        return io.fail(EXIT_INPUT, e);
    }
    print_stats(&ingested.graph, io);
    let _ = writeln!(io.out, "specs: {}", ingested.specs.len());
    EXIT_OK
}

fn engine(config: &Config, io: &mut Io<'_>) -> Result<Engine, i32> {
    Engine::from_config(config).map_err(|e| io.fail(e.exit_code(), e))
}

fn cmd_plan(config: &Config, query: &str, constraints: &ConstraintArgs, io: &mut Io<'_>) -> i32 {
    let cs = match constraints.to_set() {
        Ok(c) => c,
        Err(e) => return io.fail(EXIT_INPUT, e),
    };
    let engine = match engine(config, io) {
        Ok(e) => e,
        Err(code) => return code,
    };
    match engine.plan(query, &cs) {
        Ok(p) => {
            let _ = write!(io.out, "{}", render_plan(&p));
            if p.selection.is_complete() {
                EXIT_OK
            } else {
                EXIT_PLAN
            }
        }
        Err(e) => io.fail(e.exit_code(), e),
    }
}

fn cmd_run(
    config: &Config,
    query: &str,
    constraints: &ConstraintArgs,
    json: bool,
    trace_path: Option<&Path>,
    io: &mut Io<'_>,
) -> i32 {
    let cs = match constraints.to_set() {
        Ok(c) => c,
        Err(e) => return io.fail(EXIT_INPUT, e),
    };
    let engine = match engine(config, io) {
        Ok(e) => e,
        Err(code) => return code,
    };
    let trace = match engine.run(query, &cs) {
        Ok(t) => t,
        Err(e) => return io.fail(e.exit_code(), e),
    };
    let json_text = render_report_json(&trace);
    if let Some(p) = trace_path {
        if let Err(e) = std::fs::write(p, format!("{json_text}\n")) {
            return io.fail(EXIT_INPUT, format!("{}: {e}", p.display()));
        }
    }
    if json {
        let _ = writeln!(io.out, "{json_text}");
    } else {
        let _ = write!(io.out, "{}", render_report(&trace));
    }
    if !trace.selection.is_complete() {
        EXIT_PLAN
    } else if trace.final_status == FinalStatus::Err {
        EXIT_EXEC
    } else {
        EXIT_OK
    }
}

struct EvalOpts<'a> {
    judge: Option<&'a Path>,
    jobs: usize,
    save: Option<&'a Path>,
    json: bool,
}

fn cmd_eval(
    config: &Config,
    bench: &Path,
    outcomes: Option<&Path>,
    constraints: &ConstraintArgs,
    opts: &EvalOpts<'_>,
    io: &mut Io<'_>,
) -> i32 {
    let records = match std::fs::read_to_string(bench)
        .map_err(|e| e.to_string())
        .and_then(|t| load_bench(&t).map_err(|e| e.to_string()))
    {
        Ok(r) => r,
        Err(e) => return io.fail(EXIT_INPUT, format!("{}: {e}", bench.display())),
    };
    let outcomes: Vec<RunOutcome> = match outcomes {
        Some(p) => match std::fs::read_to_string(p)
            .map_err(|e| e.to_string())
            .and_then(|t| load_outcomes(&t).map_err(|e| e.to_string()))
        {
            Ok(o) => o,
            Err(e) => return io.fail(EXIT_INPUT, format!("{}: {e}", p.display())),
        },
        None => {
            let cs = match constraints.to_set() {
                Ok(c) => c,
                Err(e) => return io.fail(EXIT_INPUT, e),
            };
            let judge = match opts.judge {
                Some(p) => match std::fs::read_to_string(p)
                    .map_err(|e| e.to_string())
                    .and_then(|t| StringMatchJudge::from_json(&t).map_err(|e| e.to_string()))
                {
                    Ok(j) => j,
                    Err(e) => return io.fail(EXIT_INPUT, format!("{}: {e}", p.display())),
                },
                None => StringMatchJudge::default(),
            };
            let engine = match engine(config, io) {
                Ok(e) => e,
                Err(code) => return code,
            };
            match engine.run_bench(&records, &cs, &judge, opts.jobs) {
                Ok(o) => o,
                Err(e) => return io.fail(EXIT_INPUT, e),
            }
        }
    };
    if let Some(p) = opts.save {
        let text: String =
            outcomes.iter().map(|o| serde_json::to_string(o).expect("outcome serializes") + "\n").collect();
        if let Err(e) = std::fs::write(p, text) {
            return io.fail(EXIT_INPUT, format!("{}: {e}", p.display()));
        }
    }
    let scored = match score_all(&records, &outcomes, &config.eval) {
        Ok(s) => s,
        Err(e) => return io.fail(EXIT_INPUT, e),
    };
    let report = evaluate(&scored, &config.eval);
    if opts.json {
        let _ = writeln!(io.out, "{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        let _ = write!(io.out, "{}", render_eval(&report));
    }
    EXIT_OK
}

fn print_stats(g: &CapabilityGraph, io: &mut Io<'_>) {
    let s = g.stats();
    let _ = writeln!(io.out, "triples: {}", s.triples);
    let _ = writeln!(io.out, "entities: {}", s.entities);
    let _ = writeln!(io.out, "models: {}", g.models().len());
    let _ = writeln!(io.out, "tasks: {}", g.tasks().len());
}

fn cmd_ckg(config: &Config, command: &CkgCommand, io: &mut Io<'_>) -> i32 {
    let Some(path) = config.ckg.path.as_deref() else {
        return io.fail(EXIT_INPUT, "ckg.path is not set");
    };
    let g = match load_graph_file(path) {
        Ok(g) => g,
        Err(e) => return io.fail(EXIT_INPUT, e),
    };
    match command {
        CkgCommand::Stats => print_stats(&g, io),
        CkgCommand::Query { task } => {
            let records = g.models_for_task(&NodeId::task(task));
            let _ = writeln!(io.out, "{} model(s) for task:{task}", records.len());
            for r in records {
                let size = r.size_bytes.map_or("-".to_string(), |s| s.to_string());
                let _ = writeln!(
                    io.out,
                    "  {}  license={}  size_bytes={}  results={}",
                    r.model.local_name,
                    r.license.as_deref().unwrap_or("-"),
                    size,
                    r.results.len()
                );
                for b in &r.results {
                    let _ =
                        writeln!(io.out, "    {} / {} = {} ({})", b.benchmark, b.metric, b.value, b.direction.as_str());
                }
            }
        }
    }
    EXIT_OK
}
