//! Command-line front end: match prefix expressions, run transducers on
//! complete traces, monitor trace corpora or streams, generate experiment
//! traces, compile expressions to transducers, and benchmark monitoring.
//!
//! Exit codes: 0 clean / success, 1 violation, 2 usage or parse error,
//! 3 no match.

mod alloc;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use pretra::compile::compile;
use pretra::dsl::{parse_event, parse_mpt, parse_pe, parse_trace, print_trace};
use pretra::event::Event;
use pretra::gen::{periodic_traces, random_traces, PeriodicParams, RandomParams};
use pretra::monitor::{
    monitor_loop, Batch, EventSource, MonitorOptions, MonitorReport, TraceSetSource, Verdict,
};
use pretra::mpt::{run_offline, Mpt, OutSym};
use pretra::pe::{decompose, slice, Pe};

const EXIT_CLEAN: i32 = 0;
const EXIT_VIOLATION: i32 = 1;
const EXIT_ERROR: i32 = 2;
const EXIT_NOMATCH: i32 = 3;

#[derive(Parser)]
#[command(name = "pretra", version, about = "Prefix-transducer runtime verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match a prefix expression against a trace and report the shortest
    /// matched prefix.
    Match(MatchArgs),
    /// Run a transducer offline on complete traces.
    Run(RunArgs),
    /// Monitor a trace corpus or an event stream for violations.
    Monitor(MonitorArgs),
    /// Generate experiment traces.
    Gen(GenArgs),
    /// Compile a prefix expression to its finite transducer.
    Compile(CompileArgs),
    /// Benchmark monitoring over a grid of corpus sizes; prints CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct MatchArgs {
    /// File containing the expression.
    #[arg(long, conflicts_with = "expr")]
    pe: Option<PathBuf>,
    /// Inline expression text.
    #[arg(long)]
    expr: Option<String>,
    /// Trace file (one event per line).
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    mpt: PathBuf,
    /// Trace bindings `VAR=FILE`, one per input variable.
    #[arg(long = "trace", value_name = "VAR=FILE")]
    traces: Vec<String>,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MonitorArgs {
    #[arg(long)]
    mpt: PathBuf,
    /// Directory of `.tr` trace files (trace id = file stem).
    #[arg(long, conflicts_with = "stdin")]
    trace_dir: Option<PathBuf>,
    /// Read an event stream from standard input: `new ID`, `ev ID EVENT`,
    /// `end ID`, one per line.
    #[arg(long)]
    stdin: bool,
    /// Expected tuple size; checked against the transducer.
    #[arg(long)]
    k: Option<usize>,
    /// Instantiate only unordered tuples of distinct traces.
    #[arg(long)]
    reduce_symmetric: bool,
    /// Stop a tuple once ⊤ is emitted.
    #[arg(long)]
    early_accept: bool,
    /// Append the end marker `$` when a trace closes.
    #[arg(long)]
    append_end: bool,
    /// Explore all matching edges (non-deterministic transducers).
    #[arg(long)]
    nondet: bool,
    /// Keep going after a violation and report all violating tuples.
    #[arg(long)]
    all_violations: bool,
    /// Sweep independent configuration sets on worker threads.
    #[arg(long)]
    parallel: bool,
    /// Abort after this many main-loop passes.
    #[arg(long)]
    max_passes: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    /// `random` or `periodic`.
    #[arg(long, default_value = "random")]
    profile: String,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 50)]
    length: usize,
    #[arg(long, default_value_t = 10)]
    low_in_pct: u32,
    #[arg(long, default_value_t = 10)]
    low_out_pct: u32,
    #[arg(long, default_value_t = 2)]
    value_range: u64,
    #[arg(long, default_value_t = 5)]
    period: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long, conflicts_with = "expr")]
    pe: Option<PathBuf>,
    #[arg(long)]
    expr: Option<String>,
    /// Representative events, space or comma separated, e.g. "a b c" or
    /// "I(l,0) O(l,0) E $".
    #[arg(long)]
    alphabet: String,
    /// Emit Graphviz DOT text (default).
    #[arg(long)]
    dot: bool,
    /// Emit the JSON dump instead.
    #[arg(long, conflicts_with = "dot")]
    json: bool,
    /// Omit the ⊥ sink from the DOT output.
    #[arg(long)]
    hide_sink: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    mpt: PathBuf,
    /// Comma-separated trace counts, e.g. `50,100,200`.
    #[arg(long, default_value = "50,100,200")]
    traces: String,
    #[arg(long, default_value_t = 50)]
    length: usize,
    #[arg(long, default_value = "random")]
    profile: String,
    #[arg(long, default_value_t = 5)]
    period: usize,
    #[arg(long, default_value_t = 2)]
    value_range: u64,
    #[arg(long, default_value_t = 10)]
    low_in_pct: u32,
    #[arg(long, default_value_t = 10)]
    low_out_pct: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Runs to average per grid point.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long)]
    reduce_symmetric: bool,
    #[arg(long)]
    early_accept: bool,
    #[arg(long)]
    append_end: bool,
    #[arg(long)]
    parallel: bool,
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Match(args) => cmd_match(args),
        Command::Run(args) => cmd_run(args),
        Command::Monitor(args) => cmd_monitor(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Compile(args) => cmd_compile(args),
        Command::Bench(args) => cmd_bench(args),
    };
    std::process::exit(match code {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    });
}

type CmdResult = Result<i32, String>;

fn read_file(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_pe_arg(pe: &Option<PathBuf>, expr: &Option<String>) -> Result<Pe, String> {
    let text = match (pe, expr) {
        (Some(path), None) => read_file(path)?,
        (None, Some(s)) => s.clone(),
        _ => return Err("provide exactly one of --pe FILE or --expr TEXT".to_string()),
    };
    parse_pe(text.trim()).map_err(|e| e.to_string())
}

fn load_mpt_file(path: &Path) -> Result<Mpt, String> {
    parse_mpt(&read_file(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_trace_file(path: &Path) -> Result<Vec<Event>, String> {
    parse_trace(&read_file(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_match(args: MatchArgs) -> CmdResult {
    let pe = load_pe_arg(&args.pe, &args.expr)?;
    let trace = load_trace_file(&args.trace)?;
    match decompose(&pe, &trace) {
        None => {
            if args.json {
                println!("{}", serde_json::json!({ "matched": false }));
            } else {
                println!("no match");
            }
            Ok(EXIT_NOMATCH)
        }
        Some(d) => {
            if args.json {
                let labels: BTreeMap<String, serde_json::Value> = d
                    .mmap
                    .iter()
                    .map(|(l, s)| {
                        let sliced = slice(&trace, s)
                            .map(|w| pretra::event::format_word(&w))
                            .unwrap_or_default();
                        (
                            l.clone(),
                            serde_json::json!({ "mstring": s.to_string(), "slice": sliced }),
                        )
                    })
                    .collect();
                println!(
                    "{}",
                    serde_json::json!({
                        "matched": true,
                        "prefix_len": d.consumed(),
                        "suffix_len": d.suffix.len(),
                        "labels": labels,
                    })
                );
            } else {
                println!("matched prefix length: {}", d.consumed());
                for (label, s) in d.mmap.iter() {
                    let sliced = slice(&trace, s)
                        .map(|w| pretra::event::format_word(&w))
                        .unwrap_or_default();
                    println!("  {label} = {s}  slice: {sliced}");
                }
                println!("suffix length: {}", d.suffix.len());
            }
            Ok(EXIT_CLEAN)
        }
    }
}

fn cmd_run(args: RunArgs) -> CmdResult {
    let mpt = load_mpt_file(&args.mpt)?;
    let mut sigma = BTreeMap::new();
    for binding in &args.traces {
        let (var, path) = binding
            .split_once('=')
            .ok_or_else(|| format!("--trace expects VAR=FILE, got `{binding}`"))?;
        sigma.insert(var.to_string(), load_trace_file(Path::new(path))?);
    }
    for var in &mpt.in_vars {
        if !sigma.contains_key(var) {
            return Err(format!("missing --trace {var}=FILE"));
        }
    }
    let run = run_offline(&mpt, &sigma, args.max_steps).map_err(|e| e.to_string())?;

    if args.json {
        let steps: Vec<_> = run
            .steps
            .iter()
            .map(|s| {
                let consumed: BTreeMap<_, _> = s
                    .consumed
                    .iter()
                    .map(|(v, a, b)| (v.clone(), serde_json::json!([a, b])))
                    .collect();
                serde_json::json!({
                    "state": mpt.state_name(s.state),
                    "edge": s.edge_index,
                    "consumed": consumed,
                    "output": s.output.to_string(),
                    "mmap": s.mmap.to_string(),
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::json!({
                "steps": steps,
                "final_state": mpt.state_name(run.final_state),
                "stuck": run.stuck,
                "output": run.output.to_string(),
            })
        );
    } else {
        for (i, s) in run.steps.iter().enumerate() {
            let consumed: Vec<String> = s
                .consumed
                .iter()
                .map(|(v, a, b)| format!("{v}[{a}..{b})"))
                .collect();
            println!(
                "step {}: {} --> {}  consumed {}  out {}",
                i + 1,
                mpt.state_name(s.state),
                mpt.state_name(mpt.edges[s.edge_index].to),
                consumed.join(" "),
                s.output
            );
        }
        if run.stuck {
            println!("stuck in state {}", mpt.state_name(run.final_state));
        } else {
            println!("finished in state {}", mpt.state_name(run.final_state));
        }
        println!("output: {}", run.output);
    }
    Ok(if run.output.contains(&OutSym::Bot) { EXIT_VIOLATION } else { EXIT_CLEAN })
}

/// Blocking line-protocol source: `new ID`, `ev ID EVENT`, `end ID`.
struct StdinSource<R: BufRead> {
    reader: R,
}

impl<R: BufRead> EventSource for StdinSource<R> {
    fn next_batch(&mut self) -> Batch {
        let mut line = String::new();
        loop {
            line.clear();
            match self.reader.read_line(&mut line) {
                Ok(0) => return Batch::finished(),
                Ok(_) => {}
                Err(_) => return Batch::finished(),
            }
            let trimmed = line.split('#').next().unwrap_or("").trim();
            if trimmed.is_empty() {
                continue;
            }
            let mut batch = Batch::default();
            let (op, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
            match op {
                "new" => batch.new_traces.push(rest.trim().to_string()),
                "end" => batch.closed.push(rest.trim().to_string()),
                "ev" => {
                    let (id, ev) = match rest.trim().split_once(char::is_whitespace) {
                        Some(x) => x,
                        None => {
                            eprintln!("malformed event line: {trimmed}");
                            continue;
                        }
                    };
                    match parse_event(ev.trim()) {
                        Ok(event) => batch.events.push((id.to_string(), event)),
                        Err(e) => {
                            eprintln!("bad event `{ev}`: {e}");
                            continue;
                        }
                    }
                }
                _ => {
                    eprintln!("unknown stream op `{op}` (expected new/ev/end)");
                    continue;
                }
            }
            return batch;
        }
    }
}

fn read_trace_dir(dir: &Path) -> Result<Vec<(String, Vec<Event>)>, String> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "tr").unwrap_or(false))
        .collect();
    entries.sort();
    let mut out = Vec::new();
    for path in entries {
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| format!("bad trace file name {}", path.display()))?
            .to_string();
        out.push((name, load_trace_file(&path)?));
    }
    Ok(out)
}

fn verdict_line(report: &MonitorReport) -> String {
    match &report.verdict {
        Verdict::Clean => "format=1 status=clean".to_string(),
        Verdict::Violation(w) => format!(
            "format=1 status=violation traces={} positions={} state={}",
            w.traces.join(","),
            w.positions.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
            w.state
        ),
    }
}

fn cmd_monitor(args: MonitorArgs) -> CmdResult {
    let mpt = load_mpt_file(&args.mpt)?;
    if let Some(k) = args.k {
        if k != mpt.in_vars.len() {
            return Err(format!(
                "--k {k} does not match the transducer's {} input variables",
                mpt.in_vars.len()
            ));
        }
    }
    let options = MonitorOptions {
        reduction: args.reduce_symmetric,
        early_accept: args.early_accept,
        append_end: args.append_end,
        nondet: args.nondet,
        collect_all: args.all_violations,
        max_passes: args.max_passes,
        parallel: args.parallel,
    };

    let report = if args.stdin {
        let stdin = std::io::stdin();
        let mut source = StdinSource { reader: stdin.lock() };
        monitor_loop(&mpt, &mut source, &options)
    } else {
        let dir = args
            .trace_dir
            .as_ref()
            .ok_or_else(|| "provide --trace-dir DIR or --stdin".to_string())?;
        let traces = read_trace_dir(dir)?;
        let mut source = TraceSetSource::new(traces);
        monitor_loop(&mpt, &mut source, &options)
    }
    .map_err(|e| e.to_string())?;

    println!("{}", verdict_line(&report));
    if args.json {
        let violations: Vec<_> = report
            .violations
            .iter()
            .map(|w| {
                serde_json::json!({
                    "traces": w.traces,
                    "positions": w.positions,
                    "state": w.state,
                    "mmap": w.mmap.to_string(),
                })
            })
            .collect();
        println!(
            "{}",
            serde_json::json!({
                "format": 1,
                "clean": report.verdict.is_clean(),
                "violations": violations,
                "stats": {
                    "passes": report.stats.passes,
                    "tuples": report.stats.tuples_spawned,
                    "sets": report.stats.sets_spawned,
                    "max_workbag": report.stats.max_workbag,
                    "pe_steps": report.stats.pe_steps,
                    "events": report.stats.events_ingested,
                },
            })
        );
    }
    Ok(if report.verdict.is_clean() { EXIT_CLEAN } else { EXIT_VIOLATION })
}

fn generate(profile: &str, args: &GenArgs) -> Result<Vec<(String, Vec<Event>)>, String> {
    match profile {
        "random" => random_traces(&RandomParams {
            count: args.count,
            length: args.length,
            low_in_pct: args.low_in_pct,
            low_out_pct: args.low_out_pct,
            value_range: args.value_range,
            seed: args.seed,
        })
        .map_err(|e| e.to_string()),
        "periodic" => periodic_traces(&PeriodicParams {
            count: args.count,
            length: args.length,
            period: args.period,
            value_range: args.value_range,
        })
        .map_err(|e| e.to_string()),
        other => Err(format!("unknown profile `{other}` (random or periodic)")),
    }
}

fn cmd_gen(args: GenArgs) -> CmdResult {
    let traces = generate(&args.profile, &args)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| format!("{}: {e}", args.out_dir.display()))?;
    for (name, events) in &traces {
        let path = args.out_dir.join(format!("{name}.tr"));
        let mut f = fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        f.write_all(print_trace(events).as_bytes())
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    println!("wrote {} traces to {}", traces.len(), args.out_dir.display());
    Ok(EXIT_CLEAN)
}

fn cmd_compile(args: CompileArgs) -> CmdResult {
    let pe = load_pe_arg(&args.pe, &args.expr)?;
    let mut alphabet = Vec::new();
    for part in args.alphabet.split([' ', ',']).filter(|s| !s.is_empty()) {
        alphabet.push(parse_event(part).map_err(|e| e.to_string())?);
    }
    let t = compile(&pe, &alphabet).map_err(|e| e.to_string())?;
    if args.json {
        println!("{}", t.export_json());
    } else {
        print!("{}", t.export_dot(args.hide_sink));
    }
    Ok(EXIT_CLEAN)
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let mpt = load_mpt_file(&args.mpt)?;
    let options = MonitorOptions {
        reduction: args.reduce_symmetric,
        early_accept: args.early_accept,
        append_end: args.append_end,
        collect_all: true,
        parallel: args.parallel,
        ..MonitorOptions::default()
    };
    let counts: Result<Vec<usize>, _> =
        args.traces.split(',').map(|s| s.trim().parse::<usize>()).collect();
    let counts = counts.map_err(|e| format!("bad --traces list: {e}"))?;
    if args.repeat == 0 {
        return Err("--repeat must be at least 1".to_string());
    }

    println!("traces,events,verdict,cpu_seconds,peak_bytes,max_workbag");
    for n in counts {
        let gen_args = GenArgs {
            profile: args.profile.clone(),
            out_dir: PathBuf::new(),
            count: n,
            length: args.length,
            low_in_pct: args.low_in_pct,
            low_out_pct: args.low_out_pct,
            value_range: args.value_range,
            period: args.period,
            seed: args.seed,
        };
        let traces = generate(&args.profile, &gen_args)?;
        let events: usize = traces.iter().map(|(_, e)| e.len()).sum();

        let mut seconds = 0.0f64;
        let mut peak = 0usize;
        let mut workbag = 0usize;
        let mut verdict = String::new();
        for rep in 0..args.repeat {
            alloc::PEAK.reset_peak();
            let started = Instant::now();
            let mut source = TraceSetSource::new(traces.clone());
            let report = monitor_loop(&mpt, &mut source, &options).map_err(|e| e.to_string())?;
            seconds += started.elapsed().as_secs_f64();
            peak = peak.max(alloc::PEAK.peak_bytes());
            workbag = workbag.max(report.stats.max_workbag);
            let v = if report.verdict.is_clean() { "clean" } else { "violation" };
            if rep == 0 {
                verdict = v.to_string();
            } else if verdict != v {
                return Err("verdict changed between repeat runs".to_string());
            }
        }
        println!(
            "{n},{events},{verdict},{:.6},{peak},{workbag}",
            seconds / args.repeat as f64
        );
    }
    Ok(EXIT_CLEAN)
}
