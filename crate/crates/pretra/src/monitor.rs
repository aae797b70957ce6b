//! Online monitoring of k-safety hyperproperties with prefix transducers.
//!
//! The monitor instantiates the transducer over every k-tuple of input
//! traces (optionally reduced for symmetric, reflexive properties) and
//! evaluates all instances incrementally. Each instance is represented by a
//! set of configurations, one per outgoing edge of the instance's current
//! state; a configuration carries the positions read so far, the m-map
//! accumulated for the edge's expression, and the rewritten per-trace
//! residuals. Sets wait in a workbag and are swept once per main-loop pass;
//! each pass a configuration consumes at most one unread event per trace.
//!
//! When a configuration's expressions have all matched and its condition
//! holds, it fires once its position vector is strictly smaller than every
//! sibling's — only then can no other edge match an earlier prefix. A fired
//! edge whose output contains ⊥ is a violation witnessed by the tuple;
//! otherwise fresh configurations are queued for the successor state.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::event::{Event, EventPattern};
use crate::mpe::{Assignment, CondError};
use crate::mpt::{Mpt, OutSym, StateId};
use crate::mstring::MMap;
use crate::pe::{step, Pe};

pub type TraceId = usize;

/// Append-only store of trace contents.
#[derive(Debug, Default, Clone)]
pub struct TraceStore {
    names: Vec<String>,
    ids: BTreeMap<String, TraceId>,
    contents: Vec<Vec<Event>>,
    online: Vec<bool>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MonitorError {
    #[error("unknown trace `{0}`")]
    UnknownTrace(String),
    #[error("trace `{0}` announced twice")]
    DuplicateTrace(String),
    #[error("append to closed trace `{0}`")]
    AppendAfterClose(String),
    #[error(
        "non-deterministic choice for tuple {tuple:?} in state `{state}`: matched edges to \
         {targets:?} are not ordered by consumption or priority"
    )]
    NondeterministicChoice { state: String, tuple: Vec<String>, targets: Vec<String> },
    #[error("monitor exceeded the pass budget of {0}")]
    PassBudgetExceeded(usize),
    #[error(transparent)]
    Cond(#[from] CondError),
}

impl TraceStore {
    pub fn new() -> Self {
        TraceStore::default()
    }

    pub fn add_trace(&mut self, name: &str) -> Result<TraceId, MonitorError> {
        if self.ids.contains_key(name) {
            return Err(MonitorError::DuplicateTrace(name.to_string()));
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        self.contents.push(Vec::new());
        self.online.push(true);
        Ok(id)
    }

    pub fn append(&mut self, name: &str, ev: Event) -> Result<(), MonitorError> {
        let id = self.id_of(name)?;
        if !self.online[id] {
            return Err(MonitorError::AppendAfterClose(name.to_string()));
        }
        self.contents[id].push(ev);
        Ok(())
    }

    /// Marks a trace finished; with `append_end` the end marker is appended
    /// as its final event first.
    pub fn close(&mut self, name: &str, append_end: bool) -> Result<(), MonitorError> {
        let id = self.id_of(name)?;
        if !self.online[id] {
            return Err(MonitorError::AppendAfterClose(name.to_string()));
        }
        if append_end {
            self.contents[id].push(Event::end_marker());
        }
        self.online[id] = false;
        Ok(())
    }

    pub fn id_of(&self, name: &str) -> Result<TraceId, MonitorError> {
        self.ids.get(name).copied().ok_or_else(|| MonitorError::UnknownTrace(name.to_string()))
    }

    pub fn name(&self, id: TraceId) -> &str {
        &self.names[id]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn content(&self, id: TraceId) -> &[Event] {
        &self.contents[id]
    }

    pub fn is_online(&self, id: TraceId) -> bool {
        self.online[id]
    }

    fn online_ids(&self) -> Vec<TraceId> {
        (0..self.names.len()).filter(|&i| self.online[i]).collect()
    }
}

/// σ restricted to one tuple: trace variables resolve to the full stored
/// contents, so conditions slice whole traces at absolute positions.
struct TupleAssignment<'a> {
    store: &'a TraceStore,
    vars: &'a [String],
    traces: &'a [TraceId],
}

impl Assignment for TupleAssignment<'_> {
    fn word(&self, var: &str) -> Option<&[Event]> {
        let i = self.vars.iter().position(|v| v == var)?;
        Some(self.store.content(self.traces[i]))
    }
}

/// The evaluation state of one edge of one transducer instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub edge_index: usize,
    /// Residual prefix expression per input variable.
    pub residuals: Vec<Pe>,
    /// Absolute read offsets per input variable.
    pub positions: Vec<usize>,
    pub mmap: MMap,
}

impl Configuration {
    pub fn matched(&self) -> bool {
        self.residuals.iter().all(|r| *r == Pe::Epsilon)
    }
}

/// All configurations of one instance in its current state, sharing the
/// tuple of traces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSet {
    /// Trace ids assigned to the input variables, in `in_vars` order.
    pub traces: Vec<TraceId>,
    pub state: StateId,
    /// Positions at which this set was spawned.
    pub origin_positions: Vec<usize>,
    pub configs: Vec<Configuration>,
}

/// One fresh configuration per outgoing edge of `state`, with empty m-maps
/// and the given start positions.
pub fn cfgs(mpt: &Mpt, state: StateId, traces: Vec<TraceId>, positions: Vec<usize>) -> ConfigSet {
    let configs = mpt
        .outgoing(state)
        .map(|(edge_index, edge)| {
            let residuals = mpt
                .in_vars
                .iter()
                .map(|v| edge.mpe.pe_for(v).cloned().unwrap_or(Pe::Epsilon))
                .collect();
            Configuration { edge_index, residuals, positions: positions.clone(), mmap: MMap::new() }
        })
        .collect();
    ConfigSet { traces, state, origin_positions: positions, configs }
}

/// Result of progressing a single configuration by at most one event per
/// trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Progress {
    /// Still needs events (or made partial progress).
    Progressed(Configuration),
    /// A step produced ⊥, or the expressions matched but the condition is
    /// false.
    Failed,
    /// All expressions matched and the condition holds; awaiting the
    /// shortest-match check.
    MatchedPending(Configuration),
}

/// Advances a configuration: one step on every bound trace that has an
/// unread event and an unfinished expression, then the condition check once
/// everything has matched.
pub fn progress_configuration(
    mpt: &Mpt,
    store: &TraceStore,
    set: &ConfigSet,
    cfg: &Configuration,
    steps: &mut u64,
) -> Result<Progress, MonitorError> {
    let mut next = cfg.clone();
    for i in 0..mpt.in_vars.len() {
        let content = store.content(set.traces[i]);
        if next.positions[i] < content.len() && next.residuals[i] != Pe::Epsilon {
            let r = step(&next.residuals[i], &next.mmap, &content[next.positions[i]], next.positions[i]);
            *steps += 1;
            next.residuals[i] = r.residual;
            next.mmap = r.mmap;
            next.positions[i] += 1;
            if next.residuals[i] == Pe::Bottom {
                return Ok(Progress::Failed);
            }
        }
    }
    if next.matched() {
        let sigma = TupleAssignment { store, vars: &mpt.in_vars, traces: &set.traces };
        let edge = &mpt.edges[next.edge_index];
        let holds = edge.mpe.condition().eval(&sigma, &next.mmap)?;
        if holds {
            return Ok(Progress::MatchedPending(next));
        }
        return Ok(Progress::Failed);
    }
    Ok(Progress::Progressed(next))
}

/// True iff the configuration's position vector is strictly smaller than
/// every other member's: pointwise ≤ with at least one strict <. Positions
/// only grow, so a strictly smaller vector can never be undercut later.
pub fn is_shortest_match(cfg: &Configuration, others: &[&Configuration]) -> bool {
    others.iter().all(|o| crate::mpt::vector_lt(&cfg.positions, &o.positions))
}

/// A batch of input activity pulled from an event source.
#[derive(Debug, Default, Clone)]
pub struct Batch {
    pub new_traces: Vec<String>,
    pub events: Vec<(String, Event)>,
    pub closed: Vec<String>,
    /// No further batches will follow; remaining online traces are closed.
    pub done: bool,
}

impl Batch {
    pub fn finished() -> Batch {
        Batch { done: true, ..Batch::default() }
    }
}

/// Abstract source of traces and events; the monitor pulls one batch per
/// main-loop pass.
pub trait EventSource {
    fn next_batch(&mut self) -> Batch;
}

/// Feeds complete traces one per pass: the k-th pull announces the k-th
/// trace with its entire contents and closes it.
pub struct TraceSetSource {
    traces: Vec<(String, Vec<Event>)>,
    next: usize,
}

impl TraceSetSource {
    pub fn new(traces: Vec<(String, Vec<Event>)>) -> Self {
        TraceSetSource { traces, next: 0 }
    }
}

impl EventSource for TraceSetSource {
    fn next_batch(&mut self) -> Batch {
        if self.next >= self.traces.len() {
            return Batch::finished();
        }
        let (name, events) = self.traces[self.next].clone();
        self.next += 1;
        Batch {
            new_traces: vec![name.clone()],
            events: events.into_iter().map(|e| (name.clone(), e)).collect(),
            closed: vec![name],
            done: self.next >= self.traces.len(),
        }
    }
}

/// Replays a pre-computed schedule of batches.
pub struct ScriptedSource {
    batches: std::collections::VecDeque<Batch>,
}

impl ScriptedSource {
    pub fn new(batches: Vec<Batch>) -> Self {
        ScriptedSource { batches: batches.into() }
    }
}

impl EventSource for ScriptedSource {
    fn next_batch(&mut self) -> Batch {
        self.batches.pop_front().unwrap_or_else(Batch::finished)
    }
}

/// A violation witness: the tuple, where its run stood, and the m-map of the
/// edge that emitted ⊥.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub traces: Vec<String>,
    pub positions: Vec<usize>,
    pub mmap: MMap,
    pub state: String,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "traces={} positions={} state={}",
            self.traces.join(","),
            self.positions.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(","),
            self.state
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Clean,
    Violation(Witness),
}

impl Verdict {
    pub fn is_clean(&self) -> bool {
        matches!(self, Verdict::Clean)
    }
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct MonitorStats {
    pub passes: usize,
    pub tuples_spawned: usize,
    pub sets_spawned: usize,
    pub max_workbag: usize,
    pub pe_steps: u64,
    pub events_ingested: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonitorReport {
    pub verdict: Verdict,
    /// All violations found (one per tuple); a singleton unless
    /// `collect_all` is set.
    pub violations: Vec<Witness>,
    pub stats: MonitorStats,
}

#[derive(Debug, Clone, Default)]
pub struct MonitorOptions {
    /// Instantiate only one tuple per unordered combination of distinct
    /// traces (valid for symmetric, reflexive properties).
    pub reduction: bool,
    /// Stop a tuple as soon as an edge emits ⊤.
    pub early_accept: bool,
    /// Append the `$` end marker when a trace closes.
    pub append_end: bool,
    /// Explore all matching edges instead of arbitrating shortest matches;
    /// works for non-deterministic transducers.
    pub nondet: bool,
    /// Keep monitoring after a violation and report every violating tuple.
    pub collect_all: bool,
    /// Abort after this many main-loop passes (test watchdog).
    pub max_passes: Option<usize>,
    /// Sweep independent configuration sets on worker threads.
    pub parallel: bool,
}

impl MonitorOptions {
    /// The profile used for observational-determinism experiments:
    /// reduction, early accept, and end markers all on.
    pub fn od_profile() -> Self {
        MonitorOptions {
            reduction: true,
            early_accept: true,
            append_end: true,
            ..MonitorOptions::default()
        }
    }
}

/// Ingests one batch: announces traces (spawning initial configuration sets
/// for every new tuple), appends events, and closes finished traces.
pub fn update_traces(
    mpt: &Mpt,
    store: &mut TraceStore,
    workbag: &mut Vec<ConfigSet>,
    batch: Batch,
    options: &MonitorOptions,
    stats: &mut MonitorStats,
) -> Result<(), MonitorError> {
    let k = mpt.in_vars.len();
    for name in &batch.new_traces {
        let id = store.add_trace(name)?;
        let all: Vec<TraceId> = (0..store.len()).collect();
        let tuples = tuples_containing(&all, id, k, options.reduction);
        for tuple in tuples {
            stats.tuples_spawned += 1;
            let set = cfgs(mpt, mpt.initial, tuple, vec![0; k]);
            if !set.configs.is_empty() {
                stats.sets_spawned += 1;
                workbag.push(set);
            }
        }
    }
    for (name, ev) in batch.events {
        store.append(&name, ev)?;
        stats.events_ingested += 1;
    }
    for name in &batch.closed {
        store.close(name, options.append_end)?;
    }
    if batch.done {
        for id in store.online_ids() {
            let name = store.name(id).to_string();
            store.close(&name, options.append_end)?;
        }
    }
    Ok(())
}

/// All k-tuples over `ids` that contain `new_id`. With reduction, only the
/// strictly increasing tuples (combinations of distinct traces) are kept.
fn tuples_containing(ids: &[TraceId], new_id: TraceId, k: usize, reduction: bool) -> Vec<Vec<TraceId>> {
    let mut out = Vec::new();
    if reduction {
        // new_id is the largest id; choose k-1 smaller ones.
        let smaller: Vec<TraceId> = ids.iter().copied().filter(|&i| i < new_id).collect();
        let mut combo = vec![0; k.saturating_sub(1)];
        fn choose(
            smaller: &[TraceId],
            k: usize,
            start: usize,
            combo: &mut Vec<TraceId>,
            new_id: TraceId,
            out: &mut Vec<Vec<TraceId>>,
        ) {
            if combo.len() == k - 1 {
                let mut tuple = combo.clone();
                tuple.push(new_id);
                out.push(tuple);
                return;
            }
            for i in start..smaller.len() {
                combo.push(smaller[i]);
                choose(smaller, k, i + 1, combo, new_id, out);
                combo.pop();
            }
        }
        if k == 1 {
            out.push(vec![new_id]);
        } else {
            combo.clear();
            choose(&smaller, k, 0, &mut combo, new_id, &mut out);
        }
    } else {
        let mut tuple = vec![0; k];
        fn fill(
            ids: &[TraceId],
            k: usize,
            depth: usize,
            tuple: &mut Vec<TraceId>,
            new_id: TraceId,
            out: &mut Vec<Vec<TraceId>>,
        ) {
            if depth == k {
                if tuple.contains(&new_id) {
                    out.push(tuple.clone());
                }
                return;
            }
            for &id in ids {
                tuple[depth] = id;
                fill(ids, k, depth + 1, tuple, new_id, out);
            }
        }
        fill(ids, k, 0, &mut tuple, new_id, &mut out);
    }
    out
}

/// What happened to one configuration set during a pass.
struct SetOutcome {
    kept: Option<ConfigSet>,
    spawned: Vec<ConfigSet>,
    violations: Vec<Witness>,
}

fn witness_for(mpt: &Mpt, store: &TraceStore, set: &ConfigSet, cfg: &Configuration) -> Witness {
    Witness {
        traces: set.traces.iter().map(|&t| store.name(t).to_string()).collect(),
        positions: cfg.positions.clone(),
        mmap: cfg.mmap.clone(),
        state: mpt.state_names[set.state].clone(),
    }
}

/// Sweeps one configuration set: progresses every member, fires shortest
/// matches, and drops members that failed or can never progress.
fn process_set(
    mpt: &Mpt,
    store: &TraceStore,
    set: ConfigSet,
    options: &MonitorOptions,
) -> Result<(SetOutcome, u64), MonitorError> {
    let mut steps: u64 = 0;
    let mut remaining: Vec<Configuration> = Vec::new();
    let mut spawned: Vec<ConfigSet> = Vec::new();
    let mut violations: Vec<Witness> = Vec::new();
    let k = mpt.in_vars.len();

    // Pass-start snapshot for the shortest-match comparison.
    let snapshot: Vec<(usize, Vec<usize>)> =
        set.configs.iter().map(|c| (c.edge_index, c.positions.clone())).collect();

    for (ci, cfg) in set.configs.iter().enumerate() {
        let progress = progress_configuration(mpt, store, &set, cfg, &mut steps)?;
        match progress {
            Progress::Failed => {}
            Progress::Progressed(next) => {
                // Keep only if some still-unfinished expression can see
                // another event; finished expressions never step again, so
                // unread events on their traces cannot help.
                let alive = (0..k).any(|i| {
                    next.residuals[i] != Pe::Epsilon
                        && (store.is_online(set.traces[i])
                            || next.positions[i] < store.content(set.traces[i]).len())
                });
                if alive {
                    remaining.push(next);
                }
            }
            Progress::MatchedPending(next) => {
                let shortest = options.nondet || {
                    let others: Vec<&Vec<usize>> = snapshot
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != ci)
                        .map(|(_, (_, p))| p)
                        .collect();
                    others.iter().all(|p| crate::mpt::vector_lt(&next.positions, p))
                };
                if !shortest {
                    remaining.push(next);
                    continue;
                }
                let edge = &mpt.edges[next.edge_index];
                if edge.output.contains(&OutSym::Bot) {
                    violations.push(witness_for(mpt, store, &set, &next));
                    if options.nondet {
                        // Other branches stay alive in the exploration.
                        continue;
                    }
                    // The tuple is settled; drop the whole set.
                    return Ok((SetOutcome { kept: None, spawned, violations }, steps));
                }
                if options.early_accept && edge.output.contains(&OutSym::Top) {
                    if options.nondet {
                        continue;
                    }
                    return Ok((SetOutcome { kept: None, spawned, violations }, steps));
                }
                let succ = cfgs(mpt, edge.to, set.traces.clone(), next.positions.clone());
                if !succ.configs.is_empty() {
                    spawned.push(succ);
                }
                if !options.nondet {
                    // Shortest match found: the remaining members are moot.
                    return Ok((SetOutcome { kept: None, spawned, violations }, steps));
                }
            }
        }
    }

    // Deadlock resolution: every survivor has matched, so positions are
    // frozen; without a unique minimum the transducer was not deterministic.
    if !options.nondet && !remaining.is_empty() && remaining.iter().all(|c| c.matched()) {
        let fired = resolve_stalemate(mpt, store, &set, &remaining, options)?;
        if let Some(idx) = fired {
            let cfg = &remaining[idx];
            let edge = &mpt.edges[cfg.edge_index];
            if edge.output.contains(&OutSym::Bot) {
                violations.push(witness_for(mpt, store, &set, cfg));
                return Ok((SetOutcome { kept: None, spawned, violations }, steps));
            }
            if !(options.early_accept && edge.output.contains(&OutSym::Top)) {
                let succ = cfgs(mpt, edge.to, set.traces.clone(), cfg.positions.clone());
                if !succ.configs.is_empty() {
                    spawned.push(succ);
                }
            }
            return Ok((SetOutcome { kept: None, spawned, violations }, steps));
        }
    }

    let kept = if remaining.is_empty() {
        None
    } else {
        Some(ConfigSet { configs: remaining, ..set })
    };
    Ok((SetOutcome { kept, spawned, violations }, steps))
}

/// All members matched and none is strictly minimal (that case fired during
/// the sweep). A sole survivor fires; otherwise priorities decide, and a
/// residual tie is an error in deterministic mode or resolved by edge order.
fn resolve_stalemate(
    mpt: &Mpt,
    store: &TraceStore,
    set: &ConfigSet,
    remaining: &[Configuration],
    _options: &MonitorOptions,
) -> Result<Option<usize>, MonitorError> {
    if remaining.len() == 1 {
        return Ok(Some(0));
    }
    // A strictly minimal member fires even with siblings present.
    for (i, cfg) in remaining.iter().enumerate() {
        let smaller = remaining
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .all(|(_, o)| crate::mpt::vector_lt(&cfg.positions, &o.positions));
        if smaller {
            return Ok(Some(i));
        }
    }
    // Minimal (undominated) members compete on priority.
    let minimal: Vec<usize> = (0..remaining.len())
        .filter(|&i| {
            !remaining
                .iter()
                .any(|o| crate::mpt::vector_lt(&o.positions, &remaining[i].positions))
        })
        .collect();
    let best_priority = minimal
        .iter()
        .map(|&i| mpt.edges[remaining[i].edge_index].priority)
        .min()
        .expect("non-empty");
    let best: Vec<usize> = minimal
        .into_iter()
        .filter(|&i| mpt.edges[remaining[i].edge_index].priority == best_priority)
        .collect();
    if best.len() == 1 {
        return Ok(Some(best[0]));
    }
    if mpt.deterministic_hint {
        return Err(MonitorError::NondeterministicChoice {
            state: mpt.state_names[set.state].clone(),
            tuple: set.traces.iter().map(|&t| store.name(t).to_string()).collect(),
            targets: best
                .iter()
                .map(|&i| mpt.state_names[mpt.edges[remaining[i].edge_index].to].clone())
                .collect(),
        });
    }
    Ok(Some(best[0]))
}

/// Runs the online monitoring algorithm until the workbag drains and the
/// source is exhausted, or a violation is found (unless collecting all).
pub fn monitor_loop(
    mpt: &Mpt,
    source: &mut dyn EventSource,
    options: &MonitorOptions,
) -> Result<MonitorReport, MonitorError> {
    let mut store = TraceStore::new();
    let mut workbag: Vec<ConfigSet> = Vec::new();
    let mut stats = MonitorStats::default();
    let mut violations: Vec<Witness> = Vec::new();
    let mut source_done = false;

    loop {
        stats.passes += 1;
        if let Some(budget) = options.max_passes {
            if stats.passes > budget {
                return Err(MonitorError::PassBudgetExceeded(budget));
            }
        }
        if !source_done {
            let batch = source.next_batch();
            source_done = batch.done;
            update_traces(mpt, &mut store, &mut workbag, batch, options, &mut stats)?;
        }
        stats.max_workbag = stats.max_workbag.max(workbag.len());

        let sets: Vec<ConfigSet> = std::mem::take(&mut workbag);
        let outcomes = sweep(mpt, &store, sets, options)?;
        let mut finished = false;
        for (outcome, steps) in outcomes {
            stats.pe_steps += steps;
            for w in outcome.violations {
                if !violations.iter().any(|v| v.traces == w.traces) {
                    violations.push(w);
                }
                if !options.collect_all {
                    finished = true;
                }
            }
            if let Some(kept) = outcome.kept {
                workbag.push(kept);
            }
            for s in outcome.spawned {
                stats.sets_spawned += 1;
                workbag.push(s);
            }
        }
        stats.max_workbag = stats.max_workbag.max(workbag.len());
        if finished {
            break;
        }
        if workbag.is_empty() && source_done {
            break;
        }
    }

    let verdict = match violations.first() {
        Some(w) => Verdict::Violation(w.clone()),
        None => Verdict::Clean,
    };
    Ok(MonitorReport { verdict, violations, stats })
}

/// Processes the sets of one pass, optionally on worker threads; outcomes
/// keep the input order either way.
fn sweep(
    mpt: &Mpt,
    store: &TraceStore,
    sets: Vec<ConfigSet>,
    options: &MonitorOptions,
) -> Result<Vec<(SetOutcome, u64)>, MonitorError> {
    if !options.parallel || sets.len() < 64 {
        return sets.into_iter().map(|s| process_set(mpt, store, s, options)).collect();
    }
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(2).min(8);
    let chunk_size = sets.len().div_ceil(workers);
    let chunks: Vec<Vec<ConfigSet>> = sets
        .chunks(chunk_size)
        .map(|c| c.to_vec())
        .collect();
    let results: Vec<Result<Vec<(SetOutcome, u64)>, MonitorError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|s| process_set(mpt, store, s, options))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}

/// Convenience wrapper: monitor a fixed set of complete traces.
pub fn monitor_traces(
    mpt: &Mpt,
    traces: Vec<(String, Vec<Event>)>,
    options: &MonitorOptions,
) -> Result<MonitorReport, MonitorError> {
    let mut source = TraceSetSource::new(traces);
    monitor_loop(mpt, &mut source, options)
}

/// The non-deterministic exploration variant: matched edges fire without
/// shortest-match arbitration and sibling configurations survive, so every
/// branch of a non-deterministic transducer is followed.
pub fn nondet_monitor_loop(
    mpt: &Mpt,
    source: &mut dyn EventSource,
    options: &MonitorOptions,
) -> Result<MonitorReport, MonitorError> {
    let opts = MonitorOptions { nondet: true, ..options.clone() };
    monitor_loop(mpt, source, &opts)
}

// ---------------------------------------------------------------------------
// Independent observational-determinism oracle

fn is_low_io(ev: &Event) -> bool {
    EventPattern::low_input().matches(ev) || EventPattern::low_output().matches(ev)
}

fn is_low_output(ev: &Event) -> bool {
    EventPattern::low_output().matches(ev)
}

/// Direct decision of asynchronous observational determinism for one pair:
/// project both traces to their low inputs/outputs (with an end marker), then
/// walk the projections together. Violation when the next differing pair is
/// output-against-output-or-end.
fn od_pair_violates(t1: &[Event], t2: &[Event]) -> bool {
    let project = |t: &[Event]| -> Vec<Event> {
        let mut p: Vec<Event> = t.iter().filter(|e| is_low_io(e)).cloned().collect();
        p.push(Event::end_marker());
        p
    };
    let p1 = project(t1);
    let p2 = project(t2);
    let mut i = 0;
    let mut j = 0;
    loop {
        let e1 = &p1[i];
        let e2 = &p2[j];
        if e1 == e2 && !e1.is_end_marker() {
            i += 1;
            j += 1;
            continue;
        }
        let out_or_end = |e: &Event| is_low_output(e) || e.is_end_marker();
        return e1 != e2 && out_or_end(e1) && out_or_end(e2);
    }
}

/// Brute-force differential oracle: the violating unordered pairs of a trace
/// corpus under asynchronous observational determinism.
pub fn brute_force_od(traces: &[(String, Vec<Event>)]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for i in 0..traces.len() {
        for j in (i + 1)..traces.len() {
            if od_pair_violates(&traces[i].1, &traces[j].1) {
                out.push((traces[i].0.clone(), traces[j].0.clone()));
            }
        }
    }
    out
}
