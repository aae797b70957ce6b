//! Multi-trace prefix transducers: finite-state machines whose transitions
//! are guarded by multi-trace prefix expressions and append constant words
//! to output traces.
//!
//! A run repeatedly picks a transition whose expression is satisfied by the
//! current trace assignment, removes the matched prefixes from the input
//! words, and concatenates the transition's output assignment onto the
//! accumulated output. Among simultaneously satisfiable transitions the one
//! with the pointwise-smallest consumption wins; remaining ties fall back to
//! edge priorities.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::event::{Event, EventPattern};
use crate::mpe::{CondError, Mpe, MpeMatch, TraceVar};
use crate::mstring::MMap;

/// A symbol of an output alphabet. The verdict symbols ⊥ and ⊤ are
/// distinguished because monitoring keys on them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutSym {
    Bot,
    Top,
    Sym(Event),
}

impl fmt::Display for OutSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutSym::Bot => write!(f, "⊥"),
            OutSym::Top => write!(f, "⊤"),
            OutSym::Sym(e) => write!(f, "{e}"),
        }
    }
}

/// Partial map from output trace variables to words over the output
/// alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputAssignment(BTreeMap<TraceVar, Vec<OutSym>>);

impl OutputAssignment {
    pub fn new() -> Self {
        OutputAssignment(BTreeMap::new())
    }

    pub fn assign(var: impl Into<TraceVar>, word: Vec<OutSym>) -> Self {
        let mut m = BTreeMap::new();
        m.insert(var.into(), word);
        OutputAssignment(m)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, var: &str) -> Option<&[OutSym]> {
        self.0.get(var).map(|w| w.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TraceVar, &Vec<OutSym>)> {
        self.0.iter()
    }

    pub fn contains(&self, sym: &OutSym) -> bool {
        self.0.values().any(|w| w.contains(sym))
    }

    /// Concatenation of output assignments: per-variable word concatenation
    /// with missing entries read as ε.
    pub fn concat(&self, rhs: &OutputAssignment) -> OutputAssignment {
        let mut out = self.0.clone();
        for (var, word) in &rhs.0 {
            out.entry(var.clone()).or_default().extend(word.iter().cloned());
        }
        OutputAssignment(out)
    }
}

/// ν1 · ν2, the three-case concatenation.
pub fn output_concat(n1: &OutputAssignment, n2: &OutputAssignment) -> OutputAssignment {
    n1.concat(n2)
}

impl fmt::Display for OutputAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (var, word)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{var}↦")?;
            if word.is_empty() {
                write!(f, "ε")?;
            }
            for sym in word {
                write!(f, "{sym}")?;
            }
        }
        write!(f, "}}")
    }
}

pub type StateId = usize;

/// A transition of the transducer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: StateId,
    pub mpe: Mpe,
    pub output: OutputAssignment,
    pub to: StateId,
    /// Tie-breaker among simultaneously matching edges with incomparable
    /// consumption; lower value wins.
    pub priority: i64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MptError {
    #[error("state `{0}` referenced by an edge is not declared")]
    UnknownState(String),
    #[error("initial state `{0}` is not declared")]
    UnknownInitial(String),
    #[error("edge from `{from}` binds trace variable `{var}` outside the input variables")]
    UnknownTraceVar { from: String, var: String },
    #[error("edge from `{from}` assigns output variable `{var}` outside the output variables")]
    UnknownOutputVar { from: String, var: String },
    #[error(
        "non-deterministic choice in state `{state}`: edges to {targets:?} match with equal \
         consumption and priority"
    )]
    NondeterministicChoice { state: String, targets: Vec<String> },
    #[error(transparent)]
    Cond(#[from] CondError),
}

/// A multi-trace prefix transducer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mpt {
    pub in_vars: Vec<TraceVar>,
    pub out_vars: Vec<TraceVar>,
    /// Optional description of the input alphabet (representative patterns);
    /// informational and used by the compiler front end.
    pub in_alphabet: Vec<EventPattern>,
    pub state_names: Vec<String>,
    pub initial: StateId,
    pub edges: Vec<Edge>,
    /// The transducer is trusted to be deterministic; ties beyond priority
    /// are then reported as errors instead of resolved silently.
    pub deterministic_hint: bool,
}

impl Mpt {
    pub fn validate(&self) -> Result<(), MptError> {
        if self.initial >= self.state_names.len() {
            return Err(MptError::UnknownInitial(format!("#{}", self.initial)));
        }
        for edge in &self.edges {
            for id in [edge.from, edge.to] {
                if id >= self.state_names.len() {
                    return Err(MptError::UnknownState(format!("#{id}")));
                }
            }
            for (var, _) in edge.mpe.bindings() {
                if !self.in_vars.contains(var) {
                    return Err(MptError::UnknownTraceVar {
                        from: self.state_names[edge.from].clone(),
                        var: var.clone(),
                    });
                }
            }
            for (var, _) in edge.output.iter() {
                if !self.out_vars.contains(var) {
                    return Err(MptError::UnknownOutputVar {
                        from: self.state_names[edge.from].clone(),
                        var: var.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn state_name(&self, id: StateId) -> &str {
        &self.state_names[id]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn outgoing(&self, state: StateId) -> impl Iterator<Item = (usize, &Edge)> {
        self.edges.iter().enumerate().filter(move |(_, e)| e.from == state)
    }
}

/// Evaluates an edge's expression against the assignment; thin wrapper kept
/// so the monitor and the offline runner share one entry point.
pub fn check_edge<A: crate::mpe::Assignment>(
    edge: &Edge,
    sigma: &A,
) -> Result<Option<MpeMatch>, CondError> {
    edge.mpe.satisfied(sigma)
}

/// One accepted transition of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunStep {
    pub state: StateId,
    pub edge_index: usize,
    /// Absolute per-trace offsets before and after the step, keyed in
    /// `in_vars` order.
    pub consumed: Vec<(TraceVar, usize, usize)>,
    pub output: OutputAssignment,
    pub mmap: MMap,
}

/// A finished offline run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    pub steps: Vec<RunStep>,
    pub final_state: StateId,
    /// Offsets reached per trace variable.
    pub positions: Vec<(TraceVar, usize)>,
    pub output: OutputAssignment,
    /// No edge matched while input remained.
    pub stuck: bool,
}

impl Run {
    /// Cumulative per-trace boundaries after each step, in `in_vars` order.
    pub fn boundaries(&self) -> Vec<Vec<usize>> {
        self.steps.iter().map(|s| s.consumed.iter().map(|(_, _, to)| *to).collect()).collect()
    }
}

/// Runs the transducer on complete words until it gets stuck, consumes all
/// input, or reaches `max_steps`.
pub fn run_offline(
    mpt: &Mpt,
    sigma0: &BTreeMap<String, Vec<Event>>,
    max_steps: usize,
) -> Result<Run, MptError> {
    let mut positions: Vec<usize> = vec![0; mpt.in_vars.len()];
    let words: Vec<&[Event]> = mpt
        .in_vars
        .iter()
        .map(|v| {
            sigma0
                .get(v)
                .map(|w| w.as_slice())
                .ok_or_else(|| CondError::UnboundTraceVar(v.clone()))
        })
        .collect::<Result<_, CondError>>()?;

    let mut state = mpt.initial;
    let mut output = OutputAssignment::new();
    let mut steps = Vec::new();

    for _ in 0..max_steps {
        if words.iter().zip(&positions).all(|(w, &p)| p == w.len()) {
            break;
        }
        let sigma: Vec<(String, &[Event])> = mpt
            .in_vars
            .iter()
            .zip(words.iter().zip(&positions))
            .map(|(v, (w, &p))| (v.clone(), &w[p..]))
            .collect();

        let mut matches: Vec<(usize, MpeMatch, Vec<usize>)> = Vec::new();
        for (idx, edge) in mpt.outgoing(state) {
            if let Some(m) = check_edge(edge, &sigma)? {
                if m.verdict {
                    let consumption =
                        mpt.in_vars.iter().map(|v| m.consumed_for(v).unwrap_or(0)).collect();
                    matches.push((idx, m, consumption));
                }
            }
        }
        if matches.is_empty() {
            return Ok(Run {
                steps,
                final_state: state,
                positions: mpt.in_vars.iter().cloned().zip(positions).collect(),
                output,
                stuck: true,
            });
        }

        let chosen = select_edge(mpt, state, &matches)?;
        let (edge_idx, m, consumption) = &matches[chosen];
        let edge = &mpt.edges[*edge_idx];
        let consumed: Vec<(TraceVar, usize, usize)> = mpt
            .in_vars
            .iter()
            .zip(positions.iter().zip(consumption))
            .map(|(v, (&from, &n))| (v.clone(), from, from + n))
            .collect();
        for (p, n) in positions.iter_mut().zip(consumption) {
            *p += n;
        }
        output = output.concat(&edge.output);
        steps.push(RunStep {
            state,
            edge_index: *edge_idx,
            consumed,
            output: edge.output.clone(),
            mmap: m.mmap.clone(),
        });
        state = edge.to;
    }

    Ok(Run {
        steps,
        final_state: state,
        positions: mpt.in_vars.iter().cloned().zip(positions).collect(),
        output,
        stuck: false,
    })
}

/// Strict pointwise vector order: `a < b`.
pub fn vector_lt(a: &[usize], b: &[usize]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Picks the matching edge to take: the unique consumption-minimal one if it
/// exists, otherwise the best priority among minimal candidates, otherwise
/// an error (deterministic mode) or the first listed (permissive mode).
fn select_edge(
    mpt: &Mpt,
    state: StateId,
    matches: &[(usize, MpeMatch, Vec<usize>)],
) -> Result<usize, MptError> {
    if matches.len() == 1 {
        return Ok(0);
    }
    // Candidates not strictly dominated by another match.
    let minimal: Vec<usize> = (0..matches.len())
        .filter(|&i| !matches.iter().any(|other| vector_lt(&other.2, &matches[i].2)))
        .collect();
    let unique_min = minimal
        .iter()
        .copied()
        .find(|&i| minimal.iter().all(|&j| j == i || vector_lt(&matches[i].2, &matches[j].2)));
    if let Some(i) = unique_min {
        return Ok(i);
    }
    let best_priority =
        minimal.iter().map(|&i| mpt.edges[matches[i].0].priority).min().expect("non-empty");
    let best: Vec<usize> = minimal
        .into_iter()
        .filter(|&i| mpt.edges[matches[i].0].priority == best_priority)
        .collect();
    if best.len() == 1 {
        return Ok(best[0]);
    }
    if mpt.deterministic_hint {
        return Err(MptError::NondeterministicChoice {
            state: mpt.state_names[state].clone(),
            targets: best
                .iter()
                .map(|&i| mpt.state_names[mpt.edges[matches[i].0].to].clone())
                .collect(),
        });
    }
    Ok(best[0])
}
