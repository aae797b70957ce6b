//! Translation of a prefix expression into its finite derivative transducer.
//!
//! The states are the expressions reachable from the initial one under the
//! one-step relation, taken modulo the usual normalizations (ε-concatenation,
//! dropped ⊥-disjuncts) plus a canonical ordering of disjuncts and
//! right-nesting of concatenations. The set is finite; the accepting state is
//! ε and the sink is ⊥.
//!
//! Atoms may be parameterized patterns, so edges are labeled by *letter
//! classes*: events are grouped by which atom patterns they satisfy. The
//! position `p` stays a parameter; edges carry m-map templates in `p` that
//! are instantiated when the transducer runs on a concrete word.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::event::{Event, EventPattern};
use crate::mstring::{Label, MMap};
use crate::pe::{apply_delta, step_kernel, PairKind, Pe, StepDelta};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("alphabet incomplete: no representative event matches atom pattern `{0}`")]
    AlphabetIncomplete(String),
    #[error("event `{0}` does not correspond to any letter class of the transducer")]
    UnknownLetter(String),
    #[error("derivative closure exceeded {0} states")]
    StateExplosion(usize),
}

/// A block of the alphabet partition: all events satisfying exactly the same
/// atom patterns of the compiled expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LetterClass {
    pub name: String,
    pub reps: Vec<Event>,
    /// Which of the expression's atom patterns this class satisfies.
    pub hits: Vec<bool>,
}

/// M-map emission of an edge with the position kept symbolic.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct MMapTemplate(BTreeMap<Label, PairKind>);

impl MMapTemplate {
    fn from_delta(delta: &StepDelta) -> Self {
        MMapTemplate(delta.iter().cloned().collect())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &PairKind)> {
        self.0.iter()
    }

    /// Instantiates the template at a concrete position.
    pub fn instantiate(&self, base: &MMap, p: usize) -> MMap {
        let delta: StepDelta = self.0.iter().map(|(l, k)| (l.clone(), *k)).collect();
        apply_delta(base, &delta, p)
    }
}

impl fmt::Display for MMapTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "∅");
        }
        write!(f, "{{")?;
        for (i, (label, kind)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            let pair = match kind {
                PairKind::Open => "(p,⊥)",
                PairKind::Close => "(⊥,p)",
                PairKind::Single => "(p,p)",
            };
            write!(f, "{label}↦{pair}")?;
        }
        write!(f, "}}")
    }
}

/// The closure of an expression under the one-step relation, together with
/// its per-class transitions.
#[derive(Debug, Clone)]
pub struct DerivativeSet {
    /// Canonical expressions; index is the state id, 0 is the initial state.
    pub exprs: Vec<Pe>,
    /// Atom patterns of the compiled expression, in collection order; the
    /// hit vectors of classes and events refer to this list.
    pub atoms: Vec<EventPattern>,
    pub classes: Vec<LetterClass>,
    /// `(state, class) → (successor, emission)`.
    pub transitions: BTreeMap<(usize, usize), (usize, MMapTemplate)>,
}

impl DerivativeSet {
    pub fn state_of(&self, pe: &Pe) -> Option<usize> {
        let c = canonical(pe);
        self.exprs.iter().position(|e| *e == c)
    }

    pub fn accepting(&self) -> Option<usize> {
        self.exprs.iter().position(|e| *e == Pe::Epsilon)
    }

    pub fn sink(&self) -> Option<usize> {
        self.exprs.iter().position(|e| *e == Pe::Bottom)
    }

    pub fn class_of(&self, ev: &Event) -> Result<usize, CompileError> {
        let hits: Vec<bool> = self.atoms.iter().map(|p| p.matches(ev)).collect();
        self.classes
            .iter()
            .position(|c| c.hits == hits)
            .ok_or_else(|| CompileError::UnknownLetter(ev.to_string()))
    }

    /// Transitions grouped by (source, target, emission), with the classes
    /// taking that edge collected together. Edges out of ε and ⊥ (which only
    /// feed the sink) are omitted, mirroring the usual diagrams.
    pub fn grouped_live_transitions(&self) -> Vec<GroupedTransition> {
        let accepting = self.accepting();
        let sink = self.sink();
        let mut groups: BTreeMap<(usize, usize, MMapTemplate), Vec<usize>> = BTreeMap::new();
        for ((state, class), (succ, template)) in &self.transitions {
            if Some(*state) == accepting || Some(*state) == sink {
                continue;
            }
            groups.entry((*state, *succ, template.clone())).or_default().push(*class);
        }
        groups
            .into_iter()
            .map(|((from, to, emit), classes)| GroupedTransition { from, to, emit, classes })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupedTransition {
    pub from: usize,
    pub to: usize,
    pub emit: MMapTemplate,
    pub classes: Vec<usize>,
}

/// Canonical form for state deduplication: disjuncts flattened, sorted and
/// deduplicated; concatenations right-nested with ε dropped.
pub fn canonical(pe: &Pe) -> Pe {
    match pe {
        Pe::Epsilon | Pe::Bottom | Pe::Atom(_) => pe.clone(),
        Pe::Concat(..) => {
            let mut items = Vec::new();
            flatten_concat(pe, &mut items);
            items.into_iter().rev().fold(Pe::Epsilon, |acc, it| Pe::concat(it, acc))
        }
        Pe::Or(..) => {
            let mut items = Vec::new();
            flatten_or(pe, &mut items);
            items.sort();
            items.dedup();
            let mut iter = items.into_iter().rev();
            let last = iter.next().expect("non-empty disjunction");
            iter.fold(last, |acc, it| Pe::or(it, acc))
        }
        Pe::Iter(a, b) => Pe::iter(canonical(a), canonical(b)),
        Pe::Labeled(l, a) => Pe::Labeled(l.clone(), Box::new(canonical(a))),
        Pe::InFlight(l, a) => Pe::InFlight(l.clone(), Box::new(canonical(a))),
    }
}

fn flatten_concat(pe: &Pe, out: &mut Vec<Pe>) {
    match pe {
        Pe::Concat(a, b) => {
            flatten_concat(a, out);
            flatten_concat(b, out);
        }
        Pe::Epsilon => {}
        other => out.push(canonical(other)),
    }
}

fn flatten_or(pe: &Pe, out: &mut Vec<Pe>) {
    match pe {
        Pe::Or(a, b) => {
            flatten_or(a, out);
            flatten_or(b, out);
        }
        other => out.push(canonical(other)),
    }
}

fn collect_atoms(pe: &Pe, out: &mut Vec<EventPattern>) {
    match pe {
        Pe::Atom(p) => {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        Pe::Epsilon | Pe::Bottom => {}
        Pe::Concat(a, b) | Pe::Or(a, b) | Pe::Iter(a, b) => {
            collect_atoms(a, out);
            collect_atoms(b, out);
        }
        Pe::Labeled(_, a) | Pe::InFlight(_, a) => collect_atoms(a, out),
    }
}

/// Derives the letter classes induced by the atom patterns on the given
/// representative events.
fn letter_classes(
    atoms: &[EventPattern],
    alphabet: &[Event],
) -> Result<Vec<LetterClass>, CompileError> {
    let mut classes: Vec<LetterClass> = Vec::new();
    for ev in alphabet {
        let hits: Vec<bool> = atoms.iter().map(|p| p.matches(ev)).collect();
        match classes.iter_mut().find(|c| c.hits == hits) {
            Some(class) => {
                class.name = format!("{},{}", class.name, ev);
                class.reps.push(ev.clone());
            }
            None => {
                classes.push(LetterClass { name: ev.to_string(), reps: vec![ev.clone()], hits })
            }
        }
    }
    for (i, pat) in atoms.iter().enumerate() {
        if !classes.iter().any(|c| c.hits[i]) {
            return Err(CompileError::AlphabetIncomplete(pat.to_string()));
        }
    }
    Ok(classes)
}

const MAX_STATES: usize = 100_000;

/// Computes `D_p(pe)`: the closure of the expression under the one-step
/// relation over the letter classes of the given alphabet. The closure is
/// finite and includes ε and ⊥ when reachable.
pub fn derivative_closure(pe: &Pe, alphabet: &[Event]) -> Result<DerivativeSet, CompileError> {
    let mut atoms = Vec::new();
    collect_atoms(pe, &mut atoms);
    let classes = letter_classes(&atoms, alphabet)?;

    let start = canonical(pe);
    let mut exprs = vec![start];
    let mut transitions = BTreeMap::new();
    let mut queue = vec![0usize];

    while let Some(state) = queue.pop() {
        let expr = exprs[state].clone();
        for (ci, class) in classes.iter().enumerate() {
            let hits = |pat: &EventPattern| {
                atoms.iter().position(|a| a == pat).map(|i| class.hits[i]).unwrap_or(false)
            };
            let (residual, delta, _) = step_kernel(&expr, &hits);
            let succ_expr = canonical(&residual);
            let succ = match exprs.iter().position(|e| *e == succ_expr) {
                Some(i) => i,
                None => {
                    exprs.push(succ_expr);
                    if exprs.len() > MAX_STATES {
                        return Err(CompileError::StateExplosion(MAX_STATES));
                    }
                    queue.push(exprs.len() - 1);
                    exprs.len() - 1
                }
            };
            transitions.insert((state, ci), (succ, MMapTemplate::from_delta(&delta)));
        }
    }
    Ok(DerivativeSet { exprs, atoms, classes, transitions })
}

/// A prefix expression compiled to its prefix-free finite transducer.
#[derive(Debug, Clone)]
pub struct PeTransducer {
    pub set: DerivativeSet,
    pub initial: usize,
    pub accepting: Option<usize>,
    pub sink: Option<usize>,
}

/// Compiles the expression over the alphabet described by representative
/// events. The resulting transducer replays the evaluation function exactly.
pub fn compile(pe: &Pe, alphabet: &[Event]) -> Result<PeTransducer, CompileError> {
    let set = derivative_closure(pe, alphabet)?;
    let accepting = set.accepting();
    let sink = set.sink();
    Ok(PeTransducer { set, initial: 0, accepting, sink })
}

impl PeTransducer {
    /// Executes the transducer on a word, instantiating edge templates at
    /// the concrete positions. Reaching the sink empties the m-map, matching
    /// the evaluation function.
    pub fn run(&self, word: &[Event]) -> Result<(usize, MMap), CompileError> {
        let mut state = self.initial;
        let mut mmap = MMap::new();
        for (p, ev) in word.iter().enumerate() {
            let class = self.set.class_of(ev)?;
            let (succ, template) =
                self.set.transitions.get(&(state, class)).expect("closed transition table");
            state = *succ;
            if Some(state) == self.sink {
                mmap = MMap::new();
            } else {
                mmap = template.instantiate(&mmap, p);
            }
        }
        Ok((state, mmap))
    }

    /// Deterministic DOT rendering; the accepting state is double-circled.
    pub fn export_dot(&self, hide_sink: bool) -> String {
        let mut out =
            String::from("digraph pe {\n  rankdir=LR;\n  node [shape=box, style=rounded];\n");
        for (i, expr) in self.set.exprs.iter().enumerate() {
            if hide_sink && Some(i) == self.sink {
                continue;
            }
            let shape = if Some(i) == self.accepting {
                ", shape=doublecircle"
            } else if Some(i) == self.sink {
                ", shape=circle"
            } else {
                ""
            };
            out.push_str(&format!(
                "  s{} [label=\"{}\"{}];\n",
                i,
                escape(&expr.to_string()),
                shape
            ));
        }
        out.push_str(&format!("  init [shape=point]; init -> s{};\n", self.initial));
        for group in self.set.grouped_live_transitions() {
            if hide_sink && Some(group.to) == self.sink {
                continue;
            }
            let label = if group.classes.len() == self.set.classes.len() {
                format!("*/{}", group.emit)
            } else {
                let letters = group
                    .classes
                    .iter()
                    .map(|&c| self.set.classes[c].name.clone())
                    .collect::<Vec<_>>()
                    .join(",");
                format!("{},p/{}", letters, group.emit)
            };
            out.push_str(&format!(
                "  s{} -> s{} [label=\"{}\"];\n",
                group.from,
                group.to,
                escape(&label)
            ));
        }
        out.push_str("}\n");
        out
    }

    /// Deterministic JSON dump of states, classes and transitions.
    pub fn export_json(&self) -> serde_json::Value {
        let states: Vec<_> = self
            .set
            .exprs
            .iter()
            .enumerate()
            .map(|(i, e)| {
                serde_json::json!({
                    "id": i,
                    "expr": e.to_string(),
                    "initial": i == self.initial,
                    "accepting": Some(i) == self.accepting,
                    "sink": Some(i) == self.sink,
                })
            })
            .collect();
        let classes: Vec<_> = self
            .set
            .classes
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "reps": c.reps.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
                })
            })
            .collect();
        let transitions: Vec<_> = self
            .set
            .transitions
            .iter()
            .map(|((from, class), (to, emit))| {
                let emits: BTreeMap<String, String> = emit
                    .iter()
                    .map(|(l, k)| {
                        let pair = match k {
                            PairKind::Open => "(p,⊥)",
                            PairKind::Close => "(⊥,p)",
                            PairKind::Single => "(p,p)",
                        };
                        (l.clone(), pair.to_string())
                    })
                    .collect();
                serde_json::json!({
                    "from": from,
                    "class": self.set.classes[*class].name,
                    "to": to,
                    "emit": emits,
                })
            })
            .collect();
        serde_json::json!({
            "states": states,
            "classes": classes,
            "transitions": transitions,
        })
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
