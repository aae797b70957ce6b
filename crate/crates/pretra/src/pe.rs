//! Prefix expressions and their derivative-style evaluation.
//!
//! A prefix expression deterministically matches the shortest non-empty
//! prefix of a word. Evaluation rewrites the expression one letter at a time
//! through the one-step relation; the rewrite also emits match-position
//! information for labeled subexpressions, accumulated in an [`MMap`].
//!
//! The iteration form `lhs U rhs` repeats `lhs` until `rhs` (which matches
//! exactly one letter) matches; `rhs` is tried first on every iteration
//! boundary. Two forms exist only during evaluation: `Bottom` (a failed
//! match) and `InFlight` (a labeled subexpression whose match is open).

use std::fmt;

use thiserror::Error;

use crate::event::{Event, EventPattern};
use crate::mstring::{Label, MMap, MPair, MString};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pe {
    Epsilon,
    Bottom,
    Atom(EventPattern),
    Concat(Box<Pe>, Box<Pe>),
    Or(Box<Pe>, Box<Pe>),
    /// Binary iteration `lhs U rhs`.
    Iter(Box<Pe>, Box<Pe>),
    Labeled(Label, Box<Pe>),
    /// A labeled subexpression currently being matched; never user-written.
    InFlight(Label, Box<Pe>),
}

impl Pe {
    pub fn atom(pattern: EventPattern) -> Pe {
        Pe::Atom(pattern)
    }

    /// A bare-tag letter, e.g. `a`.
    pub fn letter(tag: &str) -> Pe {
        Pe::Atom(EventPattern::tag(tag))
    }

    /// Concatenation normalized by `ε·α = α·ε = α` and `⊥·α = ⊥`.
    pub fn concat(lhs: Pe, rhs: Pe) -> Pe {
        match (lhs, rhs) {
            (Pe::Epsilon, r) => r,
            (l, Pe::Epsilon) => l,
            (Pe::Bottom, _) => Pe::Bottom,
            (l, r) => Pe::Concat(Box::new(l), Box::new(r)),
        }
    }

    pub fn or(lhs: Pe, rhs: Pe) -> Pe {
        Pe::Or(Box::new(lhs), Box::new(rhs))
    }

    pub fn iter(lhs: Pe, rhs: Pe) -> Pe {
        Pe::Iter(Box::new(lhs), Box::new(rhs))
    }

    pub fn labeled(label: impl Into<Label>, inner: Pe) -> Pe {
        Pe::Labeled(label.into(), Box::new(inner))
    }

    /// Concatenates a word of expressions, right-nested.
    pub fn seq(items: Vec<Pe>) -> Pe {
        items.into_iter().rev().fold(Pe::Epsilon, |acc, it| Pe::concat(it, acc))
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels(&self, out: &mut Vec<Label>) {
        match self {
            Pe::Epsilon | Pe::Bottom | Pe::Atom(_) => {}
            Pe::Concat(a, b) | Pe::Or(a, b) | Pe::Iter(a, b) => {
                a.collect_labels(out);
                b.collect_labels(out);
            }
            Pe::Labeled(l, a) | Pe::InFlight(l, a) => {
                out.push(l.clone());
                a.collect_labels(out);
            }
        }
    }

    /// Checks the invariants of user-written expressions: no evaluation-only
    /// forms, iteration right-hand sides within the single-letter grammar,
    /// and pairwise-distinct labels.
    pub fn validate(&self) -> Result<(), PeError> {
        self.validate_shape()?;
        let mut labels = self.labels();
        labels.sort();
        for w in labels.windows(2) {
            if w[0] == w[1] {
                return Err(PeError::DuplicateLabel(w[0].clone()));
            }
        }
        Ok(())
    }

    fn validate_shape(&self) -> Result<(), PeError> {
        match self {
            Pe::Epsilon | Pe::Atom(_) => Ok(()),
            Pe::Bottom => Err(PeError::EvaluationOnlyForm("⊥")),
            Pe::InFlight(..) => Err(PeError::EvaluationOnlyForm("in-flight label")),
            Pe::Concat(a, b) | Pe::Or(a, b) => {
                a.validate_shape()?;
                b.validate_shape()
            }
            Pe::Iter(a, b) => {
                a.validate_shape()?;
                if !is_single_letter(b) {
                    return Err(PeError::InvalidIterRhs(b.to_string()));
                }
                b.validate_shape()
            }
            Pe::Labeled(_, a) => a.validate_shape(),
        }
    }
}

/// The restricted grammar `β ::= a | (β + β) | [β]_l` of iteration
/// right-hand sides; such expressions match exactly one letter.
pub fn is_single_letter(pe: &Pe) -> bool {
    match pe {
        Pe::Atom(_) => true,
        Pe::Or(a, b) => is_single_letter(a) && is_single_letter(b),
        Pe::Labeled(_, a) => is_single_letter(a),
        _ => false,
    }
}

/// `ε ∈ pe`: the expression can stand for a completed match. Holds for ε
/// itself and for disjunctions (possibly labeled) with a nullable operand.
pub fn nullable(pe: &Pe) -> bool {
    match pe {
        Pe::Epsilon => true,
        Pe::Or(a, b) => nullable(a) || nullable(b),
        Pe::Labeled(_, inner) | Pe::InFlight(_, inner) => {
            matches!(**inner, Pe::Or(..)) && nullable(inner)
        }
        _ => false,
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PeError {
    #[error("label `{0}` occurs more than once")]
    DuplicateLabel(Label),
    #[error("iteration right-hand side `{0}` must match exactly one letter")]
    InvalidIterRhs(String),
    #[error("{0} only arises during evaluation and cannot be written")]
    EvaluationOnlyForm(&'static str),
}

/// Match-position contribution of a single label in a single step, before a
/// concrete position is substituted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PairKind {
    /// `(p, ⊥)` — the match opens here.
    Open,
    /// `(⊥, p)` — the pending match closes here.
    Close,
    /// `(p, p)` — a one-letter match.
    Single,
}

impl PairKind {
    pub fn at(self, p: usize) -> MPair {
        match self {
            PairKind::Open => MPair::open(p),
            PairKind::Close => MPair::close(p),
            PairKind::Single => MPair::closed(p, p),
        }
    }
}

/// Per-step m-map contribution: each entry is a label together with the kind
/// of pair it emits at the current position. Labels are unique within a step.
pub type StepDelta = Vec<(Label, PairKind)>;

/// Result of the one-step relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub residual: Pe,
    pub mmap: MMap,
}

/// One-step rewrite against an abstract letter: the letter is represented by
/// the predicate telling which atom patterns it satisfies. Returns the
/// residual, the emitted delta, and the name of the applied rule.
///
/// Results are normalized: `ε·α = α·ε = α`, `⊥`-operands of a disjunction
/// are dropped, and residuals that can no longer complete a match (`⊥·α`,
/// an in-flight label around `⊥`) collapse to `⊥` with an empty delta.
pub(crate) fn step_kernel<F>(pe: &Pe, hits: &F) -> (Pe, StepDelta, &'static str)
where
    F: Fn(&EventPattern) -> bool,
{
    match pe {
        Pe::Epsilon => (Pe::Bottom, Vec::new(), "Eps"),
        Pe::Bottom => (Pe::Bottom, Vec::new(), "Bot"),
        Pe::Atom(pat) => {
            if hits(pat) {
                (Pe::Epsilon, Vec::new(), "Ltr")
            } else {
                (Pe::Bottom, Vec::new(), "Ltr-fail")
            }
        }
        Pe::Concat(a, b) => {
            let (a1, delta, _) = step_kernel(a, hits);
            if a1 == Pe::Bottom {
                (Pe::Bottom, Vec::new(), "Concat-⊥")
            } else if nullable(&a1) {
                (b.as_ref().clone(), delta, "Concat-ε")
            } else {
                (Pe::concat(a1, b.as_ref().clone()), delta, "Concat")
            }
        }
        Pe::Or(a, b) => {
            let (a1, mut da, _) = step_kernel(a, hits);
            let (b1, db, _) = step_kernel(b, hits);
            if nullable(&a1) || nullable(&b1) {
                da.extend(db);
                (Pe::Epsilon, da, "OR-end")
            } else {
                let residual = match (a1 == Pe::Bottom, b1 == Pe::Bottom) {
                    (true, true) => Pe::Bottom,
                    (true, false) => b1,
                    (false, true) => a1,
                    (false, false) => Pe::or(a1, b1),
                };
                if residual == Pe::Bottom {
                    (Pe::Bottom, Vec::new(), "OR")
                } else {
                    da.extend(db);
                    (residual, da, "OR")
                }
            }
        }
        Pe::Iter(a, b) => {
            let (b1, db, _) = step_kernel(b, hits);
            if nullable(&b1) {
                (Pe::Epsilon, db, "Iter-end")
            } else {
                // The right-hand side's contribution is discarded.
                let (a1, da, _) = step_kernel(a, hits);
                if a1 == Pe::Bottom {
                    (Pe::Bottom, Vec::new(), "Iter")
                } else {
                    (Pe::concat(a1, pe.clone()), da, "Iter")
                }
            }
        }
        Pe::Labeled(l, a) => {
            let (a1, mut delta, _) = step_kernel(a, hits);
            if nullable(&a1) {
                delta.push((l.clone(), PairKind::Single));
                (Pe::Epsilon, delta, "L-ltr")
            } else if a1 == Pe::Bottom {
                (Pe::Bottom, Vec::new(), "L-start")
            } else {
                delta.insert(0, (l.clone(), PairKind::Open));
                (Pe::InFlight(l.clone(), Box::new(a1)), delta, "L-start")
            }
        }
        Pe::InFlight(l, a) => {
            let (a1, mut delta, _) = step_kernel(a, hits);
            if nullable(&a1) {
                delta.push((l.clone(), PairKind::Close));
                (Pe::Epsilon, delta, "L-end")
            } else if a1 == Pe::Bottom {
                (Pe::Bottom, Vec::new(), "L-cont")
            } else {
                (Pe::InFlight(l.clone(), Box::new(a1)), delta, "L-cont")
            }
        }
    }
}

/// Extends `base` with the step delta instantiated at position `p`.
///
/// A closing pair landing on a label with no pending entry (possible only
/// when stepping a detached in-flight expression) is stored verbatim.
pub(crate) fn apply_delta(base: &MMap, delta: &StepDelta, p: usize) -> MMap {
    let mut out = base.clone();
    for (label, kind) in delta {
        let pair = kind.at(p);
        let current = out.get(label).cloned().unwrap_or_default();
        let joined = current
            .concat_pair(pair)
            .unwrap_or_else(|_| MString::from_pairs(vec![pair]));
        out.insert(label.clone(), joined);
    }
    out
}

/// The one-step relation `(pe, m) →a,p (residual, m')`.
///
/// Total: a failed match is the `Bottom` residual (with an empty m-map), not
/// an error. Exactly one rule applies to any expression (see
/// [`applicable_rules`]).
pub fn step(pe: &Pe, m: &MMap, a: &Event, p: usize) -> StepResult {
    let (residual, delta, _) = step_kernel(pe, &|pat: &EventPattern| pat.matches(a));
    if residual == Pe::Bottom {
        StepResult { residual, mmap: MMap::new() }
    } else {
        StepResult { residual: residual.clone(), mmap: apply_delta(m, &delta, p) }
    }
}

/// Names of one-step rules whose premises hold for `pe` against letter `a`.
///
/// Used to audit determinism: exactly one rule must be applicable for every
/// expression form.
pub fn applicable_rules(pe: &Pe, a: &Event) -> Vec<&'static str> {
    applicable_rules_with(pe, &|pat: &EventPattern| pat.matches(a))
}

pub(crate) fn applicable_rules_with<F>(pe: &Pe, hits: &F) -> Vec<&'static str>
where
    F: Fn(&EventPattern) -> bool,
{
    let mut rules = Vec::new();
    match pe {
        Pe::Epsilon => rules.push("Eps"),
        Pe::Bottom => rules.push("Bot"),
        Pe::Atom(pat) => {
            if hits(pat) {
                rules.push("Ltr");
            }
            if !hits(pat) {
                rules.push("Ltr-fail");
            }
        }
        Pe::Concat(a, _) => {
            let (a1, _, _) = step_kernel(a, hits);
            if a1 != Pe::Bottom && !nullable(&a1) {
                rules.push("Concat");
            }
            if nullable(&a1) {
                rules.push("Concat-ε");
            }
            if a1 == Pe::Bottom {
                rules.push("Concat-⊥");
            }
        }
        Pe::Or(a, b) => {
            let (a1, _, _) = step_kernel(a, hits);
            let (b1, _, _) = step_kernel(b, hits);
            if nullable(&a1) || nullable(&b1) {
                rules.push("OR-end");
            }
            if !nullable(&a1) && !nullable(&b1) {
                rules.push("OR");
            }
        }
        Pe::Iter(_, b) => {
            let (b1, _, _) = step_kernel(b, hits);
            if nullable(&b1) {
                rules.push("Iter-end");
            }
            if !nullable(&b1) {
                rules.push("Iter");
            }
        }
        Pe::Labeled(_, a) => {
            let (a1, _, _) = step_kernel(a, hits);
            if !nullable(&a1) {
                rules.push("L-start");
            }
            if nullable(&a1) {
                rules.push("L-ltr");
            }
        }
        Pe::InFlight(_, a) => {
            let (a1, _, _) = step_kernel(a, hits);
            if !nullable(&a1) {
                rules.push("L-cont");
            }
            if nullable(&a1) {
                rules.push("L-end");
            }
        }
    }
    rules
}

/// The evaluation function δ: folds the one-step relation over a whole word,
/// threading the m-map, with positions starting at 0.
pub fn evaluate(pe: &Pe, word: &[Event]) -> (Pe, MMap) {
    let mut residual = pe.clone();
    let mut mmap = MMap::new();
    for (p, ev) in word.iter().enumerate() {
        let r = step(&residual, &mmap, ev, p);
        residual = r.residual;
        mmap = r.mmap;
    }
    (residual, mmap)
}

/// A successful decomposition `w = prefix · suffix` where the expression
/// matched exactly `prefix`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition<'w> {
    pub prefix: &'w [Event],
    pub mmap: MMap,
    pub suffix: &'w [Event],
}

impl Decomposition<'_> {
    pub fn consumed(&self) -> usize {
        self.prefix.len()
    }
}

/// The decomposition function ρ: splits `w` into the unique matched prefix
/// (the shortest, by construction), its m-map, and the remaining suffix.
/// Returns `None` when evaluation fails or exhausts the word unmatched.
pub fn decompose<'w>(pe: &Pe, w: &'w [Event]) -> Option<Decomposition<'w>> {
    if *pe == Pe::Epsilon {
        return Some(Decomposition { prefix: &w[..0], mmap: MMap::new(), suffix: w });
    }
    let mut residual = pe.clone();
    let mut mmap = MMap::new();
    for (p, ev) in w.iter().enumerate() {
        let r = step(&residual, &mmap, ev, p);
        residual = r.residual;
        mmap = r.mmap;
        if residual == Pe::Bottom {
            return None;
        }
        if residual == Pe::Epsilon {
            return Some(Decomposition { prefix: &w[..=p], mmap, suffix: &w[p + 1..] });
        }
    }
    None
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SliceError {
    #[error("m-string range {start}..={end} out of bounds for word of length {len}")]
    Range { start: usize, end: usize, len: usize },
}

/// Extracts the sub-word named by an m-string: the concatenation of the
/// inclusive ranges of its pairs. Any pair containing ⊥ makes the whole
/// slice ε.
pub fn slice(w: &[Event], s: &MString) -> Result<Vec<Event>, SliceError> {
    for pair in s.pairs() {
        if let (Some(start), Some(end)) = (pair.start, pair.end) {
            if start > end || end >= w.len() {
                return Err(SliceError::Range { start, end, len: w.len() });
            }
        }
    }
    if s.pairs().iter().any(|p| !p.is_complete()) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for pair in s.pairs() {
        let (start, end) = (pair.start.unwrap(), pair.end.unwrap());
        out.extend_from_slice(&w[start..=end]);
    }
    Ok(out)
}

fn precedence(pe: &Pe) -> u8 {
    match pe {
        Pe::Or(..) => 0,
        Pe::Concat(..) => 1,
        Pe::Iter(..) => 2,
        _ => 3,
    }
}

fn fmt_child(pe: &Pe, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if precedence(pe) < min {
        write!(f, "({pe})")
    } else {
        write!(f, "{pe}")
    }
}

impl fmt::Display for Pe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pe::Epsilon => write!(f, "eps"),
            Pe::Bottom => write!(f, "⊥"),
            Pe::Atom(p) => write!(f, "{p}"),
            Pe::Concat(a, b) => {
                fmt_child(a, 2, f)?;
                write!(f, " ")?;
                fmt_child(b, 1, f)
            }
            Pe::Or(a, b) => {
                fmt_child(a, 1, f)?;
                write!(f, " + ")?;
                fmt_child(b, 0, f)
            }
            Pe::Iter(a, b) => {
                fmt_child(a, 3, f)?;
                write!(f, " U ")?;
                fmt_child(b, 3, f)
            }
            Pe::Labeled(l, a) => write!(f, "[ {a} ]@{l}"),
            Pe::InFlight(l, a) => write!(f, "[ {a} ]~{l}"),
        }
    }
}
