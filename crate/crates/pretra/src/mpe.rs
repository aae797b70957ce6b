//! Multi-trace prefix expressions: one prefix expression per trace variable
//! plus a condition over the matched prefixes.
//!
//! Conditions are boolean formulas over atomic terms: label references
//! (evaluating to m-strings), trace slices `τ[l]` (evaluating to the
//! sub-word of the trace named by a label's m-string), and constants.
//! Disjunction and implication are parse-time sugar over `¬` and `∧`.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::event::{Event, EventPattern};
use crate::mstring::{MMap, MString};
use crate::pe::{decompose, slice, Pe, PeError, SliceError};

pub type TraceVar = String;

/// Trace assignment σ: resolves trace variables to words.
pub trait Assignment {
    fn word(&self, var: &str) -> Option<&[Event]>;
}

impl Assignment for BTreeMap<String, Vec<Event>> {
    fn word(&self, var: &str) -> Option<&[Event]> {
        self.get(var).map(|w| w.as_slice())
    }
}

impl Assignment for BTreeMap<String, &[Event]> {
    fn word(&self, var: &str) -> Option<&[Event]> {
        self.get(var).copied()
    }
}

impl Assignment for Vec<(String, &[Event])> {
    fn word(&self, var: &str) -> Option<&[Event]> {
        self.iter().find(|(v, _)| v == var).map(|(_, w)| *w)
    }
}

/// Atomic term of a condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    /// `l` — the m-string accumulated for a label (ε when absent).
    LabelRef(String),
    /// `τ[t]` — the slice of trace `τ` named by the inner m-string term.
    TraceSlice(TraceVar, Box<Term>),
    /// A constant word of events.
    ConstWord(Vec<Event>),
    /// A constant m-string.
    ConstMString(MString),
}

impl Term {
    pub fn label(l: impl Into<String>) -> Term {
        Term::LabelRef(l.into())
    }

    pub fn trace_slice(var: impl Into<String>, inner: Term) -> Term {
        Term::TraceSlice(var.into(), Box::new(inner))
    }

    /// The static type of the term's value.
    pub fn ty(&self) -> TermType {
        match self {
            Term::LabelRef(_) | Term::ConstMString(_) => TermType::MString,
            Term::TraceSlice(..) | Term::ConstWord(_) => TermType::Word,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermType {
    Word,
    MString,
}

impl fmt::Display for TermType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermType::Word => write!(f, "word"),
            TermType::MString => write!(f, "m-string"),
        }
    }
}

/// Evaluated term value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TermValue {
    Word(Vec<Event>),
    MStr(MString),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CondError {
    #[error("trace variable `{0}` is not bound")]
    UnboundTraceVar(String),
    #[error("type mismatch: comparing {0} with {1}")]
    TypeMismatch(TermType, TermType),
    #[error(transparent)]
    Slice(#[from] SliceError),
}

/// Evaluates an atomic term under a trace assignment and an m-map.
pub fn eval_term<A: Assignment>(t: &Term, sigma: &A, m: &MMap) -> Result<TermValue, CondError> {
    match t {
        Term::ConstWord(w) => Ok(TermValue::Word(w.clone())),
        Term::ConstMString(s) => Ok(TermValue::MStr(s.clone())),
        Term::LabelRef(l) => Ok(TermValue::MStr(m.get(l).cloned().unwrap_or_default())),
        Term::TraceSlice(var, inner) => {
            let word =
                sigma.word(var).ok_or_else(|| CondError::UnboundTraceVar(var.clone()))?;
            let ms = match eval_term(inner, sigma, m)? {
                TermValue::MStr(s) => s,
                TermValue::Word(_) => {
                    return Err(CondError::TypeMismatch(TermType::Word, TermType::MString))
                }
            };
            Ok(TermValue::Word(slice(word, &ms)?))
        }
    }
}

/// A condition on matched prefixes. `Or`/`Implies` written in the surface
/// syntax are expanded into `Not`/`And` at parse time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    True,
    Eq(Term, Term),
    /// `t ~ P`: the term is a one-event word matching the pattern.
    Matches(Term, EventPattern),
    Not(Box<Condition>),
    And(Box<Condition>, Box<Condition>),
}

impl Condition {
    pub fn eq(a: Term, b: Term) -> Condition {
        Condition::Eq(a, b)
    }

    pub fn neq(a: Term, b: Term) -> Condition {
        Condition::Not(Box::new(Condition::Eq(a, b)))
    }

    pub fn matches(t: Term, p: EventPattern) -> Condition {
        Condition::Matches(t, p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(c: Condition) -> Condition {
        Condition::Not(Box::new(c))
    }

    pub fn and(a: Condition, b: Condition) -> Condition {
        Condition::And(Box::new(a), Box::new(b))
    }

    /// `C ∨ C' ≡ ¬(¬C ∧ ¬C')`
    pub fn or(a: Condition, b: Condition) -> Condition {
        Condition::not(Condition::and(Condition::not(a), Condition::not(b)))
    }

    /// `C ⟹ C' ≡ ¬C ∨ C'`
    pub fn implies(a: Condition, b: Condition) -> Condition {
        Condition::or(Condition::not(a), b)
    }

    /// Evaluates the condition; pure and total given bound trace variables.
    pub fn eval<A: Assignment>(&self, sigma: &A, m: &MMap) -> Result<bool, CondError> {
        match self {
            Condition::True => Ok(true),
            Condition::Eq(a, b) => {
                let va = eval_term(a, sigma, m)?;
                let vb = eval_term(b, sigma, m)?;
                match (va, vb) {
                    (TermValue::Word(x), TermValue::Word(y)) => Ok(x == y),
                    (TermValue::MStr(x), TermValue::MStr(y)) => Ok(x == y),
                    (TermValue::Word(_), TermValue::MStr(_)) => {
                        Err(CondError::TypeMismatch(TermType::Word, TermType::MString))
                    }
                    (TermValue::MStr(_), TermValue::Word(_)) => {
                        Err(CondError::TypeMismatch(TermType::MString, TermType::Word))
                    }
                }
            }
            Condition::Matches(t, pat) => match eval_term(t, sigma, m)? {
                TermValue::Word(w) => Ok(w.len() == 1 && pat.matches(&w[0])),
                TermValue::MStr(_) => {
                    Err(CondError::TypeMismatch(TermType::MString, TermType::Word))
                }
            },
            Condition::Not(c) => Ok(!c.eval(sigma, m)?),
            Condition::And(a, b) => Ok(a.eval(sigma, m)? && b.eval(sigma, m)?),
        }
    }

    /// Trace variables referenced by slice terms.
    pub fn trace_vars(&self) -> Vec<TraceVar> {
        fn of_term(t: &Term, out: &mut Vec<TraceVar>) {
            if let Term::TraceSlice(var, inner) = t {
                out.push(var.clone());
                of_term(inner, out);
            }
        }
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(c) = stack.pop() {
            match c {
                Condition::True => {}
                Condition::Eq(a, b) => {
                    of_term(a, &mut out);
                    of_term(b, &mut out);
                }
                Condition::Matches(t, _) => of_term(t, &mut out),
                Condition::Not(c) => stack.push(c),
                Condition::And(a, b) => {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MpeError {
    #[error(transparent)]
    Pe(#[from] PeError),
    #[error("label `{0}` is used by prefix expressions of different traces")]
    DuplicateLabelAcrossTraces(String),
    #[error("trace variable `{0}` bound more than once")]
    DuplicateTraceVar(String),
}

/// A multi-trace prefix expression: an ordered list of per-trace prefix
/// expressions and a condition. Labels are distinct across all bound
/// expressions, so their m-maps concatenate without collisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mpe {
    bindings: Vec<(TraceVar, Pe)>,
    condition: Condition,
}

impl Mpe {
    pub fn new(bindings: Vec<(TraceVar, Pe)>, condition: Condition) -> Result<Mpe, MpeError> {
        let mut seen_labels: Vec<String> = Vec::new();
        let mut seen_vars: Vec<&str> = Vec::new();
        for (var, pe) in &bindings {
            if seen_vars.contains(&var.as_str()) {
                return Err(MpeError::DuplicateTraceVar(var.clone()));
            }
            seen_vars.push(var);
            pe.validate()?;
            for label in pe.labels() {
                if seen_labels.contains(&label) {
                    return Err(MpeError::DuplicateLabelAcrossTraces(label));
                }
                seen_labels.push(label);
            }
        }
        Ok(Mpe { bindings, condition })
    }

    pub fn bindings(&self) -> &[(TraceVar, Pe)] {
        &self.bindings
    }

    pub fn condition(&self) -> &Condition {
        &self.condition
    }

    pub fn pe_for(&self, var: &str) -> Option<&Pe> {
        self.bindings.iter().find(|(v, _)| v == var).map(|(_, pe)| pe)
    }

    /// Checks σ ⊨ α: every bound prefix expression matches a prefix of its
    /// word and the condition holds under the combined m-map. `None` when
    /// some expression has no match; `Some` carries the condition verdict,
    /// the m-map, and the per-binding consumed prefix lengths.
    pub fn satisfied<A: Assignment>(&self, sigma: &A) -> Result<Option<MpeMatch>, CondError> {
        let mut mmap = MMap::new();
        let mut consumed = Vec::with_capacity(self.bindings.len());
        for (var, pe) in &self.bindings {
            let word =
                sigma.word(var).ok_or_else(|| CondError::UnboundTraceVar(var.clone()))?;
            match decompose(pe, word) {
                None => return Ok(None),
                Some(d) => {
                    // Distinct labels guarantee the concatenation is defined.
                    mmap = mmap.concat(&d.mmap).expect("label disjointness");
                    consumed.push((var.clone(), d.consumed()));
                }
            }
        }
        let verdict = self.condition.eval(sigma, &mmap)?;
        Ok(Some(MpeMatch { verdict, mmap, consumed }))
    }
}

/// Result of a successful multi-trace prefix match.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MpeMatch {
    /// Value of the condition under the combined m-map.
    pub verdict: bool,
    pub mmap: MMap,
    /// Prefix length consumed per trace variable, in binding order.
    pub consumed: Vec<(TraceVar, usize)>,
}

impl MpeMatch {
    pub fn consumed_for(&self, var: &str) -> Option<usize> {
        self.consumed.iter().find(|(v, _)| v == var).map(|(_, n)| *n)
    }
}
