//! M-strings and m-maps: the match-position algebra.
//!
//! An m-string records where a labeled subexpression matched. It is a
//! sequence of position pairs where `(p, ⊥)` opens a match at position `p`,
//! `(⊥, p)` closes the pending match, and `(s, e)` is a completed match.
//! M-strings are only ever grown through the partial concatenation [`MString::concat_pair`]
//! (written `⊙`); an m-map is a partial map from labels to m-strings combined
//! pointwise by [`MMap::concat`] (written `⊕`).

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// A label naming a subexpression of a prefix expression.
pub type Label = String;

/// One entry of an m-string; `None` encodes the ⊥ component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MPair {
    pub start: Option<usize>,
    pub end: Option<usize>,
}

impl MPair {
    pub fn new(start: Option<usize>, end: Option<usize>) -> Self {
        MPair { start, end }
    }

    /// Completed match `(s, e)`.
    pub fn closed(start: usize, end: usize) -> Self {
        MPair { start: Some(start), end: Some(end) }
    }

    /// Opening marker `(p, ⊥)`.
    pub fn open(start: usize) -> Self {
        MPair { start: Some(start), end: None }
    }

    /// Closing marker `(⊥, p)`.
    pub fn close(end: usize) -> Self {
        MPair { start: None, end: Some(end) }
    }

    pub fn is_complete(&self) -> bool {
        self.start.is_some() && self.end.is_some()
    }
}

impl fmt::Display for MPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |v: Option<usize>| match v {
            Some(p) => p.to_string(),
            None => "⊥".to_string(),
        };
        write!(f, "({},{})", c(self.start), c(self.end))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MStringError {
    /// `ε ⊙ (⊥, d)` is outside the domain of the concatenation.
    #[error("m-string concatenation undefined: cannot append {pair} to the empty m-string")]
    Domain { pair: MPair },
}

/// A sequence of match-position pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MString(Vec<MPair>);

impl MString {
    pub fn new() -> Self {
        MString(Vec::new())
    }

    pub fn from_pairs(pairs: Vec<MPair>) -> Self {
        MString(pairs)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn pairs(&self) -> &[MPair] {
        &self.0
    }

    /// The partial concatenation `⊙` for a single pair on the right.
    ///
    /// The four cases: appending to ε requires a defined start; appending
    /// after a closed pair extends the sequence; a closing pair completes a
    /// pending open match; a new opening pair overwrites a pending one.
    pub fn concat_pair(&self, pair: MPair) -> Result<MString, MStringError> {
        let mut out = self.0.clone();
        match out.last().copied() {
            None => {
                if pair.start.is_none() {
                    return Err(MStringError::Domain { pair });
                }
                out.push(pair);
            }
            Some(last) if last.end.is_some() => {
                out.push(pair);
            }
            Some(last) => {
                // last = (a, ⊥)
                let replaced = match pair.start {
                    None => MPair::new(last.start, pair.end),
                    Some(_) => pair,
                };
                *out.last_mut().unwrap() = replaced;
            }
        }
        Ok(MString(out))
    }

    /// `⊙` extended pointwise to an m-string right operand.
    pub fn concat(&self, rhs: &MString) -> Result<MString, MStringError> {
        let mut acc = self.clone();
        for pair in &rhs.0 {
            acc = acc.concat_pair(*pair)?;
        }
        Ok(acc)
    }

    /// Well-formed: only the final pair may be missing its end, and a start
    /// is present everywhere except possibly in a final closing position.
    /// This is the shape reachable from ε through defined `⊙` applications.
    pub fn is_well_formed(&self) -> bool {
        for (i, pair) in self.0.iter().enumerate() {
            let last = i + 1 == self.0.len();
            if !last && !pair.is_complete() {
                return false;
            }
            if pair.start.is_none() && pair.end.is_none() {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for MString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        for pair in &self.0 {
            write!(f, "{pair}")?;
        }
        Ok(())
    }
}

/// Partial map from labels to m-strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MMap(BTreeMap<Label, MString>);

impl MMap {
    pub fn new() -> Self {
        MMap(BTreeMap::new())
    }

    pub fn singleton(label: impl Into<Label>, s: MString) -> Self {
        let mut m = BTreeMap::new();
        m.insert(label.into(), s);
        MMap(m)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&MString> {
        self.0.get(label)
    }

    pub fn insert(&mut self, label: impl Into<Label>, s: MString) {
        self.0.insert(label.into(), s);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Label, &MString)> {
        self.0.iter()
    }

    /// The concatenation `⊕`: pointwise `⊙` with missing entries read as ε.
    pub fn concat(&self, rhs: &MMap) -> Result<MMap, MStringError> {
        let mut out = self.0.clone();
        for (label, s2) in &rhs.0 {
            match out.get(label) {
                Some(s1) => {
                    let joined = s1.concat(s2)?;
                    out.insert(label.clone(), joined);
                }
                None => {
                    // ε ⊙ s2 = s2 whenever defined; the domain condition is
                    // re-checked by concat on the empty left operand.
                    let joined = MString::new().concat(s2)?;
                    out.insert(label.clone(), joined);
                }
            }
        }
        Ok(MMap(out))
    }
}

impl fmt::Display for MMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (label, s)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{label}↦{s}")?;
        }
        write!(f, "}}")
    }
}

impl FromIterator<(Label, MString)> for MMap {
    fn from_iter<T: IntoIterator<Item = (Label, MString)>>(iter: T) -> Self {
        MMap(iter.into_iter().collect())
    }
}
