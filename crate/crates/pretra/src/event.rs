//! Events and event patterns.
//!
//! An [`Event`] is a structured letter: a type tag plus a (possibly empty)
//! sequence of argument values. Words over events form the input alphabet of
//! prefix expressions and transducers. The synthetic end marker `$` is an
//! ordinary event with a reserved tag and no arguments.

use std::fmt;

/// Tag reserved for the synthetic end-of-trace marker.
pub const END_TAG: &str = "$";

/// An argument carried by an event: a symbolic identifier or a 64-bit
/// unsigned integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Ident(String),
    Int(u64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Ident(s) => write!(f, "{s}"),
            Value::Int(n) => write!(f, "{n}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Ident(s.to_string())
    }
}

impl From<u64> for Value {
    fn from(n: u64) -> Self {
        Value::Int(n)
    }
}

/// A structured letter. Equality is structural over the tag and the full
/// argument sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub tag: String,
    pub args: Vec<Value>,
}

impl Event {
    pub fn new(tag: impl Into<String>, args: Vec<Value>) -> Self {
        Event { tag: tag.into(), args }
    }

    /// A bare event with no arguments, e.g. the abstract letters `a`, `b`.
    pub fn bare(tag: impl Into<String>) -> Self {
        Event { tag: tag.into(), args: Vec::new() }
    }

    /// The synthetic end-of-trace marker `$`.
    pub fn end_marker() -> Self {
        Event::bare(END_TAG)
    }

    pub fn is_end_marker(&self) -> bool {
        self.tag == END_TAG && self.args.is_empty()
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag)?;
        if !self.args.is_empty() {
            write!(f, "(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{a}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// Constraint on a single event argument.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArgPattern {
    Any,
    Eq(Value),
}

impl fmt::Display for ArgPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgPattern::Any => write!(f, "_"),
            ArgPattern::Eq(v) => write!(f, "{v}"),
        }
    }
}

/// A pattern over events: a tag constraint plus argument constraints.
///
/// `Tag(t)` alone (with `args: None`) matches every event carrying tag `t`
/// regardless of its arguments; `args: Some(..)` additionally pins the arity
/// and per-argument constraints. The universal wildcard `_` has a wildcard
/// tag and no argument constraints.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventPattern {
    /// `None` means any tag.
    pub tag: Option<String>,
    /// `None` means any argument vector (including empty).
    pub args: Option<Vec<ArgPattern>>,
}

impl EventPattern {
    /// The universal wildcard `_`.
    pub fn wildcard() -> Self {
        EventPattern { tag: None, args: None }
    }

    /// Matches any event with the given tag, any arguments.
    pub fn tag(tag: impl Into<String>) -> Self {
        EventPattern { tag: Some(tag.into()), args: None }
    }

    /// Matches events with the given tag and exactly these argument patterns.
    pub fn with_args(tag: impl Into<String>, args: Vec<ArgPattern>) -> Self {
        EventPattern { tag: Some(tag.into()), args: Some(args) }
    }

    /// Pattern matching exactly one concrete event.
    pub fn exact(ev: &Event) -> Self {
        EventPattern {
            tag: Some(ev.tag.clone()),
            args: Some(ev.args.iter().cloned().map(ArgPattern::Eq).collect()),
        }
    }

    /// The low-input class `I_l`, i.e. `I(l, _)`.
    pub fn low_input() -> Self {
        EventPattern::with_args("I", vec![ArgPattern::Eq(Value::from("l")), ArgPattern::Any])
    }

    /// The low-output class `O_l`, i.e. `O(l, _)`.
    pub fn low_output() -> Self {
        EventPattern::with_args("O", vec![ArgPattern::Eq(Value::from("l")), ArgPattern::Any])
    }

    /// The end-of-trace marker `$`.
    pub fn end_marker() -> Self {
        EventPattern::with_args(END_TAG, Vec::new())
    }

    pub fn is_wildcard(&self) -> bool {
        self.tag.is_none() && self.args.is_none()
    }

    pub fn matches(&self, ev: &Event) -> bool {
        if let Some(tag) = &self.tag {
            if *tag != ev.tag {
                return false;
            }
        }
        if let Some(args) = &self.args {
            if args.len() != ev.args.len() {
                return false;
            }
            for (pat, val) in args.iter().zip(ev.args.iter()) {
                match pat {
                    ArgPattern::Any => {}
                    ArgPattern::Eq(v) => {
                        if v != val {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

impl fmt::Display for EventPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_wildcard() {
            return write!(f, "_");
        }
        if *self == EventPattern::low_input() {
            return write!(f, "I_l");
        }
        if *self == EventPattern::low_output() {
            return write!(f, "O_l");
        }
        match &self.tag {
            Some(t) => write!(f, "{t}")?,
            None => write!(f, "_")?,
        }
        if let Some(args) = &self.args {
            if !args.is_empty() {
                write!(f, "(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")?;
            }
        }
        Ok(())
    }
}

/// Renders a word of events with single spaces between letters.
pub fn format_word(word: &[Event]) -> String {
    word.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(" ")
}

/// Builds a word of bare (argument-less) events from the characters of an
/// ASCII string. Convenient for the abstract alphabets used in tests.
pub fn word_of_letters(letters: &str) -> Vec<Event> {
    letters.chars().filter(|c| !c.is_whitespace()).map(|c| Event::bare(c.to_string())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structural_equality() {
        let a = Event::new("I", vec![Value::from("l"), Value::from(1u64)]);
        let b = Event::new("I", vec![Value::from("l"), Value::from(1u64)]);
        let c = Event::new("I", vec![Value::from("l"), Value::from(2u64)]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn end_marker_has_no_args() {
        let end = Event::end_marker();
        assert!(end.is_end_marker());
        assert!(end.args.is_empty());
        assert_eq!(end.to_string(), "$");
    }

    #[test]
    fn wildcard_matches_everything() {
        let w = EventPattern::wildcard();
        assert!(w.matches(&Event::bare("a")));
        assert!(w.matches(&Event::new("O", vec![Value::from("l"), Value::from(3u64)])));
        assert!(w.matches(&Event::end_marker()));
    }

    #[test]
    fn class_patterns() {
        let il = EventPattern::low_input();
        assert!(il.matches(&Event::new("I", vec![Value::from("l"), Value::from(7u64)])));
        assert!(!il.matches(&Event::new("I", vec![Value::from("h"), Value::from(7u64)])));
        assert!(!il.matches(&Event::new("O", vec![Value::from("l"), Value::from(7u64)])));
        // Arity is part of the constraint.
        assert!(!il.matches(&Event::new("I", vec![Value::from("l")])));
    }

    #[test]
    fn bare_tag_ignores_args() {
        let p = EventPattern::tag("Dbg");
        assert!(p.matches(&Event::bare("Dbg")));
        assert!(p.matches(&Event::new("Dbg", vec![Value::from(1u64)])));
        assert!(!p.matches(&Event::bare("E")));
    }
}
