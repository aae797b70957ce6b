//! Textual formats: prefix expressions, transducer specifications, and
//! line-based trace files.
//!
//! Prefix expression grammar (`U` binds tightest, then concatenation, then
//! `+`):
//!
//! ```text
//! pe      := cat ('+' cat)*
//! cat     := iter ('.'? iter)*
//! iter    := primary ('U' primary)*
//! primary := atom | 'eps' | '(' pe ')' | '[' pe ']' '@' label
//! atom    := '_' | '$' | 'I_l' | 'O_l' | 'I_h' | 'O_h'
//!          | tag | tag '(' (value | '_') (',' (value | '_'))* ')'
//! ```
//!
//! A bare tag matches any event with that tag; argument lists additionally
//! pin arity and values. `I_l` abbreviates `I(l,_)` (and likewise `O_l`,
//! `I_h`, `O_h`). The identifiers `U`, `eps` and `true` are reserved.
//!
//! Transducer files are a sequence of statements:
//!
//! ```text
//! input t1 t2 ;
//! output to ;
//! alphabet I(l,0) O(l,0) E $ ;        # optional, descriptive
//! states q0 q1 ;
//! init q0 ;
//! deterministic ;                     # optional: trust determinism
//! q0 -> q1 {
//!   t1: <pe> ;
//!   t2: <pe> ;
//!   cond: <condition> ;               # optional, defaults to true
//!   out: to += bot ;                  # optional, `bot`/`top`/⊥/⊤/event
//!   prio: 0 ;                         # optional tie-breaker
//! }
//! ```
//!
//! Conditions compare terms with `=`/`!=` and combine with `!`, `&&`, `||`
//! and `=>` (loosest, right-associative); `||` and `=>` are expanded into
//! `!`/`&&` while parsing. Terms are labels (`e1`), trace slices
//! (`t1[e1]`), or event patterns; comparing a slice against a pattern is the
//! constant-time event-shape check.
//!
//! Trace files carry one event per line (`TAG` or `TAG(arg,…)`), `#`
//! comments, and blank lines; the end marker `$` is appended by tooling and
//! may not appear in a file.

use std::fmt;

use thiserror::Error;

use crate::event::{ArgPattern, Event, EventPattern, Value, END_TAG};
use crate::mpe::{Condition, Mpe, Term};
use crate::mpt::{Edge, Mpt, OutSym, OutputAssignment};
use crate::pe::{Pe, PeError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("invalid iteration right-hand side `{0}`: must match exactly one letter")]
    InvalidIterRhs(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown trace variable `{0}`")]
    UnknownTraceVar(String),
    #[error("label `{0}` used by more than one trace of the same edge")]
    DuplicateLabelAcrossTraces(String),
    #[error("condition type error: {0}")]
    CondType(String),
    #[error("{0}")]
    Semantic(String),
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    At,
    Plus,
    PlusEq,
    Dot,
    Semi,
    Colon,
    Comma,
    Minus,
    Underscore,
    Dollar,
    Arrow,
    Eq,
    Neq,
    Bang,
    AndAnd,
    OrOr,
    Implies,
    BotSym,
    TopSym,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Int(n) => return write!(f, "`{n}`"),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::At => "@",
            Tok::Plus => "+",
            Tok::PlusEq => "+=",
            Tok::Dot => ".",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Minus => "-",
            Tok::Underscore => "_",
            Tok::Dollar => "$",
            Tok::Arrow => "->",
            Tok::Eq => "=",
            Tok::Neq => "!=",
            Tok::Bang => "!",
            Tok::AndAnd => "&&",
            Tok::OrOr => "||",
            Tok::Implies => "=>",
            Tok::BotSym => "⊥",
            Tok::TopSym => "⊤",
        };
        write!(f, "`{s}`")
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
    /// No whitespace or comment between this token and the previous one.
    glued: bool,
}

fn lex(text: &str) -> Result<Vec<Spanned>, DslError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    let mut glued = false;

    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Spanned { tok: $tok, line, col, glued });
            col += $len;
            #[allow(unused_assignments)]
            {
                glued = true;
            }
        }};
    }

    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
                glued = false;
            }
            '\r' => {
                chars.next();
                glued = false;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
                glued = false;
            }
            '#' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        col = 1;
                        break;
                    }
                }
                glued = false;
            }
            '(' => {
                chars.next();
                push!(Tok::LParen, 1);
            }
            ')' => {
                chars.next();
                push!(Tok::RParen, 1);
            }
            '[' => {
                chars.next();
                push!(Tok::LBracket, 1);
            }
            ']' => {
                chars.next();
                push!(Tok::RBracket, 1);
            }
            '{' => {
                chars.next();
                push!(Tok::LBrace, 1);
            }
            '}' => {
                chars.next();
                push!(Tok::RBrace, 1);
            }
            '@' => {
                chars.next();
                push!(Tok::At, 1);
            }
            '.' => {
                chars.next();
                push!(Tok::Dot, 1);
            }
            ';' => {
                chars.next();
                push!(Tok::Semi, 1);
            }
            ':' => {
                chars.next();
                push!(Tok::Colon, 1);
            }
            ',' => {
                chars.next();
                push!(Tok::Comma, 1);
            }
            '_' => {
                chars.next();
                push!(Tok::Underscore, 1);
            }
            '$' => {
                chars.next();
                push!(Tok::Dollar, 1);
            }
            '⊥' => {
                chars.next();
                push!(Tok::BotSym, 1);
            }
            '⊤' => {
                chars.next();
                push!(Tok::TopSym, 1);
            }
            '+' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    push!(Tok::PlusEq, 2);
                } else {
                    push!(Tok::Plus, 1);
                }
            }
            '-' => {
                chars.next();
                if chars.peek() == Some(&'>') {
                    chars.next();
                    push!(Tok::Arrow, 2);
                } else {
                    push!(Tok::Minus, 1);
                }
            }
            '=' => {
                chars.next();
                if chars.peek() == Some(&'>') {
                    chars.next();
                    push!(Tok::Implies, 2);
                } else {
                    push!(Tok::Eq, 1);
                }
            }
            '!' => {
                chars.next();
                if chars.peek() == Some(&'=') {
                    chars.next();
                    push!(Tok::Neq, 2);
                } else {
                    push!(Tok::Bang, 1);
                }
            }
            '&' => {
                chars.next();
                if chars.peek() == Some(&'&') {
                    chars.next();
                    push!(Tok::AndAnd, 2);
                } else {
                    return Err(DslError::Syntax {
                        line,
                        col,
                        msg: "expected `&&`".to_string(),
                    });
                }
            }
            '|' => {
                chars.next();
                if chars.peek() == Some(&'|') {
                    chars.next();
                    push!(Tok::OrOr, 2);
                } else {
                    return Err(DslError::Syntax {
                        line,
                        col,
                        msg: "expected `||`".to_string(),
                    });
                }
            }
            c if c.is_ascii_digit() => {
                let mut n = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        n.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let len = n.len();
                let value: u64 = n.parse().map_err(|_| DslError::Syntax {
                    line,
                    col,
                    msg: format!("integer `{n}` out of range"),
                })?;
                push!(Tok::Int(value), len);
            }
            c if c.is_ascii_alphabetic() => {
                let mut s = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                let len = s.len();
                push!(Tok::Ident(s), len);
            }
            other => {
                return Err(DslError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Token cursor

struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Cursor {
    fn new(toks: Vec<Spanned>) -> Self {
        Cursor { toks, pos: 0 }
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek2(&self) -> Option<&Tok> {
        self.toks.get(self.pos + 1).map(|s| &s.tok)
    }

    fn next(&mut self) -> Option<Spanned> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> DslError {
        let (line, col) = self
            .toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1));
        DslError::Syntax { line, col, msg: msg.into() }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), DslError> {
        match self.peek() {
            Some(t) if *t == tok => {
                self.next();
                Ok(())
            }
            Some(t) => {
                let msg = format!("expected {tok}, found {t}");
                Err(self.err(msg))
            }
            None => Err(self.err(format!("expected {tok}, found end of input"))),
        }
    }

    fn expect_ident(&mut self) -> Result<String, DslError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.next();
                Ok(s)
            }
            Some(t) => {
                let msg = format!("expected identifier, found {t}");
                Err(self.err(msg))
            }
            None => Err(self.err("expected identifier, found end of input")),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    /// True if the next token is `(` written directly after the previous
    /// token, i.e. an argument list rather than a parenthesized expression.
    fn glued_lparen(&self) -> bool {
        matches!(self.toks.get(self.pos), Some(Spanned { tok: Tok::LParen, glued: true, .. }))
    }

    /// As `glued_lparen`, one token ahead.
    fn glued_lparen2(&self) -> bool {
        matches!(self.toks.get(self.pos + 1), Some(Spanned { tok: Tok::LParen, glued: true, .. }))
    }
}

// ---------------------------------------------------------------------------
// Prefix expressions

pub fn parse_pe(text: &str) -> Result<Pe, DslError> {
    let mut cur = Cursor::new(lex(text)?);
    let pe = parse_alt(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after expression"));
    }
    validate_pe(&pe)?;
    Ok(pe)
}

fn validate_pe(pe: &Pe) -> Result<(), DslError> {
    pe.validate().map_err(|e| match e {
        PeError::DuplicateLabel(l) => DslError::DuplicateLabel(l),
        PeError::InvalidIterRhs(s) => DslError::InvalidIterRhs(s),
        PeError::EvaluationOnlyForm(s) => DslError::Semantic(s.to_string()),
    })
}

fn parse_alt(cur: &mut Cursor) -> Result<Pe, DslError> {
    let mut parts = vec![parse_cat(cur)?];
    while cur.peek() == Some(&Tok::Plus) {
        cur.next();
        parts.push(parse_cat(cur)?);
    }
    let mut iter = parts.into_iter().rev();
    let last = iter.next().expect("at least one disjunct");
    Ok(iter.fold(last, |acc, it| Pe::or(it, acc)))
}

fn starts_primary(tok: Option<&Tok>) -> bool {
    matches!(
        tok,
        Some(Tok::Ident(_))
            | Some(Tok::LParen)
            | Some(Tok::LBracket)
            | Some(Tok::Underscore)
            | Some(Tok::Dollar)
    )
}

fn parse_cat(cur: &mut Cursor) -> Result<Pe, DslError> {
    let mut parts = vec![parse_iter(cur)?];
    loop {
        if cur.peek() == Some(&Tok::Dot) {
            cur.next();
            parts.push(parse_iter(cur)?);
        } else if starts_primary(cur.peek()) {
            parts.push(parse_iter(cur)?);
        } else {
            break;
        }
    }
    let mut iter = parts.into_iter().rev();
    let last = iter.next().expect("at least one factor");
    Ok(iter.fold(last, |acc, it| Pe::concat(it, acc)))
}

fn parse_iter(cur: &mut Cursor) -> Result<Pe, DslError> {
    let mut pe = parse_primary(cur)?;
    while matches!(cur.peek(), Some(Tok::Ident(s)) if s == "U") {
        cur.next();
        let rhs = parse_primary(cur)?;
        pe = Pe::iter(pe, rhs);
    }
    Ok(pe)
}

fn parse_primary(cur: &mut Cursor) -> Result<Pe, DslError> {
    match cur.peek() {
        Some(Tok::LParen) => {
            cur.next();
            let pe = parse_alt(cur)?;
            cur.expect(Tok::RParen)?;
            Ok(pe)
        }
        Some(Tok::LBracket) => {
            cur.next();
            let pe = parse_alt(cur)?;
            cur.expect(Tok::RBracket)?;
            cur.expect(Tok::At)?;
            let label = cur.expect_ident()?;
            Ok(Pe::labeled(label, pe))
        }
        Some(Tok::Ident(s)) if s == "eps" => {
            cur.next();
            Ok(Pe::Epsilon)
        }
        Some(Tok::Ident(s)) if s == "U" => Err(cur.err("`U` is the iteration operator")),
        Some(Tok::Ident(_)) | Some(Tok::Underscore) | Some(Tok::Dollar) => {
            Ok(Pe::Atom(parse_pattern(cur)?))
        }
        Some(t) => {
            let msg = format!("expected expression, found {t}");
            Err(cur.err(msg))
        }
        None => Err(cur.err("expected expression, found end of input")),
    }
}

fn class_pattern(name: &str) -> Option<EventPattern> {
    let (tag, arg) = match name {
        "I_l" => ("I", "l"),
        "O_l" => ("O", "l"),
        "I_h" => ("I", "h"),
        "O_h" => ("O", "h"),
        _ => return None,
    };
    Some(EventPattern::with_args(tag, vec![ArgPattern::Eq(Value::from(arg)), ArgPattern::Any]))
}

fn parse_pattern(cur: &mut Cursor) -> Result<EventPattern, DslError> {
    match cur.peek() {
        Some(Tok::Underscore) => {
            cur.next();
            Ok(EventPattern::wildcard())
        }
        Some(Tok::Dollar) => {
            cur.next();
            Ok(EventPattern::end_marker())
        }
        Some(Tok::Ident(s)) => {
            let name = s.clone();
            cur.next();
            if let Some(class) = class_pattern(&name) {
                return Ok(class);
            }
            if cur.glued_lparen() {
                cur.next();
                let mut args = Vec::new();
                if cur.peek() != Some(&Tok::RParen) {
                    loop {
                        match cur.peek() {
                            Some(Tok::Underscore) => {
                                cur.next();
                                args.push(ArgPattern::Any);
                            }
                            Some(Tok::Int(n)) => {
                                let n = *n;
                                cur.next();
                                args.push(ArgPattern::Eq(Value::Int(n)));
                            }
                            Some(Tok::Ident(v)) => {
                                let v = v.clone();
                                cur.next();
                                args.push(ArgPattern::Eq(Value::Ident(v)));
                            }
                            _ => return Err(cur.err("expected argument value or `_`")),
                        }
                        if cur.peek() == Some(&Tok::Comma) {
                            cur.next();
                        } else {
                            break;
                        }
                    }
                }
                cur.expect(Tok::RParen)?;
                Ok(EventPattern::with_args(name, args))
            } else {
                Ok(EventPattern::tag(name))
            }
        }
        _ => Err(cur.err("expected event pattern")),
    }
}

// ---------------------------------------------------------------------------
// Events and traces

/// Parses a single event, e.g. `E`, `I(l,1)`, `Dbg(0)`.
pub fn parse_event(text: &str) -> Result<Event, DslError> {
    let mut cur = Cursor::new(lex(text)?);
    let ev = parse_event_at(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after event"));
    }
    Ok(ev)
}

fn parse_event_at(cur: &mut Cursor) -> Result<Event, DslError> {
    let tag = match cur.peek() {
        Some(Tok::Ident(s)) => {
            let s = s.clone();
            cur.next();
            s
        }
        Some(Tok::Dollar) => {
            cur.next();
            return Ok(Event::end_marker());
        }
        _ => return Err(cur.err("expected event tag")),
    };
    let mut args = Vec::new();
    if cur.glued_lparen() {
        cur.next();
        if cur.peek() != Some(&Tok::RParen) {
            loop {
                match cur.peek() {
                    Some(Tok::Int(n)) => {
                        args.push(Value::Int(*n));
                        cur.next();
                    }
                    Some(Tok::Ident(v)) => {
                        args.push(Value::Ident(v.clone()));
                        cur.next();
                    }
                    _ => return Err(cur.err("expected argument value")),
                }
                if cur.peek() == Some(&Tok::Comma) {
                    cur.next();
                } else {
                    break;
                }
            }
        }
        cur.expect(Tok::RParen)?;
    }
    Ok(Event::new(tag, args))
}

/// Parses a trace file: one event per line, `#` comments, blank lines
/// ignored. The end marker is synthetic and may not appear.
pub fn parse_trace(text: &str) -> Result<Vec<Event>, DslError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == END_TAG {
            return Err(DslError::Syntax {
                line: i + 1,
                col: 1,
                msg: "the end marker `$` is appended automatically and may not appear in a trace"
                    .to_string(),
            });
        }
        let ev = parse_event(line).map_err(|e| match e {
            DslError::Syntax { col, msg, .. } => DslError::Syntax { line: i + 1, col, msg },
            other => other,
        })?;
        events.push(ev);
    }
    Ok(events)
}

/// Renders a trace in the line-based format (always LF).
pub fn print_trace(word: &[Event]) -> String {
    let mut out = String::new();
    for ev in word {
        out.push_str(&ev.to_string());
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Conditions

/// Raw comparison operand, resolved against the other side.
enum RawTerm {
    Bare(String),
    Slice(String, String),
    Pattern(EventPattern),
}

pub fn parse_condition(text: &str) -> Result<Condition, DslError> {
    let mut cur = Cursor::new(lex(text)?);
    let cond = parse_cond_implies(&mut cur)?;
    if !cur.at_end() {
        return Err(cur.err("trailing input after condition"));
    }
    Ok(cond)
}

fn parse_cond_implies(cur: &mut Cursor) -> Result<Condition, DslError> {
    let lhs = parse_cond_or(cur)?;
    if cur.peek() == Some(&Tok::Implies) {
        cur.next();
        let rhs = parse_cond_implies(cur)?;
        Ok(Condition::implies(lhs, rhs))
    } else {
        Ok(lhs)
    }
}

fn parse_cond_or(cur: &mut Cursor) -> Result<Condition, DslError> {
    let mut c = parse_cond_and(cur)?;
    while cur.peek() == Some(&Tok::OrOr) {
        cur.next();
        let rhs = parse_cond_and(cur)?;
        c = Condition::or(c, rhs);
    }
    Ok(c)
}

fn parse_cond_and(cur: &mut Cursor) -> Result<Condition, DslError> {
    let mut c = parse_cond_not(cur)?;
    while cur.peek() == Some(&Tok::AndAnd) {
        cur.next();
        let rhs = parse_cond_not(cur)?;
        c = Condition::and(c, rhs);
    }
    Ok(c)
}

fn parse_cond_not(cur: &mut Cursor) -> Result<Condition, DslError> {
    match cur.peek() {
        Some(Tok::Bang) => {
            cur.next();
            Ok(Condition::not(parse_cond_not(cur)?))
        }
        Some(Tok::LParen) => {
            cur.next();
            let c = parse_cond_implies(cur)?;
            cur.expect(Tok::RParen)?;
            Ok(c)
        }
        Some(Tok::Ident(s)) if s == "true" => {
            cur.next();
            Ok(Condition::True)
        }
        _ => parse_comparison(cur),
    }
}

fn parse_comparison(cur: &mut Cursor) -> Result<Condition, DslError> {
    let lhs = parse_raw_term(cur)?;
    let negated = match cur.peek() {
        Some(Tok::Eq) => false,
        Some(Tok::Neq) => true,
        _ => return Err(cur.err("expected `=` or `!=` in condition")),
    };
    cur.next();
    let rhs = parse_raw_term(cur)?;
    let cond = resolve_comparison(cur, lhs, rhs)?;
    Ok(if negated { Condition::not(cond) } else { cond })
}

/// Resolves operand roles: two bare identifiers compare label m-strings, two
/// slices compare words, and a pattern (or a bare identifier opposite a
/// slice, read as a tag pattern) turns the comparison into a shape check.
fn resolve_comparison(cur: &Cursor, lhs: RawTerm, rhs: RawTerm) -> Result<Condition, DslError> {
    use RawTerm::*;
    match (lhs, rhs) {
        (Bare(a), Bare(b)) => Ok(Condition::eq(Term::label(a), Term::label(b))),
        (Slice(va, la), Slice(vb, lb)) => Ok(Condition::eq(
            Term::trace_slice(va, Term::label(la)),
            Term::trace_slice(vb, Term::label(lb)),
        )),
        (Slice(v, l), Pattern(p)) | (Pattern(p), Slice(v, l)) => {
            Ok(Condition::matches(Term::trace_slice(v, Term::label(l)), p))
        }
        (Slice(v, l), Bare(tag)) | (Bare(tag), Slice(v, l)) => Ok(Condition::matches(
            Term::trace_slice(v, Term::label(l)),
            EventPattern::tag(tag),
        )),
        (Pattern(_), Pattern(_)) => {
            Err(cur.err("cannot compare two event patterns; one side must be a trace slice"))
        }
        (Bare(_), Pattern(_)) | (Pattern(_), Bare(_)) => Err(DslError::CondType(
            "an event pattern can only be compared against a trace slice `t[l]`".to_string(),
        )),
    }
}

fn parse_raw_term(cur: &mut Cursor) -> Result<RawTerm, DslError> {
    match cur.peek() {
        Some(Tok::Underscore) | Some(Tok::Dollar) => Ok(RawTerm::Pattern(parse_pattern(cur)?)),
        Some(Tok::Ident(s)) => {
            let name = s.clone();
            if let Some(p) = class_pattern(&name) {
                cur.next();
                return Ok(RawTerm::Pattern(p));
            }
            if cur.peek2() == Some(&Tok::LBracket) {
                cur.next();
                cur.expect(Tok::LBracket)?;
                let label = cur.expect_ident()?;
                cur.expect(Tok::RBracket)?;
                return Ok(RawTerm::Slice(name, label));
            }
            if cur.glued_lparen2() {
                return Ok(RawTerm::Pattern(parse_pattern(cur)?));
            }
            cur.next();
            Ok(RawTerm::Bare(name))
        }
        _ => Err(cur.err("expected term")),
    }
}

/// Canonical (sugar-free) rendering of a condition; parses back to the same
/// structure.
pub fn print_condition(c: &Condition) -> String {
    fn go(c: &Condition, out: &mut String) {
        match c {
            Condition::True => out.push_str("true"),
            Condition::Eq(a, b) => {
                out.push_str(&print_term(a));
                out.push_str(" = ");
                out.push_str(&print_term(b));
            }
            Condition::Matches(t, p) => {
                out.push_str(&print_term(t));
                out.push_str(" = ");
                out.push_str(&p.to_string());
            }
            Condition::Not(inner) => {
                out.push('!');
                match **inner {
                    Condition::And(..) => {
                        out.push('(');
                        go(inner, out);
                        out.push(')');
                    }
                    _ => go(inner, out),
                }
            }
            Condition::And(a, b) => {
                for (i, side) in [a, b].into_iter().enumerate() {
                    if i > 0 {
                        out.push_str(" && ");
                    }
                    match **side {
                        Condition::And(..) => {
                            out.push('(');
                            go(side, out);
                            out.push(')');
                        }
                        _ => go(side, out),
                    }
                }
            }
        }
    }
    let mut out = String::new();
    go(c, &mut out);
    out
}

fn print_term(t: &Term) -> String {
    match t {
        Term::LabelRef(l) => l.clone(),
        Term::TraceSlice(v, inner) => match &**inner {
            Term::LabelRef(l) => format!("{v}[{l}]"),
            other => format!("{v}[{}]", print_term(other)),
        },
        Term::ConstWord(w) => crate::event::format_word(w),
        Term::ConstMString(s) => s.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Transducers

pub fn parse_mpt(text: &str) -> Result<Mpt, DslError> {
    let mut cur = Cursor::new(lex(text)?);
    let mut in_vars: Vec<String> = Vec::new();
    let mut out_vars: Vec<String> = Vec::new();
    let mut alphabet: Vec<EventPattern> = Vec::new();
    let mut state_names: Vec<String> = Vec::new();
    let mut initial: Option<String> = None;
    let mut deterministic = false;
    let mut raw_edges: Vec<(String, String, EdgeBody)> = Vec::new();

    while !cur.at_end() {
        match cur.peek() {
            Some(Tok::Ident(kw)) => {
                let kw = kw.clone();
                match kw.as_str() {
                    "input" => {
                        cur.next();
                        while let Some(Tok::Ident(_)) = cur.peek() {
                            in_vars.push(cur.expect_ident()?);
                        }
                        cur.expect(Tok::Semi)?;
                    }
                    "output" => {
                        cur.next();
                        while let Some(Tok::Ident(_)) = cur.peek() {
                            out_vars.push(cur.expect_ident()?);
                        }
                        cur.expect(Tok::Semi)?;
                    }
                    "alphabet" => {
                        cur.next();
                        while cur.peek() != Some(&Tok::Semi) {
                            alphabet.push(parse_pattern(&mut cur)?);
                            if cur.peek() == Some(&Tok::Comma) {
                                cur.next();
                            }
                        }
                        cur.expect(Tok::Semi)?;
                    }
                    "states" => {
                        cur.next();
                        while let Some(Tok::Ident(_)) = cur.peek() {
                            state_names.push(cur.expect_ident()?);
                        }
                        cur.expect(Tok::Semi)?;
                    }
                    "init" => {
                        cur.next();
                        initial = Some(cur.expect_ident()?);
                        cur.expect(Tok::Semi)?;
                    }
                    "deterministic" => {
                        cur.next();
                        deterministic = true;
                        cur.expect(Tok::Semi)?;
                    }
                    _ => {
                        // An edge: `state -> state { ... }`.
                        let from = cur.expect_ident()?;
                        cur.expect(Tok::Arrow)?;
                        let to = cur.expect_ident()?;
                        raw_edges.push((from, to, parse_edge_body(&mut cur)?));
                    }
                }
            }
            Some(t) => {
                let msg = format!("expected statement, found {t}");
                return Err(cur.err(msg));
            }
            None => break,
        }
    }

    let initial_name =
        initial.ok_or_else(|| DslError::Semantic("missing `init` statement".to_string()))?;
    let initial_id = state_names
        .iter()
        .position(|s| *s == initial_name)
        .ok_or_else(|| DslError::UnknownState(initial_name.clone()))?;

    let mut edges = Vec::new();
    for (from, to, (bindings, condition, output, priority)) in raw_edges {
        let from_id = state_names
            .iter()
            .position(|s| *s == from)
            .ok_or_else(|| DslError::UnknownState(from.clone()))?;
        let to_id = state_names
            .iter()
            .position(|s| *s == to)
            .ok_or_else(|| DslError::UnknownState(to.clone()))?;
        for (var, _) in &bindings {
            if !in_vars.contains(var) {
                return Err(DslError::UnknownTraceVar(var.clone()));
            }
        }
        for var in condition.trace_vars() {
            if !in_vars.contains(&var) {
                return Err(DslError::UnknownTraceVar(var));
            }
        }
        for (var, _) in output.iter() {
            if !out_vars.contains(var) {
                return Err(DslError::Semantic(format!("unknown output variable `{var}`")));
            }
        }
        let mpe = Mpe::new(bindings, condition).map_err(|e| match e {
            crate::mpe::MpeError::DuplicateLabelAcrossTraces(l) => {
                DslError::DuplicateLabelAcrossTraces(l)
            }
            crate::mpe::MpeError::Pe(PeError::DuplicateLabel(l)) => DslError::DuplicateLabel(l),
            crate::mpe::MpeError::Pe(PeError::InvalidIterRhs(s)) => DslError::InvalidIterRhs(s),
            other => DslError::Semantic(other.to_string()),
        })?;
        edges.push(Edge { from: from_id, mpe, output, to: to_id, priority });
    }

    let mpt = Mpt {
        in_vars,
        out_vars,
        in_alphabet: alphabet,
        state_names,
        initial: initial_id,
        edges,
        deterministic_hint: deterministic,
    };
    mpt.validate().map_err(|e| DslError::Semantic(e.to_string()))?;
    Ok(mpt)
}

type EdgeBody = (Vec<(String, Pe)>, Condition, OutputAssignment, i64);

fn parse_edge_body(cur: &mut Cursor) -> Result<EdgeBody, DslError> {
    cur.expect(Tok::LBrace)?;
    let mut bindings: Vec<(String, Pe)> = Vec::new();
    let mut condition = Condition::True;
    let mut output = OutputAssignment::new();
    let mut priority: i64 = 0;

    while cur.peek() != Some(&Tok::RBrace) {
        let key = cur.expect_ident()?;
        cur.expect(Tok::Colon)?;
        match key.as_str() {
            "cond" => {
                condition = parse_cond_implies(cur)?;
                cur.expect(Tok::Semi)?;
            }
            "out" => {
                let var = cur.expect_ident()?;
                cur.expect(Tok::PlusEq)?;
                let mut syms = Vec::new();
                while cur.peek() != Some(&Tok::Semi) {
                    syms.push(parse_outsym(cur)?);
                    if cur.peek() == Some(&Tok::Comma) {
                        cur.next();
                    }
                }
                cur.expect(Tok::Semi)?;
                output = output.concat(&OutputAssignment::assign(var, syms));
            }
            "prio" => {
                let negative = if cur.peek() == Some(&Tok::Minus) {
                    cur.next();
                    true
                } else {
                    false
                };
                let n = match cur.peek() {
                    Some(Tok::Int(n)) => *n as i64,
                    _ => return Err(cur.err("expected integer priority")),
                };
                cur.next();
                priority = if negative { -n } else { n };
                cur.expect(Tok::Semi)?;
            }
            var => {
                let pe = parse_alt(cur)?;
                validate_pe(&pe)?;
                cur.expect(Tok::Semi)?;
                bindings.push((var.to_string(), pe));
            }
        }
    }
    cur.expect(Tok::RBrace)?;
    Ok((bindings, condition, output, priority))
}

fn parse_outsym(cur: &mut Cursor) -> Result<OutSym, DslError> {
    match cur.peek() {
        Some(Tok::BotSym) => {
            cur.next();
            Ok(OutSym::Bot)
        }
        Some(Tok::TopSym) => {
            cur.next();
            Ok(OutSym::Top)
        }
        Some(Tok::Ident(s)) if s == "bot" => {
            cur.next();
            Ok(OutSym::Bot)
        }
        Some(Tok::Ident(s)) if s == "top" => {
            cur.next();
            Ok(OutSym::Top)
        }
        Some(Tok::Ident(_)) => Ok(OutSym::Sym(parse_event_at(cur)?)),
        _ => Err(cur.err("expected output symbol (`bot`, `top`, ⊥, ⊤, or an event)")),
    }
}

/// Canonical textual form of a transducer; parses back to the same value.
pub fn print_mpt(mpt: &Mpt) -> String {
    let mut out = String::new();
    out.push_str(&format!("input {};\n", mpt.in_vars.join(" ")));
    out.push_str(&format!("output {};\n", mpt.out_vars.join(" ")));
    if !mpt.in_alphabet.is_empty() {
        let pats: Vec<String> = mpt.in_alphabet.iter().map(|p| p.to_string()).collect();
        out.push_str(&format!("alphabet {};\n", pats.join(" ")));
    }
    out.push_str(&format!("states {};\n", mpt.state_names.join(" ")));
    out.push_str(&format!("init {};\n", mpt.state_names[mpt.initial]));
    if mpt.deterministic_hint {
        out.push_str("deterministic;\n");
    }
    for edge in &mpt.edges {
        out.push_str(&format!(
            "\n{} -> {} {{\n",
            mpt.state_names[edge.from], mpt.state_names[edge.to]
        ));
        for (var, pe) in edge.mpe.bindings() {
            out.push_str(&format!("  {var}: {pe};\n"));
        }
        if *edge.mpe.condition() != Condition::True {
            out.push_str(&format!("  cond: {};\n", print_condition(edge.mpe.condition())));
        }
        for (var, word) in edge.output.iter() {
            let syms: Vec<String> = word
                .iter()
                .map(|s| match s {
                    OutSym::Bot => "bot".to_string(),
                    OutSym::Top => "top".to_string(),
                    OutSym::Sym(e) => e.to_string(),
                })
                .collect();
            out.push_str(&format!("  out: {var} += {};\n", syms.join(" ")));
        }
        if edge.priority != 0 {
            out.push_str(&format!("  prio: {};\n", edge.priority));
        }
        out.push_str("}\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::word_of_letters;

    #[test]
    fn parse_iteration_with_label() {
        let pe = parse_pe("[ a + b ]@l U a").unwrap();
        let expected = Pe::iter(
            Pe::labeled("l", Pe::or(Pe::letter("a"), Pe::letter("b"))),
            Pe::letter("a"),
        );
        assert_eq!(pe, expected);
    }

    #[test]
    fn parse_single_letter() {
        assert_eq!(parse_pe("a").unwrap(), Pe::letter("a"));
    }

    #[test]
    fn precedence_iteration_concat_plus() {
        // a.b+c U d  parses as  (a.b) + (c U d)
        let pe = parse_pe("a.b+c U d").unwrap();
        let expected = Pe::or(
            Pe::concat(Pe::letter("a"), Pe::letter("b")),
            Pe::iter(Pe::letter("c"), Pe::letter("d")),
        );
        assert_eq!(pe, expected);
    }

    #[test]
    fn juxtaposition_is_concatenation() {
        assert_eq!(parse_pe("a b c").unwrap(), parse_pe("a.b.c").unwrap());
    }

    #[test]
    fn iteration_rhs_must_be_single_letter() {
        let err = parse_pe("(a.b) U ((a+b) U c)").unwrap_err();
        assert!(matches!(err, DslError::InvalidIterRhs(_)), "{err:?}");
        let err = parse_pe("a U (b c)").unwrap_err();
        assert!(matches!(err, DslError::InvalidIterRhs(_)));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = parse_pe("[ a ]@l [ b ]@l").unwrap_err();
        assert!(matches!(err, DslError::DuplicateLabel(_)));
    }

    #[test]
    fn labeled_rhs_in_iteration_is_legal() {
        let pe = parse_pe("E U [ I_l + O_l ]@e1").unwrap();
        pe.validate().unwrap();
    }

    #[test]
    fn patterns_and_classes() {
        assert_eq!(parse_pe("_").unwrap(), Pe::Atom(EventPattern::wildcard()));
        assert_eq!(parse_pe("I_l").unwrap(), Pe::Atom(EventPattern::low_input()));
        assert_eq!(
            parse_pe("I(l,_)").unwrap(),
            Pe::Atom(EventPattern::with_args(
                "I",
                vec![ArgPattern::Eq(Value::from("l")), ArgPattern::Any]
            ))
        );
        assert_eq!(parse_pe("$").unwrap(), Pe::Atom(EventPattern::end_marker()));
    }

    #[test]
    fn pe_display_round_trips() {
        for text in [
            "[ a + b ]@l U a",
            "a (b + c U d)",
            "b ([ a b ]@l U b) (b + a)",
            "eps + a",
            "_ U [ I_l + O_l ]@e1",
            "I(l,1) O(_,_) E",
        ] {
            let pe = parse_pe(text).unwrap();
            let printed = pe.to_string();
            let reparsed = parse_pe(&printed).unwrap();
            assert_eq!(pe, reparsed, "printed as {printed}");
        }
    }

    #[test]
    fn trace_file_round_trip() {
        let text = "I(l,1)\nI(h,1)\n# comment\n\nO(l,1)\nO(l,1)\n";
        let tr = parse_trace(text).unwrap();
        assert_eq!(tr.len(), 4);
        assert_eq!(tr[0], Event::new("I", vec!["l".into(), 1u64.into()]));
        let printed = print_trace(&tr);
        assert_eq!(parse_trace(&printed).unwrap(), tr);
    }

    #[test]
    fn trace_file_rejects_end_marker() {
        let err = parse_trace("I(l,1)\n$\n").unwrap_err();
        assert!(matches!(err, DslError::Syntax { line: 2, .. }));
    }

    #[test]
    fn empty_trace_file() {
        assert!(parse_trace("# nothing\n\n").unwrap().is_empty());
    }

    #[test]
    fn condition_forms() {
        let c = parse_condition("l1 = l2").unwrap();
        assert_eq!(c, Condition::eq(Term::label("l1"), Term::label("l2")));

        let c = parse_condition("t1[e1] != t2[e2]").unwrap();
        assert_eq!(
            c,
            Condition::neq(
                Term::trace_slice("t1", Term::label("e1")),
                Term::trace_slice("t2", Term::label("e2")),
            )
        );

        let c = parse_condition("t1[e1] = O_l").unwrap();
        assert_eq!(
            c,
            Condition::matches(
                Term::trace_slice("t1", Term::label("e1")),
                EventPattern::low_output()
            )
        );

        let c = parse_condition("t1[e1] = $").unwrap();
        assert_eq!(
            c,
            Condition::matches(
                Term::trace_slice("t1", Term::label("e1")),
                EventPattern::end_marker()
            )
        );
    }

    #[test]
    fn condition_implication_expands() {
        let c = parse_condition("t1[e1] = O_l => !(t2[e2] = O_l) && !(t2[e2] = $)").unwrap();
        let antecedent = Condition::matches(
            Term::trace_slice("t1", Term::label("e1")),
            EventPattern::low_output(),
        );
        let consequent = Condition::and(
            Condition::not(Condition::matches(
                Term::trace_slice("t2", Term::label("e2")),
                EventPattern::low_output(),
            )),
            Condition::not(Condition::matches(
                Term::trace_slice("t2", Term::label("e2")),
                EventPattern::end_marker(),
            )),
        );
        assert_eq!(c, Condition::implies(antecedent, consequent));
    }

    #[test]
    fn condition_print_round_trips() {
        for text in [
            "l1 = l2",
            "t1[e1] != t2[e2]",
            "t1[e1] = O_l && !(t2[e2] = $)",
            "l1 = l2 && t1[l1] != t2[l2]",
            "true",
            "t1[e1] = E",
        ] {
            let c = parse_condition(text).unwrap();
            let printed = print_condition(&c);
            assert_eq!(parse_condition(&printed).unwrap(), c, "printed as {printed}");
        }
    }

    fn alternating_text() -> &'static str {
        "input t1 t2;\n\
         output to;\n\
         states q0 q1;\n\
         init q0;\n\
         deterministic;\n\
         q0 -> q1 { t1: [ a b ]@l1 U c; t2: [ b a ]@l2 U c; cond: l1 = l2; out: to += bot; }\n\
         q1 -> q1 { t1: [ a + b ]@l1; t2: [ a + b ]@l2; cond: t1[l1] != t2[l2]; out: to += top; }\n"
    }

    #[test]
    fn parse_alternating_mpt() {
        let mpt = parse_mpt(alternating_text()).unwrap();
        assert_eq!(mpt.state_names.len(), 2);
        assert_eq!(mpt.edges.len(), 2);
        assert!(mpt.deterministic_hint);
        assert_eq!(mpt.edges[0].output.get("to").unwrap(), &[OutSym::Bot][..]);

        let mut sigma = std::collections::BTreeMap::new();
        sigma.insert("t1".to_string(), word_of_letters("ababcaba"));
        sigma.insert("t2".to_string(), word_of_letters("babacbab"));
        let run = crate::mpt::run_offline(&mpt, &sigma, 100).unwrap();
        assert_eq!(run.output.to_string(), "{to↦⊥⊤⊤⊤}");
    }

    #[test]
    fn mpt_print_round_trips() {
        let mpt = parse_mpt(alternating_text()).unwrap();
        let printed = print_mpt(&mpt);
        let reparsed = parse_mpt(&printed).unwrap();
        assert_eq!(mpt, reparsed, "printed as:\n{printed}");
    }

    #[test]
    fn mpt_unknown_trace_var() {
        let text = "input t1 t2;\noutput to;\nstates q0;\ninit q0;\n\
                    q0 -> q0 { t3: a; }\n";
        assert_eq!(parse_mpt(text).unwrap_err(), DslError::UnknownTraceVar("t3".into()));
    }

    #[test]
    fn mpt_unknown_state() {
        let text = "input t1;\noutput to;\nstates q0;\ninit q0;\n\
                    q0 -> q9 { t1: a; }\n";
        assert_eq!(parse_mpt(text).unwrap_err(), DslError::UnknownState("q9".into()));
    }

    #[test]
    fn mpt_duplicate_label_across_traces() {
        let text = "input t1 t2;\noutput to;\nstates q0;\ninit q0;\n\
                    q0 -> q0 { t1: [ a ]@l; t2: [ b ]@l; }\n";
        assert_eq!(
            parse_mpt(text).unwrap_err(),
            DslError::DuplicateLabelAcrossTraces("l".into())
        );
    }
}
