//! Prefix expressions, multi-trace prefix transducers, and online monitoring
//! of k-safety hyperproperties.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`pe`] — prefix expressions: regex-like expressions that match the
//!   shortest non-empty prefix of a word, evaluated by derivative-style
//!   rewriting while collecting match positions for labeled subexpressions.
//! * [`mpe`] — multi-trace prefix expressions: one prefix expression per
//!   trace variable plus a condition over the matched slices.
//! * [`mpt`] — multi-trace prefix transducers: finite-state machines guarded
//!   by multi-trace prefix expressions that append to output traces.
//! * [`compile`] — translation of a prefix expression into its finite
//!   derivative transducer, with DOT/JSON export.
//! * [`monitor`] — the online monitor: instantiates a transducer over every
//!   k-tuple of input traces and reports violations.
//! * [`dsl`] — textual formats for expressions, transducers, and traces.
//! * [`gen`] — deterministic trace generators for experiments.

pub mod compile;
pub mod dsl;
pub mod event;
pub mod gen;
pub mod monitor;
pub mod mpe;
pub mod mpt;
pub mod mstring;
pub mod pe;

pub use event::{Event, EventPattern, Value};
pub use mstring::{Label, MMap, MPair, MString};
pub use pe::{decompose, evaluate, nullable, slice, step, Pe, StepResult};
