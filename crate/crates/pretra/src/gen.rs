//! Deterministic trace generators for the monitoring experiments.
//!
//! The random profile draws each event independently: a low input with
//! probability `low_in_pct`%, a low output with `low_out_pct`%, otherwise the
//! padding event `E`. Low events carry a value below `value_range` (small
//! ranges make coinciding traces likely). The periodic profile builds one
//! template trace with low inputs and outputs at fixed offsets in every
//! `period`-sized window and replicates it.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::event::{Event, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone)]
pub struct RandomParams {
    pub count: usize,
    pub length: usize,
    pub low_in_pct: u32,
    pub low_out_pct: u32,
    pub value_range: u64,
    pub seed: u64,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            count: 10,
            length: 50,
            low_in_pct: 10,
            low_out_pct: 10,
            value_range: 2,
            seed: 0,
        }
    }
}

fn low_input(v: u64) -> Event {
    Event::new("I", vec![Value::from("l"), Value::Int(v)])
}

fn low_output(v: u64) -> Event {
    Event::new("O", vec![Value::from("l"), Value::Int(v)])
}

/// Generates `count` random traces; deterministic for a fixed seed.
pub fn random_traces(params: &RandomParams) -> Result<Vec<(String, Vec<Event>)>, GenError> {
    if params.low_in_pct + params.low_out_pct > 100 {
        return Err(GenError::InvalidParams(
            "low event percentages exceed 100".to_string(),
        ));
    }
    if params.value_range == 0 {
        return Err(GenError::InvalidParams("value range must be positive".to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = Vec::with_capacity(params.count);
    for t in 0..params.count {
        let mut events = Vec::with_capacity(params.length);
        for _ in 0..params.length {
            let roll = rng.next_u32() % 100;
            let value = rng.next_u64() % params.value_range;
            let ev = if roll < params.low_in_pct {
                low_input(value)
            } else if roll < params.low_in_pct + params.low_out_pct {
                low_output(value)
            } else {
                Event::bare("E")
            };
            events.push(ev);
        }
        out.push((format!("t{t:03}"), events));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PeriodicParams {
    pub count: usize,
    pub length: usize,
    pub period: usize,
    pub value_range: u64,
}

impl Default for PeriodicParams {
    fn default() -> Self {
        PeriodicParams { count: 10, length: 50, period: 5, value_range: 2 }
    }
}

/// One template trace replicated `count` times: position 0 of each window is
/// a low input, the middle of the window a low output, the rest padding.
pub fn periodic_traces(params: &PeriodicParams) -> Result<Vec<(String, Vec<Event>)>, GenError> {
    if params.period == 0 {
        return Err(GenError::InvalidParams("period must be positive".to_string()));
    }
    if params.value_range == 0 {
        return Err(GenError::InvalidParams("value range must be positive".to_string()));
    }
    let template = periodic_template(params.length, params.period, params.value_range);
    Ok((0..params.count).map(|t| (format!("t{t:03}"), template.clone())).collect())
}

/// The offsets are fixed by construction: `i ≡ 0 (mod period)` is a low
/// input, `i ≡ ⌈period/2⌉ (mod period)` a low output, with values cycling
/// through the range window by window.
pub fn periodic_template(length: usize, period: usize, value_range: u64) -> Vec<Event> {
    let out_offset = period.div_ceil(2) % period;
    (0..length)
        .map(|i| {
            let window = (i / period) as u64 % value_range.max(1);
            if i % period == 0 {
                low_input(window)
            } else if i % period == out_offset {
                low_output(window)
            } else {
                Event::bare("E")
            }
        })
        .collect()
}
