//! Shared helpers for the integration suites: a seeded generator of valid
//! prefix expressions and words over the abstract alphabet {a, b, c}.

use pretra::event::Event;
use pretra::pe::Pe;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ALPHABET: [&str; 3] = ["a", "b", "c"];

pub struct PeGen {
    rng: ChaCha8Rng,
    next_label: usize,
}

impl PeGen {
    pub fn new(seed: u64) -> Self {
        PeGen { rng: ChaCha8Rng::seed_from_u64(seed), next_label: 0 }
    }

    fn pick(&mut self, n: usize) -> usize {
        (self.rng.next_u32() as usize) % n
    }

    pub fn letter(&mut self) -> Pe {
        Pe::letter(ALPHABET[self.pick(ALPHABET.len())])
    }

    fn fresh_label(&mut self) -> String {
        let l = format!("l{}", self.next_label);
        self.next_label += 1;
        l
    }

    /// A valid iteration right-hand side: a letter, a disjunction of
    /// single-letter expressions, or a labeled one.
    fn single_letter(&mut self, allow_label: bool) -> Pe {
        match self.pick(if allow_label { 4 } else { 3 }) {
            0 | 1 => self.letter(),
            2 => Pe::or(self.letter(), self.letter()),
            _ => {
                let label = self.fresh_label();
                Pe::labeled(label, Pe::or(self.letter(), self.letter()))
            }
        }
    }

    /// A random expression with at most `size` operator/letter nodes.
    /// Labels are globally fresh, so any composition keeps them unique.
    /// ε is left out: disjuncts of ε make completion diverge from the
    /// textbook cases and are covered by directed tests instead.
    pub fn pe(&mut self, size: usize) -> Pe {
        if size <= 1 {
            return self.letter();
        }
        match self.pick(5) {
            0 => self.letter(),
            1 => {
                let left = size / 2;
                Pe::concat(self.pe(left.max(1)), self.pe((size - left).max(1)))
            }
            2 => {
                let left = size / 2;
                Pe::or(self.pe(left.max(1)), self.pe((size - left).max(1)))
            }
            3 => Pe::iter(self.pe(size.saturating_sub(2).max(1)), self.single_letter(true)),
            _ => {
                let label = self.fresh_label();
                Pe::labeled(label, self.pe(size - 1))
            }
        }
    }

    pub fn word(&mut self, max_len: usize) -> Vec<Event> {
        let len = self.pick(max_len + 1);
        (0..len).map(|_| Event::bare(ALPHABET[self.pick(ALPHABET.len())])).collect()
    }

    pub fn reset_labels(&mut self) {
        self.next_label = 0;
    }
}

pub fn alphabet_events() -> Vec<Event> {
    ALPHABET.iter().map(|s| Event::bare(*s)).collect()
}
