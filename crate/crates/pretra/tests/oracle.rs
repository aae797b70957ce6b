//! Differential checks of the evaluator against an independent brute-force
//! matcher.
//!
//! The oracle implements iteration as literal left-to-right trial — try the
//! one-letter right-hand side, otherwise match the whole left-hand side and
//! repeat — and reconstructs m-maps from per-step label contributions. It
//! shares no code with the one-step rewriting engine beyond the m-string
//! algebra itself.
//!
//! The random corpus excludes ε inside disjunctions (their early-completion
//! behavior is pinned by directed unit tests in the library).

mod common;

use common::{alphabet_events, PeGen};
use pretra::event::Event;
use pretra::mstring::{MMap, MPair, MString};
use pretra::pe::{applicable_rules, decompose, evaluate, nullable, Pe};

type Delta = Vec<(String, MPair)>;

#[derive(Debug, Clone, PartialEq)]
enum Out {
    /// Completed after `deltas.len()` letters.
    Done(Vec<Delta>),
    /// Died at the final recorded step.
    Dead(Vec<Delta>),
    /// Ran out of word while still alive.
    More(Vec<Delta>),
}

use Out::*;

fn merge_or(a: &[Delta], b: &[Delta], upto: usize) -> Vec<Delta> {
    (0..upto)
        .map(|i| {
            let mut d = Delta::new();
            if let Some(x) = a.get(i) {
                d.extend(x.iter().cloned());
            }
            if let Some(x) = b.get(i) {
                d.extend(x.iter().cloned());
            }
            d
        })
        .collect()
}

fn bmatch(pe: &Pe, w: &[Event], pos: usize) -> Out {
    match pe {
        Pe::Epsilon => Done(vec![]),
        Pe::Bottom => Dead(vec![vec![]]),
        Pe::Atom(pat) => {
            if pos >= w.len() {
                More(vec![])
            } else if pat.matches(&w[pos]) {
                Done(vec![vec![]])
            } else {
                Dead(vec![vec![]])
            }
        }
        Pe::Concat(a, b) => {
            let first = bmatch(a, w, pos);
            match first {
                Done(da) => {
                    let next = bmatch(b, w, pos + da.len());
                    match next {
                        Done(db) => Done([da, db].concat()),
                        Dead(db) => Dead([da, db].concat()),
                        More(db) => More([da, db].concat()),
                    }
                }
                other => other,
            }
        }
        Pe::Or(a, b) => {
            let oa = bmatch(a, w, pos);
            let ob = bmatch(b, w, pos);
            let (da, ta) = parts(&oa);
            let (db, tb) = parts(&ob);
            match (ta, tb) {
                (Kind::Done, Kind::Done) => {
                    let upto = da.len().min(db.len());
                    Done(merge_or(da, db, upto))
                }
                (Kind::Done, _) => Done(merge_or(da, db, da.len())),
                (_, Kind::Done) => Done(merge_or(da, db, db.len())),
                (Kind::Dead, Kind::Dead) => {
                    let upto = da.len().max(db.len());
                    Dead(merge_or(da, db, upto))
                }
                // An alive branch outlives a dead one; the word ran out.
                _ => {
                    let upto = da.len().max(db.len());
                    More(merge_or(da, db, upto))
                }
            }
        }
        Pe::Iter(a, b) => {
            let mut acc: Vec<Delta> = Vec::new();
            let mut q = pos;
            loop {
                match bmatch(b, w, q) {
                    More(_) => return More(acc),
                    Done(db) => {
                        debug_assert_eq!(db.len(), 1);
                        acc.extend(db);
                        return Done(acc);
                    }
                    Dead(_) => {
                        // The right-hand side's trial contributes nothing;
                        // the letter goes to the left-hand side instead.
                        if **a == Pe::Epsilon {
                            acc.push(vec![]);
                            return Dead(acc);
                        }
                        match bmatch(a, w, q) {
                            Done(da) => {
                                q += da.len();
                                acc.extend(da);
                            }
                            Dead(da) => {
                                acc.extend(da);
                                return Dead(acc);
                            }
                            More(da) => {
                                acc.extend(da);
                                return More(acc);
                            }
                        }
                    }
                }
            }
        }
        Pe::Labeled(l, a) => match bmatch(a, w, pos) {
            Done(mut da) => {
                let n = da.len();
                if n == 1 {
                    da[0].push((l.clone(), MPair::closed(pos, pos)));
                } else if n >= 2 {
                    da[0].push((l.clone(), MPair::open(pos)));
                    da[n - 1].push((l.clone(), MPair::close(pos + n - 1)));
                }
                Done(da)
            }
            Dead(mut da) => {
                // Survived at least one step: the match was opened before it
                // failed, leaving the dangling marker behind.
                if da.len() >= 2 {
                    da[0].push((l.clone(), MPair::open(pos)));
                }
                Dead(da)
            }
            More(mut da) => {
                if !da.is_empty() {
                    da[0].push((l.clone(), MPair::open(pos)));
                }
                More(da)
            }
        },
        Pe::InFlight(..) => unreachable!("not part of the corpus"),
    }
}

enum Kind {
    Done,
    Dead,
    More,
}

fn parts(o: &Out) -> (&Vec<Delta>, Kind) {
    match o {
        Done(d) => (d, Kind::Done),
        Dead(d) => (d, Kind::Dead),
        More(d) => (d, Kind::More),
    }
}

/// Oracle decomposition: matched prefix length and reconstructed m-map.
fn oracle_decompose(pe: &Pe, w: &[Event]) -> Option<(usize, MMap)> {
    match bmatch(pe, w, 0) {
        Done(deltas) => {
            let mut mmap = MMap::new();
            for delta in &deltas {
                for (label, pair) in delta {
                    let s = mmap.get(label).cloned().unwrap_or_default();
                    let joined = s.concat_pair(*pair).expect("oracle m-string stays defined");
                    mmap.insert(label.clone(), joined);
                }
            }
            Some((deltas.len(), mmap))
        }
        _ => None,
    }
}

#[test]
fn oracle_agrees_with_decompose_on_random_corpus() {
    let mut gen = PeGen::new(0xC0FFEE);
    let mut matches = 0usize;
    for case in 0..4000 {
        gen.reset_labels();
        let pe = gen.pe(7);
        let w = gen.word(8);
        let expected = oracle_decompose(&pe, &w);
        let actual = decompose(&pe, &w);
        match (&expected, &actual) {
            (None, None) => {}
            (Some((len, mmap)), Some(d)) => {
                matches += 1;
                assert_eq!(*len, d.consumed(), "case {case}: pe={pe} w={w:?}");
                assert_eq!(mmap, &d.mmap, "case {case}: pe={pe} w={w:?}");
            }
            _ => panic!(
                "case {case}: oracle={expected:?} engine={actual:?} pe={pe} w={w:?}"
            ),
        }
    }
    assert!(matches > 200, "corpus too easy: only {matches} matches");
}

#[test]
fn shortest_match_no_proper_prefix_also_matches() {
    let mut gen = PeGen::new(7);
    for _ in 0..2000 {
        gen.reset_labels();
        let pe = gen.pe(7);
        let w = gen.word(8);
        if let Some(d) = decompose(&pe, &w) {
            for cut in 0..d.consumed() {
                let (residual, _) = evaluate(&pe, &w[..cut]);
                assert_ne!(
                    residual,
                    Pe::Epsilon,
                    "proper prefix of length {cut} already matched for {pe}"
                );
            }
        }
    }
}

#[test]
fn exactly_one_rule_applies_along_random_evaluations() {
    let mut gen = PeGen::new(99);
    let letters = alphabet_events();
    for _ in 0..1000 {
        gen.reset_labels();
        let mut pe = gen.pe(7);
        let w = gen.word(8);
        let mut mmap = MMap::new();
        for (p, ev) in w.iter().enumerate() {
            for probe in &letters {
                let rules = applicable_rules(&pe, probe);
                assert_eq!(rules.len(), 1, "pe={pe} probe={probe} rules={rules:?}");
            }
            let r = pretra::pe::step(&pe, &mmap, ev, p);
            pe = r.residual;
            mmap = r.mmap;
        }
    }
}

#[test]
fn bottom_absorbs_along_random_words() {
    let mut gen = PeGen::new(1234);
    for _ in 0..500 {
        gen.reset_labels();
        let pe = gen.pe(6);
        let w = gen.word(8);
        let mut cur = pe;
        let mut mmap = MMap::new();
        let mut dead = false;
        for (p, ev) in w.iter().enumerate() {
            let r = pretra::pe::step(&cur, &mmap, ev, p);
            cur = r.residual;
            mmap = r.mmap;
            if dead {
                assert_eq!(cur, Pe::Bottom);
                assert!(mmap.is_empty());
            }
            if cur == Pe::Bottom {
                assert!(mmap.is_empty(), "failed step must clear the m-map");
                dead = true;
            }
        }
    }
}

#[test]
fn well_formedness_preserved_by_evaluation_discipline() {
    // Evaluation only ever closes a pending open; under that discipline every
    // defined ⊙ application preserves well-formedness.
    let mut gen = PeGen::new(5150);
    for round in 0..1000u64 {
        let mut s = MString::new();
        for step in 0..12usize {
            let open_pending = s.pairs().last().map(|p| p.end.is_none()).unwrap_or(false);
            let roll = (round as usize + step * 7 + gen.word(3).len()) % 3;
            let candidate = match roll {
                1 if open_pending => MPair::close(step),
                0 => MPair::open(step),
                _ => MPair::closed(step, step),
            };
            match s.concat_pair(candidate) {
                Ok(next) => {
                    assert!(next.is_well_formed(), "{s} ⊙ {candidate} = {next}");
                    s = next;
                }
                Err(_) => {
                    // Only ε ⊙ (⊥, d) is outside the domain.
                    assert!(s.is_empty() && candidate.start.is_none());
                }
            }
        }
    }
}

#[test]
fn close_after_closed_pair_appends_verbatim() {
    // The raw algebra also defines closing after a completed pair; the
    // closing marker is simply appended. Evaluation never produces this.
    let s = MString::from_pairs(vec![MPair::closed(0, 0)]);
    let r = s.concat_pair(MPair::close(5)).unwrap();
    assert_eq!(r.pairs(), &[MPair::closed(0, 0), MPair::close(5)]);
}

#[test]
fn nullable_matches_structural_definition_on_corpus() {
    let mut gen = PeGen::new(31337);
    for _ in 0..500 {
        gen.reset_labels();
        let pe = gen.pe(7);
        // The ε-free corpus has no nullable expressions at all.
        assert!(!nullable(&pe), "{pe}");
    }
}
