//! The acceptance suite: one test per shipped guarantee, each printing a
//! single PASS line (run with `--nocapture` to see them). Tolerances and
//! corpus sizes are pinned here, not configurable.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use common::{alphabet_events, PeGen};
use pretra::compile::{canonical, compile, derivative_closure};
use pretra::dsl::{parse_condition, parse_mpt, parse_pe, parse_trace};
use pretra::event::{word_of_letters, Event};
use pretra::gen::{periodic_traces, random_traces, PeriodicParams, RandomParams};
use pretra::monitor::{
    brute_force_od, monitor_loop, monitor_traces, Batch, MonitorOptions, ScriptedSource,
};
use pretra::mpe::Condition;
use pretra::mpt::{run_offline, OutSym};
use pretra::mstring::{MMap, MPair, MString};
use pretra::pe::{applicable_rules, decompose, evaluate, Pe};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec_text(name: &str) -> String {
    std::fs::read_to_string(
        std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs").join(name),
    )
    .unwrap()
}

fn ranges(pairs: &[(usize, usize)]) -> MString {
    MString::from_pairs(pairs.iter().map(|&(s, e)| MPair::closed(s, e)).collect())
}

fn pass(n: usize, what: &str) {
    println!("ACCEPTANCE {n:2} PASS — {what}");
}

#[test]
fn criterion_01_pe_golden_decompositions() {
    let budget_each = std::time::Duration::from_millis(1);

    let pe = parse_pe("[ a + b ]@l U a").unwrap();
    let w = word_of_letters("bbbaba");
    let started = Instant::now();
    let d = decompose(&pe, &w).unwrap();
    let elapsed1 = started.elapsed();
    assert_eq!(d.prefix, &w[..4]);
    assert_eq!(d.suffix, &w[4..]);
    assert_eq!(d.mmap.get("l").unwrap(), &ranges(&[(0, 0), (1, 1), (2, 2)]));

    let pe2 = parse_pe("[ a U b ]@l1 . [ (b + c) U (a + d) ]@l2").unwrap();
    let w2 = word_of_letters("aabbbada");
    let started = Instant::now();
    let d2 = decompose(&pe2, &w2).unwrap();
    let elapsed2 = started.elapsed();
    assert_eq!(d2.consumed(), 6);
    assert_eq!(d2.suffix, &w2[6..]);
    assert_eq!(d2.mmap.get("l1").unwrap(), &ranges(&[(0, 2)]));
    assert_eq!(d2.mmap.get("l2").unwrap(), &ranges(&[(3, 5)]));

    assert!(elapsed1 < budget_each, "first match took {elapsed1:?}");
    assert!(elapsed2 < budget_each, "second match took {elapsed2:?}");
    pass(1, "shortest-prefix matches with exact m-maps, under 1 ms each");
}

#[test]
fn criterion_02_mstring_algebra() {
    // The three concatenation cases.
    let s = ranges(&[(0, 4)]);
    assert_eq!(s.concat_pair(MPair::open(7)).unwrap().to_string(), "(0,4)(7,⊥)");
    let open = MString::from_pairs(vec![MPair::open(0)]);
    assert_eq!(open.concat_pair(MPair::open(2)).unwrap().to_string(), "(2,⊥)");
    assert_eq!(
        MString::new().concat_pair(MPair::closed(5, 5)).unwrap().to_string(),
        "(5,5)"
    );
    // ε ⊙ (⊥, d) is a domain error.
    assert!(MString::new().concat_pair(MPair::close(3)).is_err());

    // 1000 random sequences under the evaluation discipline stay well formed.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let mut s = MString::new();
        for step in 0..10usize {
            let open_pending = s.pairs().last().map(|p| p.end.is_none()).unwrap_or(false);
            let pair = match rng.next_u32() % 3 {
                1 if open_pending => MPair::close(step),
                0 => MPair::open(step),
                _ => MPair::closed(step, step),
            };
            s = s.concat_pair(pair).unwrap();
            assert!(s.is_well_formed(), "{s}");
        }
    }
    pass(2, "⊙ cases exact, domain error raised, 1000-sequence well-formedness");
}

#[test]
fn criterion_03_slice_condition() {
    let mut sigma = BTreeMap::new();
    sigma.insert("t1".to_string(), word_of_letters("abcba"));
    sigma.insert("t2".to_string(), word_of_letters("bacab"));
    let mut m = MMap::new();
    m.insert("l1", ranges(&[(0, 1), (3, 4)]));
    m.insert("l2", ranges(&[(0, 1), (3, 4)]));

    let cond = parse_condition("l1 = l2 && t1[l1] != t2[l2]").unwrap();
    assert!(cond.eval(&sigma, &m).unwrap());

    use pretra::mpe::{eval_term, Term, TermValue};
    let slice1 = eval_term(&Term::trace_slice("t1", Term::label("l1")), &sigma, &m).unwrap();
    let slice2 = eval_term(&Term::trace_slice("t2", Term::label("l2")), &sigma, &m).unwrap();
    assert_eq!(slice1, TermValue::Word(word_of_letters("abba")));
    assert_eq!(slice2, TermValue::Word(word_of_letters("baab")));
    pass(3, "condition true with slices abba and baab exactly");
}

#[test]
fn criterion_04_alternating_runs() {
    let mpt = parse_mpt(&spec_text("alternating.mpt")).unwrap();
    let sigma = |t1: &str, t2: &str| {
        let mut s = BTreeMap::new();
        s.insert("t1".to_string(), word_of_letters(t1));
        s.insert("t2".to_string(), word_of_letters(t2));
        s
    };

    let run = run_offline(&mpt, &sigma("ababcaba", "babacbab"), 100).unwrap();
    assert_eq!(
        run.output.get("to").unwrap(),
        &[OutSym::Bot, OutSym::Top, OutSym::Top, OutSym::Top][..]
    );
    let widths: Vec<Vec<usize>> = run
        .steps
        .iter()
        .map(|s| s.consumed.iter().map(|(_, a, b)| b - a).collect())
        .collect();
    assert_eq!(widths, vec![vec![5, 5], vec![1, 1], vec![1, 1], vec![1, 1]]);

    let stuck = run_offline(&mpt, &sigma("abababcaba", "babacbab"), 100).unwrap();
    assert!(stuck.stuck);
    assert_eq!(mpt.state_name(stuck.final_state), "q0");
    assert!(stuck.output.is_empty());

    let mut free = mpt.clone();
    let bindings = free.edges[0].mpe.bindings().to_vec();
    free.edges[0].mpe = pretra::mpe::Mpe::new(bindings, Condition::True).unwrap();
    let run = run_offline(&free, &sigma("abababcaba", "babacbab"), 100).unwrap();
    let first: Vec<usize> = run.steps[0].consumed.iter().map(|(_, a, b)| b - a).collect();
    assert_eq!(first, vec![7, 5]);
    pass(4, "output ⊥⊤⊤⊤ with step widths (5,5)(1,1)³; mismatch stuck; free variant (7,5)");
}

#[test]
fn criterion_05_compiler_figures_and_differential() {
    // Nested iterations: exactly the diagram's 5 expressions, 8 arrows.
    let nested = parse_pe("((a b) U c) U c").unwrap();
    let set = derivative_closure(&nested, &alphabet_events()).unwrap();
    assert_eq!(set.exprs.len(), 5);
    assert_eq!(set.grouped_live_transitions().len(), 8);

    // The figure transducer: 5 live states, the two labeled templates.
    let figure = parse_pe(spec_text("labeled_iteration.pe").trim()).unwrap();
    let fig_alphabet = vec![Event::bare("a"), Event::bare("b")];
    let t = compile(&figure, &fig_alphabet).unwrap();
    let live = t.set.exprs.iter().filter(|e| **e != Pe::Bottom).count();
    assert_eq!(live, 5);
    let templates: Vec<String> = t
        .set
        .transitions
        .values()
        .filter(|(_, tmpl)| !tmpl.is_empty())
        .map(|(_, tmpl)| tmpl.to_string())
        .collect();
    assert_eq!(templates.len(), 2);
    assert!(templates.contains(&"{l↦(p,⊥)}".to_string()));
    assert!(templates.contains(&"{l↦(⊥,p)}".to_string()));

    // Differential: compiled execution equals direct evaluation.
    let budget = std::time::Duration::from_secs(60);
    let started = Instant::now();
    let mut gen = PeGen::new(0xD1FF);
    let alphabet = alphabet_events();
    for case in 0..10_000 {
        gen.reset_labels();
        let pe = gen.pe(7);
        let w = gen.word(8);
        let t = compile(&pe, &alphabet).unwrap();
        let (state, mmap) = t.run(&w).unwrap();
        let (residual, expected_map) = evaluate(&pe, &w);
        assert_eq!(
            t.set.exprs[state],
            canonical(&residual),
            "case {case}: pe={pe} w={w:?}"
        );
        assert_eq!(mmap, expected_map, "case {case}: pe={pe} w={w:?}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed < budget, "differential took {elapsed:?}");
    pass(5, "diagram closures exact; 10,000-pair interpreter/compiler agreement");
}

#[test]
fn criterion_06_rule_determinism_audit() {
    let mut gen = PeGen::new(0xA0D1);
    let letters = alphabet_events();
    let mut audited: u64 = 0;
    for _ in 0..10_000 {
        gen.reset_labels();
        let mut pe = gen.pe(7);
        let w = gen.word(8);
        let mut mmap = MMap::new();
        for (p, ev) in w.iter().enumerate() {
            for probe in &letters {
                let rules = applicable_rules(&pe, probe);
                assert_eq!(rules.len(), 1, "pe={pe} probe={probe} rules={rules:?}");
                audited += 1;
            }
            let r = pretra::pe::step(&pe, &mmap, ev, p);
            pe = r.residual;
            mmap = r.mmap;
        }
    }
    assert!(audited > 100_000);
    pass(6, "exactly one rule applicable at every audited step");
}

#[test]
fn criterion_07_monitoring_soundness_vs_oracle() {
    let mpt = parse_mpt(&spec_text("od.mpt")).unwrap();
    let budget = std::time::Duration::from_secs(10);
    let started = Instant::now();
    let opts = MonitorOptions { collect_all: true, ..MonitorOptions::od_profile() };
    let mut corpora_with_violations = 0;
    for seed in 0..100u64 {
        let corpus = random_traces(&RandomParams {
            count: 20,
            length: 50,
            low_in_pct: 10,
            low_out_pct: 10,
            value_range: 2,
            seed: 9_000 + seed,
        })
        .unwrap();
        let mut expected: Vec<(String, String)> = brute_force_od(&corpus);
        expected.sort();
        if !expected.is_empty() {
            corpora_with_violations += 1;
        }
        let report = monitor_traces(&mpt, corpus, &opts).unwrap();
        let mut found: Vec<(String, String)> = report
            .violations
            .iter()
            .map(|w| {
                let mut t = w.traces.clone();
                t.sort();
                (t[0].clone(), t[1].clone())
            })
            .collect();
        found.sort();
        found.dedup();
        assert_eq!(found, expected, "seed {seed}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed < budget, "soundness run took {elapsed:?}");
    assert!(corpora_with_violations > 0, "corpus never exercised violations");
    pass(7, "identical violating-pair sets on 100 random corpora, within 10 s");
}

#[test]
fn criterion_08_schedule_independence() {
    let mpt = parse_mpt(&spec_text("od.mpt")).unwrap();
    let corpus = random_traces(&RandomParams {
        count: 10,
        length: 30,
        seed: 777,
        ..RandomParams::default()
    })
    .unwrap();
    let opts = MonitorOptions { collect_all: true, ..MonitorOptions::od_profile() };
    let baseline = monitor_traces(&mpt, corpus.clone(), &opts).unwrap();
    let expected: Vec<Vec<String>> = {
        let mut v: Vec<Vec<String>> = baseline
            .violations
            .iter()
            .map(|w| {
                let mut t = w.traces.clone();
                t.sort();
                t
            })
            .collect();
        v.sort();
        v
    };

    let mut rng = ChaCha8Rng::seed_from_u64(4096);
    for round in 0..50 {
        let mut source = random_interleaving(&corpus, &mut rng);
        let report = monitor_loop(&mpt, &mut source, &opts).unwrap();
        let mut found: Vec<Vec<String>> = report
            .violations
            .iter()
            .map(|w| {
                let mut t = w.traces.clone();
                t.sort();
                t
            })
            .collect();
        found.sort();
        found.dedup();
        assert_eq!(found, expected, "schedule {round}");
        assert_eq!(report.verdict.is_clean(), baseline.verdict.is_clean());
    }
    pass(8, "50 interleaving schedules reproduce the batch verdict and witnesses");
}

fn random_interleaving(
    corpus: &[(String, Vec<Event>)],
    rng: &mut ChaCha8Rng,
) -> ScriptedSource {
    let mut remaining: Vec<(usize, usize)> = corpus.iter().map(|(_, e)| (0, e.len())).collect();
    let mut announced = vec![false; corpus.len()];
    let mut batches = Vec::new();
    let mut current = Batch::default();
    loop {
        let pending: Vec<usize> = (0..corpus.len())
            .filter(|&i| !announced[i] || remaining[i].0 < remaining[i].1)
            .collect();
        if pending.is_empty() {
            break;
        }
        let i = pending[(rng.next_u32() as usize) % pending.len()];
        if !announced[i] {
            announced[i] = true;
            current.new_traces.push(corpus[i].0.clone());
        } else {
            let (next, len) = &mut remaining[i];
            current.events.push((corpus[i].0.clone(), corpus[i].1[*next].clone()));
            *next += 1;
            if next == len {
                current.closed.push(corpus[i].0.clone());
            }
        }
        if rng.next_u32() % 4 == 0 {
            batches.push(std::mem::take(&mut current));
        }
    }
    current.done = true;
    batches.push(current);
    ScriptedSource::new(batches)
}

#[test]
fn criterion_09_desk_scale_trend() {
    let mpt = parse_mpt(&spec_text("od.mpt")).unwrap();
    let opts = MonitorOptions { collect_all: true, ..MonitorOptions::od_profile() };

    let mut max_workbags = Vec::new();
    for &n in &[50usize, 100, 200] {
        let corpus = random_traces(&RandomParams {
            count: n,
            length: 50,
            seed: 31_415,
            ..RandomParams::default()
        })
        .unwrap();
        let report = monitor_traces(&mpt, corpus, &opts).unwrap();
        assert_eq!(
            report.stats.tuples_spawned,
            n * (n - 1) / 2,
            "tuples at n={n}"
        );
        max_workbags.push(report.stats.max_workbag);
        println!(
            "  n={n:3}: tuples={} max_workbag={} passes={}",
            report.stats.tuples_spawned, report.stats.max_workbag, report.stats.passes
        );
    }
    // Growth over 50 → 200 traces stays within twice the linear factor.
    let (w50, w200) = (max_workbags[0] as f64, max_workbags[2] as f64);
    assert!(
        w200 <= 2.0 * w50 * 4.0,
        "workbag grew superlinearly: {w50} → {w200}"
    );

    // Periodic traces are processed to the very end in finite time.
    let periodic = periodic_traces(&PeriodicParams {
        count: 20,
        length: 40,
        period: 5,
        value_range: 2,
    })
    .unwrap();
    let started = Instant::now();
    let report = monitor_traces(&mpt, periodic, &opts).unwrap();
    let elapsed = started.elapsed();
    assert!(report.verdict.is_clean(), "identical traces satisfy the property");
    assert_eq!(report.stats.tuples_spawned, 20 * 19 / 2);
    // Every event of every trace (plus the end marker) was ingested.
    assert_eq!(report.stats.events_ingested, 20 * 40);
    println!(
        "  periodic: passes={} pe_steps={} elapsed={elapsed:?}",
        report.stats.passes, report.stats.pe_steps
    );
    pass(9, "tuples = C(n,2); workbag growth ≤ 2× linear; periodic runs finish");
}

#[test]
fn criterion_10_wildcard_asynchronous_od() {
    let mpt = parse_mpt(&spec_text("od_wildcard.mpt")).unwrap();
    let t1 = parse_trace(&spec_text("traces/t1.tr")).unwrap();
    let t3 = parse_trace(&spec_text("traces/t3.tr")).unwrap();
    let mut sigma = BTreeMap::new();
    sigma.insert("t1".to_string(), t1.clone());
    sigma.insert("t2".to_string(), t3.clone());
    let run = run_offline(&mpt, &sigma, 100).unwrap();
    assert_eq!(run.boundaries(), vec![vec![1, 1], vec![3, 4], vec![4, 5]]);
    assert!(!run.output.contains(&OutSym::Bot));

    let traces = vec![("t1".to_string(), t1), ("t3".to_string(), t3)];
    let opts = MonitorOptions { reduction: true, ..MonitorOptions::default() };
    let report = monitor_traces(&mpt, traces, &opts).unwrap();
    assert!(report.verdict.is_clean());
    pass(10, "three steps with boundaries 1/1, 3/4, 4/5 and a clean verdict");
}
