//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the verdict lines always reach the test log.
//! The process fails on any FAIL that is not listed in `KNOWN_FAILURES`.

mod common;

use std::time::{Duration, Instant};

use causation_bounds::cli::round_half_even;
use causation_bounds::engine::{self, tian_pearl, BoundTrace, CausationKind, EngineOptions};
use causation_bounds::oracle::Oracle;
use causation_bounds::query::{canonicalize, parse_query, CanonicalEvent, Evidence, Query, Term};
use causation_bounds::simgen::{self, GeneratorConfig, ObservationalSource};
use causation_bounds::{fixtures, Error, Interval};

use common::{corpus, random_dense_dataset, CORPUS_SEED};

const EXAMPLE_RUNTIME: Duration = Duration::from_secs(1);
const SIMULATION_RUNTIME: Duration = Duration::from_secs(30);
const ORACLE_RUNTIME: Duration = Duration::from_secs(300);
const DECIMALS: usize = 3;
const VALIDITY_SLACK: f64 = 1e-9;
const TIGHTNESS_TOL: f64 = 1e-9;
const BINARY_TOL: f64 = 1e-9;
const PUBLISHED_GAP: f64 = 0.228;
const GAP_TOL: f64 = 0.03;
const SIMULATION_SAMPLES: usize = 1000;
const CORPUS_DATASETS: usize = 240;
const BINARY_DATASETS: usize = 240;

/// Criteria that fail for a documented reason; they still print FAIL.
const KNOWN_FAILURES: &[u8] = &[4];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rounded(iv: Interval) -> (f64, f64) {
    (round_half_even(iv.lo, DECIMALS), round_half_even(iv.hi, DECIMALS))
}

/// Check every `(query, lo, hi)` against nodes of `trace` at 3 decimals.
fn check_nodes(trace: &BoundTrace, expected: &[(&str, f64, f64)], mismatches: &mut Vec<String>) {
    for &(query, lo, hi) in expected {
        match trace.find(query) {
            Some(node) if rounded(node.interval()) == (lo, hi) => {}
            Some(node) => mismatches.push(format!("{query} = {:.3} (published [{lo:.3}, {hi:.3}])", node.interval())),
            None => mismatches.push(format!("{query} missing from trace")),
        }
    }
}

fn criterion_1() -> Result<Verdict, Error> {
    let ds = fixtures::load("treatment")?;
    let q = parse_query("P(y3_x1, y1_x2, y2_x3)", ds.space())?;
    let start = Instant::now();
    let r = engine::bound(&ds, &q)?;
    let elapsed = start.elapsed();
    let mut bad = Vec::new();
    if rounded(r.interval) != (0.0, 0.099) {
        bad.push(format!("final {:.3}", r.interval));
    }
    check_nodes(
        &r.trace,
        &[
            ("P(y3_x1, y1_x2)", 0.323, 0.340),
            ("P(y1_x2, y2_x3)", 0.243, 0.386),
            ("P(y3_x1, y2_x3)", 0.340, 0.472),
            ("P(y1_x2, y2_x3, x1, y3)", 0.0, 0.008),
            ("P(y3_x1, y2_x3, x2, y1)", 0.0, 0.011),
            ("P(y3_x1, y1_x2, x3, y2)", 0.0, 0.080),
        ],
        &mut bad,
    );
    if r.trace.upper_branch != "decomposition" {
        bad.push(format!("upper bound from {}", r.trace.upper_branch));
    }
    if elapsed >= EXAMPLE_RUNTIME {
        bad.push(format!("took {elapsed:?}"));
    }
    Ok(verdict(
        bad.is_empty(),
        format!("final {:.6}, 6 intermediates, {elapsed:.2?} {}", r.interval, bad.join("; ")),
    ))
}

fn criterion_2() -> Result<Verdict, Error> {
    let ds = fixtures::load("institute")?;
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut shown = Vec::new();
    for (text, expected) in [("P(y1_x3 | x2, y2)", (0.720, 1.0)), ("P(y1_x4 | x2, y2)", (0.0, 0.042))] {
        let iv = engine::bound(&ds, &parse_query(text, ds.space())?)?.interval;
        shown.push(format!("{text} {iv:.3}"));
        if rounded(iv) != expected {
            bad.push(text);
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && elapsed < EXAMPLE_RUNTIME;
    Ok(verdict(pass, format!("{}, {elapsed:.2?} {}", shown.join(", "), bad.join("; "))))
}

fn criterion_3() -> Result<Verdict, Error> {
    let ds = fixtures::load("vaccine")?;
    let start = Instant::now();
    let mut bad = Vec::new();
    let finals = [
        ("P(y1_x1, y4_x2)", (0.0, 0.039), [("P(y4_x2, x1, y1)", 0.0, 0.005), ("P(y1_x1, x2, y4)", 0.0, 0.034)]),
        ("P(y2_x1, y4_x2)", (0.037, 0.077), [("P(y4_x2, x1, y2)", 0.037, 0.062), ("P(y2_x1, x2, y4)", 0.0, 0.015)]),
        ("P(y3_x1, y4_x2)", (0.502, 0.561), [("P(y4_x2, x1, y3)", 0.502, 0.527), ("P(y3_x1, x2, y4)", 0.0, 0.034)]),
    ];
    for (text, expected, parts) in finals {
        let r = engine::bound(&ds, &parse_query(text, ds.space())?)?;
        if rounded(r.interval) != expected {
            bad.push(format!("{text} = {:.3}", r.interval));
        }
        check_nodes(&r.trace, &parts, &mut bad);
    }
    let elapsed = start.elapsed();
    if elapsed >= EXAMPLE_RUNTIME {
        bad.push(format!("took {elapsed:?}"));
    }
    Ok(verdict(
        bad.is_empty(),
        format!("3 finals, 6 intermediates, {elapsed:.2?} {}", bad.join("; ")),
    ))
}

fn criterion_4() -> Result<Verdict, Error> {
    let start = Instant::now();
    let summary = simgen::run_simulation(SIMULATION_SAMPLES, simgen::DEFAULT_SEED)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("simulation.csv");
    simgen::export_csv(&summary.records, &path)?;
    let elapsed = start.elapsed();
    let rows = csv::Reader::from_path(&path)?.records().count();
    let gap_ok = (summary.average_gap - PUBLISHED_GAP).abs() <= GAP_TOL;
    let compatible = simgen::run_simulation_with(
        SIMULATION_SAMPLES,
        simgen::DEFAULT_SEED,
        &GeneratorConfig {
            observational: ObservationalSource::ResponseTypes,
            ..GeneratorConfig::default()
        },
    )?;
    let pass = gap_ok && rows == SIMULATION_SAMPLES && elapsed < SIMULATION_RUNTIME;
    Ok(verdict(
        pass,
        format!(
            "average gap {:.4} (target {PUBLISHED_GAP} +/- {GAP_TOL}), containment {:.3}, {rows} csv rows, {elapsed:.2?}; \
             response-type generator: gap {:.4}, containment {:.3}",
            summary.average_gap, summary.containment_rate, compatible.average_gap, compatible.containment_rate
        ),
    ))
}

fn criterion_5(data: &[(causation_bounds::Dataset, Vec<Query>)]) -> Result<Verdict, Error> {
    let start = Instant::now();
    let (mut checked, mut worst, mut slack_sum) = (0usize, f64::INFINITY, 0.0);
    let mut bad = Vec::new();
    for (d, (ds, queries)) in data.iter().enumerate() {
        let oracle = Oracle::new(ds)?;
        for q in queries {
            let canonical = canonicalize(q);
            let engine_iv = engine::bound(ds, q)?.interval;
            let tight = oracle.tight_bounds(&canonical)?;
            let slack = (tight.lo - engine_iv.lo).min(engine_iv.hi - tight.hi);
            worst = worst.min(slack);
            slack_sum += engine_iv.width() - tight.width();
            checked += 1;
            if slack < -VALIDITY_SLACK {
                bad.push(format!("dataset {d} {q}: engine {engine_iv} lp {tight}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && data.len() >= 200 && elapsed < ORACLE_RUNTIME;
    Ok(verdict(
        pass,
        format!(
            "{} datasets, {checked} queries, worst slack {worst:.3e}, mean excess width {:.4}, {elapsed:.2?} {}",
            data.len(),
            slack_sum / checked as f64,
            bad.first().cloned().unwrap_or_default()
        ),
    ))
}

fn criterion_6(data: &[(causation_bounds::Dataset, Vec<Query>)]) -> Result<Verdict, Error> {
    let (mut checked, mut worst) = (0usize, 0.0f64);
    let mut bad = Vec::new();
    for (ds, _) in data {
        let oracle = Oracle::new(ds)?;
        let (m, n) = (ds.space().m(), ds.space().n());
        for j in 0..m {
            for i in 0..n {
                for p in (0..m).filter(|&p| p != j) {
                    for k in 0..n {
                        let q = Query::joint(vec![Term::new(j, i)], Evidence::xy(p, k));
                        let e = engine::bound(ds, &q)?.interval;
                        let t = oracle.tight_bounds(&canonicalize(&q))?;
                        let diff = (e.lo - t.lo).abs().max((e.hi - t.hi).abs());
                        worst = worst.max(diff);
                        checked += 1;
                        if diff > TIGHTNESS_TOL {
                            bad.push(format!("{q}: engine {e} lp {t}"));
                        }
                    }
                }
            }
        }
    }
    Ok(verdict(
        bad.is_empty(),
        format!(
            "{checked} single-term queries with (x, y) evidence, max deviation {worst:.3e} {}",
            bad.first().cloned().unwrap_or_default()
        ),
    ))
}

fn criterion_7() -> Result<Verdict, Error> {
    let mut rng = common::rng(CORPUS_SEED ^ 0xb1);
    let mut bad = Vec::new();
    let (mut pns_gaps, mut pns_max, mut pn_max, mut ps_max) = (0usize, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..BINARY_DATASETS {
        let ds = random_dense_dataset(&mut rng, 2, 2);
        for (kind, worst) in [(CausationKind::Pn, &mut pn_max), (CausationKind::Ps, &mut ps_max)] {
            let e = engine::bound(&ds, &kind.query())?.interval;
            let f = tian_pearl(&ds, kind)?;
            let diff = (e.lo - f.lo).abs().max((e.hi - f.hi).abs());
            *worst = worst.max(diff);
            if diff > BINARY_TOL {
                bad.push(format!("{kind:?}: engine {e} formula {f}"));
            }
        }
        let pns = CausationKind::Pns.query();
        let e = engine::bound(&ds, &pns)?.interval;
        let t = Oracle::new(&ds)?.tight_bounds(&canonicalize(&pns))?;
        if !e.encloses(&t, VALIDITY_SLACK) {
            bad.push(format!("PNS engine {e} does not contain lp {t}"));
        }
        let f = tian_pearl(&ds, CausationKind::Pns)?;
        let diff = (e.lo - f.lo).abs().max((e.hi - f.hi).abs());
        pns_max = pns_max.max(diff);
        pns_gaps += usize::from(diff > BINARY_TOL);
    }
    Ok(verdict(
        bad.is_empty(),
        format!(
            "{BINARY_DATASETS} datasets, PN max deviation {pn_max:.3e}, PS max deviation {ps_max:.3e}, \
             PNS vs closed form: {pns_gaps} differ, max {pns_max:.3e} {}",
            bad.first().cloned().unwrap_or_default()
        ),
    ))
}

fn criterion_8(data: &[(causation_bounds::Dataset, Vec<Query>)]) -> Result<Verdict, Error> {
    let plain = EngineOptions {
        memoize: false,
        ..EngineOptions::default()
    };
    let (mut checked, mut conditional, mut degenerate, mut max_ratio) = (0usize, 0usize, 0usize, 0.0f64);
    let mut bad = Vec::new();
    for (ds, queries) in data {
        for q in queries {
            let r = engine::bound(ds, q)?;
            checked += 1;

            let mut shuffled = q.clone();
            shuffled.terms.reverse();
            let turn = 1.min(shuffled.terms.len());
            shuffled.terms.rotate_left(turn);
            let s = engine::bound(ds, &shuffled)?;
            if s.interval != r.interval || s.trace != r.trace {
                bad.push(format!("permutation changes {q}"));
            }

            let u = engine::bound_with(ds, q, &plain)?;
            if u.interval != r.interval || u.trace != r.trace || u.stats_evaluated != r.stats_evaluated {
                bad.push(format!("memoization changes {q}"));
            }

            if let CanonicalEvent::Standard(conj) = &canonicalize(q).event {
                let budget = engine::recursion_budget(conj.k());
                max_ratio = max_ratio.max(r.stats_evaluated as f64 / budget as f64);
                if r.stats_evaluated > budget {
                    bad.push(format!("{q} visited {} > {budget}", r.stats_evaluated));
                }
            }

            if q.evidence.is_empty() {
                continue;
            }
            let pe = engine::evidence_probability(ds, &q.evidence);
            let cond = Query::conditional(q.terms.clone(), q.evidence);
            match engine::bound(ds, &cond) {
                Ok(c) => {
                    conditional += 1;
                    if c.interval != r.interval.scale_down(pe) {
                        bad.push(format!("{cond}: {} != {} / {pe}", c.interval, r.interval));
                    }
                }
                Err(Error::ZeroEvidenceProbability(_)) => {
                    degenerate += 1;
                    if r.interval != Interval::ZERO {
                        bad.push(format!("{q}: zero evidence but {}", r.interval));
                    }
                }
                Err(e) => return Err(e),
            }
            if pe == 0.0 && r.interval != Interval::ZERO {
                bad.push(format!("{q}: zero evidence but {}", r.interval));
            }
        }
    }
    Ok(verdict(
        bad.is_empty() && degenerate > 0,
        format!(
            "{checked} queries, {conditional} conditional, {degenerate} zero-evidence, \
             max visited/budget {max_ratio:.3} {}",
            bad.first().cloned().unwrap_or_default()
        ),
    ))
}

type Criterion<'a> = (u8, &'static str, Box<dyn Fn() -> Result<Verdict, Error> + 'a>);

fn main() {
    let data = corpus(CORPUS_SEED, CORPUS_DATASETS);
    let criteria: Vec<Criterion> = vec![
        (1, "treatment example", Box::new(criterion_1)),
        (2, "institute example", Box::new(criterion_2)),
        (3, "vaccine example", Box::new(criterion_3)),
        (4, "simulation study", Box::new(criterion_4)),
        (5, "oracle validity", Box::new(|| criterion_5(&data))),
        (6, "single-term tightness", Box::new(|| criterion_6(&data))),
        (7, "binary reduction", Box::new(criterion_7)),
        (8, "engine invariants", Box::new(|| criterion_8(&data))),
    ];
    let mut unexpected = 0;
    for (id, name, run) in &criteria {
        let v = run().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        let known = KNOWN_FAILURES.contains(id);
        let tag = match (v.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("criterion {id} {tag:<12} {name}: {}", v.detail.trim_end());
        if !v.pass && !known {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        eprintln!("{unexpected} acceptance criteria failed");
        std::process::exit(1);
    }
}
