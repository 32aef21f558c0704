use proptest::prelude::*;
use slogette::corpus::random::{datalog_program, nested_program};
use slogette::engine::EvalConfig;
use slogette::oracle::{naive_fixpoint, subfact, NestedFact, OracleGuards};
use slogette::pipeline::{compile_source, evaluate, RunOptions};
use slogette::syntax::{parse_fact, Clause};
use slogette::term::{canonical_bucket, pack_id, unpack_id, InternId};

const DECLS: &str = ".decl f/1\n.decl g/2\n.decl h/0\n.decl top/2\n";

fn term() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0i64..5).prop_map(|i| i.to_string()),
        "[ab]{1,2}".prop_map(|s| format!("\"{s}\"")),
        Just("h()".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| format!("f({a})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("g({a}, {b})")),
        ]
    })
}

fn facts() -> impl Strategy<Value = Vec<Clause>> {
    prop::collection::vec((term(), term()), 0..12).prop_map(|pairs| {
        pairs
            .into_iter()
            .map(|(a, b)| parse_fact(&format!("top({a}, {b})")).unwrap())
            .collect()
    })
}

fn config() -> impl Strategy<Value = EvalConfig> {
    (1usize..=8, 0usize..=3, 1usize..=3).prop_map(|(w, extra, s)| EvalConfig {
        workers: w,
        buckets: w + extra,
        subbuckets: s,
        ..EvalConfig::default()
    })
}

proptest! {
    #[test]
    fn id_fields_round_trip(rel in any::<u16>(), bucket in any::<u16>(), counter in any::<u32>()) {
        let raw = pack_id(rel, bucket, counter);
        prop_assert_eq!(unpack_id(raw), (rel, bucket, counter));
        prop_assert_eq!(InternId::from_raw(raw).unpack(), (rel, bucket, counter));
    }

    #[test]
    fn ingest_is_subfact_closed(input in facts(), cfg in config()) {
        let c = compile_source(DECLS, "decls").unwrap();
        let opts = RunOptions { config: cfg, ..RunOptions::default() };
        let db = evaluate(&c, &input, &opts).unwrap().db;
        let expected: std::collections::BTreeSet<NestedFact> = input
            .iter()
            .flat_map(|f| subfact(&NestedFact::from_clause(f).unwrap()))
            .collect();
        prop_assert_eq!(db.fact_count(), expected.len());
        for f in &expected {
            let id = db.find(&parse_fact(&f.to_string()).unwrap());
            prop_assert!(id.is_some(), "missing {}", f);
            let id = id.unwrap();
            prop_assert_eq!(db.deep_print(id).unwrap(), f.to_string());
            let stored = db.store.stored(id).unwrap();
            prop_assert_eq!(stored.height, f.height());
            let (_, cols) = db.store.resolve(id).unwrap();
            prop_assert_eq!(id.bucket(), canonical_bucket(cols, db.store.buckets()));
            for v in cols {
                if let Some(child) = v.as_id() {
                    prop_assert!(db.store.stored(child).unwrap().height < stored.height);
                }
            }
        }
    }

    #[test]
    fn ingest_twice_is_idempotent(input in facts()) {
        let c = compile_source(DECLS, "decls").unwrap();
        let once = evaluate(&c, &input, &RunOptions::default()).unwrap().db;
        let doubled: Vec<Clause> = input.iter().chain(&input).cloned().collect();
        let twice = evaluate(&c, &doubled, &RunOptions::default()).unwrap().db;
        prop_assert_eq!(once.store.dump_interns().unwrap(), twice.store.dump_interns().unwrap());
    }

    #[test]
    fn runs_are_deterministic(seed in 0u64..10_000, cfg in config()) {
        let p = nested_program(seed);
        let c = compile_source(&p.source, "random").unwrap();
        let opts = RunOptions { config: cfg, ..RunOptions::default() };
        let a = evaluate(&c, &p.facts, &opts).unwrap().db;
        let b = evaluate(&c, &p.facts, &opts).unwrap().db;
        prop_assert_eq!(a.store.dump_interns().unwrap(), b.store.dump_interns().unwrap());
        let single = evaluate(&c, &p.facts, &RunOptions::default()).unwrap().db;
        prop_assert_eq!(a.fact_set(), single.fact_set());
    }

    #[test]
    fn nested_programs_agree_with_oracle(seed in 0u64..100_000, cfg in config()) {
        let p = nested_program(seed);
        let c = compile_source(&p.source, "random").unwrap();
        let opts = RunOptions { config: cfg, ..RunOptions::default() };
        let db = evaluate(&c, &p.facts, &opts).unwrap().db;
        let oracle = naive_fixpoint(&c.surface, &p.facts, &OracleGuards::default()).unwrap();
        prop_assert_eq!(db.fact_set(), slogette::oracle::printed(&oracle));
    }
}

#[test]
fn datalog_programs_terminate_without_guards() {
    let cfg = EvalConfig {
        max_iterations: None,
        max_height: None,
        ..EvalConfig::default()
    };
    for seed in 0..100 {
        let p = datalog_program(5000 + seed);
        let c = compile_source(&p.source, "random").unwrap();
        let opts = RunOptions {
            config: cfg.clone(),
            ..RunOptions::default()
        };
        let out = evaluate(&c, &p.facts, &opts).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        assert!(out.db.stats.strata.iter().all(|s| s.iterations < 1000));
    }
}
