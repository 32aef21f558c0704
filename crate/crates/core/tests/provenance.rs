use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slogette::corpus::gen_tc;
use slogette::corpus::random::nested_program;
use slogette::engine::Database;
use slogette::oracle::{lineage, naive_fixpoint, subfact, NestedFact, OracleGuards};
use slogette::pipeline::{compile_source, evaluate, Compiled, RunOptions};
use slogette::provenance::{explained, print_ids, why_closure, Rewrites};
use slogette::syntax::{parse_fact, Clause};

const TC: &str = "tc(a, b) :- edge(a, b).\ntc(a, c) :- tc(a, b), edge(b, c).\n";

fn run(c: &Compiled, facts: &[Clause], rewrites: Rewrites) -> Database {
    let opts = RunOptions {
        rewrites,
        ..RunOptions::default()
    };
    evaluate(c, facts, &opts).unwrap().db
}

fn eager(c: &Compiled, facts: &[Clause]) -> Database {
    run(
        c,
        facts,
        Rewrites {
            eager_why: true,
            ..Rewrites::default()
        },
    )
}

/// Input facts of the oracle run: subfact closure of the given facts and
/// of the program's own facts.
fn inputs(c: &Compiled, facts: &[Clause]) -> BTreeSet<NestedFact> {
    let own = c.surface.rules.iter().filter(|r| r.is_fact()).map(|r| &r.heads[0].clause);
    own.chain(facts)
        .flat_map(|f| subfact(&NestedFact::from_clause(f).unwrap()))
        .collect()
}

fn strings(s: &BTreeSet<NestedFact>) -> Vec<String> {
    s.iter().map(ToString::to_string).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Eager why-provenance of every fact equals the brute-force lineage.
fn eager_matches_lineage(c: &Compiled, facts: &[Clause], label: &str) -> usize {
    let db = eager(c, facts);
    let model = naive_fixpoint(&c.surface, facts, &OracleGuards::default()).unwrap();
    let lin = lineage(&c.surface, &model, &inputs(c, facts));
    for (fact, leaves) in &lin {
        let id = db
            .find(&parse_fact(&fact.to_string()).unwrap())
            .unwrap_or_else(|| panic!("{label}: engine lacks {fact}"));
        let got = print_ids(&db, &why_closure(&db, id).unwrap());
        assert_eq!(got, strings(leaves), "{label}: {fact}");
    }
    lin.len()
}

#[test]
fn eager_why_matches_lineage_on_random_graphs() {
    let c = compile_source(TC, "tc").unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(4..=20);
        let p = rng.gen_range(0.05..0.3);
        let edges = gen_tc(n, p, seed);
        eager_matches_lineage(&c, &edges, &format!("graph {seed}"));
    }
}

#[test]
fn lazy_why_agrees_with_eager_for_sampled_targets() {
    let c = compile_source(TC, "tc").unwrap();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = rng.gen_range(4..=20);
        let edges = gen_tc(n, rng.gen_range(0.05..0.3), seed);
        let full = eager(&c, &edges);
        let tcs = full.dump("tc").unwrap();
        for _ in 0..10 {
            // Mostly derived facts, sometimes an absent one.
            let target = if tcs.is_empty() || rng.gen_range(0..5) == 0 {
                format!("tc({}, {})", rng.gen_range(0..n), rng.gen_range(0..n))
            } else {
                tcs[rng.gen_range(0..tcs.len())].clone()
            };
            let clause = parse_fact(&target).unwrap();
            let want = match full.find(&clause) {
                Some(id) => print_ids(&full, &why_closure(&full, id).unwrap()),
                None => Vec::new(),
            };
            let lazy = run(
                &c,
                &edges,
                Rewrites {
                    explain: Some(clause),
                    ..Rewrites::default()
                },
            );
            assert_eq!(print_ids(&lazy, &explained(&lazy)), want, "graph {seed}: {target}");
        }
    }
}

#[test]
fn eager_why_matches_lineage_on_nested_programs() {
    let mut facts_checked = 0;
    for seed in 0..60 {
        let p = nested_program(seed);
        let c = compile_source(&p.source, "random").unwrap();
        facts_checked += eager_matches_lineage(&c, &p.facts, &format!("seed {seed}\n{}", p.source));
    }
    assert!(facts_checked > 500, "{facts_checked}");
}

#[test]
fn where_origins_point_at_matching_columns() {
    let c = compile_source(TC, "tc").unwrap();
    for seed in 0..10 {
        let edges = gen_tc(8, 0.25, seed);
        let db = run(
            &c,
            &edges,
            Rewrites {
                where_: true,
                ..Rewrites::default()
            },
        );
        let tc = db.rows("tc").unwrap();
        let prov = db.rows("prov_tc").unwrap();
        let column = db.relation("column").unwrap();
        let mut covered = BTreeSet::new();
        for (_, id) in prov {
            let (_, origins) = db.store.resolve(id).unwrap();
            let mut values = Vec::new();
            for o in origins {
                let oid = o.as_id().expect("origins are column facts");
                let (rel, cols) = db.store.resolve(oid).unwrap();
                assert_eq!(rel, column);
                let (src, k, v) = (cols[0].as_id().unwrap(), cols[1].payload() as usize, cols[2]);
                assert_eq!(db.store.resolve(src).unwrap().1[k], v);
                values.push(db.store.value_text(v).unwrap());
            }
            covered.insert(values);
        }
        let all: BTreeSet<Vec<String>> = tc.into_iter().map(|(cols, _)| cols).collect();
        assert_eq!(covered, all, "graph {seed}");
    }
}
