use slogette::corpus::random::{datalog_program, nested_program, RandomProgram};
use slogette::engine::EvalConfig;
use slogette::oracle::{herbrand_model_check, naive_fixpoint, printed, OracleGuards};
use slogette::pipeline::{compile_source, evaluate, RunOptions};

fn config(seed: u64) -> EvalConfig {
    let workers = [1, 2, 3, 4][(seed % 4) as usize];
    EvalConfig {
        workers,
        buckets: workers.max([1, 4, 16][(seed % 3) as usize]),
        subbuckets: [1, 2][(seed % 2) as usize],
        ..EvalConfig::default()
    }
}

fn agree(p: &RandomProgram, seed: u64) {
    let c = compile_source(&p.source, "random").unwrap();
    let opts = RunOptions {
        config: config(seed),
        ..RunOptions::default()
    };
    let db = evaluate(&c, &p.facts, &opts)
        .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", p.source))
        .db;
    let oracle = naive_fixpoint(&c.surface, &p.facts, &OracleGuards::default()).unwrap();
    assert_eq!(db.fact_set(), printed(&oracle), "seed {seed}\n{}", p.source);
    assert!(herbrand_model_check(&oracle, &c.surface), "seed {seed}");
}

#[test]
fn datalog_programs_match_oracle() {
    for seed in 0..400 {
        agree(&datalog_program(seed), seed);
    }
}

#[test]
fn nested_programs_match_oracle() {
    for seed in 0..400 {
        agree(&nested_program(seed), seed);
    }
}

#[test]
fn stable_across_runs_and_workers() {
    for seed in 0..20 {
        let p = nested_program(1000 + seed);
        let c = compile_source(&p.source, "random").unwrap();
        let base = evaluate(&c, &p.facts, &RunOptions::default()).unwrap().db;
        let again = evaluate(&c, &p.facts, &RunOptions::default()).unwrap().db;
        assert_eq!(base.store.dump_interns(), again.store.dump_interns());
        for w in [2, 4, 8] {
            let opts = RunOptions {
                config: EvalConfig::with_workers(w),
                ..RunOptions::default()
            };
            assert_eq!(evaluate(&c, &p.facts, &opts).unwrap().db.fact_set(), base.fact_set(), "W={w}");
        }
    }
}
