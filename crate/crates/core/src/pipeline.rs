//! Source to database in one call, plus the engine-versus-oracle check.

use std::collections::BTreeSet;

use crate::engine::{run_fixpoint, subfact_close_ingest, Database, EvalConfig};
use crate::error::{Error, Result};
use crate::flatten::{flatten_program, CoreProgram};
use crate::oracle::{naive_fixpoint, printed, NestedFact, OracleGuards};
use crate::plan::{compile, Plan};
use crate::provenance::{rewrite, Rewrites};
use crate::syntax::{desugar, parse_program, validate, Clause, Program};
use crate::term::{Symbols, TermStore};

/// A validated program in both surface (desugared) and flat form.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub surface: Program,
    pub core: CoreProgram,
}

pub fn compile_source(src: &str, origin: &str) -> Result<Compiled> {
    let program = parse_program(src).map_err(|e| Error::parse(origin, e))?;
    let checked = desugar(validate(program)?);
    let core = flatten_program(&checked);
    Ok(Compiled {
        surface: checked.program,
        core,
    })
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub config: EvalConfig,
    pub rewrites: Rewrites,
    /// Drops every semi-naive version except the first-iteration ones.
    /// Exists only to prove that `check` catches a broken plan.
    pub sabotage: bool,
}

#[derive(Debug)]
pub struct Outcome {
    pub core: CoreProgram,
    pub plan: Plan,
    pub db: Database,
}

/// Rewrites, plans, ingests `facts` plus the program's own facts, and runs
/// to fixpoint.
pub fn evaluate(compiled: &Compiled, facts: &[Clause], opts: &RunOptions) -> Result<Outcome> {
    opts.config.check()?;
    let core = rewrite(&compiled.core, &opts.rewrites)?;
    let mut store = TermStore::new(Symbols::default(), opts.config.buckets);
    let mut plan = compile(&core, &mut store)?;
    if opts.sabotage {
        plan.sabotage();
    }
    let mut all = core.facts.clone();
    all.extend_from_slice(facts);
    subfact_close_ingest(&mut store, &all)?;
    let db = run_fixpoint(&plan, store, &opts.config)?;
    Ok(Outcome { core, plan, db })
}

/// Oracle guards mirroring the engine's.
pub fn oracle_guards(cfg: &EvalConfig) -> OracleGuards {
    OracleGuards {
        max_rounds: cfg.max_iterations,
        max_height: cfg.max_height,
        max_facts: None,
    }
}

/// Reference fixpoint of the same program. With provenance rewrites the
/// rewritten flat program is evaluated; otherwise the surface program is.
pub fn reference(compiled: &Compiled, facts: &[Clause], opts: &RunOptions) -> Result<BTreeSet<NestedFact>> {
    let guards = oracle_guards(&opts.config);
    if opts.rewrites.is_empty() {
        return Ok(naive_fixpoint(&compiled.surface, facts, &guards)?);
    }
    let core = rewrite(&compiled.core, &opts.rewrites)?;
    Ok(naive_fixpoint(&core.to_surface(), facts, &guards)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CheckOutcome {
    Agree { facts: usize },
    Differ { engine_only: Vec<String>, oracle_only: Vec<String> },
    /// A guard tripped in one of the evaluators.
    Inconclusive(String),
}

/// Runs the engine and the reference evaluator and compares deep-printed
/// fact sets.
pub fn check(compiled: &Compiled, facts: &[Clause], opts: &RunOptions) -> Result<CheckOutcome> {
    let engine = match evaluate(compiled, facts, opts) {
        Ok(o) => o.db.fact_set(),
        Err(Error::Eval(e)) if e.is_guard() => return Ok(CheckOutcome::Inconclusive(format!("engine: {e}"))),
        Err(e) => return Err(e),
    };
    let oracle = match reference(compiled, facts, opts) {
        Ok(db) => printed(&db),
        Err(Error::Oracle(e)) if e.is_guard() => {
            return Ok(CheckOutcome::Inconclusive(format!("reference evaluator: {e}")))
        }
        Err(e) => return Err(e),
    };
    if engine == oracle {
        return Ok(CheckOutcome::Agree { facts: engine.len() });
    }
    Ok(CheckOutcome::Differ {
        engine_only: engine.difference(&oracle).cloned().collect(),
        oracle_only: oracle.difference(&engine).cloned().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_fact;

    const TC: &str = "tc(a,b) :- edge(a,b). tc(a,c) :- tc(a,b), edge(b,c).";

    fn facts(v: &[&str]) -> Vec<Clause> {
        v.iter().map(|s| parse_fact(s).unwrap()).collect()
    }

    #[test]
    fn check_agrees_and_catches_sabotage() {
        let c = compile_source(TC, "tc").unwrap();
        let edb = facts(&["edge(1,2)", "edge(2,3)", "edge(3,4)"]);
        assert_eq!(check(&c, &edb, &RunOptions::default()).unwrap(), CheckOutcome::Agree { facts: 9 });
        let broken = RunOptions {
            sabotage: true,
            ..RunOptions::default()
        };
        match check(&c, &edb, &broken).unwrap() {
            CheckOutcome::Differ { engine_only, oracle_only } => {
                assert!(engine_only.is_empty());
                assert_eq!(oracle_only, ["tc(1, 3)", "tc(1, 4)", "tc(2, 4)"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn check_with_provenance() {
        let c = compile_source(TC, "tc").unwrap();
        let opts = RunOptions {
            rewrites: Rewrites {
                eager_why: true,
                where_: true,
                explain: None,
            },
            ..RunOptions::default()
        };
        assert!(matches!(
            check(&c, &facts(&["edge(1,2)", "edge(2,3)"]), &opts).unwrap(),
            CheckOutcome::Agree { .. }
        ));
    }

    #[test]
    fn check_inconclusive_and_empty() {
        let c = compile_source("S(z) :- z = Z(). S(n) :- n = S(_). Z().", "nat").unwrap();
        let opts = RunOptions {
            config: EvalConfig {
                max_height: Some(10),
                ..EvalConfig::default()
            },
            ..RunOptions::default()
        };
        assert!(matches!(check(&c, &[], &opts).unwrap(), CheckOutcome::Inconclusive(_)));
        let empty = compile_source("", "empty").unwrap();
        assert_eq!(check(&empty, &[], &RunOptions::default()).unwrap(), CheckOutcome::Agree { facts: 0 });
    }
}
