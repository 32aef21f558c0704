//! Fixpoint evaluation over the interned store.

mod exec;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::time::Duration;

use thiserror::Error;

use crate::plan::Plan;
use crate::syntax::{Clause, Literal, Subclause};
use crate::term::{InternId, RelId, TermError, TermStore, Value};


#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalConfig {
    pub workers: usize,
    pub buckets: usize,
    pub subbuckets: usize,
    /// Supersteps allowed per stratum; `None` is unbounded.
    pub max_iterations: Option<u64>,
    /// Largest fact height allowed; `None` is unbounded.
    pub max_height: Option<u32>,
    /// Record the ids created by every superstep.
    pub trace: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            workers: 1,
            buckets: 16,
            subbuckets: 1,
            max_iterations: None,
            max_height: None,
            trace: false,
        }
    }
}

impl EvalConfig {
    pub fn with_workers(workers: usize) -> Self {
        EvalConfig {
            workers,
            buckets: 16.max(workers),
            ..EvalConfig::default()
        }
    }

    pub fn check(&self) -> Result<(), EvalError> {
        if self.workers == 0 {
            return Err(EvalError::Config("workers must be at least 1".into()));
        }
        if self.buckets < self.workers {
            return Err(EvalError::Config(format!(
                "buckets ({}) must be at least workers ({})",
                self.buckets, self.workers
            )));
        }
        if self.buckets >= crate::term::MAX_BUCKETS {
            return Err(EvalError::Config(format!(
                "buckets must be below {}",
                crate::term::MAX_BUCKETS
            )));
        }
        if self.subbuckets == 0 || self.subbuckets > u16::MAX as usize {
            return Err(EvalError::Config("subbuckets must be in 1..=65535".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot ingest `{fact}`: {reason}")]
    Ingest { fact: String, reason: String },
    #[error(transparent)]
    Term(#[from] TermError),
    #[error("stratum {stratum} did not converge within {limit} iterations")]
    IterationLimitExceeded { stratum: usize, limit: u64 },
    #[error("fact of `{relation}` with height {height} exceeds the height limit {limit}")]
    HeightLimitExceeded {
        relation: String,
        height: u32,
        limit: u32,
    },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl EvalError {
    /// True for the non-termination guards.
    pub fn is_guard(&self) -> bool {
        matches!(
            self,
            EvalError::IterationLimitExceeded { .. } | EvalError::HeightLimitExceeded { .. }
        )
    }
}

/// Cumulative wall time per phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PhaseTimes {
    pub intra_bucket: Duration,
    pub local_join: Duration,
    pub all_to_all: Duration,
    pub intern: Duration,
    pub materialize: Duration,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StratumStats {
    pub relations: Vec<RelId>,
    pub iterations: u64,
    pub new_per_iteration: Vec<u64>,
}

/// Facts created by one superstep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub stratum: usize,
    pub iteration: u64,
    pub new: Vec<InternId>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub strata: Vec<StratumStats>,
    pub times: PhaseTimes,
    pub total: Duration,
    /// Last epoch used; input facts have epoch 0.
    pub epochs: u32,
    pub trace: Vec<TraceStep>,
}

fn ingest_value(store: &mut TermStore, s: &Subclause, root: &Clause) -> Result<Value, EvalError> {
    match s {
        Subclause::Lit(Literal::Int(i), _) => Ok(Value::Int(*i)),
        Subclause::Lit(Literal::Str(t), _) => Ok(Value::Str(store.intern_str(t))),
        Subclause::Clause(c) => ingest_clause(store, c, root).map(Value::Id),
        Subclause::Var(..) | Subclause::Wildcard(_) => Err(EvalError::Ingest {
            fact: root.to_string(),
            reason: "input facts must be ground".into(),
        }),
    }
}

fn ingest_clause(store: &mut TermStore, c: &Clause, root: &Clause) -> Result<InternId, EvalError> {
    let mut args = Vec::with_capacity(c.args.len());
    for a in &c.args {
        args.push(ingest_value(store, a, root)?);
    }
    let rel = store.declare_relation(&c.rel, args.len())?;
    Ok(store.intern(rel, &args)?)
}

/// Interns ground facts bottom-up, so every nested subfact is stored too.
pub fn subfact_close_ingest(store: &mut TermStore, facts: &[Clause]) -> Result<Vec<InternId>, EvalError> {
    facts.iter().map(|f| ingest_clause(store, f, f)).collect()
}

/// Evaluates `plan` over the facts already in `store`.
pub fn run_fixpoint(plan: &Plan, mut store: TermStore, cfg: &EvalConfig) -> Result<Database, EvalError> {
    cfg.check()?;
    let mut engine = exec::Engine::new(plan, cfg, store.buckets())?;
    let stats = engine.run(&mut store)?;
    Ok(Database { store, stats })
}

/// The result of a run: the interned store plus run statistics.
#[derive(Clone, Debug)]
pub struct Database {
    pub store: TermStore,
    pub stats: RunStats,
}

impl Database {
    pub fn relation(&self, name: &str) -> Option<RelId> {
        self.store.symbols().rels.lookup(name)
    }

    pub fn relation_names(&self) -> Vec<String> {
        self.store
            .symbols()
            .rels
            .iter()
            .map(|(_, n, _)| n.to_string())
            .collect()
    }

    pub fn fact_count(&self) -> usize {
        self.store.len()
    }

    pub fn deep_print(&self, id: InternId) -> Result<String, TermError> {
        self.store.deep_print(id)
    }

    /// Input facts carry epoch 0.
    pub fn is_edb(&self, id: InternId) -> bool {
        self.store.stored(id).is_ok_and(|r| r.epoch == 0)
    }

    /// Sorted deep-printed facts of one relation, or `None` if unknown.
    pub fn dump(&self, rel: &str) -> Option<Vec<String>> {
        let r = self.relation(rel)?;
        let mut rows: Vec<String> = self
            .store
            .relation_ids(r)
            .into_iter()
            .map(|id| self.store.deep_print(id).expect("stored ids resolve"))
            .collect();
        rows.sort();
        Some(rows)
    }

    /// Rows of one relation as `(column texts, id)`, sorted by text.
    pub fn rows(&self, rel: &str) -> Option<Vec<(Vec<String>, InternId)>> {
        let r = self.relation(rel)?;
        let mut rows: Vec<(Vec<String>, InternId)> = self
            .store
            .relation_ids(r)
            .into_iter()
            .map(|id| {
                let (_, cols) = self.store.resolve(id).expect("stored ids resolve");
                let texts = cols
                    .iter()
                    .map(|v| self.store.value_text(*v).expect("stored values resolve"))
                    .collect();
                (texts, id)
            })
            .collect();
        rows.sort();
        Some(rows)
    }

    /// Every stored fact, deep-printed.
    pub fn fact_set(&self) -> BTreeSet<String> {
        self.store
            .all_ids()
            .into_iter()
            .map(|id| self.store.deep_print(id).expect("stored ids resolve"))
            .collect()
    }

    /// Id of a ground fact if it is stored; never interns.
    pub fn find(&self, c: &Clause) -> Option<InternId> {
        let rel = self.relation(&c.rel)?;
        let mut args = Vec::with_capacity(c.args.len());
        for a in &c.args {
            args.push(match a {
                Subclause::Lit(Literal::Int(i), _) => Value::Int(*i),
                Subclause::Lit(Literal::Str(s), _) => Value::Str(self.store.symbols().strings.lookup(s)?),
                Subclause::Clause(inner) => Value::Id(self.find(inner)?),
                _ => return None,
            });
        }
        self.store.find(rel, &args)
    }

    /// `key\tvalue` statistics text.
    pub fn stats_text(&self, cfg: &EvalConfig) -> String {
        let mut out = String::new();
        let s = &self.stats;
        let _ = writeln!(out, "workers\t{}", cfg.workers);
        let _ = writeln!(out, "buckets\t{}", cfg.buckets);
        let _ = writeln!(out, "subbuckets\t{}", cfg.subbuckets);
        let _ = writeln!(out, "strata\t{}", s.strata.len());
        let names = &self.store.symbols().rels;
        for (i, st) in s.strata.iter().enumerate() {
            let rels: Vec<&str> = st.relations.iter().map(|&r| names.name(r)).collect();
            let news: Vec<String> = st.new_per_iteration.iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "stratum.{i}.relations\t{}", rels.join(","));
            let _ = writeln!(out, "stratum.{i}.iterations\t{}", st.iterations);
            let _ = writeln!(out, "stratum.{i}.new_facts\t{}", news.join(","));
        }
        for (r, name, _) in names.iter() {
            let _ = writeln!(out, "relation.{name}.facts\t{}", self.store.relation_len(r));
        }
        let _ = writeln!(out, "facts.total\t{}", self.store.len());
        let t = &s.times;
        for (k, d) in [
            ("intra_bucket", t.intra_bucket),
            ("local_join", t.local_join),
            ("all_to_all", t.all_to_all),
            ("intern", t.intern),
            ("materialize", t.materialize),
        ] {
            let _ = writeln!(out, "time.{k}_ms\t{:.3}", d.as_secs_f64() * 1e3);
        }
        let _ = writeln!(out, "time.total_ms\t{:.3}", s.total.as_secs_f64() * 1e3);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatten::flatten_program;
    use crate::plan::compile;
    use crate::syntax::{desugar, parse_fact, parse_program, validate};
    use crate::term::Symbols;

    fn run(src: &str, facts: &[&str], cfg: &EvalConfig) -> Result<Database, EvalError> {
        let core = flatten_program(&desugar(validate(parse_program(src).unwrap()).unwrap()));
        let mut store = TermStore::new(Symbols::default(), cfg.buckets);
        let plan = compile(&core, &mut store).unwrap();
        let mut all = core.facts.clone();
        all.extend(facts.iter().map(|f| parse_fact(f).unwrap()));
        subfact_close_ingest(&mut store, &all)?;
        run_fixpoint(&plan, store, cfg)
    }

    const TC: &str = "tc(a,b) :- edge(a,b). tc(a,c) :- tc(a,b), edge(b,c).";

    #[test]
    fn ingest_closes_subfacts() {
        let mut store = TermStore::new(Symbols::default(), 4);
        let ids = subfact_close_ingest(&mut store, &[parse_fact("G(G(A()))").unwrap()]).unwrap();
        assert_eq!(ids.len(), 1);
        assert_eq!(store.len(), 3);
        let mut store = TermStore::new(Symbols::default(), 4);
        subfact_close_ingest(&mut store, &[]).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn tc_path() {
        let db = run(TC, &["edge(1,2)", "edge(2,3)"], &EvalConfig::default()).unwrap();
        assert_eq!(db.dump("tc").unwrap(), ["tc(1, 2)", "tc(1, 3)", "tc(2, 3)"]);
    }

    #[test]
    fn tc_second_iteration_adds_one() {
        let cfg = EvalConfig {
            trace: true,
            ..EvalConfig::default()
        };
        let db = run(TC, &["edge(1,2)", "edge(2,3)"], &cfg).unwrap();
        let tc_stratum = db.stats.strata.last().unwrap();
        assert_eq!(tc_stratum.new_per_iteration, vec![2, 1, 0]);
        let second: Vec<String> = db.stats.trace[1].new.iter().map(|&id| db.deep_print(id).unwrap()).collect();
        assert_eq!(second, ["tc(1, 3)"]);
    }

    #[test]
    fn worked_example_trace() {
        let cfg = EvalConfig {
            trace: true,
            ..EvalConfig::default()
        };
        let db = run(
            "T(g) :- g = G(x), x = A(). T(g2) :- _ = T(g), g2 = G(g).",
            &["A()", "G(A())", "G(G(A()))"],
            &cfg,
        )
        .unwrap();
        let steps: Vec<Vec<String>> = db
            .stats
            .trace
            .iter()
            .map(|t| t.new.iter().map(|&id| db.deep_print(id).unwrap()).collect())
            .collect();
        assert_eq!(
            steps,
            vec![vec!["T(G(A()))".to_string()], vec!["T(G(G(A())))".to_string()], vec![]]
        );
    }

    #[test]
    fn height_guard_trips_on_nat() {
        let cfg = EvalConfig {
            max_height: Some(10),
            ..EvalConfig::default()
        };
        let err = run("S(z) :- z = Z(). S(n) :- n = S(_).", &["Z()"], &cfg).unwrap_err();
        assert!(matches!(err, EvalError::HeightLimitExceeded { limit: 10, .. }), "{err}");
        let cfg = EvalConfig {
            max_iterations: Some(5),
            ..EvalConfig::default()
        };
        let err = run("S(z) :- z = Z(). S(n) :- n = S(_).", &["Z()"], &cfg).unwrap_err();
        assert!(matches!(err, EvalError::IterationLimitExceeded { limit: 5, .. }));
    }

    #[test]
    fn worker_and_subbucket_invariance() {
        let facts: Vec<String> = (0..12).flat_map(|i| [format!("edge({i},{})", (i * 5 + 1) % 12), format!("edge({i},{})", (i + 1) % 12)]).collect();
        let refs: Vec<&str> = facts.iter().map(String::as_str).collect();
        let base = run(TC, &refs, &EvalConfig::default()).unwrap().fact_set();
        for (w, s) in [(2, 1), (3, 2), (4, 3), (8, 1)] {
            let cfg = EvalConfig {
                workers: w,
                buckets: 8.max(w),
                subbuckets: s,
                ..EvalConfig::default()
            };
            assert_eq!(run(TC, &refs, &cfg).unwrap().fact_set(), base, "W={w} S={s}");
        }
    }

    #[test]
    fn negation_and_literals() {
        let db = run(
            "r(x) :- e(x, 1). p(x, \"k\") :- e(x, _), !r(x), !s(x, _). q() :- !r(9).",
            &["e(1, 1)", "e(2, 2)", "e(3, 2)", "s(3, 0)"],
            &EvalConfig::with_workers(2),
        )
        .unwrap();
        assert_eq!(db.dump("p").unwrap(), ["p(2, \"k\")"]);
        assert_eq!(db.dump("q").unwrap(), ["q()"]);
    }

    #[test]
    fn config_is_checked() {
        let cfg = EvalConfig {
            workers: 4,
            buckets: 2,
            ..EvalConfig::default()
        };
        assert!(matches!(run(TC, &[], &cfg), Err(EvalError::Config(_))));
    }
}
