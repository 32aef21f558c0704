//! Naive reference evaluator over structural facts.
//!
//! Nothing here is interned or parallel: facts are plain trees, rules are
//! matched directly in surface form, and every round recomputes all
//! consequences from scratch.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::syntax::{BodyItem, Binder, Clause, CmpOp, Literal, Program, Subclause, SurfaceRule};
use crate::term::write_quoted;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Val {
    Int(i64),
    Str(String),
    Fact(Rc<NestedFact>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NestedFact {
    pub rel: String,
    pub args: Vec<Val>,
}

impl NestedFact {
    pub fn new(rel: impl Into<String>, args: Vec<Val>) -> Self {
        NestedFact { rel: rel.into(), args }
    }

    pub fn height(&self) -> u32 {
        1 + self
            .args
            .iter()
            .map(|a| match a {
                Val::Fact(f) => f.height(),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Converts a ground clause; `None` if it contains variables.
    pub fn from_clause(c: &Clause) -> Option<NestedFact> {
        let mut args = Vec::with_capacity(c.args.len());
        for a in &c.args {
            args.push(match a {
                Subclause::Lit(l, _) => lit(l),
                Subclause::Clause(inner) => Val::Fact(Rc::new(NestedFact::from_clause(inner)?)),
                Subclause::Var(..) | Subclause::Wildcard(_) => return None,
            });
        }
        Some(NestedFact::new(c.rel.clone(), args))
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Int(i) => write!(f, "{i}"),
            Val::Str(s) => {
                let mut out = String::new();
                write_quoted(&mut out, s);
                f.write_str(&out)
            }
            Val::Fact(fact) => fact.fmt(f),
        }
    }
}

impl fmt::Display for NestedFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            a.fmt(f)?;
        }
        f.write_str(")")
    }
}

fn lit(l: &Literal) -> Val {
    match l {
        Literal::Int(i) => Val::Int(*i),
        Literal::Str(s) => Val::Str(s.clone()),
    }
}

/// `f` plus every fact nested inside it.
pub fn subfact(f: &NestedFact) -> BTreeSet<NestedFact> {
    let mut out = BTreeSet::new();
    collect_subfacts(f, &mut out);
    out
}

fn collect_subfacts(f: &NestedFact, out: &mut BTreeSet<NestedFact>) {
    if out.insert(f.clone()) {
        for a in &f.args {
            if let Val::Fact(inner) = a {
                collect_subfacts(inner, out);
            }
        }
    }
}

pub fn is_subfact_closed(db: &BTreeSet<NestedFact>) -> bool {
    db.iter().all(|f| {
        f.args.iter().all(|a| match a {
            Val::Fact(inner) => db.contains(inner.as_ref()),
            _ => true,
        })
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OracleGuards {
    /// Rounds allowed per level.
    pub max_rounds: Option<u64>,
    pub max_height: Option<u32>,
    pub max_facts: Option<usize>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("input fact `{0}` is not ground")]
    NonGround(String),
    #[error("negation through recursion involving `{0}`")]
    Unstratifiable(String),
    #[error("level {level} did not converge within {limit} rounds")]
    RoundLimit { level: usize, limit: u64 },
    #[error("fact `{fact}` exceeds the height limit {limit}")]
    HeightLimit { fact: String, limit: u32 },
    #[error("more than {0} facts")]
    FactLimit(usize),
}

impl OracleError {
    pub fn is_guard(&self) -> bool {
        matches!(
            self,
            OracleError::RoundLimit { .. } | OracleError::HeightLimit { .. } | OracleError::FactLimit(_)
        )
    }
}

type Env = BTreeMap<String, Val>;

/// Facts grouped by relation for matching.
#[derive(Default)]
struct Db {
    all: BTreeSet<NestedFact>,
    by_rel: BTreeMap<String, Vec<Rc<NestedFact>>>,
}

impl Db {
    fn insert(&mut self, f: NestedFact) -> bool {
        if self.all.contains(&f) {
            return false;
        }
        self.by_rel.entry(f.rel.clone()).or_default().push(Rc::new(f.clone()));
        self.all.insert(f);
        true
    }

    fn of(&self, rel: &str) -> &[Rc<NestedFact>] {
        self.by_rel.get(rel).map_or(&[], Vec::as_slice)
    }
}

fn match_val(pat: &Subclause, v: &Val, env: &mut Env) -> bool {
    match pat {
        Subclause::Wildcard(_) => true,
        Subclause::Lit(l, _) => lit(l) == *v,
        Subclause::Var(name, _) => match env.get(name) {
            Some(bound) => bound == v,
            None => {
                env.insert(name.clone(), v.clone());
                true
            }
        },
        Subclause::Clause(c) => match v {
            Val::Fact(f) => match_fact(c, f, env),
            _ => false,
        },
    }
}

fn match_fact(c: &Clause, f: &NestedFact, env: &mut Env) -> bool {
    c.rel == f.rel
        && c.args.len() == f.args.len()
        && c.args.iter().zip(&f.args).all(|(p, v)| match_val(p, v, env))
}

fn instantiate(s: &Subclause, env: &Env) -> Option<Val> {
    match s {
        Subclause::Lit(l, _) => Some(lit(l)),
        Subclause::Var(v, _) => env.get(v).cloned(),
        Subclause::Clause(c) => Some(Val::Fact(Rc::new(instantiate_clause(c, env)?))),
        Subclause::Wildcard(_) => None,
    }
}

fn instantiate_clause(c: &Clause, env: &Env) -> Option<NestedFact> {
    let args = c.args.iter().map(|a| instantiate(a, env)).collect::<Option<Vec<_>>>()?;
    Some(NestedFact::new(c.rel.clone(), args))
}

fn clause_vars(c: &Clause) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    c.for_each_var(&mut |v, _| {
        out.insert(v.to_string());
    });
    out
}

/// Positive items reordered so each one shares as many variables as
/// possible with those already placed.
fn join_order(rule: &SurfaceRule) -> Vec<(Option<&Binder>, &Clause)> {
    let mut left: Vec<(Option<&Binder>, &Clause)> = rule
        .body
        .iter()
        .filter_map(|b| match b {
            BodyItem::Positive { binder, clause } => Some((binder.as_ref(), clause)),
            _ => None,
        })
        .collect();
    let mut bound = BTreeSet::new();
    let mut out = Vec::with_capacity(left.len());
    while !left.is_empty() {
        let score = |(b, c): &(Option<&Binder>, &Clause)| {
            let mut vars = clause_vars(c);
            if let Some(Binder::Var(v)) = b {
                vars.insert(v.clone());
            }
            vars.iter().filter(|v| bound.contains(*v)).count()
        };
        let best = (0..left.len()).max_by_key(|&i| (score(&left[i]), usize::MAX - i)).unwrap();
        let (b, c) = left.remove(best);
        bound.extend(clause_vars(c));
        if let Some(Binder::Var(v)) = b {
            bound.insert(v.clone());
        }
        out.push((b, c));
    }
    out
}

/// All substitutions that satisfy the rule body against `db`.
fn matches(rule: &SurfaceRule, db: &Db) -> Vec<Env> {
    let order = join_order(rule);
    let mut envs = vec![Env::new()];
    for (binder, clause) in order {
        let mut next = Vec::new();
        for env in &envs {
            for f in db.of(&clause.rel) {
                let mut e = env.clone();
                if !match_fact(clause, f, &mut e) {
                    continue;
                }
                if let Some(Binder::Var(v)) = binder {
                    let id = Val::Fact(f.clone());
                    match e.get(v) {
                        Some(old) if *old != id => continue,
                        Some(_) => {}
                        None => {
                            e.insert(v.clone(), id);
                        }
                    }
                }
                next.push(e);
            }
        }
        envs = next;
    }
    envs.retain(|env| {
        rule.body.iter().all(|b| match b {
            BodyItem::Positive { .. } => true,
            BodyItem::Negated(c) => !db.of(&c.rel).iter().any(|f| match_fact(c, f, &mut env.clone())),
            BodyItem::Compare { lhs, op, rhs } => {
                let (l, r) = (instantiate(lhs, env), instantiate(rhs, env));
                match op {
                    CmpOp::Eq => l == r,
                    CmpOp::Ne => l != r,
                }
            }
        })
    });
    envs
}

/// Every clause in a head, outermost first.
fn head_clauses(r: &SurfaceRule) -> Vec<&Clause> {
    let mut out = Vec::new();
    for h in &r.heads {
        out.push(&h.clause);
        nested_clauses(&h.clause, &mut out);
    }
    out
}

/// Relation levels: every head clause, nested ones included, sits at or
/// above the positive body relations and strictly above the negated ones,
/// and an enclosing clause sits at or above the clauses nested in it.
fn levels(program: &Program) -> Result<BTreeMap<String, usize>, OracleError> {
    let mut level: BTreeMap<String, usize> = BTreeMap::new();
    for r in &program.rules {
        for c in head_clauses(r) {
            level.entry(c.rel.clone()).or_insert(0);
        }
        for b in &r.body {
            if let BodyItem::Positive { clause: c, .. } | BodyItem::Negated(c) = b {
                level.entry(c.rel.clone()).or_insert(0);
                let mut inner = Vec::new();
                nested_clauses(c, &mut inner);
                for i in inner {
                    level.entry(i.rel.clone()).or_insert(0);
                }
            }
        }
    }
    let n = level.len();
    loop {
        let mut changed = false;
        for r in &program.rules {
            let mut need = 0;
            for b in &r.body {
                match b {
                    BodyItem::Positive { clause, .. } => need = need.max(level[&clause.rel]),
                    BodyItem::Negated(c) => need = need.max(level[&c.rel] + 1),
                    BodyItem::Compare { .. } => {}
                }
            }
            for c in head_clauses(r) {
                let mut want = need;
                for a in &c.args {
                    if let Subclause::Clause(inner) = a {
                        want = want.max(level[&inner.rel]);
                    }
                }
                let cur = level.get_mut(&c.rel).unwrap();
                if *cur < want {
                    if want > n {
                        return Err(OracleError::Unstratifiable(c.rel.clone()));
                    }
                    *cur = want;
                    changed = true;
                }
            }
        }
        if !changed {
            return Ok(level);
        }
    }
}

/// Least fixpoint of the immediate-consequence operator, evaluated level
/// by level. The input facts are subfact-closed before evaluation.
pub fn naive_fixpoint(
    program: &Program,
    edb: &[Clause],
    guards: &OracleGuards,
) -> Result<BTreeSet<NestedFact>, OracleError> {
    let level = levels(program)?;
    let mut db = Db::default();
    for c in edb {
        let f = NestedFact::from_clause(c).ok_or_else(|| OracleError::NonGround(c.to_string()))?;
        for s in subfact(&f) {
            db.insert(s);
        }
    }
    let top = level.values().copied().max().unwrap_or(0);
    for lv in 0..=top {
        // Each rule contributes the head clauses whose relation lives here.
        let rules: Vec<(&SurfaceRule, Vec<&Clause>)> = program
            .rules
            .iter()
            .map(|r| {
                let here = head_clauses(r).into_iter().filter(|c| level[&c.rel] == lv).collect();
                (r, here)
            })
            .filter(|(_, here): &(_, Vec<&Clause>)| !here.is_empty())
            .collect();
        let mut rounds = 0u64;
        loop {
            let mut fresh = BTreeSet::new();
            for (r, here) in &rules {
                for env in matches(r, &db) {
                    for c in here {
                        let f = instantiate_clause(c, &env).expect("safe rules ground their heads");
                        if !db.all.contains(&f) {
                            fresh.insert(f);
                        }
                    }
                }
            }
            if fresh.is_empty() {
                break;
            }
            rounds += 1;
            if let Some(limit) = guards.max_rounds {
                if rounds > limit {
                    return Err(OracleError::RoundLimit { level: lv, limit });
                }
            }
            for f in fresh {
                if let Some(limit) = guards.max_height {
                    if f.height() > limit {
                        return Err(OracleError::HeightLimit {
                            fact: f.to_string(),
                            limit,
                        });
                    }
                }
                for s in subfact(&f) {
                    db.insert(s);
                }
            }
            if let Some(limit) = guards.max_facts {
                if db.all.len() > limit {
                    return Err(OracleError::FactLimit(limit));
                }
            }
        }
    }
    debug_assert!(is_subfact_closed(&db.all));
    Ok(db.all)
}

/// True iff `db` is subfact-closed and satisfies every rule: each
/// substitution that makes a body true in `db` also puts its heads in `db`.
/// Substitutions are enumerated by matching bodies against `db`, which
/// covers exactly the values that occur in it.
pub fn herbrand_model_check(db: &BTreeSet<NestedFact>, program: &Program) -> bool {
    if !is_subfact_closed(db) {
        return false;
    }
    let mut idx = Db::default();
    for f in db {
        idx.insert(f.clone());
    }
    program.rules.iter().all(|r| {
        matches(r, &idx).iter().all(|env| {
            r.heads.iter().all(|h| {
                instantiate_clause(&h.clause, env).is_some_and(|f| db.contains(&f))
            })
        })
    })
}

fn nested_clauses<'a>(c: &'a Clause, out: &mut Vec<&'a Clause>) {
    for a in &c.args {
        if let Subclause::Clause(inner) = a {
            out.push(inner);
            nested_clauses(inner, out);
        }
    }
}

/// Replaces wildcards in positive body clauses by fresh variables, so that
/// each match pins down the exact facts it used.
fn name_wildcards(r: &SurfaceRule) -> SurfaceRule {
    fn go(c: &mut Clause, n: &mut usize) {
        for a in &mut c.args {
            match a {
                Subclause::Wildcard(pos) => {
                    *a = Subclause::Var(format!("$any{n}"), *pos);
                    *n += 1;
                }
                Subclause::Clause(inner) => go(inner, n),
                _ => {}
            }
        }
    }
    let mut out = r.clone();
    let mut n = 0;
    for b in &mut out.body {
        if let BodyItem::Positive { clause, .. } = b {
            go(clause, &mut n);
        }
    }
    out
}

/// Every derivation step over `db`: a produced fact and the facts it was
/// produced from. Premises are the instantiated positive body clauses
/// (nested ones included) and, for a head clause, its own nested clauses.
pub fn derivation_steps(program: &Program, db: &BTreeSet<NestedFact>) -> Vec<(NestedFact, BTreeSet<NestedFact>)> {
    let mut idx = Db::default();
    for f in db {
        idx.insert(f.clone());
    }
    let mut steps = Vec::new();
    for r in program.rules.iter().filter(|r| !r.is_fact()) {
        let r = &name_wildcards(r);
        let mut body_clauses = Vec::new();
        for b in &r.body {
            if let BodyItem::Positive { clause, .. } = b {
                body_clauses.push(clause);
                nested_clauses(clause, &mut body_clauses);
            }
        }
        for env in matches(r, &idx) {
            let premises: BTreeSet<NestedFact> = body_clauses
                .iter()
                .map(|c| instantiate_clause(c, &env).expect("matched body is ground"))
                .collect();
            for h in &r.heads {
                let mut produced = vec![&h.clause];
                nested_clauses(&h.clause, &mut produced);
                for p in produced {
                    let mut prem = premises.clone();
                    let mut inner = Vec::new();
                    nested_clauses(p, &mut inner);
                    prem.extend(inner.iter().map(|c| instantiate_clause(c, &env).expect("safe head")));
                    steps.push((instantiate_clause(p, &env).expect("safe head"), prem));
                }
            }
        }
    }
    steps
}

/// Union of leaf input facts over all derivation trees of each fact in
/// `db`, as the least solution of `L(t) = [t in edb] ∪ ⋃ L(premise)` over
/// all derivation steps of `t`.
pub fn lineage(
    program: &Program,
    db: &BTreeSet<NestedFact>,
    edb: &BTreeSet<NestedFact>,
) -> BTreeMap<NestedFact, BTreeSet<NestedFact>> {
    let steps = derivation_steps(program, db);
    let mut leaves: BTreeMap<NestedFact, BTreeSet<NestedFact>> = db
        .iter()
        .map(|f| {
            let own = if edb.contains(f) { BTreeSet::from([f.clone()]) } else { BTreeSet::new() };
            (f.clone(), own)
        })
        .collect();
    loop {
        let mut changed = false;
        for (head, prem) in &steps {
            let mut add = BTreeSet::new();
            for p in prem {
                add.extend(leaves[p].iter().cloned());
            }
            let cur = leaves.get_mut(head).expect("derived facts are in db");
            let before = cur.len();
            cur.extend(add);
            changed |= cur.len() != before;
        }
        if !changed {
            return leaves;
        }
    }
}

/// Deep-printed form used for comparisons with the engine.
pub fn printed(db: &BTreeSet<NestedFact>) -> BTreeSet<String> {
    db.iter().map(ToString::to_string).collect()
}
