//! Provenance as program rewrites plus the lineage query.
//!
//! Every rewrite appends companion rules derived from the original core
//! rules, so the provenance relations are ordinary relations in the result.

use std::collections::{BTreeSet, HashMap, VecDeque};

use thiserror::Error;

use crate::engine::Database;
use crate::flatten::{flatten_rule, Atom, CoreBody, CoreProgram, CoreRule, Term};
use crate::syntax::{Binder, BodyItem, Clause, HeadClause, Literal, Pos, Subclause, SurfaceRule};
use crate::term::{InternId, Value};

pub const DERIV: &str = "deriv";
pub const EXPLAIN: &str = "explain_t";
pub const COLUMN: &str = "column";
pub const LIT_ORIGIN: &str = "lit_origin";
pub const PROV_PREFIX: &str = "prov_";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProvError {
    #[error("relation `{0}` is reserved for provenance")]
    Reserved(String),
    #[error("fact `{0}` is not in the database")]
    NotFound(String),
    #[error("fact `{0}` must be ground")]
    NonGround(String),
    #[error("the database has no `{DERIV}` relation; run with eager why-provenance")]
    NoDerivations,
}

/// Which rewrites to apply.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Rewrites {
    pub eager_why: bool,
    pub where_: bool,
    /// Seed fact for lazy why-provenance.
    pub explain: Option<Clause>,
}

impl Rewrites {
    pub fn is_empty(&self) -> bool {
        !self.eager_why && !self.where_ && self.explain.is_none()
    }
}

fn is_reserved(name: &str) -> bool {
    matches!(name, DERIV | EXPLAIN | COLUMN | LIT_ORIGIN) || name.starts_with(PROV_PREFIX)
}

fn check_names(core: &CoreProgram) -> Result<(), ProvError> {
    match core.relations.iter().find(|(n, _)| is_reserved(n)) {
        Some((n, _)) => Err(ProvError::Reserved(n.clone())),
        None => Ok(()),
    }
}

fn declare(out: &mut CoreProgram, rel: &str, arity: usize) {
    out.declare(rel, arity).expect("provenance relations are unique");
}

/// Gives every positive atom a variable binder; returns the new body and
/// the binders of positive atoms in body order.
fn bind_atoms(rule: &CoreRule, prefix: &str) -> (Vec<CoreBody>, Vec<String>) {
    let mut n = 0;
    let mut ids = Vec::new();
    let body = rule
        .body
        .iter()
        .map(|b| match b {
            CoreBody::Pos { binder, atom } => {
                let v = binder.clone().unwrap_or_else(|| {
                    n += 1;
                    format!("${prefix}{}", n - 1)
                });
                ids.push(v.clone());
                CoreBody::Pos {
                    binder: Some(v),
                    atom: atom.clone(),
                }
            }
            other => other.clone(),
        })
        .collect();
    (body, ids)
}

fn head_atom(rule: &CoreRule, var: &str) -> CoreBody {
    CoreBody::Pos {
        binder: Some(var.to_string()),
        atom: rule.head.clone(),
    }
}

fn var(v: &str) -> Term {
    Term::Var(v.to_string())
}

fn eager_companions(core: &CoreProgram) -> Vec<CoreRule> {
    let mut out = Vec::new();
    for rule in &core.rules {
        let (mut body, ids) = bind_atoms(rule, "w");
        body.push(head_atom(rule, "$wh"));
        let mut seen = BTreeSet::new();
        for id in ids {
            if seen.insert(id.clone()) {
                out.push(CoreRule {
                    head: Atom::new(DERIV, vec![var(&id), var("$wh")]),
                    body: body.clone(),
                    source: rule.source,
                });
            }
        }
    }
    out
}

fn lazy_companions(core: &CoreProgram) -> Vec<CoreRule> {
    let mut out = Vec::new();
    for rule in &core.rules {
        let (mut body, ids) = bind_atoms(rule, "x");
        body.push(head_atom(rule, "$xh"));
        body.push(CoreBody::Pos {
            binder: None,
            atom: Atom::new(EXPLAIN, vec![var("$xh")]),
        });
        let mut seen = BTreeSet::new();
        for id in ids {
            if seen.insert(id.clone()) {
                out.push(CoreRule {
                    head: Atom::new(EXPLAIN, vec![var(&id)]),
                    body: body.clone(),
                    source: rule.source,
                });
            }
        }
    }
    out
}

/// `explain_t(t) :- t = <target>.`
fn seed_rules(target: &Clause, source: usize) -> Vec<CoreRule> {
    let seed = SurfaceRule {
        heads: vec![HeadClause {
            binder: None,
            clause: Clause::new(EXPLAIN, vec![Subclause::Var("$seed".into(), Pos::default())]),
        }],
        body: vec![BodyItem::Positive {
            binder: Some(Binder::Var("$seed".into())),
            clause: target.clone(),
        }],
        pos: Pos::default(),
    };
    flatten_rule(&seed, source)
}

fn where_companions(core: &CoreProgram) -> (Vec<CoreRule>, BTreeSet<Literal>) {
    let mut out = Vec::new();
    let mut lits = BTreeSet::new();
    for (rel, arity) in &core.relations {
        for k in 0..*arity {
            let mut args = vec![Term::Wild; *arity];
            args[k] = var("$v");
            out.push(CoreRule {
                head: Atom::new(COLUMN, vec![var("$id"), Term::Lit(Literal::Int(k as i64)), var("$v")]),
                body: vec![CoreBody::Pos {
                    binder: Some("$id".into()),
                    atom: Atom::new(rel.clone(), args),
                }],
                source: usize::MAX,
            });
        }
    }
    for rule in &core.rules {
        let (mut body, ids) = bind_atoms(rule, "c");
        let atoms: Vec<&Atom> = rule.positive_atoms().map(|(_, a)| a).collect();
        let mut head_args = Vec::with_capacity(rule.head.args.len());
        for (k, t) in rule.head.args.iter().enumerate() {
            let origin = format!("$o{k}");
            match t {
                Term::Var(v) => {
                    let pos = atoms.iter().zip(&ids).find_map(|(a, id)| {
                        match a.args.iter().position(|x| x.var() == Some(v.as_str())) {
                            Some(j) => Some((id, Some(j))),
                            None if id == v => Some((id, None)),
                            None => None,
                        }
                    });
                    match pos.expect("safe heads are bound by positive atoms") {
                        (id, Some(j)) => {
                            body.push(CoreBody::Pos {
                                binder: Some(origin.clone()),
                                atom: Atom::new(COLUMN, vec![var(id), Term::Lit(Literal::Int(j as i64)), var(v)]),
                            });
                            head_args.push(var(&origin));
                        }
                        (id, None) => head_args.push(var(id)),
                    }
                }
                Term::Lit(l) => {
                    lits.insert(l.clone());
                    body.push(CoreBody::Pos {
                        binder: Some(origin.clone()),
                        atom: Atom::new(LIT_ORIGIN, vec![Term::Lit(l.clone())]),
                    });
                    head_args.push(var(&origin));
                }
                Term::Wild => unreachable!("heads have no wildcards"),
            }
        }
        out.push(CoreRule {
            head: Atom::new(format!("{PROV_PREFIX}{}", rule.head.rel), head_args),
            body,
            source: rule.source,
        });
    }
    (out, lits)
}

/// Applies the selected rewrites to `core`. Companions are built from the
/// original rules only, so provenance relations get no provenance of
/// their own.
pub fn rewrite(core: &CoreProgram, rw: &Rewrites) -> Result<CoreProgram, ProvError> {
    if rw.is_empty() {
        return Ok(core.clone());
    }
    check_names(core)?;
    let mut out = core.clone();
    if rw.eager_why {
        declare(&mut out, DERIV, 2);
        out.rules.extend(eager_companions(core));
    }
    if let Some(target) = &rw.explain {
        if !target.is_ground() {
            return Err(ProvError::NonGround(target.to_string()));
        }
        declare(&mut out, EXPLAIN, 1);
        out.rules.extend(lazy_companions(core));
        for r in seed_rules(target, usize::MAX) {
            for (_, a) in r.positive_atoms() {
                if out.arity(&a.rel).is_none() {
                    declare(&mut out, &a.rel, a.args.len());
                }
            }
            out.rules.push(r);
        }
    }
    if rw.where_ {
        let (rules, lits) = where_companions(core);
        declare(&mut out, COLUMN, 3);
        declare(&mut out, LIT_ORIGIN, 1);
        for r in &core.rules {
            declare(&mut out, &format!("{PROV_PREFIX}{}", r.head.rel), r.head.args.len());
        }
        out.rules.extend(rules);
        out.facts.extend(lits.into_iter().map(|l| {
            Clause::new(LIT_ORIGIN, vec![Subclause::Lit(l, Pos::default())])
        }));
    }
    Ok(out)
}

pub fn rewrite_eager_why(core: &CoreProgram) -> Result<CoreProgram, ProvError> {
    rewrite(core, &Rewrites { eager_why: true, ..Rewrites::default() })
}

pub fn rewrite_lazy_why(core: &CoreProgram, target: &Clause) -> Result<CoreProgram, ProvError> {
    rewrite(core, &Rewrites { explain: Some(target.clone()), ..Rewrites::default() })
}

pub fn rewrite_where(core: &CoreProgram) -> Result<CoreProgram, ProvError> {
    rewrite(core, &Rewrites { where_: true, ..Rewrites::default() })
}

fn id_pair(db: &Database, id: InternId) -> Option<(InternId, InternId)> {
    match db.store.resolve(id).ok()?.1 {
        [Value::Id(from), Value::Id(to)] => Some((*from, *to)),
        _ => None,
    }
}

/// Input facts reachable from `target` along reversed `deriv` edges,
/// counting `target` itself.
pub fn why_closure(db: &Database, target: InternId) -> Result<BTreeSet<InternId>, ProvError> {
    db.store
        .stored(target)
        .map_err(|_| ProvError::NotFound(target.to_string()))?;
    let deriv = db.relation(DERIV).ok_or(ProvError::NoDerivations)?;
    let mut parents: HashMap<InternId, Vec<InternId>> = HashMap::new();
    for e in db.store.relation_ids(deriv) {
        if let Some((from, to)) = id_pair(db, e) {
            parents.entry(to).or_default().push(from);
        }
    }
    let mut seen = BTreeSet::from([target]);
    let mut queue = VecDeque::from([target]);
    while let Some(id) = queue.pop_front() {
        for &p in parents.get(&id).into_iter().flatten() {
            if seen.insert(p) {
                queue.push_back(p);
            }
        }
    }
    Ok(seen.into_iter().filter(|&id| db.is_edb(id)).collect())
}

/// Input facts marked by a lazy run.
pub fn explained(db: &Database) -> BTreeSet<InternId> {
    let Some(rel) = db.relation(EXPLAIN) else {
        return BTreeSet::new();
    };
    db.store
        .relation_ids(rel)
        .into_iter()
        .filter_map(|id| match db.store.resolve(id).ok()?.1 {
            [Value::Id(t)] if db.is_edb(*t) => Some(*t),
            _ => None,
        })
        .collect()
}

/// Sorted deep prints of a set of ids.
pub fn print_ids(db: &Database, ids: &BTreeSet<InternId>) -> Vec<String> {
    let mut out: Vec<String> = ids.iter().map(|&id| db.deep_print(id).expect("stored id")).collect();
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_fixpoint, subfact_close_ingest, EvalConfig};
    use crate::flatten::flatten_program;
    use crate::plan::compile;
    use crate::syntax::{desugar, parse_fact, parse_program, validate};
    use crate::term::{Symbols, TermStore};

    fn core(src: &str) -> CoreProgram {
        flatten_program(&desugar(validate(parse_program(src).unwrap()).unwrap()))
    }

    fn run(core: &CoreProgram, facts: &[&str]) -> Database {
        let cfg = EvalConfig::default();
        let mut store = TermStore::new(Symbols::default(), cfg.buckets);
        let plan = compile(core, &mut store).unwrap();
        let mut all = core.facts.clone();
        all.extend(facts.iter().map(|f| parse_fact(f).unwrap()));
        subfact_close_ingest(&mut store, &all).unwrap();
        run_fixpoint(&plan, store, &cfg).unwrap()
    }

    const TC: &str = "tc(a,b) :- edge(a,b). tc(a,c) :- tc(a,b), edge(b,c).";

    fn why(db: &Database, fact: &str) -> Vec<String> {
        let id = db.find(&parse_fact(fact).unwrap()).unwrap();
        print_ids(db, &why_closure(db, id).unwrap())
    }

    #[test]
    fn eager_companion_shape() {
        let p = rewrite_eager_why(&core("H(a,c) :- B0(a,b), B1(b,c).")).unwrap();
        let extra: Vec<String> = p.rules[1..].iter().map(ToString::to_string).collect();
        assert_eq!(
            extra,
            [
                "deriv($w0, $wh) :- $w0 = B0(a, b), $w1 = B1(b, c), $wh = H(a, c).",
                "deriv($w1, $wh) :- $w0 = B0(a, b), $w1 = B1(b, c), $wh = H(a, c).",
            ]
        );
        let one = rewrite_eager_why(&core("H(a) :- B(a).")).unwrap();
        assert_eq!(one.rules.len(), 2);
    }

    #[test]
    fn eager_tc_lineage() {
        let db = run(&rewrite_eager_why(&core(TC)).unwrap(), &["edge(1,2)", "edge(2,3)"]);
        assert_eq!(why(&db, "tc(1,3)"), ["edge(1, 2)", "edge(2, 3)"]);
        assert_eq!(why(&db, "edge(1,2)"), ["edge(1, 2)"]);
        let db = run(
            &rewrite_eager_why(&core(TC)).unwrap(),
            &["edge(1,2)", "edge(2,4)", "edge(1,3)", "edge(3,4)"],
        );
        assert_eq!(why(&db, "tc(1,4)").len(), 4);
    }

    #[test]
    fn lazy_agrees_with_eager() {
        let facts = ["edge(1,2)", "edge(2,3)", "edge(3,1)", "edge(3,4)", "edge(5,4)"];
        let eager = run(&rewrite_eager_why(&core(TC)).unwrap(), &facts);
        for t in ["tc(1,4)", "tc(2,2)", "tc(5,4)", "edge(5,4)"] {
            let lazy = run(&rewrite_lazy_why(&core(TC), &parse_fact(t).unwrap()).unwrap(), &facts);
            assert_eq!(print_ids(&lazy, &explained(&lazy)), why(&eager, t), "{t}");
        }
        let absent = run(&rewrite_lazy_why(&core(TC), &parse_fact("tc(4,5)").unwrap()).unwrap(), &facts);
        assert!(explained(&absent).is_empty());
        assert_eq!(absent.dump(EXPLAIN).unwrap().len(), 0);
    }

    #[test]
    fn where_copy_rule_and_literals() {
        let p = rewrite_where(&core("H(a) :- B(a). K(a, 7) :- B(a).")).unwrap();
        let db = run(&p, &["B(5)"]);
        assert_eq!(db.dump("prov_H").unwrap(), ["prov_H(column(B(5), 0, 5))"]);
        assert_eq!(db.dump("prov_K").unwrap(), ["prov_K(column(B(5), 0, 5), lit_origin(7))"]);
    }

    #[test]
    fn where_join_and_id_columns() {
        let p = rewrite_where(&core("H(a,c) :- B0(a,b), B1(b,c). T(g) :- g = G(x), x = A().")).unwrap();
        let db = run(&p, &["B0(1,2)", "B1(2,3)", "G(A())"]);
        assert_eq!(
            db.dump("prov_H").unwrap(),
            ["prov_H(column(B0(1, 2), 0, 1), column(B1(2, 3), 1, 3))"]
        );
        assert_eq!(db.dump("prov_T").unwrap(), ["prov_T(G(A()))"]);
    }

    #[test]
    fn reserved_names_rejected() {
        assert_eq!(
            rewrite_eager_why(&core("deriv(a, b) :- e(a, b).")),
            Err(ProvError::Reserved("deriv".into()))
        );
        assert!(rewrite(&core("deriv(a, b) :- e(a, b)."), &Rewrites::default()).is_ok());
    }
}
