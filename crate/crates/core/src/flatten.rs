//! Compilation of surface rules with nested clauses into flat core rules.
//!
//! Body clauses are flattened by naming every nested clause with a fresh id
//! variable. Nested head clauses are split off into auxiliary rules sharing
//! the original body, one per nested clause, so every head produced by a
//! core rule is flat and every fact it mentions is itself derived.

use std::collections::HashMap;
use std::fmt;

use crate::syntax::{
    BodyItem, Binder, CheckedProgram, Clause, CmpOp, HeadClause, Literal, Pos, Program, Subclause,
    SurfaceRule,
};

/// Prefix reserved for variables introduced by compilation.
pub const FRESH_PREFIX: &str = "$f";

/// A flat column: variable, literal, or `_`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Lit(Literal),
    Wild,
}

impl Term {
    pub fn var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub rel: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(rel: impl Into<String>, args: Vec<Term>) -> Self {
        Atom {
            rel: rel.into(),
            args,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(Term::var)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CoreBody {
    /// `binder = atom`; `None` stands for `_`.
    Pos { binder: Option<String>, atom: Atom },
    Neg(Atom),
    Cmp { lhs: Term, op: CmpOp, rhs: Term },
}

/// One flat rule: a single flat head with an implicit fresh id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoreRule {
    pub head: Atom,
    pub body: Vec<CoreBody>,
    /// Index of the desugared surface rule this came from.
    pub source: usize,
}

impl CoreRule {
    pub fn positive_atoms(&self) -> impl Iterator<Item = (Option<&str>, &Atom)> {
        self.body.iter().filter_map(|b| match b {
            CoreBody::Pos { binder, atom } => Some((binder.as_deref(), atom)),
            _ => None,
        })
    }

    /// Variables bound by positive atoms, including id binders.
    pub fn bound_vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (binder, atom) in self.positive_atoms() {
            for v in binder.into_iter().chain(atom.vars()) {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Equivalent surface rule (flat clauses only).
    pub fn to_surface(&self) -> SurfaceRule {
        let body = self
            .body
            .iter()
            .map(|b| match b {
                CoreBody::Pos { binder, atom } => BodyItem::Positive {
                    binder: Some(match binder {
                        Some(v) => Binder::Var(v.clone()),
                        None => Binder::Wildcard,
                    }),
                    clause: atom_to_clause(atom),
                },
                CoreBody::Neg(atom) => BodyItem::Negated(atom_to_clause(atom)),
                CoreBody::Cmp { lhs, op, rhs } => BodyItem::Compare {
                    lhs: term_to_subclause(lhs),
                    op: *op,
                    rhs: term_to_subclause(rhs),
                },
            })
            .collect();
        SurfaceRule {
            heads: vec![HeadClause {
                binder: None,
                clause: atom_to_clause(&self.head),
            }],
            body,
            pos: Pos::default(),
        }
    }
}

fn term_to_subclause(t: &Term) -> Subclause {
    match t {
        Term::Var(v) => Subclause::Var(v.clone(), Pos::default()),
        Term::Lit(l) => Subclause::Lit(l.clone(), Pos::default()),
        Term::Wild => Subclause::Wildcard(Pos::default()),
    }
}

fn atom_to_clause(a: &Atom) -> Clause {
    Clause::new(a.rel.clone(), a.args.iter().map(term_to_subclause).collect())
}

/// A flattened program: relation signatures, core rules, and ground input
/// facts (possibly nested) to be ingested with subfact closure.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoreProgram {
    pub relations: Vec<(String, usize)>,
    pub rules: Vec<CoreRule>,
    pub facts: Vec<Clause>,
}

impl CoreProgram {
    pub fn arity(&self, rel: &str) -> Option<usize> {
        self.relations
            .iter()
            .find(|(n, _)| n == rel)
            .map(|&(_, a)| a)
    }

    /// Registers a relation, failing if the name exists with another arity.
    pub fn declare(&mut self, rel: &str, arity: usize) -> Result<(), (usize, usize)> {
        match self.arity(rel) {
            Some(a) if a != arity => Err((a, arity)),
            Some(_) => Ok(()),
            None => {
                self.relations.push((rel.to_string(), arity));
                Ok(())
            }
        }
    }

    pub fn to_surface(&self) -> Program {
        let mut p = Program::default();
        for f in &self.facts {
            p.rules.push(SurfaceRule {
                heads: vec![HeadClause {
                    binder: None,
                    clause: f.clone(),
                }],
                body: Vec::new(),
                pos: Pos::default(),
            });
        }
        p.rules.extend(self.rules.iter().map(CoreRule::to_surface));
        p
    }
}

/// Fresh-variable supply and structural memo for one rule.
#[derive(Default)]
pub struct Fresh {
    next: usize,
    memo: HashMap<Atom, String>,
}

impl Fresh {
    pub fn var(&mut self) -> String {
        let v = format!("{FRESH_PREFIX}{}", self.next);
        self.next += 1;
        v
    }
}

fn literal_term(s: &Subclause) -> Option<Term> {
    match s {
        Subclause::Var(v, _) => Some(Term::Var(v.clone())),
        Subclause::Lit(l, _) => Some(Term::Lit(l.clone())),
        Subclause::Wildcard(_) => Some(Term::Wild),
        Subclause::Clause(_) => None,
    }
}

/// Flattens one argument: variables, literals and `_` map to themselves with
/// no clauses; a nested clause maps to a fresh id variable plus its clauses,
/// outer clause first.
pub fn subcl(s: &Subclause, fresh: &mut Fresh) -> (Term, Vec<CoreBody>) {
    if let Some(t) = literal_term(s) {
        return (t, Vec::new());
    }
    let Subclause::Clause(c) = s else {
        unreachable!()
    };
    let (atom, nested) = flatten_args(c, fresh);
    let memoizable = !atom.args.contains(&Term::Wild);
    if memoizable {
        if let Some(v) = fresh.memo.get(&atom) {
            return (Term::Var(v.clone()), nested);
        }
    }
    let t = fresh.var();
    if memoizable {
        fresh.memo.insert(atom.clone(), t.clone());
    }
    let mut out = vec![CoreBody::Pos {
        binder: Some(t.clone()),
        atom,
    }];
    out.extend(nested);
    (Term::Var(t), out)
}

fn flatten_args(c: &Clause, fresh: &mut Fresh) -> (Atom, Vec<CoreBody>) {
    let mut args = Vec::with_capacity(c.args.len());
    let mut nested = Vec::new();
    for a in &c.args {
        let (t, cls) = subcl(a, fresh);
        args.push(t);
        nested.extend(cls);
    }
    (Atom::new(c.rel.clone(), args), nested)
}

/// Flattens a body clause with its binder into a set of flat clauses.
pub fn clause(binder: Option<&Binder>, c: &Clause, fresh: &mut Fresh) -> Vec<CoreBody> {
    let (atom, nested) = flatten_args(c, fresh);
    let binder = match binder {
        Some(Binder::Var(v)) => Some(v.clone()),
        _ => None,
    };
    let mut out = vec![CoreBody::Pos { binder, atom }];
    out.extend(nested);
    out
}

fn push_unique(body: &mut Vec<CoreBody>, items: impl IntoIterator<Item = CoreBody>) {
    for it in items {
        if !body.contains(&it) {
            body.push(it);
        }
    }
}

struct HeadNode {
    var: String,
    atom: Atom,
    /// Flat clauses binding the fresh variables of this node's descendants.
    below: Vec<CoreBody>,
}

fn split_head_arg(
    s: &Subclause,
    fresh: &mut Fresh,
    memo: &mut HashMap<Atom, String>,
    nodes: &mut Vec<HeadNode>,
) -> (Term, Vec<CoreBody>) {
    if let Some(t) = literal_term(s) {
        return (t, Vec::new());
    }
    let Subclause::Clause(c) = s else {
        unreachable!()
    };
    let mut args = Vec::with_capacity(c.args.len());
    let mut below = Vec::new();
    for a in &c.args {
        let (t, cls) = split_head_arg(a, fresh, memo, nodes);
        args.push(t);
        push_unique(&mut below, cls);
    }
    let atom = Atom::new(c.rel.clone(), args);
    if let Some(v) = memo.get(&atom) {
        let mut cls = vec![CoreBody::Pos {
            binder: Some(v.clone()),
            atom,
        }];
        push_unique(&mut cls, below);
        return (Term::Var(v.clone()), cls);
    }
    let var = fresh.var();
    memo.insert(atom.clone(), var.clone());
    nodes.push(HeadNode {
        var: var.clone(),
        atom: atom.clone(),
        below: below.clone(),
    });
    let mut cls = vec![CoreBody::Pos {
        binder: Some(var.clone()),
        atom,
    }];
    push_unique(&mut cls, below);
    (Term::Var(var), cls)
}

/// Splits a head with nested clauses into rules sharing `body`: one per
/// nested clause (children before parents) and finally the outer head.
pub fn head_materialization_split(
    head: &Clause,
    body: &[CoreBody],
    fresh: &mut Fresh,
    source: usize,
) -> Vec<CoreRule> {
    let mut memo = HashMap::new();
    let mut nodes = Vec::new();
    let mut args = Vec::with_capacity(head.args.len());
    let mut extra = Vec::new();
    for a in &head.args {
        let (t, cls) = split_head_arg(a, fresh, &mut memo, &mut nodes);
        args.push(t);
        push_unique(&mut extra, cls);
    }
    let mut out = Vec::with_capacity(nodes.len() + 1);
    for n in nodes {
        let mut b = body.to_vec();
        push_unique(&mut b, n.below);
        debug_assert!(!n.var.is_empty());
        out.push(CoreRule {
            head: n.atom,
            body: b,
            source,
        });
    }
    let mut b = body.to_vec();
    push_unique(&mut b, extra);
    out.push(CoreRule {
        head: Atom::new(head.rel.clone(), args),
        body: b,
        source,
    });
    out
}

/// Flattens one single-head surface rule into core rules.
pub fn flatten_rule(rule: &SurfaceRule, source: usize) -> Vec<CoreRule> {
    let mut fresh = Fresh::default();
    let mut body = Vec::new();
    for item in &rule.body {
        match item {
            BodyItem::Positive { binder, clause: c } => {
                let cls = clause(binder.as_ref(), c, &mut fresh);
                push_unique(&mut body, cls);
            }
            BodyItem::Negated(c) => {
                let (atom, nested) = flatten_args(c, &mut fresh);
                debug_assert!(nested.is_empty());
                push_unique(&mut body, [CoreBody::Neg(atom)]);
            }
            BodyItem::Compare { lhs, op, rhs } => {
                let (l, _) = subcl(lhs, &mut fresh);
                let (r, _) = subcl(rhs, &mut fresh);
                push_unique(&mut body, [CoreBody::Cmp { lhs: l, op: *op, rhs: r }]);
            }
        }
    }
    let mut out = Vec::new();
    for h in &rule.heads {
        out.extend(head_materialization_split(&h.clause, &body, &mut fresh, source));
    }
    out
}

/// Flattens a validated, desugared program.
pub fn flatten_program(checked: &CheckedProgram) -> CoreProgram {
    let mut core = CoreProgram {
        relations: checked.relations.clone(),
        ..CoreProgram::default()
    };
    for (i, r) in checked.program.rules.iter().enumerate() {
        if r.is_fact() {
            core.facts.extend(r.heads.iter().map(|h| h.clause.clone()));
        } else {
            core.rules.extend(flatten_rule(r, i));
        }
    }
    core
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Lit(l) => write!(f, "{l}"),
            Term::Wild => f.write_str("_"),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for CoreBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreBody::Pos {
                binder: Some(v),
                atom,
            } => write!(f, "{v} = {atom}"),
            CoreBody::Pos { binder: None, atom } => write!(f, "{atom}"),
            CoreBody::Neg(atom) => write!(f, "!{atom}"),
            CoreBody::Cmp { lhs, op, rhs } => write!(f, "{lhs} {op} {rhs}"),
        }
    }
}

impl fmt::Display for CoreRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        for (i, b) in self.body.iter().enumerate() {
            f.write_str(if i == 0 { " :- " } else { ", " })?;
            write!(f, "{b}")?;
        }
        f.write_str(".")
    }
}

impl fmt::Display for CoreProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, arity) in &self.relations {
            writeln!(f, ".decl {name}/{arity}")?;
        }
        for fact in &self.facts {
            writeln!(f, "{fact}.")?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{desugar, parse_program, validate};

    fn core(src: &str) -> CoreProgram {
        flatten_program(&desugar(validate(parse_program(src).unwrap()).unwrap()))
    }

    fn texts(p: &CoreProgram) -> Vec<String> {
        p.rules.iter().map(ToString::to_string).collect()
    }

    #[test]
    fn subcl_leaves() {
        let mut fresh = Fresh::default();
        let (t, cls) = subcl(&Subclause::Var("x".into(), Pos::default()), &mut fresh);
        assert_eq!(t, Term::Var("x".into()));
        assert!(cls.is_empty());
        let (t, cls) = subcl(&Subclause::Lit(Literal::Int(7), Pos::default()), &mut fresh);
        assert_eq!(t, Term::Lit(Literal::Int(7)));
        assert!(cls.is_empty());
    }

    #[test]
    fn subcl_nested_depth() {
        let p = parse_program("p(x) :- q(G(G(x))).").unwrap();
        let crate::syntax::BodyItem::Positive { clause: c, .. } = &p.rules[0].body[0] else {
            panic!()
        };
        let mut fresh = Fresh::default();
        let (t, cls) = subcl(&c.args[0], &mut fresh);
        assert_eq!(t, Term::Var("$f1".into()));
        let shown: Vec<String> = cls.iter().map(ToString::to_string).collect();
        assert_eq!(shown, ["$f1 = G($f0)", "$f0 = G(x)"]);
    }

    #[test]
    fn body_clause_with_binder() {
        let p = core("H(id) :- id = R(S(x)).");
        assert_eq!(texts(&p), ["H(id) :- id = R($f0), $f0 = S(x)."]);
    }

    #[test]
    fn flat_rule_is_fixed_point() {
        let p = core("tc(a, c) :- tc(a, b), edge(b, c).");
        assert_eq!(texts(&p), ["tc(a, c) :- tc(a, b), edge(b, c)."]);
    }

    #[test]
    fn nested_head_is_split() {
        let p = core("T(G(x)) :- _ = T(g), g = G(g2), g2 = G(x).");
        assert_eq!(
            texts(&p),
            [
                "G(x) :- T(g), g = G(g2), g2 = G(x).",
                "T($f0) :- T(g), g = G(g2), g2 = G(x), $f0 = G(x).",
            ]
        );
    }

    #[test]
    fn two_level_head_gives_three_rules() {
        let p = core("prov(column(a, 0, B(x)), 1) :- q(a, x).");
        assert_eq!(p.rules.len(), 3);
        assert_eq!(p.rules[0].head.to_string(), "B(x)");
        assert_eq!(p.rules[1].head.to_string(), "column(a, 0, $f0)");
        assert_eq!(p.rules[2].head.to_string(), "prov($f1, 1)");
    }

    #[test]
    fn structural_duplicates_merge() {
        let p = core("p(x) :- q(G(x)), r(G(x)), q(G(x)).");
        assert_eq!(texts(&p), ["p(x) :- q($f0), $f0 = G(x), r($f0)."]);
        let w = core("p(x) :- q(G(_), x), r(G(_)).");
        assert_eq!(w.rules[0].body.len(), 4);
    }

    #[test]
    fn core_output_reparses() {
        let p = core("down(call, clo(l, rho)) :- call = eval(l, rho), l = lam(x, e).");
        let text = p.to_string();
        let again = parse_program(&text).unwrap();
        assert_eq!(again.rules.len(), p.rules.len());
        for r in &p.rules {
            assert!(r.positive_atoms().all(|(_, a)| !a.rel.is_empty()));
        }
    }

    #[test]
    fn facts_are_kept_nested() {
        let p = core("k(G(A())). A().");
        assert_eq!(p.facts.len(), 2);
        assert!(p.rules.is_empty());
    }
}
