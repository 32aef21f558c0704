//! Execution plans: strata, semi-naive rule versions, join pipelines and the
//! secondary indices they need.

mod stratify;

use std::fmt::{self, Write as _};

use thiserror::Error;

pub use stratify::{dependency_graph, stratify, tarjan, Component, DepGraph, UnstratifiableNegation};

use crate::flatten::{Atom, CoreBody, CoreProgram, CoreRule, Term};
use crate::syntax::{CmpOp, Literal};
use crate::term::{RelId, TermError, TermStore, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error(transparent)]
    Unstratifiable(#[from] UnstratifiableNegation),
    #[error(transparent)]
    Term(#[from] TermError),
}

/// Which epochs of a relation a step reads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Window {
    /// Rows derived in the previous superstep (all rows at stratum start).
    Delta,
    /// Rows older than the delta.
    Full,
    /// Full and delta together.
    All,
}

impl Window {
    pub fn admits(self, epoch: u32, lo: u32, hi: u32) -> bool {
        match self {
            Window::Delta => lo <= epoch && epoch <= hi,
            Window::Full => epoch < lo,
            Window::All => epoch <= hi,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Window::Delta => "delta",
            Window::Full => "full",
            Window::All => "all",
        }
    }
}

/// A value source: a bound variable slot or a constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Slot(usize),
    Const(Value),
}

impl Operand {
    #[inline]
    pub fn get(self, slots: &[Value]) -> Value {
        match self {
            Operand::Slot(s) => slots[s],
            Operand::Const(v) => v,
        }
    }
}

/// What to do with one column (or the id) of a matched row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColOp {
    Bind(usize),
    Check(usize),
    Const(Value),
    Skip,
}

impl ColOp {
    /// Applies the op, returning false on mismatch.
    #[inline]
    pub fn apply(self, v: Value, slots: &mut [Value]) -> bool {
        match self {
            ColOp::Bind(s) => {
                slots[s] = v;
                true
            }
            ColOp::Check(s) => slots[s] == v,
            ColOp::Const(c) => c == v,
            ColOp::Skip => true,
        }
    }
}

pub type IndexId = usize;

/// A secondary index: rows of `rel` keyed by the values of `cols`.
/// Split indices spread each key bucket over sub-buckets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexSpec {
    pub rel: RelId,
    pub cols: Vec<usize>,
    pub split: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Step {
    /// Stage-0 source: scan the canonical shards of `rel`.
    Scan {
        rel: RelId,
        window: Window,
        id: ColOp,
        cols: Vec<ColOp>,
    },
    /// Keyed join through a secondary index; an exchange boundary.
    Join {
        index: IndexId,
        window: Window,
        key: Vec<Operand>,
        id: ColOp,
        cols: Vec<ColOp>,
    },
    /// The fact's id is already bound: chase it in the store.
    Lookup {
        rel: RelId,
        window: Window,
        id: usize,
        cols: Vec<ColOp>,
    },
    /// Every column is bound: probe the canonical index.
    Probe {
        rel: RelId,
        window: Window,
        id: ColOp,
        cols: Vec<Operand>,
    },
    /// Negation with wildcards: keyed anti-join; an exchange boundary.
    AntiJoin { index: IndexId, key: Vec<Operand> },
    /// Negation with every column bound.
    AntiProbe { rel: RelId, cols: Vec<Operand> },
    Filter { lhs: Operand, op: CmpOp, rhs: Operand },
}

impl Step {
    pub fn is_exchange(&self) -> bool {
        matches!(self, Step::Join { .. } | Step::AntiJoin { .. })
    }
}

/// One semi-naive version of a core rule.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleVersion {
    pub rule: usize,
    /// Position (among positive atoms) of the atom reading the delta.
    pub delta: Option<usize>,
    /// Non-recursive versions run only in a stratum's first superstep.
    pub once: bool,
    pub slot_names: Vec<String>,
    pub steps: Vec<Step>,
    pub head_rel: RelId,
    pub head: Vec<Operand>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stratum {
    pub relations: Vec<RelId>,
    pub recursive: bool,
    pub versions: Vec<RuleVersion>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub rules: Vec<CoreRule>,
    pub strata: Vec<Stratum>,
    pub indices: Vec<IndexSpec>,
    /// Secondary indices per relation, by `RelId` index.
    pub indices_of: Vec<Vec<IndexId>>,
    rel_names: Vec<String>,
}

impl Plan {
    pub fn version_count(&self) -> usize {
        self.strata.iter().map(|s| s.versions.len()).sum()
    }

    /// Drops every delta-driven version, leaving only the first-superstep
    /// versions. Used to check that the differential checker notices.
    pub fn sabotage(&mut self) {
        for s in &mut self.strata {
            s.versions.retain(|v| v.once);
        }
    }
}

/// Declares every program relation in `store` and compiles the plan.
pub fn compile(program: &CoreProgram, store: &mut TermStore) -> Result<Plan, PlanError> {
    let mut rel_ids = Vec::with_capacity(program.relations.len());
    for (name, arity) in &program.relations {
        rel_ids.push(store.declare_relation(name, *arity)?);
    }
    let graph = dependency_graph(program);
    let comps = stratify(&graph)?;
    let mut comp_of = vec![0; graph.names.len()];
    for (i, c) in comps.iter().enumerate() {
        for &v in &c.nodes {
            comp_of[v] = i;
        }
    }
    let node = |rel: &str| graph.node(rel).expect("relation declared");

    let mut builder = Builder {
        store,
        indices: Vec::new(),
        rel_ids: &rel_ids,
        names: &graph.names,
    };
    let mut strata = Vec::with_capacity(comps.len());
    for (ci, comp) in comps.iter().enumerate() {
        let mut versions = Vec::new();
        for (ri, rule) in program.rules.iter().enumerate() {
            if comp_of[node(&rule.head.rel)] != ci {
                continue;
            }
            let recursive: Vec<bool> = rule
                .positive_atoms()
                .map(|(_, a)| comp_of[node(&a.rel)] == ci)
                .collect();
            if recursive.iter().any(|&r| r) {
                for k in (0..recursive.len()).filter(|&k| recursive[k]) {
                    let windows = (0..recursive.len())
                        .map(|j| match (j.cmp(&k), recursive[j]) {
                            (std::cmp::Ordering::Equal, _) => Window::Delta,
                            (std::cmp::Ordering::Less, true) => Window::All,
                            (std::cmp::Ordering::Greater, true) => Window::Full,
                            (_, false) => Window::All,
                        })
                        .collect::<Vec<_>>();
                    versions.push(builder.version(ri, rule, Some(k), &windows)?);
                }
            } else {
                let windows = vec![Window::All; recursive.len()];
                versions.push(builder.version(ri, rule, None, &windows)?);
            }
        }
        strata.push(Stratum {
            relations: comp.nodes.iter().map(|&v| rel_ids[v]).collect(),
            recursive: comp.recursive,
            versions,
        });
    }
    let indices = builder.indices;
    let mut indices_of = vec![Vec::new(); store.symbols().rels.len()];
    for (i, spec) in indices.iter().enumerate() {
        indices_of[spec.rel.index()].push(i);
    }
    Ok(Plan {
        rules: program.rules.clone(),
        strata,
        indices,
        indices_of,
        rel_names: graph.names.clone(),
    })
}

struct Builder<'a> {
    store: &'a mut TermStore,
    indices: Vec<IndexSpec>,
    rel_ids: &'a [RelId],
    names: &'a [String],
}

struct Scope {
    names: Vec<String>,
}

impl Scope {
    fn slot(&self, v: &str) -> Option<usize> {
        self.names.iter().position(|n| n == v)
    }

    fn bind(&mut self, v: &str) -> usize {
        self.names.push(v.to_string());
        self.names.len() - 1
    }
}

enum Pending<'r> {
    Neg(&'r Atom),
    Cmp(&'r Term, CmpOp, &'r Term),
}

impl Builder<'_> {
    fn rel(&self, name: &str) -> RelId {
        let i = self.names.iter().position(|n| n == name).expect("relation declared");
        self.rel_ids[i]
    }

    fn literal(&mut self, l: &Literal) -> Value {
        match l {
            Literal::Int(i) => Value::Int(*i),
            Literal::Str(s) => Value::Str(self.store.intern_str(s)),
        }
    }

    fn operand(&mut self, t: &Term, scope: &Scope) -> Operand {
        match t {
            Term::Var(v) => Operand::Slot(scope.slot(v).expect("variable bound before use")),
            Term::Lit(l) => Operand::Const(self.literal(l)),
            Term::Wild => unreachable!("wildcard operand"),
        }
    }

    fn index(&mut self, rel: RelId, cols: Vec<usize>, split: bool) -> IndexId {
        let spec = IndexSpec { rel, cols, split };
        if let Some(i) = self.indices.iter().position(|s| *s == spec) {
            return i;
        }
        self.indices.push(spec);
        self.indices.len() - 1
    }

    /// Column ops for a matched row: binds fresh variables (first occurrence)
    /// and checks everything else.
    fn col_ops(&mut self, atom: &Atom, scope: &mut Scope, skip: &[usize]) -> Vec<ColOp> {
        atom.args
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if skip.contains(&i) {
                    return ColOp::Skip;
                }
                match t {
                    Term::Wild => ColOp::Skip,
                    Term::Lit(l) => ColOp::Const(self.literal(l)),
                    Term::Var(v) => match scope.slot(v) {
                        Some(s) => ColOp::Check(s),
                        None => ColOp::Bind(scope.bind(v)),
                    },
                }
            })
            .collect()
    }

    fn id_op(binder: Option<&str>, scope: &mut Scope) -> ColOp {
        match binder {
            None => ColOp::Skip,
            Some(v) => match scope.slot(v) {
                Some(s) => ColOp::Check(s),
                None => ColOp::Bind(scope.bind(v)),
            },
        }
    }

    fn version(
        &mut self,
        ri: usize,
        rule: &CoreRule,
        delta: Option<usize>,
        windows: &[Window],
    ) -> Result<RuleVersion, PlanError> {
        let atoms: Vec<(Option<&str>, &Atom)> = rule.positive_atoms().collect();
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        if let Some(k) = delta {
            order.retain(|&j| j != k);
            order.insert(0, k);
        }
        let mut pending: Vec<Pending> = rule
            .body
            .iter()
            .filter_map(|b| match b {
                CoreBody::Neg(a) => Some(Pending::Neg(a)),
                CoreBody::Cmp { lhs, op, rhs } => Some(Pending::Cmp(lhs, *op, rhs)),
                CoreBody::Pos { .. } => None,
            })
            .collect();
        let mut scope = Scope { names: Vec::new() };
        let mut steps = Vec::new();
        if atoms.is_empty() {
            self.flush_pending(&mut pending, &scope, &mut steps);
        }

        for (n, &j) in order.iter().enumerate() {
            let (binder, atom) = atoms[j];
            let rel = self.rel(&atom.rel);
            let window = windows[j];
            let bound_id = binder.and_then(|b| scope.slot(b));
            let step = if n == 0 {
                let id = Self::id_op(binder, &mut scope);
                let cols = self.col_ops(atom, &mut scope, &[]);
                Step::Scan {
                    rel,
                    window,
                    id,
                    cols,
                }
            } else if let Some(id) = bound_id {
                let cols = self.col_ops(atom, &mut scope, &[]);
                Step::Lookup {
                    rel,
                    window,
                    id,
                    cols,
                }
            } else {
                let key_cols: Vec<usize> = atom
                    .args
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| match t {
                        Term::Lit(_) => true,
                        Term::Var(v) => scope.slot(v).is_some(),
                        Term::Wild => false,
                    })
                    .map(|(i, _)| i)
                    .collect();
                if key_cols.len() == atom.args.len() {
                    let cols = atom.args.iter().map(|t| self.operand(t, &scope)).collect();
                    let id = Self::id_op(binder, &mut scope);
                    Step::Probe {
                        rel,
                        window,
                        id,
                        cols,
                    }
                } else {
                    let key = key_cols
                        .iter()
                        .map(|&c| self.operand(&atom.args[c], &scope))
                        .collect();
                    let id = Self::id_op(binder, &mut scope);
                    let cols = self.col_ops(atom, &mut scope, &key_cols);
                    let index = self.index(rel, key_cols, true);
                    Step::Join {
                        index,
                        window,
                        key,
                        id,
                        cols,
                    }
                }
            };
            steps.push(step);
            self.flush_pending(&mut pending, &scope, &mut steps);
        }
        debug_assert!(pending.is_empty(), "validated rules bind every guard variable");

        let head_rel = self.rel(&rule.head.rel);
        let head = rule
            .head
            .args
            .iter()
            .map(|t| self.operand(t, &scope))
            .collect();
        Ok(RuleVersion {
            rule: ri,
            delta,
            once: delta.is_none(),
            slot_names: scope.names,
            steps,
            head_rel,
            head,
        })
    }

    fn flush_pending(&mut self, pending: &mut Vec<Pending>, scope: &Scope, steps: &mut Vec<Step>) {
        let ready = |t: &Term| match t {
            Term::Var(v) => scope.slot(v).is_some(),
            _ => true,
        };
        let mut i = 0;
        while i < pending.len() {
            let is_ready = match &pending[i] {
                Pending::Neg(a) => a.args.iter().all(ready),
                Pending::Cmp(l, _, r) => ready(l) && ready(r),
            };
            if !is_ready {
                i += 1;
                continue;
            }
            match pending.remove(i) {
                Pending::Cmp(l, op, r) => {
                    let lhs = self.operand(l, scope);
                    let rhs = self.operand(r, scope);
                    steps.push(Step::Filter { lhs, op, rhs });
                }
                Pending::Neg(a) => {
                    let rel = self.rel(&a.rel);
                    if a.args.contains(&Term::Wild) {
                        let key_cols: Vec<usize> = a
                            .args
                            .iter()
                            .enumerate()
                            .filter(|(_, t)| **t != Term::Wild)
                            .map(|(i, _)| i)
                            .collect();
                        let key = key_cols
                            .iter()
                            .map(|&c| self.operand(&a.args[c], scope))
                            .collect();
                        let index = self.index(rel, key_cols, false);
                        steps.push(Step::AntiJoin { index, key });
                    } else {
                        let cols = a.args.iter().map(|t| self.operand(t, scope)).collect();
                        steps.push(Step::AntiProbe { rel, cols });
                    }
                }
            }
        }
    }
}

impl Plan {
    pub fn relation_name(&self, rel: RelId) -> &str {
        &self.rel_names[rel.index()]
    }

    fn rel_name(&self, rel: RelId) -> &str {
        self.relation_name(rel)
    }

    fn fmt_operand(&self, out: &mut String, o: Operand, names: &[String]) {
        match o {
            Operand::Slot(s) => out.push_str(&names[s]),
            Operand::Const(v) => fmt_value(out, v),
        }
    }

    fn fmt_cols(&self, out: &mut String, id: ColOp, cols: &[ColOp], names: &[String]) {
        let op = |out: &mut String, c: ColOp| match c {
            ColOp::Bind(s) => {
                let _ = write!(out, "{}!", names[s]);
            }
            ColOp::Check(s) => out.push_str(&names[s]),
            ColOp::Const(v) => fmt_value(out, v),
            ColOp::Skip => out.push('_'),
        };
        if id != ColOp::Skip {
            op(out, id);
            out.push_str(" = ");
        }
        out.push('(');
        for (i, c) in cols.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            op(out, *c);
        }
        out.push(')');
    }
}

fn fmt_value(out: &mut String, v: Value) {
    match v {
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Str(s) => {
            let _ = write!(out, "str#{}", s.0);
        }
        Value::Id(id) => {
            let _ = write!(out, "#{id}");
        }
    }
}

impl fmt::Display for Plan {
    /// Stable text form: strata, versions with their steps, then indices.
    /// In column lists `x!` binds `x`, a bare name checks it.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (si, s) in self.strata.iter().enumerate() {
            let rels: Vec<&str> = s.relations.iter().map(|&r| self.rel_name(r)).collect();
            let _ = writeln!(
                out,
                "stratum {si} {{{}}}{}",
                rels.join(", "),
                if s.recursive { " recursive" } else { "" }
            );
            for v in &s.versions {
                let _ = writeln!(
                    out,
                    "  rule {} {}: {}",
                    v.rule,
                    match v.delta {
                        Some(k) => format!("delta@{k}"),
                        None => "once".to_string(),
                    },
                    self.rules[v.rule]
                );
                let names = &v.slot_names;
                for step in &v.steps {
                    out.push_str("    ");
                    match step {
                        Step::Scan {
                            rel,
                            window,
                            id,
                            cols,
                        } => {
                            let _ = write!(out, "scan {}[{}] ", self.rel_name(*rel), window.name());
                            self.fmt_cols(&mut out, *id, cols, names);
                        }
                        Step::Join {
                            index,
                            window,
                            key,
                            id,
                            cols,
                        } => {
                            let spec = &self.indices[*index];
                            let _ = write!(
                                out,
                                "join {}[{}] via idx{index} key(",
                                self.rel_name(spec.rel),
                                window.name()
                            );
                            for (i, k) in key.iter().enumerate() {
                                if i > 0 {
                                    out.push_str(", ");
                                }
                                self.fmt_operand(&mut out, *k, names);
                            }
                            out.push_str(") ");
                            self.fmt_cols(&mut out, *id, cols, names);
                        }
                        Step::Lookup {
                            rel,
                            window,
                            id,
                            cols,
                        } => {
                            let _ = write!(
                                out,
                                "lookup {}[{}] {} ",
                                self.rel_name(*rel),
                                window.name(),
                                names[*id]
                            );
                            self.fmt_cols(&mut out, ColOp::Skip, cols, names);
                        }
                        Step::Probe {
                            rel,
                            window,
                            id,
                            cols,
                        } => {
                            let _ = write!(out, "probe {}[{}] ", self.rel_name(*rel), window.name());
                            let ops: Vec<ColOp> = cols
                                .iter()
                                .map(|o| match o {
                                    Operand::Slot(s) => ColOp::Check(*s),
                                    Operand::Const(v) => ColOp::Const(*v),
                                })
                                .collect();
                            self.fmt_cols(&mut out, *id, &ops, names);
                        }
                        Step::AntiJoin { index, key } => {
                            let spec = &self.indices[*index];
                            let _ = write!(out, "antijoin {} via idx{index} key(", self.rel_name(spec.rel));
                            for (i, k) in key.iter().enumerate() {
                                if i > 0 {
                                    out.push_str(", ");
                                }
                                self.fmt_operand(&mut out, *k, names);
                            }
                            out.push(')');
                        }
                        Step::AntiProbe { rel, cols } => {
                            let _ = write!(out, "antiprobe {}(", self.rel_name(*rel));
                            for (i, k) in cols.iter().enumerate() {
                                if i > 0 {
                                    out.push_str(", ");
                                }
                                self.fmt_operand(&mut out, *k, names);
                            }
                            out.push(')');
                        }
                        Step::Filter { lhs, op, rhs } => {
                            out.push_str("filter ");
                            self.fmt_operand(&mut out, *lhs, names);
                            let _ = write!(out, " {op} ");
                            self.fmt_operand(&mut out, *rhs, names);
                        }
                    }
                    out.push('\n');
                }
                let _ = write!(out, "    head {}(", self.rel_name(v.head_rel));
                for (i, o) in v.head.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    self.fmt_operand(&mut out, *o, names);
                }
                out.push_str(")\n");
            }
        }
        out.push_str("indices\n");
        for (i, spec) in self.indices.iter().enumerate() {
            let cols: Vec<String> = spec.cols.iter().map(ToString::to_string).collect();
            let _ = writeln!(
                out,
                "  idx{i} {}({}){}",
                self.rel_name(spec.rel),
                cols.join(", "),
                if spec.split { " split" } else { "" }
            );
        }
        out.push_str("canonical\n");
        for name in &self.rel_names {
            let _ = writeln!(out, "  {name}(*) -> id");
        }
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flatten::flatten_program;
    use crate::syntax::{desugar, parse_program, validate};
    use crate::term::Symbols;

    fn plan(src: &str) -> (Plan, TermStore) {
        let core = flatten_program(&desugar(validate(parse_program(src).unwrap()).unwrap()));
        let mut store = TermStore::new(Symbols::default(), 4);
        let p = compile(&core, &mut store).unwrap();
        (p, store)
    }

    /// Every slot read by a step or the head was bound by an earlier step.
    fn assert_well_scoped(p: &Plan) {
        for s in &p.strata {
            for v in &s.versions {
                let mut bound = vec![false; v.slot_names.len()];
                let need = |o: &Operand, bound: &[bool]| {
                    if let Operand::Slot(s) = o {
                        assert!(bound[*s], "slot {} read before bound", v.slot_names[*s]);
                    }
                };
                let apply = |c: &ColOp, bound: &mut Vec<bool>| match c {
                    ColOp::Bind(s) => {
                        assert!(!bound[*s]);
                        bound[*s] = true;
                    }
                    ColOp::Check(s) => assert!(bound[*s]),
                    _ => {}
                };
                for (i, step) in v.steps.iter().enumerate() {
                    match step {
                        Step::Scan { id, cols, .. } => {
                            assert_eq!(i, 0, "scan after other steps");
                            apply(id, &mut bound);
                            cols.iter().for_each(|c| apply(c, &mut bound));
                        }
                        Step::Join { key, id, cols, .. } => {
                            key.iter().for_each(|k| need(k, &bound));
                            apply(id, &mut bound);
                            cols.iter().for_each(|c| apply(c, &mut bound));
                        }
                        Step::Lookup { id, cols, .. } => {
                            assert!(bound[*id]);
                            cols.iter().for_each(|c| apply(c, &mut bound));
                        }
                        Step::Probe { id, cols, .. } => {
                            cols.iter().for_each(|k| need(k, &bound));
                            apply(id, &mut bound);
                        }
                        Step::AntiJoin { key, .. } => key.iter().for_each(|k| need(k, &bound)),
                        Step::AntiProbe { cols, .. } => cols.iter().for_each(|k| need(k, &bound)),
                        Step::Filter { lhs, rhs, .. } => {
                            need(lhs, &bound);
                            need(rhs, &bound);
                        }
                    }
                }
                v.head.iter().for_each(|o| need(o, &bound));
            }
        }
    }

    #[test]
    fn tc_versions_and_index() {
        let (p, store) = plan("tc(a,b) :- edge(a,b). tc(a,c) :- tc(a,b), edge(b,c).");
        assert_well_scoped(&p);
        assert_eq!(p.strata.len(), 2);
        let tc = &p.strata[1];
        assert_eq!(tc.versions.len(), 2);
        assert!(tc.versions[0].once);
        assert_eq!(tc.versions[1].delta, Some(0));
        let edge = store.symbols().rels.lookup("edge").unwrap();
        assert_eq!(
            p.indices,
            vec![IndexSpec {
                rel: edge,
                cols: vec![0],
                split: true
            }]
        );
        let tcr = store.symbols().rels.lookup("tc").unwrap();
        assert!(p.indices_of[tcr.index()].is_empty());
    }

    #[test]
    fn doubly_recursive_rule_gets_two_versions() {
        let (p, _) = plan("tc(a,b) :- e(a,b). tc(a,c) :- tc(a,b), tc(b,c).");
        assert_well_scoped(&p);
        let vs: Vec<&RuleVersion> = p.strata.last().unwrap().versions.iter().filter(|v| !v.once).collect();
        assert_eq!(vs.len(), 2);
        let windows = |v: &RuleVersion| -> Vec<Window> {
            v.steps
                .iter()
                .filter_map(|s| match s {
                    Step::Scan { window, .. } | Step::Join { window, .. } => Some(*window),
                    _ => None,
                })
                .collect()
        };
        assert_eq!(windows(vs[0]), vec![Window::Delta, Window::Full]);
        assert_eq!(windows(vs[1]), vec![Window::Delta, Window::All]);
    }

    #[test]
    fn lookup_prefix_index() {
        let (p, store) = plan(
            "lookup(rho, x, v) :- rho = bind(_, x, v).
             lookup(rho, x, v) :- rho = bind(rho2, y, _), x != y, lookup(rho2, x, v).
             down(call, v) :- call = eval(ref(x), rho), _ = lookup(rho, x, v).",
        );
        assert_well_scoped(&p);
        let lookup = store.symbols().rels.lookup("lookup").unwrap();
        assert!(p.indices.iter().any(|s| s.rel == lookup && s.cols == vec![0, 1]));
        let bind = store.symbols().rels.lookup("bind").unwrap();
        assert!(p.indices.iter().any(|s| s.rel == bind && s.cols == vec![0]));
    }

    #[test]
    fn id_binder_becomes_lookup() {
        let (p, _) = plan("T(g2) :- _ = T(g), g2 = G(g). T(g) :- g = G(x), x = A().");
        assert_well_scoped(&p);
        let text = p.to_string();
        assert!(text.contains("lookup A[all] x"), "{text}");
        assert!(text.contains("probe G[all] g2! = (g)"), "{text}");
        assert!(text.contains("scan T[delta] (g!)"), "{text}");
    }

    #[test]
    fn negation_plans() {
        let (p, _) = plan("r(x) :- e(x, _). p(x) :- e(x, y), !r(x), !f(y, _), x != 3.");
        assert_well_scoped(&p);
        let text = p.to_string();
        assert!(text.contains("antiprobe r(x)"), "{text}");
        assert!(text.contains("antijoin f via"), "{text}");
        assert!(text.contains("filter x != 3"), "{text}");
        assert!(p.indices.iter().any(|s| !s.split));
    }

    #[test]
    fn unit_rule_has_no_steps() {
        let (p, _) = plan("p() :- !q(). q() :- e().");
        let v = &p.strata.iter().find(|s| !s.versions.is_empty() && s.versions[0].steps.iter().any(|st| matches!(st, Step::AntiProbe { .. }))).unwrap().versions[0];
        assert!(v.once);
        assert_eq!(v.steps.len(), 1);
    }

    #[test]
    fn sabotage_keeps_only_once_versions() {
        let (mut p, _) = plan("tc(a,b) :- edge(a,b). tc(a,c) :- tc(a,b), edge(b,c).");
        p.sabotage();
        assert_eq!(p.version_count(), 1);
    }
}
