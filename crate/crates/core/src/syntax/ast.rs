//! Surface syntax tree and its printer.
//!
//! The printer emits the same concrete syntax the parser reads, so printing a
//! parsed program and parsing it again yields an equal tree (positions aside).

use std::fmt;

use crate::term::write_quoted;

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Int(i64),
    Str(String),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Str(s) => {
                let mut out = String::new();
                write_quoted(&mut out, s);
                f.write_str(&out)
            }
        }
    }
}

/// Argument of a clause: a nested clause, a variable, `_`, or a literal.
#[derive(Clone, Debug)]
pub enum Subclause {
    Clause(Clause),
    Var(String, Pos),
    Wildcard(Pos),
    Lit(Literal, Pos),
}

impl Subclause {
    pub fn pos(&self) -> Pos {
        match self {
            Subclause::Clause(c) => c.pos,
            Subclause::Var(_, p) | Subclause::Wildcard(p) | Subclause::Lit(_, p) => *p,
        }
    }

    /// Visits every variable occurrence, including inside nested clauses.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str, Pos)) {
        match self {
            Subclause::Clause(c) => c.for_each_var(f),
            Subclause::Var(v, p) => f(v, *p),
            _ => {}
        }
    }
}

impl PartialEq for Subclause {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Subclause::Clause(a), Subclause::Clause(b)) => a == b,
            (Subclause::Var(a, _), Subclause::Var(b, _)) => a == b,
            (Subclause::Wildcard(_), Subclause::Wildcard(_)) => true,
            (Subclause::Lit(a, _), Subclause::Lit(b, _)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Subclause {}

/// `Rel(args)`.
#[derive(Clone, Debug)]
pub struct Clause {
    pub rel: String,
    pub args: Vec<Subclause>,
    pub pos: Pos,
}

impl Clause {
    pub fn new(rel: impl Into<String>, args: Vec<Subclause>) -> Self {
        Clause {
            rel: rel.into(),
            args,
            pos: Pos::default(),
        }
    }

    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a str, Pos)) {
        for a in &self.args {
            a.for_each_var(f);
        }
    }

    /// True when no argument is a nested clause.
    pub fn is_flat(&self) -> bool {
        self.args.iter().all(|a| !matches!(a, Subclause::Clause(_)))
    }

    /// True when the clause contains no variables or wildcards.
    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|a| match a {
            Subclause::Clause(c) => c.is_ground(),
            Subclause::Lit(..) => true,
            _ => false,
        })
    }
}

impl PartialEq for Clause {
    fn eq(&self, other: &Self) -> bool {
        self.rel == other.rel && self.args == other.args
    }
}

impl Eq for Clause {}

/// Binder on a body clause: `x = R(..)` or `_ = R(..)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Binder {
    Var(String),
    Wildcard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BodyItem {
    Positive {
        binder: Option<Binder>,
        clause: Clause,
    },
    Negated(Clause),
    Compare {
        lhs: Subclause,
        op: CmpOp,
        rhs: Subclause,
    },
}

/// Head clause; a binder here is only legal if it is used nowhere else.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadClause {
    pub binder: Option<String>,
    pub clause: Clause,
}

#[derive(Clone, Debug)]
pub struct SurfaceRule {
    pub heads: Vec<HeadClause>,
    pub body: Vec<BodyItem>,
    pub pos: Pos,
}

impl PartialEq for SurfaceRule {
    fn eq(&self, other: &Self) -> bool {
        self.heads == other.heads && self.body == other.body
    }
}

impl Eq for SurfaceRule {}

impl SurfaceRule {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct Decl {
    pub name: String,
    pub arity: usize,
    pub pos: Pos,
}

impl PartialEq for Decl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.arity == other.arity
    }
}

impl Eq for Decl {}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub decls: Vec<Decl>,
    pub rules: Vec<SurfaceRule>,
}

impl Program {
    /// Ground body-less rules: the program's inline input facts.
    pub fn facts(&self) -> impl Iterator<Item = &Clause> {
        self.rules
            .iter()
            .filter(|r| r.is_fact())
            .flat_map(|r| r.heads.iter().map(|h| &h.clause))
    }

    /// Rules with a nonempty body.
    pub fn proper_rules(&self) -> impl Iterator<Item = &SurfaceRule> {
        self.rules.iter().filter(|r| !r.is_fact())
    }
}

impl fmt::Display for Subclause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subclause::Clause(c) => write!(f, "{c}"),
            Subclause::Var(v, _) => f.write_str(v),
            Subclause::Wildcard(_) => f.write_str("_"),
            Subclause::Lit(l, _) => write!(f, "{l}"),
        }
    }
}

impl fmt::Display for Clause {
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

impl fmt::Display for BodyItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyItem::Positive { binder, clause } => match binder {
                Some(Binder::Var(v)) => write!(f, "{v} = {clause}"),
                Some(Binder::Wildcard) => write!(f, "_ = {clause}"),
                None => write!(f, "{clause}"),
            },
            BodyItem::Negated(c) => write!(f, "!{c}"),
            BodyItem::Compare { lhs, op, rhs } => write!(f, "{lhs} {op} {rhs}"),
        }
    }
}

impl fmt::Display for HeadClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.binder {
            Some(b) => write!(f, "{b} = {}", self.clause),
            None => write!(f, "{}", self.clause),
        }
    }
}

impl fmt::Display for SurfaceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, h) in self.heads.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{h}")?;
        }
        if !self.body.is_empty() {
            f.write_str(" :- ")?;
            for (i, b) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{b}")?;
            }
        }
        f.write_str(".")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.decls {
            writeln!(f, ".decl {}/{}", d.name, d.arity)?;
        }
        for r in &self.rules {
            writeln!(f, "{r}")?;
        }
        Ok(())
    }
}
