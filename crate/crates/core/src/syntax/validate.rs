//! Scoping and safety checks, and conjunctive-head desugaring.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidateError {
    #[error("{pos}: head variable `{var}` does not occur in any positive body clause")]
    UnsafeHeadVariable { var: String, pos: Pos },
    #[error("{pos}: variable `{var}` in a negated clause does not occur in any positive body clause")]
    UnsafeNegatedVariable { var: String, pos: Pos },
    #[error("{pos}: variable `{var}` in a comparison does not occur in any positive body clause")]
    UnsafeComparisonVariable { var: String, pos: Pos },
    #[error("{pos}: ill-formed id unification on `{var}`: {reason}")]
    IllFormedIdUnification {
        var: String,
        pos: Pos,
        reason: &'static str,
    },
    #[error("{pos}: negated clause `{clause}` must be flat")]
    NestedNegation { clause: String, pos: Pos },
    #[error("{pos}: comparison operands must be variables or literals")]
    NestedComparison { pos: Pos },
    #[error("{pos}: `_` may not appear in a rule head")]
    WildcardInHead { pos: Pos },
    #[error("{pos}: variable `{var}` uses the reserved `$` prefix")]
    ReservedVariable { var: String, pos: Pos },
    #[error("{pos}: relation `{rel}` used with arity {found}, previously {expected}")]
    ArityMismatch {
        rel: String,
        expected: usize,
        found: usize,
        pos: Pos,
    },
}

/// A program that passed [`validate`], together with every relation it
/// mentions in first-appearance order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckedProgram {
    pub program: Program,
    pub relations: Vec<(String, usize)>,
}

/// Collects relation arities in first-appearance order, declarations first.
pub fn relation_arities(program: &Program) -> Result<Vec<(String, usize)>, ValidateError> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut order = Vec::new();
    let mut note = |rel: &str, arity: usize, pos: Pos| -> Result<(), ValidateError> {
        match seen.get(rel) {
            Some(&expected) if expected != arity => Err(ValidateError::ArityMismatch {
                rel: rel.to_string(),
                expected,
                found: arity,
                pos,
            }),
            Some(_) => Ok(()),
            None => {
                seen.insert(rel.to_string(), arity);
                order.push((rel.to_string(), arity));
                Ok(())
            }
        }
    };
    for d in &program.decls {
        note(&d.name, d.arity, d.pos)?;
    }
    for r in &program.rules {
        for h in &r.heads {
            visit_clauses(&h.clause, &mut note)?;
        }
        for b in &r.body {
            match b {
                BodyItem::Positive { clause, .. } | BodyItem::Negated(clause) => {
                    visit_clauses(clause, &mut note)?
                }
                BodyItem::Compare { lhs, rhs, .. } => {
                    for s in [lhs, rhs] {
                        if let Subclause::Clause(c) = s {
                            visit_clauses(c, &mut note)?;
                        }
                    }
                }
            }
        }
    }
    Ok(order)
}

fn visit_clauses<E>(
    c: &Clause,
    f: &mut impl FnMut(&str, usize, Pos) -> Result<(), E>,
) -> Result<(), E> {
    f(&c.rel, c.args.len(), c.pos)?;
    for a in &c.args {
        if let Subclause::Clause(inner) = a {
            visit_clauses(inner, f)?;
        }
    }
    Ok(())
}

fn has_wildcard(c: &Clause) -> Option<Pos> {
    c.args.iter().find_map(|a| match a {
        Subclause::Wildcard(p) => Some(*p),
        Subclause::Clause(inner) => has_wildcard(inner),
        _ => None,
    })
}

fn check_rule(rule: &SurfaceRule) -> Result<(), ValidateError> {
    let mut reserved = Ok(());
    let mut check_reserved = |v: &str, pos: Pos| {
        if v.starts_with('$') && reserved.is_ok() {
            reserved = Err(ValidateError::ReservedVariable {
                var: v.to_string(),
                pos,
            });
        }
    };
    for h in &rule.heads {
        if let Some(b) = &h.binder {
            check_reserved(b, h.clause.pos);
        }
        h.clause.for_each_var(&mut check_reserved);
    }
    for b in &rule.body {
        match b {
            BodyItem::Positive { binder, clause } => {
                if let Some(Binder::Var(v)) = binder {
                    check_reserved(v, clause.pos);
                }
                clause.for_each_var(&mut check_reserved);
            }
            BodyItem::Negated(c) => c.for_each_var(&mut check_reserved),
            BodyItem::Compare { lhs, rhs, .. } => {
                lhs.for_each_var(&mut check_reserved);
                rhs.for_each_var(&mut check_reserved);
            }
        }
    }
    reserved?;

    for h in &rule.heads {
        if let Some(pos) = has_wildcard(&h.clause) {
            return Err(ValidateError::WildcardInHead { pos });
        }
    }

    let mut bound: BTreeSet<&str> = BTreeSet::new();
    for b in &rule.body {
        if let BodyItem::Positive { binder, clause } = b {
            if let Some(Binder::Var(v)) = binder {
                bound.insert(v);
            }
            clause.for_each_var(&mut |v, _| {
                bound.insert(v);
            });
        }
    }

    // Head binders name a fresh id; it may not flow anywhere else.
    for (i, h) in rule.heads.iter().enumerate() {
        let Some(id) = &h.binder else { continue };
        let mut clash = None;
        if bound.contains(id.as_str()) {
            clash = Some("head id is also bound in the body");
        }
        for b in &rule.body {
            let mut hit = false;
            match b {
                BodyItem::Negated(c) => c.for_each_var(&mut |v, _| hit |= v == id),
                BodyItem::Compare { lhs, rhs, .. } => {
                    lhs.for_each_var(&mut |v, _| hit |= v == id);
                    rhs.for_each_var(&mut |v, _| hit |= v == id);
                }
                BodyItem::Positive { .. } => {}
            }
            if hit {
                clash = Some("head id is also used in the body");
            }
        }
        let mut own = false;
        h.clause.for_each_var(&mut |v, _| own |= v == id);
        if own {
            clash = Some("head id is used as a column of its own clause");
        }
        for (j, other) in rule.heads.iter().enumerate() {
            if i == j {
                continue;
            }
            let mut hit = other.binder.as_deref() == Some(id.as_str());
            other.clause.for_each_var(&mut |v, _| hit |= v == id);
            if hit {
                clash = Some("head id is shared with another head clause");
            }
        }
        if let Some(reason) = clash {
            return Err(ValidateError::IllFormedIdUnification {
                var: id.clone(),
                pos: h.clause.pos,
                reason,
            });
        }
    }

    // A body clause cannot contain its own id.
    for b in &rule.body {
        if let BodyItem::Positive {
            binder: Some(Binder::Var(id)),
            clause,
        } = b
        {
            let mut own = false;
            clause.for_each_var(&mut |v, _| own |= v == id);
            if own {
                return Err(ValidateError::IllFormedIdUnification {
                    var: id.clone(),
                    pos: clause.pos,
                    reason: "body id is used as a column of its own clause",
                });
            }
        }
    }

    let mut unsafe_var = None;
    for h in &rule.heads {
        h.clause.for_each_var(&mut |v, pos| {
            if unsafe_var.is_none() && !bound.contains(v) {
                unsafe_var = Some((v.to_string(), pos));
            }
        });
    }
    if let Some((var, pos)) = unsafe_var {
        return Err(ValidateError::UnsafeHeadVariable { var, pos });
    }

    for b in &rule.body {
        match b {
            BodyItem::Negated(c) => {
                if !c.is_flat() {
                    return Err(ValidateError::NestedNegation {
                        clause: c.to_string(),
                        pos: c.pos,
                    });
                }
                let mut bad = None;
                c.for_each_var(&mut |v, pos| {
                    if bad.is_none() && !bound.contains(v) {
                        bad = Some((v.to_string(), pos));
                    }
                });
                if let Some((var, pos)) = bad {
                    return Err(ValidateError::UnsafeNegatedVariable { var, pos });
                }
            }
            BodyItem::Compare { lhs, rhs, .. } => {
                for s in [lhs, rhs] {
                    match s {
                        Subclause::Clause(_) | Subclause::Wildcard(_) => {
                            return Err(ValidateError::NestedComparison { pos: s.pos() })
                        }
                        Subclause::Var(v, pos) if !bound.contains(v.as_str()) => {
                            return Err(ValidateError::UnsafeComparisonVariable {
                                var: v.clone(),
                                pos: *pos,
                            })
                        }
                        _ => {}
                    }
                }
            }
            BodyItem::Positive { .. } => {}
        }
    }
    Ok(())
}

/// Checks safety, scoping and arity consistency.
pub fn validate(program: Program) -> Result<CheckedProgram, ValidateError> {
    let relations = relation_arities(&program)?;
    for r in &program.rules {
        check_rule(r)?;
    }
    Ok(CheckedProgram { program, relations })
}

/// Splits every conjunctive-head rule into one rule per head, dropping head
/// binders (validation guarantees they are unused).
pub fn desugar(checked: CheckedProgram) -> CheckedProgram {
    let CheckedProgram { program, relations } = checked;
    let mut rules = Vec::with_capacity(program.rules.len());
    for r in program.rules {
        for h in r.heads {
            rules.push(SurfaceRule {
                heads: vec![HeadClause {
                    binder: None,
                    clause: h.clause,
                }],
                body: r.body.clone(),
                pos: r.pos,
            });
        }
    }
    CheckedProgram {
        program: Program {
            decls: program.decls,
            rules,
        },
        relations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_program;

    fn check(src: &str) -> Result<CheckedProgram, ValidateError> {
        validate(parse_program(src).unwrap())
    }

    #[test]
    fn unsafe_head_variable() {
        assert!(matches!(
            check("p(x,y) :- q(x)."),
            Err(ValidateError::UnsafeHeadVariable { var, .. }) if var == "y"
        ));
    }

    #[test]
    fn accepts_tc() {
        let c = check("tc(a,c) :- tc(a,b), edge(b,c).").unwrap();
        assert_eq!(c.relations, vec![("tc".into(), 2), ("edge".into(), 2)]);
    }

    #[test]
    fn head_id_in_own_column_is_ill_formed() {
        assert!(matches!(
            check("c = H(a, b, c) :- B(a, b)."),
            Err(ValidateError::IllFormedIdUnification { .. })
        ));
        assert!(matches!(
            check("c = H(a, b) :- id = B(a, b, c)."),
            Err(ValidateError::IllFormedIdUnification { .. })
        ));
    }

    #[test]
    fn shared_head_id_is_ill_formed() {
        assert!(matches!(
            check("i = H(a), K(i) :- B(a)."),
            Err(ValidateError::IllFormedIdUnification { var, .. }) if var == "i"
        ));
    }

    #[test]
    fn unused_head_binder_is_fine() {
        assert!(check("i = H(a) :- B(a).").is_ok());
    }

    #[test]
    fn negation_and_comparison_safety() {
        assert!(matches!(
            check("p(x) :- q(x), !r(x, y)."),
            Err(ValidateError::UnsafeNegatedVariable { .. })
        ));
        assert!(check("p(x) :- q(x), !r(x, _).").is_ok());
        assert!(matches!(
            check("p(x) :- q(x), !r(G(x))."),
            Err(ValidateError::NestedNegation { .. })
        ));
        assert!(matches!(
            check("p(x) :- q(x), x != y."),
            Err(ValidateError::UnsafeComparisonVariable { .. })
        ));
        assert!(check("p(x) :- q(x, y), x != y, y = 3.").is_ok());
    }

    #[test]
    fn reserved_and_wildcard_and_arity() {
        assert!(matches!(
            check("p($x) :- q($x)."),
            Err(ValidateError::ReservedVariable { .. })
        ));
        assert!(matches!(
            check("p(_) :- q(x)."),
            Err(ValidateError::WildcardInHead { .. })
        ));
        assert!(matches!(
            check("p(x) :- q(x), q(x, x)."),
            Err(ValidateError::ArityMismatch { .. })
        ));
        assert!(matches!(
            check("p(x)."),
            Err(ValidateError::UnsafeHeadVariable { .. })
        ));
    }

    #[test]
    fn desugar_splits_heads() {
        let c = check("eval(ef, rho), eval(ea, rho) :- _ = eval(app(ef, ea), rho).").unwrap();
        let d = desugar(c);
        assert_eq!(d.program.rules.len(), 2);
        assert_eq!(d.program.rules[0].body, d.program.rules[1].body);
        let single = desugar(check("p(x) :- q(x).").unwrap());
        assert_eq!(single.program.rules.len(), 1);
    }
}
