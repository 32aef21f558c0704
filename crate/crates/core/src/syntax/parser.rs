//! Lexer and recursive-descent parser for `.slg` source text.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("{pos}: syntax error: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("{pos}: relation `{name}` redeclared with arity {found} (previously {expected})")]
    ConflictingDecl {
        name: String,
        expected: usize,
        found: usize,
        pos: Pos,
    },
}

impl ParseError {
    pub fn pos(&self) -> Pos {
        match self {
            ParseError::Syntax { pos, .. } | ParseError::ConflictingDecl { pos, .. } => *pos,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Wild,
    Int(i64),
    Str(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Turnstile,
    Eq,
    Ne,
    Bang,
    Slash,
    Decl,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Wild => "`_`".into(),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Str(_) => "string literal".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Turnstile => "`:-`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Decl => "`.decl`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: u32,
    col: u32,
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$' || c == '\''
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.char_indices().peekable(),
            src,
            line: 1,
            col: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next().map(|(_, c)| c)
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            col: self.col,
        }
    }

    fn err(&self, pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            pos,
            message: message.into(),
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek2() == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn tokenize(mut self) -> Result<Vec<(Tok, Pos)>, ParseError> {
        let mut toks = Vec::new();
        loop {
            self.skip_trivia();
            let pos = self.pos();
            let Some(c) = self.peek() else {
                toks.push((Tok::Eof, pos));
                return Ok(toks);
            };
            let tok = match c {
                '(' => {
                    self.bump();
                    Tok::LParen
                }
                ')' => {
                    self.bump();
                    Tok::RParen
                }
                ',' => {
                    self.bump();
                    Tok::Comma
                }
                '/' => {
                    self.bump();
                    Tok::Slash
                }
                '=' => {
                    self.bump();
                    Tok::Eq
                }
                '!' => {
                    self.bump();
                    if self.peek() == Some('=') {
                        self.bump();
                        Tok::Ne
                    } else {
                        Tok::Bang
                    }
                }
                ':' => {
                    self.bump();
                    if self.peek() == Some('-') {
                        self.bump();
                        Tok::Turnstile
                    } else {
                        return Err(self.err(pos, "expected `:-`"));
                    }
                }
                '.' => {
                    self.bump();
                    let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
                    let rest = &self.src[start..];
                    if rest.starts_with("decl")
                        && !rest[4..].chars().next().is_some_and(is_ident_continue)
                    {
                        for _ in 0..4 {
                            self.bump();
                        }
                        Tok::Decl
                    } else {
                        Tok::Dot
                    }
                }
                '"' => self.string(pos)?,
                c if c.is_ascii_digit() || (c == '-' && self.peek2().is_some_and(|d| d.is_ascii_digit())) => {
                    self.number(pos)?
                }
                c if is_ident_start(c) => {
                    let mut s = String::new();
                    while let Some(c) = self.peek() {
                        if !is_ident_continue(c) {
                            break;
                        }
                        s.push(c);
                        self.bump();
                    }
                    if s == "_" {
                        Tok::Wild
                    } else {
                        Tok::Ident(s)
                    }
                }
                other => return Err(self.err(pos, format!("unexpected character `{other}`"))),
            };
            toks.push((tok, pos));
        }
    }

    fn number(&mut self, pos: Pos) -> Result<Tok, ParseError> {
        let mut s = String::new();
        if self.peek() == Some('-') {
            s.push('-');
            self.bump();
        }
        while let Some(c) = self.peek() {
            if !c.is_ascii_digit() {
                break;
            }
            s.push(c);
            self.bump();
        }
        s.parse::<i64>()
            .map(Tok::Int)
            .map_err(|_| self.err(pos, format!("integer literal `{s}` out of range")))
    }

    fn string(&mut self, pos: Pos) -> Result<Tok, ParseError> {
        self.bump();
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.err(pos, "unterminated string literal")),
                Some('"') => return Ok(Tok::Str(s)),
                Some('\\') => match self.bump() {
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some(c) => return Err(self.err(self.pos(), format!("unknown escape `\\{c}`"))),
                    None => return Err(self.err(pos, "unterminated string literal")),
                },
                Some(c) => s.push(c),
            }
        }
    }
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn next(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, ctx: &str) -> Result<Pos, ParseError> {
        let (tok, pos) = self.next();
        if tok == want {
            Ok(pos)
        } else {
            Err(ParseError::Syntax {
                pos,
                message: format!("expected {} {ctx}, found {}", want.describe(), tok.describe()),
            })
        }
    }

    fn unexpected<T>(&self, what: &str) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            message: format!("expected {what}, found {}", self.peek().describe()),
        })
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut prog = Program::default();
        let mut arities: HashMap<String, usize> = HashMap::new();
        while *self.peek() != Tok::Eof {
            if *self.peek() == Tok::Decl {
                let decl = self.decl()?;
                if let Some(&prev) = arities.get(&decl.name) {
                    if prev != decl.arity {
                        return Err(ParseError::ConflictingDecl {
                            name: decl.name,
                            expected: prev,
                            found: decl.arity,
                            pos: decl.pos,
                        });
                    }
                }
                arities.insert(decl.name.clone(), decl.arity);
                prog.decls.push(decl);
            } else {
                prog.rules.push(self.rule()?);
            }
        }
        Ok(prog)
    }

    fn decl(&mut self) -> Result<Decl, ParseError> {
        let pos = self.expect(Tok::Decl, "")?;
        let name = match self.next() {
            (Tok::Ident(s), _) => s,
            (t, p) => {
                return Err(ParseError::Syntax {
                    pos: p,
                    message: format!("expected relation name after `.decl`, found {}", t.describe()),
                })
            }
        };
        let arity = match self.peek() {
            Tok::Slash => {
                self.next();
                match self.next() {
                    (Tok::Int(n), _) if n >= 0 => n as usize,
                    (t, p) => {
                        return Err(ParseError::Syntax {
                            pos: p,
                            message: format!("expected arity, found {}", t.describe()),
                        })
                    }
                }
            }
            Tok::LParen => {
                self.next();
                let mut n = 0;
                if *self.peek() != Tok::RParen {
                    loop {
                        match self.next() {
                            (Tok::Ident(_), _) | (Tok::Wild, _) => n += 1,
                            (t, p) => {
                                return Err(ParseError::Syntax {
                                    pos: p,
                                    message: format!("expected column name, found {}", t.describe()),
                                })
                            }
                        }
                        if *self.peek() == Tok::Comma {
                            self.next();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen, "to close declaration")?;
                n
            }
            _ => return self.unexpected("`/arity` or `(columns)`"),
        };
        if *self.peek() == Tok::Dot {
            self.next();
        }
        Ok(Decl { name, arity, pos })
    }

    fn rule(&mut self) -> Result<SurfaceRule, ParseError> {
        let pos = self.pos();
        let mut heads = vec![self.head()?];
        while *self.peek() == Tok::Comma {
            self.next();
            heads.push(self.head()?);
        }
        let mut body = Vec::new();
        if *self.peek() == Tok::Turnstile {
            self.next();
            body.push(self.body_item()?);
            while *self.peek() == Tok::Comma {
                self.next();
                body.push(self.body_item()?);
            }
        }
        self.expect(Tok::Dot, "at end of rule")?;
        Ok(SurfaceRule { heads, body, pos })
    }

    fn head(&mut self) -> Result<HeadClause, ParseError> {
        if let (Tok::Ident(name), Tok::Eq) = (self.peek().clone(), self.peek_at(1)) {
            self.next();
            self.next();
            let clause = self.clause()?;
            return Ok(HeadClause {
                binder: Some(name),
                clause,
            });
        }
        Ok(HeadClause {
            binder: None,
            clause: self.clause()?,
        })
    }

    fn body_item(&mut self) -> Result<BodyItem, ParseError> {
        match (self.peek().clone(), self.peek_at(1).clone(), self.peek_at(2).clone()) {
            (Tok::Bang, _, _) => {
                self.next();
                Ok(BodyItem::Negated(self.clause()?))
            }
            (Tok::Ident(_), Tok::LParen, _) => Ok(BodyItem::Positive {
                binder: None,
                clause: self.clause()?,
            }),
            (Tok::Ident(name), Tok::Eq, Tok::Ident(_)) if *self.peek_at(3) == Tok::LParen => {
                self.next();
                self.next();
                Ok(BodyItem::Positive {
                    binder: Some(Binder::Var(name)),
                    clause: self.clause()?,
                })
            }
            (Tok::Wild, Tok::Eq, Tok::Ident(_)) if *self.peek_at(3) == Tok::LParen => {
                self.next();
                self.next();
                Ok(BodyItem::Positive {
                    binder: Some(Binder::Wildcard),
                    clause: self.clause()?,
                })
            }
            _ => {
                let lhs = self.subclause()?;
                let op = match self.next() {
                    (Tok::Eq, _) => CmpOp::Eq,
                    (Tok::Ne, _) => CmpOp::Ne,
                    (t, p) => {
                        return Err(ParseError::Syntax {
                            pos: p,
                            message: format!("expected `=` or `!=` in comparison, found {}", t.describe()),
                        })
                    }
                };
                let rhs = self.subclause()?;
                Ok(BodyItem::Compare { lhs, op, rhs })
            }
        }
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let (tok, pos) = self.next();
        let Tok::Ident(rel) = tok else {
            return Err(ParseError::Syntax {
                pos,
                message: format!("expected clause, found {}", tok.describe()),
            });
        };
        self.expect(Tok::LParen, &format!("after relation name `{rel}`"))?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.subclause()?);
                match self.peek() {
                    Tok::Comma => {
                        self.next();
                    }
                    Tok::RParen => break,
                    _ => {
                        return Err(ParseError::Syntax {
                            pos: self.pos(),
                            message: format!(
                                "unclosed clause `{rel}(` opened at {pos}: expected `,` or `)`, found {}",
                                self.peek().describe()
                            ),
                        })
                    }
                }
            }
        }
        self.next();
        Ok(Clause { rel, args, pos })
    }

    fn subclause(&mut self) -> Result<Subclause, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(_) if *self.peek_at(1) == Tok::LParen => Ok(Subclause::Clause(self.clause()?)),
            Tok::Ident(v) => {
                self.next();
                Ok(Subclause::Var(v, pos))
            }
            Tok::Wild => {
                self.next();
                Ok(Subclause::Wildcard(pos))
            }
            Tok::Int(i) => {
                self.next();
                Ok(Subclause::Lit(Literal::Int(i), pos))
            }
            Tok::Str(s) => {
                self.next();
                Ok(Subclause::Lit(Literal::Str(s), pos))
            }
            _ => self.unexpected("a clause, variable, `_`, or literal"),
        }
    }
}

/// Parses a whole `.slg` program.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let toks = Lexer::new(text).tokenize()?;
    Parser { toks, at: 0 }.program()
}

/// Parses a single ground term such as `tc(1, 3)` or `G(G(A()))`, with an
/// optional trailing `.`.
pub fn parse_fact(text: &str) -> Result<Clause, ParseError> {
    let toks = Lexer::new(text).tokenize()?;
    let mut p = Parser { toks, at: 0 };
    let c = p.clause()?;
    if *p.peek() == Tok::Dot {
        p.next();
    }
    if *p.peek() != Tok::Eof {
        return p.unexpected("end of input");
    }
    if !c.is_ground() {
        return Err(ParseError::Syntax {
            pos: c.pos,
            message: format!("`{c}` is not ground"),
        });
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_head_and_body() {
        let p = parse_program("T(G(x)) :- G(G(x)).").unwrap();
        assert_eq!(p.rules.len(), 1);
        let r = &p.rules[0];
        let Subclause::Clause(inner) = &r.heads[0].clause.args[0] else {
            panic!("expected nested head subclause")
        };
        assert_eq!(inner.rel, "G");
        let BodyItem::Positive { binder: None, clause } = &r.body[0] else {
            panic!()
        };
        assert!(matches!(&clause.args[0], Subclause::Clause(c) if c.rel == "G"));
    }

    #[test]
    fn flat_body() {
        let p = parse_program("tc(a,c) :- tc(a,b), edge(b,c).").unwrap();
        assert_eq!(p.rules[0].body.len(), 2);
        assert!(p.rules[0]
            .body
            .iter()
            .all(|b| matches!(b, BodyItem::Positive { clause, .. } if clause.is_flat())));
    }

    #[test]
    fn unclosed_clause_reports_position() {
        let err = parse_program("p(x) :- q(x,y.").unwrap_err();
        let ParseError::Syntax { pos, message } = err else {
            panic!()
        };
        assert_eq!(pos.line, 1);
        assert_eq!(pos.col, 14);
        assert!(message.contains("unclosed clause `q(`"), "{message}");
    }

    #[test]
    fn binders_negation_comparisons_and_comments() {
        let src = r#"
            // comment
            .decl edge/2
            .decl tc(a, b)
            lookup(r, x, v) :- r = bind(r2, y, _), x != y, lookup(r2, x, v).
            p(x) :- _ = q(x, "s\"t"), !r(x), x = 3, x != -4.
            g(1). h("a"), k(G(A())).
        "#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.decls.len(), 2);
        assert_eq!(p.decls[1].arity, 2);
        assert_eq!(p.rules.len(), 4);
        assert_eq!(p.facts().count(), 3);
        let again = parse_program(&p.to_string()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn conflicting_decl() {
        let err = parse_program(".decl e/2\n.decl e/3").unwrap_err();
        assert!(matches!(err, ParseError::ConflictingDecl { expected: 2, found: 3, .. }));
        assert!(parse_program(".decl e/2\n.decl e(a,b)").is_ok());
    }

    #[test]
    fn parse_single_fact() {
        let c = parse_fact("tc(1, 3)").unwrap();
        assert_eq!(c.to_string(), "tc(1, 3)");
        assert!(parse_fact("tc(x, 3)").is_err());
        assert!(parse_fact("G(G(A())).").is_ok());
    }
}
