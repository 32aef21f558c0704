use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::{Clause, Literal, Pos, Subclause};

fn int(i: i64) -> Subclause {
    Subclause::Lit(Literal::Int(i), Pos::default())
}

fn text(s: &str) -> Subclause {
    Subclause::Lit(Literal::Str(s.to_string()), Pos::default())
}

fn nested(rel: &str, args: Vec<Subclause>) -> Subclause {
    Subclause::Clause(Clause::new(rel, args))
}

/// Random digraph on nodes `0..n` as `edge(a, b)` facts, each ordered pair
/// of distinct nodes present with probability `p`.
pub fn gen_tc(n: usize, p: f64, seed: u64) -> Vec<Clause> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(p.clamp(0.0, 1.0)) {
                out.push(Clause::new("edge", vec![int(a as i64), int(b as i64)]));
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LambdaTerm {
    Var(String),
    Lam(String, Box<LambdaTerm>),
    App(Box<LambdaTerm>, Box<LambdaTerm>),
}

impl LambdaTerm {
    pub fn var(x: &str) -> Self {
        LambdaTerm::Var(x.to_string())
    }

    pub fn lam(x: &str, body: LambdaTerm) -> Self {
        LambdaTerm::Lam(x.to_string(), Box::new(body))
    }

    pub fn app(f: LambdaTerm, a: LambdaTerm) -> Self {
        LambdaTerm::App(Box::new(f), Box::new(a))
    }

    /// Number of syntax nodes.
    pub fn size(&self) -> usize {
        match self {
            LambdaTerm::Var(_) => 1,
            LambdaTerm::Lam(_, b) => 1 + b.size(),
            LambdaTerm::App(f, a) => 1 + f.size() + a.size(),
        }
    }

    /// Encoding read by the interpreter corpus: `ref(x)`, `lam(x, e)`,
    /// `app(f, a)`.
    pub fn to_interpreter(&self) -> Subclause {
        self.encode(["ref", "lam", "app"])
    }

    /// Encoding read by the m-CFA corpus: `Ref(x)`, `Lam(x, e)`, `App(f, a)`.
    pub fn to_mcfa(&self) -> Subclause {
        self.encode(["Ref", "Lam", "App"])
    }

    fn encode(&self, names: [&str; 3]) -> Subclause {
        match self {
            LambdaTerm::Var(x) => nested(names[0], vec![text(x)]),
            LambdaTerm::Lam(x, b) => nested(names[1], vec![text(x), b.encode(names)]),
            LambdaTerm::App(f, a) => nested(names[2], vec![f.encode(names), a.encode(names)]),
        }
    }
}

impl fmt::Display for LambdaTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaTerm::Var(x) => f.write_str(x),
            LambdaTerm::Lam(x, b) => write!(f, "(\\{x}. {b})"),
            LambdaTerm::App(g, a) => write!(f, "({g} {a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Ty {
    Base,
    Arrow(Box<Ty>, Box<Ty>),
}

impl Ty {
    fn arrow(a: Ty, b: Ty) -> Ty {
        Ty::Arrow(Box::new(a), Box::new(b))
    }

    fn base_to_base() -> Ty {
        Ty::arrow(Ty::Base, Ty::Base)
    }

    fn numeral() -> Ty {
        Ty::arrow(Ty::base_to_base(), Ty::base_to_base())
    }
}

struct TermGen {
    rng: ChaCha8Rng,
    next: usize,
}

impl TermGen {
    // A term of type `ty` under `ctx`. Base-typed terms are only requested
    // when `ctx` holds a base-typed variable, so a choice always exists.
    fn term(&mut self, ctx: &mut Vec<(String, Ty)>, ty: &Ty, depth: u32) -> LambdaTerm {
        let has_base = ctx.iter().any(|(_, t)| *t == Ty::Base);
        let vars: Vec<String> = ctx.iter().filter(|(_, t)| t == ty).map(|(x, _)| x.clone()).collect();
        let mut choices = Vec::new();
        if !vars.is_empty() {
            choices.push(0);
        }
        if matches!(ty, Ty::Arrow(..)) {
            choices.push(1);
        }
        if depth > 0 && (matches!(ty, Ty::Arrow(..)) || has_base) {
            choices.extend([2, 2]);
        }
        match *choices.choose(&mut self.rng).expect("some term shape fits") {
            0 => LambdaTerm::Var(vars.choose(&mut self.rng).unwrap().clone()),
            1 => {
                let Ty::Arrow(a, b) = ty else { unreachable!() };
                let x = format!("x{}", self.next);
                self.next += 1;
                ctx.push((x.clone(), (**a).clone()));
                let body = self.term(ctx, b, depth.saturating_sub(1));
                ctx.pop();
                LambdaTerm::lam(&x, body)
            }
            _ => {
                let mut args = vec![Ty::base_to_base(), Ty::numeral()];
                if has_base {
                    args.push(Ty::Base);
                }
                let a = args.choose(&mut self.rng).unwrap().clone();
                let f = self.term(ctx, &Ty::arrow(a.clone(), ty.clone()), depth - 1);
                let x = self.term(ctx, &a, depth - 1);
                LambdaTerm::app(f, x)
            }
        }
    }
}

/// A closed, simply typed term of type `o -> o` with application nesting
/// at most `depth`. Being simply typed, it has a finite evaluation.
pub fn random_lambda_term(depth: u32, seed: u64) -> LambdaTerm {
    let mut g = TermGen {
        rng: ChaCha8Rng::seed_from_u64(seed),
        next: 0,
    };
    g.term(&mut Vec::new(), &Ty::base_to_base(), depth)
}

/// `eval(term, bot())`, the interpreter's request to evaluate `term`.
pub fn lambda_seed(term: &LambdaTerm) -> Clause {
    Clause::new("eval", vec![term.to_interpreter(), nested("bot", vec![])])
}

/// Interpreter input for a random term: the single seed fact, whose
/// subfacts are the syntax tree.
pub fn gen_lambda_term(depth: u32, seed: u64) -> Vec<Clause> {
    vec![lambda_seed(&random_lambda_term(depth, seed))]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextEncoding {
    /// `Ctx(c0, c1, c2)`.
    Flat,
    /// `cons(c0, cons(c1, cons(c2, nil())))`.
    Cons,
}

/// Initial m-CFA state for `term`: empty environment, halt continuation,
/// and a context of three `Top()` call sites.
pub fn mcfa_seed(term: &LambdaTerm, ctx: ContextEncoding) -> Clause {
    let top = || nested("Top", vec![]);
    let c0 = match ctx {
        ContextEncoding::Flat => nested("Ctx", vec![top(), top(), top()]),
        ContextEncoding::Cons => (0..3).fold(nested("nil", vec![]), |rest, _| nested("cons", vec![top(), rest])),
    };
    Clause::new(
        "eval",
        vec![term.to_mcfa(), nested("Empty", vec![]), nested("Halt", vec![]), c0],
    )
}
