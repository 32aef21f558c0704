//! Random terminating programs for differential testing.
//!
//! Relations are arranged in layers. Negation only looks at lower layers,
//! so every program is stratified. Rules that create facts (nested head
//! clauses, or fact ids flowing into a head) read only lower layers; rules
//! that read their own layer copy existing column values. Every layer is
//! therefore finite and every program terminates.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::Clause;

#[derive(Clone, Debug)]
pub struct RandomProgram {
    pub source: String,
    pub facts: Vec<Clause>,
}

#[derive(Clone, Debug)]
struct Rel {
    name: String,
    arity: usize,
    layer: usize,
}

const VALUE_VARS: [&str; 4] = ["a", "b", "c", "d"];

struct Builder {
    rng: ChaCha8Rng,
    rels: Vec<Rel>,
    /// Allow nested clauses and id variables.
    nested: bool,
}

/// Body under construction: text items plus the variables they bind.
#[derive(Default)]
struct Body {
    items: Vec<String>,
    values: Vec<String>,
    /// Id variables bound by binders, with the layer of their relation.
    ids: Vec<(String, usize)>,
}

impl Body {
    fn bind_value(&mut self, v: &str) {
        if !self.values.iter().any(|x| x == v) {
            self.values.push(v.to_string());
        }
    }
}

impl Builder {
    fn rels_where(&self, f: impl Fn(&Rel) -> bool) -> Vec<Rel> {
        self.rels.iter().filter(|r| f(r)).cloned().collect()
    }

    fn literal(&mut self) -> String {
        self.rng.gen_range(0..4).to_string()
    }

    // Argument pattern for a positive body clause.
    fn body_arg(&mut self, body: &mut Body, below: usize, depth: usize) -> String {
        let roll = self.rng.gen_range(0..10);
        if self.nested && depth > 0 && roll == 0 {
            let ctors = self.rels_where(|r| r.layer < below && r.name.starts_with('C'));
            if let Some(c) = ctors.choose(&mut self.rng).cloned() {
                let args: Vec<String> = (0..c.arity).map(|_| self.body_arg(body, below, depth - 1)).collect();
                return format!("{}({})", c.name, args.join(", "));
            }
        }
        if self.nested && roll == 1 && !body.ids.is_empty() {
            return body.ids.choose(&mut self.rng).unwrap().0.clone();
        }
        match roll {
            2 => self.literal(),
            3 => "_".to_string(),
            _ => {
                let v = *VALUE_VARS.choose(&mut self.rng).unwrap();
                body.bind_value(v);
                v.to_string()
            }
        }
    }

    fn positive(&mut self, body: &mut Body, rel: &Rel, below: usize, id_ok: bool) {
        let args: Vec<String> = (0..rel.arity).map(|_| self.body_arg(body, below, 2)).collect();
        let clause = format!("{}({})", rel.name, args.join(", "));
        let binder = match self.rng.gen_range(0..4) {
            0 if self.nested && id_ok => {
                let id = format!("i{}", body.ids.len());
                body.ids.push((id.clone(), rel.layer));
                format!("{id} = ")
            }
            1 => "_ = ".to_string(),
            _ => String::new(),
        };
        body.items.push(format!("{binder}{clause}"));
    }

    fn bound_term(&mut self, body: &Body, ids: bool) -> String {
        let mut pool: Vec<String> = body.values.clone();
        if ids {
            pool.extend(body.ids.iter().map(|(v, _)| v.clone()));
        }
        if pool.is_empty() || self.rng.gen_range(0..6) == 0 {
            self.literal()
        } else {
            pool.choose(&mut self.rng).unwrap().clone()
        }
    }

    fn extras(&mut self, body: &mut Body, layer: usize) {
        if self.rng.gen_range(0..3) == 0 {
            let lower = self.rels_where(|r| r.layer < layer);
            if let Some(r) = lower.choose(&mut self.rng).cloned() {
                let args: Vec<String> = (0..r.arity)
                    .map(|_| {
                        if self.rng.gen_range(0..3) == 0 {
                            "_".to_string()
                        } else {
                            self.bound_term(body, self.nested)
                        }
                    })
                    .collect();
                body.items.push(format!("!{}({})", r.name, args.join(", ")));
            }
        }
        if self.rng.gen_range(0..4) == 0 && !body.values.is_empty() {
            let l = body.values.choose(&mut self.rng).unwrap().clone();
            let r = self.bound_term(body, false);
            let op = if self.rng.gen_bool(0.5) { "!=" } else { "=" };
            body.items.push(format!("{l} {op} {r}"));
        }
    }

    fn head_arg(&mut self, body: &Body, layer: usize, creating: bool, depth: usize) -> String {
        if creating && depth > 0 && self.rng.gen_range(0..4) == 0 {
            let ctors = self.rels_where(|r| r.layer == layer && r.name.starts_with('C'));
            if let Some(c) = ctors.choose(&mut self.rng).cloned() {
                let args: Vec<String> = (0..c.arity).map(|_| self.head_arg(body, layer, creating, depth - 1)).collect();
                return format!("{}({})", c.name, args.join(", "));
            }
        }
        self.bound_term(body, creating)
    }

    fn rule(&mut self, head: &Rel) -> String {
        let layer = head.layer;
        // Creating rules read lower layers only; copying rules may recurse.
        let creating = self.nested && self.rng.gen_bool(0.5);
        let sources = if creating {
            self.rels_where(|r| r.layer < layer)
        } else {
            self.rels_where(|r| r.layer <= layer)
        };
        let mut body = Body::default();
        let n = self.rng.gen_range(1..=3);
        for _ in 0..n {
            let r = sources.choose(&mut self.rng).unwrap().clone();
            let id_ok = creating || r.layer < layer;
            self.positive(&mut body, &r, layer, id_ok);
        }
        if !creating {
            // Ids of this layer's facts must not reach a copying head.
            body.ids.retain(|(_, l)| *l < layer);
        }
        self.extras(&mut body, layer);
        let args: Vec<String> = (0..head.arity).map(|_| self.head_arg(&body, layer, creating, 2)).collect();
        format!("{}({}) :- {}.", head.name, args.join(", "), body.items.join(", "))
    }
}

fn build(seed: u64, nested: bool) -> RandomProgram {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(seed),
        rels: Vec::new(),
        nested,
    };
    let edb = b.rng.gen_range(1..=3);
    for i in 0..edb {
        let arity = b.rng.gen_range(1..=3);
        b.rels.push(Rel {
            name: format!("e{i}"),
            arity,
            layer: 0,
        });
    }
    if nested {
        b.rels.push(Rel {
            name: "C0".into(),
            arity: 1,
            layer: 0,
        });
    }
    let layers = b.rng.gen_range(1..=3);
    let mut heads = Vec::new();
    for layer in 1..=layers {
        let count = b.rng.gen_range(1..=2);
        for j in 0..count {
            let arity = b.rng.gen_range(0..=3);
            let r = Rel {
                name: format!("p{layer}{}", ['a', 'b'][j]),
                arity,
                layer,
            };
            b.rels.push(r.clone());
            heads.push(r);
        }
        if nested {
            let arity = b.rng.gen_range(1..=2);
            b.rels.push(Rel {
                name: format!("C{layer}"),
                arity,
                layer,
            });
        }
    }
    let mut facts = Vec::new();
    let mut lines = Vec::new();
    for r in b.rels.clone().iter().filter(|r| r.layer == 0) {
        let n = b.rng.gen_range(2..=8);
        for _ in 0..n {
            let args: Vec<String> = (0..r.arity)
                .map(|_| {
                    if nested && r.name != "C0" && b.rng.gen_range(0..4) == 0 {
                        format!("C0({})", b.literal())
                    } else {
                        b.literal()
                    }
                })
                .collect();
            let text = format!("{}({})", r.name, args.join(", "));
            // Half the input arrives inline, half as separate facts.
            if b.rng.gen_bool(0.5) {
                lines.push(format!("{text}."));
            } else {
                facts.push(crate::syntax::parse_fact(&text).expect("generated facts parse"));
            }
        }
    }
    for h in &heads {
        let n = b.rng.gen_range(1..=3);
        for _ in 0..n {
            let r = b.rule(h);
            lines.push(r);
        }
    }
    let mut source = String::new();
    for r in &b.rels {
        source.push_str(&format!(".decl {}/{}\n", r.name, r.arity));
    }
    for l in lines {
        source.push_str(&l);
        source.push('\n');
    }
    RandomProgram { source, facts }
}

/// Flat program whose body id binders are all wildcards.
pub fn datalog_program(seed: u64) -> RandomProgram {
    build(seed, false)
}

/// Program with nested clauses up to depth two and id variables.
pub fn nested_program(seed: u64) -> RandomProgram {
    build(seed, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::compile_source;

    #[test]
    fn generated_programs_validate() {
        for seed in 0..200 {
            for p in [datalog_program(seed), nested_program(seed)] {
                if let Err(e) = compile_source(&p.source, "random") {
                    panic!("seed {seed}: {e}\n{}", p.source);
                }
            }
        }
    }

    #[test]
    fn datalog_programs_have_no_id_variables() {
        for seed in 0..50 {
            let p = datalog_program(seed);
            assert!(!p.source.contains(" i0"), "{}", p.source);
            assert!(!p.source.contains("C0"), "{}", p.source);
        }
    }
}
