//! Example programs with their inputs and expected results, embedded from
//! the `corpus/` directory, plus input generators.

mod gen;
pub mod random;

pub use gen::{gen_lambda_term, gen_tc, lambda_seed, mcfa_seed, random_lambda_term, ContextEncoding, LambdaTerm};

use crate::error::Result;
use crate::input::{parse_facts, parse_tsv};
use crate::manifest::RunManifest;
use crate::pipeline::{compile_source, Compiled, RunOptions};
use crate::syntax::Clause;

#[derive(Clone, Copy, Debug)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub manifest: &'static str,
    pub program: &'static str,
    /// `(file name, contents)` of every file under `facts/`.
    pub facts: &'static [(&'static str, &'static str)],
    /// `(relation, sorted dump)` from `expected/`.
    pub expected: &'static [(&'static str, &'static str)],
    /// Further named inputs used by tests.
    pub inputs: &'static [(&'static str, &'static str)],
}

macro_rules! corpus_file {
    ($entry:literal, $path:expr) => {
        include_str!(concat!("../../corpus/", $entry, "/", $path))
    };
}

macro_rules! entry {
    ($name:literal, facts: [$($f:literal),*], expected: [$($r:literal),*], inputs: [$($i:literal),*]) => {
        CorpusEntry {
            name: $name,
            manifest: corpus_file!($name, "manifest.toml"),
            program: corpus_file!($name, "program.slg"),
            facts: &[$(($f, corpus_file!($name, concat!("facts/", $f)))),*],
            expected: &[$(($r, corpus_file!($name, concat!("expected/", $r, ".txt")))),*],
            inputs: &[$(($i, corpus_file!($name, concat!("inputs/", $i)))),*],
        }
    };
}

pub const ENTRIES: &[CorpusEntry] = &[
    entry!("tc", facts: ["edge.tsv"], expected: ["tc"], inputs: []),
    entry!("worked_example", facts: ["input.facts"], expected: ["T"], inputs: []),
    entry!("lambda", facts: ["identity.facts"], expected: ["down"], inputs: ["church.facts"]),
    entry!("stlc", facts: ["cases.facts"], expected: ["type"], inputs: []),
    entry!("mcfa", facts: ["identity.facts"], expected: [], inputs: []),
    entry!("mcfa_cons", facts: ["identity.facts"], expected: [], inputs: []),
    entry!("defunc_env", facts: ["maps.facts"], expected: ["lookup"], inputs: []),
    entry!("nat", facts: [], expected: [], inputs: []),
];

pub fn entry(name: &str) -> Option<&'static CorpusEntry> {
    ENTRIES.iter().find(|e| e.name == name)
}

fn parse_named(name: &str, text: &str) -> Result<Vec<Clause>> {
    match name.strip_suffix(".tsv") {
        Some(rel) => Ok(parse_tsv(rel, text)),
        None => parse_facts(text, name),
    }
}

impl CorpusEntry {
    pub fn manifest(&self) -> RunManifest {
        RunManifest::parse(self.manifest, self.name).expect("corpus manifests parse")
    }

    pub fn compile(&self) -> Result<Compiled> {
        compile_source(self.program, self.name)
    }

    pub fn facts(&self) -> Result<Vec<Clause>> {
        let mut out = Vec::new();
        for (name, text) in self.facts {
            out.extend(parse_named(name, text)?);
        }
        Ok(out)
    }

    pub fn input(&self, name: &str) -> Option<Result<Vec<Clause>>> {
        let (n, text) = self.inputs.iter().find(|(n, _)| *n == name)?;
        Some(parse_named(n, text))
    }

    /// Options from the manifest over the defaults.
    pub fn options(&self) -> Result<RunOptions> {
        let m = self.manifest();
        Ok(RunOptions {
            config: m.config.apply(&Default::default()),
            rewrites: m.rewrites.to_rewrites()?,
            sabotage: false,
        })
    }

    pub fn expected(&self, rel: &str) -> Option<Vec<String>> {
        let (_, text) = self.expected.iter().find(|(r, _)| *r == rel)?;
        Some(text.lines().filter(|l| !l.is_empty()).map(str::to_string).collect())
    }

    /// True unless the entry is expected to trip a guard.
    pub fn terminates(&self) -> bool {
        self.manifest().expect.unwrap_or_default().outcome == crate::manifest::ExpectedOutcome::Fixpoint
    }
}
