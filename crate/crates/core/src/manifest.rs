//! Run manifests: a TOML description of one run.
//!
//! ```toml
//! program = "program.slg"
//! facts = ["facts"]
//!
//! [config]
//! workers = 2
//! max_height = 64
//!
//! [rewrites]
//! why = true
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::EvalConfig;
use crate::error::{Error, Result};
use crate::provenance::Rewrites;
use crate::syntax::parse_fact;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub program: PathBuf,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub facts: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub config: ManifestConfig,
    #[serde(default)]
    pub rewrites: ManifestRewrites,
    /// Expected results; read by the corpus tests, ignored by `run`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buckets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subbuckets: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_height: Option<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRewrites {
    #[serde(default)]
    pub why: bool,
    #[serde(default, rename = "where")]
    pub where_: bool,
    /// Fact to seed lazy why-provenance with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explain: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpectedOutcome {
    #[default]
    Fixpoint,
    HeightGuard,
    IterationGuard,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default)]
    pub outcome: ExpectedOutcome,
    /// Relations whose full sorted dump is stored under `expected/`.
    #[serde(default)]
    pub relations: Vec<String>,
    /// Exact fact counts per relation.
    #[serde(default)]
    pub counts: BTreeMap<String, usize>,
    /// Facts that must be present.
    #[serde(default)]
    pub contains: Vec<String>,
}

impl ManifestConfig {
    /// Applies the manifest's settings on top of `base`. When only the
    /// worker count is given, the bucket count is raised to match it.
    pub fn apply(&self, base: &EvalConfig) -> EvalConfig {
        let mut cfg = base.clone();
        if let Some(w) = self.workers {
            cfg.workers = w;
            if self.buckets.is_none() {
                cfg.buckets = cfg.buckets.max(w);
            }
        }
        if let Some(b) = self.buckets {
            cfg.buckets = b;
        }
        if let Some(s) = self.subbuckets {
            cfg.subbuckets = s;
        }
        if self.max_iterations.is_some() {
            cfg.max_iterations = self.max_iterations;
        }
        if self.max_height.is_some() {
            cfg.max_height = self.max_height;
        }
        cfg
    }
}

impl ManifestRewrites {
    pub fn to_rewrites(&self) -> Result<Rewrites> {
        let explain = match &self.explain {
            Some(s) => Some(parse_fact(s).map_err(|e| Error::parse("rewrites.explain", e))?),
            None => None,
        };
        Ok(Rewrites {
            eager_why: self.why,
            where_: self.where_,
            explain,
        })
    }
}

impl RunManifest {
    pub fn parse(text: &str, origin: &str) -> Result<RunManifest> {
        toml::from_str(text).map_err(|e| Error::Manifest {
            origin: origin.to_string(),
            message: e.message().to_string(),
        })
    }

    /// Reads a manifest and makes its paths absolute.
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = RunManifest::parse(&text, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.program = base.join(&m.program);
        for f in &mut m.facts {
            *f = base.join(&*f);
        }
        if let Some(o) = &mut m.out {
            *o = base.join(&*o);
        }
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifests serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_defaults() {
        let m = RunManifest::parse(
            "program = \"p.slg\"\nfacts = [\"f\"]\n[config]\nworkers = 4\n[rewrites]\nwhere = true\n",
            "m",
        )
        .unwrap();
        assert_eq!(m.config.workers, Some(4));
        assert!(m.rewrites.where_);
        assert_eq!(RunManifest::parse(&m.to_toml(), "m").unwrap(), m);
        let cfg = m.config.apply(&EvalConfig::default());
        assert_eq!((cfg.workers, cfg.buckets), (4, 16));
        assert!(RunManifest::parse("program = 1", "m").is_err());
        assert!(RunManifest::parse("program = \"p\"\nbogus = 1", "m").is_err());
    }

    #[test]
    fn expectation_outcome() {
        let m = RunManifest::parse("program = \"p\"\n[expect]\noutcome = \"height-guard\"\n", "m").unwrap();
        assert_eq!(m.expect.unwrap().outcome, ExpectedOutcome::HeightGuard);
    }
}
