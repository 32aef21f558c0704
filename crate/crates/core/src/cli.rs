//! Command-line driver.
//!
//! Every command takes either a program file or a run manifest. A run
//! writes its results to an output directory:
//!
//! ```text
//! out/
//!   manifest.toml       settings of the run, pointing at the copies below
//!   program.slg
//!   facts/input.facts   every input fact
//!   relations/<rel>.tsv one row per fact: column texts, then the hex id
//!   interns.tsv         hex id and deep print of every fact
//!   stats.tsv           key<TAB>value lines
//!   trace.tsv           only with --trace
//! ```

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::{Database, EvalConfig};
use crate::error::{exit, Error, Result};
use crate::input::load_facts;
use crate::manifest::RunManifest;
use crate::pipeline::{check, compile_source, evaluate, CheckOutcome, Compiled, RunOptions};
use crate::provenance::{explained, print_ids, why_closure};
use crate::syntax::{parse_fact, Clause};

const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Parser)]
#[command(name = "slogette", version, about = "Datalog with first-class facts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a program to fixpoint and write an output directory.
    Run {
        #[command(flatten)]
        job: JobArgs,
        /// Output directory; replaced if it holds an earlier run.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record the facts created by each iteration in trace.tsv.
        #[arg(long)]
        trace: bool,
        /// Also print an intermediate form to stdout.
        #[arg(long, value_enum)]
        emit: Option<EmitKind>,
        /// Also run the reference evaluator and fail on any difference.
        #[arg(long)]
        oracle: bool,
    },
    /// Print the facts of one relation from an output directory, sorted.
    Dump { dir: PathBuf, relation: String },
    /// Input facts a fact depends on, computed by a targeted rerun.
    Explain {
        /// Output directory or manifest of a run.
        run: PathBuf,
        fact: String,
    },
    /// Input facts a fact depends on, from a rerun that records every
    /// derivation.
    Why {
        /// Output directory or manifest of a run.
        run: PathBuf,
        fact: String,
    },
    /// Compare the engine against the reference evaluator.
    Check {
        #[command(flatten)]
        job: JobArgs,
    },
    /// Print the flattened program or the evaluation plan.
    Emit {
        #[arg(value_enum)]
        kind: EmitKind,
        #[command(flatten)]
        job: JobArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmitKind {
    Core,
    Plan,
}

#[derive(Clone, Debug, Default, Args)]
pub struct JobArgs {
    /// Program file, run manifest, or output directory of an earlier run.
    pub input: PathBuf,
    /// Fact file or directory of `*.facts` / `*.tsv` files; repeatable.
    #[arg(long = "facts")]
    pub facts: Vec<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub buckets: Option<usize>,
    #[arg(long)]
    pub subbuckets: Option<usize>,
    /// Iteration limit per stratum.
    #[arg(long = "max-iters")]
    pub max_iters: Option<u64>,
    /// Limit on fact nesting height.
    #[arg(long = "max-height")]
    pub max_height: Option<u32>,
    /// Record derivation edges in `deriv`.
    #[arg(long)]
    pub why: bool,
    /// Record column origins in `prov_<rel>`.
    #[arg(long = "where")]
    pub where_: bool,
    #[arg(long, hide = true)]
    pub sabotage: bool,
}

/// A fully resolved job: the manifest plus everything it names, loaded.
struct Job {
    manifest: RunManifest,
    source: String,
    compiled: Compiled,
    facts: Vec<Clause>,
    options: RunOptions,
}

fn manifest_path(input: &Path) -> Option<PathBuf> {
    if input.is_dir() {
        return Some(input.join(MANIFEST));
    }
    (input.extension().and_then(|e| e.to_str()) == Some("toml")).then(|| input.to_path_buf())
}

impl JobArgs {
    fn manifest(&self) -> Result<RunManifest> {
        let mut m = match manifest_path(&self.input) {
            Some(p) => RunManifest::load(&p)?,
            None => RunManifest {
                program: self.input.clone(),
                ..RunManifest::default()
            },
        };
        m.facts.extend(self.facts.iter().cloned());
        let c = &mut m.config;
        if self.workers.is_some() {
            c.workers = self.workers;
        }
        for (dst, src) in [(&mut c.buckets, self.buckets), (&mut c.subbuckets, self.subbuckets)] {
            if src.is_some() {
                *dst = src;
            }
        }
        if self.max_iters.is_some() {
            c.max_iterations = self.max_iters;
        }
        if self.max_height.is_some() {
            c.max_height = self.max_height;
        }
        m.rewrites.why |= self.why;
        m.rewrites.where_ |= self.where_;
        Ok(m)
    }

    fn load(&self) -> Result<Job> {
        let mut job = Job::load(self.manifest()?)?;
        job.options.sabotage = self.sabotage;
        Ok(job)
    }
}

impl Job {
    fn load(manifest: RunManifest) -> Result<Job> {
        let source = fs::read_to_string(&manifest.program).map_err(|e| Error::io(&manifest.program, e))?;
        let compiled = compile_source(&source, &manifest.program.display().to_string())?;
        let mut facts = Vec::new();
        for f in &manifest.facts {
            facts.extend(load_facts(f)?);
        }
        let options = RunOptions {
            config: manifest.config.apply(&EvalConfig::default()),
            rewrites: manifest.rewrites.to_rewrites()?,
            sabotage: false,
        };
        Ok(Job {
            manifest,
            source,
            compiled,
            facts,
            options,
        })
    }

    fn from_run(run: &Path) -> Result<Job> {
        let path = manifest_path(run).ok_or_else(|| {
            Error::Usage(format!("{}: expected an output directory or a manifest", run.display()))
        })?;
        Job::load(RunManifest::load(&path)?)
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    match execute(cli.command, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs one command, writing its report to `out`.
pub fn execute(command: Command, out: &mut dyn std::io::Write) -> Result<i32> {
    let mut text = String::new();
    let code = match command {
        Command::Run {
            job,
            out: dir,
            trace,
            emit,
            oracle,
        } => {
            let mut job = job.load()?;
            job.options.config.trace = trace;
            let dir = dir
                .or_else(|| job.manifest.out.clone())
                .ok_or_else(|| Error::Usage("no output directory: pass --out or set `out` in the manifest".into()))?;
            cmd_run(&job, &dir, emit, oracle, &mut text)?
        }
        Command::Dump { dir, relation } => {
            for line in dump(&dir, &relation)? {
                let _ = writeln!(text, "{line}");
            }
            exit::OK
        }
        Command::Explain { run, fact } => {
            print_lines(&mut text, &explain(&run, &fact)?);
            exit::OK
        }
        Command::Why { run, fact } => {
            print_lines(&mut text, &why(&run, &fact)?);
            exit::OK
        }
        Command::Check { job } => {
            let job = job.load()?;
            report_check(&check(&job.compiled, &job.facts, &job.options)?, &mut text)
        }
        Command::Emit { kind, job } => {
            let job = job.load()?;
            emit_text(&job, kind, &mut text)?;
            exit::OK
        }
    };
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))?;
    Ok(code)
}

fn print_lines(text: &mut String, lines: &[String]) {
    for l in lines {
        let _ = writeln!(text, "{l}");
    }
}

fn emit_text(job: &Job, kind: EmitKind, text: &mut String) -> Result<()> {
    let core = crate::provenance::rewrite(&job.compiled.core, &job.options.rewrites)?;
    match kind {
        EmitKind::Core => {
            let _ = write!(text, "{core}");
        }
        EmitKind::Plan => {
            let mut store = crate::term::TermStore::new(Default::default(), job.options.config.buckets);
            let _ = write!(text, "{}", crate::plan::compile(&core, &mut store)?);
        }
    }
    Ok(())
}

fn report_check(outcome: &CheckOutcome, text: &mut String) -> i32 {
    match outcome {
        CheckOutcome::Agree { facts } => {
            let _ = writeln!(text, "agree\t{facts} facts");
            exit::OK
        }
        CheckOutcome::Differ {
            engine_only,
            oracle_only,
        } => {
            let _ = writeln!(
                text,
                "differ\t{} engine only, {} reference only",
                engine_only.len(),
                oracle_only.len()
            );
            for f in engine_only {
                let _ = writeln!(text, "+ {f}");
            }
            for f in oracle_only {
                let _ = writeln!(text, "- {f}");
            }
            exit::CHECK_DIFF
        }
        CheckOutcome::Inconclusive(why) => {
            let _ = writeln!(text, "inconclusive\t{why}");
            exit::CHECK_INCONCLUSIVE
        }
    }
}

fn cmd_run(job: &Job, dir: &Path, emit: Option<EmitKind>, oracle: bool, text: &mut String) -> Result<i32> {
    if let Some(kind) = emit {
        emit_text(job, kind, text)?;
    }
    let outcome = evaluate(&job.compiled, &job.facts, &job.options)?;
    let db = &outcome.db;
    write_output(job, db, dir)?;
    let iterations: u64 = db.stats.strata.iter().map(|s| s.iterations).sum();
    let _ = writeln!(
        text,
        "fixpoint\t{} facts, {} strata, {} iterations\t{}",
        db.fact_count(),
        db.stats.strata.len(),
        iterations,
        dir.display()
    );
    if oracle {
        return Ok(report_check(&check(&job.compiled, &job.facts, &job.options)?, text));
    }
    Ok(exit::OK)
}

fn relation_file(rows: &[(Vec<String>, crate::term::InternId)]) -> String {
    let mut s = String::new();
    for (cols, id) in rows {
        for c in cols {
            s.push_str(c);
            s.push('\t');
        }
        let _ = writeln!(s, "{id}");
    }
    s
}

/// Files of an output directory, relative path to contents.
fn output_files(job: &Job, db: &Database) -> Result<Vec<(PathBuf, String)>> {
    let mut stored = job.manifest.clone();
    stored.program = "program.slg".into();
    stored.facts = vec!["facts".into()];
    stored.out = None;
    stored.expect = None;
    let cfg = &job.options.config;
    stored.config.workers = Some(cfg.workers);
    stored.config.buckets = Some(cfg.buckets);
    stored.config.subbuckets = Some(cfg.subbuckets);
    let mut files = vec![
        (PathBuf::from(MANIFEST), stored.to_toml()),
        ("program.slg".into(), job.source.clone()),
        (
            PathBuf::from("facts").join("input.facts"),
            job.facts.iter().map(|f| format!("{f}.\n")).collect(),
        ),
        ("interns.tsv".into(), db.store.dump_interns()?),
        ("stats.tsv".into(), db.stats_text(&job.options.config)),
    ];
    for name in db.relation_names() {
        let rows = db.rows(&name).expect("listed relations exist");
        files.push((PathBuf::from("relations").join(format!("{name}.tsv")), relation_file(&rows)));
    }
    if job.options.config.trace {
        let mut t = String::new();
        for step in &db.stats.trace {
            for &id in &step.new {
                let _ = writeln!(t, "{}\t{}\t{}", step.stratum, step.iteration, db.deep_print(id)?);
            }
        }
        files.push(("trace.tsv".into(), t));
    }
    Ok(files)
}

fn looks_like_output(dir: &Path) -> bool {
    dir.join(MANIFEST).is_file() && dir.join("stats.tsv").is_file()
}

/// Writes the run into a sibling temporary directory, then renames it
/// into place, so `dir` is never seen half-written.
fn write_output(job: &Job, db: &Database, dir: &Path) -> Result<()> {
    if dir.exists() && !looks_like_output(dir) {
        return Err(Error::Usage(format!(
            "{}: exists and is not an earlier output directory",
            dir.display()
        )));
    }
    let files = output_files(job, db)?;
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        if tmp.exists() {
            fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
        }
        for (rel, contents) in &files {
            let path = tmp.join(rel);
            let p = path.parent().expect("files live under the directory");
            fs::create_dir_all(p).map_err(|e| Error::io(p, e))?;
            let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            f.write_all(contents.as_bytes()).map_err(|e| Error::io(&path, e))?;
        }
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

/// Sorted deep prints of a relation in an output directory.
pub fn dump(dir: &Path, relation: &str) -> Result<Vec<String>> {
    let path = dir.join("relations").join(format!("{relation}.tsv"));
    if !path.is_file() {
        if !looks_like_output(dir) {
            return Err(Error::Usage(format!("{}: not an output directory", dir.display())));
        }
        return Err(Error::NotFound(format!("relation `{relation}`")));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut out: Vec<String> = text
        .lines()
        .map(|l| {
            let mut cols: Vec<&str> = l.split('\t').collect();
            cols.pop();
            format!("{relation}({})", cols.join(", "))
        })
        .collect();
    out.sort();
    Ok(out)
}

fn target(fact: &str) -> Result<Clause> {
    parse_fact(fact).map_err(|e| Error::parse("fact", e))
}

/// Lineage of `fact` by lazy provenance: the stored run is repeated with
/// the fact as the seed of `explain_t`.
pub fn explain(run: &Path, fact: &str) -> Result<Vec<String>> {
    let clause = target(fact)?;
    let mut job = Job::from_run(run)?;
    job.options.rewrites.explain = Some(clause.clone());
    let db = evaluate(&job.compiled, &job.facts, &job.options)?.db;
    if db.find(&clause).is_none() {
        return Err(Error::NotFound(clause.to_string()));
    }
    Ok(print_ids(&db, &explained(&db)))
}

/// Lineage of `fact` by eager provenance over a rerun of the stored run.
pub fn why(run: &Path, fact: &str) -> Result<Vec<String>> {
    let clause = target(fact)?;
    let mut job = Job::from_run(run)?;
    job.options.rewrites.eager_why = true;
    let db = evaluate(&job.compiled, &job.facts, &job.options)?.db;
    let id = db.find(&clause).ok_or_else(|| Error::NotFound(clause.to_string()))?;
    Ok(print_ids(&db, &why_closure(&db, id)?))
}
