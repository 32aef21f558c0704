//! C interface to the slogette engine.
//!
//! Every fallible function returns a `SlogStatus`. On failure the message
//! is available from `slog_last_error` on the same thread. Strings handed
//! out by the library are NUL-terminated and must be released with
//! `slog_string_free`; databases with `slog_database_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slogette::engine::{Database, EvalConfig};
use slogette::error::{exit, Error};
use slogette::input::parse_facts;
use slogette::pipeline::{compile_source, evaluate, RunOptions};
use slogette::provenance::{print_ids, why_closure, Rewrites};
use slogette::syntax::parse_fact;
use slogette::term::{pack_id, unpack_id, InternId};

/// Result of a library call. Failure codes match the command-line exit
/// codes where one exists.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlogStatus {
    Ok = 0,
    Usage = 2,
    Io = 3,
    Parse = 4,
    Validate = 5,
    Stratify = 6,
    Guard = 7,
    Runtime = 8,
    NotFound = 11,
    /// A required pointer argument was null.
    NullArgument = 20,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 21,
    /// The library panicked.
    Panic = 22,
}

/// Evaluation settings. Zero in a limit field means unlimited.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SlogConfig {
    pub workers: u32,
    /// Zero picks the default.
    pub buckets: u32,
    pub subbuckets: u32,
    pub max_iterations: u64,
    pub max_height: u32,
    /// Record derivation edges, needed by `slog_why`.
    pub why: bool,
    /// Record column origins in `prov_<rel>` relations.
    pub where_provenance: bool,
}

/// Opaque handle to a finished database.
pub struct SlogDatabase {
    db: Database,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("NULs removed")));
}

struct Failure(SlogStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.exit_code() {
            exit::USAGE => SlogStatus::Usage,
            exit::IO => SlogStatus::Io,
            exit::PARSE => SlogStatus::Parse,
            exit::VALIDATE => SlogStatus::Validate,
            exit::STRATIFY => SlogStatus::Stratify,
            exit::GUARD => SlogStatus::Guard,
            exit::NOT_FOUND => SlogStatus::NotFound,
            _ => SlogStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

/// Runs `body`, catching panics and recording any failure message.
fn guarded(body: impl FnOnce() -> Result<(), Failure>) -> SlogStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SlogStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SlogStatus::Panic
        }
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(SlogStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SlogStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn database<'a>(db: *const SlogDatabase) -> Result<&'a Database, Failure> {
    db.as_ref()
        .map(|d| &d.db)
        .ok_or_else(|| Failure(SlogStatus::NullArgument, "database is null".into()))
}

fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    // SAFETY: callers pass either null or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(SlogStatus::NullArgument, format!("{what} is null")))
}

fn give_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs removed").into_raw()
}

fn eval_config(c: &SlogConfig) -> EvalConfig {
    let workers = c.workers.max(1) as usize;
    let base = EvalConfig::with_workers(workers);
    EvalConfig {
        buckets: if c.buckets == 0 { base.buckets } else { c.buckets as usize },
        subbuckets: c.subbuckets.max(1) as usize,
        max_iterations: (c.max_iterations != 0).then_some(c.max_iterations),
        max_height: (c.max_height != 0).then_some(c.max_height),
        ..base
    }
}

fn find(db: &Database, fact: &str) -> Result<Option<InternId>, Failure> {
    let clause = parse_fact(fact).map_err(|e| Failure::from(Error::parse("fact", e)))?;
    Ok(db.find(&clause))
}

/// Settings used when `slog_run` gets a null config: one worker, default
/// buckets, no limits, no provenance.
#[no_mangle]
pub extern "C" fn slog_config_default() -> SlogConfig {
    let d = EvalConfig::default();
    SlogConfig {
        workers: d.workers as u32,
        buckets: 0,
        subbuckets: d.subbuckets as u32,
        max_iterations: 0,
        max_height: 0,
        why: false,
        where_provenance: false,
    }
}

/// Evaluates `program` over `facts` (ground facts in program syntax, or
/// null) and stores a new database in `*out`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `config` must be null
/// or valid; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slog_run(
    program: *const c_char,
    facts: *const c_char,
    config: *const SlogConfig,
    out: *mut *mut SlogDatabase,
) -> SlogStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let src = text(program, "program")?;
        let facts = if facts.is_null() {
            Vec::new()
        } else {
            parse_facts(text(facts, "facts")?, "facts")?
        };
        let cfg = config.as_ref().copied().unwrap_or_else(|| slog_config_default());
        let compiled = compile_source(src, "program")?;
        let opts = RunOptions {
            config: eval_config(&cfg),
            rewrites: Rewrites {
                eager_why: cfg.why,
                where_: cfg.where_provenance,
                explain: None,
            },
            sabotage: false,
        };
        let db = evaluate(&compiled, &facts, &opts)?.db;
        *out = Box::into_raw(Box::new(SlogDatabase { db }));
        Ok(())
    })
}

/// Releases a database. Null is ignored.
///
/// # Safety
/// `db` must be null or a pointer from `slog_run` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slog_database_free(db: *mut SlogDatabase) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Facts of `relation`, deep-printed, sorted, one per line.
///
/// # Safety
/// `db` must be a live database; `relation` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slog_relation_dump(
    db: *const SlogDatabase,
    relation: *const c_char,
    out: *mut *mut c_char,
) -> SlogStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let db = database(db)?;
        let rel = text(relation, "relation")?;
        let rows = db
            .dump(rel)
            .ok_or_else(|| Failure(SlogStatus::NotFound, format!("no relation `{rel}`")))?;
        *out = give_string(rows.iter().map(|r| format!("{r}\n")).collect());
        Ok(())
    })
}

/// Number of facts in `relation`, or in the whole database when
/// `relation` is null.
///
/// # Safety
/// `db` must be a live database; `relation` null or NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn slog_fact_count(
    db: *const SlogDatabase,
    relation: *const c_char,
    out: *mut u64,
) -> SlogStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        let db = database(db)?;
        *out = if relation.is_null() {
            db.fact_count() as u64
        } else {
            let rel = text(relation, "relation")?;
            let r = db
                .relation(rel)
                .ok_or_else(|| Failure(SlogStatus::NotFound, format!("no relation `{rel}`")))?;
            db.store.relation_len(r) as u64
        };
        Ok(())
    })
}

/// Whether the ground fact `fact` is stored; its id goes to `*id` when
/// `id` is not null.
///
/// # Safety
/// `db` must be a live database; `fact` NUL-terminated; `found` writable;
/// `id` null or writable.
#[no_mangle]
pub unsafe extern "C" fn slog_contains(
    db: *const SlogDatabase,
    fact: *const c_char,
    found: *mut bool,
    id: *mut u64,
) -> SlogStatus {
    guarded(|| {
        let found = out_ptr(found, "found")?;
        let db = database(db)?;
        let hit = find(db, text(fact, "fact")?)?;
        *found = hit.is_some();
        if let (Some(slot), Some(h)) = (id.as_mut(), hit) {
            *slot = h.raw();
        }
        Ok(())
    })
}

/// Input facts `fact` depends on, sorted, one per line. The database must
/// come from a run with `why` set.
///
/// # Safety
/// `db` must be a live database; `fact` NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slog_why(db: *const SlogDatabase, fact: *const c_char, out: *mut *mut c_char) -> SlogStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let db = database(db)?;
        let f = text(fact, "fact")?;
        let id = find(db, f)?.ok_or_else(|| Failure(SlogStatus::NotFound, format!("{f} is not stored")))?;
        let ids = why_closure(db, id).map_err(|e| Failure::from(Error::from(e)))?;
        *out = give_string(print_ids(db, &ids).iter().map(|l| format!("{l}\n")).collect());
        Ok(())
    })
}

/// Deep print of the fact with intern id `id`.
///
/// # Safety
/// `db` must be a live database; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slog_deep_print(db: *const SlogDatabase, id: u64, out: *mut *mut c_char) -> SlogStatus {
    guarded(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let db = database(db)?;
        let s = db
            .deep_print(InternId::from_raw(id))
            .map_err(|e| Failure(SlogStatus::NotFound, e.to_string()))?;
        *out = give_string(s);
        Ok(())
    })
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call into the library on this thread; owned by the library.
#[no_mangle]
pub extern "C" fn slog_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn slog_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an intern id from relation, bucket, and counter.
#[no_mangle]
pub extern "C" fn slog_pack_id(relation: u16, bucket: u16, counter: u32) -> u64 {
    pack_id(relation, bucket, counter)
}

/// Splits an intern id. Null output pointers are skipped.
///
/// # Safety
/// Each output pointer must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn slog_unpack_id(id: u64, relation: *mut u16, bucket: *mut u16, counter: *mut u32) {
    let (r, b, c) = unpack_id(id);
    if let Some(p) = relation.as_mut() {
        *p = r;
    }
    if let Some(p) = bucket.as_mut() {
        *p = b;
    }
    if let Some(p) = counter.as_mut() {
        *p = c;
    }
}
