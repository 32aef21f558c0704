use std::ffi::{c_char, CStr, CString};
use std::ptr;

use slogette_ffi::*;

const TC: &str = "tc(a, b) :- edge(a, b).\ntc(a, c) :- tc(a, b), edge(b, c).\n";
const EDGES: &str = "edge(1, 2).\nedge(2, 3).\n";

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    slog_string_free(s);
    out
}

unsafe fn last_error() -> String {
    let e = slog_last_error();
    assert!(!e.is_null());
    CStr::from_ptr(e).to_str().unwrap().to_string()
}

unsafe fn run(program: &str, facts: Option<&str>, cfg: Option<SlogConfig>) -> (SlogStatus, *mut SlogDatabase) {
    let p = c(program);
    let f = facts.map(c);
    let mut db = ptr::null_mut();
    let cfg_ptr = cfg.as_ref().map_or(ptr::null(), |c| c as *const SlogConfig);
    let st = slog_run(p.as_ptr(), f.as_ref().map_or(ptr::null(), |f| f.as_ptr()), cfg_ptr, &mut db);
    (st, db)
}

#[test]
fn run_dump_count_contains() {
    unsafe {
        let (st, db) = run(TC, Some(EDGES), None);
        assert_eq!(st, SlogStatus::Ok);
        assert!(slog_last_error().is_null());

        let mut out = ptr::null_mut();
        assert_eq!(slog_relation_dump(db, c("tc").as_ptr(), &mut out), SlogStatus::Ok);
        assert_eq!(take(out), "tc(1, 2)\ntc(1, 3)\ntc(2, 3)\n");

        let mut n = 0u64;
        assert_eq!(slog_fact_count(db, c("tc").as_ptr(), &mut n), SlogStatus::Ok);
        assert_eq!(n, 3);
        assert_eq!(slog_fact_count(db, ptr::null(), &mut n), SlogStatus::Ok);
        assert_eq!(n, 5);
        assert_eq!(slog_fact_count(db, c("nope").as_ptr(), &mut n), SlogStatus::NotFound);
        assert!(last_error().contains("nope"));

        let (mut found, mut id) = (false, 0u64);
        assert_eq!(slog_contains(db, c("tc(1, 3)").as_ptr(), &mut found, &mut id), SlogStatus::Ok);
        assert!(found);
        let mut text = ptr::null_mut();
        assert_eq!(slog_deep_print(db, id, &mut text), SlogStatus::Ok);
        assert_eq!(take(text), "tc(1, 3)");
        assert_eq!(slog_contains(db, c("tc(3, 1)").as_ptr(), &mut found, ptr::null_mut()), SlogStatus::Ok);
        assert!(!found);
        assert_eq!(slog_contains(db, c("tc(3,").as_ptr(), &mut found, ptr::null_mut()), SlogStatus::Parse);
        assert_eq!(slog_deep_print(db, u64::MAX, &mut text), SlogStatus::NotFound);
        assert!(text.is_null());

        slog_database_free(db);
    }
}

#[test]
fn why_needs_derivations() {
    unsafe {
        let cfg = SlogConfig {
            why: true,
            workers: 2,
            ..slog_config_default()
        };
        let (st, db) = run(TC, Some(EDGES), Some(cfg));
        assert_eq!(st, SlogStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(slog_why(db, c("tc(1, 3)").as_ptr(), &mut out), SlogStatus::Ok);
        assert_eq!(take(out), "edge(1, 2)\nedge(2, 3)\n");
        assert_eq!(slog_why(db, c("tc(3, 1)").as_ptr(), &mut out), SlogStatus::NotFound);
        slog_database_free(db);

        let (_, plain) = run(TC, Some(EDGES), None);
        assert_eq!(slog_why(plain, c("tc(1, 3)").as_ptr(), &mut out), SlogStatus::Usage);
        slog_database_free(plain);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let (st, db) = run("p(x :- q(x).", None, None);
        assert_eq!(st, SlogStatus::Parse);
        assert!(db.is_null());
        assert!(!last_error().is_empty());

        let (st, _) = run("p(x) :- e(x), !q(x).\nq(x) :- e(x), !p(x).", None, None);
        assert_eq!(st, SlogStatus::Stratify);

        let cfg = SlogConfig {
            max_height: 10,
            ..slog_config_default()
        };
        let (st, _) = run("Z().\nS(z) :- z = Z().\nS(n) :- n = S(_).", None, Some(cfg));
        assert_eq!(st, SlogStatus::Guard);

        let (st, _) = run(TC, Some("edge(x, 1)."), None);
        assert_eq!(st, SlogStatus::Parse);

        let cfg = SlogConfig {
            workers: 4,
            buckets: 2,
            ..slog_config_default()
        };
        assert_eq!(run(TC, None, Some(cfg)).0, SlogStatus::Usage);

        let mut db = ptr::null_mut();
        assert_eq!(slog_run(ptr::null(), ptr::null(), ptr::null(), &mut db), SlogStatus::NullArgument);
        let p = c(TC);
        assert_eq!(slog_run(p.as_ptr(), ptr::null(), ptr::null(), ptr::null_mut()), SlogStatus::NullArgument);
        let bad = [0xffu8, 0];
        assert_eq!(
            slog_run(bad.as_ptr() as *const c_char, ptr::null(), ptr::null(), &mut db),
            SlogStatus::InvalidUtf8
        );
        let mut out = ptr::null_mut();
        assert_eq!(slog_relation_dump(ptr::null(), c("tc").as_ptr(), &mut out), SlogStatus::NullArgument);

        slog_database_free(ptr::null_mut());
        slog_string_free(ptr::null_mut());
    }
}

#[test]
fn id_packing() {
    for (r, b, k) in [(0, 0, 0), (u16::MAX, u16::MAX, u32::MAX), (3, 17, 123_456)] {
        let id = slog_pack_id(r, b, k);
        let (mut r2, mut b2, mut k2) = (0, 0, 0);
        unsafe { slog_unpack_id(id, &mut r2, &mut b2, &mut k2) };
        assert_eq!((r2, b2, k2), (r, b, k));
    }
    assert_eq!(slog_pack_id(1, 2, 3), (1 << 48) | (2 << 32) | 3);
    unsafe { slog_unpack_id(7, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) };
}
