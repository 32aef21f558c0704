use std::path::{Path, PathBuf};
use std::process::Command;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/slogette.h")
}

/// Directory holding the built shared library: two levels above the test
/// executable.
fn lib_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    for f in [
        "slog_config_default",
        "slog_run",
        "slog_database_free",
        "slog_relation_dump",
        "slog_fact_count",
        "slog_contains",
        "slog_why",
        "slog_deep_print",
        "slog_last_error",
        "slog_string_free",
        "slog_pack_id",
        "slog_unpack_id",
        "typedef struct SlogDatabase SlogDatabase",
        "SLOG_STATUS_NOT_FOUND = 11",
    ] {
        assert!(h.contains(f), "{f}");
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let st = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(header())
            .status()
            .unwrap();
        assert!(st.success(), "{compiler}");
    }
}

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "slogette.h"

int main(void) {
    SlogConfig cfg = slog_config_default();
    cfg.why = true;
    SlogDatabase *db = NULL;
    if (slog_run("tc(a, b) :- edge(a, b). tc(a, c) :- tc(a, b), edge(b, c).",
                 "edge(1, 2). edge(2, 3).", &cfg, &db) != SLOG_STATUS_OK) {
        fprintf(stderr, "%s\n", slog_last_error());
        return 1;
    }
    uint64_t n = 0;
    slog_fact_count(db, "tc", &n);
    char *lineage = NULL;
    if (slog_why(db, "tc(1, 3)", &lineage) != SLOG_STATUS_OK) return 2;
    printf("%llu\n%s", (unsigned long long)n, lineage);
    slog_string_free(lineage);
    if (slog_run("p(x :-", NULL, NULL, &db) != SLOG_STATUS_PARSE || db != NULL) return 3;
    if (slog_last_error() == NULL) return 4;
    slog_database_free(db);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let dir = lib_dir();
    assert!(dir.join("libslogette_ffi.so").is_file(), "no shared library in {}", dir.display());
    let tmp = tempfile::TempDir::new().unwrap();
    let src = tmp.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let exe = tmp.path().join("main");
    let st = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg("-L")
        .arg(&dir)
        .args(["-lslogette_ffi", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(st.success());
    let out = Command::new(&exe).env("LD_LIBRARY_PATH", &dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "3\nedge(1, 2)\nedge(2, 3)\n");
}
