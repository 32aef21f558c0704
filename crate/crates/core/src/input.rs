//! Input facts from text and directories.
//!
//! A `*.facts` file holds ground facts in program syntax, each ending in a
//! dot. A `*.tsv` file holds rows of the relation named by its stem; each
//! cell is an integer, a quoted string, a ground nested fact, or otherwise
//! a bare string.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::syntax::{parse_fact, parse_program, Clause, Literal, ParseError, Pos, Subclause};

pub fn parse_facts(text: &str, origin: &str) -> Result<Vec<Clause>> {
    let program = parse_program(text).map_err(|e| Error::parse(origin, e))?;
    if let Some(d) = program.decls.first() {
        return Err(Error::parse(
            origin,
            ParseError::Syntax {
                pos: d.pos,
                message: "declarations are not allowed in fact files".into(),
            },
        ));
    }
    let mut out = Vec::with_capacity(program.rules.len());
    for r in program.rules {
        if !r.is_fact() || r.heads.len() != 1 || !r.heads[0].clause.is_ground() || r.heads[0].binder.is_some() {
            return Err(Error::parse(
                origin,
                ParseError::Syntax {
                    pos: r.pos,
                    message: "expected a ground fact".into(),
                },
            ));
        }
        out.extend(r.heads.into_iter().map(|h| h.clause));
    }
    Ok(out)
}

fn tsv_cell(cell: &str) -> Subclause {
    if let Ok(c) = parse_fact(&format!("t({cell})")) {
        if c.args.len() == 1 && c.is_ground() {
            return c.args.into_iter().next().unwrap();
        }
    }
    Subclause::Lit(Literal::Str(cell.to_string()), Pos::default())
}

pub fn parse_tsv(rel: &str, text: &str) -> Vec<Clause> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Clause::new(rel, l.split('\t').map(|c| tsv_cell(c.trim())).collect()))
        .collect()
}

/// Reads one fact file by extension.
pub fn load_fact_file(path: &Path) -> Result<Vec<Clause>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => {
            let rel = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            Ok(parse_tsv(rel, &text))
        }
        _ => parse_facts(&text, &path.display().to_string()),
    }
}

/// Reads every `*.facts` and `*.tsv` file in `dir`, in file-name order;
/// a plain file path is read directly.
pub fn load_facts(dir: &Path) -> Result<Vec<Clause>> {
    if dir.is_file() {
        return load_fact_file(dir);
    }
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("facts" | "tsv")))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        out.extend(load_fact_file(&p)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fact_text() {
        let f = parse_facts("// input\nedge(1, 2).\nG(A()).\n", "t").unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].to_string(), "G(A())");
        assert!(parse_facts("p(x).", "t").is_err());
        assert!(parse_facts("p(1) :- q(1).", "t").is_err());
    }

    #[test]
    fn tsv_cells() {
        let rows = parse_tsv("e", "1\tfoo\n\"a b\"\tG(2)\n\n");
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].to_string(), "e(1, \"foo\")");
        assert_eq!(rows[1].to_string(), "e(\"a b\", G(2))");
    }
}
