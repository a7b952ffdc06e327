//! Plain-text formats for relations, instances, formulas, witnesses and
//! saturation maps. Positions and variables are 1-based in text.
//! Blank lines and lines starting with `#` are ignored.

use crate::clones::{PartialOperation, Witness};
use crate::error::{CspError, Result};
use crate::extensions::SaturationMap;
use crate::formula::{Atom, AtomRel, PPFormula};
use crate::instance::Instance;
use crate::language::ConstraintLanguage;
use crate::relation::Relation;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

fn perr<T>(line: usize, msg: impl Into<String>) -> Result<T> {
    Err(CspError::Parse { line, msg: msg.into() })
}

/// Non-blank, non-comment lines with their 1-based line numbers.
fn lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

fn num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().or_else(|_| perr(line, format!("expected a number, found {s:?}")))
}

fn expect_word(line: usize, got: Option<&str>, want: &str) -> Result<()> {
    match got {
        Some(w) if w == want => Ok(()),
        other => perr(line, format!("expected {want:?}, found {other:?}")),
    }
}

/// Parses a `rel` header and its rows starting at `lines[at]`. Returns the
/// named relation and the index of the next unread line.
fn relation_block(ls: &[(usize, &str)], at: usize) -> Result<((String, Relation), usize)> {
    let (ln, header) = ls[at];
    let mut w = header.split_whitespace();
    expect_word(ln, w.next(), "rel")?;
    let Some(name) = w.next() else { return perr(ln, "missing relation name") };
    expect_word(ln, w.next(), "domain")?;
    let k: usize = num(ln, w.next().unwrap_or(""))?;
    expect_word(ln, w.next(), "arity")?;
    let n: usize = num(ln, w.next().unwrap_or(""))?;
    expect_word(ln, w.next(), "tuples")?;
    let m: usize = num(ln, w.next().unwrap_or(""))?;
    if at + m >= ls.len() {
        return perr(ln, format!("relation {name} declares {m} tuples but the input ends early"));
    }
    let mut tuples = Vec::with_capacity(m);
    for &(rl, row) in &ls[at + 1..at + 1 + m] {
        let t: Vec<u8> = row.split_whitespace().map(|x| num(rl, x)).collect::<Result<_>>()?;
        if t.len() != n {
            return perr(rl, format!("row has {} entries, arity is {n}", t.len()));
        }
        tuples.push(t);
    }
    let r = Relation::new(k, n, tuples).map_err(|e| CspError::Parse { line: ln, msg: e.to_string() })?;
    if r.len() != m {
        return perr(ln, format!("relation {name} lists duplicate tuples"));
    }
    Ok(((name.to_string(), r), at + 1 + m))
}

/// All `rel` blocks in `text`.
pub fn parse_relations(text: &str) -> Result<Vec<(String, Relation)>> {
    let ls = lines(text);
    let mut out = Vec::new();
    let mut at = 0;
    while at < ls.len() {
        let (rel, next) = relation_block(&ls, at)?;
        out.push(rel);
        at = next;
    }
    Ok(out)
}

pub fn parse_relation(text: &str) -> Result<(String, Relation)> {
    let mut rels = parse_relations(text)?;
    match rels.len() {
        1 => Ok(rels.remove(0)),
        n => perr(1, format!("expected exactly one relation, found {n}")),
    }
}

pub fn parse_language(text: &str) -> Result<ConstraintLanguage> {
    let rels = parse_relations(text)?;
    let Some(k) = rels.first().map(|(_, r)| r.domain()) else {
        return perr(1, "empty language file");
    };
    ConstraintLanguage::from_relations(k, rels)
}

pub fn write_relation(name: &str, r: &Relation) -> String {
    let mut s = format!("rel {name} domain {} arity {} tuples {}\n", r.domain(), r.arity(), r.len());
    for t in r.tuples() {
        let row: Vec<String> = t.iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_language(lang: &ConstraintLanguage) -> String {
    lang.iter().map(|(n, r)| write_relation(n, r)).collect()
}

/// Parses an instance. `relfile` paths are resolved against `base`.
pub fn parse_instance(text: &str, base: Option<&Path>) -> Result<Instance> {
    let ls = lines(text);
    let mut at = 0;
    let mut domain = None;
    let mut rels: Vec<(String, Relation)> = Vec::new();
    let mut inst: Option<Instance> = None;
    while at < ls.len() {
        let (ln, line) = ls[at];
        let mut w = line.split_whitespace();
        let head = w.next().unwrap_or("");
        match (head, inst.is_some()) {
            ("domain", false) => {
                domain = Some(num::<usize>(ln, w.next().unwrap_or(""))?);
                at += 1;
            }
            ("rel", false) => {
                let (rel, next) = relation_block(&ls, at)?;
                rels.push(rel);
                at = next;
            }
            ("relfile", false) => {
                let Some(p) = w.next() else { return perr(ln, "relfile needs a path") };
                let path = base.map_or_else(|| Path::new(p).to_path_buf(), |b| b.join(p));
                let body = std::fs::read_to_string(&path)
                    .or_else(|e| perr(ln, format!("cannot read {}: {e}", path.display())))?;
                rels.extend(parse_relations(&body)?);
                at += 1;
            }
            ("vars", false) => {
                let Some(k) = domain else { return perr(ln, "vars before domain") };
                let n: usize = num(ln, w.next().unwrap_or(""))?;
                let mut i = Instance::new(k, n);
                for (name, r) in rels.drain(..) {
                    i.add_relation(name, r).map_err(|e| CspError::Parse { line: ln, msg: e.to_string() })?;
                }
                inst = Some(i);
                at += 1;
            }
            (_, true) => {
                let i = inst.as_mut().expect("checked");
                let args: Vec<usize> = w.map(|x| num::<usize>(ln, x)).collect::<Result<_>>()?;
                if args.contains(&0) {
                    return perr(ln, "variable indices are 1-based");
                }
                i.add_constraint_named(head, args.iter().map(|a| a - 1).collect())
                    .map_err(|e| CspError::Parse { line: ln, msg: e.to_string() })?;
                at += 1;
            }
            _ => return perr(ln, format!("unexpected line {line:?}")),
        }
    }
    match inst {
        Some(i) => Ok(i),
        None => perr(ls.last().map_or(1, |l| l.0), "missing vars line"),
    }
}

pub fn write_instance(inst: &Instance) -> String {
    let mut s = format!("domain {}\n", inst.domain());
    for (n, r) in inst.relations() {
        s.push_str(&write_relation(n, r));
    }
    let _ = writeln!(s, "vars {}", inst.num_vars());
    for c in inst.constraints() {
        s.push_str(inst.relation_name(c));
        for a in &c.args {
            let _ = write!(s, " {}", a + 1);
        }
        s.push('\n');
    }
    s
}

pub fn write_formula(f: &PPFormula) -> String {
    let names: Vec<&String> = f.free.iter().chain(&f.bound).collect();
    let atom = |a: &Atom| -> String {
        let args: Vec<&str> = a.args.iter().map(|&v| names[v].as_str()).collect();
        match &a.rel {
            AtomRel::Eq => format!("eq({})", args.join(",")),
            AtomRel::False => "false".to_string(),
            AtomRel::Named(n) => format!("{n}({})", args.join(",")),
        }
    };
    let body = if f.atoms.is_empty() { "true".to_string() } else { f.atoms.iter().map(atom).collect::<Vec<_>>().join(" & ") };
    let quant = if f.bound.is_empty() { String::new() } else { format!("exists {} . ", f.bound.join(",")) };
    format!("def {}({}) := {quant}{body}\n", f.name, f.free.join(","))
}

fn ident_list(ln: usize, s: &str) -> Result<Vec<String>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|v| {
            let v = v.trim();
            if v.is_empty() || !v.chars().all(|c| c.is_alphanumeric() || c == '_') {
                perr(ln, format!("bad variable name {v:?}"))
            } else {
                Ok(v.to_string())
            }
        })
        .collect()
}

fn parse_def(ln: usize, line: &str) -> Result<PPFormula> {
    let Some(rest) = line.strip_prefix("def ") else { return perr(ln, "expected `def`") };
    let Some((head, body)) = rest.split_once(":=") else { return perr(ln, "missing `:=`") };
    let head = head.trim();
    let Some(open) = head.find('(') else { return perr(ln, "missing parameter list") };
    if !head.ends_with(')') {
        return perr(ln, "unterminated parameter list");
    }
    let name = head[..open].trim().to_string();
    let free = ident_list(ln, &head[open + 1..head.len() - 1])?;
    let mut body = body.trim();
    let mut bound = Vec::new();
    if let Some(q) = body.strip_prefix("exists ") {
        let Some((vars, rest)) = q.split_once(" . ").or_else(|| q.split_once('.')) else {
            return perr(ln, "missing `.` after quantified variables");
        };
        bound = ident_list(ln, vars)?;
        body = rest.trim();
    }
    let names: Vec<&String> = free.iter().chain(&bound).collect();
    let lookup = |v: &str| -> Result<usize> {
        names.iter().position(|n| n.as_str() == v).map_or_else(|| perr(ln, format!("unknown variable {v:?}")), Ok)
    };
    let mut atoms = Vec::new();
    if body != "true" {
        for part in body.split('&') {
            let part = part.trim();
            if part == "false" || part == "false()" {
                atoms.push(Atom::falsum());
                continue;
            }
            let Some(open) = part.find('(') else { return perr(ln, format!("bad atom {part:?}")) };
            if !part.ends_with(')') {
                return perr(ln, format!("bad atom {part:?}"));
            }
            let rel = part[..open].trim();
            let args: Vec<usize> = ident_list(ln, &part[open + 1..part.len() - 1])?
                .iter()
                .map(|v| lookup(v))
                .collect::<Result<_>>()?;
            atoms.push(if rel == "eq" { Atom { rel: AtomRel::Eq, args } } else { Atom::named(rel, args) });
        }
    }
    PPFormula::new(name, free, bound, atoms).map_err(|e| CspError::Parse { line: ln, msg: e.to_string() })
}

pub fn parse_formulas(text: &str) -> Result<Vec<PPFormula>> {
    lines(text).into_iter().map(|(ln, l)| parse_def(ln, l)).collect()
}

pub fn parse_formula(text: &str) -> Result<PPFormula> {
    let mut fs = parse_formulas(text)?;
    match fs.len() {
        1 => Ok(fs.remove(0)),
        n => perr(1, format!("expected exactly one definition, found {n}")),
    }
}

fn row_string(t: &[u8]) -> String {
    t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// `witness relation <name> arity <a> domain <k>`, then one `row` line per
/// argument tuple and an `image` line. The operation is the map from the
/// columns of the rows to the image entries.
pub fn write_witness(w: &Witness) -> String {
    let mut s = format!(
        "witness relation {} arity {} domain {}\n",
        w.relation,
        w.operation.arity(),
        w.operation.domain()
    );
    for r in &w.rows {
        let _ = writeln!(s, "row {}", row_string(r));
    }
    let _ = writeln!(s, "image {}", row_string(&w.image));
    s
}

pub fn parse_witness(text: &str) -> Result<Witness> {
    let ls = lines(text);
    let Some(&(ln, header)) = ls.first() else { return perr(1, "empty witness") };
    let mut w = header.split_whitespace();
    expect_word(ln, w.next(), "witness")?;
    expect_word(ln, w.next(), "relation")?;
    let relation = w.next().unwrap_or("").to_string();
    expect_word(ln, w.next(), "arity")?;
    let a: usize = num(ln, w.next().unwrap_or(""))?;
    expect_word(ln, w.next(), "domain")?;
    let k: usize = num(ln, w.next().unwrap_or(""))?;
    let values = |ln: usize, rest: &str| -> Result<Vec<u8>> { rest.split_whitespace().map(|x| num(ln, x)).collect() };
    let mut rows = Vec::new();
    let mut image = None;
    for &(ln, l) in &ls[1..] {
        if let Some(rest) = l.strip_prefix("row") {
            rows.push(values(ln, rest)?);
        } else if let Some(rest) = l.strip_prefix("image") {
            image = Some(values(ln, rest)?);
        } else {
            return perr(ln, format!("unexpected line {l:?}"));
        }
    }
    let Some(image) = image else { return perr(ln, "missing image line") };
    if rows.len() != a || rows.iter().any(|r| r.len() != image.len()) {
        return perr(ln, "rows do not match the declared arity or image length");
    }
    let mut map = BTreeMap::new();
    for (p, &v) in image.iter().enumerate() {
        let col: Vec<u8> = rows.iter().map(|r| r[p]).collect();
        if map.insert(col, v).is_some_and(|old| old != v) {
            return perr(ln, "image is not a function of the columns");
        }
    }
    let operation = PartialOperation::new(k, a, map).map_err(|e| CspError::Parse { line: ln, msg: e.to_string() })?;
    Ok(Witness { operation, rows, image, relation })
}

pub fn write_saturation_map(m: &SaturationMap) -> String {
    let mut s = String::new();
    for e in &m.entries {
        let tau: String = e.tau.iter().map(|t| char::from(b'1' + *t as u8)).collect();
        let _ = writeln!(s, "col {} from {} tau {tau}", e.column + 1, e.source + 1);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relation::r_b;

    #[test]
    fn relation_round_trip() {
        let s = write_relation("R", &r_b());
        assert!(s.starts_with("rel R domain 2 arity 8 tuples 3\n0 0 1 1 1 0 0 1\n"));
        assert_eq!(parse_relation(&s).unwrap(), ("R".to_string(), r_b()));
        assert!(parse_relation("rel R domain 2 arity 2 tuples 2\n0 1\n").is_err());
        assert!(parse_relation("rel R domain 2 arity 2 tuples 1\n0 2\n").is_err());
    }

    #[test]
    fn instance_round_trip() {
        let text = "# tiny\ndomain 2\nrel R domain 2 arity 8 tuples 3\n0 0 1 1 1 0 0 1\n0 1 0 1 0 1 0 1\n1 0 0 0 1 1 0 1\nvars 9\nR 1 2 3 4 5 6 7 8\nR 9 2 3 4 5 6 7 1\n";
        let inst = parse_instance(text, None).unwrap();
        assert_eq!(inst.num_vars(), 9);
        assert_eq!(inst.constraints()[1].args[0], 8);
        let again = parse_instance(&write_instance(&inst), None).unwrap();
        assert_eq!(again, inst);
        assert!(parse_instance("domain 2\nvars 1\nS 1\n", None).is_err());
        assert!(parse_instance("domain 2\nrel R domain 2 arity 1 tuples 1\n0\nvars 1\nR 0\n", None).is_err());
    }

    #[test]
    fn formula_round_trip() {
        let f = parse_formula("def phi(x1,x2) := exists y1 . R(x1,y1) & eq(y1,x2)").unwrap();
        assert_eq!(f.free, vec!["x1", "x2"]);
        assert_eq!(f.bound, vec!["y1"]);
        assert_eq!(f.atoms[1], Atom::eq(2, 1));
        assert_eq!(parse_formula(&write_formula(&f)).unwrap(), f);
        let g = parse_formula("def g(x1) := c0(x1)").unwrap();
        assert!(g.classify().quantifier_free);
        let t = parse_formula("def t(x1) := true").unwrap();
        assert!(t.atoms.is_empty());
        assert!(parse_formula("def bad(x1) := R(z)").is_err());
    }

    #[test]
    fn witness_round_trip() {
        let min = PartialOperation::from_fn(2, 2, |t| t[0].min(t[1])).unwrap();
        let w = crate::clones::find_violation(&min, &r_b()).unwrap().unwrap();
        let back = parse_witness(&write_witness(&w)).unwrap();
        assert_eq!(back.rows, w.rows);
        assert_eq!(back.image, w.image);
        assert!(back.replays(&r_b()));
    }

    #[test]
    fn saturation_map_lines() {
        let (_, m) = crate::extensions::saturate(&crate::extensions::fixtures::r_ex()).unwrap();
        let s = write_saturation_map(&m);
        assert_eq!(s.lines().count(), 5);
        assert!(s.starts_with("col 11 from 7 tau 131\n"));
    }
}
