//! MPS export and import.
//!
//! Output follows the fixed-format field layout (field 1 in columns 2-3,
//! field 2 from column 5, field 3 from column 15, field 4 from column 25).
//! Names longer than eight characters push later fields right, so the reader
//! splits on whitespace rather than on column positions; names therefore must
//! not contain whitespace. Binary columns sit between `INTORG`/`INTEND`
//! markers and always carry explicit bounds, since readers disagree on the
//! default bounds of marked columns and on how `BV` combines with `FX`.
//! Numbers are written in shortest round-trip form, so
//! export -> parse -> export reproduces the file byte for byte.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use crate::error::MpsError;
use crate::model::{Column, ColumnKind, MilpModel, Row, Sense};

/// A name that had to change on export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rename {
    pub kind: &'static str,
    pub index: usize,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone)]
pub struct MpsExport {
    pub text: String,
    pub renames: Vec<Rename>,
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn unique_names<'a>(
    kind: &'static str,
    names: impl Iterator<Item = &'a str>,
    taken: &mut HashSet<String>,
    renames: &mut Vec<Rename>,
) -> Vec<String> {
    let mut out = Vec::new();
    for (index, raw) in names.enumerate() {
        let mut base: String = raw
            .chars()
            .map(|c| if c.is_whitespace() { '_' } else { c })
            .collect();
        if base.is_empty() {
            base = format!("{}{}", &kind[..1], index);
        }
        let mut name = base.clone();
        let mut k = 1;
        while taken.contains(&name) {
            name = format!("{base}_{k}");
            k += 1;
        }
        if name != raw {
            renames.push(Rename {
                kind,
                index,
                from: raw.to_string(),
                to: name.clone(),
            });
        }
        taken.insert(name.clone());
        out.push(name);
    }
    out
}

fn line(out: &mut String, f1: &str, f2: &str, f3: &str, f4: &str) {
    let mut l = format!(" {f1:<2} {f2:<8}");
    if !f3.is_empty() {
        let _ = write!(l, "  {f3:<8}");
    }
    if !f4.is_empty() {
        let _ = write!(l, "  {f4:>12}");
    }
    out.push_str(l.trim_end());
    out.push('\n');
}

/// Writes `model` as MPS text.
pub fn write_mps(model: &MilpModel) -> MpsExport {
    let mut renames = Vec::new();
    let mut row_taken = HashSet::new();
    let obj_name = "COST";
    row_taken.insert(obj_name.to_string());
    let row_names = unique_names(
        "row",
        model.rows.iter().map(|r| r.name.as_str()),
        &mut row_taken,
        &mut renames,
    );
    let mut col_taken = HashSet::new();
    let col_names = unique_names(
        "column",
        model.columns.iter().map(|c| c.name.as_str()),
        &mut col_taken,
        &mut renames,
    );

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.columns.len()];
    for (i, r) in model.rows.iter().enumerate() {
        for &(j, a) in &r.coeffs {
            by_col[j].push((i, a));
        }
    }

    let mut out = String::new();
    let name = if model.name.trim().is_empty() {
        "MODEL".to_string()
    } else {
        model.name.split_whitespace().collect::<Vec<_>>().join("_")
    };
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    line(&mut out, "N", obj_name, "", "");
    for (r, n) in model.rows.iter().zip(&row_names) {
        let t = match r.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        line(&mut out, t, n, "", "");
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for (j, c) in model.columns.iter().enumerate() {
        let cn = &col_names[j];
        let int = c.kind == ColumnKind::Binary;
        if int != in_int {
            line(&mut out, "", "MARKER", "'MARKER'", if int { "'INTORG'" } else { "'INTEND'" });
            in_int = int;
        }
        if c.cost != 0.0 || by_col[j].is_empty() {
            line(&mut out, "", cn, obj_name, &num(c.cost));
        }
        for &(i, a) in &by_col[j] {
            line(&mut out, "", cn, &row_names[i], &num(a));
        }
    }
    if in_int {
        line(&mut out, "", "MARKER", "'MARKER'", "'INTEND'");
    }
    out.push_str("RHS\n");
    for (r, n) in model.rows.iter().zip(&row_names) {
        if r.rhs != 0.0 || r.rhs.is_sign_negative() {
            line(&mut out, "", "RHS", n, &num(r.rhs));
        }
    }
    out.push_str("BOUNDS\n");
    for (c, cn) in model.columns.iter().zip(&col_names) {
        write_bounds(&mut out, c, cn);
    }
    out.push_str("ENDATA\n");
    MpsExport { text: out, renames }
}

fn write_bounds(out: &mut String, c: &Column, cn: &str) {
    let (l, u) = (c.lower, c.upper);
    let bnd = "BND";
    if c.kind == ColumnKind::Binary {
        if l == u {
            line(out, "FX", bnd, cn, &num(l));
        } else {
            if !(l == 0.0 && l.is_sign_positive()) {
                line(out, "LO", bnd, cn, &num(l));
            }
            line(out, "UP", bnd, cn, &num(u));
        }
        return;
    }
    if l == u {
        line(out, "FX", bnd, cn, &num(l));
        return;
    }
    match (l.is_finite(), u.is_finite()) {
        (false, false) => line(out, "FR", bnd, cn, ""),
        (false, true) => {
            line(out, "MI", bnd, cn, "");
            line(out, "UP", bnd, cn, &num(u));
        }
        (true, _) => {
            if !(l == 0.0 && l.is_sign_positive()) {
                line(out, "LO", bnd, cn, &num(l));
            }
            if u.is_finite() {
                line(out, "UP", bnd, cn, &num(u));
            }
        }
    }
}

#[derive(PartialEq)]
enum Section {
    None,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

/// Parses MPS text produced by [`write_mps`] (or any MPS file without RANGES).
/// Marked integer columns and `BV` columns become binaries with default
/// bounds [0, 1].
pub fn parse_mps(input: impl BufRead) -> Result<MilpModel, MpsError> {
    let mut model = MilpModel::default();
    let mut section = Section::None;
    let mut obj_row: Option<String> = None;
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut in_int = false;

    let syntax = |line: usize, message: String| MpsError::Syntax { line, message };
    let parse_num = |line: usize, s: &str| -> Result<f64, MpsError> {
        s.parse::<f64>()
            .map_err(|_| syntax(line, format!("bad number `{s}`")))
    };

    for (ln, raw) in input.lines().enumerate() {
        let ln = ln + 1;
        let raw = raw?;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        if !raw.starts_with(' ') {
            let mut it = raw.split_whitespace();
            let head = it.next().unwrap_or_default();
            section = match head {
                "NAME" => {
                    model.name = it.collect::<Vec<_>>().join(" ");
                    Section::None
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => {
                    return Err(MpsError::Unsupported {
                        section: other.to_string(),
                        line: ln,
                    })
                }
            };
            continue;
        }
        let f: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Rows => {
                if f.len() != 2 {
                    return Err(syntax(ln, "ROWS entry needs type and name".into()));
                }
                let sense = match f[0] {
                    "N" => {
                        if obj_row.is_none() {
                            obj_row = Some(f[1].to_string());
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    t => return Err(syntax(ln, format!("unknown row type `{t}`"))),
                };
                if row_index.insert(f[1].to_string(), model.rows.len()).is_some() {
                    return Err(syntax(ln, format!("duplicate row `{}`", f[1])));
                }
                model.rows.push(Row {
                    name: f[1].to_string(),
                    sense,
                    rhs: 0.0,
                    coeffs: Vec::new(),
                });
            }
            Section::Columns => {
                if f.len() == 3 && f[1] == "'MARKER'" {
                    in_int = match f[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        t => return Err(syntax(ln, format!("unknown marker `{t}`"))),
                    };
                    continue;
                }
                if f.len() != 3 && f.len() != 5 {
                    return Err(syntax(ln, "COLUMNS entry needs name and 1 or 2 pairs".into()));
                }
                let j = *col_index.entry(f[0].to_string()).or_insert_with(|| {
                    let (upper, kind) = if in_int {
                        (1.0, ColumnKind::Binary)
                    } else {
                        (f64::INFINITY, ColumnKind::Continuous)
                    };
                    model.columns.push(Column {
                        name: f[0].to_string(),
                        lower: 0.0,
                        upper,
                        cost: 0.0,
                        kind,
                    });
                    model.columns.len() - 1
                });
                for pair in f[1..].chunks(2) {
                    let v = parse_num(ln, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        model.columns[j].cost = v;
                    } else {
                        let i = *row_index
                            .get(pair[0])
                            .ok_or_else(|| syntax(ln, format!("unknown row `{}`", pair[0])))?;
                        if v != 0.0 {
                            model.rows[i].coeffs.push((j, v));
                        }
                    }
                }
            }
            Section::Rhs => {
                if f.len() != 3 && f.len() != 5 {
                    return Err(syntax(ln, "RHS entry needs set name and 1 or 2 pairs".into()));
                }
                for pair in f[1..].chunks(2) {
                    let v = parse_num(ln, pair[1])?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        continue;
                    }
                    let i = *row_index
                        .get(pair[0])
                        .ok_or_else(|| syntax(ln, format!("unknown row `{}`", pair[0])))?;
                    model.rows[i].rhs = v;
                }
            }
            Section::Bounds => {
                if f.len() < 3 {
                    return Err(syntax(ln, "BOUNDS entry needs type, set and column".into()));
                }
                let j = *col_index
                    .get(f[2])
                    .ok_or_else(|| syntax(ln, format!("unknown column `{}`", f[2])))?;
                let val = || -> Result<f64, MpsError> {
                    f.get(3)
                        .ok_or_else(|| syntax(ln, "bound value missing".into()))
                        .and_then(|s| parse_num(ln, s))
                };
                let c = &mut model.columns[j];
                match f[0] {
                    "UP" => c.upper = val()?,
                    "LO" => c.lower = val()?,
                    "FX" => {
                        let v = val()?;
                        c.lower = v;
                        c.upper = v;
                    }
                    "FR" => {
                        c.lower = f64::NEG_INFINITY;
                        c.upper = f64::INFINITY;
                    }
                    "MI" => c.lower = f64::NEG_INFINITY,
                    "PL" => c.upper = f64::INFINITY,
                    "BV" => {
                        c.kind = ColumnKind::Binary;
                        c.lower = 0.0;
                        c.upper = 1.0;
                    }
                    t => return Err(syntax(ln, format!("unsupported bound type `{t}`"))),
                }
            }
            Section::None | Section::End => {
                return Err(syntax(ln, "data line outside of a section".into()));
            }
        }
    }
    if section != Section::End {
        return Err(MpsError::Syntax {
            line: 0,
            message: "missing ENDATA".into(),
        });
    }
    Ok(model)
}
