//! MPS reader and writer.
//!
//! The writer uses the fixed-format column layout with one matrix entry per
//! line. Numbers are written in their shortest round-trip form, so a field
//! may run past its nominal width; the reader splits on whitespace. The
//! objective row is `OBJ`; its RHS entry holds the negated objective
//! constant. Binary columns carry a `BV` bound.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{MilpModel, Relation, VarKind};

const FIELD: usize = 8;
const OBJ: &str = "OBJ";

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {message}")]
pub struct MpsError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, MpsError> {
    Err(MpsError {
        line,
        message: message.into(),
    })
}

/// Original names of mangled columns and rows, index-aligned with the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NameMap {
    /// `(mps name, original name)` per column, empty when columns kept their names.
    pub columns: Vec<(String, String)>,
    pub rows: Vec<(String, String)>,
}

impl NameMap {
    pub fn is_empty(&self) -> bool {
        self.columns.is_empty() && self.rows.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsExport {
    pub text: String,
    /// Present when any name had to be replaced.
    pub names: Option<NameMap>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= FIELD
        && s.is_ascii()
        && !s.starts_with('$')
        && !s.starts_with('*')
        && s.chars().all(|c| c.is_ascii_graphic())
}

fn names_or_mangled<'a>(
    names: impl ExactSizeIterator<Item = &'a str> + Clone,
    prefix: char,
    reserved: &[&str],
) -> (Vec<String>, Vec<(String, String)>) {
    let mut seen = std::collections::HashSet::new();
    let keep = names
        .clone()
        .all(|n| valid_name(n) && !reserved.contains(&n) && seen.insert(n));
    if keep {
        return (names.map(str::to_owned).collect(), Vec::new());
    }
    let mangled: Vec<String> = (1..=names.len()).map(|i| format!("{prefix}{i:07}")).collect();
    let sidecar = mangled
        .iter()
        .cloned()
        .zip(names.map(str::to_owned))
        .collect();
    (mangled, sidecar)
}

/// Shortest text that parses back to exactly `x`.
pub fn format_number(x: f64) -> String {
    let plain = format!("{x}");
    let exp = format!("{x:e}");
    if exp.len() < plain.len() {
        exp
    } else {
        plain
    }
}

fn entry(out: &mut String, a: &str, b: &str, value: f64) {
    let _ = writeln!(out, "    {a:<FIELD$}  {b:<FIELD$}  {}", format_number(value));
}

/// Writes `model` as MPS text.
pub fn export_mps(model: &MilpModel) -> MpsExport {
    let (cols, col_map) = names_or_mangled(model.variables.iter().map(|v| v.name.as_str()), 'C', &[]);
    let (rows, row_map) = names_or_mangled(model.constraints.iter().map(|c| c.name.as_str()), 'R', &[OBJ]);

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, c) in model.constraints.iter().enumerate() {
        for &(j, a) in &c.coeffs {
            by_col[j].push((i, a));
        }
    }
    let mut obj = vec![0.0; model.num_vars()];
    for &(j, c) in &model.objective {
        obj[j] = c;
    }

    let mut out = String::new();
    let name = model.name.split_whitespace().collect::<Vec<_>>().join("_");
    let _ = writeln!(out, "NAME          {name}");
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {OBJ}");
    for (c, n) in model.constraints.iter().zip(&rows) {
        let t = match c.relation {
            Relation::Le => 'L',
            Relation::Eq => 'E',
            Relation::Ge => 'G',
        };
        let _ = writeln!(out, " {t}  {n}");
    }
    out.push_str("COLUMNS\n");
    for (j, cname) in cols.iter().enumerate() {
        if obj[j] != 0.0 || by_col[j].is_empty() {
            entry(&mut out, cname, OBJ, obj[j]);
        }
        for &(i, a) in &by_col[j] {
            entry(&mut out, cname, &rows[i], a);
        }
    }
    out.push_str("RHS\n");
    if model.objective_constant != 0.0 {
        entry(&mut out, "RHS", OBJ, -model.objective_constant);
    }
    for (c, n) in model.constraints.iter().zip(&rows) {
        if c.rhs != 0.0 {
            entry(&mut out, "RHS", n, c.rhs);
        }
    }
    out.push_str("RANGES\n");
    out.push_str("BOUNDS\n");
    for (v, n) in model.variables.iter().zip(&cols) {
        let mut bound = |kind: &str, value: Option<f64>| {
            let _ = match value {
                Some(x) => writeln!(out, " {kind} BND       {n:<FIELD$}  {}", format_number(x)),
                None => writeln!(out, " {kind} BND       {n}"),
            };
        };
        let (lo, up) = (v.lower, v.upper);
        match v.kind {
            VarKind::Binary => {
                bound("BV", None);
                if lo != 0.0 {
                    bound("LO", Some(lo));
                }
                if up != 1.0 {
                    bound("UP", Some(up));
                }
            }
            VarKind::Continuous => {
                if lo == up {
                    bound("FX", Some(lo));
                } else if lo == f64::NEG_INFINITY && up == f64::INFINITY {
                    bound("FR", None);
                } else {
                    if lo == f64::NEG_INFINITY {
                        bound("MI", None);
                    } else if lo != 0.0 || up < 0.0 {
                        bound("LO", Some(lo));
                    }
                    if up != f64::INFINITY {
                        bound("UP", Some(up));
                    }
                }
            }
        }
    }
    out.push_str("ENDATA\n");

    let names = NameMap {
        columns: col_map,
        rows: row_map,
    };
    MpsExport {
        text: out,
        names: (!names.is_empty()).then_some(names),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Name,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    End,
}

fn parse_num(tok: &str, line: usize) -> Result<f64, MpsError> {
    match tok.parse::<f64>() {
        Ok(x) if x.is_nan() => err(line, format!("`{tok}` is not a number")),
        Ok(x) if x >= 1e30 => Ok(f64::INFINITY),
        Ok(x) if x <= -1e30 => Ok(f64::NEG_INFINITY),
        Ok(x) => Ok(x),
        Err(_) => err(line, format!("`{tok}` is not a number")),
    }
}

/// Parses MPS text into a model. Strict about section order and about
/// references to undeclared rows or columns.
pub fn parse_mps(text: &str) -> Result<MilpModel, MpsError> {
    let mut model = MilpModel::new("");
    let mut section = Section::Name;
    let mut seen_name = false;
    let mut obj_row: Option<String> = None;
    let mut row_index = std::collections::HashMap::<String, usize>::new();
    let mut rows: Vec<(String, Relation)> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut objective: Vec<(usize, f64)> = Vec::new();
    let mut constant = 0.0;
    let mut integer_block = false;
    let mut current: Option<String> = None;

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            let mut toks = raw.split_whitespace();
            let head = toks.next().unwrap_or_default();
            let next = match head {
                "NAME" => Section::Name,
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                other => return err(line, format!("unknown section `{other}`")),
            };
            if next == Section::Name {
                if seen_name {
                    return err(line, "NAME section repeated");
                }
                seen_name = true;
                model.name = raw[4..].trim().to_owned();
            } else if !seen_name {
                return err(line, "missing NAME section");
            } else if next <= section {
                return err(line, format!("section `{head}` out of order"));
            }
            if next == Section::End {
                section = next;
                break;
            }
            section = next;
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match section {
            Section::Name => return err(line, "data before the first section"),
            Section::End => unreachable!(),
            Section::Rows => {
                let [kind, name] = toks[..] else {
                    return err(line, "ROWS entry needs a type and a name");
                };
                let rel = match kind {
                    "N" => {
                        if obj_row.is_some() {
                            return err(line, "more than one objective row");
                        }
                        obj_row = Some(name.to_owned());
                        continue;
                    }
                    "L" => Relation::Le,
                    "E" => Relation::Eq,
                    "G" => Relation::Ge,
                    other => return err(line, format!("unknown row type `{other}`")),
                };
                if row_index.insert(name.to_owned(), rows.len()).is_some() {
                    return err(line, format!("row `{name}` declared twice"));
                }
                rows.push((name.to_owned(), rel));
                rhs.push(0.0);
            }
            Section::Columns => {
                if toks.len() == 3 && toks[1] == "'MARKER'" {
                    integer_block = match toks[2] {
                        "'INTORG'" => true,
                        "'INTEND'" => false,
                        other => return err(line, format!("unknown marker `{other}`")),
                    };
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return err(line, "COLUMNS entry needs a column and one or two (row, value) pairs");
                }
                let col = toks[0];
                if current.as_deref() != Some(col) {
                    if model.column(col).is_some() {
                        return err(line, format!("column `{col}` is not contiguous"));
                    }
                    let (kind, up) = if integer_block {
                        (VarKind::Binary, 1.0)
                    } else {
                        (VarKind::Continuous, f64::INFINITY)
                    };
                    model.add_var(col, kind, 0.0, up);
                    entries.push(Vec::new());
                    current = Some(col.to_owned());
                }
                let j = model.num_vars() - 1;
                for pair in toks[1..].chunks(2) {
                    let value = parse_num(pair[1], line)?;
                    if !value.is_finite() {
                        return err(line, "matrix coefficients must be finite");
                    }
                    if Some(pair[0]) == obj_row.as_deref() {
                        objective.push((j, value));
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        entries[j].push((i, value));
                    } else {
                        return err(line, format!("column `{col}` references undeclared row `{}`", pair[0]));
                    }
                }
            }
            Section::Rhs => {
                if toks.len() != 3 && toks.len() != 5 {
                    return err(line, "RHS entry needs a set name and one or two (row, value) pairs");
                }
                for pair in toks[1..].chunks(2) {
                    let value = parse_num(pair[1], line)?;
                    if Some(pair[0]) == obj_row.as_deref() {
                        constant = -value;
                    } else if let Some(&i) = row_index.get(pair[0]) {
                        rhs[i] = value;
                    } else {
                        return err(line, format!("RHS for undeclared row `{}`", pair[0]));
                    }
                }
            }
            Section::Ranges => return err(line, "RANGES entries are not supported"),
            Section::Bounds => {
                if toks.len() < 3 {
                    return err(line, "BOUNDS entry needs a type, a set name and a column");
                }
                let (kind, col) = (toks[0], toks[2]);
                let Some(j) = model.column(col) else {
                    return err(line, format!("bound for undeclared column `{col}`"));
                };
                let value = match (kind, toks.get(3)) {
                    ("FR" | "MI" | "PL" | "BV", _) => None,
                    (_, Some(t)) => Some(parse_num(t, line)?),
                    (_, None) => return err(line, format!("bound `{kind}` needs a value")),
                };
                let v = &mut model.variables[j];
                match (kind, value) {
                    ("UP", Some(x)) => v.upper = x,
                    ("LO", Some(x)) => v.lower = x,
                    ("FX", Some(x)) => {
                        v.lower = x;
                        v.upper = x;
                    }
                    ("FR", _) => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    ("MI", _) => v.lower = f64::NEG_INFINITY,
                    ("PL", _) => v.upper = f64::INFINITY,
                    ("BV", _) => {
                        v.kind = VarKind::Binary;
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    (other, _) => return err(line, format!("unknown bound type `{other}`")),
                }
            }
        }
    }
    if section != Section::End {
        return err(text.lines().count().max(1), "missing ENDATA");
    }

    let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); rows.len()];
    for (j, col) in entries.iter().enumerate() {
        for &(i, a) in col {
            by_row[i].push((j, a));
        }
    }
    for (((name, rel), coeffs), b) in rows.into_iter().zip(by_row).zip(rhs) {
        model.add_row(name, coeffs, rel, b);
    }
    model.set_objective(objective, constant);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.0, -2.5, 0.1, 1e-9, 123456789.0, 1e20, 0.067216, -3.0e-300] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_number(5.0), "5");
        assert_eq!(format_number(1e-9), "1e-9");
    }

    #[test]
    fn empty_model_parses_back() {
        let m = MilpModel::new("empty");
        let text = export_mps(&m).text;
        assert_eq!(text, "NAME          empty\nROWS\n N  OBJ\nCOLUMNS\nRHS\nRANGES\nBOUNDS\nENDATA\n");
        assert_eq!(parse_mps(&text).unwrap(), m);
    }

    #[test]
    fn long_names_are_mangled_consistently() {
        let mut m = MilpModel::new("t");
        let x = m.add_var("a_very_long_name", VarKind::Continuous, 0.0, 4.0);
        let y = m.add_var("y", VarKind::Binary, 0.0, 1.0);
        m.add_row("r", [(x, 1.0), (y, 1.0)], Relation::Le, 3.0);
        let out = export_mps(&m);
        let names = out.names.unwrap();
        assert_eq!(names.columns[0], ("C0000001".into(), "a_very_long_name".into()));
        assert_eq!(names.columns[1], ("C0000002".into(), "y".into()));
        assert!(names.rows.is_empty());
        let back = parse_mps(&out.text).unwrap();
        assert_eq!(back.variables[0].name, "C0000001");
        assert_eq!(export_mps(&back).text, out.text);
    }

    #[test]
    fn row_named_obj_is_mangled() {
        let mut m = MilpModel::new("t");
        let x = m.add_var("x", VarKind::Continuous, 0.0, 1.0);
        m.add_row("OBJ", [(x, 1.0)], Relation::Le, 1.0);
        let out = export_mps(&m);
        assert_eq!(out.names.unwrap().rows[0].0, "R0000001");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = "NAME x\nROWS\n N  OBJ\nFOO\nENDATA\n";
        let e = parse_mps(bad).unwrap_err();
        assert_eq!(e.line, 4);
        assert!(e.message.contains("unknown section"));

        let bad = "NAME x\nROWS\n N  OBJ\n L  r\nCOLUMNS\n    x  r  1\nRHS\n    RHS  q  2\nENDATA\n";
        let e = parse_mps(bad).unwrap_err();
        assert_eq!(e.line, 8);
        assert!(e.message.contains("undeclared row"));

        let bad = "NAME x\nCOLUMNS\nROWS\nENDATA\n";
        assert_eq!(parse_mps(bad).unwrap_err().line, 3);
    }

    #[test]
    fn bounds_kinds_round_trip() {
        let mut m = MilpModel::new("b");
        let inf = f64::INFINITY;
        let cols = [
            m.add_var("fr", VarKind::Continuous, -inf, inf),
            m.add_var("mi", VarKind::Continuous, -inf, 2.0),
            m.add_var("lo", VarKind::Continuous, 1.5, inf),
            m.add_var("fx", VarKind::Continuous, 3.0, 3.0),
            m.add_var("neg", VarKind::Continuous, 0.0, -1.0),
            m.add_var("bz", VarKind::Binary, 0.0, 0.0),
        ];
        m.add_row("r", cols.iter().map(|&j| (j, 1.0)), Relation::Ge, -7.0);
        m.set_objective([(cols[0], 1.0)], 2.5);
        let text = export_mps(&m).text;
        let back = parse_mps(&text).unwrap();
        assert_eq!(back, m);
    }
}
