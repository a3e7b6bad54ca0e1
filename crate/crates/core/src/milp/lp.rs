//! CPLEX-style LP text: writer and a reader for the same dialect.
//!
//! ```text
//! \ model name
//! Maximize
//!  obj: 2 x + 3 y + 1.5
//! Subject To
//!  c1: x + y <= 4
//! Bounds
//!  -inf <= u <= 10
//! Binary
//!  x
//! General
//!  z
//! End
//! ```
//!
//! Rows keep build order; the Bounds, Binary and General sections list
//! variables in name order. Numbers carry 12 significant digits and integral
//! values are printed without a fraction. Long rows wrap onto continuation
//! lines that begin with a sign.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use super::model::{MilpModel, ObjectiveSense, RowSense, VarKind};
use super::MilpError;

const WRAP: usize = 200;

/// `v` with 12 significant digits and no trailing zeros.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = 11 - mag;
    if (0..=20).contains(&decimals) {
        let s = format!("{:.*}", decimals as usize, v);
        let s = s.trim_end_matches('0').trim_end_matches('.');
        s.to_string()
    } else {
        let s = format!("{:.11e}", v);
        let (mant, exp) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{exp}")
    }
}

fn push_terms(out: &mut String, line_start: &mut usize, terms: &[(usize, f64)], model: &MilpModel) {
    for (n, &(v, c)) in terms.iter().enumerate() {
        let name = &model.variables[v].name;
        let mag = c.abs();
        let coef = if mag == 1.0 {
            String::new()
        } else {
            format!("{} ", fmt_num(mag))
        };
        let piece = match (n, c < 0.0) {
            (0, false) => format!("{coef}{name}"),
            (0, true) => format!("- {coef}{name}"),
            (_, false) => format!(" + {coef}{name}"),
            (_, true) => format!(" - {coef}{name}"),
        };
        if out.len() - *line_start + piece.len() > WRAP && n > 0 {
            out.push('\n');
            *line_start = out.len();
            out.push(' ');
        }
        out.push_str(&piece);
    }
}

/// Renders `model` as LP text. Rejects models with bad or clashing names.
pub fn write_lp(model: &MilpModel) -> Result<String, MilpError> {
    let mut check = model.clone();
    check.reindex()?;
    let mut out = String::new();
    writeln!(out, "\\ {}", model.name).ok();
    out.push_str(match model.objective_sense() {
        ObjectiveSense::Maximize => "Maximize\n",
        ObjectiveSense::Minimize => "Minimize\n",
    });
    let mut line_start = out.len();
    out.push_str(" obj: ");
    let mut obj = model.objective.clone();
    obj.sort_by(|a, b| model.variables[a.0].name.cmp(&model.variables[b.0].name));
    push_terms(&mut out, &mut line_start, &obj, model);
    let k = model.objective_constant;
    if obj.is_empty() {
        out.push_str(&fmt_num(k));
    } else if k != 0.0 {
        let sign = if k < 0.0 { '-' } else { '+' };
        write!(out, " {sign} {}", fmt_num(k.abs())).ok();
    }
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        line_start = out.len();
        write!(out, " {}: ", c.name).ok();
        if c.terms.is_empty() {
            let first = model
                .variables
                .first()
                .ok_or(MilpError::EmptyRow(c.name.clone()))?;
            write!(out, "0 {}", first.name).ok();
        } else {
            push_terms(&mut out, &mut line_start, &c.terms, model);
        }
        writeln!(out, " {} {}", c.sense.symbol(), fmt_num(c.rhs)).ok();
    }
    let mut order: Vec<usize> = (0..model.variables.len()).collect();
    order.sort_by(|&a, &b| model.variables[a].name.cmp(&model.variables[b].name));
    out.push_str("Bounds\n");
    for &i in &order {
        let v = &model.variables[i];
        let (lo, hi) = (v.lower, v.upper);
        let default = match v.kind {
            VarKind::Binary => lo == 0.0 && hi == 1.0,
            _ => lo == 0.0 && hi == f64::INFINITY,
        };
        if default {
            continue;
        }
        let line = if lo == hi {
            format!(" {} = {}", v.name, fmt_num(lo))
        } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            format!(" {} free", v.name)
        } else if lo == f64::NEG_INFINITY {
            format!(" -inf <= {} <= {}", v.name, fmt_num(hi))
        } else if hi == f64::INFINITY {
            format!(" {} >= {}", v.name, fmt_num(lo))
        } else {
            format!(" {} <= {} <= {}", fmt_num(lo), v.name, fmt_num(hi))
        };
        out.push_str(&line);
        out.push('\n');
    }
    for (kind, header) in [(VarKind::Binary, "Binary"), (VarKind::Integer, "General")] {
        let names: Vec<&str> = order
            .iter()
            .map(|&i| &model.variables[i])
            .filter(|v| v.kind == kind)
            .map(|v| v.name.as_str())
            .collect();
        if !names.is_empty() {
            out.push_str(header);
            out.push('\n');
            for n in names {
                writeln!(out, " {n}").ok();
            }
        }
    }
    out.push_str("End\n");
    Ok(out)
}

pub fn export_lp(model: &MilpModel, path: &Path) -> Result<(), MilpError> {
    let text = write_lp(model)?;
    crate::util::write_atomic(path, text.as_bytes()).map_err(MilpError::Io)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Rows,
    Bounds,
    Binary,
    General,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "maximize" | "maximise" | "max" | "minimize" | "minimise" | "min" => {
            Some(Section::Objective)
        }
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Rows),
        "bounds" | "bound" => Some(Section::Bounds),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "general" | "generals" | "gen" => Some(Section::General),
        "end" => Some(Section::None),
        _ => None,
    }
}

fn parse_num(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "+infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn parse_sense(tok: &str) -> Option<RowSense> {
    match tok {
        "<=" | "=<" | "<" => Some(RowSense::Le),
        ">=" | "=>" | ">" => Some(RowSense::Ge),
        "=" => Some(RowSense::Eq),
        _ => None,
    }
}

struct Reader {
    model: MilpModel,
    declared: HashMap<String, usize>,
    bounded: HashSet<usize>,
}

impl Reader {
    fn var(&mut self, name: &str) -> Result<usize, MilpError> {
        if let Some(&i) = self.declared.get(name) {
            return Ok(i);
        }
        let i = self
            .model
            .add_var(name, 0.0, f64::INFINITY, VarKind::Continuous)?;
        self.declared.insert(name.to_string(), i);
        Ok(i)
    }

    /// Linear expression: returns terms and the constant part.
    fn expr(&mut self, toks: &[&str], line: usize) -> Result<(Vec<(usize, f64)>, f64), MilpError> {
        let mut terms = Vec::new();
        let mut constant = 0.0;
        let mut sign = 1.0;
        let mut coef: Option<f64> = None;
        for &tok in toks {
            match tok {
                "+" => sign = 1.0,
                "-" => sign = -sign,
                _ => {
                    if let Some(v) = parse_num(tok) {
                        if let Some(prev) = coef.take() {
                            constant += prev;
                        }
                        coef = Some(sign * v);
                        sign = 1.0;
                    } else {
                        let idx = self.var(tok)?;
                        terms.push((idx, coef.take().unwrap_or(sign)));
                        sign = 1.0;
                    }
                }
            }
        }
        if let Some(c) = coef {
            constant += c;
        }
        if sign != 1.0 {
            return Err(MilpError::Parse {
                line,
                message: "dangling sign".into(),
            });
        }
        Ok((terms, constant))
    }
}

fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// Reads LP text in the dialect written by [`write_lp`].
pub fn parse_lp(text: &str) -> Result<MilpModel, MilpError> {
    let mut r = Reader {
        model: MilpModel::default(),
        declared: HashMap::new(),
        bounded: HashSet::new(),
    };
    let mut section = Section::None;
    // statements of the objective and row sections, with their first line
    let mut statements: Vec<(Section, usize, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        if n == 0 {
            if let Some(name) = raw.strip_prefix("\\ ") {
                r.model.name = name.trim().to_string();
            }
        }
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            if s == Section::Objective {
                r.model.sense = Some(if line.to_ascii_lowercase().starts_with("max") {
                    ObjectiveSense::Maximize
                } else {
                    ObjectiveSense::Minimize
                });
            }
            section = s;
            continue;
        }
        match section {
            Section::Objective | Section::Rows => {
                let continuation = raw.starts_with(char::is_whitespace)
                    && (line.starts_with('+') || line.starts_with('-'));
                match statements.last_mut() {
                    Some((s, _, text)) if continuation && *s == section => {
                        text.push(' ');
                        text.push_str(line);
                    }
                    _ => statements.push((section, line_no, line.to_string())),
                }
            }
            Section::Bounds => {
                let toks = tokens(line);
                let t: Vec<&str> = toks.iter().map(String::as_str).collect();
                let bad = || MilpError::Parse {
                    line: line_no,
                    message: format!("bad bound `{line}`"),
                };
                match t.as_slice() {
                    [name, free] if free.eq_ignore_ascii_case("free") => {
                        let i = r.var(name)?;
                        r.model.variables[i].lower = f64::NEG_INFINITY;
                        r.model.variables[i].upper = f64::INFINITY;
                        r.bounded.insert(i);
                    }
                    [lo, "<=", name, "<=", hi] => {
                        let i = r.var(name)?;
                        r.model.variables[i].lower = parse_num(lo).ok_or_else(bad)?;
                        r.model.variables[i].upper = parse_num(hi).ok_or_else(bad)?;
                        r.bounded.insert(i);
                    }
                    [name, op, v] => {
                        let v = parse_num(v).ok_or_else(bad)?;
                        let i = r.var(name)?;
                        let var = &mut r.model.variables[i];
                        match parse_sense(op).ok_or_else(bad)? {
                            RowSense::Le => var.upper = v,
                            RowSense::Ge => var.lower = v,
                            RowSense::Eq => {
                                var.lower = v;
                                var.upper = v;
                            }
                        }
                        r.bounded.insert(i);
                    }
                    _ => return Err(bad()),
                }
            }
            Section::Binary | Section::General => {
                for name in line.split_whitespace() {
                    let i = r.var(name)?;
                    let var = &mut r.model.variables[i];
                    if section == Section::Binary {
                        var.kind = VarKind::Binary;
                        if !r.bounded.contains(&i) {
                            var.upper = 1.0;
                        }
                    } else {
                        var.kind = VarKind::Integer;
                    }
                }
            }
            Section::None => {
                return Err(MilpError::Parse {
                    line: line_no,
                    message: format!("text outside any section: `{line}`"),
                })
            }
        }
    }
    for (section, line, text) in statements {
        let (label, body) = match text.split_once(':') {
            Some((l, b)) => (l.trim().to_string(), b.to_string()),
            None => (String::new(), text.clone()),
        };
        let toks = tokens(&body);
        let t: Vec<&str> = toks.iter().map(String::as_str).collect();
        if section == Section::Objective {
            let (terms, constant) = r.expr(&t, line)?;
            r.model.set_objective(terms, constant);
            continue;
        }
        let pos = t
            .iter()
            .position(|tok| parse_sense(tok).is_some())
            .ok_or(MilpError::Parse {
                line,
                message: "row without a sense".into(),
            })?;
        let sense = parse_sense(t[pos]).expect("checked");
        let rhs = match &t[pos + 1..] {
            [v] => parse_num(v),
            ["-", v] => parse_num(v).map(|x| -x),
            _ => None,
        }
        .ok_or(MilpError::Parse {
            line,
            message: "bad right-hand side".into(),
        })?;
        let (terms, constant) = r.expr(&t[..pos], line)?;
        let name = if label.is_empty() {
            format!("r{}", r.model.n_rows() + 1)
        } else {
            label
        };
        // a `0 x` placeholder row is read back as empty
        let terms: Vec<(usize, f64)> = terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
        r.model.add_row(name, terms, sense, rhs - constant)?;
    }
    Ok(r.model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(fmt_num(150.0), "150");
        assert_eq!(fmt_num(-2.0), "-2");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(2.0 / 3.0 * 1e-9), "6.66666666667e-10");
        assert_eq!(fmt_num(123456.789), "123456.789");
    }
}
