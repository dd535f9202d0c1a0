//! CPLEX-style LP text export and a companion parser.
//!
//! Only the subset needed for pure binary programs is produced and accepted:
//! one objective, a `Subject To` block, a `Binary` block listing every
//! variable in index order, and `End`. The `Binary` block fixes variable
//! order on import, so export followed by parse reproduces the instance.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::LpParseError;
use crate::model::{IpInstance, LinearConstraint, Relation, Sense};

const TERMS_PER_LINE: usize = 8;

fn is_lp_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']'))
}

/// Names used on export: the instance's labels when they are all valid,
/// unique LP identifiers, otherwise `x0 .. x{n-1}`.
fn export_names(ip: &IpInstance) -> Vec<String> {
    if let Some(names) = &ip.var_names {
        let mut seen = std::collections::HashSet::new();
        let usable = names.len() == ip.num_vars
            && names
                .iter()
                .all(|n| is_lp_identifier(n) && !is_keyword(n) && seen.insert(n.as_str()));
        if usable {
            return names.clone();
        }
    }
    (0..ip.num_vars).map(|i| format!("x{i}")).collect()
}

fn is_keyword(word: &str) -> bool {
    matches!(
        word.to_ascii_lowercase().as_str(),
        "maximize" | "maximise" | "maximum" | "max" | "minimize" | "minimise" | "minimum"
            | "min" | "subject" | "st" | "s.t." | "such" | "binary" | "binaries" | "bin"
            | "bounds" | "general" | "generals" | "end"
    )
}

fn write_expr(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    for (k, &(var, coef)) in terms.iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if coef.is_sign_negative() { '-' } else { '+' };
        if k == 0 {
            let _ = write!(out, " {} {}", coef, names[var]);
        } else {
            let _ = write!(out, " {} {} {}", sign, coef.abs(), names[var]);
        }
    }
}

/// Renders `ip` as LP text.
pub fn export_lp_text(ip: &IpInstance) -> String {
    let names = export_names(ip);
    let mut out = String::new();
    out.push_str("\\ binary program exported by crew-milp\n");
    out.push_str(match ip.sense {
        Sense::Maximize => "Maximize\n",
        Sense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    write_expr(&mut out, &ip.objective, &names);
    out.push('\n');
    out.push_str("Subject To\n");
    for (i, c) in ip.constraints.iter().enumerate() {
        let _ = write!(out, " r{i}:");
        write_expr(&mut out, &c.terms, &names);
        let _ = writeln!(out, " {} {}", c.relation, c.rhs);
    }
    out.push_str("Binary\n");
    for chunk in names.chunks(TERMS_PER_LINE) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    out
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Label(String),
    Num(f64),
    Plus,
    Minus,
    Rel(Relation),
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum Section {
    Preamble,
    Objective,
    Constraints,
    Binary,
    Done,
}

fn err(line: usize, message: impl Into<String>) -> LpParseError {
    LpParseError {
        line,
        message: message.into(),
    }
}

fn tokenize_line(text: &str, line: usize) -> Result<Vec<Tok>, LpParseError> {
    let mut toks = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            c if c.is_whitespace() => i += 1,
            '\\' => break,
            '+' => {
                toks.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                toks.push(Tok::Minus);
                i += 1;
            }
            '<' | '>' | '=' => {
                let mut op = String::from(c);
                i += 1;
                while i < chars.len() && matches!(chars[i], '<' | '>' | '=') {
                    op.push(chars[i]);
                    i += 1;
                }
                let rel = match op.as_str() {
                    "<=" | "=<" | "<" => Relation::Le,
                    ">=" | "=>" | ">" => Relation::Ge,
                    "=" => Relation::Eq,
                    _ => return Err(err(line, format!("unknown operator `{op}`"))),
                };
                toks.push(Tok::Rel(rel));
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                i += 1;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = matches!(d, '+' | '-') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || matches!(d, '.' | 'e' | 'E') || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| err(line, format!("bad number `{s}`")))?;
                toks.push(Tok::Num(v));
            }
            _ => {
                let start = i;
                while i < chars.len()
                    && !chars[i].is_whitespace()
                    && !matches!(chars[i], '+' | '-' | '<' | '>' | '=' | ':' | '\\')
                {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if i < chars.len() && chars[i] == ':' {
                    i += 1;
                    toks.push(Tok::Label(word));
                } else {
                    toks.push(Tok::Word(word));
                }
            }
        }
    }
    Ok(toks)
}

/// Parses a linear expression `[+|-] [coef] name ...` into `(name, coef)` pairs.
fn parse_expr(toks: &[Tok], line: usize) -> Result<Vec<(String, f64)>, LpParseError> {
    let mut out = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    let mut pending_sign = false;
    for t in toks {
        match t {
            Tok::Plus => pending_sign = true,
            Tok::Minus => {
                sign = -sign;
                pending_sign = true;
            }
            Tok::Num(v) => {
                if coef.is_some() {
                    return Err(err(line, "two coefficients in a row"));
                }
                coef = Some(*v);
            }
            Tok::Word(name) => {
                out.push((name.clone(), sign * coef.unwrap_or(1.0)));
                sign = 1.0;
                coef = None;
                pending_sign = false;
            }
            other => return Err(err(line, format!("unexpected token {other:?} in expression"))),
        }
    }
    if coef.is_some() || pending_sign {
        return Err(err(line, "dangling term in expression"));
    }
    Ok(out)
}

/// Parses text produced by [`export_lp_text`] (or hand-written text in the same subset).
pub fn parse_lp_text(text: &str) -> Result<IpInstance, LpParseError> {
    let mut section = Section::Preamble;
    let mut sense = None;
    let mut objective_toks: Vec<Tok> = Vec::new();
    let mut objective_line = 0;
    // (tokens, first line) per constraint.
    let mut rows: Vec<(Vec<Tok>, usize)> = Vec::new();
    let mut current: Option<(Vec<Tok>, usize)> = None;
    let mut binaries: Vec<String> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        let lower = trimmed.to_ascii_lowercase();
        let header = match lower.as_str() {
            "maximize" | "maximise" | "maximum" | "max" => {
                sense = Some(Sense::Maximize);
                Some(Section::Objective)
            }
            "minimize" | "minimise" | "minimum" | "min" => {
                sense = Some(Sense::Minimize);
                Some(Section::Objective)
            }
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
            "binary" | "binaries" | "bin" => Some(Section::Binary),
            "end" => Some(Section::Done),
            "bounds" | "general" | "generals" => {
                return Err(err(line, format!("section `{trimmed}` is not supported")))
            }
            _ => None,
        };
        if let Some(next) = header {
            if current.is_some() {
                return Err(err(line, "constraint without relation"));
            }
            section = next;
            continue;
        }
        let toks = tokenize_line(trimmed, line)?;
        if toks.is_empty() {
            continue;
        }
        match section {
            Section::Preamble => return Err(err(line, "content before objective section")),
            Section::Done => return Err(err(line, "content after End")),
            Section::Objective => {
                if objective_toks.is_empty() {
                    objective_line = line;
                }
                objective_toks.extend(toks);
            }
            Section::Binary => {
                for t in toks {
                    match t {
                        Tok::Word(w) => binaries.push(w),
                        other => return Err(err(line, format!("unexpected {other:?} in Binary"))),
                    }
                }
            }
            Section::Constraints => {
                let (buf, _) = current.get_or_insert_with(|| (Vec::new(), line));
                buf.extend(toks);
                // A row is complete once a relation is followed by its right-hand side.
                if let Some(pos) = buf.iter().position(|t| matches!(t, Tok::Rel(_))) {
                    let tail = &buf[pos + 1..];
                    let complete = matches!(tail, [Tok::Num(_)] | [Tok::Minus, Tok::Num(_)] | [Tok::Plus, Tok::Num(_)]);
                    if complete {
                        rows.push(current.take().expect("row in progress"));
                    } else if tail.len() >= 2 {
                        return Err(err(line, "malformed right-hand side"));
                    }
                }
            }
        }
    }
    if current.is_some() {
        return Err(err(text.lines().count(), "unterminated constraint"));
    }
    if section != Section::Done {
        return Err(err(text.lines().count(), "missing End"));
    }
    let sense = sense.ok_or_else(|| err(1, "missing objective section"))?;

    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, name) in binaries.iter().enumerate() {
        if index.insert(name.clone(), i).is_some() {
            return Err(err(0, format!("variable `{name}` declared twice")));
        }
    }
    let resolve = |terms: Vec<(String, f64)>, line: usize| -> Result<Vec<(usize, f64)>, LpParseError> {
        terms
            .into_iter()
            .map(|(name, c)| {
                index
                    .get(&name)
                    .map(|&i| (i, c))
                    .ok_or_else(|| err(line, format!("variable `{name}` not declared binary")))
            })
            .collect()
    };

    if let Some(Tok::Label(_)) = objective_toks.first() {
        objective_toks.remove(0);
    }
    let objective = resolve(parse_expr(&objective_toks, objective_line)?, objective_line)?;

    let mut constraints = Vec::with_capacity(rows.len());
    for (mut toks, line) in rows {
        if let Some(Tok::Label(_)) = toks.first() {
            toks.remove(0);
        }
        let pos = toks
            .iter()
            .position(|t| matches!(t, Tok::Rel(_)))
            .expect("row has relation");
        let Tok::Rel(relation) = toks[pos] else {
            unreachable!()
        };
        let rhs = match &toks[pos + 1..] {
            [Tok::Num(v)] | [Tok::Plus, Tok::Num(v)] => *v,
            [Tok::Minus, Tok::Num(v)] => -*v,
            _ => return Err(err(line, "malformed right-hand side")),
        };
        let terms = resolve(parse_expr(&toks[..pos], line)?, line)?;
        constraints.push(LinearConstraint::new(terms, relation, rhs));
    }

    let synthetic = binaries
        .iter()
        .enumerate()
        .all(|(i, n)| *n == format!("x{i}"));
    let ip = IpInstance {
        num_vars: binaries.len(),
        objective,
        sense,
        constraints,
        var_names: if synthetic { None } else { Some(binaries) },
    };
    ip.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(ip)
}
