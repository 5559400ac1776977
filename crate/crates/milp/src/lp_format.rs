//! LP file export and a parser for the subset this crate writes.
//!
//! Coefficients are written with 17 significant digits so that a round trip
//! reproduces the model bit for bit. Lines end in LF.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{MilpError, Result};
use crate::model::{LinExpr, MilpModel, Sense, VarKind};

/// Terms per output line before wrapping.
const TERMS_PER_LINE: usize = 6;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn bound(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        num(x)
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], model: &MilpModel) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&model.variables.first().map_or("x", |v| v.name.as_str()).to_owned());
        return;
    }
    for (i, &(v, c)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c.is_sign_negative() { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", num(c.abs()), model.variables[v].name);
    }
}

/// Renders the model in LP format.
pub fn to_lp_string(model: &MilpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ signalflow split optimization\n");
    out.push_str("Maximize\n obj:");
    write_terms(&mut out, &model.objective, model);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, &c.coefs, model);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), num(c.rhs));
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {} free", v.name);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", bound(v.lower), v.name, bound(v.upper));
        }
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(model: &MilpModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_lp_string(model))?;
    Ok(())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    End,
}

struct Token {
    text: String,
    line: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> MilpError {
    MilpError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_number(tok: &Token) -> Result<f64> {
    match tok.text.as_str() {
        "+inf" | "inf" | "+infinity" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|_| parse_err(tok.line, format!("expected a number, found {t:?}"))),
    }
}

/// Reads a model written by [`to_lp_string`]. Variables appear in the order
/// of the Bounds section.
pub fn parse_lp(text: &str) -> Result<MilpModel> {
    let mut section = Section::None;
    let mut objective: Vec<Token> = Vec::new();
    let mut constraints: Vec<Token> = Vec::new();
    let mut bounds: Vec<Vec<Token>> = Vec::new();
    let mut binaries: Vec<Token> = Vec::new();
    for (i, raw) in text.split('\n').enumerate() {
        let line = i + 1;
        let content = raw.split('\\').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let header = match content.to_ascii_lowercase().as_str() {
            "maximize" | "maximise" | "max" => Some(Section::Objective),
            "subject to" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "binaries" | "binary" => Some(Section::Binaries),
            "end" => Some(Section::End),
            "minimize" | "minimise" | "min" => {
                return Err(parse_err(line, "only maximization models are supported"))
            }
            _ => None,
        };
        if let Some(s) = header {
            section = s;
            continue;
        }
        let tokens = content.split_whitespace().map(|t| Token {
            text: t.to_owned(),
            line,
        });
        match section {
            Section::Objective => objective.extend(tokens),
            Section::Constraints => constraints.extend(tokens),
            Section::Bounds => bounds.push(tokens.collect()),
            Section::Binaries => binaries.extend(tokens),
            Section::None | Section::End => {
                return Err(parse_err(line, format!("unexpected content {content:?}")))
            }
        }
    }
    if section != Section::End {
        return Err(parse_err(text.lines().count(), "missing End"));
    }

    let mut model = MilpModel::new();
    for b in &bounds {
        match b.as_slice() {
            [name, free] if free.text == "free" => {
                model.continuous(name.text.clone(), f64::NEG_INFINITY, f64::INFINITY)?;
            }
            [lo, le1, name, le2, hi] if le1.text == "<=" && le2.text == "<=" => {
                model.continuous(name.text.clone(), parse_number(lo)?, parse_number(hi)?)?;
            }
            other => {
                let line = other.first().map_or(0, |t| t.line);
                return Err(parse_err(line, "unrecognized bound"));
            }
        }
    }
    for tok in &binaries {
        let v = model
            .var_index(&tok.text)
            .ok_or_else(|| parse_err(tok.line, format!("binary {} has no bounds", tok.text)))?;
        model.variables[v].kind = VarKind::Binary;
    }

    let lookup = |model: &MilpModel, tok: &Token| {
        model
            .var_index(&tok.text)
            .ok_or_else(|| parse_err(tok.line, format!("undeclared variable {}", tok.text)))
    };
    // `[name:] (± coef var)* [sense rhs]`
    let read_terms = |model: &MilpModel, toks: &[Token], mut i: usize| -> Result<(LinExpr, usize)> {
        let mut expr = LinExpr::default();
        while i < toks.len() && matches!(toks[i].text.as_str(), "+" | "-") {
            let sign = if toks[i].text == "-" { -1.0 } else { 1.0 };
            let coef = toks.get(i + 1).ok_or_else(|| parse_err(toks[i].line, "dangling sign"))?;
            let var = toks.get(i + 2).ok_or_else(|| parse_err(coef.line, "missing variable"))?;
            expr.add_term(lookup(model, var)?, sign * parse_number(coef)?);
            i += 3;
        }
        // an empty expression is written as `0 <first variable>`
        if expr.terms.is_empty() && i + 1 < toks.len() && toks[i].text == "0" {
            lookup(model, &toks[i + 1])?;
            i += 2;
        }
        Ok((expr, i))
    };

    let obj_start = match objective.first() {
        Some(t) if t.text.ends_with(':') => 1,
        _ => 0,
    };
    let (obj, used) = read_terms(&model, &objective, obj_start)?;
    if used != objective.len() {
        return Err(parse_err(objective[used].line, "trailing objective tokens"));
    }
    model.objective = obj.terms;

    let mut i = 0;
    while i < constraints.len() {
        let name_tok = &constraints[i];
        let name = name_tok
            .text
            .strip_suffix(':')
            .ok_or_else(|| parse_err(name_tok.line, "constraint without a name"))?
            .to_owned();
        let (expr, j) = read_terms(&model, &constraints, i + 1)?;
        let sense_tok = constraints
            .get(j)
            .ok_or_else(|| parse_err(name_tok.line, "constraint without a sense"))?;
        let sense = match sense_tok.text.as_str() {
            "<=" | "=<" | "<" => Sense::Le,
            ">=" | "=>" | ">" => Sense::Ge,
            "=" => Sense::Eq,
            t => return Err(parse_err(sense_tok.line, format!("unknown sense {t}"))),
        };
        let rhs_tok = constraints
            .get(j + 1)
            .ok_or_else(|| parse_err(sense_tok.line, "constraint without a right-hand side"))?;
        let rhs = parse_number(rhs_tok)?;
        model.add_constraint(name, "", &expr, sense, &LinExpr::constant(rhs))?;
        i = j + 2;
    }
    model.validate()?;
    Ok(model)
}

pub fn import_lp(path: impl AsRef<Path>) -> Result<MilpModel> {
    parse_lp(&std::fs::read_to_string(path)?)
}
