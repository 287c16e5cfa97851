//! Extensive-form model in CPLEX LP text format, a reader for that format,
//! and tools for checking the exported model against the direct evaluator.
//!
//! Variables (k scenario, i component, r individual, t epoch 1..=T):
//! `x_i`, `zf` first stage; `xt_k_i_r_t` cumulative replacement indicator;
//! `w_k_i_r_t` its first difference; `z_k_t` setup; `Y_k_i_r` preventive
//! indicator; `u_k_i_r_j`, `v_k_i_r_j` deviation pair over the window
//! `t = T_ir + j`, `j = 0..=T`, for `r >= 1`. The signed difference `y` is
//! substituted into the pair's defining row. With the identity
//! `c_pr Y + c_cr (1 - Y) - c_cr (1 - x̃_T) = (c_pr - c_cr) Y + c_cr x̃_T`
//! the objective has no constant term.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Schedule, SystemSpec};
use crate::oracle::Budget;
use crate::scenario::ScenarioSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub name: String,
    pub terms: Vec<(String, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LpModel {
    pub minimize: bool,
    pub objective: Vec<(String, f64)>,
    pub rows: Vec<LpRow>,
    /// Explicit `lo <= var <= hi` bounds.
    pub bounds: Vec<(String, f64, f64)>,
    pub binaries: Vec<String>,
}

impl LpModel {
    /// Every distinct variable in first-appearance order.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        let all = self
            .objective
            .iter()
            .map(|t| &t.0)
            .chain(self.rows.iter().flat_map(|r| r.terms.iter().map(|t| &t.0)))
            .chain(self.bounds.iter().map(|b| &b.0))
            .chain(self.binaries.iter());
        for v in all {
            if !seen.contains_key(v) {
                seen.insert(v.clone(), ());
                out.push(v.clone());
            }
        }
        out
    }

    /// Objective value and the names of violated rows and bounds under an
    /// assignment (missing variables read as zero).
    pub fn evaluate(&self, assignment: &HashMap<String, f64>) -> (f64, Vec<String>) {
        let get = |v: &str| assignment.get(v).copied().unwrap_or(0.0);
        let objective = self.objective.iter().map(|(v, c)| c * get(v)).sum();
        let mut violated = Vec::new();
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|(v, c)| c * get(v)).sum();
            if !holds(lhs, row.sense, row.rhs) {
                violated.push(row.name.clone());
            }
        }
        for (v, lo, hi) in &self.bounds {
            let x = get(v);
            if x < lo - 1e-9 || x > hi + 1e-9 {
                violated.push(format!("bound {v}"));
            }
        }
        for v in &self.binaries {
            let x = get(v);
            if x != 0.0 && x != 1.0 {
                violated.push(format!("binary {v}"));
            }
        }
        (objective, violated)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let mut s = String::new();
        s.push_str(if self.minimize {
            "Minimize\n"
        } else {
            "Maximize\n"
        });
        write_expr(&mut s, "obj", &self.objective);
        s.push('\n');
        s.push_str("Subject To\n");
        for row in &self.rows {
            write_expr(&mut s, &row.name, &row.terms);
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, " {op} {}", row.rhs);
        }
        if !self.bounds.is_empty() {
            s.push_str("Bounds\n");
            for (v, lo, hi) in &self.bounds {
                let _ = writeln!(s, " {lo} <= {v} <= {hi}");
            }
        }
        if !self.binaries.is_empty() {
            s.push_str("Binaries\n");
            for chunk in self.binaries.chunks(8) {
                let _ = writeln!(s, " {}", chunk.join(" "));
            }
        }
        s.push_str("End\n");
        out.write_all(s.as_bytes())?;
        Ok(())
    }
}

fn holds(lhs: f64, sense: Sense, rhs: f64) -> bool {
    const EPS: f64 = 1e-9;
    match sense {
        Sense::Le => lhs <= rhs + EPS,
        Sense::Ge => lhs >= rhs - EPS,
        Sense::Eq => (lhs - rhs).abs() <= EPS,
    }
}

fn write_expr(s: &mut String, name: &str, terms: &[(String, f64)]) {
    let _ = write!(s, " {name}:");
    if terms.is_empty() {
        s.push_str(" 0 zf");
    }
    let mut width = 0;
    for (k, (v, c)) in terms.iter().enumerate() {
        let sign = if *c < 0.0 { '-' } else { '+' };
        let piece = if k == 0 && *c >= 0.0 {
            format!(" {} {v}", c.abs())
        } else {
            format!(" {sign} {} {v}", c.abs())
        };
        if width + piece.len() > 200 {
            s.push_str("\n  ");
            width = 0;
        }
        width += piece.len();
        s.push_str(&piece);
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Name(String),
    Label(String),
    Plus,
    Minus,
    Op(Sense),
}

fn lex_line(line: &str, lineno: usize) -> Result<Vec<Token>> {
    let err = |m: String| Error::LpParse {
        line: lineno,
        message: m,
    };
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '\\' {
            break;
        } else if c == '+' {
            out.push(Token::Plus);
            i += 1;
        } else if c == '-' {
            out.push(Token::Minus);
            i += 1;
        } else if c == '<' || c == '>' || c == '=' {
            let mut j = i + 1;
            while j < chars.len() && matches!(chars[j], '<' | '>' | '=') {
                j += 1;
            }
            let op: String = chars[i..j].iter().collect();
            let sense = match op.as_str() {
                "<=" | "=<" | "<" => Sense::Le,
                ">=" | "=>" | ">" => Sense::Ge,
                "=" => Sense::Eq,
                other => return Err(err(format!("unknown operator {other:?}"))),
            };
            out.push(Token::Op(sense));
            i = j;
        } else if c.is_ascii_digit() || c == '.' {
            let mut j = i;
            while j < chars.len()
                && (chars[j].is_ascii_digit()
                    || chars[j] == '.'
                    || ((chars[j] == 'e' || chars[j] == 'E')
                        && j + 1 < chars.len()
                        && (chars[j + 1].is_ascii_digit()
                            || chars[j + 1] == '-'
                            || chars[j + 1] == '+'))
                    || ((chars[j] == '-' || chars[j] == '+')
                        && j > i
                        && matches!(chars[j - 1], 'e' | 'E')))
            {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let value = text
                .parse::<f64>()
                .map_err(|_| err(format!("bad number {text:?}")))?;
            out.push(Token::Num(value));
            i = j;
        } else {
            let mut j = i;
            while j < chars.len()
                && !chars[j].is_whitespace()
                && !matches!(chars[j], '+' | '-' | '<' | '>' | '=' | ':' | '\\')
            {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            if j < chars.len() && chars[j] == ':' {
                out.push(Token::Label(text));
                j += 1;
            } else {
                let lower = text.to_ascii_lowercase();
                if lower == "inf" || lower == "infinity" {
                    out.push(Token::Num(f64::INFINITY));
                } else {
                    out.push(Token::Name(text));
                }
            }
            i = j;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binaries,
    Generals,
}

fn section_of(line: &str) -> Option<(Section, bool)> {
    let l = line.trim().to_ascii_lowercase();
    match l.as_str() {
        "minimize" | "minimum" | "min" => Some((Section::Objective, true)),
        "maximize" | "maximum" | "max" => Some((Section::Objective, false)),
        "subject to" | "such that" | "st" | "s.t." | "st." => Some((Section::Constraints, true)),
        "bounds" | "bound" => Some((Section::Bounds, true)),
        "binaries" | "binary" | "bin" => Some((Section::Binaries, true)),
        "generals" | "general" | "gen" => Some((Section::Generals, true)),
        "end" => Some((Section::None, true)),
        _ => None,
    }
}

/// Folds signed coefficient/name tokens into terms.
fn parse_terms(tokens: &[Token], line: usize) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for t in tokens {
        match t {
            Token::Plus => {}
            Token::Minus => sign = -sign,
            Token::Num(v) => coef = Some(coef.unwrap_or(1.0) * v),
            Token::Name(n) => {
                let c = sign * coef.unwrap_or(1.0);
                match out.iter_mut().find(|(v, _)| v == n) {
                    Some(e) => e.1 += c,
                    None => out.push((n.clone(), c)),
                }
                sign = 1.0;
                coef = None;
            }
            other => {
                return Err(Error::LpParse {
                    line,
                    message: format!("unexpected token {other:?} in expression"),
                })
            }
        }
    }
    if coef.is_some() {
        return Err(Error::LpParse {
            line,
            message: "dangling constant in expression".into(),
        });
    }
    Ok(out)
}

/// Reads the LP text format subset produced by [`LpModel::write`] plus the
/// common variations (unnamed rows, juxtaposed coefficients, `=<`).
pub fn parse_lp(text: &str) -> Result<LpModel> {
    let mut model = LpModel {
        minimize: true,
        ..Default::default()
    };
    let mut section = Section::None;
    let mut pending: Vec<Token> = Vec::new();
    let mut pending_line = 0;
    let mut row_count = 0usize;
    let mut saw_end = false;

    let flush_objective =
        |model: &mut LpModel, pending: &mut Vec<Token>, line: usize| -> Result<()> {
            let body: Vec<Token> = pending
                .drain(..)
                .filter(|t| !matches!(t, Token::Label(_)))
                .collect();
            model.objective = parse_terms(&body, line)?;
            Ok(())
        };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        if let Some((next, flag)) = section_of(raw.split('\\').next().unwrap_or("")) {
            if section == Section::Objective {
                flush_objective(&mut model, &mut pending, pending_line)?;
            }
            if section == Section::Constraints && !pending.is_empty() {
                return Err(Error::LpParse {
                    line: lineno,
                    message: "constraint without right-hand side".into(),
                });
            }
            if next == Section::Objective {
                model.minimize = flag;
            }
            if raw.trim().eq_ignore_ascii_case("end") {
                saw_end = true;
            }
            section = next;
            pending_line = lineno;
            continue;
        }
        let tokens = lex_line(raw, lineno)?;
        if tokens.is_empty() {
            continue;
        }
        match section {
            Section::None => {
                return Err(Error::LpParse {
                    line: lineno,
                    message: "content outside any section".into(),
                })
            }
            Section::Objective => pending.extend(tokens),
            Section::Constraints => {
                if pending.is_empty() {
                    pending_line = lineno;
                }
                pending.extend(tokens);
                // A row is complete once an operator is followed by its rhs.
                if let Some(op_at) = pending.iter().position(|t| matches!(t, Token::Op(_))) {
                    let rhs_tokens = &pending[op_at + 1..];
                    let mut sign = 1.0;
                    let mut rhs = None;
                    for t in rhs_tokens {
                        match t {
                            Token::Minus => sign = -sign,
                            Token::Plus => {}
                            Token::Num(v) => rhs = Some(sign * v),
                            _ => {
                                return Err(Error::LpParse {
                                    line: lineno,
                                    message: "right-hand side must be a constant".into(),
                                })
                            }
                        }
                    }
                    if let Some(rhs) = rhs {
                        let Token::Op(sense) = pending[op_at] else {
                            unreachable!()
                        };
                        let (name, body) = match pending.first() {
                            Some(Token::Label(l)) => (l.clone(), &pending[1..op_at]),
                            _ => {
                                row_count += 1;
                                (format!("R{row_count}"), &pending[..op_at])
                            }
                        };
                        let terms = parse_terms(body, pending_line)?;
                        model.rows.push(LpRow {
                            name,
                            terms,
                            sense,
                            rhs,
                        });
                        pending.clear();
                    }
                }
            }
            Section::Bounds => {
                let bad = || Error::LpParse {
                    line: lineno,
                    message: format!("unsupported bound {raw:?}"),
                };
                let num = |t: &[Token]| -> Option<f64> {
                    match t {
                        [Token::Num(v)] => Some(*v),
                        [Token::Minus, Token::Num(v)] => Some(-v),
                        [Token::Plus, Token::Num(v)] => Some(*v),
                        _ => None,
                    }
                };
                let ops: Vec<usize> = tokens
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| matches!(t, Token::Op(_)))
                    .map(|(k, _)| k)
                    .collect();
                match ops.as_slice() {
                    [a, b] => {
                        let lo = num(&tokens[..*a]).ok_or_else(bad)?;
                        let Token::Name(v) = &tokens[a + 1] else {
                            return Err(bad());
                        };
                        let hi = num(&tokens[b + 1..]).ok_or_else(bad)?;
                        model.bounds.push((v.clone(), lo, hi));
                    }
                    [a] => {
                        let Token::Name(v) = &tokens[0] else {
                            return Err(bad());
                        };
                        let value = num(&tokens[a + 1..]).ok_or_else(bad)?;
                        let (lo, hi) = match tokens[*a] {
                            Token::Op(Sense::Le) => (0.0, value),
                            Token::Op(Sense::Ge) => (value, f64::INFINITY),
                            _ => (value, value),
                        };
                        model.bounds.push((v.clone(), lo, hi));
                    }
                    _ => return Err(bad()),
                }
            }
            Section::Binaries | Section::Generals => {
                for t in tokens {
                    match t {
                        Token::Name(n) if section == Section::Binaries => model.binaries.push(n),
                        Token::Name(_) => {}
                        other => {
                            return Err(Error::LpParse {
                                line: lineno,
                                message: format!("unexpected token {other:?} in variable list"),
                            })
                        }
                    }
                }
            }
        }
    }
    if section == Section::Objective {
        flush_objective(&mut model, &mut pending, pending_line)?;
    }
    if !saw_end {
        return Err(Error::LpParse {
            line: text.lines().count(),
            message: "missing End".into(),
        });
    }
    Ok(model)
}

fn xt(k: usize, i: usize, r: usize, t: u32) -> String {
    format!("xt_{k}_{i}_{r}_{t}")
}
fn wv(k: usize, i: usize, r: usize, t: u32) -> String {
    format!("w_{k}_{i}_{r}_{t}")
}
fn zv(k: usize, t: u32) -> String {
    format!("z_{k}_{t}")
}
fn yv(k: usize, i: usize, r: usize) -> String {
    format!("Y_{k}_{i}_{r}")
}
fn uv(k: usize, i: usize, r: usize, j: u32) -> String {
    format!("u_{k}_{i}_{r}_{j}")
}
fn vv(k: usize, i: usize, r: usize, j: u32) -> String {
    format!("v_{k}_{i}_{r}_{j}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpManifest {
    pub schema: String,
    pub components: usize,
    pub horizon: u32,
    pub scenarios: usize,
    pub individuals: Vec<usize>,
    pub variables: usize,
    pub binaries: usize,
    pub constraints: usize,
    /// `n + 1 + Σ_ω Σ_i [2 q_i T + q_i + 2 (q_i - 1)(T + 1)] + |Ω| T`.
    pub closed_form_variables: usize,
    pub variable_counts: HashMap<String, usize>,
    pub notes: Vec<String>,
}

/// Closed-form variable count of the exported model.
pub fn expected_variable_count(system: &SystemSpec, scenarios: &ScenarioSet) -> usize {
    let t = system.horizon as usize;
    let n = system.n();
    let per: usize = scenarios
        .scenarios
        .iter()
        .map(|sc| {
            let inner: usize = (0..n)
                .map(|i| {
                    let q = sc.individuals(i);
                    2 * q * t + q + 2 * q.saturating_sub(1) * (t + 1)
                })
                .sum();
            inner + t
        })
        .sum();
    n + 1 + per
}

/// Builds the full extensive form over the scenario set.
pub fn build_def_model(system: &SystemSpec, scenarios: &ScenarioSet) -> Result<LpModel> {
    system.validate()?;
    scenarios.validate(system)?;
    let n = system.n();
    let horizon = system.horizon;
    let mut m = LpModel {
        minimize: true,
        ..Default::default()
    };
    let row = |m: &mut LpModel, name: String, terms: Vec<(String, f64)>, sense: Sense, rhs: f64| {
        m.rows.push(LpRow {
            name,
            terms,
            sense,
            rhs,
        });
    };
    let mut binaries: Vec<String> = Vec::new();

    // First stage.
    for i in 0..n {
        binaries.push(format!("x_{i}"));
        m.objective.push((format!("x_{i}"), 0.0));
    }
    binaries.push("zf".into());
    for i in 0..n {
        row(
            &mut m,
            format!("fs_link_{i}"),
            vec![(format!("x_{i}"), 1.0), ("zf".into(), -1.0)],
            Sense::Le,
            0.0,
        );
        if system.components[i].initially_failed {
            row(
                &mut m,
                format!("fs_failed_{i}"),
                vec![(format!("x_{i}"), 1.0)],
                Sense::Eq,
                1.0,
            );
        }
    }
    let mut any: Vec<(String, f64)> = vec![("zf".into(), 1.0)];
    any.extend((0..n).map(|i| (format!("x_{i}"), -1.0)));
    row(&mut m, "fs_setup".into(), any, Sense::Le, 0.0);

    for (k, sc) in scenarios.scenarios.iter().enumerate() {
        let p = sc.probability;
        for t in 1..=horizon {
            binaries.push(zv(k, t));
            m.objective.push((zv(k, t), p * system.setup_cost));
        }
        row(
            &mut m,
            format!("s{k}_zlink"),
            vec![(zv(k, 1), 1.0), ("zf".into(), -1.0)],
            Sense::Eq,
            0.0,
        );
        for i in 0..n {
            let c = &system.components[i];
            let q = sc.individuals(i);
            row(
                &mut m,
                format!("s{k}_na_{i}"),
                vec![(xt(k, i, 0, 1), 1.0), (format!("x_{i}"), -1.0)],
                Sense::Eq,
                0.0,
            );
            for r in 0..q {
                for t in 1..=horizon {
                    binaries.push(xt(k, i, r, t));
                }
                for t in 1..=horizon {
                    binaries.push(wv(k, i, r, t));
                }
                binaries.push(yv(k, i, r));
                m.objective.push((yv(k, i, r), p * (c.cost_pr - c.cost_cr)));
                m.objective.push((xt(k, i, r, horizon), p * c.cost_cr));

                for t in 1..horizon {
                    row(
                        &mut m,
                        format!("s{k}_mono_{i}_{r}_{t}"),
                        vec![(xt(k, i, r, t), 1.0), (xt(k, i, r, t + 1), -1.0)],
                        Sense::Le,
                        0.0,
                    );
                }
                for t in 1..=horizon {
                    let mut terms = vec![(wv(k, i, r, t), 1.0), (xt(k, i, r, t), -1.0)];
                    if t > 1 {
                        terms.push((xt(k, i, r, t - 1), 1.0));
                    }
                    row(&mut m, format!("s{k}_w_{i}_{r}_{t}"), terms, Sense::Eq, 0.0);
                    row(
                        &mut m,
                        format!("s{k}_setup_{i}_{r}_{t}"),
                        vec![(wv(k, i, r, t), 1.0), (zv(k, t), -1.0)],
                        Sense::Le,
                        0.0,
                    );
                }
                if r == 0 {
                    let f = (sc.lifetimes[i][0] as u64).max(1);
                    let mut terms = vec![(yv(k, i, 0), 1.0), (xt(k, i, 0, horizon), -1.0)];
                    if f <= horizon as u64 {
                        terms.push((wv(k, i, 0, f as u32), 1.0));
                        row(
                            &mut m,
                            format!("s{k}_life_{i}_0"),
                            vec![(xt(k, i, 0, f as u32), 1.0)],
                            Sense::Ge,
                            1.0,
                        );
                    }
                    row(&mut m, format!("s{k}_type_{i}_0"), terms, Sense::Eq, 0.0);
                    continue;
                }
                let life = sc.lifetimes[i][r];
                row(
                    &mut m,
                    format!("s{k}_first_{i}_{r}"),
                    vec![(xt(k, i, r, 1), 1.0)],
                    Sense::Eq,
                    0.0,
                );
                for t in 2..=horizon {
                    row(
                        &mut m,
                        format!("s{k}_order_{i}_{r}_{t}"),
                        vec![(xt(k, i, r, t), 1.0), (xt(k, i, r - 1, t - 1), -1.0)],
                        Sense::Le,
                        0.0,
                    );
                }
                for t in 1..=horizon {
                    let due = t as u64 + life as u64;
                    if due <= horizon as u64 {
                        row(
                            &mut m,
                            format!("s{k}_life_{i}_{r}_{t}"),
                            vec![(xt(k, i, r, due as u32), 1.0), (wv(k, i, r - 1, t), -1.0)],
                            Sense::Ge,
                            0.0,
                        );
                    }
                }
                let mut type_terms = vec![(yv(k, i, r), 2.0)];
                for j in 0..=horizon {
                    binaries.push(uv(k, i, r, j));
                    binaries.push(vv(k, i, r, j));
                    let mut dev = vec![(uv(k, i, r, j), 1.0), (vv(k, i, r, j), -1.0)];
                    let at = life as u64 + j as u64;
                    if at <= horizon as u64 {
                        dev.push((wv(k, i, r, at as u32), -1.0));
                    }
                    if j >= 1 {
                        dev.push((wv(k, i, r - 1, j), 1.0));
                    }
                    row(&mut m, format!("s{k}_dev_{i}_{r}_{j}"), dev, Sense::Eq, 0.0);
                    row(
                        &mut m,
                        format!("s{k}_pair_{i}_{r}_{j}"),
                        vec![(uv(k, i, r, j), 1.0), (vv(k, i, r, j), 1.0)],
                        Sense::Le,
                        1.0,
                    );
                    type_terms.push((uv(k, i, r, j), -1.0));
                    type_terms.push((vv(k, i, r, j), -1.0));
                }
                for t in 1..life.min(horizon + 1) {
                    type_terms.push((wv(k, i, r, t), -1.0));
                }
                type_terms.push((xt(k, i, r - 1, horizon), 1.0));
                type_terms.push((xt(k, i, r, horizon), -1.0));
                row(
                    &mut m,
                    format!("s{k}_type_{i}_{r}"),
                    type_terms,
                    Sense::Eq,
                    0.0,
                );
            }
        }
        for t in 1..=horizon {
            let mut terms = vec![(zv(k, t), 1.0)];
            for i in 0..n {
                for r in 0..sc.individuals(i) {
                    terms.push((wv(k, i, r, t), -1.0));
                }
            }
            row(&mut m, format!("s{k}_zcover_{t}"), terms, Sense::Le, 0.0);
        }
    }
    // Merge repeated objective entries (xt_T appears once per individual).
    let mut merged: Vec<(String, f64)> = Vec::new();
    let mut at: HashMap<String, usize> = HashMap::new();
    for (v, c) in m.objective.drain(..) {
        match at.get(&v) {
            Some(&k) => merged[k].1 += c,
            None => {
                at.insert(v.clone(), merged.len());
                merged.push((v, c));
            }
        }
    }
    m.objective = merged;
    m.binaries = binaries;
    Ok(m)
}

pub fn manifest_for(model: &LpModel, system: &SystemSpec, scenarios: &ScenarioSet) -> LpManifest {
    let vars = model.variables();
    let mut variable_counts: HashMap<String, usize> = HashMap::new();
    for v in &vars {
        let kind = v.split('_').next().unwrap_or(v).to_string();
        *variable_counts.entry(kind).or_default() += 1;
    }
    LpManifest {
        schema: "maintplan.lp-manifest/v1".into(),
        components: system.n(),
        horizon: system.horizon,
        scenarios: scenarios.len(),
        individuals: (0..system.n())
            .map(|i| scenarios.scenarios.first().map_or(0, |s| s.individuals(i)))
            .collect(),
        variables: vars.len(),
        binaries: model.binaries.len(),
        constraints: model.rows.len(),
        closed_form_variables: expected_variable_count(system, scenarios),
        variable_counts,
        notes: vec![
            "signed window difference y is substituted into the dev_* rows".into(),
            "objective uses (c_pr - c_cr) Y + c_cr xt_T, which equals the unsimplified form with constant 0".into(),
            "first individual type row: Y = xt_T - w at its failure epoch".into(),
            "later individual type row: 2Y = sum(u + v) + sum of w before the lifetime - (xt_T of predecessor - xt_T of itself)".into(),
        ],
    }
}

/// Writes the model and returns its manifest.
pub fn export_def_lp<W: Write>(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    out: W,
) -> Result<LpManifest> {
    let model = build_def_model(system, scenarios)?;
    model.write(out)?;
    Ok(manifest_for(&model, system, scenarios))
}

/// Values of every model variable for one schedule per scenario. All
/// schedules must share their first stage.
pub fn assignment_for(
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    schedules: &[Schedule],
) -> Result<HashMap<String, f64>> {
    if schedules.len() != scenarios.len() {
        return Err(Error::invalid("need one schedule per scenario"));
    }
    let first = schedules[0].first_stage();
    if schedules.iter().any(|s| s.first_stage() != first) {
        return Err(Error::invalid("schedules disagree on the first stage"));
    }
    let labels: Vec<_> = scenarios
        .scenarios
        .iter()
        .zip(schedules)
        .map(|(sc, s)| crate::model::formula_classify(system, sc, s))
        .collect::<Result<_>>()?;
    let horizon = system.horizon;
    let mut a = HashMap::new();
    for (i, &x) in first.iter().enumerate() {
        a.insert(format!("x_{i}"), f64::from(u8::from(x)));
    }
    a.insert("zf".into(), f64::from(u8::from(first.iter().any(|&b| b))));
    for (k, (sc, sched)) in scenarios.scenarios.iter().zip(schedules).enumerate() {
        let setups = sched.setup_times();
        for t in 1..=horizon {
            a.insert(zv(k, t), f64::from(u8::from(setups.contains(&t))));
        }
        let terms = labels[k].formula.as_ref().expect("formula terms");
        for i in 0..system.n() {
            for r in 0..sc.individuals(i) {
                let when = sched.times[i].get(r).copied();
                for t in 1..=horizon {
                    a.insert(
                        xt(k, i, r, t),
                        f64::from(u8::from(when.is_some_and(|w| w <= t))),
                    );
                    a.insert(wv(k, i, r, t), f64::from(u8::from(when == Some(t))));
                }
                let ft = &terms[i][r];
                a.insert(yv(k, i, r), ft.pr_indicator as f64);
                for (j, (&u, &v)) in ft.u.iter().zip(&ft.v).enumerate() {
                    a.insert(uv(k, i, r, j as u32), u as f64);
                    a.insert(vv(k, i, r, j as u32), v as f64);
                }
            }
        }
    }
    Ok(a)
}

/// Row with resolved variable indices: name, terms, sense, rhs.
type CompiledRow = (String, Vec<(usize, f64)>, Sense, f64);

/// Optimum of an exported model found by enumerating its binaries: every
/// first-stage vector, and per scenario every monotone `xt` path and every
/// setup vector. `w`, `u`, `v` and `Y` are read off their defining equality
/// rows; all rows are then checked on the parsed model. `None` when no
/// assignment is feasible.
pub fn brute_force_optimum(
    model: &LpModel,
    system: &SystemSpec,
    scenarios: &ScenarioSet,
    budget: &Budget,
) -> Result<Option<f64>> {
    let n = system.n();
    let horizon = system.horizon;
    let paths: u128 = scenarios
        .scenarios
        .iter()
        .map(|sc| {
            let reps: u32 = (0..n).map(|i| sc.individuals(i) as u32).sum();
            (horizon as u128 + 1).pow(reps) << horizon
        })
        .sum();
    budget.check("LP brute force", paths.saturating_mul(1u128 << (n + 1)))?;

    let vars = model.variables();
    let index: HashMap<&str, usize> = vars
        .iter()
        .enumerate()
        .map(|(k, v)| (v.as_str(), k))
        .collect();
    let id = |name: &str| index.get(name).copied();
    let obj: Vec<(usize, f64)> = model
        .objective
        .iter()
        .filter_map(|(v, c)| id(v).map(|k| (k, *c)))
        .collect();
    let compiled: Vec<CompiledRow> = model
        .rows
        .iter()
        .map(|r| {
            (
                r.name.clone(),
                r.terms
                    .iter()
                    .filter_map(|(v, c)| id(v).map(|k| (k, *c)))
                    .collect(),
                r.sense,
                r.rhs,
            )
        })
        .collect();
    let first_ids: Vec<usize> = (0..n)
        .filter_map(|i| id(&format!("x_{i}")))
        .chain(id("zf"))
        .collect();
    let touches_first = |terms: &[(usize, f64)]| terms.iter().any(|(k, _)| first_ids.contains(k));
    let row_ok = |vals: &[f64], terms: &[(usize, f64)], sense: Sense, rhs: f64| {
        holds(terms.iter().map(|(k, c)| c * vals[*k]).sum(), sense, rhs)
    };

    // First-stage candidates: all binary (x, zf) satisfying first-stage rows.
    let fs_rows: Vec<&CompiledRow> = compiled.iter().filter(|r| r.0.starts_with("fs_")).collect();
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let mut vals = vec![0.0; vars.len()];
    for code in 0u32..(1 << (n + 1)) {
        let bits: Vec<f64> = (0..=n).map(|b| f64::from((code >> b) & 1)).collect();
        for (k, &fid) in first_ids.iter().enumerate() {
            vals[fid] = bits[k];
        }
        if fs_rows.iter().all(|r| row_ok(&vals, &r.1, r.2, r.3)) {
            candidates.push(bits);
        }
    }
    let first_obj: Vec<f64> = candidates
        .iter()
        .map(|bits| {
            first_ids
                .iter()
                .zip(bits)
                .map(|(fid, b)| {
                    obj.iter()
                        .filter(|(k, _)| k == fid)
                        .map(|(_, c)| c * b)
                        .sum::<f64>()
                })
                .sum()
        })
        .collect();
    let mut totals: Vec<Option<f64>> = first_obj.into_iter().map(Some).collect();

    for (k, sc) in scenarios.scenarios.iter().enumerate() {
        let prefix = format!("s{k}_");
        let rows: Vec<&CompiledRow> = compiled
            .iter()
            .filter(|r| r.0.starts_with(&prefix))
            .collect();
        let (link, local): (Vec<_>, Vec<_>) = rows.into_iter().partition(|r| touches_first(&r.1));
        let block_vars: Vec<usize> = vars
            .iter()
            .enumerate()
            .filter(|(_, v)| {
                let mut parts = v.split('_');
                let kind = parts.next();
                kind != Some("x")
                    && kind != Some("zf")
                    && parts.next() == Some(k.to_string().as_str())
            })
            .map(|(j, _)| j)
            .collect();
        let slots: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..sc.individuals(i)).map(move |r| (i, r)))
            .collect();
        let mut best: Vec<Option<f64>> = vec![None; candidates.len()];
        let mut choice = vec![0u32; slots.len()];
        let idx = |name: String| id(&name).expect("variable present in model");
        loop {
            for &j in &block_vars {
                vals[j] = 0.0;
            }
            for (s, &(i, r)) in slots.iter().enumerate() {
                let when = choice[s];
                for t in 1..=horizon {
                    vals[idx(xt(k, i, r, t))] = f64::from(u8::from(when != 0 && when <= t));
                    vals[idx(wv(k, i, r, t))] = f64::from(u8::from(when == t));
                }
            }
            let mut integral = true;
            for &(i, r) in &slots {
                let w_at = |vals: &[f64], rr: usize, t: u64| -> f64 {
                    if t >= 1 && t <= horizon as u64 {
                        vals[idx(wv(k, i, rr, t as u32))]
                    } else {
                        0.0
                    }
                };
                let y = if r == 0 {
                    let f = (sc.lifetimes[i][0] as u64).max(1);
                    vals[idx(xt(k, i, 0, horizon))] - w_at(&vals, 0, f)
                } else {
                    let life = sc.lifetimes[i][r] as u64;
                    let mut abs = 0.0;
                    for j in 0..=horizon {
                        let yj = w_at(&vals, r, life + j as u64) - w_at(&vals, r - 1, j as u64);
                        vals[idx(uv(k, i, r, j))] = yj.max(0.0);
                        vals[idx(vv(k, i, r, j))] = (-yj).max(0.0);
                        abs += yj.abs();
                    }
                    let early: f64 = (1..life).map(|t| w_at(&vals, r, t)).sum();
                    let in_service =
                        vals[idx(xt(k, i, r - 1, horizon))] - vals[idx(xt(k, i, r, horizon))];
                    (abs + early - in_service) / 2.0
                };
                if y != 0.0 && y != 1.0 {
                    integral = false;
                    break;
                }
                vals[idx(yv(k, i, r))] = y;
            }
            if integral {
                for zc in 0u32..(1 << horizon) {
                    for t in 1..=horizon {
                        vals[idx(zv(k, t))] = f64::from((zc >> (t - 1)) & 1);
                    }
                    if !local.iter().all(|r| row_ok(&vals, &r.1, r.2, r.3)) {
                        continue;
                    }
                    let value: f64 = obj
                        .iter()
                        .filter(|(j, _)| block_vars.contains(j))
                        .map(|(j, c)| c * vals[*j])
                        .sum();
                    for (ci, bits) in candidates.iter().enumerate() {
                        for (b, &fid) in first_ids.iter().enumerate() {
                            vals[fid] = bits[b];
                        }
                        if link.iter().all(|r| row_ok(&vals, &r.1, r.2, r.3))
                            && best[ci].is_none_or(|b| value < b)
                        {
                            best[ci] = Some(value);
                        }
                    }
                }
            }
            // Next combination of replacement epochs (0 = never).
            let mut pos = 0;
            loop {
                if pos == choice.len() {
                    break;
                }
                choice[pos] += 1;
                if choice[pos] <= horizon {
                    break;
                }
                choice[pos] = 0;
                pos += 1;
            }
            if pos == choice.len() {
                break;
            }
        }
        for (total, b) in totals.iter_mut().zip(best) {
            *total = match (*total, b) {
                (Some(t), Some(b)) => Some(t + b),
                _ => None,
            };
        }
    }
    Ok(totals
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.min(v)))
        }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{evaluate_schedule, ComponentSpec, Scenario};

    fn tiny() -> (SystemSpec, ScenarioSet) {
        let sys = SystemSpec::new(vec![ComponentSpec::new(2.0, 3.0, 1.0, 4.0)], 2, 2.0).unwrap();
        let set = ScenarioSet::uniform(vec![Scenario::new(vec![vec![2, 1]], 1.0)], 2, 0).unwrap();
        (sys, set)
    }

    #[test]
    fn round_trip_keeps_counts() {
        let (sys, set) = tiny();
        let mut buf = Vec::new();
        let manifest = export_def_lp(&sys, &set, &mut buf).unwrap();
        let parsed = parse_lp(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(parsed.variables().len(), manifest.variables);
        assert_eq!(parsed.rows.len(), manifest.constraints);
        assert_eq!(manifest.variables, manifest.closed_form_variables);
        assert_eq!(parsed, build_def_model(&sys, &set).unwrap());
    }

    #[test]
    fn schedule_substitution_prices_like_the_evaluator() {
        let (sys, set) = tiny();
        let model = build_def_model(&sys, &set).unwrap();
        for times in [vec![1u32, 2], vec![2]] {
            let sched = Schedule::new(vec![times]);
            let a = assignment_for(&sys, &set, std::slice::from_ref(&sched)).unwrap();
            let (obj, violated) = model.evaluate(&a);
            assert!(violated.is_empty(), "{violated:?}");
            let direct = evaluate_schedule(&sys, &set.scenarios[0], &sched)
                .unwrap()
                .total;
            assert!((obj - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn reader_accepts_common_variations() {
        let text = "\\ comment\nMaximize\n obj: 2x + 3 y\nst\n c1: x + y <= 4\n -x =< -1\nBounds\n 0 <= x <= 3\n y <= 2\nGenerals\n y\nBinaries\n x\nEnd\n";
        let m = parse_lp(text).unwrap();
        assert!(!m.minimize);
        assert_eq!(m.objective, vec![("x".into(), 2.0), ("y".into(), 3.0)]);
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[1].name, "R1");
        assert_eq!(m.rows[1].terms, vec![("x".into(), -1.0)]);
        assert_eq!(m.bounds.len(), 2);
        assert_eq!(m.binaries, vec!["x".to_string()]);
    }

    #[test]
    fn reader_reports_line_numbers() {
        let err = parse_lp("Minimize\n obj: x\nSubject To\n c: x <= y\nEnd\n").unwrap_err();
        assert!(matches!(err, Error::LpParse { line: 4, .. }));
        assert!(parse_lp("Minimize\n obj: x\n").is_err());
    }
}
