//! Line-oriented textual formats: the pMDP model format, datasets, policies
//! and valuations. Rationals written in decimal form are parsed exactly as
//! scaled integers.

use crate::pmdp::{ModelError, PMdp, PMdpBuilder};
use crate::poly::{PolyExpr, Valuation};
use crate::solve::Policy;
use crate::spibb::Dataset;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Semantic {
        line: usize,
        #[source]
        source: ModelError,
    },
    #[error("{0}")]
    Model(#[from] ModelError),
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        msg: msg.into(),
    }
}

// ---------------------------------------------------------------------------
// Rational and polynomial expression parsing
// ---------------------------------------------------------------------------

/// Parses `-3`, `3/4` or `0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| format!("bad numerator `{n}`"))?;
        let d: BigInt = d.trim().parse().map_err(|_| format!("bad denominator `{d}`"))?;
        if d.is_zero() {
            return Err("zero denominator".to_string());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if !int_digits.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || frac.is_empty()
        {
            return Err(format!("bad decimal `{s}`"));
        }
        let int_digits = if int_digits.is_empty() { "0" } else { int_digits };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let whole: BigInt = int_digits.parse().unwrap();
        let frac_part: BigInt = frac.parse().unwrap();
        let num = whole * &scale + frac_part;
        let num = if neg { -num } else { num };
        return Ok(BigRational::new(num, scale));
    }
    let n: BigInt = s.parse().map_err(|_| format!("bad rational `{s}`"))?;
    Ok(BigRational::from_integer(n))
}

fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex_poly(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Tok::Num(parse_rational(&text)?));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(format!("unexpected character `{other}`")),
        }
    }
    Ok(out)
}

struct PolyParser {
    toks: Vec<Tok>,
    pos: usize,
}

impl PolyParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<PolyExpr, String> {
        let mut lhs = self.term()?;
        while let Some(tok) = self.peek() {
            match tok {
                Tok::Plus => {
                    self.pos += 1;
                    lhs = PolyExpr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Minus => {
                    self.pos += 1;
                    lhs = PolyExpr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    // term := factor ('*' factor)*  — '/' between general factors is rejected
    fn term(&mut self) -> Result<PolyExpr, String> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = PolyExpr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Tok::Slash) => {
                    // Only a rational literal numerator/denominator is allowed;
                    // that case is consumed inside `factor`. Anything reaching
                    // here is division by an expression.
                    return Err("division is not polynomial".to_string());
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    // factor := ('-')* atom ('^' INT)?
    fn factor(&mut self) -> Result<PolyExpr, String> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            return Ok(PolyExpr::Neg(Box::new(self.factor()?)));
        }
        let mut atom = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            match self.next() {
                Some(Tok::Num(r)) if r.is_integer() && !r.is_negative() => {
                    let e: u32 = r
                        .numer()
                        .to_string()
                        .parse()
                        .map_err(|_| "exponent too large".to_string())?;
                    atom = PolyExpr::Pow(Box::new(atom), e);
                }
                _ => return Err("exponent must be a nonnegative integer".to_string()),
            }
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<PolyExpr, String> {
        match self.next() {
            Some(Tok::Num(n)) => {
                // `3/4` as a rational literal.
                if let Some(Tok::Slash) = self.peek() {
                    let save = self.pos;
                    self.pos += 1;
                    match self.next() {
                        Some(Tok::Num(d)) if d.is_integer() && n.is_integer() => {
                            if d.is_zero() {
                                return Err("zero denominator".to_string());
                            }
                            return Ok(PolyExpr::Const(n / d));
                        }
                        _ => {
                            self.pos = save;
                        }
                    }
                }
                Ok(PolyExpr::Const(n))
            }
            Some(Tok::Ident(name)) => Ok(PolyExpr::Var(name)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                match self.next() {
                    Some(Tok::RParen) => Ok(e),
                    _ => Err("missing `)`".to_string()),
                }
            }
            Some(t) => Err(format!("unexpected token {t:?}")),
            None => Err("unexpected end of expression".to_string()),
        }
    }
}

/// Parses a polynomial expression over rationals, parameter identifiers,
/// `+ - * ^` and parentheses. Division of general expressions is rejected.
pub fn parse_polynomial(s: &str) -> Result<PolyExpr, String> {
    let toks = lex_poly(s)?;
    let mut p = PolyParser { toks, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err("trailing tokens in expression".to_string());
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Model format
// ---------------------------------------------------------------------------

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn check_name(line_no: usize, what: &str, name: &str) -> Result<(), FormatError> {
    let mut chars = name.chars();
    let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(syntax(line_no, format!("invalid {what} name `{name}`")))
    }
}

/// Parses the textual pMDP format. See the README for the grammar.
pub fn parse_pmdp(text: &str) -> Result<PMdp, FormatError> {
    let mut builder: Option<PMdpBuilder> = None;
    let mut initial_name: Option<(usize, String)> = None;
    let mut rewards: Vec<(usize, String, String, BigRational)> = Vec::new();
    let mut transitions: Vec<(usize, String, String, String, PolyExpr)> = Vec::new();
    let mut intermediates: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap();
        let rest: Vec<&str> = parts.collect();
        if keyword == "pmdp" {
            if builder.is_some() {
                return Err(syntax(line_no, "duplicate `pmdp` header"));
            }
            let name = rest
                .first()
                .ok_or_else(|| syntax(line_no, "missing model name"))?;
            builder = Some(PMdpBuilder::new(*name));
            continue;
        }
        let b = builder
            .as_mut()
            .ok_or_else(|| syntax(line_no, "expected `pmdp <name>` header first"))?;
        match keyword {
            "gamma" => {
                let r = rest.first().ok_or_else(|| syntax(line_no, "missing gamma"))?;
                let g = parse_rational(r).map_err(|e| syntax(line_no, e))?;
                b.set_gamma(g);
            }
            "rmax" => {
                let r = rest.first().ok_or_else(|| syntax(line_no, "missing rmax"))?;
                let g = parse_rational(r).map_err(|e| syntax(line_no, e))?;
                b.set_rmax(g);
            }
            "param" => {
                let name = rest.first().ok_or_else(|| syntax(line_no, "missing name"))?;
                check_name(line_no, "parameter", name)?;
                b.add_param(*name);
            }
            "state" => {
                let name = rest.first().ok_or_else(|| syntax(line_no, "missing name"))?;
                check_name(line_no, "state", name)?;
                b.add_state(*name);
            }
            "action" => {
                let name = rest.first().ok_or_else(|| syntax(line_no, "missing name"))?;
                check_name(line_no, "action", name)?;
                b.add_action(*name);
            }
            "initial" => {
                let name = rest.first().ok_or_else(|| syntax(line_no, "missing name"))?;
                initial_name = Some((line_no, name.to_string()));
            }
            "intermediate" => {
                let name = rest.first().ok_or_else(|| syntax(line_no, "missing name"))?;
                intermediates.push((line_no, name.to_string()));
            }
            "reward" => {
                if rest.len() != 3 {
                    return Err(syntax(line_no, "expected `reward <state> <action> <rational>`"));
                }
                let r = parse_rational(rest[2]).map_err(|e| syntax(line_no, e))?;
                rewards.push((line_no, rest[0].to_string(), rest[1].to_string(), r));
            }
            "trans" => {
                if rest.len() < 4 {
                    return Err(syntax(
                        line_no,
                        "expected `trans <state> <action> <state'> <polynomial>`",
                    ));
                }
                let expr_text = rest[3..].join(" ");
                let expr = parse_polynomial(&expr_text).map_err(|e| syntax(line_no, e))?;
                transitions.push((
                    line_no,
                    rest[0].to_string(),
                    rest[1].to_string(),
                    rest[2].to_string(),
                    expr,
                ));
            }
            other => return Err(syntax(line_no, format!("unknown directive `{other}`"))),
        }
    }

    let mut b = builder.ok_or_else(|| syntax(0, "empty model: missing `pmdp` header"))?;

    // Resolve names now that all declarations are read.
    let resolve = |b: &PMdpBuilder, line: usize, what: &str, name: &str| -> Result<usize, FormatError> {
        let found = match what {
            "state" => b.state_names().iter().position(|s| s == name),
            _ => b.action_names().iter().position(|s| s == name),
        };
        found.ok_or_else(|| syntax(line, format!("unknown {what} `{name}`")))
    };

    for (line, s, a, r) in rewards {
        let s = resolve(&b, line, "state", &s)?;
        let a = resolve(&b, line, "action", &a)?;
        b.set_reward(s, a, r);
    }
    for (line, s, a, t, expr) in transitions {
        let s = resolve(&b, line, "state", &s)?;
        let a = resolve(&b, line, "action", &a)?;
        let t = resolve(&b, line, "state", &t)?;
        let poly = expr.canonicalize();
        if poly.is_zero() {
            return Err(syntax(line, "transition label is the zero polynomial"));
        }
        b.add_trans(s, a, t, poly);
    }
    for (line, name) in intermediates {
        let s = resolve(&b, line, "state", &name)?;
        b.mark_intermediate(s);
    }
    if let Some((line, name)) = initial_name {
        let s = resolve(&b, line, "state", &name)?;
        b.set_initial(s);
    }
    Ok(b.build()?)
}

/// Serializes a model; `parse_pmdp(serialize_pmdp(m))` equals `m`.
pub fn serialize_pmdp(m: &PMdp) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pmdp {}", m.name);
    let _ = writeln!(out, "gamma {}", fmt_rational(m.gamma()));
    let _ = writeln!(out, "rmax {}", fmt_rational(m.r_max()));
    for p in m.params() {
        let _ = writeln!(out, "param {p}");
    }
    for s in m.states() {
        let _ = writeln!(out, "state {s}");
    }
    let _ = writeln!(out, "initial {}", m.states()[m.initial()]);
    for a in m.actions() {
        let _ = writeln!(out, "action {a}");
    }
    for s in m.intermediate_states() {
        let _ = writeln!(out, "intermediate {}", m.states()[s]);
    }
    for (s, a) in m.enabled_pairs() {
        let r = m.reward(s, a);
        if !r.is_zero() {
            let _ = writeln!(
                out,
                "reward {} {} {}",
                m.states()[s],
                m.actions()[a],
                fmt_rational(r)
            );
        }
    }
    for (s, a) in m.enabled_pairs() {
        for (t, label) in m.transitions(s, a) {
            let _ = writeln!(
                out,
                "trans {} {} {} {}",
                m.states()[s],
                m.actions()[a],
                m.states()[*t],
                label
            );
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Dataset format
// ---------------------------------------------------------------------------

/// Parses `dataset <env> <seed>` followed by `step s a s'` and `episode`
/// lines. Names are resolved against the given state/action tables.
pub fn parse_dataset(
    text: &str,
    states: &[String],
    actions: &[String],
) -> Result<Dataset, FormatError> {
    let mut env = String::new();
    let mut seed = 0u64;
    let mut seen_header = false;
    let mut triples = Vec::new();
    let mut episode_starts = vec![0usize];
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts[0] {
            "dataset" => {
                if parts.len() < 3 {
                    return Err(syntax(line_no, "expected `dataset <env> <seed>`"));
                }
                env = parts[1].to_string();
                seed = parts[2]
                    .parse()
                    .map_err(|_| syntax(line_no, "bad seed"))?;
                seen_header = true;
            }
            "step" => {
                if !seen_header {
                    return Err(syntax(line_no, "missing `dataset` header"));
                }
                if parts.len() != 4 {
                    return Err(syntax(line_no, "expected `step <s> <a> <s'>`"));
                }
                let s = states
                    .iter()
                    .position(|x| x == parts[1])
                    .ok_or_else(|| syntax(line_no, format!("unknown state `{}`", parts[1])))?;
                let a = actions
                    .iter()
                    .position(|x| x == parts[2])
                    .ok_or_else(|| syntax(line_no, format!("unknown action `{}`", parts[2])))?;
                let t = states
                    .iter()
                    .position(|x| x == parts[3])
                    .ok_or_else(|| syntax(line_no, format!("unknown state `{}`", parts[3])))?;
                triples.push((s, a, t));
            }
            "episode" => {
                episode_starts.push(triples.len());
            }
            other => return Err(syntax(line_no, format!("unknown directive `{other}`"))),
        }
    }
    Ok(Dataset {
        env,
        seed,
        behavior_id: String::new(),
        triples,
        episode_starts,
    })
}

pub fn serialize_dataset(d: &Dataset, states: &[String], actions: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset {} {}", d.env, d.seed);
    let mut boundaries = d.episode_starts.iter().skip(1).peekable();
    for (i, (s, a, t)) in d.triples.iter().enumerate() {
        while boundaries.peek().is_some_and(|&&b| b == i) {
            let _ = writeln!(out, "episode");
            boundaries.next();
        }
        let _ = writeln!(out, "step {} {} {}", states[*s], actions[*a], states[*t]);
    }
    for _ in boundaries {
        let _ = writeln!(out, "episode");
    }
    out
}

// ---------------------------------------------------------------------------
// Policy and valuation formats
// ---------------------------------------------------------------------------

/// Parses `policy <name>` followed by `act <state> <action> <prob>` lines.
pub fn parse_policy(
    text: &str,
    states: &[String],
    actions: &[String],
) -> Result<Policy, FormatError> {
    let mut pi = Policy::zeroed(states.len(), actions.len());
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts[0] {
            "policy" => {}
            "act" => {
                if parts.len() != 4 {
                    return Err(syntax(line_no, "expected `act <state> <action> <prob>`"));
                }
                let s = states
                    .iter()
                    .position(|x| x == parts[1])
                    .ok_or_else(|| syntax(line_no, format!("unknown state `{}`", parts[1])))?;
                let a = actions
                    .iter()
                    .position(|x| x == parts[2])
                    .ok_or_else(|| syntax(line_no, format!("unknown action `{}`", parts[2])))?;
                let p: f64 = parts[3]
                    .parse()
                    .map_err(|_| syntax(line_no, "bad probability"))?;
                pi.set(s, a, p);
            }
            other => return Err(syntax(line_no, format!("unknown directive `{other}`"))),
        }
    }
    Ok(pi)
}

pub fn serialize_policy(pi: &Policy, name: &str, states: &[String], actions: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "policy {name}");
    for (s, state) in states.iter().enumerate() {
        for (a, action) in actions.iter().enumerate() {
            let p = pi.prob(s, a);
            if p > 0.0 {
                let _ = writeln!(out, "act {state} {action} {p}");
            }
        }
    }
    out
}

/// Parses `val <param> <value>` lines into a valuation.
pub fn parse_valuation(text: &str) -> Result<Valuation, FormatError> {
    let mut v = Valuation::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "val" {
            return Err(syntax(line_no, "expected `val <param> <value>`"));
        }
        let x: f64 = parts[2]
            .parse()
            .map_err(|_| syntax(line_no, "bad value"))?;
        v.set(parts[1], x);
    }
    Ok(v)
}

pub fn serialize_valuation(v: &Valuation) -> String {
    let mut out = String::new();
    for (name, x) in v.iter() {
        let _ = writeln!(out, "val {name} {x}");
    }
    out
}
