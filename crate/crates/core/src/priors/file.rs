//! Prior-file reader and writer.
//!
//! ```text
//! prior <var> cat <row> : eps <pi_hat...> / <q_hat...>
//! prior <var> mu <index> : eps <mu_hat> / <q_hat>
//! prior <var> mu <index> : dirac <mu>
//! prior <var> tau : gamma <shape> <rate>
//! ```
//!
//! Lists may be separated by spaces or commas; a single `q_hat` applies to
//! every component. μ values are on the rescaled axis. Blocks not listed
//! keep their defaults.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::{beta_from_eps, dirichlet_from_eps, PriorEntry, PriorError, PriorSpec, VarPrior};
use crate::netspec::parse::{lex, Tok};
use crate::netspec::{NetError, NetworkSpec};

fn syntax(line: usize, message: impl Into<String>) -> PriorError {
    PriorError::Syntax {
        line,
        message: message.into(),
    }
}

#[derive(Debug, PartialEq)]
enum Item {
    Num(f64),
    Slash,
    Word(String),
}

/// Flattens the tokens after the colon into numbers, slashes and keywords.
fn items(line: usize, toks: &[Tok]) -> Result<Vec<Item>, PriorError> {
    let mut out = Vec::new();
    for t in toks {
        match t {
            Tok::Comma => {}
            Tok::Word(w) => {
                for (k, piece) in w.split('/').enumerate() {
                    if k > 0 {
                        out.push(Item::Slash);
                    }
                    if piece.is_empty() {
                        continue;
                    }
                    match piece.parse::<f64>() {
                        Ok(v) if v.is_finite() => out.push(Item::Num(v)),
                        _ => out.push(Item::Word(piece.to_string())),
                    }
                }
            }
            other => return Err(syntax(line, format!("unexpected token {other:?}"))),
        }
    }
    Ok(out)
}

fn nums(line: usize, it: &[Item]) -> Result<Vec<f64>, PriorError> {
    it.iter()
        .map(|i| match i {
            Item::Num(v) => Ok(*v),
            other => Err(syntax(line, format!("expected a number, found {other:?}"))),
        })
        .collect()
}

/// Splits `eps a b c / q...` into the two number lists.
fn eps_lists(line: usize, it: &[Item]) -> Result<(Vec<f64>, Vec<f64>), PriorError> {
    let pos = it
        .iter()
        .position(|i| *i == Item::Slash)
        .ok_or_else(|| syntax(line, "expected `/` between assessments and counts"))?;
    Ok((nums(line, &it[..pos])?, nums(line, &it[pos + 1..])?))
}

fn index(line: usize, w: Option<&Tok>) -> Result<usize, PriorError> {
    match w {
        Some(Tok::Word(s)) => s
            .parse()
            .map_err(|_| syntax(line, format!("expected an index, found `{s}`"))),
        _ => Err(syntax(line, "expected an index")),
    }
}

fn lex_err(e: NetError) -> PriorError {
    match e {
        NetError::Syntax { line, column, message } => syntax(line, format!("column {column}: {message}")),
        other => syntax(0, other.to_string()),
    }
}

/// Parses a prior file against a network. Unlisted blocks take
/// [`PriorSpec::defaults`].
pub fn parse_priors(text: &str, spec: &NetworkSpec) -> Result<PriorSpec, PriorError> {
    let mut out = PriorSpec::defaults(spec);
    let mut seen: HashSet<(usize, &'static str, usize)> = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks: Vec<Tok> = lex(line, raw).map_err(lex_err)?.into_iter().map(|s| s.tok).collect();
        if toks.is_empty() {
            continue;
        }
        if toks[0] != Tok::Word("prior".into()) {
            return Err(syntax(line, "expected `prior`"));
        }
        let name = match toks.get(1) {
            Some(Tok::Str(s)) | Some(Tok::Word(s)) => s.trim().to_string(),
            _ => return Err(syntax(line, "expected a variable name")),
        };
        let var = spec
            .index_of(&name)
            .ok_or_else(|| PriorError::UnknownVariable(name.clone()))?;
        let kind = match toks.get(2) {
            Some(Tok::Word(w)) => w.clone(),
            _ => return Err(syntax(line, "expected `cat`, `mu` or `tau`")),
        };
        let (slot, rest_at) = match kind.as_str() {
            "cat" | "mu" => (index(line, toks.get(3))?, 4),
            "tau" => (0, 3),
            _ => return Err(syntax(line, format!("unknown block `{kind}`"))),
        };
        if toks.get(rest_at) != Some(&Tok::Colon) {
            return Err(syntax(line, "expected `:`"));
        }
        let it = items(line, &toks[rest_at + 1..])?;
        let Some(Item::Word(family)) = it.first() else {
            return Err(syntax(line, "expected a prior family"));
        };
        let args = &it[1..];
        let block = |message: String| PriorError::Block {
            var: name.clone(),
            message,
        };
        let key: &'static str = match kind.as_str() {
            "cat" => "cat",
            "mu" => "mu",
            _ => "tau",
        };
        if !seen.insert((var, key, slot)) {
            return Err(syntax(line, format!("duplicate `{kind}` block for `{name}`")));
        }

        match (&mut out.vars[var], kind.as_str()) {
            (VarPrior::Categorical { rows, .. }, "cat") => {
                if slot >= rows.len() {
                    return Err(block(format!("row {slot} out of range (0..{})", rows.len())));
                }
                if family != "eps" {
                    return Err(syntax(line, format!("`cat` blocks take `eps`, not `{family}`")));
                }
                let (pi, mut q) = eps_lists(line, args)?;
                let k = spec.var(var).typology.n_categories().unwrap();
                if pi.len() != k {
                    return Err(block(format!("row {slot} needs {k} assessments, got {}", pi.len())));
                }
                if q.len() == 1 {
                    q = vec![q[0]; k];
                }
                let e = dirichlet_from_eps(&pi, &q)?;
                if let PriorEntry::Dirichlet { alpha } = &e {
                    if alpha[0] == 0.0 {
                        return Err(block(format!("row {slot}: neutral category cannot be a structural zero")));
                    }
                }
                rows[slot] = e;
            }
            (VarPrior::Continuous { mu, .. }, "mu") => {
                if slot >= mu.len() {
                    return Err(block(format!("mu {slot} out of range (0..{})", mu.len())));
                }
                mu[slot] = match family.as_str() {
                    "eps" => {
                        let (m, q) = eps_lists(line, args)?;
                        if m.len() != 1 || q.len() != 1 {
                            return Err(syntax(line, "mu eps takes one assessment and one count"));
                        }
                        beta_from_eps(m[0], q[0])?
                    }
                    "dirac" => {
                        let v = nums(line, args)?;
                        if v.len() != 1 {
                            return Err(syntax(line, "dirac takes one value"));
                        }
                        if !(v[0] > -1.5 && v[0] < 1.5) {
                            return Err(PriorError::MuOutOfRange(v[0]));
                        }
                        PriorEntry::Dirac {
                            value: (v[0] + 1.5) / 3.0,
                        }
                    }
                    _ => return Err(syntax(line, format!("`mu` blocks take `eps` or `dirac`, not `{family}`"))),
                };
            }
            (VarPrior::Continuous { tau, .. }, "tau") => {
                if family != "gamma" {
                    return Err(syntax(line, format!("`tau` takes `gamma`, not `{family}`")));
                }
                let v = nums(line, args)?;
                if v.len() != 2 || v.iter().any(|x| *x <= 0.0) {
                    return Err(PriorError::BadGamma);
                }
                *tau = PriorEntry::Gamma { shape: v[0], rate: v[1] };
            }
            _ => return Err(block(format!("`{kind}` block does not fit the variable's typology"))),
        }
    }
    Ok(out)
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Writes every block of `priors` in the prior-file format.
pub fn write_priors(spec: &NetworkSpec, priors: &PriorSpec) -> String {
    let mut out = String::new();
    for (i, vp) in priors.vars.iter().enumerate() {
        let name = quote(&spec.var(i).name);
        match vp {
            VarPrior::Categorical { rows, .. } => {
                for (r, e) in rows.iter().enumerate() {
                    if let PriorEntry::Dirichlet { alpha } = e {
                        let a0: f64 = alpha.iter().sum();
                        let pi: Vec<f64> = alpha.iter().map(|a| a / a0).collect();
                        let _ = writeln!(out, "prior {name} cat {r} : eps {} / {}", list(&pi), a0);
                    }
                }
            }
            VarPrior::Continuous { mu, tau } => {
                for (r, e) in mu.iter().enumerate() {
                    match e {
                        PriorEntry::Beta { a, b } => {
                            let q = a + b;
                            let _ = writeln!(out, "prior {name} mu {r} : eps {} / {q}", 3.0 * a / q - 1.5);
                        }
                        PriorEntry::Dirac { value } => {
                            let _ = writeln!(out, "prior {name} mu {r} : dirac {}", 3.0 * value - 1.5);
                        }
                        _ => {}
                    }
                }
                if let PriorEntry::Gamma { shape, rate } = tau {
                    let _ = writeln!(out, "prior {name} tau : gamma {shape} {rate}");
                }
            }
        }
    }
    out
}
