//! Line-oriented model-file reader and writer.
//!
//! ```text
//! var <name> : <cnode> : binary | multi(<s>) | cont(<vL2>, <vL1>, <vR1>, <vR2>)
//! parents <name> : <name>, <name>, ...
//! labels <name> : <label>, <label>, ...
//! exempt <parent> -> <child>
//! ```
//!
//! Names and labels are bare words or double-quoted strings. `#` starts a
//! comment outside quotes.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{CNode, ContinuousScale, Exemption, NetError, NetworkSpec, Typology, VariableDef};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Str(String),
    Word(String),
    Colon,
    Comma,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub(crate) tok: Tok,
    pub(crate) col: usize,
}

fn syntax(line: usize, col: usize, message: impl Into<String>) -> NetError {
    NetError::Syntax {
        line,
        column: col,
        message: message.into(),
    }
}

pub(crate) fn lex(line_no: usize, line: &str) -> Result<Vec<Spanned>, NetError> {
    let chars: Vec<char> = line.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => i += 1,
            '#' => break,
            ':' | ',' | '(' | ')' => {
                let tok = match c {
                    ':' => Tok::Colon,
                    ',' => Tok::Comma,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                toks.push(Spanned { tok, col });
                i += 1;
            }
            '"' => {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(syntax(line_no, col, "unterminated string")),
                        Some('"') => {
                            i += 1;
                            break;
                        }
                        Some('\\') => match chars.get(i + 1) {
                            Some(&e @ ('"' | '\\')) => {
                                s.push(e);
                                i += 2;
                            }
                            _ => return Err(syntax(line_no, i + 1, "invalid escape in string")),
                        },
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                        }
                    }
                }
                toks.push(Spanned { tok: Tok::Str(s), col });
            }
            _ => {
                let start = i;
                while i < chars.len()
                    && !chars[i].is_whitespace()
                    && !matches!(chars[i], ':' | ',' | '(' | ')' | '"' | '#')
                {
                    i += 1;
                }
                toks.push(Spanned {
                    tok: Tok::Word(chars[start..i].iter().collect()),
                    col,
                });
            }
        }
    }
    Ok(toks)
}

struct Cursor<'a> {
    toks: &'a [Spanned],
    pos: usize,
    line: usize,
    eol_col: usize,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.eol_col, |t| t.col)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn err(&self, message: impl Into<String>) -> NetError {
        syntax(self.line, self.col(), message)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), NetError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn name(&mut self) -> Result<String, NetError> {
        match self.peek() {
            Some(Tok::Str(s)) | Some(Tok::Word(s)) if s != "->" => {
                let s = s.trim().to_string();
                if s.is_empty() {
                    return Err(self.err("empty name"));
                }
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected a name")),
        }
    }

    fn word(&mut self) -> Result<String, NetError> {
        match self.peek() {
            Some(Tok::Word(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.err("expected a keyword")),
        }
    }

    fn number(&mut self) -> Result<f64, NetError> {
        let col = self.col();
        let w = self.word()?;
        w.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| syntax(self.line, col, format!("expected a number, found `{w}`")))
    }

    fn name_list(&mut self) -> Result<Vec<String>, NetError> {
        let mut out = Vec::new();
        if self.peek().is_none() {
            return Ok(out);
        }
        loop {
            out.push(self.name()?);
            match self.peek() {
                None => return Ok(out),
                Some(Tok::Comma) => self.pos += 1,
                Some(_) => return Err(self.err("expected `,` or end of line")),
            }
        }
    }

    fn end(&self) -> Result<(), NetError> {
        if self.peek().is_some() {
            Err(self.err("unexpected trailing input"))
        } else {
            Ok(())
        }
    }
}

fn typology(cur: &mut Cursor<'_>) -> Result<Typology, NetError> {
    let col = cur.col();
    let kw = cur.word()?;
    match kw.as_str() {
        "binary" => Ok(Typology::Binary),
        "multi" => {
            cur.expect(Tok::LParen, "`(`")?;
            let col = cur.col();
            let w = cur.word()?;
            let s: u32 = w
                .parse()
                .map_err(|_| syntax(cur.line, col, format!("expected a category count, found `{w}`")))?;
            if s < 2 {
                return Err(syntax(cur.line, col, "multi(s) needs s >= 2; use `binary` for one category"));
            }
            cur.expect(Tok::RParen, "`)`")?;
            Ok(Typology::MultiValued(s))
        }
        "cont" => {
            cur.expect(Tok::LParen, "`(`")?;
            let mut v = [0.0; 4];
            for (k, slot) in v.iter_mut().enumerate() {
                if k > 0 {
                    cur.expect(Tok::Comma, "`,`")?;
                }
                *slot = cur.number()?;
            }
            cur.expect(Tok::RParen, "`)`")?;
            let s = ContinuousScale::new(v[0], v[1], v[2], v[3])
                .map_err(|e| syntax(cur.line, col, e.to_string()))?;
            Ok(Typology::Continuous(s))
        }
        _ => Err(syntax(cur.line, col, format!("unknown typology `{kw}`"))),
    }
}

/// Parses and validates a model file.
pub fn parse_network(text: &str) -> Result<NetworkSpec, NetError> {
    let mut vars: Vec<VariableDef> = Vec::new();
    let mut parents: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut labels: Vec<(usize, String, Vec<String>)> = Vec::new();
    let mut exemptions = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let toks = lex(line, raw)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line,
            eol_col: raw.chars().count() + 1,
        };
        let col = cur.col();
        let kw = cur.word()?;
        match kw.as_str() {
            "var" => {
                let name = cur.name()?;
                cur.expect(Tok::Colon, "`:`")?;
                let ccol = cur.col();
                let tag = cur.word()?;
                let cnode = CNode::from_tag(&tag)
                    .ok_or_else(|| syntax(line, ccol, format!("unknown c-node `{tag}`")))?;
                cur.expect(Tok::Colon, "`:`")?;
                let typ = typology(&mut cur)?;
                cur.end()?;
                vars.push(VariableDef::new(name, cnode, typ));
            }
            "parents" | "labels" => {
                let name = cur.name()?;
                cur.expect(Tok::Colon, "`:`")?;
                let list = cur.name_list()?;
                if kw == "parents" {
                    parents.push((line, name, list));
                } else {
                    labels.push((line, name, list));
                }
            }
            "exempt" => {
                let parent = cur.name()?;
                if cur.peek() != Some(&Tok::Word("->".into())) {
                    return Err(cur.err("expected `->`"));
                }
                cur.pos += 1;
                let child = cur.name()?;
                cur.end()?;
                exemptions.push(Exemption { parent, child });
            }
            _ => return Err(syntax(line, col, format!("unknown directive `{kw}`"))),
        }
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, v) in vars.iter().enumerate() {
        if index.insert(v.name.as_str(), i).is_some() {
            return Err(NetError::DuplicateVariable(v.name.clone()));
        }
    }
    let index: HashMap<String, usize> = index.into_iter().map(|(k, v)| (k.to_string(), v)).collect();

    let mut seen_parents = vec![false; vars.len()];
    for (line, name, list) in parents {
        let &i = index.get(&name).ok_or(NetError::UnknownVariable {
            directive: "parents",
            name: name.clone(),
        })?;
        if seen_parents[i] {
            return Err(syntax(line, 1, format!("second `parents` line for `{name}`")));
        }
        seen_parents[i] = true;
        vars[i].parents = list;
    }
    let mut seen_labels = vec![false; vars.len()];
    for (line, name, list) in labels {
        let &i = index.get(&name).ok_or(NetError::UnknownVariable {
            directive: "labels",
            name: name.clone(),
        })?;
        if seen_labels[i] {
            return Err(syntax(line, 1, format!("second `labels` line for `{name}`")));
        }
        if !vars[i].typology.is_categorical() {
            return Err(syntax(line, 1, format!("`{name}` is continuous and takes no labels")));
        }
        seen_labels[i] = true;
        vars[i].labels = list;
    }

    NetworkSpec::new(vars, exemptions)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn join_quoted(items: &[String]) -> String {
    items.iter().map(|s| quote(s)).collect::<Vec<_>>().join(", ")
}

pub(super) fn write_network(spec: &NetworkSpec) -> String {
    let mut out = String::new();
    for v in spec.variables() {
        let typ = match v.typology {
            Typology::Binary => "binary".to_string(),
            Typology::MultiValued(s) => format!("multi({s})"),
            Typology::Continuous(s) => format!("cont({}, {}, {}, {})", s.l2, s.l1, s.r1, s.r2),
        };
        let name = quote(&v.name);
        let _ = writeln!(out, "var {name} : {} : {typ}", v.cnode);
        if !v.labels.is_empty() {
            let _ = writeln!(out, "labels {name} : {}", join_quoted(&v.labels));
        }
        if !v.parents.is_empty() {
            let _ = writeln!(out, "parents {name} : {}", join_quoted(&v.parents));
        }
        out.push('\n');
    }
    for e in spec.exemptions() {
        let _ = writeln!(out, "exempt {} -> {}", quote(&e.parent), quote(&e.child));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# two variables
var disease : VD : binary
var finding : VMM : binary
parents finding : disease
";

    #[test]
    fn minimal_model() {
        let spec = parse_network(MINIMAL).unwrap();
        assert_eq!(spec.len(), 2);
        assert_eq!(spec.edge_count(), 1);
    }

    #[test]
    fn reversed_edge_names_both() {
        let text = "var disease : VD : binary\nvar finding : VMM : binary\nparents disease : finding\n";
        let err = parse_network(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("disease") && msg.contains("finding"), "{msg}");
        assert!(matches!(err, NetError::CEdgeViolation { .. }));
    }

    #[test]
    fn syntax_positions() {
        let err = parse_network("var x : VD : binary\nvar y : VX : binary\n").unwrap_err();
        assert_eq!(
            err,
            NetError::Syntax {
                line: 2,
                column: 9,
                message: "unknown c-node `VX`".into()
            }
        );
        let err = parse_network("var \"open : VD : binary").unwrap_err();
        assert!(matches!(err, NetError::Syntax { line: 1, column: 5, .. }));
        let err = parse_network("var x : VD : cont(1, 2, 3)").unwrap_err();
        assert!(matches!(err, NetError::Syntax { line: 1, .. }));
        let err = parse_network("var x : VD : multi(1)").unwrap_err();
        assert!(matches!(err, NetError::Syntax { .. }));
    }

    #[test]
    fn quoted_names_and_scales() {
        let text = r#"
var "Heart rate" : VMM : cont(20, 60, 100, 220)   # bpm
var "Sepsis" : VD : multi(2)
labels "Sepsis" : "absent", "moderate", "severe"
parents "Heart rate" : "Sepsis"
"#;
        let spec = parse_network(text).unwrap();
        let hr = spec.var_by_name("Heart rate").unwrap();
        assert_eq!(hr.typology.scale().unwrap().r2, 220.0);
        assert_eq!(spec.var_by_name("Sepsis").unwrap().category_of_label("severe"), Some(2));
    }

    #[test]
    fn write_round_trip() {
        let text = r#"
var "a \"q\"" : VD : multi(3)
labels "a \"q\"" : "n", "x", "y", "z"
var b : VS : cont(-1.5, -0.5, 0.5, 1.5)
parents b : "a \"q\""
var c : VMM : binary
parents c : b
var d : VD : binary
parents d : c
exempt c -> d
"#;
        let spec = parse_network(text).unwrap();
        let back = parse_network(&spec.to_model_text()).unwrap();
        assert_eq!(spec.variables(), back.variables());
        assert_eq!(spec.exemptions(), back.exemptions());
    }

    #[test]
    fn parents_for_undeclared() {
        let err = parse_network("var a : VD : binary\nparents zz : a\n").unwrap_err();
        assert!(matches!(err, NetError::UnknownVariable { directive: "parents", .. }));
    }
}
