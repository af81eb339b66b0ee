//! A small checker for the DOT subset: `digraph ID { stmt* }` with graph
//! attribute assignments, `node`/`edge`/`graph` defaults, node statements
//! and `->` edges, each with optional `[a=b, ...]` lists.

#![allow(dead_code)]

use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Id(String),
    Sym(&'static str),
}

fn lex(s: &str) -> Result<Vec<Tok>, String> {
    let mut out = Vec::new();
    let cs: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && cs.get(i + 1) == Some(&'/') {
            while i < cs.len() && cs[i] != '\n' {
                i += 1;
            }
        } else if c == '-' && cs.get(i + 1) == Some(&'>') {
            out.push(Tok::Sym("->"));
            i += 2;
        } else if let Some(sym) = ["{", "}", "[", "]", "=", ";", ","]
            .iter()
            .find(|s| s.starts_with(c))
        {
            out.push(Tok::Sym(sym));
            i += 1;
        } else if c == '"' {
            let mut v = String::new();
            i += 1;
            loop {
                match cs.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') => {
                        v.push(*cs.get(i + 1).ok_or("dangling escape")?);
                        i += 2;
                    }
                    Some(ch) => {
                        v.push(*ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            out.push(Tok::Id(v));
        } else if c.is_alphanumeric() || c == '_' || c == '.' || c == '#' {
            let start = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_' || cs[i] == '.') {
                i += 1;
            }
            if c == '#' {
                return Err("bare # outside a string".into());
            }
            out.push(Tok::Id(cs[start..i].iter().collect()));
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct Graph {
    pub name: String,
    pub nodes: Vec<(String, BTreeMap<String, String>)>,
    pub edges: Vec<(String, String)>,
}

impl Graph {
    pub fn attr(&self, node: &str, key: &str) -> Option<&str> {
        self.nodes
            .iter()
            .find(|(n, _)| n == node)
            .and_then(|(_, a)| a.get(key))
            .map(|s| s.as_str())
    }

    pub fn parent(&self, node: &str) -> Option<&str> {
        self.edges
            .iter()
            .find(|(c, _)| c == node)
            .map(|(_, p)| p.as_str())
    }
}

struct P {
    toks: Vec<Tok>,
    at: usize,
}

impl P {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at)
    }

    fn sym(&mut self, s: &str) -> Result<(), String> {
        match self.toks.get(self.at) {
            Some(Tok::Sym(x)) if *x == s => {
                self.at += 1;
                Ok(())
            }
            other => Err(format!("expected {s}, found {other:?}")),
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.toks.get(self.at) {
            Some(Tok::Id(x)) => {
                self.at += 1;
                Ok(x.clone())
            }
            other => Err(format!("expected identifier, found {other:?}")),
        }
    }

    fn attrs(&mut self) -> Result<BTreeMap<String, String>, String> {
        let mut m = BTreeMap::new();
        if self.peek() != Some(&Tok::Sym("[")) {
            return Ok(m);
        }
        self.sym("[")?;
        while self.peek() != Some(&Tok::Sym("]")) {
            let k = self.id()?;
            self.sym("=")?;
            let v = self.id()?;
            m.insert(k, v);
            if self.peek() == Some(&Tok::Sym(",")) || self.peek() == Some(&Tok::Sym(";")) {
                self.at += 1;
            }
        }
        self.sym("]")?;
        Ok(m)
    }
}

pub fn parse(text: &str) -> Result<Graph, String> {
    let mut p = P {
        toks: lex(text)?,
        at: 0,
    };
    if p.id()? != "digraph" {
        return Err("expected digraph".into());
    }
    let mut g = Graph {
        name: p.id()?,
        ..Default::default()
    };
    p.sym("{")?;
    while p.peek() != Some(&Tok::Sym("}")) {
        let first = p.id()?;
        match p.peek() {
            Some(Tok::Sym("=")) => {
                p.sym("=")?;
                p.id()?;
            }
            Some(Tok::Sym("->")) => {
                p.sym("->")?;
                let to = p.id()?;
                p.attrs()?;
                g.edges.push((first, to));
            }
            _ if ["node", "edge", "graph"].contains(&first.as_str()) => {
                p.attrs()?;
            }
            _ => {
                let a = p.attrs()?;
                g.nodes.push((first, a));
            }
        }
        if p.peek() == Some(&Tok::Sym(";")) {
            p.at += 1;
        }
    }
    p.sym("}")?;
    if p.at != p.toks.len() {
        return Err("trailing input after graph".into());
    }
    Ok(g)
}
