//! Lexer and recursive-descent parser for `.spv` sources.

use std::collections::{BTreeMap, BTreeSet};

use spv_core::{Atom, Formula, Term};
use thiserror::Error;

use crate::ast::{Arg, AtomAst, Body, Item, Program, TermAst};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum DslError {
    #[error("{}:{}: syntax error: {msg}", pos.line, pos.col)]
    Syntax { pos: Pos, msg: String },
    #[error("{}:{}: undeclared identifier `{name}`", pos.line, pos.col)]
    Undeclared { pos: Pos, name: String },
    #[error("{}:{}: `{name}` is used as a key but is not declared under `keys:`", pos.line, pos.col)]
    KeyMisuse { pos: Pos, name: String },
    #[error("{}:{}: cyclic definition: {}", pos.line, pos.col, path.join(" -> "))]
    Cyclic { pos: Pos, path: Vec<String> },
    #[error("{}:{}: {msg}", pos.line, pos.col)]
    Semantic { pos: Pos, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NameKind {
    Channel,
    Key,
    Var,
    Const,
}

/// Declared names of a program.
#[derive(Clone, Debug, Default)]
pub struct Scope {
    kinds: BTreeMap<String, NameKind>,
}

/// Renamed copies (`x#2`, `x@1`) resolve through their base name.
fn base_name(n: &str) -> &str {
    match n.find(['#', '@']) {
        Some(i) => &n[..i],
        None => n,
    }
}

impl Scope {
    pub fn of(p: &Program) -> Scope {
        let mut kinds = BTreeMap::new();
        for (names, k) in [
            (&p.channels, NameKind::Channel),
            (&p.keys, NameKind::Key),
            (&p.vars, NameKind::Var),
            (&p.consts, NameKind::Const),
        ] {
            for n in names {
                kinds.insert(n.clone(), k);
            }
        }
        Scope { kinds }
    }

    pub fn kind(&self, name: &str) -> Option<NameKind> {
        self.kinds.get(base_name(name)).copied()
    }

    /// Converts a checked term; unknown names become plain variables.
    pub fn term(&self, t: &TermAst) -> Term {
        match t {
            TermAst::Name(n) => match self.kind(n) {
                Some(NameKind::Key) => Term::key(n),
                Some(NameKind::Channel) | Some(NameKind::Const) => Term::cnst(n),
                _ => Term::var(n),
            },
            TermAst::Lit(c) => Term::cnst(c),
            TermAst::Enc(k, b) => {
                let (k, b) = (self.term(k), self.term(b));
                Term::enc(k.clone(), b.clone()).unwrap_or_else(|_| Term::Enc(Box::new(k), Box::new(b)))
            }
            TermAst::Tuple(items) => Term::seq(items.iter().map(|i| self.term(i)).collect()),
        }
    }

    pub fn formula(&self, atoms: &[AtomAst]) -> Formula {
        Formula::from_atoms(atoms.iter().filter_map(|a| match a {
            AtomAst::True => None,
            AtomAst::False => Some(Atom::False),
            AtomAst::Eq(x, y) => Some(Atom::Eq(self.term(x), self.term(y))),
            AtomAst::In(e, pool) => Some(Atom::In(self.term(e), pool.iter().map(|t| self.term(t)).collect())),
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Lit(String),
    Num(usize),
    Punct(char),
    Eof,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{}`", s),
        Tok::Lit(s) => format!("'{}'", s),
        Tok::Num(n) => n.to_string(),
        Tok::Punct(c) => format!("`{}`", c),
        Tok::Eof => "end of input".to_string(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, DslError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let ident_char = |c: char| c.is_ascii_alphanumeric() || matches!(c, '_' | '#' | '@' | '\'');
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && ident_char(chars[i]) {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), pos));
        } else if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let n = s.parse().map_err(|_| DslError::Syntax { pos, msg: format!("number {} is too large", s) })?;
            out.push((Tok::Num(n), pos));
        } else if c == '\'' {
            i += 1;
            while i < chars.len() && chars[i] != '\'' && chars[i] != '\n' {
                i += 1;
            }
            if chars.get(i) != Some(&'\'') {
                return Err(DslError::Syntax { pos, msg: "unterminated constant".into() });
            }
            let s: String = chars[start + 1..i].iter().collect();
            if s.is_empty() || !s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '#' | '@')) {
                return Err(DslError::Syntax { pos, msg: format!("bad constant '{}'", s) });
            }
            i += 1;
            out.push((Tok::Lit(s), pos));
        } else if "(){},;:=&|".contains(c) {
            i += 1;
            out.push((Tok::Punct(c), pos));
        } else {
            return Err(DslError::Syntax { pos, msg: format!("unexpected character `{}`", c) });
        }
        col += i - start;
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "protocol", "channels", "keys", "vars", "consts", "secret", "received", "cont", "agent", "system", "modified",
    "out", "in", "assert", "hide", "par", "choice", "repl", "enc", "true", "false",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Def {
    Agent,
    Cont,
}

struct RefSite {
    /// Definition the reference occurs in; `None` for system bodies.
    owner: Option<String>,
    name: String,
    cont_only: bool,
    pos: Pos,
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    scope: Scope,
    refs: Vec<RefSite>,
    owner: Option<String>,
}

type R<T> = Result<T, DslError>;

impl Parser {
    fn new(src: &str, scope: Scope) -> R<Parser> {
        Ok(Parser { toks: lex(src)?, at: 0, scope, refs: Vec::new(), owner: None })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn err<T>(&self, msg: String) -> R<T> {
        Err(DslError::Syntax { pos: self.pos(), msg })
    }

    fn expected<T>(&self, what: &str) -> R<T> {
        self.err(format!("expected {}, found {}", what, describe(self.peek())))
    }

    fn is_punct(&self, c: char) -> bool {
        *self.peek() == Tok::Punct(c)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn punct(&mut self, c: char) -> R<()> {
        if self.is_punct(c) {
            self.bump();
            Ok(())
        } else {
            self.expected(&format!("`{}`", c))
        }
    }

    fn kw(&mut self, kw: &str) -> R<()> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.expected(&format!("`{}`", kw))
        }
    }

    fn ident(&mut self) -> R<(String, Pos)> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok((s, pos))
            }
            _ => self.expected("an identifier"),
        }
    }

    fn ident_list(&mut self) -> R<Vec<(String, Pos)>> {
        let mut out = vec![self.ident()?];
        while self.is_punct(',') {
            self.bump();
            out.push(self.ident()?);
        }
        Ok(out)
    }

    fn program(&mut self) -> R<Program> {
        let mut p = Program::default();
        self.kw("protocol")?;
        p.name = self.ident()?.0;
        if self.is_punct(';') {
            self.bump();
        }
        let mut declared: BTreeSet<String> = BTreeSet::new();
        while let Tok::Ident(kw) = self.peek().clone() {
            let list = match kw.as_str() {
                "channels" | "keys" | "vars" | "consts" => true,
                "secret" | "received" => false,
                _ => break,
            };
            self.bump();
            self.punct(':')?;
            if list {
                let names = self.ident_list()?;
                let kind = match kw.as_str() {
                    "channels" => NameKind::Channel,
                    "keys" => NameKind::Key,
                    "vars" => NameKind::Var,
                    _ => NameKind::Const,
                };
                for (n, pos) in names {
                    if n.contains(['#', '@']) {
                        return Err(DslError::Semantic {
                            pos,
                            msg: format!("`{}`: `#` and `@` are reserved for renamed copies", n),
                        });
                    }
                    if !declared.insert(n.clone()) {
                        return Err(DslError::Semantic { pos, msg: format!("`{}` is declared twice", n) });
                    }
                    self.scope.kinds.insert(n.clone(), kind);
                    match kind {
                        NameKind::Channel => p.channels.push(n),
                        NameKind::Key => p.keys.push(n),
                        NameKind::Var => p.vars.push(n),
                        NameKind::Const => p.consts.push(n),
                    }
                }
            } else {
                let (n, pos) = self.ident()?;
                match self.scope.kind(&n) {
                    Some(NameKind::Var) => {}
                    Some(_) => return Err(DslError::Semantic { pos, msg: format!("`{}` must be a variable", n) }),
                    None => return Err(DslError::Undeclared { pos, name: n }),
                }
                if kw == "secret" {
                    p.secret = Some(n);
                } else {
                    p.received = Some(n);
                }
            }
            self.punct(';')?;
        }
        let mut defined: BTreeMap<String, Def> = BTreeMap::new();
        let (mut system, mut modified) = (None, None);
        loop {
            let pos = self.pos();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "cont" || kw == "agent" => {
                    self.bump();
                    let (name, npos) = self.ident()?;
                    if self.scope.kind(&name).is_some() || defined.contains_key(&name) {
                        return Err(DslError::Semantic { pos: npos, msg: format!("`{}` is already defined", name) });
                    }
                    let def = if kw == "cont" { Def::Cont } else { Def::Agent };
                    defined.insert(name.clone(), def);
                    self.owner = Some(name.clone());
                    let body = self.block()?;
                    self.owner = None;
                    if def == Def::Cont {
                        p.conts.push((name, body));
                    } else {
                        p.agents.push((name, body));
                    }
                }
                Tok::Ident(kw) if kw == "system" || kw == "modified" => {
                    self.bump();
                    let slot = if kw == "system" { &mut system } else { &mut modified };
                    if slot.is_some() {
                        return Err(DslError::Semantic { pos, msg: format!("`{}` is defined twice", kw) });
                    }
                    *slot = Some(());
                    let body = self.block()?;
                    if kw == "system" {
                        p.system = body;
                    } else {
                        p.modified = body;
                    }
                }
                Tok::Ident(kw)
                    if ["channels", "keys", "vars", "consts", "secret", "received"].contains(&kw.as_str()) =>
                {
                    return self.err("declarations must precede definitions".into());
                }
                _ => return self.expected("`cont`, `agent`, `system` or `modified`"),
            }
        }
        if system.is_none() {
            return self.err("missing `system` block".into());
        }
        if modified.is_none() {
            return self.err("missing `modified` block".into());
        }
        self.check_refs(&defined)?;
        Ok(p)
    }

    fn check_refs(&self, defined: &BTreeMap<String, Def>) -> R<()> {
        let mut graph: BTreeMap<&str, Vec<&RefSite>> = BTreeMap::new();
        for r in &self.refs {
            match defined.get(&r.name) {
                None => return Err(DslError::Undeclared { pos: r.pos, name: r.name.clone() }),
                Some(Def::Agent) if r.cont_only => {
                    return Err(DslError::Semantic {
                        pos: r.pos,
                        msg: format!("`{}` is an agent, not a continuation", r.name),
                    })
                }
                _ => {}
            }
            if let Some(o) = &r.owner {
                graph.entry(o.as_str()).or_default().push(r);
            }
        }
        fn visit<'a>(
            n: &'a str,
            graph: &BTreeMap<&'a str, Vec<&'a RefSite>>,
            stack: &mut Vec<&'a str>,
            done: &mut BTreeSet<&'a str>,
        ) -> R<()> {
            if done.contains(n) {
                return Ok(());
            }
            stack.push(n);
            for r in graph.get(n).into_iter().flatten() {
                if let Some(i) = stack.iter().position(|s| *s == r.name) {
                    let mut path: Vec<String> = stack[i..].iter().map(|s| s.to_string()).collect();
                    path.push(r.name.clone());
                    return Err(DslError::Cyclic { pos: r.pos, path });
                }
                visit(&r.name, graph, stack, done)?;
            }
            stack.pop();
            done.insert(n);
            Ok(())
        }
        let mut done = BTreeSet::new();
        for n in defined.keys() {
            visit(n, &graph, &mut Vec::new(), &mut done)?;
        }
        Ok(())
    }

    fn block(&mut self) -> R<Body> {
        self.punct('{')?;
        let body = self.body(&['}'])?;
        self.punct('}')?;
        Ok(body)
    }

    /// Items up to (not including) one of `ends`.
    fn body(&mut self, ends: &[char]) -> R<Body> {
        let mut out: Body = Vec::new();
        loop {
            if ends.iter().any(|&c| self.is_punct(c)) {
                break;
            }
            if let Some(last) = out.last() {
                if !last.is_action() {
                    return self.err("only the last element of a sequence can be a process".into());
                }
            }
            out.push(self.item()?);
            if self.is_punct(';') {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn record(&mut self, name: String, pos: Pos, cont_only: bool) {
        self.refs.push(RefSite { owner: self.owner.clone(), name, cont_only, pos });
    }

    fn item(&mut self) -> R<Item> {
        let pos = self.pos();
        let Tok::Ident(kw) = self.peek().clone() else { return self.expected("an action or process") };
        match kw.as_str() {
            "out" | "in" => {
                self.bump();
                self.punct('(')?;
                let chan = self.term()?;
                self.punct(',')?;
                let msg = self.term()?;
                self.punct(')')?;
                Ok(if kw == "out" { Item::Out(chan, msg) } else { Item::In(chan, msg) })
            }
            "assert" => {
                self.bump();
                self.punct('(')?;
                let f = self.formula()?;
                self.punct(')')?;
                Ok(Item::Assert(f))
            }
            "cont" => {
                self.bump();
                let (n, npos) = self.ident()?;
                self.record(n.clone(), npos, true);
                Ok(Item::Cont(n))
            }
            "hide" => {
                self.bump();
                self.punct('(')?;
                let names = self.ident_list()?;
                self.punct(')')?;
                let mut out = Vec::new();
                for (n, npos) in names {
                    match self.scope.kind(&n) {
                        Some(NameKind::Var) | Some(NameKind::Key) => out.push(n),
                        Some(_) => {
                            return Err(DslError::Semantic { pos: npos, msg: format!("cannot hide constant `{}`", n) })
                        }
                        None => return Err(DslError::Undeclared { pos: npos, name: n }),
                    }
                }
                Ok(Item::Hide(out, self.block()?))
            }
            "par" => {
                self.bump();
                self.punct('(')?;
                let mut args = vec![self.arg()?];
                while self.is_punct(',') {
                    self.bump();
                    args.push(self.arg()?);
                }
                self.punct(')')?;
                Ok(Item::Par(args))
            }
            "choice" => {
                self.bump();
                self.punct('{')?;
                let mut branches = vec![self.body(&['|', '}'])?];
                while self.is_punct('|') {
                    self.bump();
                    branches.push(self.body(&['|', '}'])?);
                }
                self.punct('}')?;
                Ok(Item::Choice(branches))
            }
            "repl" => {
                self.bump();
                self.punct('(')?;
                let a = self.arg()?;
                self.punct(',')?;
                let n = match self.bump() {
                    Tok::Num(n) if n > 0 => n,
                    _ => {
                        return Err(DslError::Syntax { pos, msg: "replication bound must be a positive number".into() })
                    }
                };
                self.punct(')')?;
                Ok(Item::Repl(a, n))
            }
            _ => {
                let (n, npos) = self.ident()?;
                self.record(n.clone(), npos, false);
                Ok(Item::Ref(n))
            }
        }
    }

    fn arg(&mut self) -> R<Arg> {
        if self.is_punct('{') {
            return Ok(Arg::Block(self.block()?));
        }
        let (n, pos) = self.ident()?;
        self.record(n.clone(), pos, false);
        Ok(Arg::Ref(n))
    }

    fn term(&mut self) -> R<TermAst> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Lit(c) => {
                self.bump();
                Ok(TermAst::Lit(c))
            }
            Tok::Punct('(') => {
                self.bump();
                let mut items = Vec::new();
                if !self.is_punct(')') {
                    items.push(self.term()?);
                    while self.is_punct(',') {
                        self.bump();
                        items.push(self.term()?);
                    }
                }
                self.punct(')')?;
                Ok(TermAst::Tuple(items))
            }
            Tok::Ident(s) if s == "enc" => {
                self.bump();
                self.punct('(')?;
                let kpos = self.pos();
                let k = self.term()?;
                match &k {
                    TermAst::Name(n) if self.scope.kind(n) == Some(NameKind::Key) => {}
                    other => return Err(DslError::KeyMisuse { pos: kpos, name: other.to_string() }),
                }
                self.punct(',')?;
                let b = self.term()?;
                self.punct(')')?;
                Ok(TermAst::Enc(Box::new(k), Box::new(b)))
            }
            Tok::Ident(_) => {
                let (n, _) = self.ident()?;
                if self.scope.kind(&n).is_none() {
                    return Err(DslError::Undeclared { pos, name: n });
                }
                Ok(TermAst::Name(n))
            }
            _ => self.expected("a term"),
        }
    }

    fn formula(&mut self) -> R<Vec<AtomAst>> {
        let mut atoms = vec![self.atom()?];
        while self.is_punct('&') {
            self.bump();
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn atom(&mut self) -> R<AtomAst> {
        if self.is_kw("true") {
            self.bump();
            return Ok(AtomAst::True);
        }
        if self.is_kw("false") {
            self.bump();
            return Ok(AtomAst::False);
        }
        let lhs = self.term()?;
        if self.is_kw("in") {
            self.bump();
            self.punct('{')?;
            let mut pool = Vec::new();
            if !self.is_punct('}') {
                pool.push(self.term()?);
                while self.is_punct(',') {
                    self.bump();
                    pool.push(self.term()?);
                }
            }
            self.punct('}')?;
            return Ok(AtomAst::In(lhs, pool));
        }
        self.punct('=')?;
        Ok(AtomAst::Eq(lhs, self.term()?))
    }

    fn finish(&self) -> R<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => self.expected("end of input"),
        }
    }
}

/// Parses a whole `.spv` source.
pub fn parse_program(src: &str) -> Result<Program, DslError> {
    let mut p = Parser::new(src, Scope::default())?;
    let prog = p.program()?;
    p.finish()?;
    Ok(prog)
}

/// Parses a standalone term against the declarations of `scope`.
pub fn parse_term(src: &str, scope: &Scope) -> Result<Term, DslError> {
    let mut p = Parser::new(src, scope.clone())?;
    let t = p.term()?;
    p.finish()?;
    Ok(scope.term(&t))
}

pub fn parse_formula(src: &str, scope: &Scope) -> Result<Formula, DslError> {
    let mut p = Parser::new(src, scope.clone())?;
    let f = p.formula()?;
    p.finish()?;
    Ok(scope.formula(&f))
}
