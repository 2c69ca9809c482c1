//! Elaboration of programs into process graphs.

use std::collections::{BTreeMap, BTreeSet};

use spv_core::process::{choice_labeled, prefix_labeled};
use spv_core::process::{replicate_with_limit, REPLICATION_LIMIT};
use spv_core::{hide, parallel, Action, Process, ProcessError};
use thiserror::Error;

use crate::ast::{Arg, Body, Item, Program};
use crate::parser::{parse_program, DslError, NameKind, Scope};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ElabError {
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("`{0}` is not defined")]
    Undefined(String),
    #[error("cyclic definition: {}", .0.join(" -> "))]
    Cyclic(Vec<String>),
    #[error("in `{name}`: {err}")]
    Process { name: String, err: ProcessError },
    #[error("continuation `{cont}` mentions hidden name `{name}`")]
    StubMentionsHidden { cont: String, name: String },
    #[error("`{0}` is not a declared variable")]
    BadVariable(String),
}

/// A protocol: its agents, the composed system, the variant whose
/// receiver re-asserts the sent value, and the continuation stub.
#[derive(Clone, Debug)]
pub struct ProtocolSystem {
    pub name: String,
    pub program: Program,
    pub agents: BTreeMap<String, Process>,
    pub system: Process,
    pub modified_system: Process,
    pub continuation: Process,
    /// Variable carrying the sent value (`x`).
    pub secret: String,
    /// Variable receiving it (`y`).
    pub received: String,
}

/// State names: `A0, A1, ...`, or `P, P1, ...` for continuations.
#[derive(Clone)]
struct Namer {
    base: String,
    bare_first: bool,
}

impl Namer {
    fn at(&self, i: usize) -> String {
        if i == 0 && self.bare_first {
            self.base.clone()
        } else {
            format!("{}{}", self.base, i)
        }
    }

    fn sub(&self, i: usize, j: usize) -> Namer {
        Namer { base: format!("{}{}", self.at(i), (b'a' + (j % 26) as u8) as char), bare_first: false }
    }
}

struct Elab<'a> {
    prog: &'a Program,
    scope: Scope,
    done: BTreeMap<String, Process>,
    stack: Vec<String>,
    repl_limit: usize,
}

impl<'a> Elab<'a> {
    fn def(&mut self, name: &str) -> Result<Process, ElabError> {
        if let Some(p) = self.done.get(name) {
            return Ok(p.clone());
        }
        if let Some(i) = self.stack.iter().position(|s| s == name) {
            let mut path = self.stack[i..].to_vec();
            path.push(name.to_string());
            return Err(ElabError::Cyclic(path));
        }
        let prog = self.prog;
        let (body, namer) = if let Some((_, b)) = prog.agents.iter().find(|(n, _)| n == name) {
            (b, Namer { base: name.to_string(), bare_first: false })
        } else if let Some((_, b)) = prog.conts.iter().find(|(n, _)| n == name) {
            (b, Namer { base: name.to_string(), bare_first: true })
        } else {
            return Err(ElabError::Undefined(name.to_string()));
        };
        self.stack.push(name.to_string());
        let p = self.body(body, &namer, 0, name)?;
        self.stack.pop();
        self.done.insert(name.to_string(), p.clone());
        Ok(p)
    }

    fn action(&self, item: &Item) -> Action {
        match item {
            Item::Out(c, m) => Action::output(self.scope.term(c), self.scope.term(m)),
            Item::In(c, m) => Action::input(self.scope.term(c), self.scope.term(m)),
            Item::Assert(f) => Action::Internal(self.scope.formula(f)),
            _ => unreachable!("not an action"),
        }
    }

    fn body(&mut self, body: &Body, namer: &Namer, start: usize, owner: &str) -> Result<Process, ElabError> {
        let n = body.iter().take_while(|i| i.is_action()).count();
        let tail = match body.get(n) {
            None => Process::zero(&namer.at(start + n)),
            Some(item) => self.process(item, namer, start + n, owner)?,
        };
        let mut p = tail;
        for i in (0..n).rev() {
            p = prefix_labeled(&namer.at(start + i), self.action(&body[i]), &p);
        }
        Ok(p)
    }

    fn arg(&mut self, a: &Arg, namer: &Namer, owner: &str) -> Result<Process, ElabError> {
        match a {
            Arg::Ref(n) => self.def(n),
            Arg::Block(b) => self.body(b, namer, 0, owner),
        }
    }

    fn process(&mut self, item: &Item, namer: &Namer, at: usize, owner: &str) -> Result<Process, ElabError> {
        match item {
            Item::Cont(n) | Item::Ref(n) => self.def(n),
            Item::Hide(names, b) => {
                let p = self.body(b, namer, at, owner)?;
                Ok(hide(&p, &names.iter().cloned().collect()))
            }
            Item::Par(args) => {
                let mut acc: Option<Process> = None;
                for (j, a) in args.iter().enumerate() {
                    let p = self.arg(a, &namer.sub(at, j), owner)?;
                    acc = Some(match acc {
                        None => p,
                        Some(q) => parallel(&q, &p),
                    });
                }
                Ok(acc.unwrap_or_else(|| Process::zero(&namer.at(at))))
            }
            Item::Choice(branches) => {
                let mut ps = Vec::new();
                for (j, b) in branches.iter().enumerate() {
                    ps.push(self.body(b, &namer.sub(at, j), 0, owner)?);
                }
                let mut acc = ps.pop().unwrap_or_else(|| Process::zero(&namer.at(at)));
                while let Some(p) = ps.pop() {
                    acc = choice_labeled(&namer.at(at), &p, &acc);
                }
                Ok(acc)
            }
            Item::Repl(a, n) => {
                let p = self.arg(a, &namer.sub(at, 0), owner)?;
                replicate_with_limit(&p, *n, self.repl_limit)
                    .map_err(|err| ElabError::Process { name: owner.to_string(), err })
            }
            Item::Out(..) | Item::In(..) | Item::Assert(_) => unreachable!("actions are prefixed"),
        }
    }
}

fn pick_var(scope: &Scope, given: &Option<String>, default: &str) -> Result<String, ElabError> {
    let name = given.clone().unwrap_or_else(|| default.to_string());
    match scope.kind(&name) {
        Some(NameKind::Var) => Ok(name),
        _ if given.is_none() => Ok(name),
        _ => Err(ElabError::BadVariable(name)),
    }
}

impl ProtocolSystem {
    /// Builds every process of a program with the process operators.
    pub fn from_program(prog: Program) -> Result<ProtocolSystem, ElabError> {
        ProtocolSystem::from_program_with_limit(prog, REPLICATION_LIMIT)
    }

    /// As `from_program`, with `repl` unfoldings capped at `repl_limit`
    /// product states.
    pub fn from_program_with_limit(prog: Program, repl_limit: usize) -> Result<ProtocolSystem, ElabError> {
        let scope = Scope::of(&prog);
        let mut e = Elab { prog: &prog, scope: scope.clone(), done: BTreeMap::new(), stack: Vec::new(), repl_limit };
        let mut agents = BTreeMap::new();
        for (n, _) in &prog.agents {
            agents.insert(n.clone(), e.def(n)?);
        }
        for (n, _) in &prog.conts {
            e.def(n)?;
        }
        let system = e.body(&prog.system, &Namer { base: "S".into(), bare_first: false }, 0, "system")?;
        let modified = e.body(&prog.modified, &Namer { base: "M".into(), bare_first: false }, 0, "modified")?;
        let (cont_name, continuation) = match prog.conts.first() {
            Some((n, _)) => (n.clone(), e.def(n)?),
            None => ("P".to_string(), Process::zero("P")),
        };
        let hidden: BTreeSet<&String> = system.hidden().iter().chain(modified.hidden().iter()).collect();
        if let Some(x) = continuation.vars().into_iter().find(|x| hidden.contains(x)) {
            return Err(ElabError::StubMentionsHidden { cont: cont_name, name: x });
        }
        let secret = pick_var(&scope, &prog.secret, "x")?;
        let received = pick_var(&scope, &prog.received, "y")?;
        Ok(ProtocolSystem {
            name: prog.name.clone(),
            agents,
            system,
            modified_system: modified,
            continuation,
            secret,
            received,
            program: prog,
        })
    }

    pub fn scope(&self) -> Scope {
        Scope::of(&self.program)
    }
}

/// Parses and elaborates a `.spv` source.
pub fn parse(src: &str) -> Result<ProtocolSystem, ElabError> {
    ProtocolSystem::from_program(parse_program(src)?)
}
