//! Syntax tree of `.spv` sources.

use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermAst {
    /// A declared channel, key, variable or constant name.
    Name(String),
    /// A quoted constant `'c'`.
    Lit(String),
    Enc(Box<TermAst>, Box<TermAst>),
    Tuple(Vec<TermAst>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AtomAst {
    True,
    False,
    Eq(TermAst, TermAst),
    In(TermAst, Vec<TermAst>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Arg {
    Ref(String),
    Block(Body),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Out(TermAst, TermAst),
    In(TermAst, TermAst),
    Assert(Vec<AtomAst>),
    Cont(String),
    Hide(Vec<String>, Body),
    Par(Vec<Arg>),
    Choice(Vec<Body>),
    Repl(Arg, usize),
    Ref(String),
}

impl Item {
    pub fn is_action(&self) -> bool {
        matches!(self, Item::Out(..) | Item::In(..) | Item::Assert(_))
    }
}

/// A `;`-separated sequence; only the last item may be a process.
pub type Body = Vec<Item>;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub channels: Vec<String>,
    pub keys: Vec<String>,
    pub vars: Vec<String>,
    pub consts: Vec<String>,
    pub secret: Option<String>,
    pub received: Option<String>,
    pub conts: Vec<(String, Body)>,
    pub agents: Vec<(String, Body)>,
    pub system: Body,
    pub modified: Body,
}

impl fmt::Display for TermAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermAst::Name(n) => f.write_str(n),
            TermAst::Lit(c) => write!(f, "'{}'", c),
            TermAst::Enc(k, b) => write!(f, "enc({}, {})", k, b),
            TermAst::Tuple(items) => {
                f.write_str("(")?;
                write_list(f, items)?;
                f.write_str(")")
            }
        }
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{}", t)?;
    }
    Ok(())
}

impl fmt::Display for AtomAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomAst::True => f.write_str("true"),
            AtomAst::False => f.write_str("false"),
            AtomAst::Eq(a, b) => write!(f, "{} = {}", a, b),
            AtomAst::In(e, pool) => {
                write!(f, "{} in {{", e)?;
                write_list(f, pool)?;
                f.write_str("}")
            }
        }
    }
}

fn write_body(out: &mut String, body: &Body, indent: usize) {
    let pad = "    ".repeat(indent);
    for (i, item) in body.iter().enumerate() {
        out.push_str(&pad);
        write_item(out, item, indent);
        if i + 1 < body.len() {
            out.push(';');
        }
        out.push('\n');
    }
}

fn write_block(out: &mut String, body: &Body, indent: usize) {
    if body.is_empty() {
        out.push_str("{ }");
        return;
    }
    out.push_str("{\n");
    write_body(out, body, indent + 1);
    out.push_str(&"    ".repeat(indent));
    out.push('}');
}

fn write_arg(out: &mut String, a: &Arg, indent: usize) {
    match a {
        Arg::Ref(n) => out.push_str(n),
        Arg::Block(b) => write_block(out, b, indent),
    }
}

fn write_item(out: &mut String, item: &Item, indent: usize) {
    match item {
        Item::Out(c, m) => out.push_str(&format!("out({}, {})", c, m)),
        Item::In(c, m) => out.push_str(&format!("in({}, {})", c, m)),
        Item::Assert(atoms) => {
            let parts: Vec<String> = atoms.iter().map(|a| a.to_string()).collect();
            out.push_str(&format!("assert({})", parts.join(" & ")));
        }
        Item::Cont(n) => out.push_str(&format!("cont {}", n)),
        Item::Ref(n) => out.push_str(n),
        Item::Hide(names, body) => {
            out.push_str(&format!("hide({}) ", names.join(", ")));
            write_block(out, body, indent);
        }
        Item::Par(args) => {
            out.push_str("par(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_arg(out, a, indent);
            }
            out.push(')');
        }
        Item::Choice(branches) => {
            out.push_str("choice {\n");
            for (i, b) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(&"    ".repeat(indent));
                    out.push_str("|\n");
                }
                write_body(out, b, indent + 1);
            }
            out.push_str(&"    ".repeat(indent));
            out.push('}');
        }
        Item::Repl(a, n) => {
            out.push_str("repl(");
            write_arg(out, a, indent);
            out.push_str(&format!(", {})", n));
        }
    }
}

/// Renders a program in the concrete syntax accepted by the parser.
pub fn pretty_print(p: &Program) -> String {
    let mut out = format!("protocol {};\n\n", p.name);
    for (kw, names) in [("channels", &p.channels), ("keys", &p.keys), ("vars", &p.vars), ("consts", &p.consts)] {
        if !names.is_empty() {
            out.push_str(&format!("{}: {};\n", kw, names.join(", ")));
        }
    }
    if let Some(x) = &p.secret {
        out.push_str(&format!("secret: {};\n", x));
    }
    if let Some(y) = &p.received {
        out.push_str(&format!("received: {};\n", y));
    }
    for (kw, defs) in [("cont", &p.conts), ("agent", &p.agents)] {
        for (name, body) in defs.iter() {
            out.push_str(&format!("\n{} {} ", kw, name));
            write_block(&mut out, body, 0);
            out.push('\n');
        }
    }
    for (kw, body) in [("system", &p.system), ("modified", &p.modified)] {
        out.push_str(&format!("\n{} ", kw));
        write_block(&mut out, body, 0);
        out.push('\n');
    }
    out
}
