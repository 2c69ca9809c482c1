//! The four case studies, built directly as syntax trees.
//!
//! The same protocols ship as `.spv` sources under `protocols/`; tests
//! check that both routes give identical systems.

use thiserror::Error;

use crate::ast::{Arg, AtomAst, Body, Item, Program, TermAst};
use crate::system::{ElabError, ProtocolSystem};

pub const BUILTINS: &[&str] = &["hidden_channel", "trusted_channel", "enc_message", "wmf"];

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum BuiltinError {
    #[error("unknown protocol `{0}` (known: hidden_channel, trusted_channel, enc_message, wmf)")]
    UnknownProtocol(String),
    #[error(transparent)]
    Elab(#[from] ElabError),
}

fn n(s: &str) -> TermAst {
    TermAst::Name(s.into())
}

fn lit(s: &str) -> TermAst {
    TermAst::Lit(s.into())
}

fn enc(k: &str, b: TermAst) -> TermAst {
    TermAst::Enc(Box::new(n(k)), Box::new(b))
}

fn out(c: &str, m: TermAst) -> Item {
    Item::Out(n(c), m)
}

fn inp(c: &str, m: TermAst) -> Item {
    Item::In(n(c), m)
}

fn assert_eq(a: &str, b: &str) -> Item {
    Item::Assert(vec![AtomAst::Eq(n(a), n(b))])
}

fn cont(s: &str) -> Item {
    Item::Cont(s.into())
}

fn names(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

fn hidden_par(hid: &[&str], agents: &[&str]) -> Body {
    vec![Item::Hide(names(hid), vec![Item::Par(agents.iter().map(|a| Arg::Ref(a.to_string())).collect())])]
}

/// The default continuation: one output of a disclosed constant.
fn stub() -> (String, Body) {
    ("P".into(), vec![out("o", lit("done"))])
}

fn hidden_channel() -> Program {
    Program {
        name: "hidden_channel".into(),
        channels: names(&["o"]),
        vars: names(&["c", "x", "y", "y'"]),
        secret: Some("x".into()),
        received: Some("y".into()),
        conts: vec![stub()],
        agents: vec![
            ("A".into(), vec![out("c", n("x"))]),
            ("B".into(), vec![inp("c", n("y")), cont("P")]),
            ("Bt".into(), vec![inp("c", n("y'")), assert_eq("y", "x"), cont("P")]),
        ],
        system: hidden_par(&["c"], &["A", "B"]),
        modified: hidden_par(&["c"], &["A", "Bt"]),
        ..Program::default()
    }
}

fn trusted_channel() -> Program {
    Program {
        name: "trusted_channel".into(),
        channels: names(&["o"]),
        vars: names(&["c_a", "c_b", "c", "x", "y", "y'"]),
        secret: Some("x".into()),
        received: Some("y".into()),
        conts: vec![stub()],
        agents: vec![
            ("A".into(), vec![Item::Hide(names(&["c"]), vec![out("c_a", n("c")), out("c", n("x"))])]),
            ("T".into(), vec![inp("c_a", n("c")), out("c_b", n("c"))]),
            ("B".into(), vec![inp("c_b", n("c")), inp("c", n("y")), cont("P")]),
            ("Bt".into(), vec![inp("c_b", n("c")), inp("c", n("y'")), assert_eq("y", "x"), cont("P")]),
        ],
        system: hidden_par(&["c_a", "c_b"], &["A", "T", "B"]),
        modified: hidden_par(&["c_a", "c_b"], &["A", "T", "Bt"]),
        ..Program::default()
    }
}

fn enc_message() -> Program {
    Program {
        name: "enc_message".into(),
        channels: names(&["c", "o"]),
        keys: names(&["k"]),
        vars: names(&["x", "y", "y'"]),
        secret: Some("x".into()),
        received: Some("y".into()),
        conts: vec![stub()],
        agents: vec![
            ("A".into(), vec![out("c", enc("k", n("x")))]),
            ("B".into(), vec![inp("c", enc("k", n("y"))), cont("P")]),
            ("Bt".into(), vec![inp("c", enc("k", n("y'"))), assert_eq("y", "x"), cont("P")]),
        ],
        system: hidden_par(&["k"], &["A", "B"]),
        modified: hidden_par(&["k"], &["A", "Bt"]),
        ..Program::default()
    }
}

fn wmf() -> Program {
    Program {
        name: "wmf".into(),
        channels: names(&["c_a", "c_b", "c"]),
        keys: names(&["k_a", "k_b", "k", "k_T", "k_B"]),
        vars: names(&["x", "y", "y'"]),
        secret: Some("x".into()),
        received: Some("y".into()),
        conts: vec![("P".into(), vec![])],
        agents: vec![
            (
                "A".into(),
                vec![Item::Hide(names(&["k"]), vec![out("c_a", enc("k_a", n("k"))), out("c", enc("k", n("x")))])],
            ),
            ("T".into(), vec![inp("c_a", enc("k_a", n("k_T"))), out("c_b", enc("k_b", n("k_T")))]),
            ("B".into(), vec![inp("c_b", enc("k_b", n("k_B"))), inp("c", enc("k_B", n("y"))), cont("P")]),
            (
                "Bt".into(),
                vec![inp("c_b", enc("k_b", n("k_B"))), inp("c", enc("k_B", n("y'"))), assert_eq("y", "x"), cont("P")],
            ),
        ],
        system: hidden_par(&["k_a", "k_b"], &["A", "T", "B"]),
        modified: hidden_par(&["k_a", "k_b"], &["A", "T", "Bt"]),
        ..Program::default()
    }
}

pub fn builtin_program(name: &str) -> Result<Program, BuiltinError> {
    match name {
        "hidden_channel" => Ok(hidden_channel()),
        "trusted_channel" => Ok(trusted_channel()),
        "enc_message" => Ok(enc_message()),
        "wmf" => Ok(wmf()),
        _ => Err(BuiltinError::UnknownProtocol(name.to_string())),
    }
}

pub fn builtin(name: &str) -> Result<ProtocolSystem, BuiltinError> {
    Ok(ProtocolSystem::from_program(builtin_program(name)?)?)
}

/// Shipped source text of a built-in.
pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "hidden_channel" => Some(include_str!("../protocols/hidden_channel.spv")),
        "trusted_channel" => Some(include_str!("../protocols/trusted_channel.spv")),
        "enc_message" => Some(include_str!("../protocols/enc_message.spv")),
        "wmf" => Some(include_str!("../protocols/wmf.spv")),
        "eq1" => Some(include_str!("../protocols/eq1.spv")),
        _ => None,
    }
}
