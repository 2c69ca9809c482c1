//! Messages: variables, keys, constants, sequences and encryptions.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// A symbolic message.
///
/// The derived order (`Const < Var < Enc < Seq`, then fields) is the total
/// order used to pick class representatives.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Const(String),
    Var {
        name: String,
        key: bool,
    },
    Enc(Box<Term>, Box<Term>),
    /// Flat list; the empty sequence is ε.
    Seq(Vec<Term>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermError {
    /// An encryption key slot holds something other than a key variable.
    KeyPositionViolation(Term),
}

impl fmt::Display for TermError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermError::KeyPositionViolation(t) => write!(f, "`{}` cannot be used as a key", t),
        }
    }
}

pub type Substitution = BTreeMap<String, Term>;

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var { name: name.to_string(), key: false }
    }

    pub fn key(name: &str) -> Term {
        Term::Var { name: name.to_string(), key: true }
    }

    pub fn cnst(name: &str) -> Term {
        Term::Const(name.to_string())
    }

    pub fn eps() -> Term {
        Term::Seq(Vec::new())
    }

    /// Builds a normalized sequence.
    pub fn seq(items: Vec<Term>) -> Term {
        normalize(&Term::Seq(items))
    }

    /// Builds `enc(key, body)`, rejecting keys that are not key variables.
    pub fn enc(key: Term, body: Term) -> Result<Term, TermError> {
        if !key.is_key_var() {
            return Err(TermError::KeyPositionViolation(key));
        }
        Ok(Term::Enc(Box::new(key), Box::new(normalize(&body))))
    }

    pub fn is_key_var(&self) -> bool {
        matches!(self, Term::Var { key: true, .. })
    }

    pub fn is_eps(&self) -> bool {
        matches!(self, Term::Seq(v) if v.is_empty())
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Term::Var { name, .. } => Some(name),
            _ => None,
        }
    }

    /// Renames variables, keeping key flags. Unmapped names stay.
    pub fn rename(&self, map: &BTreeMap<String, String>) -> Term {
        match self {
            Term::Const(_) => self.clone(),
            Term::Var { name, key } => match map.get(name) {
                Some(n) => Term::Var { name: n.clone(), key: *key },
                None => self.clone(),
            },
            Term::Enc(k, b) => Term::Enc(Box::new(k.rename(map)), Box::new(b.rename(map))),
            Term::Seq(items) => Term::Seq(items.iter().map(|t| t.rename(map)).collect()),
        }
    }

    /// Compact rendering: `k(e)` for encryption, bare constants.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        write_pretty(self, &mut s);
        s
    }
}

fn write_pretty(t: &Term, out: &mut String) {
    match t {
        Term::Const(c) => out.push_str(c),
        Term::Var { name, .. } => out.push_str(name),
        Term::Enc(k, b) => {
            write_pretty(k, out);
            out.push('(');
            match &**b {
                Term::Seq(items) if !items.is_empty() => write_items_pretty(items, out),
                other => write_pretty(other, out),
            }
            out.push(')');
        }
        Term::Seq(items) => {
            out.push('(');
            write_items_pretty(items, out);
            out.push(')');
        }
    }
}

fn write_items_pretty(items: &[Term], out: &mut String) {
    for (i, t) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_pretty(t, out);
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => write!(f, "'{}'", c),
            Term::Var { name, .. } => f.write_str(name),
            Term::Enc(k, b) => write!(f, "enc({}, {})", k, b),
            Term::Seq(items) => {
                f.write_str("(")?;
                for (i, t) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", t)?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Flattens nested sequences, drops ε items and collapses singletons.
pub fn normalize(t: &Term) -> Term {
    match t {
        Term::Const(_) | Term::Var { .. } => t.clone(),
        Term::Enc(k, b) => Term::Enc(Box::new(normalize(k)), Box::new(normalize(b))),
        Term::Seq(items) => {
            let mut flat = Vec::with_capacity(items.len());
            for item in items {
                match normalize(item) {
                    Term::Seq(inner) => flat.extend(inner),
                    other => flat.push(other),
                }
            }
            if flat.len() == 1 {
                flat.pop().unwrap()
            } else {
                Term::Seq(flat)
            }
        }
    }
}

pub fn is_normalized(t: &Term) -> bool {
    match t {
        Term::Const(_) | Term::Var { .. } => true,
        Term::Enc(k, b) => is_normalized(k) && is_normalized(b),
        Term::Seq(items) => items.len() != 1 && items.iter().all(|i| !matches!(i, Term::Seq(_)) && is_normalized(i)),
    }
}

/// Variable names occurring anywhere in `t`, key positions included.
pub fn vars(t: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_vars(t, &mut out);
    out
}

pub fn collect_vars(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Const(_) => {}
        Term::Var { name, .. } => {
            out.insert(name.clone());
        }
        Term::Enc(k, b) => {
            collect_vars(k, out);
            collect_vars(b, out);
        }
        Term::Seq(items) => items.iter().for_each(|i| collect_vars(i, out)),
    }
}

/// Simultaneous substitution followed by normalization.
pub fn substitute(t: &Term, s: &Substitution) -> Result<Term, TermError> {
    Ok(normalize(&subst_raw(t, s)?))
}

fn subst_raw(t: &Term, s: &Substitution) -> Result<Term, TermError> {
    match t {
        Term::Const(_) => Ok(t.clone()),
        Term::Var { name, key } => match s.get(name) {
            Some(r) => {
                if *key && !r.is_key_var() {
                    return Err(TermError::KeyPositionViolation(r.clone()));
                }
                Ok(r.clone())
            }
            None => Ok(t.clone()),
        },
        Term::Enc(k, b) => {
            let k2 = subst_raw(k, s)?;
            if !k2.is_key_var() {
                return Err(TermError::KeyPositionViolation(k2));
            }
            Ok(Term::Enc(Box::new(k2), Box::new(subst_raw(b, s)?)))
        }
        Term::Seq(items) => {
            let mut out = Vec::with_capacity(items.len());
            for i in items {
                out.push(subst_raw(i, s)?);
            }
            Ok(Term::Seq(out))
        }
    }
}

/// Every subterm of `t`, `t` itself included.
pub fn subterms(t: &Term) -> Vec<&Term> {
    let mut out = Vec::new();
    let mut stack = alloc::vec![t];
    while let Some(x) = stack.pop() {
        out.push(x);
        match x {
            Term::Enc(k, b) => {
                stack.push(b);
                stack.push(k);
            }
            Term::Seq(items) => stack.extend(items.iter().rev()),
            _ => {}
        }
    }
    out
}
