//! Conjunctions of equalities and memberships, and logical consequence.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::cc::Graph;
use crate::knowledge::{closure_contains, Frame};
use crate::term::{normalize, subterms, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Eq(Term, Term),
    In(Term, BTreeSet<Term>),
    /// The unsatisfiable atom, printed `false`.
    False,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Eq(a, b) => write!(f, "{} = {}", a, b),
            Atom::In(e, pool) => {
                write!(f, "{} in {{", e)?;
                for (i, t) in pool.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{}", t)?;
                }
                f.write_str("}")
            }
            Atom::False => f.write_str("false"),
        }
    }
}

/// A conjunction of atoms. The empty conjunction is ⊤.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Formula {
    atoms: BTreeSet<Atom>,
}

impl Formula {
    pub fn top() -> Formula {
        Formula::default()
    }

    pub fn bottom() -> Formula {
        let mut f = Formula::default();
        f.atoms.insert(Atom::False);
        f
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        let mut f = Formula::default();
        f.push_eq(normalize(&a), normalize(&b));
        f
    }

    pub fn member(e: Term, pool: BTreeSet<Term>) -> Formula {
        let mut f = Formula::default();
        f.push(Atom::In(e, pool));
        f
    }

    pub fn from_atoms<I: IntoIterator<Item = Atom>>(atoms: I) -> Formula {
        let mut f = Formula::default();
        for a in atoms {
            f.push(a);
        }
        f
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn is_top(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn conjoin(&self, other: &Formula) -> Formula {
        let mut f = self.clone();
        for a in &other.atoms {
            f.atoms.insert(a.clone());
        }
        f
    }

    /// Every term mentioned by an atom.
    pub fn terms(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        for a in &self.atoms {
            match a {
                Atom::Eq(x, y) => {
                    out.push(x);
                    out.push(y);
                }
                Atom::In(e, pool) => {
                    out.push(e);
                    out.extend(pool.iter());
                }
                Atom::False => {}
            }
        }
        out
    }

    pub fn map_terms(&self, f: &mut impl FnMut(&Term) -> Term) -> Formula {
        Formula::from_atoms(self.atoms.iter().map(|a| match a {
            Atom::Eq(x, y) => Atom::Eq(f(x), f(y)),
            Atom::In(e, pool) => Atom::In(f(e), pool.iter().map(&mut *f).collect()),
            Atom::False => Atom::False,
        }))
    }

    fn push(&mut self, a: Atom) {
        match a {
            Atom::Eq(x, y) => self.push_eq(normalize(&x), normalize(&y)),
            Atom::In(e, pool) => {
                self.atoms.insert(Atom::In(normalize(&e), pool.iter().map(normalize).collect()));
            }
            Atom::False => {
                self.atoms.insert(Atom::False);
            }
        }
    }

    fn push_eq(&mut self, x: Term, y: Term) {
        match (x, y) {
            (Term::Enc(k1, b1), Term::Enc(k2, b2)) => {
                self.push_eq(*k1, *k2);
                self.push_eq(*b1, *b2);
            }
            (x, y) if x == y => {}
            (x, y) => {
                let (l, r) = if x <= y { (x, y) } else { (y, x) };
                self.atoms.insert(Atom::Eq(l, r));
            }
        }
    }

    pub(crate) fn graph(&self) -> Graph {
        let mut g = Graph::new();
        self.load_into(&mut g);
        g
    }

    pub(crate) fn load_into(&self, g: &mut Graph) {
        for a in &self.atoms {
            match a {
                Atom::Eq(x, y) => g.assert_eq(x, y),
                Atom::In(e, pool) => {
                    g.add(e);
                    for t in pool {
                        g.add(t);
                    }
                }
                Atom::False => g.mark_false(),
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{}", a)?;
        }
        Ok(())
    }
}

pub fn conjoin(b1: &Formula, b2: &Formula) -> Formula {
    b1.conjoin(b2)
}

pub fn is_false(b: &Formula) -> bool {
    b.graph().is_inconsistent()
}

/// What may be assumed about variable values: `hidden` ones are fresh,
/// unequal to every constant, to each other and to the `public` variables
/// the environment knows from the start.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fresh {
    pub hidden: BTreeSet<String>,
    pub public: BTreeSet<String>,
}

fn pin(t: &Term, hidden: &BTreeSet<String>) -> Term {
    match t {
        Term::Var { name, .. } if hidden.contains(name) => Term::Const(format!("#{}", name)),
        Term::Const(_) | Term::Var { .. } => t.clone(),
        Term::Enc(k, x) => Term::Enc(Box::new(pin(k, hidden)), Box::new(pin(x, hidden))),
        Term::Seq(items) => Term::Seq(items.iter().map(|i| pin(i, hidden)).collect()),
    }
}

/// `is_false` under the assumptions in `fresh`. Each hidden variable is
/// read as a constant of its own; a public variable, known before any
/// hidden value existed, may not equal a term built from one.
pub fn is_false_fresh(b: &Formula, fresh: &Fresh) -> bool {
    if fresh.hidden.is_empty() {
        return is_false(b);
    }
    let pinned = b.map_terms(&mut |t| pin(t, &fresh.hidden));
    let mut g = pinned.graph();
    if g.is_inconsistent() {
        return true;
    }
    let mut tainted = BTreeSet::new();
    let mut public = BTreeSet::new();
    for t in pinned.terms() {
        for s in subterms(t) {
            match s {
                Term::Var { name, .. } if fresh.public.contains(name) => {
                    public.insert(s.clone());
                }
                _ if subterms(s).iter().any(|u| matches!(u, Term::Const(c) if c.starts_with('#'))) => {
                    tainted.insert(s.clone());
                }
                _ => {}
            }
        }
    }
    public.iter().any(|v| tainted.iter().any(|t| g.same(v, t)))
}

/// Whether every model of `b1` satisfies `b2`.
pub fn entails(b1: &Formula, b2: &Formula) -> bool {
    let mut g = b1.graph();
    if g.is_inconsistent() {
        return true;
    }
    for a in &b2.atoms {
        let ok = match a {
            Atom::Eq(x, y) => g.same(x, y),
            Atom::In(e, pool) => member_holds(&mut g, b1, e, pool),
            Atom::False => false,
        };
        if !ok {
            return false;
        }
    }
    true
}

fn member_holds(g: &mut Graph, b1: &Formula, e: &Term, pool: &BTreeSet<Term>) -> bool {
    let frame = Frame { disclosed: pool.clone(), cond: b1.clone() };
    if closure_contains(&frame, e) {
        return true;
    }
    b1.atoms.iter().any(|h| match h {
        Atom::In(e2, pool2) => g.same(e2, e) && pool2.iter().all(|t| closure_contains(&frame, t)),
        _ => false,
    })
}

pub fn eq_under(b: &Formula, e1: &Term, e2: &Term) -> bool {
    let mut g = b.graph();
    g.same(e1, e2)
}

/// Mutual entailment.
pub fn equivalent(b1: &Formula, b2: &Formula) -> bool {
    entails(b1, b2) && entails(b2, b1)
}
