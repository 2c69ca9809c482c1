//! Adversary knowledge: closures of disclosed terms under a condition, and
//! similarities between two such views.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::cc::{Graph, Kind, NodeId};
use crate::formula::Formula;
use crate::term::Term;

/// Disclosed terms together with the condition they were disclosed under.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Frame {
    pub disclosed: BTreeSet<Term>,
    pub cond: Formula,
}

impl Frame {
    pub fn new<I: IntoIterator<Item = Term>>(disclosed: I, cond: Formula) -> Frame {
        Frame { disclosed: disclosed.into_iter().map(|t| crate::term::normalize(&t)).collect(), cond }
    }
}

/// Analysed knowledge of one frame. Membership of further terms is decided
/// by synthesis over the known classes.
#[derive(Clone, Debug)]
pub(crate) struct Knowledge {
    g: Graph,
    classes: BTreeMap<NodeId, Vec<NodeId>>,
    known: BTreeSet<NodeId>,
    seen: usize,
    falsity: bool,
}

impl Knowledge {
    pub fn new(f: &Frame) -> Knowledge {
        let mut g = f.cond.graph();
        let ds: Vec<NodeId> = f.disclosed.iter().map(|t| g.add(t)).collect();
        let falsity = g.is_inconsistent();
        let classes = g.classes();
        let known = ds.iter().map(|&n| g.find(n)).collect();
        let seen = g.len();
        let mut k = Knowledge { g, classes, known, seen, falsity };
        if !falsity {
            k.analyze();
        }
        k
    }

    pub fn is_false(&self) -> bool {
        self.falsity
    }

    fn refresh(&mut self) {
        if self.g.len() == self.seen {
            return;
        }
        self.g.close();
        self.classes = self.g.classes();
        self.known = self.known.iter().map(|&n| self.g.find(n)).collect();
        self.seen = self.g.len();
    }

    /// Adds `t` to the graph and returns its class.
    pub fn class_of(&mut self, t: &Term) -> NodeId {
        let n = self.g.add(t);
        self.refresh();
        self.g.find(n)
    }

    fn analyze(&mut self) {
        loop {
            let mut found = Vec::new();
            for &r in &self.known {
                for &m in &self.classes[&r] {
                    match self.g.kind(m) {
                        Kind::Seq(items) => found.extend(items.iter().map(|&i| self.g.find(i))),
                        Kind::Enc(k, b) if self.synth(self.g.find(*k)) => {
                            found.push(self.g.find(*b));
                        }
                        _ => {}
                    }
                }
            }
            let before = self.known.len();
            self.known.extend(found);
            if self.known.len() == before {
                break;
            }
        }
    }

    pub fn synth(&self, root: NodeId) -> bool {
        let mut visiting = BTreeSet::new();
        self.synth_rec(root, &mut visiting)
    }

    fn synth_rec(&self, root: NodeId, visiting: &mut BTreeSet<NodeId>) -> bool {
        if self.falsity || self.known.contains(&root) {
            return true;
        }
        if !visiting.insert(root) {
            return false;
        }
        let ok = self.classes[&root].iter().any(|&m| match self.g.kind(m) {
            Kind::Seq(items) => items.iter().all(|&i| self.synth_rec(self.g.find(i), visiting)),
            Kind::Enc(k, b) => self.synth_rec(self.g.find(*k), visiting) && self.synth_rec(self.g.find(*b), visiting),
            _ => false,
        });
        visiting.remove(&root);
        ok
    }

    pub fn contains(&mut self, t: &Term) -> bool {
        let r = self.class_of(t);
        self.synth(r)
    }

    pub fn same(&mut self, a: &Term, b: &Term) -> bool {
        let ra = self.class_of(a);
        let rb = self.class_of(b);
        self.falsity || ra == rb
    }

    pub fn same_class(&self, a: NodeId, b: NodeId) -> bool {
        self.falsity || self.g.find(a) == self.g.find(b)
    }

    pub fn find(&self, n: NodeId) -> NodeId {
        self.g.find(n)
    }

    pub fn term(&self, n: NodeId) -> &Term {
        self.g.term(n)
    }

    /// Smallest term of every known class.
    pub fn core(&self) -> BTreeSet<Term> {
        self.known.iter().map(|r| self.classes[r].iter().map(|&m| self.g.term(m)).min().unwrap().clone()).collect()
    }

    pub fn constant_of(&self, root: NodeId) -> Option<&Term> {
        self.classes[&root].iter().map(|&m| self.g.term(m)).find(|t| matches!(t, Term::Const(_)))
    }

    /// Item lists of the sequence nodes in a class (ε included).
    pub fn seq_forms(&self, root: NodeId) -> Vec<Vec<NodeId>> {
        self.classes[&root]
            .iter()
            .filter_map(|&m| match self.g.kind(m) {
                Kind::Seq(items) => Some(items.clone()),
                _ => None,
            })
            .collect()
    }

    /// Encryptions in a class whose key is derivable.
    pub fn open_enc_forms(&self, root: NodeId) -> Vec<(NodeId, NodeId)> {
        self.classes[&root]
            .iter()
            .filter_map(|&m| match self.g.kind(m) {
                Kind::Enc(k, b) if self.synth(self.g.find(*k)) => Some((*k, *b)),
                _ => None,
            })
            .collect()
    }

    /// Whether some known class holds an encryption under a key equal to `key`.
    pub fn has_enc_under(&mut self, key: &Term) -> bool {
        let kr = self.class_of(key);
        self.known.iter().any(|r| {
            self.classes[r].iter().any(|&m| match self.g.kind(m) {
                Kind::Enc(k, _) => self.g.find(*k) == kr,
                _ => false,
            })
        })
    }
}

/// Whether `e` belongs to the closure of the frame.
pub fn closure_contains(f: &Frame, e: &Term) -> bool {
    Knowledge::new(f).contains(e)
}

/// The analysed core: one representative per known class.
pub fn analysis_saturate(f: &Frame) -> BTreeSet<Term> {
    Knowledge::new(f).core()
}

/// A correspondence between terms known on two sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Similarity {
    pub pairs: BTreeSet<(Term, Term)>,
    pub left: Frame,
    pub right: Frame,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SimilarityViolation {
    NotDerivable {
        side: Side,
        term: Term,
    },
    NotFunctional {
        first: (Term, Term),
        second: (Term, Term),
    },
    ConstantMismatch {
        pair: (Term, Term),
    },
    /// One side of the pair is false and the other is not.
    Vacuity,
    SeqShape {
        pair: (Term, Term),
    },
    SeqUnmatched {
        pair: (Term, Term),
    },
    EncShape {
        pair: (Term, Term),
    },
    EncUnmatched {
        pair: (Term, Term),
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for SimilarityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use SimilarityViolation::*;
        match self {
            NotDerivable { side, term } => write!(f, "{} is not derivable on the {:?} side", term, side),
            NotFunctional { first, second } => {
                write!(f, "pairs ({}, {}) and ({}, {}) disagree on equality", first.0, first.1, second.0, second.1)
            }
            ConstantMismatch { pair } => {
                write!(f, "pair ({}, {}) relates different constants", pair.0, pair.1)
            }
            Vacuity => f.write_str("exactly one condition is false"),
            SeqShape { pair } => write!(f, "pair ({}, {}) splits as a sequence on one side only", pair.0, pair.1),
            SeqUnmatched { pair } => {
                write!(f, "pair ({}, {}) has no related sequence components", pair.0, pair.1)
            }
            EncShape { pair } => write!(f, "pair ({}, {}) decrypts on one side only", pair.0, pair.1),
            EncUnmatched { pair } => {
                write!(f, "pair ({}, {}) has no related key and body", pair.0, pair.1)
            }
        }
    }
}

pub(crate) struct SimCtx {
    pub l: Knowledge,
    pub r: Knowledge,
}

enum Obligation {
    Seq(Vec<(Vec<NodeId>, Vec<NodeId>)>),
    Enc(Vec<((NodeId, NodeId), (NodeId, NodeId))>),
}

impl SimCtx {
    pub fn new(left: &Frame, right: &Frame) -> SimCtx {
        SimCtx { l: Knowledge::new(left), r: Knowledge::new(right) }
    }

    fn nodes(&mut self, pairs: &BTreeSet<(Term, Term)>) -> Vec<(NodeId, NodeId)> {
        let v: Vec<_> = pairs.iter().map(|(a, b)| (self.l.class_of(a), self.r.class_of(b))).collect();
        v.into_iter().map(|(a, b)| (self.l.find(a), self.r.find(b))).collect()
    }

    fn related(&self, nodes: &[(NodeId, NodeId)], a: NodeId, b: NodeId) -> bool {
        nodes.iter().any(|&(p, q)| self.l.same_class(p, a) && self.r.same_class(q, b))
    }

    pub fn violation(&mut self, pairs: &BTreeSet<(Term, Term)>) -> Option<SimilarityViolation> {
        self.check(pairs).err().map(|(v, _)| v)
    }

    // Internal; the error is consumed right away.
    #[allow(clippy::result_large_err)]
    fn check(&mut self, pairs: &BTreeSet<(Term, Term)>) -> Result<(), (SimilarityViolation, Option<Obligation>)> {
        use SimilarityViolation::*;
        let nodes = self.nodes(pairs);
        let list: Vec<&(Term, Term)> = pairs.iter().collect();
        if self.l.is_false() != self.r.is_false() {
            return Err((Vacuity, None));
        }
        if self.l.is_false() {
            return Ok(());
        }
        for (i, &(a, b)) in nodes.iter().enumerate() {
            if !self.l.synth(a) {
                return Err((NotDerivable { side: Side::Left, term: list[i].0.clone() }, None));
            }
            if !self.r.synth(b) {
                return Err((NotDerivable { side: Side::Right, term: list[i].1.clone() }, None));
            }
        }
        for i in 0..nodes.len() {
            for j in i + 1..nodes.len() {
                let el = nodes[i].0 == nodes[j].0;
                let er = nodes[i].1 == nodes[j].1;
                if el != er {
                    return Err((NotFunctional { first: list[i].clone(), second: list[j].clone() }, None));
                }
            }
        }
        for (i, &(a, b)) in nodes.iter().enumerate() {
            if self.l.constant_of(a) != self.r.constant_of(b) {
                return Err((ConstantMismatch { pair: list[i].clone() }, None));
            }
        }
        let mut pending = None;
        for (i, &(a, b)) in nodes.iter().enumerate() {
            let sl = self.l.seq_forms(a);
            let sr = self.r.seq_forms(b);
            if sl.is_empty() != sr.is_empty() {
                return Err((SeqShape { pair: list[i].clone() }, None));
            }
            let el = self.l.open_enc_forms(a);
            let er = self.r.open_enc_forms(b);
            if el.is_empty() != er.is_empty() {
                return Err((EncShape { pair: list[i].clone() }, None));
            }
            if pending.is_some() {
                continue;
            }
            if !sl.is_empty() {
                let mut cands = Vec::new();
                let mut met = false;
                for fl in &sl {
                    for fr in &sr {
                        if fl.len() != fr.len() {
                            continue;
                        }
                        if fl.iter().zip(fr).all(|(&x, &y)| self.related(&nodes, x, y)) {
                            met = true;
                        }
                        cands.push((fl.clone(), fr.clone()));
                    }
                }
                if !met {
                    pending = Some((SeqUnmatched { pair: list[i].clone() }, Some(Obligation::Seq(cands))));
                    continue;
                }
            }
            if !el.is_empty() {
                let mut cands = Vec::new();
                let mut met = false;
                for &fl in &el {
                    for &fr in &er {
                        if self.related(&nodes, fl.0, fr.0) && self.related(&nodes, fl.1, fr.1) {
                            met = true;
                        }
                        cands.push((fl, fr));
                    }
                }
                if !met {
                    pending = Some((EncUnmatched { pair: list[i].clone() }, Some(Obligation::Enc(cands))));
                }
            }
        }
        match pending {
            Some(p) => Err(p),
            None => Ok(()),
        }
    }

    /// Smallest-effort saturation of `seed` into a similarity, backtracking
    /// over the choice of decompositions.
    pub fn extend(&mut self, seed: BTreeSet<(Term, Term)>) -> Option<BTreeSet<(Term, Term)>> {
        let ob = match self.check(&seed) {
            Ok(()) => return Some(seed),
            Err((_, None)) => return None,
            Err((_, Some(ob))) => ob,
        };
        let choices: Vec<Vec<(Term, Term)>> = match ob {
            Obligation::Seq(c) => c
                .into_iter()
                .map(|(fl, fr)| {
                    fl.iter().zip(&fr).map(|(&x, &y)| (self.l.term(x).clone(), self.r.term(y).clone())).collect()
                })
                .collect(),
            Obligation::Enc(c) => c
                .into_iter()
                .map(|(fl, fr)| {
                    alloc::vec![
                        (self.l.term(fl.0).clone(), self.r.term(fr.0).clone()),
                        (self.l.term(fl.1).clone(), self.r.term(fr.1).clone()),
                    ]
                })
                .collect(),
        };
        for add in choices {
            let mut next = seed.clone();
            next.extend(add);
            if next.len() == seed.len() {
                continue;
            }
            if let Some(done) = self.extend(next) {
                return Some(done);
            }
        }
        None
    }
}

pub fn similarity_violation(s: &Similarity) -> Option<SimilarityViolation> {
    SimCtx::new(&s.left, &s.right).violation(&s.pairs)
}

pub fn check_similarity(s: &Similarity) -> bool {
    similarity_violation(s).is_none()
}

/// Saturates `seed` without pairing anything the obligations do not force.
pub fn extend_similarity(left: &Frame, right: &Frame, seed: BTreeSet<(Term, Term)>) -> Option<Similarity> {
    let mut ctx = SimCtx::new(left, right);
    ctx.extend(seed).map(|pairs| Similarity { pairs, left: left.clone(), right: right.clone() })
}

/// Extends `seed` and then pairs the remaining disclosed terms greedily in
/// term order.
pub fn find_similarity(left: &Frame, right: &Frame, seed: &BTreeSet<(Term, Term)>) -> Option<Similarity> {
    let mut ctx = SimCtx::new(left, right);
    let mut pairs = ctx.extend(seed.clone())?;
    for dl in &left.disclosed {
        if pairs.iter().any(|(p, _)| ctx.l.same(p, dl)) {
            continue;
        }
        let free: Vec<&Term> =
            right.disclosed.iter().filter(|dr| !pairs.iter().any(|(_, q)| ctx.r.same(q, dr))).collect();
        for dr in free {
            let mut next = pairs.clone();
            next.insert((dl.clone(), dr.clone()));
            if let Some(done) = ctx.extend(next) {
                pairs = done;
                break;
            }
        }
    }
    Some(Similarity { pairs, left: left.clone(), right: right.clone() })
}
