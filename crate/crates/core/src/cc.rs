//! Congruence closure over terms with injective constructors.
//!
//! Sequences are compared through their flattened leaf lists. A leaf is a
//! class that cannot be split further: it holds a constant, an encryption or
//! a key variable (an atom), or only plain variables (length unknown).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::term::{normalize, Term};

pub(crate) type NodeId = usize;

#[derive(Clone, Debug)]
pub(crate) enum Kind {
    Const,
    Var { key: bool },
    Enc(NodeId, NodeId),
    Seq(Vec<NodeId>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Sig {
    Enc(NodeId, NodeId),
    Seq(Vec<NodeId>),
}

#[derive(Clone, Debug)]
pub(crate) struct Expansion {
    pub leaves: Vec<NodeId>,
    pub determined: bool,
    pub atomic_leaves: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct Graph {
    kinds: Vec<Kind>,
    terms: Vec<Term>,
    index: BTreeMap<Term, NodeId>,
    parent: Vec<NodeId>,
    eps: NodeId,
    inconsistent: bool,
    dirty: bool,
}

impl Graph {
    pub fn new() -> Graph {
        let mut g = Graph {
            kinds: Vec::new(),
            terms: Vec::new(),
            index: BTreeMap::new(),
            parent: Vec::new(),
            eps: 0,
            inconsistent: false,
            dirty: false,
        };
        g.eps = g.add(&Term::eps());
        g
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn term(&self, n: NodeId) -> &Term {
        &self.terms[n]
    }

    pub fn kind(&self, n: NodeId) -> &Kind {
        &self.kinds[n]
    }

    /// Adds `t` (normalized) and its subterms; returns its node.
    pub fn add(&mut self, t: &Term) -> NodeId {
        let t = normalize(t);
        self.add_norm(&t)
    }

    fn add_norm(&mut self, t: &Term) -> NodeId {
        if let Some(&n) = self.index.get(t) {
            return n;
        }
        let kind = match t {
            Term::Const(_) => Kind::Const,
            Term::Var { key, .. } => Kind::Var { key: *key },
            Term::Enc(k, b) => {
                let kn = self.add_norm(k);
                let bn = self.add_norm(b);
                Kind::Enc(kn, bn)
            }
            Term::Seq(items) => Kind::Seq(items.iter().map(|i| self.add_norm(i)).collect()),
        };
        let n = self.kinds.len();
        self.kinds.push(kind);
        self.terms.push(t.clone());
        self.index.insert(t.clone(), n);
        self.parent.push(n);
        self.dirty = true;
        n
    }

    pub fn find(&self, mut n: NodeId) -> NodeId {
        while self.parent[n] != n {
            n = self.parent[n];
        }
        n
    }

    fn union(&mut self, a: NodeId, b: NodeId) -> bool {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        self.dirty = true;
        true
    }

    pub fn assert_eq(&mut self, a: &Term, b: &Term) {
        let na = self.add(a);
        let nb = self.add(b);
        self.union(na, nb);
    }

    pub fn mark_false(&mut self) {
        self.inconsistent = true;
    }

    pub fn same(&mut self, a: &Term, b: &Term) -> bool {
        let na = self.add(a);
        let nb = self.add(b);
        self.close();
        self.inconsistent || self.find(na) == self.find(nb)
    }

    pub fn is_inconsistent(&mut self) -> bool {
        self.close();
        self.inconsistent
    }

    /// Class members grouped by root. Call after `close`.
    pub fn classes(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for n in 0..self.kinds.len() {
            out.entry(self.find(n)).or_default().push(n);
        }
        out
    }

    pub fn is_atomic_class(&self, members: &[NodeId]) -> bool {
        members.iter().any(|&m| match self.kinds[m] {
            Kind::Const | Kind::Enc(..) => true,
            Kind::Var { key } => key,
            Kind::Seq(_) => false,
        })
    }

    /// Flattened leaves of a sequence node's items.
    pub fn expand_items(&self, items: &[NodeId], classes: &BTreeMap<NodeId, Vec<NodeId>>) -> Expansion {
        let mut visiting = BTreeSet::new();
        let mut out = Expansion { leaves: Vec::new(), determined: true, atomic_leaves: 0 };
        for &i in items {
            self.expand_class(self.find(i), classes, &mut visiting, &mut out);
        }
        out
    }

    fn expand_class(
        &self,
        root: NodeId,
        classes: &BTreeMap<NodeId, Vec<NodeId>>,
        visiting: &mut BTreeSet<NodeId>,
        out: &mut Expansion,
    ) {
        let empty = Vec::new();
        let members = classes.get(&root).unwrap_or(&empty);
        if self.is_atomic_class(members) {
            out.leaves.push(root);
            out.atomic_leaves += 1;
            return;
        }
        if !visiting.contains(&root) {
            // Prefer a sequence whose own expansion is fully determined.
            let seqs: Vec<&Vec<NodeId>> = members
                .iter()
                .filter_map(|&m| match &self.kinds[m] {
                    Kind::Seq(items) => Some(items),
                    _ => None,
                })
                .collect();
            if !seqs.is_empty() {
                visiting.insert(root);
                let mut best: Option<Expansion> = None;
                for items in seqs {
                    let mut e = Expansion { leaves: Vec::new(), determined: true, atomic_leaves: 0 };
                    for &i in items {
                        self.expand_class(self.find(i), classes, visiting, &mut e);
                    }
                    let better = match &best {
                        None => true,
                        Some(b) => e.determined && !b.determined,
                    };
                    if better {
                        best = Some(e);
                    }
                }
                visiting.remove(&root);
                let b = best.unwrap();
                out.leaves.extend(b.leaves);
                out.determined &= b.determined;
                out.atomic_leaves += b.atomic_leaves;
                return;
            }
        }
        out.leaves.push(root);
        out.determined = false;
    }

    /// Runs congruence, injectivity and clash detection to a fixpoint.
    pub fn close(&mut self) {
        if !self.dirty {
            return;
        }
        loop {
            let mut changed = false;
            let classes = self.classes();
            let mut sigs: BTreeMap<Sig, NodeId> = BTreeMap::new();
            for n in 0..self.kinds.len() {
                let sig = match &self.kinds[n] {
                    Kind::Enc(k, b) => Sig::Enc(self.find(*k), self.find(*b)),
                    Kind::Seq(items) => {
                        let e = self.expand_items(items, &classes);
                        match e.leaves.len() {
                            0 => {
                                changed |= self.union(n, self.eps);
                                continue;
                            }
                            1 => {
                                changed |= self.union(n, e.leaves[0]);
                                continue;
                            }
                            _ => Sig::Seq(e.leaves),
                        }
                    }
                    _ => continue,
                };
                match sigs.get(&sig) {
                    Some(&m) => changed |= self.union(n, m),
                    None => {
                        sigs.insert(sig, n);
                    }
                }
            }
            let classes = self.classes();
            for members in classes.values() {
                // An atomic class holding a sequence with one atomic leaf:
                // the other leaves must be empty.
                if self.is_atomic_class(members) {
                    for &m in members {
                        let Kind::Seq(items) = &self.kinds[m] else { continue };
                        let e = self.expand_items(items, &classes);
                        if e.atomic_leaves == 1 {
                            for l in e.leaves {
                                if !self.is_atomic_class(classes.get(&l).map_or(&[][..], |v| &v[..])) {
                                    changed |= self.union(l, self.eps);
                                }
                            }
                        }
                    }
                }
                let mut first_enc: Option<(NodeId, NodeId)> = None;
                let mut first_seq: Option<Vec<NodeId>> = None;
                for &m in members {
                    match self.kinds[m].clone() {
                        Kind::Enc(k, b) => match first_enc {
                            None => first_enc = Some((k, b)),
                            Some((k0, b0)) => {
                                changed |= self.union(k0, k);
                                changed |= self.union(b0, b);
                            }
                        },
                        Kind::Seq(items) => {
                            let e = self.expand_items(&items, &classes);
                            if !e.determined {
                                continue;
                            }
                            match &first_seq {
                                None => first_seq = Some(e.leaves),
                                Some(l0) => {
                                    if l0.len() != e.leaves.len() {
                                        self.inconsistent = true;
                                    } else {
                                        for (a, b) in l0.clone().into_iter().zip(e.leaves) {
                                            changed |= self.union(a, b);
                                        }
                                    }
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.detect_clashes();
        self.dirty = false;
    }

    fn detect_clashes(&mut self) {
        if self.inconsistent {
            return;
        }
        let classes = self.classes();
        for members in classes.values() {
            let mut consts = BTreeSet::new();
            let mut has_enc = false;
            let mut atomic = false;
            let mut exact_len: Option<usize> = None;
            let mut min_len = 0usize;
            for &m in members {
                match &self.kinds[m] {
                    Kind::Const => {
                        consts.insert(&self.terms[m]);
                        atomic = true;
                    }
                    Kind::Enc(..) => {
                        has_enc = true;
                        atomic = true;
                    }
                    Kind::Var { key } => atomic |= *key,
                    Kind::Seq(items) => {
                        let e = self.expand_items(items, &classes);
                        min_len = min_len.max(e.atomic_leaves);
                        if e.determined {
                            match exact_len {
                                Some(l) if l != e.leaves.len() => self.inconsistent = true,
                                _ => exact_len = Some(e.leaves.len()),
                            }
                        }
                    }
                }
            }
            if consts.len() > 1 || (has_enc && !consts.is_empty()) {
                self.inconsistent = true;
            }
            if let Some(l) = exact_len {
                if min_len > l || (atomic && l != 1) {
                    self.inconsistent = true;
                }
            }
            if atomic && min_len >= 2 {
                self.inconsistent = true;
            }
            if self.inconsistent {
                return;
            }
        }
    }
}
