//! State labelings, equivalence witnesses, key-absence reductions and a
//! bounded search on execution trees.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::formula::{entails, equivalent, is_false_fresh, Formula, Fresh};
use crate::knowledge::{Frame, Knowledge, SimCtx, SimilarityViolation};
use crate::process::{exec_tree_bounded, input_feasible, step_literal, Action, ExecTree, Process, StateId};
use crate::term::Term;

pub type Pairs = BTreeSet<(Term, Term)>;

/// A frame `(D_s, b_s)` for some of the states of a process.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateLabeling {
    pub entries: BTreeMap<StateId, Frame>,
}

impl StateLabeling {
    pub fn get(&self, s: StateId) -> Option<&Frame> {
        self.entries.get(&s)
    }

    pub fn insert(&mut self, s: StateId, f: Frame) {
        self.entries.insert(s, f);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelCondition {
    InitialMissing,
    InitialMismatch,
    UnknownState(StateId),
    LiveEdgeToUnlabeled,
    CondNotStronger,
    NotDerivableAfter(Term),
    InternalCondNotStronger,
    DisclosedLost(Term),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelingViolation {
    /// Index of the offending transition, if the violation is on an edge.
    pub transition: Option<usize>,
    pub condition: LabelCondition,
}

impl LabelingViolation {
    pub fn describe(&self, p: &Process) -> String {
        let what = match &self.condition {
            LabelCondition::InitialMissing => "initial state is not labelled".to_string(),
            LabelCondition::InitialMismatch => {
                "initial label differs from the initial condition and disclosed set".to_string()
            }
            LabelCondition::UnknownState(s) => format!("label for unknown state {}", s),
            LabelCondition::LiveEdgeToUnlabeled => {
                "edge from a labelled state can fire but its target is unlabelled".to_string()
            }
            LabelCondition::CondNotStronger => "target condition does not entail source condition".to_string(),
            LabelCondition::NotDerivableAfter(t) => format!("{} is not derivable at the target", t),
            LabelCondition::InternalCondNotStronger => {
                "target condition does not entail source condition and guard".to_string()
            }
            LabelCondition::DisclosedLost(t) => format!("{} is lost across an internal edge", t),
        };
        match self.transition {
            Some(i) => {
                let t = &p.transitions()[i];
                format!("edge {} -{}-> {}: {}", p.label(t.from), t.action.pretty(), p.label(t.to), what)
            }
            None => what,
        }
    }
}

fn knowledge(f: &Frame) -> Knowledge {
    Knowledge::new(f)
}

/// Checks the labeling conditions on every edge between labelled states.
///
/// Message edges need a target condition that entails the source
/// condition, and the source disclosures plus the message derivable at the
/// target. Internal edges need the target
/// condition to entail the source condition with the guard, and the source
/// disclosures derivable at the target. Dead edges (`edge_dead`) never fire
/// and are exempt.
pub fn check_labeling(p: &Process, l: &StateLabeling) -> Result<(), LabelingViolation> {
    let fresh = p.fresh();
    let bad = |transition, condition| Err(LabelingViolation { transition, condition });
    for &s in l.entries.keys() {
        if s >= p.len() {
            return bad(None, LabelCondition::UnknownState(s));
        }
    }
    match l.get(p.initial()) {
        None => return bad(None, LabelCondition::InitialMissing),
        Some(f) => {
            if &f.disclosed != p.disclosed() || !equivalent(&f.cond, p.init_cond()) {
                return bad(None, LabelCondition::InitialMismatch);
            }
        }
    }
    for (i, t) in p.transitions().iter().enumerate() {
        let (Some(from), Some(to)) = (l.get(t.from), l.get(t.to)) else { continue };
        match &t.action {
            Action::Internal(a) => {
                if is_false_fresh(a, &fresh) {
                    continue;
                }
                if !entails(&to.cond, &from.cond.conjoin(a)) {
                    return bad(Some(i), LabelCondition::InternalCondNotStronger);
                }
                let mut kt = knowledge(to);
                if let Some(d) = from.disclosed.iter().find(|d| !kt.contains(d)) {
                    return bad(Some(i), LabelCondition::DisclosedLost(d.clone()));
                }
            }
            _ => {
                let (chan, msg) = t.action.message().unwrap();
                if !knowledge(from).contains(chan) {
                    continue;
                }
                if !entails(&to.cond, &from.cond) {
                    return bad(Some(i), LabelCondition::CondNotStronger);
                }
                let mut kt = knowledge(to);
                if let Some(d) = from.disclosed.iter().chain(core::iter::once(msg)).find(|d| !kt.contains(d)) {
                    return bad(Some(i), LabelCondition::NotDerivableAfter(d.clone()));
                }
            }
        }
    }
    Ok(())
}

/// Whether an edge leaving a state labelled `from` can never fire: its
/// channel is underivable, or its guard is false by itself under `fresh`.
pub fn edge_dead(fresh: &Fresh, from: &Frame, a: &Action) -> bool {
    match a {
        Action::Internal(g) => is_false_fresh(g, fresh),
        _ => !knowledge(from).contains(a.message().unwrap().0),
    }
}

/// An input whose pattern holds a ciphertext the environment can neither
/// build nor replay under the frame. Labels over-approximate knowledge, so
/// such an edge never fires from a labelled state.
pub fn input_blocked(from: &Frame, a: &Action) -> bool {
    match a {
        Action::Input { pattern, .. } => !input_feasible(&mut knowledge(from), pattern),
        _ => false,
    }
}

/// Every edge from a labelled state into an unlabelled one must be dead,
/// so executions never leave the labelled states.
pub fn check_coverage(p: &Process, l: &StateLabeling) -> Result<(), LabelingViolation> {
    let fresh = p.fresh();
    for (i, t) in p.transitions().iter().enumerate() {
        if let (Some(from), None) = (l.get(t.from), l.get(t.to)) {
            if !edge_dead(&fresh, from, &t.action) {
                return Err(LabelingViolation { transition: Some(i), condition: LabelCondition::LiveEdgeToUnlabeled });
            }
        }
    }
    Ok(())
}

/// Forward propagation in topological order. A state is labelled when
/// some live edge from a labelled state enters it; its condition is the
/// conjunction and its disclosed set the union of what those edges
/// contribute. Dead edges and edges from unlabelled states never fire and
/// are ignored.
pub fn synthesize_labeling(p: &Process) -> StateLabeling {
    let fresh = p.fresh();
    let mut l = StateLabeling::default();
    l.insert(p.initial(), Frame { disclosed: p.disclosed().clone(), cond: p.init_cond().clone() });
    let mut incoming: BTreeMap<StateId, Vec<usize>> = BTreeMap::new();
    for (i, t) in p.transitions().iter().enumerate() {
        incoming.entry(t.to).or_default().push(i);
    }
    for s in p.topo_order().unwrap_or_default() {
        if s == p.initial() {
            continue;
        }
        let Some(edges) = incoming.get(&s) else { continue };
        let mut cond = Formula::top();
        let mut disclosed = BTreeSet::new();
        let mut live = false;
        for &i in edges {
            let t = &p.transitions()[i];
            let Some(from) = l.get(t.from) else { continue };
            match &t.action {
                Action::Internal(a) => {
                    if is_false_fresh(a, &fresh) {
                        continue;
                    }
                    cond = cond.conjoin(&from.cond.conjoin(a));
                    disclosed.extend(from.disclosed.iter().cloned());
                }
                _ => {
                    let (chan, msg) = t.action.message().unwrap();
                    if !knowledge(from).contains(chan) {
                        continue;
                    }
                    cond = cond.conjoin(&from.cond);
                    disclosed.extend(from.disclosed.iter().cloned());
                    disclosed.insert(msg.clone());
                }
            }
            live = true;
        }
        if live {
            l.insert(s, Frame { disclosed, cond });
        }
    }
    l
}

/// Drops disclosed terms derivable from the others, largest first.
pub fn reduced_frame(f: &Frame) -> Frame {
    let mut d = f.disclosed.clone();
    for t in f.disclosed.iter().rev() {
        let mut rest = d.clone();
        rest.remove(t);
        if knowledge(&Frame { disclosed: rest.clone(), cond: f.cond.clone() }).contains(t) {
            d = rest;
        }
    }
    Frame { disclosed: d, cond: f.cond.clone() }
}

/// Edges no execution can take, found by exploring reachable
/// configurations with the literal step relation.
pub fn dead_edges(p: &Process) -> BTreeSet<usize> {
    let fresh = p.fresh();
    let mut live = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let start = (p.initial(), p.init_cond().clone(), p.disclosed().clone());
    let mut stack = alloc::vec![start.clone()];
    seen.insert(start);
    while let Some((s, b, d)) = stack.pop() {
        for (i, t) in p.outgoing(s) {
            if let Some((b2, d2)) = step_literal(&fresh, &b, &d, &t.action) {
                live.insert(i);
                let next = (t.to, b2, d2);
                if seen.insert(next.clone()) {
                    stack.push(next);
                }
            }
        }
    }
    (0..p.transitions().len()).filter(|i| !live.contains(i)).collect()
}

fn key_absent(from: &Frame, action: &Action) -> bool {
    let Action::Input { pattern: Term::Enc(key, _), .. } = action else {
        return false;
    };
    let mut k = knowledge(from);
    !k.is_false() && !k.contains(key) && !k.has_enc_under(key)
}

/// Encrypted-input edges between labelled states whose key, and every
/// ciphertext under it, is underivable at the source.
pub fn removable_edges(p: &Process, l: &StateLabeling) -> Vec<usize> {
    p.transitions()
        .iter()
        .enumerate()
        .filter(|(_, t)| l.get(t.to).is_some())
        .filter(|(_, t)| l.get(t.from).is_some_and(|f| key_absent(f, &t.action)))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RemovalError {
    Labeling(LabelingViolation),
    NotRemovable(usize),
}

/// Removes the given edges, each of which must be justified by `l`, then
/// prunes unreachable states.
pub fn remove_edges(p: &Process, l: &StateLabeling, edges: &[usize]) -> Result<Process, RemovalError> {
    check_labeling(p, l).map_err(RemovalError::Labeling)?;
    check_coverage(p, l).map_err(RemovalError::Labeling)?;
    let ok: BTreeSet<usize> = removable_edges(p, l).into_iter().collect();
    if let Some(&e) = edges.iter().find(|e| !ok.contains(e)) {
        return Err(RemovalError::NotRemovable(e));
    }
    Ok(p.without_edges(&edges.iter().copied().collect()).prune_unreachable())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RemovalReason {
    /// No execution reaches the edge with its step defined.
    Dead,
    /// Encrypted input whose key is unavailable.
    KeyAbsent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RemovedEdge {
    pub pass: usize,
    pub from: String,
    pub action: Action,
    pub to: String,
    pub reason: RemovalReason,
    /// Source label with redundant disclosures dropped.
    pub frame: Option<Frame>,
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub process: Process,
    pub removed: Vec<RemovedEdge>,
    /// Graph after each pass that removed something.
    pub passes: Vec<Process>,
}

/// Prunes dead edges, removes key-absent encrypted inputs under the
/// synthesized labeling, and drops unreachable states, until nothing
/// changes.
pub fn reduce(p: &Process) -> Reduction {
    let mut cur = p.clone();
    let mut removed = Vec::new();
    let mut passes = Vec::new();
    for pass in 1.. {
        let dead = dead_edges(&cur);
        for &i in &dead {
            let t = &cur.transitions()[i];
            removed.push(RemovedEdge {
                pass,
                from: cur.label(t.from).to_string(),
                action: t.action.clone(),
                to: cur.label(t.to).to_string(),
                reason: RemovalReason::Dead,
                frame: None,
            });
        }
        let next = cur.without_edges(&dead).prune_unreachable();
        let l = synthesize_labeling(&next);
        let cut = removable_edges(&next, &l);
        for &i in &cut {
            let t = &next.transitions()[i];
            removed.push(RemovedEdge {
                pass,
                from: next.label(t.from).to_string(),
                action: t.action.clone(),
                to: next.label(t.to).to_string(),
                reason: RemovalReason::KeyAbsent,
                frame: l.get(t.from).map(reduced_frame),
            });
        }
        let next = next.without_edges(&cut.into_iter().collect()).prune_unreachable();
        if next == cur {
            break;
        }
        passes.push(next.clone());
        cur = next;
    }
    Reduction { process: cur, removed, passes }
}

/// A certificate for the sufficient condition: related states, a
/// similarity per related pair and a labeling of each process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceWitness {
    pub relation: BTreeSet<(StateId, StateId)>,
    pub similarities: BTreeMap<(StateId, StateId), Pairs>,
    pub labeling_left: StateLabeling,
    pub labeling_right: StateLabeling,
    pub mu0: Pairs,
}

impl EquivalenceWitness {
    /// The same witness with the two processes swapped.
    pub fn flip(&self) -> EquivalenceWitness {
        let sw = |p: &Pairs| p.iter().map(|(a, b)| (b.clone(), a.clone())).collect::<Pairs>();
        EquivalenceWitness {
            relation: self.relation.iter().map(|&(a, b)| (b, a)).collect(),
            similarities: self.similarities.iter().map(|(&(a, b), m)| ((b, a), sw(m))).collect(),
            labeling_left: self.labeling_right.clone(),
            labeling_right: self.labeling_left.clone(),
            mu0: sw(&self.mu0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessViolation {
    Labeling { side: Side, violation: LabelingViolation },
    InitialNotRelated,
    UnlabeledState { side: Side, state: StateId },
    MissingSimilarity { pair: (StateId, StateId) },
    StraySimilarity { pair: (StateId, StateId) },
    Similarity { pair: (StateId, StateId), violation: Box<SimilarityViolation> },
    Mu0Mismatch,
    Mu0NotIdentity { pair: (Term, Term) },
    Unmatched { side: Side, pair: (StateId, StateId), transition: usize },
}

impl WitnessViolation {
    pub fn describe(&self, p1: &Process, p2: &Process) -> String {
        let pl = |(a, b): (StateId, StateId)| format!("({}, {})", p1.label(a), p2.label(b));
        match self {
            WitnessViolation::Labeling { side, violation } => {
                let p = if *side == Side::Left { p1 } else { p2 };
                format!("{:?} labeling: {}", side, violation.describe(p))
            }
            WitnessViolation::InitialNotRelated => "initial states are not related".to_string(),
            WitnessViolation::UnlabeledState { side, state } => {
                let p = if *side == Side::Left { p1 } else { p2 };
                format!("related state {} has no {:?} label", p.label(*state), side)
            }
            WitnessViolation::MissingSimilarity { pair } => format!("no similarity for {}", pl(*pair)),
            WitnessViolation::StraySimilarity { pair } => {
                format!("similarity given for unrelated pair {}", pl(*pair))
            }
            WitnessViolation::Similarity { pair, violation } => {
                format!("similarity of {} is invalid: {}", pl(*pair), violation)
            }
            WitnessViolation::Mu0Mismatch => "mu0 differs from the similarity of the initial pair".to_string(),
            WitnessViolation::Mu0NotIdentity { pair } => {
                format!("mu0 pair ({}, {}) is not a shared initial disclosure paired with itself", pair.0, pair.1)
            }
            WitnessViolation::Unmatched { side, pair, transition } => {
                let p = if *side == Side::Left { p1 } else { p2 };
                let t = &p.transitions()[*transition];
                format!(
                    "at {}, {:?} edge {} -{}-> {} has no match",
                    pl(*pair),
                    side,
                    p.label(t.from),
                    t.action.pretty(),
                    p.label(t.to)
                )
            }
        }
    }
}

/// One side of a search: a graph whose nodes carry frames.
struct Arena {
    frames: Vec<Option<Frame>>,
    /// (action, target, transition index in the underlying process)
    edges: Vec<Vec<(Action, usize, usize)>>,
    tau: Vec<Vec<usize>>,
    names: Vec<String>,
    initial: usize,
    fresh: Fresh,
}

impl Arena {
    fn from_process(p: &Process, l: &StateLabeling) -> Arena {
        let mut edges = alloc::vec![Vec::new(); p.len()];
        for (i, t) in p.transitions().iter().enumerate() {
            edges[t.from].push((t.action.clone(), t.to, i));
        }
        let frames = p.states().map(|s| l.get(s).cloned()).collect();
        let names = p.labels().to_vec();
        Arena::finish(frames, edges, names, p.initial(), p.fresh())
    }

    fn from_tree(p: &Process, t: &ExecTree) -> Arena {
        let mut edges = alloc::vec![Vec::new(); t.len()];
        for (i, n) in t.nodes.iter().enumerate() {
            if let Some((up, e)) = n.parent {
                edges[up].push((p.transitions()[e].action.clone(), i, e));
            }
        }
        let frames =
            t.nodes.iter().map(|n| Some(Frame { disclosed: n.disclosed.clone(), cond: n.cond.clone() })).collect();
        let names = t.nodes.iter().enumerate().map(|(i, n)| format!("{}#{}", p.label(n.state), i)).collect();
        Arena::finish(frames, edges, names, 0, p.fresh())
    }

    fn finish(
        frames: Vec<Option<Frame>>,
        edges: Vec<Vec<(Action, usize, usize)>>,
        names: Vec<String>,
        initial: usize,
        fresh: Fresh,
    ) -> Arena {
        let tau = (0..frames.len())
            .map(|s| {
                let mut out = alloc::vec![s];
                let mut i = 0;
                while i < out.len() {
                    for (a, t, _) in &edges[out[i]] {
                        if a.is_internal() && !out.contains(t) {
                            out.push(*t);
                        }
                    }
                    i += 1;
                }
                out
            })
            .collect();
        Arena { frames, edges, tau, names, initial, fresh }
    }

    fn edge_dead(&self, s: usize, a: &Action) -> bool {
        self.frames[s].as_ref().is_none_or(|f| edge_dead(&self.fresh, f, a))
    }
}

type Rel = BTreeMap<(usize, usize), Pairs>;

struct Cand {
    pair: (usize, usize),
    extra: Vec<(Term, Term)>,
}

struct Pending {
    side: usize,
    pair: (usize, usize),
    transition: usize,
    cands: Vec<Cand>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Exhausted;

struct Engine<'a> {
    a: [&'a Arena; 2],
    tree_mode: bool,
    modulo: bool,
    mu0: Pairs,
    ctxs: BTreeMap<(usize, usize), SimCtx>,
    node_k: [BTreeMap<usize, Knowledge>; 2],
    budget: usize,
    used: usize,
    deepest: Option<(usize, Pending)>,
}

fn orient<T>(side: usize, mover: T, matcher: T) -> (T, T) {
    if side == 0 {
        (mover, matcher)
    } else {
        (matcher, mover)
    }
}

impl<'a> Engine<'a> {
    fn new(l: &'a Arena, r: &'a Arena, tree_mode: bool, mu0: Pairs, budget: usize) -> Engine<'a> {
        Engine {
            a: [l, r],
            tree_mode,
            modulo: false,
            mu0,
            ctxs: BTreeMap::new(),
            node_k: [BTreeMap::new(), BTreeMap::new()],
            budget,
            used: 0,
            deepest: None,
        }
    }

    fn ctx(&mut self, pair: (usize, usize)) -> &mut SimCtx {
        let a = self.a;
        self.ctxs.entry(pair).or_insert_with(|| {
            SimCtx::new(a[0].frames[pair.0].as_ref().unwrap(), a[1].frames[pair.1].as_ref().unwrap())
        })
    }

    fn blocked(&mut self, side: usize, node: usize, a: &Action) -> bool {
        let arena = self.a[side];
        let Some(f) = arena.frames[node].as_ref() else { return false };
        let Action::Input { pattern, .. } = a else { return false };
        let k = self.node_k[side].entry(node).or_insert_with(|| Knowledge::new(f));
        !input_feasible(k, pattern)
    }

    fn same_at(&mut self, side: usize, node: usize, a: &Term, b: &Term) -> bool {
        if a == b {
            return true;
        }
        let arena = self.a[side];
        let k = self.node_k[side].entry(node).or_insert_with(|| Knowledge::new(arena.frames[node].as_ref().unwrap()));
        k.same(a, b)
    }

    /// Both channels denote the two sides of one mu0 pair, each modulo the
    /// condition of the node the edge leaves.
    fn channels_match(&mut self, side: usize, (n1, d1): (usize, &Term), (n2, d2): (usize, &Term)) -> bool {
        let (l, r) = orient(side, (n1, d1), (n2, d2));
        if l.1 == r.1 && self.mu0.contains(&(l.1.clone(), r.1.clone())) {
            return true;
        }
        let mu0: Vec<(Term, Term)> = self.mu0.iter().cloned().collect();
        mu0.iter().any(|(m1, m2)| self.same_at(0, l.0, l.1, m1) && self.same_at(1, r.0, r.1, m2))
    }

    /// Candidate matches, best first: pairs already related, then matcher
    /// states whose name shares the longest prefix with the mover's target,
    /// then fewest internal steps. The order only steers the search.
    fn candidates(
        &mut self,
        rel: &Rel,
        side: usize,
        pair: (usize, usize),
        action: &Action,
        target: usize,
    ) -> Vec<Cand> {
        let (this, other) = if side == 0 { pair } else { (pair.1, pair.0) };
        let oa = self.a[1 - side];
        let mut out: Vec<Cand> = Vec::new();
        match action.message() {
            Some((d, e)) => {
                for &t in &oa.tau[other] {
                    for (a2, t2, _) in &oa.edges[t] {
                        let Some((d2, e2)) = a2.message() else { continue };
                        if a2.is_input() != action.is_input() {
                            continue;
                        }
                        if oa.edge_dead(t, a2) || (a2.is_input() && self.blocked(1 - side, t, a2)) {
                            continue;
                        }
                        if !self.tree_mode && !self.channels_match(side, (this, d), (t, d2)) {
                            continue;
                        }
                        for &t3 in &oa.tau[*t2] {
                            if oa.frames[t3].is_none() {
                                continue;
                            }
                            let mut extra = alloc::vec![orient(side, e.clone(), e2.clone())];
                            if self.tree_mode {
                                extra.push(orient(side, d.clone(), d2.clone()));
                            }
                            out.push(Cand { pair: orient(side, target, t3), extra });
                        }
                    }
                }
            }
            None => {
                for &t3 in &oa.tau[other] {
                    if oa.frames[t3].is_some() {
                        out.push(Cand { pair: orient(side, target, t3), extra: Vec::new() });
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        out.retain(|c| seen.insert((c.pair, c.extra.clone())));
        let tname = self.a[side].names[target].as_bytes();
        let m = 1 - side;
        out.sort_by_cached_key(|c| {
            let n = if m == 0 { c.pair.0 } else { c.pair.1 };
            let common = tname.iter().zip(oa.names[n].as_bytes()).take_while(|(a, b)| a == b).count();
            (!rel.contains_key(&c.pair), usize::MAX - common)
        });
        out
    }

    fn included(&mut self, target: (usize, usize), items: &[&(Term, Term)], into: &Pairs) -> bool {
        if !self.modulo {
            return items.iter().all(|p| into.contains(p));
        }
        let ctx = self.ctx(target);
        items.iter().all(|(a, b)| into.iter().any(|(p, q)| ctx.l.same(a, p) && ctx.r.same(b, q)))
    }

    fn first_pending(&mut self, rel: &Rel) -> Option<Pending> {
        for (&pair, mu) in rel {
            for side in 0..2 {
                let arena = self.a[side];
                let node = if side == 0 { pair.0 } else { pair.1 };
                for (action, target, transition) in &arena.edges[node] {
                    if arena.edge_dead(node, action) || (action.is_input() && self.blocked(side, node, action)) {
                        continue;
                    }
                    if arena.frames[*target].is_none() {
                        return Some(Pending { side, pair, transition: *transition, cands: Vec::new() });
                    }
                    let cands = self.candidates(rel, side, pair, action, *target);
                    let mut met = false;
                    for c in &cands {
                        let Some(m2) = rel.get(&c.pair) else { continue };
                        let items: Vec<&(Term, Term)> = mu.iter().chain(c.extra.iter()).collect();
                        if self.included(c.pair, &items, m2) {
                            met = true;
                            break;
                        }
                    }
                    if !met {
                        return Some(Pending { side, pair, transition: *transition, cands });
                    }
                }
            }
        }
        None
    }

    fn apply(&mut self, rel: &Rel, from: (usize, usize), c: &Cand) -> Option<Rel> {
        let mut seed = rel[&from].clone();
        seed.extend(c.extra.iter().cloned());
        if let Some(old) = rel.get(&c.pair) {
            seed.extend(old.iter().cloned());
        }
        let mu = self.ctx(c.pair).extend(seed)?;
        if rel.get(&c.pair) == Some(&mu) {
            return None;
        }
        let mut next = rel.clone();
        next.insert(c.pair, mu);
        Some(next)
    }

    fn dfs(&mut self, rel: Rel, depth: usize) -> Result<Option<Rel>, Exhausted> {
        self.used += 1;
        if self.used > self.budget {
            return Err(Exhausted);
        }
        let Some(p) = self.first_pending(&rel) else { return Ok(Some(rel)) };
        for c in &p.cands {
            if let Some(next) = self.apply(&rel, p.pair, c) {
                if let Some(done) = self.dfs(next, depth + 1)? {
                    return Ok(Some(done));
                }
            }
        }
        if self.deepest.as_ref().is_none_or(|(d, _)| depth >= *d) {
            self.deepest = Some((depth, p));
        }
        Ok(None)
    }

    fn start(&mut self) -> Result<Option<Rel>, Exhausted> {
        let init = (self.a[0].initial, self.a[1].initial);
        if self.a[0].frames[init.0].is_none() || self.a[1].frames[init.1].is_none() {
            return Ok(None);
        }
        let mu0 = self.mu0.clone();
        let Some(mu) = self.ctx(init).extend(mu0) else { return Ok(None) };
        let mut rel = Rel::new();
        rel.insert(init, mu);
        self.dfs(rel, 0)
    }
}

fn shared_identity(p1: &Process, p2: &Process) -> Pairs {
    p1.disclosed().intersection(p2.disclosed()).map(|t| (t.clone(), t.clone())).collect()
}

/// Verifies all conditions of a witness for `p1 ≈ p2`.
pub fn check_witness(p1: &Process, p2: &Process, w: &EquivalenceWitness) -> Result<(), WitnessViolation> {
    check_labeling(p1, &w.labeling_left).map_err(|v| WitnessViolation::Labeling { side: Side::Left, violation: v })?;
    check_labeling(p2, &w.labeling_right)
        .map_err(|v| WitnessViolation::Labeling { side: Side::Right, violation: v })?;
    check_coverage(p1, &w.labeling_left).map_err(|v| WitnessViolation::Labeling { side: Side::Left, violation: v })?;
    check_coverage(p2, &w.labeling_right)
        .map_err(|v| WitnessViolation::Labeling { side: Side::Right, violation: v })?;
    let init = (p1.initial(), p2.initial());
    if !w.relation.contains(&init) {
        return Err(WitnessViolation::InitialNotRelated);
    }
    for &(a, b) in &w.relation {
        if a >= p1.len() || w.labeling_left.get(a).is_none() {
            return Err(WitnessViolation::UnlabeledState { side: Side::Left, state: a });
        }
        if b >= p2.len() || w.labeling_right.get(b).is_none() {
            return Err(WitnessViolation::UnlabeledState { side: Side::Right, state: b });
        }
        if !w.similarities.contains_key(&(a, b)) {
            return Err(WitnessViolation::MissingSimilarity { pair: (a, b) });
        }
    }
    if let Some(&pair) = w.similarities.keys().find(|k| !w.relation.contains(k)) {
        return Err(WitnessViolation::StraySimilarity { pair });
    }
    let left = Arena::from_process(p1, &w.labeling_left);
    let right = Arena::from_process(p2, &w.labeling_right);
    let mut eng = Engine::new(&left, &right, false, w.mu0.clone(), usize::MAX);
    eng.modulo = true;
    for (&pair, mu) in &w.similarities {
        if let Some(v) = eng.ctx(pair).violation(mu) {
            return Err(WitnessViolation::Similarity { pair, violation: Box::new(v) });
        }
    }
    if w.similarities[&init] != w.mu0 {
        return Err(WitnessViolation::Mu0Mismatch);
    }
    let shared = shared_identity(p1, p2);
    if let Some(p) = w.mu0.iter().find(|p| !shared.contains(p)) {
        return Err(WitnessViolation::Mu0NotIdentity { pair: p.clone() });
    }
    let rel: Rel = w.similarities.clone();
    if let Some(p) = eng.first_pending(&rel) {
        let side = if p.side == 0 { Side::Left } else { Side::Right };
        return Err(WitnessViolation::Unmatched { side, pair: p.pair, transition: p.transition });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SearchError {
    /// The search space was exhausted; the sufficient condition does not
    /// apply, which says nothing about inequivalence.
    NoWitnessFound {
        reason: String,
    },
    BudgetExhausted,
}

impl fmt::Display for SearchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchError::NoWitnessFound { reason } => write!(f, "no witness found: {}", reason),
            SearchError::BudgetExhausted => f.write_str("search budget exhausted"),
        }
    }
}

fn pending_reason(a: [&Arena; 2], p: &Pending, p1: &Process, p2: &Process) -> String {
    let proc = if p.side == 0 { p1 } else { p2 };
    let t = &proc.transitions()[p.transition];
    format!(
        "at ({}, {}), edge {} -{}-> {} of the {} process cannot be matched",
        a[0].names[p.pair.0],
        a[1].names[p.pair.1],
        proc.label(t.from),
        t.action.pretty(),
        proc.label(t.to),
        if p.side == 0 { "left" } else { "right" }
    )
}

/// Searches for a witness, with labelings synthesized by forward
/// propagation and mu0 the identity on shared initial disclosures.
pub fn search_witness(p1: &Process, p2: &Process, budget: usize) -> Result<EquivalenceWitness, SearchError> {
    let l1 = synthesize_labeling(p1);
    let l2 = synthesize_labeling(p2);
    let left = Arena::from_process(p1, &l1);
    let right = Arena::from_process(p2, &l2);
    let mu0 = shared_identity(p1, p2);
    let mut eng = Engine::new(&left, &right, false, mu0, budget.max(1));
    let rel = match eng.start() {
        Err(Exhausted) => return Err(SearchError::BudgetExhausted),
        Ok(None) => {
            let reason = match &eng.deepest {
                Some((_, p)) => pending_reason(eng.a, p, p1, p2),
                None => "initial frames admit no similarity".to_string(),
            };
            return Err(SearchError::NoWitnessFound { reason });
        }
        Ok(Some(rel)) => rel,
    };
    let init = (p1.initial(), p2.initial());
    let w = EquivalenceWitness {
        relation: rel.keys().copied().collect(),
        mu0: rel[&init].clone(),
        similarities: rel,
        labeling_left: l1,
        labeling_right: l2,
    };
    match check_witness(p1, p2, &w) {
        Ok(()) => Ok(w),
        Err(v) => Err(SearchError::NoWitnessFound { reason: v.describe(p1, p2) }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TreeVerdict {
    Equivalent,
    /// No relation exists within the search; carries the obligation that
    /// failed deepest.
    NotEquivalent {
        reason: String,
    },
    Inconclusive,
}

/// Relation search directly on the execution trees.
pub fn tree_equiv(p1: &Process, p2: &Process, budget: usize) -> TreeVerdict {
    let (Ok(t1), Ok(t2)) = (exec_tree_bounded(p1, budget), exec_tree_bounded(p2, budget)) else {
        return TreeVerdict::Inconclusive;
    };
    let left = Arena::from_tree(p1, &t1);
    let right = Arena::from_tree(p2, &t2);
    let mu0 = shared_identity(p1, p2);
    let mut eng = Engine::new(&left, &right, true, mu0, budget.max(1));
    match eng.start() {
        Err(Exhausted) => TreeVerdict::Inconclusive,
        Ok(Some(_)) => TreeVerdict::Equivalent,
        Ok(None) => TreeVerdict::NotEquivalent {
            reason: match &eng.deepest {
                Some((_, p)) => pending_reason(eng.a, p, p1, p2),
                None => "initial frames admit no similarity".to_string(),
            },
        },
    }
}
