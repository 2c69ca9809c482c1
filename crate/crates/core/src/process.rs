//! Process graphs, their operators, the step relation and execution trees.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::formula::{is_false_fresh, Atom, Formula, Fresh};
use crate::knowledge::{Frame, Knowledge};
use crate::term::{collect_vars, subterms, vars, Term};

pub type StateId = usize;

/// Product state limit for `replicate`.
pub const REPLICATION_LIMIT: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Input { chan: Term, pattern: Term },
    Output { chan: Term, payload: Term },
    Internal(Formula),
}

impl Action {
    pub fn input(chan: Term, pattern: Term) -> Action {
        Action::Input { chan: crate::term::normalize(&chan), pattern: crate::term::normalize(&pattern) }
    }

    pub fn output(chan: Term, payload: Term) -> Action {
        Action::Output { chan: crate::term::normalize(&chan), payload: crate::term::normalize(&payload) }
    }

    /// Channel and message of an input or output.
    pub fn message(&self) -> Option<(&Term, &Term)> {
        match self {
            Action::Input { chan, pattern } => Some((chan, pattern)),
            Action::Output { chan, payload } => Some((chan, payload)),
            Action::Internal(_) => None,
        }
    }

    pub fn is_internal(&self) -> bool {
        matches!(self, Action::Internal(_))
    }

    pub fn is_input(&self) -> bool {
        matches!(self, Action::Input { .. })
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        match self {
            Action::Input { chan, pattern: m } | Action::Output { chan, payload: m } => {
                collect_vars(chan, &mut out);
                collect_vars(m, &mut out);
            }
            Action::Internal(f) => f.terms().into_iter().for_each(|t| collect_vars(t, &mut out)),
        }
        out
    }

    pub fn rename(&self, map: &BTreeMap<String, String>) -> Action {
        match self {
            Action::Input { chan, pattern } => Action::input(chan.rename(map), pattern.rename(map)),
            Action::Output { chan, payload } => Action::output(chan.rename(map), payload.rename(map)),
            Action::Internal(f) => Action::Internal(f.map_terms(&mut |t| t.rename(map))),
        }
    }

    /// Label with `k(e)` encryption syntax, as drawn in figures.
    pub fn pretty(&self) -> String {
        match self {
            Action::Input { chan, pattern } => format!("{} ? {}", chan.pretty(), pattern.pretty()),
            Action::Output { chan, payload } => format!("{} ! {}", chan.pretty(), payload.pretty()),
            Action::Internal(f) => {
                if f.is_top() {
                    return "true".to_string();
                }
                let parts: Vec<String> = f
                    .atoms()
                    .map(|a| match a {
                        Atom::Eq(x, y) => format!("{} = {}", x.pretty(), y.pretty()),
                        other => other.to_string(),
                    })
                    .collect();
                parts.join(" & ")
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Input { chan, pattern } => write!(f, "{} ? {}", chan, pattern),
            Action::Output { chan, payload } => write!(f, "{} ! {}", chan, payload),
            Action::Internal(b) => write!(f, "[{}]", b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Transition {
    pub from: StateId,
    pub action: Action,
    pub to: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProcessError {
    UnknownState(StateId),
    Cyclic,
    HiddenDisclosed(String),
    BoundTooLarge { states: usize, limit: usize },
    ZeroBound,
}

impl fmt::Display for ProcessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessError::UnknownState(s) => write!(f, "transition endpoint {} is not a state", s),
            ProcessError::Cyclic => f.write_str("transition graph has a cycle"),
            ProcessError::HiddenDisclosed(x) => write!(f, "hidden variable {} occurs in a disclosed term", x),
            ProcessError::BoundTooLarge { states, limit } => {
                write!(f, "unfolding needs {} states, limit is {}", states, limit)
            }
            ProcessError::ZeroBound => f.write_str("replication bound must be at least 1"),
        }
    }
}

/// A finite acyclic graph of states with action-labelled edges, an initial
/// condition, initially disclosed terms and hidden variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Process {
    labels: Vec<String>,
    initial: StateId,
    transitions: Vec<Transition>,
    init_cond: Formula,
    disclosed: BTreeSet<Term>,
    hidden: BTreeSet<String>,
}

impl Process {
    pub fn new(
        labels: Vec<String>,
        initial: StateId,
        transitions: Vec<Transition>,
        init_cond: Formula,
        disclosed: BTreeSet<Term>,
        hidden: BTreeSet<String>,
    ) -> Result<Process, ProcessError> {
        let n = labels.len();
        if initial >= n {
            return Err(ProcessError::UnknownState(initial));
        }
        for t in &transitions {
            for s in [t.from, t.to] {
                if s >= n {
                    return Err(ProcessError::UnknownState(s));
                }
            }
        }
        let disclosed: BTreeSet<Term> = disclosed.iter().map(crate::term::normalize).collect();
        for d in &disclosed {
            if let Some(x) = vars(d).into_iter().find(|x| hidden.contains(x)) {
                return Err(ProcessError::HiddenDisclosed(x));
            }
        }
        let p = Process { labels: unique_labels(labels), initial, transitions, init_cond, disclosed, hidden };
        if p.topo_order().is_none() {
            return Err(ProcessError::Cyclic);
        }
        Ok(p)
    }

    /// The process with one state and no transitions.
    pub fn zero(label: &str) -> Process {
        Process {
            labels: alloc::vec![label.to_string()],
            initial: 0,
            transitions: Vec::new(),
            init_cond: Formula::top(),
            disclosed: BTreeSet::new(),
            hidden: BTreeSet::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn states(&self) -> core::ops::Range<StateId> {
        0..self.labels.len()
    }

    pub fn label(&self, s: StateId) -> &str {
        &self.labels[s]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn state(&self, label: &str) -> Option<StateId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, s: StateId) -> impl Iterator<Item = (usize, &Transition)> {
        self.transitions.iter().enumerate().filter(move |(_, t)| t.from == s)
    }

    pub fn init_cond(&self) -> &Formula {
        &self.init_cond
    }

    /// Hidden variables, and the free variables derivable from the initial
    /// frame.
    pub fn fresh(&self) -> Fresh {
        let mut k = Knowledge::new(&Frame { disclosed: self.disclosed.clone(), cond: self.init_cond.clone() });
        let public = self
            .vars()
            .into_iter()
            .filter(|x| !self.hidden.contains(x) && (k.contains(&Term::var(x)) || k.contains(&Term::key(x))))
            .collect();
        Fresh { hidden: self.hidden.clone(), public }
    }

    pub fn disclosed(&self) -> &BTreeSet<Term> {
        &self.disclosed
    }

    pub fn hidden(&self) -> &BTreeSet<String> {
        &self.hidden
    }

    /// Index of the edge `from -action-> to`, looked up by labels.
    pub fn find_edge(&self, from: &str, action: &Action, to: &str) -> Option<usize> {
        let (f, t) = (self.state(from)?, self.state(to)?);
        self.transitions.iter().position(|e| e.from == f && e.to == t && &e.action == action)
    }

    /// States in a topological order of the transition graph.
    pub fn topo_order(&self) -> Option<Vec<StateId>> {
        let n = self.len();
        let mut indeg = alloc::vec![0usize; n];
        for t in &self.transitions {
            indeg[t.to] += 1;
        }
        let mut ready: Vec<StateId> = (0..n).rev().filter(|&s| indeg[s] == 0).collect();
        let mut out = Vec::with_capacity(n);
        while let Some(s) = ready.pop() {
            out.push(s);
            for t in self.transitions.iter().filter(|t| t.from == s) {
                indeg[t.to] -= 1;
                if indeg[t.to] == 0 {
                    ready.push(t.to);
                }
            }
        }
        (out.len() == n).then_some(out)
    }

    /// All variable names of the process, hidden ones included.
    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = self.hidden.clone();
        for t in &self.transitions {
            out.extend(t.action.vars());
        }
        for d in &self.disclosed {
            collect_vars(d, &mut out);
        }
        for t in self.init_cond.terms() {
            collect_vars(t, &mut out);
        }
        out
    }

    pub fn rename_vars(&self, map: &BTreeMap<String, String>) -> Process {
        Process {
            labels: self.labels.clone(),
            initial: self.initial,
            transitions: self
                .transitions
                .iter()
                .map(|t| Transition { from: t.from, action: t.action.rename(map), to: t.to })
                .collect(),
            init_cond: self.init_cond.map_terms(&mut |t| t.rename(map)),
            disclosed: self.disclosed.iter().map(|t| t.rename(map)).collect(),
            hidden: self.hidden.iter().map(|x| map.get(x).cloned().unwrap_or_else(|| x.clone())).collect(),
        }
    }

    pub fn relabel(&self, f: impl Fn(&str) -> String) -> Process {
        let mut p = self.clone();
        p.labels = unique_labels(p.labels.iter().map(|l| f(l)).collect());
        p
    }

    /// Drops the given edges, keeping every state.
    pub fn without_edges(&self, edges: &BTreeSet<usize>) -> Process {
        let mut p = self.clone();
        p.transitions =
            self.transitions.iter().enumerate().filter(|(i, _)| !edges.contains(i)).map(|(_, t)| t.clone()).collect();
        p
    }

    /// Removes states not reachable from the initial one; surviving states
    /// keep their relative order.
    pub fn prune_unreachable(&self) -> Process {
        let mut seen = alloc::vec![false; self.len()];
        let mut stack = alloc::vec![self.initial];
        seen[self.initial] = true;
        while let Some(s) = stack.pop() {
            for (_, t) in self.outgoing(s) {
                if !seen[t.to] {
                    seen[t.to] = true;
                    stack.push(t.to);
                }
            }
        }
        let mut remap = alloc::vec![usize::MAX; self.len()];
        let mut labels = Vec::new();
        for s in self.states() {
            if seen[s] {
                remap[s] = labels.len();
                labels.push(self.labels[s].clone());
            }
        }
        Process {
            labels,
            initial: remap[self.initial],
            transitions: self
                .transitions
                .iter()
                .filter(|t| seen[t.from])
                .map(|t| Transition { from: remap[t.from], action: t.action.clone(), to: remap[t.to] })
                .collect(),
            init_cond: self.init_cond.clone(),
            disclosed: self.disclosed.clone(),
            hidden: self.hidden.clone(),
        }
    }

    /// The same process with a different initial condition.
    pub fn with_init_cond(&self, b: Formula) -> Process {
        let mut p = self.clone();
        p.init_cond = b;
        p
    }

    fn shifted(&self, by: usize) -> Vec<Transition> {
        self.transitions
            .iter()
            .map(|t| Transition { from: t.from + by, action: t.action.clone(), to: t.to + by })
            .collect()
    }
}

fn unique_labels(labels: Vec<String>) -> Vec<String> {
    let mut seen = BTreeSet::new();
    labels
        .into_iter()
        .map(|mut l| {
            while !seen.insert(l.clone()) {
                l.push('\'');
            }
            l
        })
        .collect()
}

/// Variables an action hands to the environment as a channel name.
fn channel_disclosure(a: &Action, hidden: &BTreeSet<String>) -> BTreeSet<Term> {
    let mut out = BTreeSet::new();
    if let Some((chan, _)) = a.message() {
        match chan {
            Term::Const(_) => {
                out.insert(chan.clone());
            }
            _ => {
                for t in subterms(chan) {
                    if let Term::Var { name, .. } = t {
                        if !hidden.contains(name) {
                            out.insert(t.clone());
                        }
                    }
                }
            }
        }
    }
    out
}

/// `a` followed by `p`, with a new initial state named `label`.
pub fn prefix_labeled(label: &str, a: Action, p: &Process) -> Process {
    let mut disclosed = channel_disclosure(&a, &p.hidden);
    let bound = match &a {
        Action::Input { pattern, .. } => vars(pattern),
        _ => BTreeSet::new(),
    };
    disclosed.extend(p.disclosed.iter().filter(|d| vars(d).is_disjoint(&bound)).cloned());
    let mut labels = alloc::vec![label.to_string()];
    labels.extend(p.labels.iter().cloned());
    let mut transitions = alloc::vec![Transition { from: 0, action: a, to: p.initial + 1 }];
    transitions.extend(p.shifted(1));
    Process {
        labels: unique_labels(labels),
        initial: 0,
        transitions,
        init_cond: p.init_cond.clone(),
        disclosed,
        hidden: p.hidden.clone(),
    }
}

pub fn prefix(a: Action, p: &Process) -> Process {
    prefix_labeled(&format!("s{}", p.len()), a, p)
}

/// Non-deterministic choice; the new initial state copies the outgoing
/// edges of both initial states.
pub fn choice_labeled(label: &str, p1: &Process, p2: &Process) -> Process {
    let o1 = 1;
    let o2 = 1 + p1.len();
    let mut labels = alloc::vec![label.to_string()];
    labels.extend(p1.labels.iter().cloned());
    labels.extend(p2.labels.iter().cloned());
    let mut transitions = Vec::new();
    for (_, t) in p1.outgoing(p1.initial) {
        transitions.push(Transition { from: 0, action: t.action.clone(), to: t.to + o1 });
    }
    for (_, t) in p2.outgoing(p2.initial) {
        transitions.push(Transition { from: 0, action: t.action.clone(), to: t.to + o2 });
    }
    transitions.extend(p1.shifted(o1));
    transitions.extend(p2.shifted(o2));
    Process {
        labels: unique_labels(labels),
        initial: 0,
        transitions,
        init_cond: p1.init_cond.conjoin(&p2.init_cond),
        disclosed: p1.disclosed.union(&p2.disclosed).cloned().collect(),
        hidden: p1.hidden.union(&p2.hidden).cloned().collect(),
    }
}

pub fn choice(p1: &Process, p2: &Process) -> Process {
    choice_labeled(&format!("s{}", p1.len() + p2.len()), p1, p2)
}

/// Renames hidden variables that the other operand also uses, on the side
/// that hides them (the second operand when both do), so free names are
/// never captured.
fn freshen(p1: &Process, p2: &Process) -> (Process, Process) {
    let v1 = p1.vars();
    let v2 = p2.vars();
    let mut taken: BTreeSet<String> = v1.union(&v2).cloned().collect();
    let mut map1 = BTreeMap::new();
    let mut map2 = BTreeMap::new();
    for x in v1.intersection(&v2) {
        let (h1, h2) = (p1.hidden.contains(x), p2.hidden.contains(x));
        if !h1 && !h2 {
            continue;
        }
        let mut n = 2;
        let fresh = loop {
            let cand = format!("{}#{}", x, n);
            if !taken.contains(&cand) {
                break cand;
            }
            n += 1;
        };
        taken.insert(fresh.clone());
        if h2 {
            map2.insert(x.clone(), fresh);
        } else {
            map1.insert(x.clone(), fresh);
        }
    }
    let ren = |p: &Process, m: &BTreeMap<String, String>| if m.is_empty() { p.clone() } else { p.rename_vars(m) };
    (ren(p1, &map1), ren(p2, &map2))
}

fn diagonal(out: &Action, inp: &Action) -> Option<Action> {
    match (out, inp) {
        (Action::Output { chan: d1, payload: e1 }, Action::Input { chan: d2, pattern: e2 }) => {
            Some(Action::Internal(Formula::eq(d1.clone(), d2.clone()).conjoin(&Formula::eq(e1.clone(), e2.clone()))))
        }
        _ => None,
    }
}

/// Interleaving product with synchronising internal edges for every
/// co-located output/input pair.
pub fn parallel(p1: &Process, p2: &Process) -> Process {
    let (p1, p2) = freshen(p1, p2);
    let (p1, p2) = (&p1, &p2);
    let n2 = p2.len();
    let id = |a: StateId, b: StateId| a * n2 + b;
    let mut labels = Vec::with_capacity(p1.len() * n2);
    for a in p1.states() {
        for b in p2.states() {
            labels.push(format!("{}{}", p1.labels[a], p2.labels[b]));
        }
    }
    let mut transitions = Vec::new();
    for a in p1.states() {
        for b in p2.states() {
            for (_, t) in p1.outgoing(a) {
                transitions.push(Transition { from: id(a, b), action: t.action.clone(), to: id(t.to, b) });
            }
            for (_, t) in p2.outgoing(b) {
                transitions.push(Transition { from: id(a, b), action: t.action.clone(), to: id(a, t.to) });
            }
            for (_, t1) in p1.outgoing(a) {
                for (_, t2) in p2.outgoing(b) {
                    let d = diagonal(&t1.action, &t2.action).or_else(|| diagonal(&t2.action, &t1.action));
                    if let Some(action) = d {
                        transitions.push(Transition { from: id(a, b), action, to: id(t1.to, t2.to) });
                    }
                }
            }
        }
    }
    Process {
        labels: unique_labels(labels),
        initial: id(p1.initial, p2.initial),
        transitions,
        init_cond: p1.init_cond.conjoin(&p2.init_cond),
        disclosed: p1.disclosed.union(&p2.disclosed).cloned().collect(),
        hidden: p1.hidden.union(&p2.hidden).cloned().collect(),
    }
}

/// `n` parallel copies of `p`; private variables of copy `i` become `x@i`.
pub fn replicate(p: &Process, n: usize) -> Result<Process, ProcessError> {
    replicate_with_limit(p, n, REPLICATION_LIMIT)
}

pub fn replicate_with_limit(p: &Process, n: usize, limit: usize) -> Result<Process, ProcessError> {
    if n == 0 {
        return Err(ProcessError::ZeroBound);
    }
    let mut states: usize = 1;
    for _ in 0..n {
        states = states.saturating_mul(p.len());
    }
    if states > limit {
        return Err(ProcessError::BoundTooLarge { states, limit });
    }
    let mut public = BTreeSet::new();
    for d in &p.disclosed {
        collect_vars(d, &mut public);
    }
    let private: Vec<String> = p.vars().into_iter().filter(|x| !public.contains(x)).collect();
    let copy = |i: usize| {
        let map = private.iter().map(|x| (x.clone(), format!("{}@{}", x, i))).collect();
        p.rename_vars(&map)
    };
    let mut acc = copy(1);
    for i in 2..=n {
        acc = parallel(&acc, &copy(i));
    }
    Ok(acc)
}

/// Hides `xs`: they leave the disclosed set and join the hidden set.
pub fn hide(p: &Process, xs: &BTreeSet<String>) -> Process {
    let mut q = p.clone();
    q.disclosed.retain(|d| vars(d).is_disjoint(xs));
    q.hidden.extend(xs.iter().cloned());
    q
}

/// One step of the execution semantics: channels must be derivable,
/// messages extend the disclosed set, internal actions strengthen the
/// condition. An internal step to a false condition is undefined, with
/// falsity read under `fresh`.
pub fn step_literal(
    fresh: &Fresh,
    cond: &Formula,
    disclosed: &BTreeSet<Term>,
    a: &Action,
) -> Option<(Formula, BTreeSet<Term>)> {
    match a {
        Action::Internal(b) => {
            let c = cond.conjoin(b);
            (!is_false_fresh(&c, fresh)).then(|| (c, disclosed.clone()))
        }
        _ => {
            let (chan, msg) = a.message().unwrap();
            let mut k = Knowledge::new(&Frame { disclosed: disclosed.clone(), cond: cond.clone() });
            if !k.contains(chan) {
                return None;
            }
            let mut d = disclosed.clone();
            d.insert(msg.clone());
            Some((cond.clone(), d))
        }
    }
}

/// `step_literal`, plus: an input whose pattern holds an encryption that
/// the environment can neither build nor replay is undefined.
pub fn step(
    fresh: &Fresh,
    cond: &Formula,
    disclosed: &BTreeSet<Term>,
    a: &Action,
) -> Option<(Formula, BTreeSet<Term>)> {
    let next = step_literal(fresh, cond, disclosed, a)?;
    if let Action::Input { pattern, .. } = a {
        let mut k = Knowledge::new(&Frame { disclosed: disclosed.clone(), cond: cond.clone() });
        if !input_feasible(&mut k, pattern) {
            return None;
        }
    }
    Some(next)
}

pub(crate) fn input_feasible(k: &mut Knowledge, pattern: &Term) -> bool {
    if k.is_false() {
        return true;
    }
    subterms(pattern).into_iter().all(|t| match t {
        Term::Enc(key, _) => k.contains(key) || k.has_enc_under(key),
        _ => true,
    })
}

pub type NodeIdx = usize;

#[derive(Clone, Debug)]
pub struct ExecNode {
    pub state: StateId,
    pub cond: Formula,
    pub disclosed: BTreeSet<Term>,
    /// Hidden variables not derivable at this node.
    pub hidden: BTreeSet<String>,
    /// Parent node and the edge index taken from it.
    pub parent: Option<(NodeIdx, usize)>,
    pub children: Vec<(Action, NodeIdx)>,
}

/// An execution tree stored as an arena; node 0 is the root.
#[derive(Clone, Debug)]
pub struct ExecTree {
    pub nodes: Vec<ExecNode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeBudgetExceeded;

impl ExecTree {
    pub fn root(&self) -> &ExecNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, i: NodeIdx) -> &ExecNode {
        &self.nodes[i]
    }

    /// Whether `to` is `from` or lies below it along internal edges only.
    pub fn tau_reach(&self, p: &Process, from: NodeIdx, to: NodeIdx) -> bool {
        let mut cur = to;
        loop {
            if cur == from {
                return true;
            }
            match self.nodes[cur].parent {
                Some((up, edge)) if p.transitions[edge].action.is_internal() => cur = up,
                _ => return false,
            }
        }
    }

    /// Nodes reachable from `from` along internal edges, `from` included.
    pub fn tau_closure(&self, from: NodeIdx) -> Vec<NodeIdx> {
        let mut out = alloc::vec![from];
        let mut i = 0;
        while i < out.len() {
            for (a, c) in &self.nodes[out[i]].children {
                if a.is_internal() {
                    out.push(*c);
                }
            }
            i += 1;
        }
        out
    }
}

fn hidden_left(p: &Process, cond: &Formula, disclosed: &BTreeSet<Term>) -> BTreeSet<String> {
    let mut k = Knowledge::new(&Frame { disclosed: disclosed.clone(), cond: cond.clone() });
    p.hidden.iter().filter(|x| !(k.contains(&Term::var(x)) || k.contains(&Term::key(x)))).cloned().collect()
}

/// The execution tree of `p` under `step`.
pub fn exec_tree(p: &Process) -> ExecTree {
    build_tree(p, usize::MAX, step).expect("unbounded")
}

pub fn exec_tree_bounded(p: &Process, limit: usize) -> Result<ExecTree, TreeBudgetExceeded> {
    build_tree(p, limit, step)
}

pub fn exec_tree_literal(p: &Process, limit: usize) -> Result<ExecTree, TreeBudgetExceeded> {
    build_tree(p, limit, step_literal)
}

type StepFn = fn(&Fresh, &Formula, &BTreeSet<Term>, &Action) -> Option<(Formula, BTreeSet<Term>)>;

fn build_tree(p: &Process, limit: usize, stepf: StepFn) -> Result<ExecTree, TreeBudgetExceeded> {
    let root = ExecNode {
        state: p.initial,
        cond: p.init_cond.clone(),
        disclosed: p.disclosed.clone(),
        hidden: hidden_left(p, &p.init_cond, &p.disclosed),
        parent: None,
        children: Vec::new(),
    };
    let mut nodes = alloc::vec![root];
    let fresh = p.fresh();
    let mut i = 0;
    while i < nodes.len() {
        let (state, cond, disclosed) = (nodes[i].state, nodes[i].cond.clone(), nodes[i].disclosed.clone());
        for (ei, t) in p.outgoing(state) {
            if let Some((c, d)) = stepf(&fresh, &cond, &disclosed, &t.action) {
                if nodes.len() >= limit {
                    return Err(TreeBudgetExceeded);
                }
                let idx = nodes.len();
                let hidden = hidden_left(p, &c, &d);
                nodes.push(ExecNode {
                    state: t.to,
                    cond: c,
                    disclosed: d,
                    hidden,
                    parent: Some((i, ei)),
                    children: Vec::new(),
                });
                nodes[i].children.push((t.action.clone(), idx));
            }
        }
        i += 1;
    }
    Ok(ExecTree { nodes })
}
