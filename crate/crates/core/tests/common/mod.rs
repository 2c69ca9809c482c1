//! Random terms, formulas, frames and small processes.
//!
//! Terms have depth at most 4 and processes at most 5 states. Names come
//! from small pools so that equalities and derivations actually interact.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use spv_core::process::choice_labeled;
use spv_core::{hide, Action, Formula, Frame, Process, Term};

pub const CASES: u32 = 256;

pub fn key() -> impl Strategy<Value = Term> {
    prop_oneof![Just(Term::key("k")), Just(Term::key("k2"))]
}

pub fn leaf() -> impl Strategy<Value = Term> {
    prop_oneof![
        Just(Term::var("x")),
        Just(Term::var("y")),
        Just(Term::var("z")),
        Just(Term::cnst("a")),
        Just(Term::cnst("b")),
        key(),
    ]
}

/// Terms of depth at most `depth` (a leaf has depth 1).
pub fn term_of_depth(depth: u32) -> BoxedStrategy<Term> {
    if depth <= 1 {
        return leaf().boxed();
    }
    let inner = term_of_depth(depth - 1);
    prop_oneof![
        3 => leaf(),
        2 => (key(), inner.clone()).prop_map(|(k, b)| Term::enc(k, b).unwrap()),
        2 => proptest::collection::vec(inner, 2..=3).prop_map(Term::seq),
    ]
    .boxed()
}

pub fn term() -> BoxedStrategy<Term> {
    term_of_depth(4)
}

/// A conjunction of up to three equalities between shallow terms.
pub fn formula() -> BoxedStrategy<Formula> {
    proptest::collection::vec((term_of_depth(2), term_of_depth(2)), 0..=3)
        .prop_map(|eqs| eqs.into_iter().fold(Formula::top(), |f, (a, b)| f.conjoin(&Formula::eq(a, b))))
        .boxed()
}

/// Like `formula` but never false on its own: equalities between variables
/// and a constant or another variable.
pub fn consistent_formula() -> BoxedStrategy<Formula> {
    let var = prop_oneof![Just(Term::var("x")), Just(Term::var("y")), Just(Term::var("z"))];
    let rhs = prop_oneof![Just(Term::var("x")), Just(Term::var("y")), Just(Term::var("z")), Just(Term::cnst("a"))];
    proptest::collection::vec((var, rhs), 0..=2)
        .prop_map(|eqs| eqs.into_iter().fold(Formula::top(), |f, (a, b)| f.conjoin(&Formula::eq(a, b))))
        .boxed()
}

pub fn term_set(max: usize) -> BoxedStrategy<BTreeSet<Term>> {
    proptest::collection::btree_set(term_of_depth(3), 0..=max).boxed()
}

pub fn frame() -> BoxedStrategy<Frame> {
    (term_set(4), formula()).prop_map(|(d, b)| Frame::new(d, b)).boxed()
}

fn channel() -> impl Strategy<Value = Term> {
    prop_oneof![Just(Term::cnst("o")), Just(Term::var("c"))]
}

fn payload() -> impl Strategy<Value = Term> {
    prop_oneof![
        Just(Term::var("x")),
        Just(Term::cnst("a")),
        Just(Term::cnst("b")),
        Just(Term::key("k")),
        Just(Term::enc(Term::key("k"), Term::var("x")).unwrap()),
        Just(Term::enc(Term::key("k"), Term::cnst("a")).unwrap()),
        Just(Term::seq(vec![Term::var("x"), Term::cnst("a")])),
    ]
}

fn pattern() -> impl Strategy<Value = Term> {
    prop_oneof![Just(Term::var("y")), Just(Term::var("z")), Just(Term::enc(Term::key("k"), Term::var("y")).unwrap()),]
}

pub fn action() -> BoxedStrategy<Action> {
    let guard = prop_oneof![
        Just(Formula::eq(Term::var("y"), Term::var("x"))),
        Just(Formula::eq(Term::var("y"), Term::cnst("a"))),
        Just(Formula::eq(Term::var("x"), Term::cnst("b"))),
    ];
    prop_oneof![
        3 => (channel(), payload()).prop_map(|(c, m)| Action::output(c, m)),
        3 => (channel(), pattern()).prop_map(|(c, m)| Action::input(c, m)),
        1 => guard.prop_map(Action::Internal),
    ]
    .boxed()
}

pub fn chain(actions: &[Action], tag: &str) -> Process {
    let mut p = Process::zero(&format!("{}{}", tag, actions.len()));
    for (i, a) in actions.iter().enumerate().rev() {
        p = spv_core::process::prefix_labeled(&format!("{}{}", tag, i), a.clone(), &p);
    }
    p
}

fn hidden_set() -> impl Strategy<Value = BTreeSet<String>> {
    proptest::sample::subsequence(vec!["k", "x", "c"], 0..=2).prop_map(|v| v.into_iter().map(String::from).collect())
}

/// A chain of up to four actions, or a choice between two chains with at
/// most two actions in total, under a random hidden set.
pub fn process() -> BoxedStrategy<Process> {
    let chain_p = proptest::collection::vec(action(), 0..=4).prop_map(|v| chain(&v, "s"));
    let choice_p = (proptest::collection::vec(action(), 0..=1), proptest::collection::vec(action(), 1..=1))
        .prop_map(|(a, b)| choice_labeled("r", &chain(&a, "l"), &chain(&b, "m")));
    (prop_oneof![3 => chain_p, 1 => choice_p], hidden_set()).prop_map(|(p, h)| hide(&p, &h)).boxed()
}

/// Renames every hidden variable.
pub fn alpha_rename(p: &Process) -> Process {
    let map: BTreeMap<String, String> = p.hidden().iter().map(|x| (x.clone(), format!("{}_r", x))).collect();
    p.rename_vars(&map).relabel(|l| format!("{}'", l))
}

/// Swaps the constants `a` and `b` in every action.
pub fn swap_constants(p: &Process) -> Process {
    fn sw(t: &Term) -> Term {
        match t {
            Term::Const(c) if c == "a" => Term::cnst("b"),
            Term::Const(c) if c == "b" => Term::cnst("a"),
            Term::Const(_) | Term::Var { .. } => t.clone(),
            Term::Enc(k, b) => Term::Enc(k.clone(), Box::new(sw(b))),
            Term::Seq(items) => Term::Seq(items.iter().map(sw).collect()),
        }
    }
    let ts = p
        .transitions()
        .iter()
        .map(|t| {
            let action = match &t.action {
                Action::Input { chan, pattern } => Action::input(sw(chan), sw(pattern)),
                Action::Output { chan, payload } => Action::output(sw(chan), sw(payload)),
                Action::Internal(f) => Action::Internal(f.map_terms(&mut sw)),
            };
            spv_core::Transition { from: t.from, action, to: t.to }
        })
        .collect();
    Process::new(
        p.labels().iter().map(|l| format!("{}'", l)).collect(),
        p.initial(),
        ts,
        p.init_cond().clone(),
        p.disclosed().iter().map(sw).collect(),
        p.hidden().clone(),
    )
    .unwrap()
}

/// Pairs biased towards equivalence: alpha-variants, constant swaps and
/// independent draws.
pub fn process_pair() -> BoxedStrategy<(Process, Process)> {
    prop_oneof![
        2 => process().prop_map(|p| { let q = alpha_rename(&p); (p, q) }),
        1 => process().prop_map(|p| { let q = swap_constants(&p); (p, q) }),
        1 => (process(), process()).prop_map(|(p, q)| (p, q.relabel(|l| format!("{}'", l)))),
    ]
    .boxed()
}

/// A one-action prefix context.
pub fn context_action() -> BoxedStrategy<Action> {
    prop_oneof![
        Just(Action::output(Term::cnst("o"), Term::cnst("a"))),
        Just(Action::input(Term::cnst("o"), Term::var("w"))),
        Just(Action::Internal(Formula::eq(Term::var("w"), Term::cnst("a")))),
    ]
    .boxed()
}

/// A small partner process for parallel contexts.
pub fn partner() -> BoxedStrategy<Process> {
    proptest::collection::vec(action(), 0..=1).prop_map(|v| chain(&v, "q")).boxed()
}
