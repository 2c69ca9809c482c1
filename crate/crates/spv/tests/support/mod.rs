//! Property suites shared by `properties.rs` and the acceptance harness.

#![allow(dead_code)]

#[path = "../../../core/tests/common/mod.rs"]
pub mod gen;

pub mod criteria;

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use spv_core::equivalence::{check_witness, reduce, search_witness, tree_equiv, TreeVerdict};
use spv_core::{
    check_similarity, closure_contains, entails, find_similarity, hide, parallel, prefix, Formula, Frame, Process, Term,
};

pub const BUDGET: usize = 20_000;

/// Equivalent pairs seen by the congruence suite, and witnesses seen by
/// the soundness suite.
pub static CONGRUENCE_PAIRS: AtomicUsize = AtomicUsize::new(0);
pub static WITNESSES: AtomicUsize = AtomicUsize::new(0);

pub fn entail_reflexive(b: Formula) -> Result<(), TestCaseError> {
    prop_assert!(entails(&b, &b), "{} does not entail itself", b);
    Ok(())
}

pub fn entail_transitive((b1, b2, b3): (Formula, Formula, Formula)) -> Result<(), TestCaseError> {
    // Build a chain as well so the premise is not vacuous.
    let c2 = b2.conjoin(&b3);
    let c1 = b1.conjoin(&c2);
    for (x, y, z) in [(&b1, &b2, &b3), (&c1, &c2, &b3)] {
        if entails(x, y) && entails(y, z) {
            prop_assert!(entails(x, z), "{} |= {} |= {} but not {} |= {}", x, y, z, x, z);
        }
    }
    Ok(())
}

pub fn closure_extensive(f: Frame) -> Result<(), TestCaseError> {
    for d in &f.disclosed {
        prop_assert!(closure_contains(&f, d), "{} missing from its own closure", d);
    }
    Ok(())
}

pub fn closure_idempotent((f, e): (Frame, Term)) -> Result<(), TestCaseError> {
    let sat = Frame::new(spv_core::analysis_saturate(&f), f.cond.clone());
    prop_assert_eq!(closure_contains(&f, &e), closure_contains(&sat, &e), "on {}", e);
    Ok(())
}

pub fn closure_monotone_d((f, extra, e): (Frame, BTreeSet<Term>, Term)) -> Result<(), TestCaseError> {
    let mut bigger = f.clone();
    bigger.disclosed.extend(extra.iter().map(spv_core::normalize));
    if closure_contains(&f, &e) {
        prop_assert!(closure_contains(&bigger, &e), "{} lost after adding disclosures", e);
    }
    Ok(())
}

pub fn closure_monotone_b((f, extra, e): (Frame, Formula, Term)) -> Result<(), TestCaseError> {
    let stronger = Frame { disclosed: f.disclosed.clone(), cond: f.cond.conjoin(&extra) };
    if closure_contains(&f, &e) {
        prop_assert!(closure_contains(&stronger, &e), "{} lost after strengthening by {}", e, extra);
    }
    Ok(())
}

pub fn seq_membership((f, items): (Frame, Vec<Term>)) -> Result<(), TestCaseError> {
    let s = Term::seq(items);
    let parts: Vec<Term> = match &s {
        Term::Seq(v) => v.clone(),
        t => vec![t.clone()],
    };
    let each = parts.iter().all(|p| closure_contains(&f, p));
    prop_assert_eq!(closure_contains(&f, &s), each, "sequence {}", s);
    Ok(())
}

pub fn similarity_sound((l, r, seed): (Frame, Frame, Option<(Term, Term)>)) -> Result<(), TestCaseError> {
    let seed: BTreeSet<(Term, Term)> = seed.into_iter().collect();
    if let Some(s) = find_similarity(&l, &r, &seed) {
        prop_assert!(check_similarity(&s), "found similarity fails its check: {:?}", s.pairs);
    }
    Ok(())
}

pub fn witness_sound((p1, p2): (Process, Process)) -> Result<(), TestCaseError> {
    if let Ok(w) = search_witness(&p1, &p2, BUDGET) {
        WITNESSES.fetch_add(1, Ordering::Relaxed);
        prop_assert!(check_witness(&p1, &p2, &w).is_ok());
        let v = tree_equiv(&p1, &p2, BUDGET);
        prop_assert!(
            !matches!(v, TreeVerdict::NotEquivalent { .. }),
            "witness but trees differ: {:?}\n  p1 = {}\n  p2 = {}",
            v,
            show(&p1),
            show(&p2)
        );
    }
    Ok(())
}

/// One-line rendering for failure messages.
pub fn show(p: &Process) -> String {
    let edges: Vec<String> = p
        .transitions()
        .iter()
        .map(|t| format!("{} -{}-> {}", p.label(t.from), t.action.pretty(), p.label(t.to)))
        .collect();
    let d: Vec<String> = p.disclosed().iter().map(|t| t.to_string()).collect();
    format!("[{}] D0={{{}}} H={:?}", edges.join("; "), d.join(", "), p.hidden())
}

fn witnessed(p1: &Process, p2: &Process) -> Result<(), String> {
    search_witness(p1, p2, BUDGET).map(|_| ()).map_err(|e| e.to_string())
}

/// Discloses every free variable, as the literal prefix rule would.
pub fn close(p: &Process) -> Process {
    let mut d = p.disclosed().clone();
    for x in p.vars().difference(p.hidden()) {
        let k = p.transitions().iter().any(|t| t.action.message().is_some_and(|(_, m)| is_key_named(m, x)));
        d.insert(if k { Term::key(x) } else { Term::var(x) });
    }
    Process::new(
        p.labels().to_vec(),
        p.initial(),
        p.transitions().to_vec(),
        p.init_cond().clone(),
        d,
        p.hidden().clone(),
    )
    .unwrap()
}

fn is_key_named(t: &Term, x: &str) -> bool {
    match t {
        Term::Var { name, key } => *key && name == x,
        Term::Const(_) => false,
        Term::Enc(k, b) => is_key_named(k, x) || is_key_named(b, x),
        Term::Seq(items) => items.iter().any(|i| is_key_named(i, x)),
    }
}

/// Renames the partner's variables apart from the operands', except the
/// channel variable `c`. A partner sharing a variable can fix its value,
/// which the symbolic equivalence never does (see the counterexample in
/// `congruence.rs`).
pub fn apart(q: &Process, p1: &Process, p2: &Process) -> Process {
    let used: BTreeSet<String> = p1.vars().union(&p2.vars()).cloned().collect();
    let map =
        q.vars().into_iter().filter(|x| x != "c" && used.contains(x)).map(|x| (x.clone(), format!("q{}", x))).collect();
    q.rename_vars(&map)
}

/// Equivalence by witness, or else by the execution-tree search.
pub fn equivalent(p1: &Process, p2: &Process) -> Result<(), String> {
    let e = match search_witness(p1, p2, BUDGET) {
        Ok(_) => return Ok(()),
        Err(e) => e.to_string(),
    };
    match tree_equiv(p1, p2, BUDGET) {
        TreeVerdict::Equivalent => Ok(()),
        TreeVerdict::NotEquivalent { reason } => Err(format!("{}; tree search: {}", e, reason)),
        TreeVerdict::Inconclusive => Err(format!("{}; tree search over budget", e)),
    }
}

/// For closed pairs with the same initial disclosures and a witness, the
/// prefixed, parallel and hidden versions (closed again) are equivalent.
pub fn congruence(
    ((p1, p2), a, q, xs): ((Process, Process), spv_core::Action, Process, BTreeSet<String>),
) -> Result<(), TestCaseError> {
    let (p1, p2) = (close(&p1), close(&p2));
    let q = close(&apart(&q, &p1, &p2));
    if p1.disclosed() != p2.disclosed() || witnessed(&p1, &p2).is_err() {
        return Ok(());
    }
    CONGRUENCE_PAIRS.fetch_add(1, Ordering::Relaxed);
    let ctx = format!("\n  p1 = {}\n  p2 = {}", show(&p1), show(&p2));
    let r = equivalent(&close(&prefix(a.clone(), &p1)), &close(&prefix(a.clone(), &p2)));
    prop_assert!(r.is_ok(), "prefix {}: {}{}", a.pretty(), r.unwrap_err(), ctx);
    let r = equivalent(&close(&parallel(&p1, &q)), &close(&parallel(&p2, &q)));
    prop_assert!(r.is_ok(), "parallel with {}: {}{}", show(&q), r.unwrap_err(), ctx);
    let r = equivalent(&hide(&p1, &xs), &hide(&p2, &xs));
    prop_assert!(r.is_ok(), "hide {:?}: {}{}", xs, r.unwrap_err(), ctx);
    Ok(())
}

/// Each suite: name, and a runner over `cases` random inputs.
pub type Suite = (&'static str, fn(u32) -> Result<(), String>);

fn run<S: Strategy>(cases: u32, s: S, f: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner.run(&s, f).map_err(|e| e.to_string())
}

fn hide_set() -> impl Strategy<Value = BTreeSet<String>> {
    proptest::sample::subsequence(vec!["w", "y", "z"], 0..=2).prop_map(|v| v.into_iter().map(String::from).collect())
}

pub const SUITES: &[Suite] = &[
    ("entailment reflexive", |n| run(n, gen::formula(), entail_reflexive)),
    ("entailment transitive", |n| run(n, (gen::formula(), gen::formula(), gen::formula()), entail_transitive)),
    ("closure extensive", |n| run(n, gen::frame(), closure_extensive)),
    ("closure idempotent", |n| run(n, (gen::frame(), gen::term()), closure_idempotent)),
    ("closure monotone in D", |n| run(n, (gen::frame(), gen::term_set(2), gen::term()), closure_monotone_d)),
    ("closure monotone in b", |n| run(n, (gen::frame(), gen::formula(), gen::term()), closure_monotone_b)),
    ("Seq membership", |n| {
        run(n, (gen::frame(), proptest::collection::vec(gen::term_of_depth(3), 2..=3)), seq_membership)
    }),
    ("find_similarity results pass check_similarity", |n| {
        run(
            n,
            (gen::frame(), gen::frame(), proptest::option::of((gen::term_of_depth(2), gen::term_of_depth(2)))),
            similarity_sound,
        )
    }),
    ("witness implies tree-oracle equivalence", |n| run(n, gen::process_pair(), witness_sound)),
    ("congruence for prefix, parallel and hiding", |n| {
        run(n, (gen::process_pair(), gen::context_action(), gen::partner(), hide_set()), congruence)
    }),
];

/// `reduce` keeps each built-in system tree-equivalent to itself.
pub fn reduce_preserves_builtins() -> Result<usize, String> {
    let mut n = 0;
    for name in spv::BUILTINS {
        let ps = spv::builtin(name).map_err(|e| e.to_string())?;
        for (side, p) in [("system", &ps.system), ("modified", &ps.modified_system)] {
            let r = reduce(p).process;
            match tree_equiv(p, &r, 2_000_000) {
                TreeVerdict::Equivalent => n += 1,
                v => return Err(format!("{} {}: {:?}", name, side, v)),
            }
        }
    }
    Ok(n)
}
