//! The acceptance criteria as functions, shared by the `acceptance`
//! target (one printed line each) and the integration tests.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde_json::Value;
use spv::cert::cert_processes;
use spv::verify::{verify_integrity, verify_secrecy};
use spv::{
    builtin, builtin_program, check_cert, parse, parse_formula, parse_term, run_reduction_trace, Evidence,
    ProtocolSystem, Verdict, WitnessCert, DEFAULT_BUDGET,
};
use spv_core::equivalence::{
    check_labeling, dead_edges, reduce, removable_edges, remove_edges, search_witness, synthesize_labeling, tree_equiv,
    RemovalReason, StateLabeling, TreeVerdict,
};
use spv_core::formula::equivalent;
use spv_core::{hide, parallel, prefix, Action, Formula, Frame, Process, Term};

use super::gen::chain;

pub const EQ1_LIMIT: Duration = Duration::from_secs(1);
pub const HIDDEN_CHANNEL_LIMIT: Duration = Duration::from_secs(1);
pub const SMALL_PROTOCOL_LIMIT: Duration = Duration::from_secs(5);
pub const WMF_LIMIT: Duration = Duration::from_secs(30);
pub const SUITE_CASES: u32 = 200;

pub const EQ1_SOURCE: &str = include_str!("../../protocols/eq1.spv");

#[derive(Debug)]
pub enum Outcome {
    Pass(String),
    Fail(String),
    /// Expected failure, with the analysis.
    XFail(String),
}

pub type Check = Result<String, String>;

fn timed<T>(limit: Duration, what: &str, f: impl FnOnce() -> T) -> Result<(T, Duration), String> {
    let start = Instant::now();
    let v = f();
    let t = start.elapsed();
    if t > limit {
        return Err(format!("{} took {:?}, limit {:?}", what, t, limit));
    }
    Ok((v, t))
}

pub fn eq1() -> ProtocolSystem {
    parse(EQ1_SOURCE).expect("eq1 source parses")
}

/// Criterion 1.
pub fn eq1_equivalence() -> Check {
    let ps = eq1();
    let ((w, tree), t) = timed(EQ1_LIMIT, "eq1", || {
        (
            search_witness(&ps.system, &ps.modified_system, DEFAULT_BUDGET),
            tree_equiv(&ps.system, &ps.modified_system, DEFAULT_BUDGET),
        )
    })?;
    let w = w.map_err(|e| format!("no witness: {}", e))?;
    if tree != TreeVerdict::Equivalent {
        return Err(format!("tree oracle: {:?}", tree));
    }
    Ok(format!("witness over {} state pairs, trees related, {:?}", w.relation.len(), t))
}

fn with_stub(name: &str, stub: Vec<spv::ast::Item>) -> ProtocolSystem {
    let mut prog = builtin_program(name).expect("builtin");
    prog.conts = vec![("P".into(), stub)];
    ProtocolSystem::from_program(prog).expect("elaborates")
}

fn holds(ps: &ProtocolSystem, limit: Duration) -> Check {
    let mut out = Vec::new();
    for (prop, f) in [("integrity", verify_integrity as fn(&ProtocolSystem, usize) -> _), ("secrecy", verify_secrecy)] {
        let (r, t) = timed(limit, prop, || f(ps, DEFAULT_BUDGET))?;
        if r.verdict != Verdict::Holds {
            return Err(format!("{} {}: {}", ps.name, prop, r));
        }
        out.push(format!("{} holds in {:?}", prop, t));
    }
    Ok(out.join(", "))
}

/// Criterion 2.
pub fn hidden_channel() -> Check {
    let y_eq_x = Formula::eq(Term::var("y"), Term::var("x"));
    let bare = reduce(&with_stub("hidden_channel", vec![]).system).process;
    let ts = bare.transitions();
    let single =
        bare.len() == 2 && ts.len() == 1 && matches!(&ts[0].action, Action::Internal(g) if equivalent(g, &y_eq_x));
    if !single {
        return Err(format!("with P = 0 the reduced system is {}", super::show(&bare)));
    }
    let ps = builtin("hidden_channel").map_err(|e| e.to_string())?;
    let full = reduce(&ps.system).process;
    let stub = &ps.continuation;
    let first = full.outgoing(full.initial()).map(|(_, t)| t).collect::<Vec<_>>();
    let ok = full.len() == 1 + stub.len()
        && full.transitions().len() == 1 + stub.transitions().len()
        && first.len() == 1
        && matches!(&first[0].action, Action::Internal(g) if equivalent(g, &y_eq_x));
    if !ok {
        return Err(format!("with the default stub the reduced system is {}", super::show(&full)));
    }
    Ok(format!("reduces to one y = x edge; {}", holds(&ps, HIDDEN_CHANNEL_LIMIT)?))
}

/// Criterion 3.
pub fn trusted_and_enc() -> Check {
    let mut out = Vec::new();
    for name in ["trusted_channel", "enc_message"] {
        let ps = builtin(name).map_err(|e| e.to_string())?;
        out.push(format!("{}: {}", name, holds(&ps, SMALL_PROTOCOL_LIMIT)?));
    }
    Ok(out.join("; "))
}

/// Edges are named by endpoint labels and the action's pretty rendering.
pub fn edge(p: &Process, from: &str, action: &str, to: &str) -> Result<usize, String> {
    p.transitions()
        .iter()
        .position(|t| p.label(t.from) == from && t.action.pretty() == action && p.label(t.to) == to)
        .ok_or_else(|| format!("no edge {} -{}-> {}", from, action, to))
}

pub fn clean(p: &Process) -> Process {
    p.without_edges(&dead_edges(p)).prune_unreachable()
}

type RefEdge = (&'static str, &'static str, &'static str, &'static [&'static str]);

const D_A: &[&str] = &["c_a", "c_b", "c"];
const D_AK: &[&str] = &["c_a", "c_b", "c", "enc(k_a, k)"];
const D_AKX: &[&str] = &["c_a", "c_b", "c", "enc(k_a, k)", "enc(k, x)"];

pub const WMF_PASS1: &[RefEdge] =
    &[("A0T0B0", "c_a ? k_a(k_T)", "A0T1B0", D_A), ("A0T0B0", "c_b ? k_b(k_B)", "A0T0B1", D_A)];

pub const WMF_PASS2: &[RefEdge] = &[
    ("A1T0B0", "c_b ? k_b(k_B)", "A1T0B1", D_AK),
    ("A1T1B0", "c_b ? k_b(k_B)", "A1T1B1", D_AK),
    ("A2T0B0", "c_b ? k_b(k_B)", "A2T0B1", D_AKX),
    ("A2T1B0", "c_b ? k_b(k_B)", "A2T1B1", D_AKX),
];

pub const WMF_PASS3: (&str, &str, &str) = ("A1T2B1", "c ? k_B(y)", "A1T2P");

fn terms(ps: &ProtocolSystem, ts: &[&str]) -> BTreeSet<Term> {
    ts.iter().map(|t| parse_term(t, &ps.scope()).expect("term parses")).collect()
}

/// Replays one of the reference passes: removes the listed edges under the
/// synthesized labeling (each re-validated by the reduction theorem), then
/// drops dead edges and unreachable states.
pub fn replay_pass(p: &Process, edges: &[RefEdge]) -> Result<Process, String> {
    let idx = edges.iter().map(|(f, a, t, _)| edge(p, f, a, t)).collect::<Result<Vec<_>, _>>()?;
    let r = remove_edges(p, &synthesize_labeling(p), &idx).map_err(|e| format!("{:?}", e))?;
    Ok(clean(&r))
}

pub fn wmf_twice_reduced(ps: &ProtocolSystem) -> Result<Process, String> {
    replay_pass(&replay_pass(&clean(&ps.system), WMF_PASS1)?, WMF_PASS2)
}

/// Criterion 4(a).
pub fn wmf_states() -> Check {
    let ps = builtin("wmf").map_err(|e| e.to_string())?;
    match ps.system.len() {
        27 => Ok("27 product states".into()),
        n => Err(format!("{} states", n)),
    }
}

/// Criterion 4(b).
pub fn wmf_passes_1_2() -> Check {
    let ps = builtin("wmf").map_err(|e| e.to_string())?;
    let trace = run_reduction_trace(&ps);
    for (f, a, t, d) in WMF_PASS1.iter().chain(WMF_PASS2) {
        let found = trace
            .iter()
            .flat_map(|s| &s.removed)
            .find(|e| e.from == *f && e.action.pretty() == *a && e.to == *t && e.reason == RemovalReason::KeyAbsent);
        let Some(e) = found else { return Err(format!("trace lacks {} -{}-> {}", f, a, t)) };
        let got = e.frame.as_ref().map(|fr| fr.disclosed.clone()).unwrap_or_default();
        if got != terms(&ps, d) {
            return Err(format!("{} -{}-> {}: frame {:?}, expected {:?}", f, a, t, got, d));
        }
    }
    let p0 = clean(&ps.system);
    let p1 = replay_pass(&p0, WMF_PASS1)?;
    let p2 = replay_pass(&p1, WMF_PASS2)?;
    let sizes = (p0.len(), p1.len(), p2.len());
    if sizes != (27, 19, 11) {
        return Err(format!("staged replay gives {:?} states, expected (27, 19, 11)", sizes));
    }
    Ok(format!(
        "all 6 edges in the trace ({} engine pass(es)) with the expected frames; staged replay 27 -> 19 -> 11 states",
        trace.len()
    ))
}

/// The printed labeling of the twice-reduced graph. It names a
/// state "A1T2B2", which is A1T2P here, and gives it no condition.
pub const WMF_LABELING: &[(&str, &[&str], Option<&str>)] = &[
    ("A0T0B0", D_A, Some("true")),
    ("A1T0B0", D_AK, Some("true")),
    ("A1T1B0", D_AK, Some("k = k_T")),
    ("A2T0B0", D_AKX, Some("true")),
    ("A2T1B0", D_AKX, Some("k = k_T")),
    ("A1T2B0", &["c_a", "c_b", "c", "enc(k_a, k)", "enc(k_b, k_T)"], Some("k = k_T")),
    ("A1T2B1", &["c_a", "c_b", "c", "enc(k_a, k)", "enc(k_b, k_T)"], Some("k = k_T & k_T = k_B")),
    ("A1T2P", &["c_a", "c_b", "c", "enc(k_a, k)", "enc(k_b, k_T)"], None),
    ("A2T2B0", &["c_a", "c_b", "c", "enc(k_a, k)", "enc(k_b, k_T)", "enc(k, x)"], Some("k = k_T")),
    ("A2T2B1", &["c_a", "c_b", "c", "enc(k_a, k)", "enc(k_b, k_T)", "enc(k, x)"], Some("k = k_T & k_T = k_B")),
    ("A2T2P", &["c_a", "c_b", "c", "enc(k_a, k)", "enc(k_b, k_T)", "enc(k, x)"], Some("k = k_T & k_T = k_B & x = y")),
];

fn printed_labeling(ps: &ProtocolSystem, p: &Process, missing: &str) -> Result<StateLabeling, String> {
    let mut l = StateLabeling::default();
    for (s, d, b) in WMF_LABELING {
        let id = p.state(s).ok_or_else(|| format!("no state {}", s))?;
        let cond = parse_formula(b.unwrap_or(missing), &ps.scope()).map_err(|e| e.to_string())?;
        l.insert(id, Frame { disclosed: terms(ps, d), cond });
    }
    Ok(l)
}

/// Criterion 4(c). The missing b of A1T2P is filled with every candidate
/// worth trying: closure is monotone in b, any admissible b is entailed
/// by b_{A2T2P}, and ⊥ is the strongest. Failures are expected only on
/// edges at A1T2P.
pub fn wmf_printed_labeling() -> Outcome {
    let run = || -> Result<Outcome, String> {
        let ps = builtin("wmf").map_err(|e| e.to_string())?;
        let p = wmf_twice_reduced(&ps)?;
        let a1t2p = p.state(WMF_PASS3.2).ok_or("no state A1T2P")?;
        let mut notes = Vec::new();
        for cand in ["k = k_T & k_T = k_B & x = y", "k = k_T & k_T = k_B", "false"] {
            let l = printed_labeling(&ps, &p, cand)?;
            let v = match check_labeling(&p, &l) {
                Ok(()) => return Ok(Outcome::Pass(format!("accepted with b_A1T2P = {}", cand))),
                Err(v) => v,
            };
            let t = v.transition.map(|i| &p.transitions()[i]);
            let at = t.map(|t| format!("{} -{}-> {}", p.label(t.from), t.action.pretty(), p.label(t.to)));
            let note = format!("b_A1T2P = {}: {:?} at {}", cand, v.condition, at.as_deref().unwrap_or("?"));
            if !t.is_some_and(|t| t.from == a1t2p || t.to == a1t2p) {
                return Ok(Outcome::Fail(note));
            }
            notes.push(note);
        }
        Ok(Outcome::XFail(format!(
            "the verbatim labeling fails only at A1T2P, whose b is not given, for every choice of it ({})",
            notes.join("; ")
        )))
    };
    run().unwrap_or_else(Outcome::Fail)
}

/// Criterion 4(d).
pub fn wmf_pass_3() -> Check {
    let ps = builtin("wmf").map_err(|e| e.to_string())?;
    let p = wmf_twice_reduced(&ps)?;
    let l = synthesize_labeling(&p);
    let e = edge(&p, WMF_PASS3.0, WMF_PASS3.1, WMF_PASS3.2)?;
    if !removable_edges(&p, &l).contains(&e) {
        return Err("pass-3 edge not removable under the synthesized labeling".into());
    }
    let r = clean(&remove_edges(&p, &l, &[e]).map_err(|e| format!("{:?}", e))?);
    if r != reduce(&ps.system).process {
        return Err(format!("after pass 3: {}", super::show(&r)));
    }
    Ok(format!(
        "{} -{}-> {} removed; {} states, {} edges, equal to reduce",
        WMF_PASS3.0,
        WMF_PASS3.1,
        WMF_PASS3.2,
        r.len(),
        r.transitions().len()
    ))
}

/// Criterion 4(e), timed with the rest of criterion 4.
pub fn wmf_integrity() -> Check {
    let ps = builtin("wmf").map_err(|e| e.to_string())?;
    let r = verify_integrity(&ps, DEFAULT_BUDGET);
    if r.verdict != Verdict::Holds {
        return Err(r.to_string());
    }
    Ok("holds".into())
}

/// Two processes related by the equivalence whose parallel composition
/// with `[x = 'b']` is not: the context fixes the value of a variable the
/// environment knows, and `k(a)` vs `k(x)` become comparable.
pub fn congruence_counterexample() -> (Process, Process, Process) {
    let k = |b: Term| Term::enc(Term::key("k"), b).unwrap();
    let o = || Term::cnst("o");
    let h: BTreeSet<String> = ["k".to_string()].into();
    let side = |c: &str, tag: &str| {
        let p = chain(&[Action::output(o(), k(Term::cnst(c))), Action::output(o(), k(Term::var("x")))], tag);
        super::close(&hide(&p, &h))
    };
    let q = chain(&[Action::Internal(Formula::eq(Term::var("x"), Term::cnst("b")))], "q");
    (side("a", "s"), side("b", "t"), super::close(&q))
}

/// Congruence for a context sharing a variable with the
/// operands: expected to fail.
pub fn congruence_shared_variables() -> Outcome {
    let (p1, p2, q) = congruence_counterexample();
    if search_witness(&p1, &p2, DEFAULT_BUDGET).is_err() {
        return Outcome::Fail("premise: the pair has no witness".into());
    }
    let (l, r) = (parallel(&p1, &q), parallel(&p2, &q));
    let pre = (prefix(q.transitions()[0].action.clone(), &p1), prefix(q.transitions()[0].action.clone(), &p2));
    match (tree_equiv(&l, &r, DEFAULT_BUDGET), tree_equiv(&pre.0, &pre.1, DEFAULT_BUDGET)) {
        (TreeVerdict::NotEquivalent { reason }, TreeVerdict::NotEquivalent { .. }) => Outcome::XFail(format!(
            "(o!k(a).o!k(x))_k and (o!k(b).o!k(x))_k are related, but not in parallel with or prefixed by [x = 'b']: {}",
            reason
        )),
        (a, b) => Outcome::Pass(format!("contexts related: parallel {:?}, prefix {:?}", a, b)),
    }
}

/// Criterion 6: the eq1 certificate, then one mutation per field.
pub fn eq1_certificate() -> Check {
    let ps = eq1();
    let r = verify_integrity(&ps, DEFAULT_BUDGET);
    let Evidence::Witness { certificate } = r.evidence else { return Err(format!("no certificate: {}", r)) };
    check_cert(&ps, &certificate).map_err(|e| format!("original rejected: {}", e))?;
    let base = serde_json::to_value(&*certificate).unwrap();
    let mut lines = Vec::new();
    for (field, mutate) in mutations() {
        let mut v = base.clone();
        mutate(&mut v);
        if v == base {
            return Err(format!("mutation of {} changed nothing", field));
        }
        let cert: WitnessCert = serde_json::from_value(v).map_err(|e| format!("{}: {}", field, e))?;
        match check_cert(&ps, &cert) {
            Ok(()) => return Err(format!("mutated {} accepted", field)),
            Err(e) => lines.push(format!("{}: {}", field, e)),
        }
    }
    // The certificate is tied to the reduced processes of its property.
    cert_processes(&ps, certificate.property).map_err(|e| e.to_string())?;
    Ok(lines.join(" | "))
}

type Mutation = (&'static str, fn(&mut Value));

pub fn mutations() -> Vec<Mutation> {
    vec![
        ("protocol", |v| v["protocol"] = "eq2".into()),
        ("property", |v| v["property"] = "secrecy".into()),
        ("relation", |v| {
            v["relation"].as_array_mut().unwrap().pop();
        }),
        ("similarities", |v| {
            let pairs = v["similarities"][1]["pairs"].as_array_mut().unwrap();
            pairs.retain(|p| p[0] != "c");
        }),
        ("labeling_left", |v| {
            v["labeling_left"][1]["disclosed"] = serde_json::json!(["c"]);
        }),
        ("labeling_right", |v| {
            v["labeling_right"][0]["cond"] = "false".into();
        }),
        ("mu0", |v| v["mu0"] = serde_json::json!([])),
    ]
}
