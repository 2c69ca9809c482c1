//! Integrity and secrecy drivers and the reduction trace.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use spv_core::equivalence::{reduce, search_witness, tree_equiv, RemovedEdge, SearchError, TreeVerdict};
use spv_core::{prefix, Action, Formula, Process, Term};

use crate::cert::WitnessCert;
use crate::system::ProtocolSystem;

pub const DEFAULT_BUDGET: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Property {
    Integrity,
    Secrecy,
    Reduction,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Integrity => "integrity",
            Property::Secrecy => "secrecy",
            Property::Reduction => "reduction",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Refuted,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    /// A witness for the reduced pair; re-checkable with `check-cert`.
    Witness {
        certificate: Box<WitnessCert>,
    },
    /// No witness was found but the execution-tree search related the trees.
    TreeOracle {
        left_nodes: usize,
        right_nodes: usize,
    },
    /// The tree search failed; the obligation that failed deepest.
    FailingObligation {
        reason: String,
    },
    BudgetExhausted {
        detail: String,
    },
    /// Secrecy only: the premise about the continuation could not be
    /// established, so the conclusion was not evaluated.
    PremiseFails {
        detail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub states_explored: usize,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub protocol: String,
    pub property: Property,
    pub verdict: Verdict,
    pub evidence: Evidence,
    pub stats: Stats,
}

impl fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.verdict {
            Verdict::Holds => "holds",
            Verdict::Refuted => "refuted",
            Verdict::Inconclusive => "inconclusive",
        };
        writeln!(f, "{} of {}: {}", self.property, self.protocol, v)?;
        match &self.evidence {
            Evidence::Witness { certificate } => {
                writeln!(f, "  witness relates {} state pairs", certificate.relation.len())?
            }
            Evidence::TreeOracle { left_nodes, right_nodes } => {
                writeln!(f, "  execution trees related ({} / {} nodes)", left_nodes, right_nodes)?
            }
            Evidence::FailingObligation { reason } => writeln!(f, "  failing obligation: {}", reason)?,
            Evidence::BudgetExhausted { detail } => writeln!(f, "  budget exhausted: {}", detail)?,
            Evidence::PremiseFails { detail } => writeln!(f, "  premise fails: {}", detail)?,
        }
        write!(f, "  {} states explored in {:.1} ms", self.stats.states_explored, self.stats.wall_time_ms)
    }
}

/// Outcome of deciding one equivalence.
struct Decision {
    verdict: Verdict,
    evidence: Evidence,
    states: usize,
}

/// Reduce both sides, look for a witness, fall back to the tree search.
fn decide(ps: &ProtocolSystem, property: Property, p1: &Process, p2: &Process, budget: usize) -> Decision {
    let r1 = reduce(p1).process;
    let r2 = reduce(p2).process;
    let mut states = p1.len() + p2.len();
    let mut notes = Vec::new();
    match search_witness(&r1, &r2, budget) {
        Ok(w) => {
            let cert = WitnessCert::from_witness(&ps.name, property, &r1, &r2, &w);
            return Decision {
                verdict: Verdict::Holds,
                evidence: Evidence::Witness { certificate: Box::new(cert) },
                states,
            };
        }
        Err(SearchError::BudgetExhausted) => notes.push("witness search".to_string()),
        Err(SearchError::NoWitnessFound { .. }) => {}
    }
    match tree_equiv(&r1, &r2, budget) {
        TreeVerdict::Equivalent => {
            let (t1, t2) = (tree_size(&r1, budget), tree_size(&r2, budget));
            states += t1 + t2;
            Decision {
                verdict: Verdict::Holds,
                evidence: Evidence::TreeOracle { left_nodes: t1, right_nodes: t2 },
                states,
            }
        }
        TreeVerdict::NotEquivalent { reason } => {
            Decision { verdict: Verdict::Refuted, evidence: Evidence::FailingObligation { reason }, states }
        }
        TreeVerdict::Inconclusive => {
            notes.push("execution-tree search".to_string());
            Decision {
                verdict: Verdict::Inconclusive,
                evidence: Evidence::BudgetExhausted { detail: notes.join(", ") },
                states,
            }
        }
    }
}

fn tree_size(p: &Process, budget: usize) -> usize {
    spv_core::process::exec_tree_bounded(p, budget).map(|t| t.len()).unwrap_or(budget)
}

fn report(ps: &ProtocolSystem, property: Property, d: Decision, start: Instant) -> VerificationReport {
    VerificationReport {
        protocol: ps.name.clone(),
        property,
        verdict: d.verdict,
        evidence: d.evidence,
        stats: Stats { states_explored: d.states, wall_time_ms: start.elapsed().as_secs_f64() * 1e3 },
    }
}

/// Sys ≈ ~Sys.
pub fn verify_integrity(ps: &ProtocolSystem, budget: usize) -> VerificationReport {
    let start = Instant::now();
    let d = decide(ps, Property::Integrity, &ps.system, &ps.modified_system, budget);
    report(ps, Property::Integrity, d, start)
}

/// Two constants not used anywhere in the program, standing for the
/// fresh values compared by the secrecy check.
pub fn secrecy_constants(ps: &ProtocolSystem) -> (Term, Term) {
    let mut used: BTreeSet<String> = BTreeSet::new();
    for p in [&ps.system, &ps.modified_system, &ps.continuation] {
        used.extend(p.vars());
        for t in p.transitions() {
            if let Some((c, m)) = t.action.message() {
                collect_consts(c, &mut used);
                collect_consts(m, &mut used);
            }
        }
    }
    used.extend(ps.program.channels.iter().cloned());
    used.extend(ps.program.consts.iter().cloned());
    let fresh = |base: &str, used: &BTreeSet<String>| {
        let mut s = base.to_string();
        while used.contains(&s) {
            s.push('_');
        }
        s
    };
    let a = fresh(&format!("{}1", ps.secret), &used);
    let b = fresh(&format!("{}2", ps.secret), &used);
    (Term::cnst(&a), Term::cnst(&b))
}

fn collect_consts(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Const(c) => {
            out.insert(c.clone());
        }
        Term::Var { .. } => {}
        Term::Enc(k, b) => {
            collect_consts(k, out);
            collect_consts(b, out);
        }
        Term::Seq(items) => items.iter().for_each(|i| collect_consts(i, out)),
    }
}

fn guarded(var: &str, value: &Term, p: &Process) -> Process {
    prefix(Action::Internal(Formula::eq(Term::var(var), value.clone())), p)
}

/// The two sides of the secrecy conclusion, `[x=x1]Sys` and `[x=x2]Sys`.
pub fn secrecy_pair(ps: &ProtocolSystem) -> (Process, Process) {
    let (x1, x2) = secrecy_constants(ps);
    (guarded(&ps.secret, &x1, &ps.system), guarded(&ps.secret, &x2, &ps.system))
}

/// `[y=x1]P ≈ [y=x2]P  ⇒  [x=x1]Sys ≈ [x=x2]Sys`, with the premise checked
/// first.
pub fn verify_secrecy(ps: &ProtocolSystem, budget: usize) -> VerificationReport {
    let start = Instant::now();
    let (x1, x2) = secrecy_constants(ps);
    let q1 = guarded(&ps.received, &x1, &ps.continuation);
    let q2 = guarded(&ps.received, &x2, &ps.continuation);
    let premise = decide(ps, Property::Secrecy, &q1, &q2, budget);
    if premise.verdict != Verdict::Holds {
        let detail = match &premise.evidence {
            Evidence::FailingObligation { reason } => {
                format!("the continuation distinguishes {} values: {}", ps.received, reason)
            }
            Evidence::BudgetExhausted { detail } => format!("budget exhausted in {}", detail),
            _ => "premise not established".to_string(),
        };
        let d = Decision {
            verdict: Verdict::Inconclusive,
            evidence: Evidence::PremiseFails { detail },
            states: premise.states,
        };
        return report(ps, Property::Secrecy, d, start);
    }
    let (s1, s2) = secrecy_pair(ps);
    let mut d = decide(ps, Property::Secrecy, &s1, &s2, budget);
    d.states += premise.states;
    report(ps, Property::Secrecy, d, start)
}

/// One pass of the reduction loop: the graph after the pass and the edges
/// it removed.
#[derive(Clone, Debug)]
pub struct TraceStep {
    pub pass: usize,
    pub process: Process,
    pub removed: Vec<RemovedEdge>,
}

pub fn run_reduction_trace(ps: &ProtocolSystem) -> Vec<TraceStep> {
    let r = reduce(&ps.system);
    r.passes
        .iter()
        .enumerate()
        .map(|(i, p)| TraceStep {
            pass: i + 1,
            process: p.clone(),
            removed: r.removed.iter().filter(|e| e.pass == i + 1).cloned().collect(),
        })
        .collect()
}
