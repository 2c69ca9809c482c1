//! Witness certificates: JSON form of an equivalence witness, keyed by
//! state names and concrete term syntax, and their re-validation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use spv_core::equivalence::{check_witness, reduce, EquivalenceWitness, Pairs, StateLabeling};
use spv_core::{Frame, Process, Term};
use thiserror::Error;

use crate::parser::{parse_formula, parse_term, DslError, Scope};
use crate::system::ProtocolSystem;
use crate::verify::{secrecy_pair, Property};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityEntry {
    pub left: String,
    pub right: String,
    pub pairs: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub state: String,
    pub disclosed: Vec<String>,
    pub cond: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessCert {
    pub protocol: String,
    pub property: Property,
    pub relation: Vec<(String, String)>,
    pub similarities: Vec<SimilarityEntry>,
    pub labeling_left: Vec<LabelEntry>,
    pub labeling_right: Vec<LabelEntry>,
    pub mu0: Vec<(String, String)>,
}

#[derive(Debug, Error)]
pub enum CertError {
    #[error("certificate is for protocol `{found}`, not `{expected}`")]
    ProtocolMismatch { expected: String, found: String },
    #[error("certificates cover integrity or secrecy, not {0}")]
    BadProperty(Property),
    #[error("{field}: unknown state `{name}`")]
    UnknownState { field: &'static str, name: String },
    #[error("{field}: cannot read `{text}`: {err}")]
    Syntax { field: &'static str, text: String, err: DslError },
    #[error("witness rejected: {0}")]
    Rejected(String),
}

fn pairs_out(p: &Pairs) -> Vec<(String, String)> {
    p.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

fn labeling_out(p: &Process, l: &StateLabeling) -> Vec<LabelEntry> {
    l.entries
        .iter()
        .map(|(&s, f)| LabelEntry {
            state: p.label(s).to_string(),
            disclosed: f.disclosed.iter().map(|t| t.to_string()).collect(),
            cond: f.cond.to_string(),
        })
        .collect()
}

impl WitnessCert {
    pub fn from_witness(
        protocol: &str,
        property: Property,
        p1: &Process,
        p2: &Process,
        w: &EquivalenceWitness,
    ) -> WitnessCert {
        WitnessCert {
            protocol: protocol.to_string(),
            property,
            relation: w.relation.iter().map(|&(a, b)| (p1.label(a).to_string(), p2.label(b).to_string())).collect(),
            similarities: w
                .similarities
                .iter()
                .map(|(&(a, b), m)| SimilarityEntry {
                    left: p1.label(a).to_string(),
                    right: p2.label(b).to_string(),
                    pairs: pairs_out(m),
                })
                .collect(),
            labeling_left: labeling_out(p1, &w.labeling_left),
            labeling_right: labeling_out(p2, &w.labeling_right),
            mu0: pairs_out(&w.mu0),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

struct Reader<'a> {
    scope: Scope,
    p1: &'a Process,
    p2: &'a Process,
}

impl Reader<'_> {
    fn state(&self, field: &'static str, right: bool, name: &str) -> Result<usize, CertError> {
        let p = if right { self.p2 } else { self.p1 };
        p.state(name).ok_or_else(|| CertError::UnknownState { field, name: name.to_string() })
    }

    fn term(&self, field: &'static str, text: &str) -> Result<Term, CertError> {
        parse_term(text, &self.scope).map_err(|err| CertError::Syntax { field, text: text.to_string(), err })
    }

    fn pairs(&self, field: &'static str, ps: &[(String, String)]) -> Result<Pairs, CertError> {
        ps.iter().map(|(a, b)| Ok((self.term(field, a)?, self.term(field, b)?))).collect()
    }

    fn labeling(&self, field: &'static str, right: bool, es: &[LabelEntry]) -> Result<StateLabeling, CertError> {
        let mut l = StateLabeling::default();
        for e in es {
            let s = self.state(field, right, &e.state)?;
            let disclosed: BTreeSet<Term> =
                e.disclosed.iter().map(|t| self.term(field, t)).collect::<Result<_, _>>()?;
            let cond = parse_formula(&e.cond, &self.scope).map_err(|err| CertError::Syntax {
                field,
                text: e.cond.clone(),
                err,
            })?;
            l.insert(s, Frame { disclosed, cond });
        }
        Ok(l)
    }
}

/// The pair of processes a certificate speaks about: both sides of the
/// property, reduced.
pub fn cert_processes(ps: &ProtocolSystem, property: Property) -> Result<(Process, Process), CertError> {
    let (p1, p2) = match property {
        Property::Integrity => (ps.system.clone(), ps.modified_system.clone()),
        Property::Secrecy => secrecy_pair(ps),
        Property::Reduction => return Err(CertError::BadProperty(property)),
    };
    Ok((reduce(&p1).process, reduce(&p2).process))
}

/// Rebuilds the witness against the protocol's processes and checks every
/// condition; the error names the first one that fails.
pub fn check_cert(ps: &ProtocolSystem, cert: &WitnessCert) -> Result<(), CertError> {
    if cert.protocol != ps.name {
        return Err(CertError::ProtocolMismatch { expected: ps.name.clone(), found: cert.protocol.clone() });
    }
    let (p1, p2) = cert_processes(ps, cert.property)?;
    let r = Reader { scope: ps.scope(), p1: &p1, p2: &p2 };
    let mut relation = BTreeSet::new();
    for (a, b) in &cert.relation {
        relation.insert((r.state("relation", false, a)?, r.state("relation", true, b)?));
    }
    let mut similarities = BTreeMap::new();
    for e in &cert.similarities {
        let key = (r.state("similarities", false, &e.left)?, r.state("similarities", true, &e.right)?);
        similarities.insert(key, r.pairs("similarities", &e.pairs)?);
    }
    let w = EquivalenceWitness {
        relation,
        similarities,
        labeling_left: r.labeling("labeling_left", false, &cert.labeling_left)?,
        labeling_right: r.labeling("labeling_right", true, &cert.labeling_right)?,
        mu0: r.pairs("mu0", &cert.mu0)?,
    };
    check_witness(&p1, &p2, &w).map_err(|v| CertError::Rejected(v.describe(&p1, &p2)))
}
