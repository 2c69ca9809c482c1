//! Symbolic process graphs for security protocols.
//!
//! Terms and conjunctive formulas, adversary knowledge closures and
//! similarities, process operators with execution trees, and
//! observational-equivalence checking through state labelings, witnesses
//! and reductions.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod cc;
pub mod equivalence;
pub mod formula;
pub mod knowledge;
pub mod process;
pub mod term;

pub use formula::{conjoin, entails, eq_under, is_false, is_false_fresh, Atom, Formula, Fresh};
pub use knowledge::{analysis_saturate, check_similarity, closure_contains, find_similarity, Frame, Similarity};

pub use process::{
    choice, exec_tree, hide, parallel, prefix, replicate, step, step_literal, Action, ExecNode, ExecTree, Process,
    ProcessError, StateId, Transition,
};
pub use term::{normalize, substitute, vars, Substitution, Term, TermError};
