//! Graphviz export.

use spv_core::Process;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// A deterministic DOT digraph; the initial state is double-circled.
pub fn export_dot(p: &Process) -> String {
    let mut out = String::from("digraph process {\n    rankdir=TB;\n    node [shape=circle];\n");
    for s in p.states() {
        let shape = if s == p.initial() { " shape=doublecircle" } else { "" };
        out.push_str(&format!("    s{} [label={}{}];\n", s, quote(p.label(s)), shape));
    }
    for t in p.transitions() {
        out.push_str(&format!("    s{} -> s{} [label={}];\n", t.from, t.to, quote(&t.action.pretty())));
    }
    out.push_str("}\n");
    out
}
