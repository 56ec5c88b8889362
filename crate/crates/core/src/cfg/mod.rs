//! Control-flow-graph lowering and a dataflow flow engine.

pub mod alias;
pub mod control;
pub mod engine;
pub mod lower;

use std::fmt::Write;

pub use engine::{analyze_cfg, cfg_states};

use crate::flow::Theta;
pub use lower::{lower, Block, Body, Rvalue, Stmt, Term};

/// Graphviz rendering of a lowered body.
pub fn to_dot(body: &Body) -> String {
    to_dot_with(body, None)
}

/// Graphviz rendering with the context after each statement.
pub fn to_dot_annotated(body: &Body, states: &[Vec<Theta>]) -> String {
    to_dot_with(body, Some(states))
}

fn show_theta(th: &Theta) -> String {
    let parts: Vec<String> = th
        .map
        .iter()
        .map(|(k, v)| {
            let ls: Vec<String> = v.iter().map(|l| l.to_string()).collect();
            format!("{k}: {{{}}}", ls.join(","))
        })
        .collect();
    format!("Θ = {{{}}}", parts.join(", "))
}

fn to_dot_with(body: &Body, states: Option<&[Vec<Theta>]>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{}\" {{", body.fn_name);
    let _ = writeln!(s, "  node [shape=box, fontname=monospace];");
    for (i, b) in body.blocks.iter().enumerate() {
        let mut label = format!("bb{i}\\l");
        for (j, st) in b.stmts.iter().enumerate() {
            label.push_str(&escape(&st.to_string()));
            label.push_str("\\l");
            if let Some(th) = states.and_then(|s| s.get(i)).and_then(|v| v.get(j + 1)) {
                label.push_str("    ");
                label.push_str(&escape(&show_theta(th)));
                label.push_str("\\l");
            }
        }
        label.push_str(&escape(&b.term.to_string()));
        label.push_str("\\l");
        let _ = writeln!(s, "  bb{i} [label=\"{label}\"];");
        match &b.term {
            Term::Goto(t) => {
                let _ = writeln!(s, "  bb{i} -> bb{t};");
            }
            Term::Switch { then, other, .. } => {
                let _ = writeln!(s, "  bb{i} -> bb{then} [label=\"true\"];");
                let _ = writeln!(s, "  bb{i} -> bb{other} [label=\"false\"];");
            }
            Term::Return(_) => {}
        }
    }
    s.push_str("}\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
