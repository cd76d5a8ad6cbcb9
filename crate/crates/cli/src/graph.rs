//! Graphviz text for compositions and networks.

use std::fmt::Write as _;

use dmc_core::command::Command;
use dmc_core::compose::CompositionExpr;
use dmc_core::network::NetworkDef;

use crate::source::Target;

pub fn graph(target: &Target) -> String {
    match target {
        Target::Pattern {
            name,
            pattern,
            composition,
        } => match composition {
            Some(expr) => expr.to_dot(name),
            None => {
                let mut single = CompositionExpr::new();
                single.add(name.clone(), pattern.clone());
                single.to_dot(name)
            }
        },
        Target::Network(def) => network_dot(def),
    }
}

fn sends_on(def: &NetworkDef, agent: &str, channel: &str) -> bool {
    def.agent(agent).is_some_and(|a| {
        a.pattern.commands.iter().any(|c| match c {
            Command::Send { channel: ch, .. } | Command::QSend { channel: ch, .. } => ch == channel,
            _ => false,
        })
    })
}

/// Agents as nodes; each channel pair is an edge from its sending end.
fn network_dot(def: &NetworkDef) -> String {
    let mut s = format!("digraph \"{}\" {{\n  node [shape=ellipse];\n", def.name);
    for a in &def.agents {
        let qubits: Vec<String> = a.pattern.qubit_sort.iter().map(|q| q.to_string()).collect();
        let _ = writeln!(
            s,
            "  \"{}\" [label=\"{}\\npattern: {}\\nqubits: {}\"];",
            a.name,
            a.name,
            a.pattern.name,
            qubits.join(" ")
        );
    }
    for (x, y) in &def.config.channel_pairs {
        let (from, to) = if sends_on(def, &y.agent, &y.channel) && !sends_on(def, &x.agent, &x.channel) {
            (y, x)
        } else {
            (x, y)
        };
        let _ = writeln!(
            s,
            "  \"{}\" -> \"{}\" [label=\"{} -> {}\"];",
            from.agent, to.agent, from.channel, to.channel
        );
    }
    s.push_str("}\n");
    s
}
