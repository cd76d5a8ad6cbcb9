//! Network compilation: instantiate every agent and the resource with
//! globally unique references, wire qubits and channels per the
//! configuration.

use std::collections::{BTreeMap, BTreeSet};

use crate::command::{Command, QubitName, QubitRef};
use crate::pattern::{assemble, validate_pattern, AssembledSequence, FreshRefs};
use crate::sexpr::SExpr;

use super::{AgentChannel, AgentQubit, NetworkDef, NetworkError};

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledAgent {
    pub name: String,
    pub commands: Vec<Command<QubitRef>>,
    /// Qubits the agent owns at the start (sort plus working qubits).
    pub owned: Vec<QubitRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledNetwork {
    pub name: String,
    pub resource: AssembledSequence,
    pub agents: Vec<CompiledAgent>,
    /// Initial owner (agent index) of every agent-held qubit.
    pub ownership: BTreeMap<QubitRef, usize>,
    /// Sort qubits not supplied by the resource; their state is given at
    /// start-up.
    pub inputs: Vec<QubitRef>,
    /// Non-sort qubits used by an agent; they start in `|+>`.
    pub working: Vec<QubitRef>,
    pub channels: Vec<String>,
    /// Every agent-qubit name to its reference.
    pub names: BTreeMap<AgentQubit, QubitRef>,
    pub outputs: Option<Vec<QubitRef>>,
}

impl CompiledNetwork {
    pub fn agent_index(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a.name == name)
    }

    pub fn qubit(&self, agent: &str, qubit: QubitName) -> Option<QubitRef> {
        self.names.get(&AgentQubit::new(agent, qubit)).copied()
    }

    /// Label of a reference for reports, e.g. `A.?q`.
    pub fn label(&self, r: QubitRef) -> Option<String> {
        self.names.iter().find(|(_, v)| **v == r).map(|(k, _)| k.to_string())
    }

    pub fn to_sexpr(&self) -> SExpr {
        let refs = |xs: &[QubitRef]| SExpr::list(xs.iter().map(|r| SExpr::atom(r.to_string())));
        let mut items = vec![
            SExpr::atom("network"),
            SExpr::atom(self.name.clone()),
            SExpr::list([
                SExpr::atom("resource"),
                crate::command::sequence_to_sexpr(&self.resource.commands),
            ]),
        ];
        for a in &self.agents {
            items.push(SExpr::list([
                SExpr::atom("agent"),
                SExpr::atom(a.name.clone()),
                refs(&a.owned),
                crate::command::sequence_to_sexpr(&a.commands),
            ]));
        }
        items.push(SExpr::list(std::iter::once(SExpr::atom("inputs")).chain(
            self.inputs.iter().map(|r| SExpr::atom(r.to_string())),
        )));
        items.push(SExpr::list(std::iter::once(SExpr::atom("channels")).chain(
            self.channels.iter().map(|c| SExpr::atom(c.clone())),
        )));
        SExpr::List(items)
    }
}

fn agent_names(cmds: &[Command<QubitName>]) -> Vec<QubitName> {
    let mut out: Vec<QubitName> = Vec::new();
    for c in cmds {
        let mut names: Vec<&QubitName> = c.operands();
        for s in c.signals() {
            names.extend(s.outcome_qubits());
        }
        for q in names {
            if !out.contains(q) {
                out.push(q.clone());
            }
        }
    }
    out
}

pub fn compile_network(def: &NetworkDef) -> Result<CompiledNetwork, NetworkError> {
    let mut seen = BTreeSet::new();
    for a in &def.agents {
        if !seen.insert(a.name.as_str()) {
            return Err(NetworkError::DuplicateAgent(a.name.clone()));
        }
    }
    if !def.resource.inputs.is_empty() {
        return Err(NetworkError::ResourceHasInputs);
    }
    let violations = validate_pattern(&def.resource);
    if !violations.is_empty() {
        return Err(NetworkError::InvalidResource(violations));
    }

    // fresh references start above every concrete one in the definition
    let mut concrete: BTreeSet<QubitRef> = BTreeSet::new();
    let mut note = |q: &QubitName| {
        if let QubitName::Ref(r) = q {
            concrete.insert(*r);
        }
    };
    def.resource.names().iter().for_each(&mut note);
    for a in &def.agents {
        a.pattern.qubit_sort.iter().for_each(&mut note);
        agent_names(&a.pattern.commands).iter().for_each(&mut note);
    }
    let mut fresh = FreshRefs::default();
    fresh.skip_past(concrete.iter().copied());

    let resource = assemble(&def.resource, &mut fresh)?;
    let resource_ref = |q: &QubitName| -> Option<QubitRef> {
        let pos = def.resource.outputs.iter().position(|o| o == q)?;
        Some(resource.outputs[pos])
    };

    let agent_index: BTreeMap<&str, usize> = def.agents.iter().enumerate().map(|(i, a)| (a.name.as_str(), i)).collect();

    // resource outputs handed to agents
    let mut bound: BTreeMap<AgentQubit, QubitRef> = BTreeMap::new();
    let mut claimed: BTreeSet<QubitRef> = BTreeSet::new();
    for (rq, aq) in &def.config.qubit_pairs {
        let r = resource_ref(rq).ok_or_else(|| NetworkError::UnknownResourceQubit(format!("R.{rq}")))?;
        let i = *agent_index
            .get(aq.agent.as_str())
            .ok_or_else(|| NetworkError::UnknownAgent(aq.agent.clone()))?;
        if !def.agents[i].pattern.qubit_sort.contains(&aq.qubit) {
            return Err(NetworkError::UnknownAgentQubit(aq.to_string()));
        }
        if !claimed.insert(r) {
            return Err(NetworkError::BindingConflict(format!("R.{rq}")));
        }
        if bound.insert(aq.clone(), r).is_some() {
            return Err(NetworkError::BindingConflict(aq.to_string()));
        }
    }
    // concrete resource outputs go to whichever agent lists them
    for (q, &r) in def.resource.outputs.iter().zip(&resource.outputs) {
        if claimed.contains(&r) {
            continue;
        }
        let holders: Vec<&str> = def
            .agents
            .iter()
            .filter(|a| matches!(q, QubitName::Ref(_)) && a.pattern.qubit_sort.contains(q))
            .map(|a| a.name.as_str())
            .collect();
        match holders.as_slice() {
            [] => return Err(NetworkError::UnclaimedResourceQubit(format!("R.{q}"))),
            [one] => {
                bound.insert(AgentQubit::new(*one, q.clone()), r);
            }
            _ => return Err(NetworkError::BindingConflict(q.to_string())),
        }
    }

    // concrete references held in some agent sort
    let mut sort_owner: BTreeMap<QubitRef, usize> = BTreeMap::new();
    for (i, a) in def.agents.iter().enumerate() {
        for q in &a.pattern.qubit_sort {
            if let QubitName::Ref(r) = q {
                if sort_owner.insert(*r, i).is_some() {
                    return Err(NetworkError::BindingConflict(q.to_string()));
                }
            }
        }
    }
    let resource_all: BTreeSet<QubitRef> = resource.space.iter().copied().collect();

    let mut names: BTreeMap<AgentQubit, QubitRef> = BTreeMap::new();
    let mut ownership: BTreeMap<QubitRef, usize> = BTreeMap::new();
    let mut inputs = Vec::new();
    let mut working = Vec::new();
    let mut per_agent: Vec<BTreeMap<QubitName, QubitRef>> = Vec::new();
    for (i, a) in def.agents.iter().enumerate() {
        let qrecv: BTreeSet<&QubitName> = a
            .pattern
            .commands
            .iter()
            .filter_map(|c| match c {
                Command::QRecv { binding, .. } => Some(binding),
                _ => None,
            })
            .collect();
        let mut map: BTreeMap<QubitName, QubitRef> = BTreeMap::new();
        for q in &a.pattern.qubit_sort {
            let key = AgentQubit::new(a.name.clone(), q.clone());
            let r = match (bound.get(&key), q) {
                (Some(r), _) => *r,
                (None, QubitName::Ref(r)) => {
                    inputs.push(*r);
                    *r
                }
                (None, QubitName::Var(_)) => {
                    let r = fresh.fresh();
                    inputs.push(r);
                    r
                }
            };
            if map.insert(q.clone(), r).is_some() {
                return Err(NetworkError::BindingConflict(key.to_string()));
            }
            ownership.insert(r, i);
        }
        for q in agent_names(&a.pattern.commands) {
            if map.contains_key(&q) {
                continue;
            }
            let r = match &q {
                QubitName::Ref(r) => *r,
                QubitName::Var(_) => fresh.fresh(),
            };
            map.insert(q.clone(), r);
            let elsewhere = sort_owner.contains_key(&r) || resource_all.contains(&r);
            if !qrecv.contains(&q) && !elsewhere {
                if ownership.insert(r, i).is_some() {
                    return Err(NetworkError::BindingConflict(q.to_string()));
                }
                working.push(r);
            }
        }
        for (q, r) in &map {
            names.insert(AgentQubit::new(a.name.clone(), q.clone()), *r);
        }
        per_agent.push(map);
    }

    let channel_ids = wire_channels(def)?;
    let channels: Vec<String> = {
        let mut cs: Vec<String> = channel_ids.values().cloned().collect();
        cs.sort();
        cs.dedup();
        cs
    };

    let mut agents = Vec::new();
    for (i, a) in def.agents.iter().enumerate() {
        let map = &per_agent[i];
        let commands: Vec<Command<QubitRef>> = a
            .pattern
            .commands
            .iter()
            .map(|c| {
                c.map_qubits(&mut |q| map[q]).rename_classical(
                    &mut |ch| channel_ids[&AgentChannel::new(a.name.clone(), ch)].clone(),
                    &mut |n| format!("{}.{n}", a.name),
                )
            })
            .collect();
        // static ownership: without qrecv the agent can only ever hold its
        // initial qubits
        let receives = commands.iter().any(|c| matches!(c, Command::QRecv { .. }));
        if !receives {
            for c in &commands {
                if c.is_communication() {
                    continue;
                }
                for q in c.operands() {
                    if ownership.get(q) != Some(&i) {
                        return Err(NetworkError::OwnershipViolation {
                            agent: a.name.clone(),
                            qubit: *q,
                            command: c.to_string(),
                        });
                    }
                }
            }
        }
        let owned = ownership.iter().filter(|(_, &o)| o == i).map(|(r, _)| *r).collect();
        agents.push(CompiledAgent {
            name: a.name.clone(),
            commands,
            owned,
        });
    }

    let outputs = def
        .outputs
        .as_ref()
        .map(|outs| {
            outs.iter()
                .map(|aq| names.get(aq).copied().ok_or_else(|| NetworkError::UnknownAgentQubit(aq.to_string())))
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;

    Ok(CompiledNetwork {
        name: def.name.clone(),
        resource,
        agents,
        ownership,
        inputs,
        working,
        channels,
        names,
        outputs,
    })
}

/// Canonical channel id for every channel an agent declares or uses.
fn wire_channels(def: &NetworkDef) -> Result<BTreeMap<AgentChannel, String>, NetworkError> {
    let mut sorts: BTreeSet<AgentChannel> = BTreeSet::new();
    let mut used: BTreeMap<AgentChannel, (bool, bool)> = BTreeMap::new();
    for a in &def.agents {
        for ch in &a.pattern.channel_sort {
            sorts.insert(AgentChannel::new(a.name.clone(), ch.clone()));
        }
        for c in &a.pattern.commands {
            if let Some(ch) = c.channel() {
                let key = AgentChannel::new(a.name.clone(), ch);
                if !sorts.contains(&key) {
                    return Err(NetworkError::ChannelNotInSort(key.to_string()));
                }
                let e = used.entry(key).or_default();
                match c {
                    Command::Send { .. } | Command::QSend { .. } => e.0 = true,
                    _ => e.1 = true,
                }
            }
        }
    }
    let mut ids: BTreeMap<AgentChannel, String> = BTreeMap::new();
    let mut next = 0;
    for (a, b) in &def.config.channel_pairs {
        for end in [a, b] {
            if def.agent(&end.agent).is_none() {
                return Err(NetworkError::UnknownAgent(end.agent.clone()));
            }
            if !sorts.contains(end) {
                return Err(NetworkError::ChannelNotInSort(end.to_string()));
            }
            if ids.contains_key(end) {
                return Err(NetworkError::BindingConflict(end.to_string()));
            }
        }
        if a.agent == b.agent {
            return Err(NetworkError::SameAgentChannelPair(a.agent.clone()));
        }
        let id = format!("ch{next}");
        next += 1;
        ids.insert(a.clone(), id.clone());
        ids.insert(b.clone(), id);
    }
    for ch in &sorts {
        if ids.contains_key(ch) {
            continue;
        }
        // a channel an agent both writes and reads needs no partner
        if used.get(ch) == Some(&(true, true)) {
            ids.insert(ch.clone(), format!("ch{next}"));
            next += 1;
        } else {
            return Err(NetworkError::DanglingChannel(ch.to_string()));
        }
    }
    Ok(ids)
}
