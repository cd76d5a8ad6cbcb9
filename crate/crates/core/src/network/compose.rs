//! Sequential composition of two networks: paired agents are merged into a
//! single agent running the first network's parts, then the second's.

use std::collections::{BTreeMap, BTreeSet};

use crate::command::{Command, QubitName, QubitRef};
use crate::pattern::Pattern;

use super::{AgentChannel, AgentInstance, AgentPattern, AgentQubit, NetworkConfig, NetworkDef, NetworkError};

fn concrete_refs(def: &NetworkDef) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    let mut note = |q: &QubitName| {
        if let QubitName::Ref(r) = q {
            out.insert(r.0);
        }
    };
    def.resource.names().iter().for_each(&mut note);
    for a in &def.agents {
        a.pattern.qubit_sort.iter().for_each(&mut note);
        for c in &a.pattern.commands {
            c.operands().into_iter().for_each(&mut note);
            for s in c.signals() {
                s.outcome_qubits().into_iter().for_each(&mut note);
            }
        }
    }
    out
}

/// How one source network is renamed into the composite.
struct Part<'a> {
    def: &'a NetworkDef,
    tag: String,
    offset: u32,
    /// (agent, channel) of the receiving end of a channel that became
    /// internal to a merged agent, to the sending end's name
    internal: BTreeMap<(String, String), String>,
}

impl Part<'_> {
    fn qubit(&self, scope: &str, q: &QubitName) -> QubitName {
        match q {
            QubitName::Var(v) => QubitName::Var(format!("{}_{scope}_{v}", self.tag)),
            QubitName::Ref(r) => QubitName::Ref(QubitRef(r.0 + self.offset)),
        }
    }

    fn classical(&self, agent: &str, name: &str) -> String {
        format!("{}_{agent}_{name}", self.tag)
    }

    fn channel(&self, agent: &str, name: &str) -> String {
        match self.internal.get(&(agent.to_string(), name.to_string())) {
            Some(alias) => alias.clone(),
            None => self.classical(agent, name),
        }
    }

    fn channel_sort(&self, agent: &AgentInstance) -> Vec<String> {
        agent
            .pattern
            .channel_sort
            .iter()
            .filter(|c| !self.internal.contains_key(&(agent.name.clone(), c.to_string())))
            .map(|c| self.classical(&agent.name, c))
            .collect()
    }

    fn agent_commands(
        &self,
        agent: &AgentInstance,
        substitute: &BTreeMap<QubitName, QubitName>,
    ) -> Vec<Command<QubitName>> {
        agent
            .pattern
            .commands
            .iter()
            .map(|c| {
                c.map_qubits(&mut |q| substitute.get(q).cloned().unwrap_or_else(|| self.qubit(&agent.name, q)))
                    .rename_classical(&mut |ch| self.channel(&agent.name, ch), &mut |n| {
                        self.classical(&agent.name, n)
                    })
            })
            .collect()
    }
}

/// Composes `first` then `second`. Each `(a, b)` in `agent_pairs` merges
/// agent `a` of `first` into agent `b` of `second`; each `(x, y)` in
/// `qubit_pairs` hands qubit `x` (of a first-network agent) over as the
/// second network's input `y`.
pub fn compose_networks(
    first: &NetworkDef,
    second: &NetworkDef,
    agent_pairs: &[(String, String)],
    qubit_pairs: &[(AgentQubit, AgentQubit)],
) -> Result<NetworkDef, NetworkError> {
    let (t1, t2) = if first.name == second.name {
        (format!("{}1", first.name), format!("{}2", second.name))
    } else {
        (first.name.clone(), second.name.clone())
    };
    let c1 = concrete_refs(first);
    let c2 = concrete_refs(second);
    let offset = match (c1.last(), c2.is_empty()) {
        (Some(max), false) => max + 1,
        _ => 0,
    };
    let mut p1 = Part {
        def: first,
        tag: t1,
        offset: 0,
        internal: BTreeMap::new(),
    };
    let p2 = Part {
        def: second,
        tag: t2,
        offset,
        internal: BTreeMap::new(),
    };

    // first-network agent -> second-network agent it merges into
    let mut merged_into: BTreeMap<&str, &str> = BTreeMap::new();
    for (a, b) in agent_pairs {
        if first.agent(a).is_none() {
            return Err(NetworkError::PairMismatch(format!("no agent `{a}` in `{}`", first.name)));
        }
        if second.agent(b).is_none() {
            return Err(NetworkError::PairMismatch(format!("no agent `{b}` in `{}`", second.name)));
        }
        if merged_into.insert(a.as_str(), b.as_str()).is_some() {
            return Err(NetworkError::PairMismatch(format!("agent `{a}` is paired twice")));
        }
    }
    let first_tag = p1.tag.clone();
    let final_name = |a: &str| -> String {
        match merged_into.get(a) {
            Some(b) => b.to_string(),
            None if second.agent(a).is_some() => format!("{}_{a}", first_tag),
            None => a.to_string(),
        }
    };

    let merged_first = |a: &str| merged_into.get(a).map(|b| b.to_string()).unwrap_or_else(|| format!("1:{a}"));
    for (x, y) in &first.config.channel_pairs {
        if merged_first(&x.agent) == merged_first(&y.agent) {
            let end = p1.classical(&x.agent, &x.channel);
            p1.internal.insert((y.agent.clone(), y.channel.clone()), end);
        }
    }

    // second-network input qubits replaced by first-network qubits
    let resource_bound2: BTreeSet<&AgentQubit> = second.config.qubit_pairs.iter().map(|(_, aq)| aq).collect();
    let mut substitute: BTreeMap<String, BTreeMap<QubitName, QubitName>> = BTreeMap::new();
    for (x, y) in qubit_pairs {
        let ax = first
            .agent(&x.agent)
            .ok_or_else(|| NetworkError::PairMismatch(format!("no agent for {x}")))?;
        let ay = second
            .agent(&y.agent)
            .ok_or_else(|| NetworkError::PairMismatch(format!("no agent for {y}")))?;
        if !ax.pattern.qubit_sort.contains(&x.qubit) {
            return Err(NetworkError::UnknownAgentQubit(x.to_string()));
        }
        if !ay.pattern.qubit_sort.contains(&y.qubit) || resource_bound2.contains(y) {
            return Err(NetworkError::PairMismatch(format!("{y} is not an input of `{}`", second.name)));
        }
        if merged_into.get(x.agent.as_str()) != Some(&y.agent.as_str()) {
            return Err(NetworkError::PairMismatch(format!("{x} and {y} are not in one merged agent")));
        }
        let slot = substitute.entry(y.agent.clone()).or_default();
        if slot.insert(y.qubit.clone(), p1.qubit(&x.agent, &x.qubit)).is_some() {
            return Err(NetworkError::BindingConflict(y.to_string()));
        }
    }
    let no_subst = BTreeMap::new();

    let mut agents: Vec<AgentInstance> = Vec::new();
    let mut part_of: BTreeMap<(u8, String), String> = BTreeMap::new();
    for a in &first.agents {
        if !merged_into.contains_key(a.name.as_str()) {
            part_of.insert((1, a.name.clone()), final_name(&a.name));
            agents.push(AgentInstance {
                name: final_name(&a.name),
                pattern: AgentPattern {
                    name: a.pattern.name.clone(),
                    qubit_sort: a.pattern.qubit_sort.iter().map(|q| p1.qubit(&a.name, q)).collect(),
                    channel_sort: p1.channel_sort(a),
                    commands: p1.agent_commands(a, &no_subst),
                },
            });
        }
    }
    for b in &second.agents {
        let subst = substitute.get(&b.name).unwrap_or(&no_subst);
        let mut qubit_sort = Vec::new();
        let mut channel_sort = Vec::new();
        let mut commands = Vec::new();
        let mut pattern_names = Vec::new();
        for a in first.agents.iter().filter(|a| merged_into.get(a.name.as_str()) == Some(&b.name.as_str())) {
            part_of.insert((1, a.name.clone()), b.name.clone());
            qubit_sort.extend(a.pattern.qubit_sort.iter().map(|q| p1.qubit(&a.name, q)));
            channel_sort.extend(p1.channel_sort(a));
            commands.extend(p1.agent_commands(a, &no_subst));
            pattern_names.push(a.pattern.name.clone());
        }
        part_of.insert((2, b.name.clone()), b.name.clone());
        qubit_sort.extend(
            b.pattern
                .qubit_sort
                .iter()
                .filter(|q| !subst.contains_key(q))
                .map(|q| p2.qubit(&b.name, q)),
        );
        channel_sort.extend(p2.channel_sort(b));
        commands.extend(p2.agent_commands(b, subst));
        pattern_names.push(b.pattern.name.clone());
        agents.push(AgentInstance {
            name: b.name.clone(),
            pattern: AgentPattern {
                name: pattern_names.join("+"),
                qubit_sort,
                channel_sort,
                commands,
            },
        });
    }

    let mut config = NetworkConfig::default();
    let mut resource_cmds = Vec::new();
    let mut resource_space = Vec::new();
    let mut resource_out = Vec::new();
    for (idx, part) in [(1u8, &p1), (2u8, &p2)] {
        let r = &part.def.resource;
        let rq = |q: &QubitName| part.qubit("R", q);
        resource_space.extend(r.space.iter().map(rq));
        resource_out.extend(r.outputs.iter().map(rq));
        resource_cmds.extend(r.commands.iter().map(|c| c.map_qubits(&mut |q| rq(q))));
        for (q, aq) in &part.def.config.qubit_pairs {
            let agent = part_of[&(idx, aq.agent.clone())].clone();
            config
                .qubit_pairs
                .push((rq(q), AgentQubit::new(agent, part.qubit(&aq.agent, &aq.qubit))));
        }
        for (x, y) in &part.def.config.channel_pairs {
            let ax = &part_of[&(idx, x.agent.clone())];
            let ay = &part_of[&(idx, y.agent.clone())];
            // both ends inside one merged agent: an internal channel
            if ax == ay {
                continue;
            }
            config.channel_pairs.push((
                AgentChannel::new(ax.clone(), part.classical(&x.agent, &x.channel)),
                AgentChannel::new(ay.clone(), part.classical(&y.agent, &y.channel)),
            ));
        }
    }

    let outputs = second.outputs.as_ref().map(|outs| {
        outs.iter()
            .map(|aq| {
                let subst = substitute.get(&aq.agent).unwrap_or(&no_subst);
                let q = subst.get(&aq.qubit).cloned().unwrap_or_else(|| p2.qubit(&aq.agent, &aq.qubit));
                AgentQubit::new(aq.agent.clone(), q)
            })
            .collect()
    });

    Ok(NetworkDef {
        name: format!("{}-{}", first.name, second.name),
        resource: Pattern::new(resource_space, vec![], resource_out, resource_cmds),
        agents,
        config,
        outputs,
    })
}
