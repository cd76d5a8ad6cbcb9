//! Definition files: patterns, compositions, agents and networks.
//!
//! ```text
//! (defpattern H () (?i ?o) (?i) (?o) ((E ?i ?o) (M ?i 0) (X ?o (s ?i))))
//! (defpattern CX (compose (use IH as a) (use CZ as b) (use IH as c)
//!                         (link (a.c0 b.?a) (a.c1 b.?b) (b.?a c.c0) (b.?b c.c1))))
//! (defpattern IH (par I H))
//! (defagent A (1 2) (c) ((E 1 2) (M 1 0) (send c (s 1))))
//! (defnetwork TP (resource (() () () ())) (agent A A) (agent B B)
//!   (config (qubits) (channels (A.c B.c))) (outputs B.3))
//! (defnetwork SCES (compose ES SC (agents (A0 L) (L L)) (qubits (A0.?q L.?q0))))
//! ```
//!
//! Names must be defined before use; `builtin:NAME[:ARG]` refers to the
//! standard library.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::command::{parse_command_sequence, parse_qubit, QubitName, SyntaxError};
use crate::compose::{compile_composition, ComposeError, CompositionExpr};
use crate::library::{self, Built, LibraryError};
use crate::network::{
    compose_networks, AgentChannel, AgentInstance, AgentPattern, AgentQubit, NetworkConfig, NetworkDef, NetworkError,
};
use crate::pattern::{parse_pattern_def, Pattern};
use crate::sexpr::{parse_sexprs, ReadError, SExpr};

#[derive(Debug, Clone, PartialEq)]
pub enum Definition {
    Pattern {
        name: String,
        pattern: Pattern,
        /// The graph it was compiled from, if it is a composition.
        composition: Option<CompositionExpr>,
    },
    Agent(AgentPattern),
    Network(NetworkDef),
}

impl Definition {
    pub fn name(&self) -> &str {
        match self {
            Definition::Pattern { name, .. } => name,
            Definition::Agent(a) => &a.name,
            Definition::Network(n) => &n.name,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Definition::Pattern { .. } => "pattern",
            Definition::Agent(_) => "agent",
            Definition::Network(_) => "network",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub definitions: Vec<Definition>,
}

impl Program {
    pub fn get(&self, name: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.name() == name)
    }

    fn pattern(&self, name: &str) -> Option<&Pattern> {
        match self.get(name)? {
            Definition::Pattern { pattern, .. } => Some(pattern),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProgramError {
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("form {form}: {error}")]
    Syntax { form: usize, error: SyntaxError },
    #[error("form {form}: {message}")]
    Malformed { form: usize, message: String },
    #[error("form {form}: `{name}` is not a defined {kind}")]
    Undefined { form: usize, name: String, kind: &'static str },
    #[error("form {form}: `{name}` is already defined")]
    Duplicate { form: usize, name: String },
    #[error("form {form} (`{name}`): {error}")]
    Compose { form: usize, name: String, error: ComposeError },
    #[error("form {form} (`{name}`): {error}")]
    Network { form: usize, name: String, error: NetworkError },
    #[error("form {form}: {error}")]
    Library { form: usize, error: LibraryError },
}

struct Loader {
    program: Program,
    form: usize,
    name: String,
}

impl Loader {
    fn malformed(&self, message: impl Into<String>) -> ProgramError {
        ProgramError::Malformed {
            form: self.form,
            message: message.into(),
        }
    }

    fn syntax(&self, error: SyntaxError) -> ProgramError {
        ProgramError::Syntax { form: self.form, error }
    }

    fn compose_err(&self, error: ComposeError) -> ProgramError {
        ProgramError::Compose {
            form: self.form,
            name: self.name.clone(),
            error,
        }
    }

    fn atom<'e>(&self, e: &'e SExpr, what: &str) -> Result<&'e str, ProgramError> {
        e.as_atom().ok_or_else(|| self.malformed(format!("expected {what}, found {e}")))
    }

    fn list<'e>(&self, e: &'e SExpr, what: &str) -> Result<&'e [SExpr], ProgramError> {
        e.as_list().ok_or_else(|| self.malformed(format!("expected {what}, found {e}")))
    }

    fn builtin(&self, spec: &str) -> Result<Option<Built>, ProgramError> {
        match library::parse_builtin(spec) {
            None => Ok(None),
            Some((name, arg)) => library::build(name, arg)
                .map(|(_, _, b)| Some(b))
                .map_err(|error| ProgramError::Library { form: self.form, error }),
        }
    }

    /// A pattern name, `builtin:…`, a composition form, or a literal
    /// `(V I O commands)`.
    fn pattern(&self, e: &SExpr) -> Result<(Pattern, Option<CompositionExpr>), ProgramError> {
        if let Some(name) = e.as_atom() {
            if let Some(b) = self.builtin(name)? {
                return match b {
                    Built::Pattern(p) => Ok((p, None)),
                    Built::Network(_) => Err(self.malformed(format!("`{name}` is a network, not a pattern"))),
                };
            }
            return self.program.pattern(name).cloned().map(|p| (p, None)).ok_or(ProgramError::Undefined {
                form: self.form,
                name: name.to_string(),
                kind: "pattern",
            });
        }
        let expr = if e.is_form("compose") {
            self.compose(e)?
        } else if e.is_form("seq") || e.is_form("par") {
            self.chain(e)?
        } else {
            return parse_pattern_def(e).map(|p| (p, None)).map_err(|err| self.syntax(err));
        };
        let compiled = compile_composition(&expr).map_err(|err| self.compose_err(err))?;
        Ok((compiled.pattern, Some(expr)))
    }

    fn compose(&self, e: &SExpr) -> Result<CompositionExpr, ProgramError> {
        let mut expr = CompositionExpr::new();
        let mut nodes: BTreeMap<String, usize> = BTreeMap::new();
        for item in &self.list(e, "a compose form")?[1..] {
            let parts = self.list(item, "(use P as NODE) or (link ...)")?;
            if item.is_form("use") {
                match parts {
                    [_, p, kw, node] if kw.as_atom() == Some("as") => {
                        let node = self.atom(node, "a node name")?;
                        let (pattern, _) = self.pattern(p)?;
                        if nodes.insert(node.to_string(), expr.add(node, pattern)).is_some() {
                            return Err(self.malformed(format!("node `{node}` is used twice")));
                        }
                    }
                    _ => return Err(self.malformed(format!("expected (use PATTERN as NODE), found {item}"))),
                }
            } else if item.is_form("link") {
                for pair in &parts[1..] {
                    match self.list(pair, "a qubit pair")? {
                        [a, b] => {
                            let from = self.node_qubit(a, &nodes)?;
                            let to = self.node_qubit(b, &nodes)?;
                            expr.link(from, to);
                        }
                        _ => return Err(self.malformed(format!("expected (n1.q n2.q), found {pair}"))),
                    }
                }
            } else {
                return Err(self.malformed(format!("unexpected {item} in compose")));
            }
        }
        Ok(expr)
    }

    fn node_qubit(&self, e: &SExpr, nodes: &BTreeMap<String, usize>) -> Result<(usize, QubitName), ProgramError> {
        let (node, q) = self.dotted(e)?;
        let idx = *nodes
            .get(node)
            .ok_or_else(|| self.malformed(format!("unknown node `{node}` in {e}")))?;
        Ok((idx, q))
    }

    fn dotted<'e>(&self, e: &'e SExpr) -> Result<(&'e str, QubitName), ProgramError> {
        let tok = self.atom(e, "a qualified name OWNER.q")?;
        let (owner, q) = tok
            .split_once('.')
            .ok_or_else(|| self.malformed(format!("expected OWNER.q, found {tok}")))?;
        let q = parse_qubit(&SExpr::atom(q)).map_err(|err| self.syntax(err))?;
        Ok((owner, q))
    }

    /// `(seq P ...)` links each pattern's outputs to the next one's inputs
    /// by position; `(par P ...)` links nothing.
    fn chain(&self, e: &SExpr) -> Result<CompositionExpr, ProgramError> {
        let items = &self.list(e, "a seq or par form")?[1..];
        let sequential = e.is_form("seq");
        let mut expr = CompositionExpr::new();
        for (k, item) in items.iter().enumerate() {
            let (p, _) = self.pattern(item)?;
            let name = item.as_atom().map(|a| format!("n{k}_{a}")).unwrap_or_else(|| format!("n{k}"));
            expr.add(name, p);
        }
        if sequential {
            for k in 1..expr.nodes.len() {
                let (outs, ins) = (&expr.nodes[k - 1].pattern.outputs, &expr.nodes[k].pattern.inputs);
                if outs.len() != ins.len() {
                    return Err(self.compose_err(ComposeError::ArityMismatch {
                        outputs: outs.len(),
                        inputs: ins.len(),
                    }));
                }
                let pairs: Vec<_> = outs.iter().cloned().zip(ins.iter().cloned()).collect();
                for (o, i) in pairs {
                    expr.link((k - 1, o), (k, i));
                }
            }
        }
        Ok(expr)
    }

    fn agent_body(&self, name: &str, e: &SExpr) -> Result<AgentPattern, ProgramError> {
        if let Some(n) = e.as_atom() {
            return match self.program.get(n) {
                Some(Definition::Agent(a)) => Ok(AgentPattern {
                    name: a.name.clone(),
                    ..a.clone()
                }),
                _ => Err(ProgramError::Undefined {
                    form: self.form,
                    name: n.to_string(),
                    kind: "agent",
                }),
            };
        }
        match self.list(e, "an agent pattern")? {
            [qs, cs, cmds] => self.agent_parts(name, qs, cs, cmds),
            _ => Err(self.malformed(format!("expected ((qubits) (channels) (commands)), found {e}"))),
        }
    }

    fn agent_parts(&self, name: &str, qs: &SExpr, cs: &SExpr, cmds: &SExpr) -> Result<AgentPattern, ProgramError> {
        let qubits = self
            .list(qs, "a qubit sort")?
            .iter()
            .map(parse_qubit)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|err| self.syntax(err))?;
        let channels = self
            .list(cs, "a channel sort")?
            .iter()
            .map(|c| self.atom(c, "a channel name").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let commands = parse_command_sequence(cmds, true).map_err(|err| self.syntax(err))?;
        Ok(AgentPattern::new(name, qubits, channels, commands))
    }

    fn network_ref(&self, e: &SExpr) -> Result<NetworkDef, ProgramError> {
        let name = self.atom(e, "a network name")?;
        if let Some(b) = self.builtin(name)? {
            return match b {
                Built::Network(n) => Ok(n),
                Built::Pattern(_) => Err(self.malformed(format!("`{name}` is a pattern, not a network"))),
            };
        }
        match self.program.get(name) {
            Some(Definition::Network(n)) => Ok(n.clone()),
            _ => Err(ProgramError::Undefined {
                form: self.form,
                name: name.to_string(),
                kind: "network",
            }),
        }
    }

    fn network(&self, name: &str, items: &[SExpr]) -> Result<NetworkDef, ProgramError> {
        if let [single] = items {
            if single.is_form("compose") {
                return self.network_composition(single);
            }
        }
        let mut def = NetworkDef {
            name: name.to_string(),
            resource: Pattern::empty(),
            agents: vec![],
            config: NetworkConfig::default(),
            outputs: None,
        };
        for item in items {
            let parts = self.list(item, "a network clause")?;
            if item.is_form("resource") {
                match parts {
                    [_, p] => def.resource = self.pattern(p)?.0,
                    _ => return Err(self.malformed("expected (resource PATTERN)")),
                }
            } else if item.is_form("agent") {
                match parts {
                    [_, n, body] => {
                        let n = self.atom(n, "an agent name")?;
                        def.agents.push(AgentInstance {
                            name: n.to_string(),
                            pattern: self.agent_body(n, body)?,
                        });
                    }
                    _ => return Err(self.malformed("expected (agent NAME PATTERN)")),
                }
            } else if item.is_form("config") {
                for clause in &parts[1..] {
                    let pairs = &self.list(clause, "(qubits ...) or (channels ...)")?[1..];
                    for pair in pairs {
                        let [a, b] = self.list(pair, "a pair")? else {
                            return Err(self.malformed(format!("expected a pair, found {pair}")));
                        };
                        if clause.is_form("qubits") {
                            let r = match self.atom(a, "a resource qubit")?.split_once('.') {
                                Some((_, q)) => q,
                                None => self.atom(a, "a resource qubit")?,
                            };
                            let r = parse_qubit(&SExpr::atom(r)).map_err(|err| self.syntax(err))?;
                            let (agent, q) = self.dotted(b)?;
                            def.config.qubit_pairs.push((r, AgentQubit::new(agent, q)));
                        } else if clause.is_form("channels") {
                            let ch = |e: &SExpr| -> Result<AgentChannel, ProgramError> {
                                let tok = self.atom(e, "AGENT.channel")?;
                                let (a, c) = tok
                                    .split_once('.')
                                    .ok_or_else(|| self.malformed(format!("expected AGENT.channel, found {tok}")))?;
                                Ok(AgentChannel::new(a, c))
                            };
                            def.config.channel_pairs.push((ch(a)?, ch(b)?));
                        } else {
                            return Err(self.malformed(format!("unexpected {clause} in config")));
                        }
                    }
                }
            } else if item.is_form("outputs") {
                let outs = parts[1..]
                    .iter()
                    .map(|e| self.dotted(e).map(|(a, q)| AgentQubit::new(a, q)))
                    .collect::<Result<_, _>>()?;
                def.outputs = Some(outs);
            } else {
                return Err(self.malformed(format!("unexpected {item} in defnetwork")));
            }
        }
        Ok(def)
    }

    /// `(compose N1 N2 (agents (a b) ...) (qubits (a.q b.q) ...))`.
    fn network_composition(&self, e: &SExpr) -> Result<NetworkDef, ProgramError> {
        let parts = self.list(e, "a network composition")?;
        let [_, n1, n2, rest @ ..] = parts else {
            return Err(self.malformed("expected (compose N1 N2 (agents ...) (qubits ...))"));
        };
        let first = self.network_ref(n1)?;
        let second = self.network_ref(n2)?;
        let mut agent_pairs = Vec::new();
        let mut qubit_pairs = Vec::new();
        for clause in rest {
            for pair in &self.list(clause, "(agents ...) or (qubits ...)")?[1..] {
                let [a, b] = self.list(pair, "a pair")? else {
                    return Err(self.malformed(format!("expected a pair, found {pair}")));
                };
                if clause.is_form("agents") {
                    agent_pairs.push((self.atom(a, "an agent")?.to_string(), self.atom(b, "an agent")?.to_string()));
                } else if clause.is_form("qubits") {
                    let (x, qx) = self.dotted(a)?;
                    let (y, qy) = self.dotted(b)?;
                    qubit_pairs.push((AgentQubit::new(x, qx), AgentQubit::new(y, qy)));
                } else {
                    return Err(self.malformed(format!("unexpected {clause} in compose")));
                }
            }
        }
        let mut net = compose_networks(&first, &second, &agent_pairs, &qubit_pairs).map_err(|error| {
            ProgramError::Network {
                form: self.form,
                name: self.name.clone(),
                error,
            }
        })?;
        net.name = self.name.clone();
        Ok(net)
    }

    fn definition(&mut self, e: &SExpr) -> Result<Definition, ProgramError> {
        let items = self.list(e, "a definition")?;
        let head = items.first().and_then(SExpr::as_atom).unwrap_or("");
        let name = match items.get(1) {
            Some(n) => self.atom(n, "a definition name")?.to_string(),
            None => return Err(self.malformed(format!("definition without a name: {e}"))),
        };
        self.name = name.clone();
        if self.program.get(&name).is_some() {
            return Err(ProgramError::Duplicate { form: self.form, name });
        }
        match head {
            "defpattern" => match &items[2..] {
                [body] => {
                    let (pattern, composition) = self.pattern(body)?;
                    Ok(Definition::Pattern {
                        name,
                        pattern,
                        composition,
                    })
                }
                [params, v, i, o, cmds] => {
                    let declared = self
                        .list(params, "a parameter list")?
                        .iter()
                        .map(|p| self.atom(p, "a parameter name").map(str::to_string))
                        .collect::<Result<Vec<_>, _>>()?;
                    let pattern = parse_pattern_def(&SExpr::list([v.clone(), i.clone(), o.clone(), cmds.clone()]))
                        .map_err(|err| self.syntax(err))?;
                    if let Some(p) = pattern.params.iter().find(|p| !declared.contains(p)) {
                        return Err(self.malformed(format!("angle parameter `{p}` is not declared")));
                    }
                    Ok(Definition::Pattern {
                        name,
                        pattern,
                        composition: None,
                    })
                }
                _ => Err(self.malformed("expected (defpattern NAME (params) V I O commands) or (defpattern NAME EXPR)")),
            },
            "defagent" => match &items[2..] {
                [qs, cs, cmds] => Ok(Definition::Agent(self.agent_parts(&name, qs, cs, cmds)?)),
                _ => Err(self.malformed("expected (defagent NAME (qubits) (channels) (commands))")),
            },
            "defnetwork" => Ok(Definition::Network(self.network(&name, &items[2..])?)),
            other => Err(self.malformed(format!("unknown definition form `{other}`"))),
        }
    }
}

pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let mut loader = Loader {
        program: Program::default(),
        form: 0,
        name: String::new(),
    };
    for (k, e) in parse_sexprs(text)?.iter().enumerate() {
        loader.form = k + 1;
        let d = loader.definition(e)?;
        loader.program.definitions.push(d);
    }
    Ok(loader.program)
}
