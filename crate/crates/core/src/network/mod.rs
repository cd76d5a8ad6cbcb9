//! Agents, networks and the distributed interpreter.

mod compile;
mod compose;
mod run;

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::command::{Command, QubitName, QubitRef, Signal};
use crate::interp::RuntimeError;
use crate::pattern::{AssembleError, Pattern, Violation};
use crate::sexpr::SExpr;
use crate::state::StateError;

pub use compile::{compile_network, CompiledAgent, CompiledNetwork};
pub use compose::compose_networks;
pub use run::{
    init_network, run_network, step_agent, ChannelValue, Discipline, NetworkBranch, NetworkRun, NetworkState,
    RunOptions, Stop, TurnResult,
};

/// An agent's qubit sort, channel sort and command sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentPattern {
    pub name: String,
    pub qubit_sort: Vec<QubitName>,
    pub channel_sort: Vec<String>,
    pub commands: Vec<Command<QubitName>>,
}

impl AgentPattern {
    /// Signals written `(s ?v)` that read a value received into `?v` are
    /// turned into plain input reads.
    pub fn new(
        name: impl Into<String>,
        qubit_sort: Vec<QubitName>,
        channel_sort: Vec<String>,
        commands: Vec<Command<QubitName>>,
    ) -> Self {
        let received: BTreeSet<String> = commands
            .iter()
            .filter_map(|c| match c {
                Command::Recv { binding, .. } => binding.strip_prefix('?').map(str::to_string),
                _ => None,
            })
            .collect();
        let commands = if received.is_empty() {
            commands
        } else {
            commands.iter().map(|c| rewrite_received(c, &received)).collect()
        };
        AgentPattern {
            name: name.into(),
            qubit_sort,
            channel_sort,
            commands,
        }
    }

    /// Classical input names read by the commands but not bound by a
    /// `recv`.
    pub fn classical_inputs(&self) -> Vec<String> {
        let bound: BTreeSet<&str> = self
            .commands
            .iter()
            .filter_map(|c| match c {
                Command::Recv { binding, .. } => Some(binding.as_str()),
                _ => None,
            })
            .collect();
        let mut out: Vec<String> = Vec::new();
        for c in &self.commands {
            for s in c.signals() {
                for n in s.input_names() {
                    if !bound.contains(n) && !out.iter().any(|o| o == n) {
                        out.push(n.to_string());
                    }
                }
            }
        }
        out
    }

    /// `((qubits) (channels) (commands))`.
    pub fn to_sexpr(&self) -> SExpr {
        SExpr::list([
            SExpr::list(self.qubit_sort.iter().map(|q| SExpr::atom(q.to_string()))),
            SExpr::list(self.channel_sort.iter().map(|c| SExpr::atom(c.clone()))),
            crate::command::sequence_to_sexpr(&self.commands),
        ])
    }
}

fn rewrite_received(c: &Command<QubitName>, received: &BTreeSet<String>) -> Command<QubitName> {
    fn fix(s: &Signal<QubitName>, received: &BTreeSet<String>) -> Signal<QubitName> {
        match s {
            Signal::Outcome(QubitName::Var(v)) if received.contains(v) => Signal::Input(format!("?{v}")),
            Signal::Sum(ts) => Signal::Sum(ts.iter().map(|t| fix(t, received)).collect()),
            other => other.clone(),
        }
    }
    let opt = |s: &Option<Signal<QubitName>>| s.as_ref().map(|s| fix(s, received));
    match c {
        Command::Measure { qubit, angle, s, t } => Command::Measure {
            qubit: qubit.clone(),
            angle: angle.clone(),
            s: opt(s),
            t: opt(t),
        },
        Command::CorrectX { qubit, signal } => Command::CorrectX {
            qubit: qubit.clone(),
            signal: opt(signal),
        },
        Command::CorrectZ { qubit, signal } => Command::CorrectZ {
            qubit: qubit.clone(),
            signal: opt(signal),
        },
        Command::Send { channel, signal } => Command::Send {
            channel: channel.clone(),
            signal: fix(signal, received),
        },
        other => other.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentInstance {
    pub name: String,
    pub pattern: AgentPattern,
}

/// A qubit name inside a named agent instance, written `A.?q` or `A.3`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentQubit {
    pub agent: String,
    pub qubit: QubitName,
}

impl AgentQubit {
    pub fn new(agent: impl Into<String>, qubit: QubitName) -> Self {
        AgentQubit {
            agent: agent.into(),
            qubit,
        }
    }
}

impl fmt::Display for AgentQubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.agent, self.qubit)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentChannel {
    pub agent: String,
    pub channel: String,
}

impl AgentChannel {
    pub fn new(agent: impl Into<String>, channel: impl Into<String>) -> Self {
        AgentChannel {
            agent: agent.into(),
            channel: channel.into(),
        }
    }
}

impl fmt::Display for AgentChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.agent, self.channel)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkConfig {
    /// Resource output → agent qubit.
    pub qubit_pairs: Vec<(QubitName, AgentQubit)>,
    pub channel_pairs: Vec<(AgentChannel, AgentChannel)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDef {
    pub name: String,
    pub resource: Pattern,
    pub agents: Vec<AgentInstance>,
    pub config: NetworkConfig,
    /// Qubits reported as the network's result, if declared.
    pub outputs: Option<Vec<AgentQubit>>,
}

impl NetworkDef {
    pub fn agent(&self, name: &str) -> Option<&AgentInstance> {
        self.agents.iter().find(|a| a.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("agent `{0}` is declared twice")]
    DuplicateAgent(String),
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("{0} is not in its agent's qubit sort")]
    UnknownAgentQubit(String),
    #[error("{0} is not an output of the resource pattern")]
    UnknownResourceQubit(String),
    #[error("the resource pattern must have no inputs")]
    ResourceHasInputs,
    #[error("invalid resource pattern: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidResource(Vec<Violation>),
    #[error("resource qubit {0} is not claimed by any agent")]
    UnclaimedResourceQubit(String),
    #[error("conflicting bindings for {0}")]
    BindingConflict(String),
    #[error("channel {0} is not in its agent's channel sort")]
    ChannelNotInSort(String),
    #[error("channel {0} has no partner")]
    DanglingChannel(String),
    #[error("channel pair links agent `{0}` with itself")]
    SameAgentChannelPair(String),
    #[error("agent pair or qubit pair does not match: {0}")]
    PairMismatch(String),
    #[error("agent `{agent}` runs {command} on qubit {qubit}, which it does not own")]
    OwnershipViolation {
        agent: String,
        qubit: QubitRef,
        command: String,
    },
    #[error("agent `{agent}` reads the outcome of qubit {qubit}, measured elsewhere")]
    NonLocalOutcome { agent: String, qubit: QubitRef },
    #[error("resource pattern branches disagree; a deterministic resource is required")]
    NondeterministicResource,
    #[error("network input {0} has no initial state")]
    MissingInput(String),
    #[error("qubit {0} is not a network input")]
    UnexpectedInput(QubitRef),
    #[error("deadlock after {turns} turns: {}", .blocked.iter().map(|(a, c)| format!("{a} blocked at {c}")).collect::<Vec<_>>().join(", "))]
    Deadlock {
        blocked: Vec<(String, String)>,
        /// Agent turns taken before the deadlock was detected.
        turns: usize,
    },
    #[error("schedule {0:?} is not a permutation of the agents")]
    BadSchedule(Vec<usize>),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

impl From<StateError> for NetworkError {
    fn from(e: StateError) -> Self {
        NetworkError::Runtime(RuntimeError::State(e))
    }
}
