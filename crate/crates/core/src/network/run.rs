//! The distributed interpreter: round-robin turns over agents, channels of
//! capacity one, ownership checks and deadlock detection.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::command::{Command, QubitRef, Signal};
use crate::interp::{eval_angle, eval_signal, explore, run_pattern, Environment, Machine, Mode, Pending, RuntimeError};
use crate::sexpr::SExpr;
use crate::state::{plus_state, state_equal_up_to_phase, Amplitude, Pauli, QuantumState, StateError, DEFAULT_TOL};

use super::{CompiledNetwork, NetworkError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelValue {
    Bit(bool),
    Qubit(QubitRef),
}

/// How a `send` completes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Discipline {
    /// The value sits in the channel (capacity one) and the sender moves on.
    #[default]
    Buffered,
    /// The sender waits until the value has been taken.
    Rendezvous,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Agent indices in scheduling order; declaration order if `None`.
    pub order: Option<Vec<usize>>,
    pub discipline: Discipline,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Blocked,
    Finished,
    /// The agent's next command is this measurement (qubit, actual angle).
    Measure(QubitRef, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurnResult {
    pub stop: Stop,
    pub progressed: bool,
}

#[derive(Debug, Clone)]
struct Program {
    commands: Arc<[Command<QubitRef>]>,
    pc: usize,
    /// qrecv binding to the qubit actually received
    aliases: BTreeMap<QubitRef, QubitRef>,
    awaiting: Option<String>,
    /// channels this agent both sends and receives on (after merging two
    /// agents); sends on them never wait for receipt
    local: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    pub agent_names: Vec<String>,
    pub channels: BTreeMap<String, Option<ChannelValue>>,
    pub env: Environment,
    pub ownership: BTreeMap<QubitRef, usize>,
    pub measured_by: BTreeMap<QubitRef, usize>,
    pub discipline: Discipline,
    programs: Vec<Program>,
}

impl NetworkState {
    pub fn finished(&self, agent: usize) -> bool {
        let p = &self.programs[agent];
        p.pc >= p.commands.len() && p.awaiting.is_none()
    }

    pub fn all_finished(&self) -> bool {
        (0..self.programs.len()).all(|a| self.finished(a))
    }

    /// The command the agent is stopped at, if any.
    pub fn current_command(&self, agent: usize) -> Option<&Command<QubitRef>> {
        let p = &self.programs[agent];
        p.commands.get(p.pc)
    }

    fn resolve(&self, agent: usize, q: QubitRef) -> QubitRef {
        self.programs[agent].aliases.get(&q).copied().unwrap_or(q)
    }

    fn owned(&self, agent: usize, q: QubitRef, c: &Command<QubitRef>) -> Result<(), NetworkError> {
        if self.ownership.get(&q) == Some(&agent) {
            Ok(())
        } else {
            Err(NetworkError::OwnershipViolation {
                agent: self.agent_names[agent].clone(),
                qubit: q,
                command: c.to_string(),
            })
        }
    }

    fn local_signal(&self, agent: usize, s: &Signal<QubitRef>) -> Result<Signal<QubitRef>, NetworkError> {
        s.try_map(&mut |q| {
            let q = self.resolve(agent, *q);
            match self.measured_by.get(&q) {
                Some(&a) if a == agent => Ok(q),
                Some(_) => Err(NetworkError::NonLocalOutcome {
                    agent: self.agent_names[agent].clone(),
                    qubit: q,
                }),
                None if self.env.quantum.measured().contains(&q) => Err(NetworkError::NonLocalOutcome {
                    agent: self.agent_names[agent].clone(),
                    qubit: q,
                }),
                None => Err(RuntimeError::UnboundOutcome(q).into()),
            }
        })
    }

    fn fires(&self, agent: usize, s: &Option<Signal<QubitRef>>) -> Result<bool, NetworkError> {
        match s {
            None => Ok(true),
            Some(s) => Ok(eval_signal(&self.env.classical, &self.local_signal(agent, s)?)?),
        }
    }

    /// Performs a measurement returned by [`step_agent`] and moves the agent
    /// past it; returns the branch probability.
    pub fn commit_measurement(&mut self, agent: usize, q: QubitRef, angle: f64, outcome: bool) -> Result<f64, NetworkError> {
        let p = self.env.quantum.project_measure(q, angle, outcome)?;
        self.env.classical.outcomes.insert(q, outcome);
        self.measured_by.insert(q, agent);
        self.ownership.remove(&q);
        self.programs[agent].pc += 1;
        Ok(p)
    }
}

/// Runs one agent until it blocks, finishes or reaches a measurement.
pub fn step_agent(state: &mut NetworkState, agent: usize) -> Result<TurnResult, NetworkError> {
    let mut progressed = false;
    if let Some(ch) = state.programs[agent].awaiting.clone() {
        if state.channels[&ch].is_some() {
            return Ok(TurnResult {
                stop: Stop::Blocked,
                progressed,
            });
        }
        state.programs[agent].awaiting = None;
        progressed = true;
    }
    loop {
        let program = &state.programs[agent];
        let Some(raw) = program.commands.get(program.pc).cloned() else {
            return Ok(TurnResult {
                stop: Stop::Finished,
                progressed,
            });
        };
        let c = raw.map_qubits(&mut |q| state.resolve(agent, *q));
        match &c {
            Command::Measure { qubit, angle, s, t } => {
                state.owned(agent, *qubit, &c)?;
                let s = s.as_ref().map(|s| state.local_signal(agent, s)).transpose()?;
                let t = t.as_ref().map(|t| state.local_signal(agent, t)).transpose()?;
                let actual = eval_angle(&state.env.classical, angle, s.as_ref(), t.as_ref())?;
                return Ok(TurnResult {
                    stop: Stop::Measure(*qubit, actual),
                    progressed,
                });
            }
            Command::Entangle(a, b) => {
                state.owned(agent, *a, &c)?;
                state.owned(agent, *b, &c)?;
                state.env.quantum.apply_cz(*a, *b)?;
            }
            Command::CorrectX { qubit, signal } | Command::CorrectZ { qubit, signal } => {
                state.owned(agent, *qubit, &c)?;
                if state.fires(agent, signal)? {
                    let which = if matches!(c, Command::CorrectX { .. }) { Pauli::X } else { Pauli::Z };
                    state.env.quantum.apply_pauli(*qubit, which)?;
                }
            }
            Command::Send { channel, signal } => {
                if state.channels[channel].is_some() {
                    return Ok(TurnResult {
                        stop: Stop::Blocked,
                        progressed,
                    });
                }
                let bit = eval_signal(&state.env.classical, &state.local_signal(agent, signal)?)?;
                state.channels.insert(channel.clone(), Some(ChannelValue::Bit(bit)));
                if state.discipline == Discipline::Rendezvous && !state.programs[agent].local.contains(channel) {
                    state.programs[agent].awaiting = Some(channel.clone());
                }
            }
            Command::QSend { channel, qubit } => {
                if state.channels[channel].is_some() {
                    return Ok(TurnResult {
                        stop: Stop::Blocked,
                        progressed,
                    });
                }
                state.owned(agent, *qubit, &c)?;
                state.ownership.remove(qubit);
                state.channels.insert(channel.clone(), Some(ChannelValue::Qubit(*qubit)));
                if state.discipline == Discipline::Rendezvous && !state.programs[agent].local.contains(channel) {
                    state.programs[agent].awaiting = Some(channel.clone());
                }
            }
            Command::Recv { channel, binding } => match state.channels[channel] {
                Some(ChannelValue::Bit(b)) => {
                    state.channels.insert(channel.clone(), None);
                    state.env.classical.inputs.insert(binding.clone(), b);
                }
                // a qubit on a classical receive stays put; the agent waits
                _ => {
                    return Ok(TurnResult {
                        stop: Stop::Blocked,
                        progressed,
                    })
                }
            },
            Command::QRecv { channel, .. } => match state.channels[channel] {
                Some(ChannelValue::Qubit(q)) => {
                    state.channels.insert(channel.clone(), None);
                    state.ownership.insert(q, agent);
                    if let Command::QRecv { binding, .. } = raw {
                        state.programs[agent].aliases.insert(binding, q);
                    }
                }
                _ => {
                    return Ok(TurnResult {
                        stop: Stop::Blocked,
                        progressed,
                    })
                }
            },
        }
        state.programs[agent].pc += 1;
        progressed = true;
        if state.programs[agent].awaiting.is_some() {
            return Ok(TurnResult {
                stop: Stop::Blocked,
                progressed,
            });
        }
    }
}

fn local_channels(commands: &[Command<QubitRef>]) -> BTreeSet<String> {
    let mut sent = BTreeSet::new();
    let mut received = BTreeSet::new();
    for c in commands {
        match c {
            Command::Send { channel, .. } | Command::QSend { channel, .. } => {
                sent.insert(channel.clone());
            }
            Command::Recv { channel, .. } | Command::QRecv { channel, .. } => {
                received.insert(channel.clone());
            }
            _ => {}
        }
    }
    sent.intersection(&received).cloned().collect()
}

/// Runs the resource, checks it is deterministic and adds the input state
/// and the agents' working qubits.
pub fn init_network(
    net: &CompiledNetwork,
    inputs: QuantumState,
    input_bits: &BTreeMap<String, bool>,
) -> Result<NetworkState, NetworkError> {
    let resource = run_pattern(&net.resource, &[Amplitude::new(1.0, 0.0)], &BTreeMap::new(), Mode::Enumerate)?;
    let first = resource.branches.first().ok_or(NetworkError::NondeterministicResource)?;
    let reference = first.state(&net.resource.outputs)?;
    for b in &resource.branches[1..] {
        if !state_equal_up_to_phase(&b.state(&net.resource.outputs)?, &reference, DEFAULT_TOL)? {
            return Err(NetworkError::NondeterministicResource);
        }
    }
    let mut quantum = first.env.quantum.clone();

    let given = inputs.qubits();
    if let Some(q) = given.iter().find(|q| !net.inputs.contains(q)) {
        return Err(NetworkError::UnexpectedInput(*q));
    }
    if let Some(q) = net.inputs.iter().find(|q| !given.contains(q)) {
        return Err(NetworkError::MissingInput(net.label(*q).unwrap_or_else(|| q.to_string())));
    }
    quantum.absorb(inputs)?;
    for q in &net.working {
        quantum.init_qubit(*q, plus_state())?;
    }
    let mut env = Environment::new(quantum);
    env.classical.inputs = input_bits.clone();
    Ok(NetworkState {
        agent_names: net.agents.iter().map(|a| a.name.clone()).collect(),
        channels: net.channels.iter().map(|c| (c.clone(), None)).collect(),
        env,
        ownership: net.ownership.clone(),
        measured_by: BTreeMap::new(),
        discipline: Discipline::Buffered,
        programs: net
            .agents
            .iter()
            .map(|a| Program {
                commands: a.commands.clone().into(),
                pc: 0,
                aliases: BTreeMap::new(),
                awaiting: None,
                local: local_channels(&a.commands),
            })
            .collect(),
    })
}

#[derive(Clone)]
struct Scheduler {
    state: NetworkState,
    order: Arc<[usize]>,
    cursor: usize,
    in_turn: Option<usize>,
    progressed: bool,
    stalled: usize,
    turns: usize,
}

impl Scheduler {
    fn end_turn(&mut self) {
        self.in_turn = None;
        self.progressed = false;
        self.cursor = (self.cursor + 1) % self.order.len();
    }
}

impl Machine for Scheduler {
    type Error = NetworkError;

    fn advance(&mut self) -> Result<Option<Pending>, NetworkError> {
        loop {
            if self.state.all_finished() {
                return Ok(None);
            }
            let agent = self.order[self.cursor];
            if self.in_turn.is_none() && self.state.finished(agent) {
                self.cursor = (self.cursor + 1) % self.order.len();
                continue;
            }
            if self.in_turn.is_none() {
                self.turns += 1;
            }
            self.in_turn = Some(agent);
            let turn = step_agent(&mut self.state, agent)?;
            self.progressed |= turn.progressed;
            match turn.stop {
                Stop::Measure(q, angle) => return Ok(Some((q, angle))),
                Stop::Finished => {
                    self.stalled = 0;
                    self.end_turn();
                }
                Stop::Blocked => {
                    self.stalled = if self.progressed { 0 } else { self.stalled + 1 };
                    self.end_turn();
                    let active = (0..self.state.programs.len()).filter(|&a| !self.state.finished(a)).count();
                    if self.stalled >= active {
                        return Err(NetworkError::Deadlock {
                            blocked: (0..self.state.programs.len())
                                .filter(|&a| !self.state.finished(a))
                                .map(|a| {
                                    let at = match &self.state.programs[a].awaiting {
                                        Some(ch) => format!("(send {ch} ...) awaiting receipt"),
                                        None => self
                                            .state
                                            .current_command(a)
                                            .map(|c| c.to_string())
                                            .unwrap_or_default(),
                                    };
                                    (self.state.agent_names[a].clone(), at)
                                })
                                .collect(),
                            turns: self.turns,
                        });
                    }
                }
            }
        }
    }

    fn commit(&mut self, (q, angle): Pending, outcome: bool) -> Result<f64, NetworkError> {
        let agent = self.in_turn.expect("measurement outside a turn");
        self.progressed = true;
        self.state.commit_measurement(agent, q, angle, outcome)
    }

    fn env(&self) -> &Environment {
        &self.state.env
    }
}

#[derive(Debug, Clone)]
pub struct NetworkBranch {
    pub outcomes: BTreeMap<QubitRef, bool>,
    pub probability: f64,
    pub env: Environment,
    pub ownership: BTreeMap<QubitRef, usize>,
    /// Values left in channels at the end.
    pub channels: BTreeMap<String, ChannelValue>,
}

impl NetworkBranch {
    pub fn state(&self, qubits: &[QubitRef]) -> Result<Vec<Amplitude>, StateError> {
        self.env.quantum.reference_full_state(qubits)
    }

    /// `(branch (outcomes ...) (prob p) (state ...) (ownership (q agent) ...))`.
    pub fn to_sexpr(&self, agent_names: &[String]) -> SExpr {
        SExpr::list([
            SExpr::atom("branch"),
            SExpr::list(std::iter::once(SExpr::atom("outcomes")).chain(self.outcomes.iter().map(|(q, b)| {
                SExpr::list([SExpr::atom(q.to_string()), SExpr::atom(if *b { "1" } else { "0" })])
            }))),
            SExpr::list([SExpr::atom("prob"), SExpr::atom(format!("{:.9}", self.probability))]),
            self.env.quantum.to_sexpr(),
            SExpr::list(std::iter::once(SExpr::atom("ownership")).chain(self.ownership.iter().map(|(q, a)| {
                SExpr::list([SExpr::atom(q.to_string()), SExpr::atom(agent_names[*a].clone())])
            }))),
        ])
    }
}

#[derive(Debug, Clone)]
pub struct NetworkRun {
    pub agent_names: Vec<String>,
    pub branches: Vec<NetworkBranch>,
    pub pruned: usize,
}

impl NetworkRun {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

pub fn run_network(state: NetworkState, mode: Mode, options: &RunOptions) -> Result<NetworkRun, NetworkError> {
    let n = state.programs.len();
    let order: Vec<usize> = options.order.clone().unwrap_or_else(|| (0..n).collect());
    let mut sorted = order.clone();
    sorted.sort_unstable();
    if sorted != (0..n).collect::<Vec<_>>() {
        return Err(NetworkError::BadSchedule(order));
    }
    if n == 0 {
        let env = state.env.clone();
        return Ok(NetworkRun {
            agent_names: vec![],
            branches: vec![NetworkBranch {
                outcomes: BTreeMap::new(),
                probability: 1.0,
                env,
                ownership: state.ownership,
                channels: BTreeMap::new(),
            }],
            pruned: 0,
        });
    }
    let mut state = state;
    state.discipline = options.discipline;
    let agent_names = state.agent_names.clone();
    let machine = Scheduler {
        state,
        order: order.into(),
        cursor: 0,
        in_turn: None,
        progressed: false,
        stalled: 0,
        turns: 0,
    };
    let explored = explore(machine, mode)?;
    Ok(NetworkRun {
        agent_names,
        branches: explored
            .finished
            .into_iter()
            .map(|(m, probability)| NetworkBranch {
                outcomes: m.state.env.classical.outcomes.clone(),
                probability,
                channels: m
                    .state
                    .channels
                    .iter()
                    .filter_map(|(k, v)| v.map(|v| (k.clone(), v)))
                    .collect(),
                ownership: m.state.ownership,
                env: m.state.env,
            })
            .collect(),
        pruned: explored.pruned,
    })
}
