//! Local execution of concrete command sequences, by sampling or by
//! enumerating every measurement branch.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::command::{normalize_angle, Angle, Command, QubitRef, Signal};
use crate::pattern::AssembledSequence;
use crate::sexpr::SExpr;
use crate::state::{plus_state, Amplitude, ClassicalState, Pauli, QuantumState, StateError, ZERO_PROBABILITY};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("outcome of qubit {0} is read before it is measured")]
    UnboundOutcome(QubitRef),
    #[error("classical input `{0}` is not bound")]
    UnboundInput(String),
    #[error("angle parameter `{0}` has no value")]
    UnboundParam(String),
    #[error("communication command {0} in a local run")]
    CommunicationInLocalRun(String),
    #[error("auxiliary qubit {0} must first be used by an E command")]
    AuxiliaryNotEntangled(QubitRef),
    #[error("expected a {expected}-amplitude input state, found {found}")]
    InputLength { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Sample { seed: u64 },
    Enumerate,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Environment {
    pub quantum: QuantumState,
    pub classical: ClassicalState,
}

impl Environment {
    pub fn new(quantum: QuantumState) -> Self {
        Environment {
            quantum,
            classical: ClassicalState::new(),
        }
    }
}

pub fn eval_signal(classical: &ClassicalState, s: &Signal<QubitRef>) -> Result<bool, RuntimeError> {
    match s {
        Signal::Const(b) => Ok(*b),
        Signal::Outcome(q) => classical
            .outcomes
            .get(q)
            .copied()
            .ok_or(RuntimeError::UnboundOutcome(*q)),
        Signal::Input(n) => classical
            .inputs
            .get(n)
            .copied()
            .ok_or_else(|| RuntimeError::UnboundInput(n.clone())),
        Signal::Sum(terms) => terms
            .iter()
            .try_fold(false, |acc, t| Ok(acc ^ eval_signal(classical, t)?)),
    }
}

/// The actual angle `(-1)^s * alpha + t * pi`, normalized into `[0, 2pi)`.
pub fn eval_angle(
    classical: &ClassicalState,
    angle: &Angle,
    s: Option<&Signal<QubitRef>>,
    t: Option<&Signal<QubitRef>>,
) -> Result<f64, RuntimeError> {
    let alpha = match angle {
        Angle::Value(v) => *v,
        Angle::Param { name, .. } => return Err(RuntimeError::UnboundParam(name.clone())),
    };
    let bit = |sig: Option<&Signal<QubitRef>>| sig.map(|x| eval_signal(classical, x)).transpose();
    let s = bit(s)?.unwrap_or(false);
    let t = bit(t)?.unwrap_or(false);
    Ok(normalize_angle(if s { -alpha } else { alpha } + if t { PI } else { 0.0 }))
}

/// How a measurement outcome is chosen.
pub enum OutcomeChoice<'a> {
    Forced(bool),
    Sample(&'a mut dyn RngCore),
}

fn measurement_angle(env: &Environment, c: &Command<QubitRef>) -> Result<Option<(QubitRef, f64)>, RuntimeError> {
    match c {
        Command::Measure { qubit, angle, s, t } => {
            Ok(Some((*qubit, eval_angle(&env.classical, angle, s.as_ref(), t.as_ref())?)))
        }
        _ => Ok(None),
    }
}

fn exec_unitary(env: &mut Environment, c: &Command<QubitRef>) -> Result<(), RuntimeError> {
    let fire = |sig: &Option<Signal<QubitRef>>| match sig {
        None => Ok(true),
        Some(s) => eval_signal(&env.classical, s),
    };
    match c {
        Command::Entangle(a, b) => env.quantum.apply_cz(*a, *b)?,
        Command::CorrectX { qubit, signal } => {
            if fire(signal)? {
                env.quantum.apply_pauli(*qubit, Pauli::X)?
            }
        }
        Command::CorrectZ { qubit, signal } => {
            if fire(signal)? {
                env.quantum.apply_pauli(*qubit, Pauli::Z)?
            }
        }
        Command::Measure { .. } => unreachable!("measurements go through measure()"),
        other => return Err(RuntimeError::CommunicationInLocalRun(other.to_string())),
    }
    Ok(())
}

fn measure(env: &mut Environment, q: QubitRef, angle: f64, outcome: bool) -> Result<f64, RuntimeError> {
    let p = env.quantum.project_measure(q, angle, outcome)?;
    env.classical.outcomes.insert(q, outcome);
    Ok(p)
}

fn sample_outcome(env: &Environment, q: QubitRef, angle: f64, rng: &mut dyn RngCore) -> Result<bool, RuntimeError> {
    let (p0, p1) = env.quantum.outcome_probabilities(q, angle)?;
    let draw: f64 = rng.gen();
    let outcome = draw >= p0;
    // never pick a branch the state cannot take
    Ok(if outcome && p1 < ZERO_PROBABILITY {
        false
    } else if !outcome && p0 < ZERO_PROBABILITY {
        true
    } else {
        outcome
    })
}

/// Executes one local command; returns the probability of the step (1 for
/// everything but measurements).
pub fn exec_command(env: &mut Environment, c: &Command<QubitRef>, choice: OutcomeChoice<'_>) -> Result<f64, RuntimeError> {
    match measurement_angle(env, c)? {
        Some((q, angle)) => {
            let outcome = match choice {
                OutcomeChoice::Forced(b) => b,
                OutcomeChoice::Sample(rng) => sample_outcome(env, q, angle, rng)?,
            };
            measure(env, q, angle, outcome)
        }
        None => {
            exec_unitary(env, c)?;
            Ok(1.0)
        }
    }
}

/// A pending measurement: the qubit and its actual angle.
pub(crate) type Pending = (QubitRef, f64);

/// Something that runs deterministically up to each measurement.
pub(crate) trait Machine: Clone {
    type Error: From<RuntimeError>;

    /// Runs until done (`None`) or until a measurement is next.
    fn advance(&mut self) -> Result<Option<Pending>, Self::Error>;

    /// Performs the pending measurement with the given outcome.
    fn commit(&mut self, pending: Pending, outcome: bool) -> Result<f64, Self::Error>;

    fn env(&self) -> &Environment;
}

pub(crate) struct Explored<M> {
    pub finished: Vec<(M, f64)>,
    pub pruned: usize,
}

/// Runs `machine` to completion, forking at each measurement in enumerate
/// mode (outcome 0 explored before 1).
pub(crate) fn explore<M: Machine>(machine: M, mode: Mode) -> Result<Explored<M>, M::Error> {
    let mut finished = Vec::new();
    let mut pruned = 0;
    match mode {
        Mode::Sample { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut m = machine;
            let mut prob = 1.0;
            while let Some(pending) = m.advance()? {
                let outcome = sample_outcome(m.env(), pending.0, pending.1, &mut rng)?;
                prob *= m.commit(pending, outcome)?;
            }
            finished.push((m, prob));
        }
        Mode::Enumerate => {
            let mut stack = vec![(machine, 1.0)];
            while let Some((mut m, prob)) = stack.pop() {
                let Some(pending) = m.advance()? else {
                    finished.push((m, prob));
                    continue;
                };
                let (p0, p1) = m
                    .env()
                    .quantum
                    .outcome_probabilities(pending.0, pending.1)
                    .map_err(RuntimeError::from)?;
                for (outcome, p) in [(true, p1), (false, p0)] {
                    if p < ZERO_PROBABILITY {
                        pruned += 1;
                        continue;
                    }
                    let mut child = m.clone();
                    let lambda = child.commit(pending, outcome)?;
                    stack.push((child, prob * lambda));
                }
            }
        }
    }
    Ok(Explored { finished, pruned })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub outcomes: BTreeMap<QubitRef, bool>,
    pub probability: f64,
    pub env: Environment,
}

impl Branch {
    /// Dense state of `qubits`, which must be exactly the live qubits.
    pub fn state(&self, qubits: &[QubitRef]) -> Result<Vec<Amplitude>, StateError> {
        self.env.quantum.reference_full_state(qubits)
    }

    /// `(branch (outcomes (q bit) ...) (prob p) (state ...))`.
    pub fn to_sexpr(&self) -> SExpr {
        SExpr::list([
            SExpr::atom("branch"),
            SExpr::list(std::iter::once(SExpr::atom("outcomes")).chain(self.outcomes.iter().map(|(q, b)| {
                SExpr::list([SExpr::atom(q.to_string()), SExpr::atom(if *b { "1" } else { "0" })])
            }))),
            SExpr::list([SExpr::atom("prob"), SExpr::atom(format!("{:.9}", self.probability))]),
            self.env.quantum.to_sexpr(),
        ])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub branches: Vec<Branch>,
    /// Outcomes skipped because their probability was below the cutoff.
    pub pruned: usize,
}

impl RunResult {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }
}

#[derive(Clone)]
struct Sequence {
    commands: Arc<[Command<QubitRef>]>,
    pc: usize,
    env: Environment,
}

impl Machine for Sequence {
    type Error = RuntimeError;

    fn advance(&mut self) -> Result<Option<Pending>, RuntimeError> {
        while let Some(c) = self.commands.get(self.pc) {
            if let Some(pending) = measurement_angle(&self.env, c)? {
                return Ok(Some(pending));
            }
            exec_unitary(&mut self.env, c)?;
            self.pc += 1;
        }
        Ok(None)
    }

    fn commit(&mut self, (q, angle): Pending, outcome: bool) -> Result<f64, RuntimeError> {
        let p = measure(&mut self.env, q, angle, outcome)?;
        self.pc += 1;
        Ok(p)
    }

    fn env(&self) -> &Environment {
        &self.env
    }
}

/// Qubits referenced by `commands` that are not yet allocated; each must
/// first appear in an `E`.
pub fn auxiliary_qubits(
    commands: &[Command<QubitRef>],
    allocated: &BTreeSet<QubitRef>,
) -> Result<Vec<QubitRef>, RuntimeError> {
    let mut seen = allocated.clone();
    let mut aux = Vec::new();
    for c in commands {
        if c.is_communication() {
            return Err(RuntimeError::CommunicationInLocalRun(c.to_string()));
        }
        for q in c.operands() {
            if seen.insert(*q) {
                if !matches!(c, Command::Entangle(..)) {
                    return Err(RuntimeError::AuxiliaryNotEntangled(*q));
                }
                aux.push(*q);
            }
        }
    }
    Ok(aux)
}

/// Runs `commands` from `initial`; unallocated qubits start in `|+>`.
pub fn run_sequence(
    commands: &[Command<QubitRef>],
    initial: QuantumState,
    input_bits: &BTreeMap<String, bool>,
    mode: Mode,
) -> Result<RunResult, RuntimeError> {
    let allocated: BTreeSet<QubitRef> = initial.qubits().into_iter().chain(initial.measured().iter().copied()).collect();
    let mut quantum = initial;
    for q in auxiliary_qubits(commands, &allocated)? {
        quantum.init_qubit(q, plus_state())?;
    }
    let mut env = Environment::new(quantum);
    env.classical.inputs = input_bits.clone();
    let machine = Sequence {
        commands: commands.into(),
        pc: 0,
        env,
    };
    let explored = explore(machine, mode)?;
    Ok(RunResult {
        branches: explored
            .finished
            .into_iter()
            .map(|(m, probability)| Branch {
                outcomes: m.env.classical.outcomes.clone(),
                probability,
                env: m.env,
            })
            .collect(),
        pruned: explored.pruned,
    })
}

/// Builds a state with each listed qubit in its own tangle.
pub fn product_state(inputs: &[(QubitRef, [Amplitude; 2])]) -> Result<QuantumState, StateError> {
    let mut s = QuantumState::new();
    for (q, amps) in inputs {
        s.init_qubit(*q, *amps)?;
    }
    Ok(s)
}

/// Runs an assembled pattern: `input` is the joint state of its inputs (in
/// order) and every other qubit of the space starts in `|+>`.
pub fn run_pattern(
    asm: &AssembledSequence,
    input: &[Amplitude],
    input_bits: &BTreeMap<String, bool>,
    mode: Mode,
) -> Result<RunResult, RuntimeError> {
    let expected = 1usize << asm.inputs.len();
    if input.len() != expected {
        return Err(RuntimeError::InputLength {
            expected,
            found: input.len(),
        });
    }
    let mut state = QuantumState::new();
    state.init_tangle(asm.inputs.clone(), input.to_vec())?;
    for q in &asm.space {
        if !asm.inputs.contains(q) {
            state.init_qubit(*q, plus_state())?;
        }
    }
    run_sequence(&asm.commands, state, input_bits, mode)
}
