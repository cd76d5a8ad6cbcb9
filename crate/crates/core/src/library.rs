//! Constructors for the standard patterns and networks, with the expected
//! semantics of each taken from the dense reference simulator.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dmc_oracle::{gates, states, Matrix, C64};
use thiserror::Error;

use crate::command::{parse_angle, parse_commands, Command, QubitName};
use crate::compose::{par_all, seq_all, CompositionExpr, ComposeError};
use crate::network::{
    compose_networks, AgentChannel, AgentInstance, AgentPattern, AgentQubit, NetworkConfig, NetworkDef,
};
use crate::pattern::Pattern;
use crate::sexpr::SExpr;

fn cmds(text: &str) -> Vec<Command<QubitName>> {
    parse_commands(text, true).expect("library command text is well formed")
}

fn vars<S: AsRef<str>>(names: &[S]) -> Vec<QubitName> {
    names.iter().map(|n| QubitName::var(n.as_ref())).collect()
}

fn var(name: &str) -> QubitName {
    QubitName::var(name)
}

/// The Hadamard pattern exactly as usually printed, with `E`, `M` and `X`
/// written against the output qubit. It is not a valid pattern (the output
/// is measured) and is kept for parser and validator tests.
pub fn hadamard_as_printed() -> Pattern {
    Pattern::from_vars(&["i", "o"], &["i"], &["o"], cmds("((E ?o ?i) (M ?o 0) (X ?o (s ?i)))"))
}

pub fn hadamard_pattern() -> Pattern {
    Pattern::from_vars(&["i", "o"], &["i"], &["o"], cmds("((E ?i ?o) (M ?i 0) (X ?o (s ?i)))"))
}

/// `J(alpha)`; `J(0) = H`.
pub fn j_pattern(alpha: f64) -> Pattern {
    let mut p = j_pattern_symbolic();
    p.commands[1] = Command::Measure {
        qubit: var("i"),
        angle: crate::command::Angle::value(-alpha),
        s: None,
        t: None,
    };
    p.params.clear();
    p
}

/// `J` with its angle left as the parameter `alpha`.
pub fn j_pattern_symbolic() -> Pattern {
    Pattern::from_vars(&["i", "o"], &["i"], &["o"], cmds("((E ?i ?o) (M ?i -alpha) (X ?o (s ?i)))"))
}

pub fn identity_pattern() -> Pattern {
    Pattern::from_vars(&["q"], &["q"], &["q"], vec![])
}

pub fn cz_pattern() -> Pattern {
    Pattern::from_vars(&["a", "b"], &["a", "b"], &["a", "b"], cmds("((E ?a ?b))"))
}

/// `(I ⊗ H) ∘ ∧Z ∘ (I ⊗ H)`, compiled with the positional shortcuts;
/// inputs and outputs are (control, target).
pub fn cx_composition() -> Result<Pattern, ComposeError> {
    let ih = par_all(&[identity_pattern(), hadamard_pattern()])?;
    seq_all(&[ih.clone(), cz_pattern(), ih])
}

/// The same CNOT written with explicit qubit pairs: `H(q1→q2)`,
/// `∧Z(q5,q4)`, `H(q6→q7)` linked by `(q2,q4)` and `(q4,q6)`. The compiled
/// pattern has inputs (target q1, control q5) and outputs (control q5,
/// target q7).
pub fn cx_explicit() -> CompositionExpr {
    let mut e = CompositionExpr::new();
    let h1 = e.add("h1", Pattern::from_vars(&["q1", "q2"], &["q1"], &["q2"], cmds("((E ?q1 ?q2) (M ?q1 0) (X ?q2 (s ?q1)))")));
    let cz = e.add("cz", Pattern::from_vars(&["q5", "q4"], &["q5", "q4"], &["q5", "q4"], cmds("((E ?q5 ?q4))")));
    let h2 = e.add("h2", Pattern::from_vars(&["q6", "q7"], &["q6"], &["q7"], cmds("((E ?q6 ?q7) (M ?q6 0) (X ?q7 (s ?q6)))")));
    e.link((h1, var("q2")), (cz, var("q4")));
    e.link((cz, var("q4")), (h2, var("q6")));
    e
}

/// `n`-qubit GHZ preparation: no inputs, outputs `q1..qn`, an `E` followed
/// by a Hadamard subpattern onto each next qubit.
pub fn ghz_pattern(n: usize) -> Pattern {
    assert!(n >= 1, "GHZ needs at least one qubit");
    let outputs: Vec<String> = (1..=n).map(|k| format!("q{k}")).collect();
    let mut space = outputs.clone();
    let mut text = String::from("(");
    for k in 2..=n {
        space.push(format!("w{k}"));
        let _ = write!(
            text,
            "(E ?q{p} ?w{k}) (E ?w{k} ?q{k}) (M ?w{k} 0) (X ?q{k} (s ?w{k})) ",
            p = k - 1
        );
    }
    text.push(')');
    Pattern::new(vars(&space), vec![], vars(&outputs), cmds(&text))
}

/// GHZ-basis measurement of `q1..qn`: the inverse preparation, then every
/// remaining qubit measured at angle 0. No outputs.
pub fn ghz_measurement_pattern(n: usize) -> Pattern {
    ghz_measurement_named(&(1..=n).map(|k| format!("q{k}")).collect::<Vec<_>>(), &(2..=n).map(|k| format!("w{k}")).collect::<Vec<_>>())
}

/// `qs[0..n]` are measured, `ws[0..n-1]` are working qubits.
fn ghz_measurement_named(qs: &[String], ws: &[String]) -> Pattern {
    let n = qs.len();
    let mut text = String::from("(");
    for k in (1..n).rev() {
        let (q, w, prev) = (&qs[k], &ws[k - 1], &qs[k - 1]);
        let _ = write!(text, "(E ?{q} ?{w}) (M ?{q} 0) (X ?{w} (s ?{q})) (E ?{prev} ?{w}) ");
    }
    let _ = write!(text, "(M ?{} 0) ", qs[0]);
    for w in ws {
        let _ = write!(text, "(M ?{w} 0) ");
    }
    text.push(')');
    let mut space = qs.to_vec();
    space.extend(ws.iter().cloned());
    Pattern::new(vars(&space), vars(qs), vec![], cmds(&text))
}

/// The GHZ-type state the measurement pattern projects onto, given the
/// outcomes of `q1` and of `w2..wn`: `X^a Z_1^{m1} (|0..0> + |1..1>)/√2`
/// with `a_j = m_{w2} ⊕ ... ⊕ m_{wj}`.
pub fn ghz_projection_state(n: usize, m1: bool, ws: &[bool]) -> Vec<C64> {
    assert_eq!(ws.len() + 1, n);
    let mut flips = vec![false; n];
    let mut acc = false;
    for (j, w) in ws.iter().enumerate() {
        acc ^= *w;
        flips[j + 1] = acc;
    }
    let ket = |bits: &[bool]| bits.iter().fold(0usize, |i, b| (i << 1) | *b as usize);
    let complement: Vec<bool> = flips.iter().map(|f| !f).collect();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = vec![C64::new(0.0, 0.0); 1 << n];
    v[ket(&flips)] = C64::new(r, 0.0);
    // flips[0] is 0, so Z on the first qubit only touches the complement
    v[ket(&complement)] = C64::new(if m1 { -r } else { r }, 0.0);
    v
}

fn agent(name: &str, qubits: &[String], channels: &[String], text: &str) -> AgentInstance {
    AgentInstance {
        name: name.to_string(),
        pattern: AgentPattern::new(name, vars(qubits), channels.to_vec(), cmds(text)),
    }
}

fn s<T: ToString>(xs: &[T]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

/// Teleportation from qubit 1 (held by A) to qubit 3 (held by B) over the
/// shared pair `(E 2 3)`.
pub fn tp_network() -> NetworkDef {
    let r = |n: u32| QubitName::Ref(crate::command::QubitRef(n));
    let a = AgentInstance {
        name: "A".into(),
        pattern: AgentPattern::new(
            "A",
            vec![r(1), r(2)],
            s(&["c1", "c2"]),
            cmds("((E 1 2) (M 1 0) (M 2 0) (send c1 (s 1)) (send c2 (s 2)))"),
        ),
    };
    let b = AgentInstance {
        name: "B".into(),
        pattern: AgentPattern::new(
            "B",
            vec![r(3)],
            s(&["c1", "c2"]),
            cmds("((recv c1 x1) (recv c2 x2) (Z 3 x1) (X 3 x2))"),
        ),
    };
    NetworkDef {
        name: "TP".into(),
        resource: Pattern::new(vec![r(2), r(3)], vec![], vec![r(2), r(3)], cmds("((E 2 3))")),
        agents: vec![a, b],
        config: NetworkConfig {
            qubit_pairs: vec![],
            channel_pairs: vec![
                (AgentChannel::new("A", "c1"), AgentChannel::new("B", "c1")),
                (AgentChannel::new("A", "c2"), AgentChannel::new("B", "c2")),
            ],
        },
        outputs: Some(vec![AgentQubit::new("B", r(3))]),
    }
}

fn bell_pairs(n: usize) -> Pattern {
    let mut space = Vec::new();
    let mut text = String::from("(");
    for i in 0..=n {
        space.push(format!("a{i}"));
        space.push(format!("b{i}"));
        let _ = write!(text, "(E ?a{i} ?b{i}) ");
    }
    text.push(')');
    Pattern::new(vars(&space), vec![], vars(&space), cmds(&text))
}

fn agent_names(n: usize) -> Vec<String> {
    (0..=n).map(|i| format!("A{i}")).collect()
}

/// Entanglement swapping: the leader `L` shares a Bell pair with each of
/// `A0..An`, measures its halves in the GHZ basis and sends the
/// corrections; `A0..An` end up holding `H^{⊗(n+1)}` of a GHZ state.
pub fn es_network(n: usize) -> NetworkDef {
    assert!(n >= 1, "ES needs at least two agents");
    let qs: Vec<String> = (0..=n).map(|i| format!("q{i}")).collect();
    let ws: Vec<String> = (1..=n).map(|i| format!("w{i}")).collect();
    let chs: Vec<String> = (0..=n).map(|i| format!("ch{i}")).collect();
    let measure = ghz_measurement_named(&qs, &ws);
    let mut text = crate::command::sequence_to_sexpr(&measure.commands).to_string();
    text.pop();
    let _ = write!(text, " (send ch0 (s ?q0))");
    for i in 1..=n {
        let sum: Vec<String> = (1..=i).map(|k| format!("(s ?w{k})")).collect();
        let _ = write!(text, " (send ch{i} (+ {}))", sum.join(" "));
    }
    text.push(')');
    let mut agents = vec![agent("L", &qs, &chs, &text)];
    let mut config = NetworkConfig::default();
    for (i, name) in agent_names(n).iter().enumerate() {
        let correction = if i == 0 { "X" } else { "Z" };
        agents.push(agent(name, &s(&["q"]), &s(&["ch"]), &format!("((recv ch x) ({correction} ?q x))")));
        config.qubit_pairs.push((var(&format!("a{i}")), AgentQubit::new(name.clone(), var("q"))));
        config.qubit_pairs.push((var(&format!("b{i}")), AgentQubit::new("L", var(&format!("q{i}")))));
        config
            .channel_pairs
            .push((AgentChannel::new("L", format!("ch{i}")), AgentChannel::new(name.clone(), "ch")));
    }
    NetworkDef {
        name: format!("ES{n}"),
        resource: bell_pairs(n),
        agents,
        config,
        outputs: Some(agent_names(n).iter().map(|a| AgentQubit::new(a.clone(), var("q"))).collect()),
    }
}

/// `GHZ^D` on `n` qubits: GHZ preparation followed by a Hadamard on each.
pub fn ghz_diagonal_pattern(n: usize) -> Result<Pattern, ComposeError> {
    let hs: Vec<Pattern> = (0..n).map(|_| hadamard_pattern()).collect();
    seq_all(&[ghz_pattern(n), par_all(&hs)?])
}

/// Share control with the `GHZ^D` resource left out: `L.?q0` and every
/// `Ai.?q` are inputs.
pub fn sc_open_network(n: usize) -> NetworkDef {
    assert!(n >= 1, "SC needs at least one target agent");
    let chs: Vec<String> = (1..=n).map(|i| format!("ch{i}")).collect();
    let mut text = String::from("((E ?q0 ?c) (M ?q0 0)");
    for ch in &chs {
        let _ = write!(text, " (send {ch} (s ?q0))");
    }
    text.push(')');
    let mut agents = vec![agent("L", &s(&["c", "q0"]), &chs, &text)];
    let mut config = NetworkConfig::default();
    let mut outputs = vec![AgentQubit::new("L", var("c"))];
    for i in 1..=n {
        let name = format!("A{i}");
        agents.push(agent(&name, &s(&["q"]), &s(&["ch"]), "((E ?q ?o) (M ?q 0) (recv ch x) (X ?o (+ (s ?q) x)))"));
        config
            .channel_pairs
            .push((AgentChannel::new("L", format!("ch{i}")), AgentChannel::new(name.clone(), "ch")));
        outputs.push(AgentQubit::new(name, var("o")));
    }
    NetworkDef {
        name: format!("SC{n}"),
        resource: Pattern::empty(),
        agents,
        config,
        outputs: Some(outputs),
    }
}

/// Share control: turns `α|0> + β|1>` on `L.?c` into
/// `α|0..0> + β|1..1>` on `L.?c, A1.?o, .., An.?o`, consuming a `GHZ^D`
/// resource over `L.?q0, A1.?q, .., An.?q`.
pub fn sc_network(n: usize) -> Result<NetworkDef, ComposeError> {
    let mut net = sc_open_network(n);
    let resource = ghz_diagonal_pattern(n + 1)?;
    net.config
        .qubit_pairs
        .push((resource.outputs[0].clone(), AgentQubit::new("L", var("q0"))));
    for i in 1..=n {
        net.config
            .qubit_pairs
            .push((resource.outputs[i].clone(), AgentQubit::new(format!("A{i}"), var("q"))));
    }
    net.resource = resource;
    Ok(net)
}

/// SC run on the GHZ state produced by ES: ES's `A0` is merged into the
/// leader, and each `Ai` keeps its ES qubit as its SC input.
pub fn sc_compose_es(n: usize) -> NetworkDef {
    let es = es_network(n);
    let sc = sc_open_network(n);
    let mut agent_pairs = vec![("L".to_string(), "L".to_string()), ("A0".to_string(), "L".to_string())];
    let mut qubit_pairs = vec![(AgentQubit::new("A0", var("q")), AgentQubit::new("L", var("q0")))];
    for i in 1..=n {
        let a = format!("A{i}");
        agent_pairs.push((a.clone(), a.clone()));
        qubit_pairs.push((AgentQubit::new(a.clone(), var("q")), AgentQubit::new(a, var("q"))));
    }
    let mut net = compose_networks(&es, &sc, &agent_pairs, &qubit_pairs).expect("ES and SC compose");
    net.name = format!("SC-ES{n}");
    net
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolKind {
    Pattern,
    Network,
}

/// What a constructor takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    None,
    /// A size `n >= min`.
    Size { min: usize, default: usize },
    /// An angle in radians.
    Angle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolArgs {
    pub n: usize,
    pub alpha: f64,
}

/// Expected behaviour, computed by the reference simulator.
#[derive(Clone, Copy)]
pub enum Semantics {
    /// The pattern implements this unitary (qubit order = its inputs).
    Unitary(fn(&ProtocolArgs) -> Matrix),
    /// Final state on the declared outputs for a given input state.
    StateMap(fn(&ProtocolArgs, &[C64]) -> Vec<C64>),
    /// A measurement; the state projected onto for outcomes of `q1` and
    /// `w2..wn`.
    GhzProjection(fn(usize, bool, &[bool]) -> Vec<C64>),
}

impl std::fmt::Debug for Semantics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Semantics::Unitary(_) => "Unitary",
            Semantics::StateMap(_) => "StateMap",
            Semantics::GhzProjection(_) => "GhzProjection",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolEntry {
    pub name: &'static str,
    pub kind: ProtocolKind,
    pub arity: Arity,
    pub summary: &'static str,
    pub semantics: Semantics,
}

/// A constructed library object.
#[derive(Debug, Clone, PartialEq)]
pub enum Built {
    Pattern(Pattern),
    Network(NetworkDef),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LibraryError {
    #[error("no builtin named `{0}`")]
    Unknown(String),
    #[error("bad argument `{arg}` for builtin `{name}`")]
    BadArgument { name: String, arg: String },
    #[error("builtin `{0}` takes no argument")]
    UnexpectedArgument(String),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

pub fn registry() -> Vec<ProtocolEntry> {
    use Arity::*;
    use ProtocolKind::*;
    use Semantics::*;
    vec![
        ProtocolEntry {
            name: "H",
            kind: Pattern,
            arity: None,
            summary: "Hadamard",
            semantics: Unitary(|_| gates::h()),
        },
        ProtocolEntry {
            name: "J",
            kind: Pattern,
            arity: Angle,
            summary: "J(alpha) = H Rz(alpha)",
            semantics: Unitary(|a| gates::j(a.alpha)),
        },
        ProtocolEntry {
            name: "CZ",
            kind: Pattern,
            arity: None,
            summary: "controlled Z",
            semantics: Unitary(|_| gates::cz()),
        },
        ProtocolEntry {
            name: "CX",
            kind: Pattern,
            arity: None,
            summary: "controlled X (control, target)",
            semantics: Unitary(|_| gates::cnot()),
        },
        ProtocolEntry {
            name: "GHZ",
            kind: Pattern,
            arity: Size { min: 1, default: 3 },
            summary: "GHZ state preparation",
            semantics: StateMap(|a, _| states::ghz(a.n)),
        },
        ProtocolEntry {
            name: "MGHZ",
            kind: Pattern,
            arity: Size { min: 1, default: 3 },
            summary: "GHZ-basis measurement",
            semantics: GhzProjection(ghz_projection_state),
        },
        ProtocolEntry {
            name: "TP",
            kind: Network,
            arity: None,
            summary: "teleportation from A.1 to B.3",
            semantics: StateMap(|_, input| input.to_vec()),
        },
        ProtocolEntry {
            name: "ES",
            kind: Network,
            arity: Size { min: 1, default: 2 },
            summary: "entanglement swapping to a diagonal-basis GHZ state",
            semantics: StateMap(|a, _| states::ghz_diagonal(a.n + 1)),
        },
        ProtocolEntry {
            name: "SC",
            kind: Network,
            arity: Size { min: 1, default: 2 },
            summary: "share control over a GHZ resource",
            semantics: StateMap(share_control_state),
        },
        ProtocolEntry {
            name: "SC-ES",
            kind: Network,
            arity: Size { min: 1, default: 2 },
            summary: "share control after entanglement swapping",
            semantics: StateMap(share_control_state),
        },
    ]
}

fn share_control_state(a: &ProtocolArgs, input: &[C64]) -> Vec<C64> {
    states::cat(a.n + 1, input[0], input[1])
}

pub fn lookup(name: &str) -> Option<ProtocolEntry> {
    registry().into_iter().find(|e| e.name.eq_ignore_ascii_case(name))
}

/// Builds an entry; `arg` is the size or angle after the name, if any.
pub fn build(name: &str, arg: Option<&str>) -> Result<(ProtocolEntry, ProtocolArgs, Built), LibraryError> {
    let entry = lookup(name).ok_or_else(|| LibraryError::Unknown(name.to_string()))?;
    let bad = |a: &str| LibraryError::BadArgument {
        name: entry.name.to_string(),
        arg: a.to_string(),
    };
    let mut args = ProtocolArgs { n: 0, alpha: 0.0 };
    match (entry.arity, arg) {
        (Arity::None, Some(_)) => return Err(LibraryError::UnexpectedArgument(entry.name.to_string())),
        (Arity::None, None) => {}
        (Arity::Size { default, .. }, None) => args.n = default,
        (Arity::Size { min, .. }, Some(a)) => {
            args.n = a.parse().map_err(|_| bad(a))?;
            if args.n < min {
                return Err(bad(a));
            }
        }
        (Arity::Angle, None) => {}
        (Arity::Angle, Some(a)) => match parse_angle(&SExpr::atom(a)) {
            Ok(crate::command::Angle::Value(v)) => args.alpha = v,
            _ => return Err(bad(a)),
        },
    }
    let built = match entry.name {
        "H" => Built::Pattern(hadamard_pattern()),
        "J" => Built::Pattern(j_pattern(args.alpha)),
        "CZ" => Built::Pattern(cz_pattern()),
        "CX" => Built::Pattern(cx_composition()?),
        "GHZ" => Built::Pattern(ghz_pattern(args.n)),
        "MGHZ" => Built::Pattern(ghz_measurement_pattern(args.n)),
        "TP" => Built::Network(tp_network()),
        "ES" => Built::Network(es_network(args.n)),
        "SC" => Built::Network(sc_network(args.n)?),
        "SC-ES" => Built::Network(sc_compose_es(args.n)),
        other => unreachable!("registry entry {other} has no constructor"),
    };
    Ok((entry, args, built))
}

/// Parses `builtin:NAME` or `builtin:NAME:ARG`.
pub fn parse_builtin(spec: &str) -> Option<(&str, Option<&str>)> {
    let rest = spec.strip_prefix("builtin:")?;
    Some(match rest.split_once(':') {
        Some((name, arg)) => (name, Some(arg)),
        None => (rest, None),
    })
}

/// Outcomes of the measurement pattern's `q1` and `w2..wn`, picked out of
/// a run by variable name.
pub fn ghz_outcome_bits(
    n: usize,
    mapping: &BTreeMap<String, crate::command::QubitRef>,
    outcomes: &BTreeMap<crate::command::QubitRef, bool>,
) -> (bool, Vec<bool>) {
    let bit = |name: String| outcomes[&mapping[&name]];
    (bit("q1".into()), (2..=n).map(|k| bit(format!("w{k}"))).collect())
}
