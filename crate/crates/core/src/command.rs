//! Command language: entanglement, measurement, corrections and the
//! communication extensions, together with their surface syntax.

use std::f64::consts::{PI, TAU};
use std::fmt;

use thiserror::Error;

use crate::sexpr::{ReadError, SExpr};

/// Concrete qubit reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitRef(pub u32);

impl fmt::Display for QubitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A qubit as written in a definition: either a `?`-variable or a concrete
/// reference.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QubitName {
    Var(String),
    Ref(QubitRef),
}

impl QubitName {
    pub fn var(name: impl Into<String>) -> Self {
        QubitName::Var(name.into())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, QubitName::Var(_))
    }
}

impl fmt::Display for QubitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QubitName::Var(v) => write!(f, "?{v}"),
            QubitName::Ref(r) => write!(f, "{r}"),
        }
    }
}

impl From<QubitRef> for QubitName {
    fn from(r: QubitRef) -> Self {
        QubitName::Ref(r)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Signal<Q> {
    Const(bool),
    Outcome(Q),
    Input(String),
    Sum(Vec<Signal<Q>>),
}

impl<Q> Signal<Q> {
    pub fn outcome(q: Q) -> Self {
        Signal::Outcome(q)
    }

    pub fn input(name: impl Into<String>) -> Self {
        Signal::Input(name.into())
    }

    /// XOR of the outcomes of `qs`; a single qubit gives a plain `(s q)`.
    pub fn sum_of(qs: impl IntoIterator<Item = Q>) -> Self {
        let mut terms: Vec<Signal<Q>> = qs.into_iter().map(Signal::Outcome).collect();
        match terms.len() {
            0 => Signal::Const(false),
            1 => terms.pop().unwrap(),
            _ => Signal::Sum(terms),
        }
    }

    pub fn map<R>(&self, f: &mut impl FnMut(&Q) -> R) -> Signal<R> {
        match self {
            Signal::Const(b) => Signal::Const(*b),
            Signal::Outcome(q) => Signal::Outcome(f(q)),
            Signal::Input(n) => Signal::Input(n.clone()),
            Signal::Sum(ts) => Signal::Sum(ts.iter().map(|t| t.map(f)).collect()),
        }
    }

    pub fn try_map<R, E>(&self, f: &mut impl FnMut(&Q) -> Result<R, E>) -> Result<Signal<R>, E> {
        Ok(match self {
            Signal::Const(b) => Signal::Const(*b),
            Signal::Outcome(q) => Signal::Outcome(f(q)?),
            Signal::Input(n) => Signal::Input(n.clone()),
            Signal::Sum(ts) => Signal::Sum(
                ts.iter()
                    .map(|t| t.try_map(f))
                    .collect::<Result<_, _>>()?,
            ),
        })
    }

    pub fn map_inputs(&self, f: &mut impl FnMut(&str) -> String) -> Signal<Q>
    where
        Q: Clone,
    {
        match self {
            Signal::Input(n) => Signal::Input(f(n)),
            Signal::Sum(ts) => Signal::Sum(ts.iter().map(|t| t.map_inputs(f)).collect()),
            other => other.clone(),
        }
    }

    /// Qubits whose outcomes this signal reads.
    pub fn outcome_qubits(&self) -> Vec<&Q> {
        let mut out = Vec::new();
        self.collect(&mut out, &mut Vec::new());
        out
    }

    pub fn input_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect(&mut Vec::new(), &mut out);
        out
    }

    fn collect<'a>(&'a self, qs: &mut Vec<&'a Q>, names: &mut Vec<&'a str>) {
        match self {
            Signal::Const(_) => {}
            Signal::Outcome(q) => qs.push(q),
            Signal::Input(n) => names.push(n),
            Signal::Sum(ts) => ts.iter().for_each(|t| t.collect(qs, names)),
        }
    }
}

impl<Q: fmt::Display> Signal<Q> {
    pub fn to_sexpr(&self) -> SExpr {
        match self {
            Signal::Const(b) => SExpr::atom(if *b { "1" } else { "0" }),
            Signal::Outcome(q) => SExpr::list([SExpr::atom("s"), SExpr::atom(q.to_string())]),
            Signal::Input(n) => SExpr::atom(n.clone()),
            Signal::Sum(ts) => SExpr::list(
                std::iter::once(SExpr::atom("+")).chain(ts.iter().map(Signal::to_sexpr)),
            ),
        }
    }
}

/// A measurement angle in radians, or a named parameter (optionally negated)
/// that is filled in by instantiation.
#[derive(Clone, Debug, PartialEq)]
pub enum Angle {
    Value(f64),
    Param { name: String, negated: bool },
}

impl Angle {
    pub fn value(radians: f64) -> Self {
        Angle::Value(normalize_angle(radians))
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::Value(v) => write!(f, "{v}"),
            Angle::Param { name, negated } => {
                write!(f, "{}{name}", if *negated { "-" } else { "" })
            }
        }
    }
}

/// Maps any finite angle into `[0, 2π)`.
pub fn normalize_angle(radians: f64) -> f64 {
    let r = radians.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        // folds -0.0 into 0.0
        r + 0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command<Q> {
    Entangle(Q, Q),
    Measure {
        qubit: Q,
        angle: Angle,
        s: Option<Signal<Q>>,
        t: Option<Signal<Q>>,
    },
    CorrectX {
        qubit: Q,
        signal: Option<Signal<Q>>,
    },
    CorrectZ {
        qubit: Q,
        signal: Option<Signal<Q>>,
    },
    Send {
        channel: String,
        signal: Signal<Q>,
    },
    Recv {
        channel: String,
        binding: String,
    },
    QSend {
        channel: String,
        qubit: Q,
    },
    QRecv {
        channel: String,
        binding: Q,
    },
}

impl<Q> Command<Q> {
    pub fn measure(qubit: Q, radians: f64) -> Self {
        Command::Measure {
            qubit,
            angle: Angle::value(radians),
            s: None,
            t: None,
        }
    }

    pub fn x(qubit: Q, signal: Signal<Q>) -> Self {
        Command::CorrectX {
            qubit,
            signal: Some(signal),
        }
    }

    pub fn z(qubit: Q, signal: Signal<Q>) -> Self {
        Command::CorrectZ {
            qubit,
            signal: Some(signal),
        }
    }

    pub fn is_communication(&self) -> bool {
        matches!(
            self,
            Command::Send { .. } | Command::Recv { .. } | Command::QSend { .. } | Command::QRecv { .. }
        )
    }

    pub fn channel(&self) -> Option<&str> {
        match self {
            Command::Send { channel, .. }
            | Command::Recv { channel, .. }
            | Command::QSend { channel, .. }
            | Command::QRecv { channel, .. } => Some(channel),
            _ => None,
        }
    }

    /// Qubits acted on (not those only read through signals).
    pub fn operands(&self) -> Vec<&Q> {
        match self {
            Command::Entangle(a, b) => vec![a, b],
            Command::Measure { qubit, .. }
            | Command::CorrectX { qubit, .. }
            | Command::CorrectZ { qubit, .. }
            | Command::QSend { qubit, .. } => vec![qubit],
            Command::QRecv { binding, .. } => vec![binding],
            Command::Send { .. } | Command::Recv { .. } => vec![],
        }
    }

    pub fn signals(&self) -> Vec<&Signal<Q>> {
        match self {
            Command::Measure { s, t, .. } => s.iter().chain(t.iter()).collect(),
            Command::CorrectX { signal, .. } | Command::CorrectZ { signal, .. } => {
                signal.iter().collect()
            }
            Command::Send { signal, .. } => vec![signal],
            _ => vec![],
        }
    }

    pub fn map_qubits<R>(&self, f: &mut impl FnMut(&Q) -> R) -> Command<R> {
        let r: Result<Command<R>, std::convert::Infallible> = self.try_map_qubits(&mut |q| Ok(f(q)));
        match r {
            Ok(c) => c,
            Err(never) => match never {},
        }
    }

    pub fn try_map_qubits<R, E>(
        &self,
        f: &mut impl FnMut(&Q) -> Result<R, E>,
    ) -> Result<Command<R>, E> {
        let sig = |s: &Option<Signal<Q>>, f: &mut dyn FnMut(&Q) -> Result<R, E>| {
            s.as_ref().map(|s| s.try_map(&mut |q| f(q))).transpose()
        };
        Ok(match self {
            Command::Entangle(a, b) => Command::Entangle(f(a)?, f(b)?),
            Command::Measure { qubit, angle, s, t } => Command::Measure {
                qubit: f(qubit)?,
                angle: angle.clone(),
                s: sig(s, f)?,
                t: sig(t, f)?,
            },
            Command::CorrectX { qubit, signal } => Command::CorrectX {
                qubit: f(qubit)?,
                signal: sig(signal, f)?,
            },
            Command::CorrectZ { qubit, signal } => Command::CorrectZ {
                qubit: f(qubit)?,
                signal: sig(signal, f)?,
            },
            Command::Send { channel, signal } => Command::Send {
                channel: channel.clone(),
                signal: signal.try_map(f)?,
            },
            Command::Recv { channel, binding } => Command::Recv {
                channel: channel.clone(),
                binding: binding.clone(),
            },
            Command::QSend { channel, qubit } => Command::QSend {
                channel: channel.clone(),
                qubit: f(qubit)?,
            },
            Command::QRecv { channel, binding } => Command::QRecv {
                channel: channel.clone(),
                binding: f(binding)?,
            },
        })
    }

    /// Renames channels and classical input names, leaving qubits alone.
    pub fn rename_classical(
        &self,
        channel: &mut impl FnMut(&str) -> String,
        input: &mut impl FnMut(&str) -> String,
    ) -> Command<Q>
    where
        Q: Clone,
    {
        let sig = |s: &Option<Signal<Q>>, input: &mut dyn FnMut(&str) -> String| {
            s.as_ref().map(|s| s.map_inputs(&mut |n| input(n)))
        };
        match self {
            Command::Measure { qubit, angle, s, t } => Command::Measure {
                qubit: qubit.clone(),
                angle: angle.clone(),
                s: sig(s, input),
                t: sig(t, input),
            },
            Command::CorrectX { qubit, signal } => Command::CorrectX {
                qubit: qubit.clone(),
                signal: sig(signal, input),
            },
            Command::CorrectZ { qubit, signal } => Command::CorrectZ {
                qubit: qubit.clone(),
                signal: sig(signal, input),
            },
            Command::Send { channel: ch, signal } => Command::Send {
                channel: channel(ch),
                signal: signal.map_inputs(input),
            },
            Command::Recv { channel: ch, binding } => Command::Recv {
                channel: channel(ch),
                binding: input(binding),
            },
            Command::QSend { channel: ch, qubit } => Command::QSend {
                channel: channel(ch),
                qubit: qubit.clone(),
            },
            Command::QRecv { channel: ch, binding } => Command::QRecv {
                channel: channel(ch),
                binding: binding.clone(),
            },
            Command::Entangle(..) => self.clone(),
        }
    }
}

impl<Q: fmt::Display> Command<Q> {
    pub fn to_sexpr(&self) -> SExpr {
        let q = |q: &Q| SExpr::atom(q.to_string());
        let mut items = Vec::with_capacity(5);
        match self {
            Command::Entangle(a, b) => items.extend([SExpr::atom("E"), q(a), q(b)]),
            Command::Measure { qubit, angle, s, t } => {
                items.extend([SExpr::atom("M"), q(qubit), SExpr::atom(angle.to_string())]);
                match (s, t) {
                    (Some(s), Some(t)) => items.extend([s.to_sexpr(), t.to_sexpr()]),
                    (Some(s), None) => items.push(s.to_sexpr()),
                    // a t-signal alone still needs the s position filled
                    (None, Some(t)) => items.extend([SExpr::atom("0"), t.to_sexpr()]),
                    (None, None) => {}
                }
            }
            Command::CorrectX { qubit, signal } | Command::CorrectZ { qubit, signal } => {
                let op = if matches!(self, Command::CorrectX { .. }) { "X" } else { "Z" };
                items.extend([SExpr::atom(op), q(qubit)]);
                items.extend(signal.iter().map(Signal::to_sexpr));
            }
            Command::Send { channel, signal } => {
                items.extend([SExpr::atom("send"), SExpr::atom(channel.clone()), signal.to_sexpr()])
            }
            Command::Recv { channel, binding } => items.extend([
                SExpr::atom("recv"),
                SExpr::atom(channel.clone()),
                SExpr::atom(binding.clone()),
            ]),
            Command::QSend { channel, qubit } => {
                items.extend([SExpr::atom("qsend"), SExpr::atom(channel.clone()), q(qubit)])
            }
            Command::QRecv { channel, binding } => {
                items.extend([SExpr::atom("qrecv"), SExpr::atom(channel.clone()), q(binding)])
            }
        }
        SExpr::List(items)
    }
}

impl<Q: fmt::Display> fmt::Display for Command<Q> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

pub fn sequence_to_sexpr<Q: fmt::Display>(commands: &[Command<Q>]) -> SExpr {
    SExpr::list(commands.iter().map(Command::to_sexpr))
}

/// Converts a sequence over names into one over concrete references, failing
/// on the first variable.
pub fn concretize(commands: &[Command<QubitName>]) -> Result<Vec<Command<QubitRef>>, SyntaxError> {
    commands
        .iter()
        .map(|c| {
            c.try_map_qubits(&mut |q| match q {
                QubitName::Ref(r) => Ok(*r),
                QubitName::Var(v) => Err(SyntaxError::UnresolvedVariable(format!("?{v}"))),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntaxError {
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("unknown operator `{0}`")]
    UnknownOperator(String),
    #[error("`{op}` expects {expected} arguments, found {found}")]
    Arity {
        op: String,
        expected: &'static str,
        found: usize,
    },
    #[error("malformed signal `{0}`")]
    BadSignal(String),
    #[error("malformed angle `{0}`")]
    BadAngle(String),
    #[error("`{0}` is neither a qubit reference nor a ?-variable")]
    BadQubitName(String),
    #[error("communication command `{0}` is not allowed in a local sequence")]
    DistributedOpInLocalContext(String),
    #[error("entanglement of qubit {0} with itself")]
    SameQubit(String),
    #[error("expected {expected}, found `{found}`")]
    Shape { expected: String, found: String },
    #[error("unresolved variable {0} in a concrete sequence")]
    UnresolvedVariable(String),
}

pub(crate) fn shape(expected: impl Into<String>, found: &SExpr) -> SyntaxError {
    SyntaxError::Shape {
        expected: expected.into(),
        found: found.to_string(),
    }
}

pub fn parse_qubit(expr: &SExpr) -> Result<QubitName, SyntaxError> {
    let tok = expr
        .as_atom()
        .ok_or_else(|| SyntaxError::BadQubitName(expr.to_string()))?;
    if let Some(var) = tok.strip_prefix('?') {
        if var.is_empty() {
            return Err(SyntaxError::BadQubitName(tok.to_string()));
        }
        return Ok(QubitName::Var(var.to_string()));
    }
    tok.parse::<u32>()
        .map(|n| QubitName::Ref(QubitRef(n)))
        .map_err(|_| SyntaxError::BadQubitName(tok.to_string()))
}

pub fn parse_signal(expr: &SExpr) -> Result<Signal<QubitName>, SyntaxError> {
    match expr {
        SExpr::Atom(a) => match a.as_str() {
            "0" => Ok(Signal::Const(false)),
            "1" => Ok(Signal::Const(true)),
            _ if a.parse::<i64>().is_ok() || a.parse::<f64>().is_ok() => {
                Err(SyntaxError::BadSignal(a.clone()))
            }
            _ => Ok(Signal::Input(a.clone())),
        },
        SExpr::List(items) => match items.as_slice() {
            [SExpr::Atom(h), q] if h.eq_ignore_ascii_case("s") => {
                Ok(Signal::Outcome(parse_qubit(q).map_err(|_| SyntaxError::BadSignal(expr.to_string()))?))
            }
            [SExpr::Atom(h), rest @ ..] if h == "+" && !rest.is_empty() => Ok(Signal::Sum(
                rest.iter().map(parse_signal).collect::<Result<_, _>>()?,
            )),
            _ => Err(SyntaxError::BadSignal(expr.to_string())),
        },
    }
}

/// Decimal radians, `pi`, `pi/N`, `-pi/N`, or a parameter name (`alpha`,
/// `-alpha`).
pub fn parse_angle(expr: &SExpr) -> Result<Angle, SyntaxError> {
    let tok = expr
        .as_atom()
        .ok_or_else(|| SyntaxError::BadAngle(expr.to_string()))?;
    let bad = || SyntaxError::BadAngle(tok.to_string());
    if let Ok(v) = tok.parse::<f64>() {
        if !v.is_finite() {
            return Err(bad());
        }
        return Ok(Angle::value(v));
    }
    let (negated, body) = match tok.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, tok),
    };
    let sign = if negated { -1.0 } else { 1.0 };
    let lower = body.to_ascii_lowercase();
    if lower == "pi" {
        return Ok(Angle::value(sign * PI));
    }
    if let Some(den) = lower.strip_prefix("pi/") {
        let d: f64 = den.parse().map_err(|_| bad())?;
        if d == 0.0 || !d.is_finite() {
            return Err(bad());
        }
        return Ok(Angle::value(sign * PI / d));
    }
    let mut chars = body.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {
            if chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
                Ok(Angle::Param {
                    name: body.to_string(),
                    negated,
                })
            } else {
                Err(bad())
            }
        }
        _ => Err(bad()),
    }
}

fn atom_arg(expr: &SExpr, what: &str) -> Result<String, SyntaxError> {
    expr.as_atom()
        .map(str::to_string)
        .ok_or_else(|| shape(what, expr))
}

pub fn parse_command(expr: &SExpr, allow_distributed: bool) -> Result<Command<QubitName>, SyntaxError> {
    let items = expr
        .as_list()
        .ok_or_else(|| shape("a command list", expr))?;
    let (head, args) = match items.split_first() {
        Some((SExpr::Atom(h), args)) => (h.as_str(), args),
        _ => return Err(shape("a command list", expr)),
    };
    let arity = |expected: &'static str, ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(SyntaxError::Arity {
                op: head.to_string(),
                expected,
                found: args.len(),
            })
        }
    };
    let op = head.to_ascii_lowercase();
    let distributed = matches!(op.as_str(), "send" | "recv" | "qsend" | "qrecv");
    if distributed && !allow_distributed {
        return Err(SyntaxError::DistributedOpInLocalContext(head.to_string()));
    }
    match op.as_str() {
        "e" => {
            arity("2", args.len() == 2)?;
            let a = parse_qubit(&args[0])?;
            let b = parse_qubit(&args[1])?;
            if a == b {
                return Err(SyntaxError::SameQubit(a.to_string()));
            }
            Ok(Command::Entangle(a, b))
        }
        "m" => {
            arity("2 to 4", (2..=4).contains(&args.len()))?;
            Ok(Command::Measure {
                qubit: parse_qubit(&args[0])?,
                angle: parse_angle(&args[1])?,
                s: args.get(2).map(parse_signal).transpose()?,
                t: args.get(3).map(parse_signal).transpose()?,
            })
        }
        "x" | "y" | "z" => {
            arity("1 or 2", (1..=2).contains(&args.len()))?;
            let qubit = parse_qubit(&args[0])?;
            let signal = args.get(1).map(parse_signal).transpose()?;
            if op == "x" {
                Ok(Command::CorrectX { qubit, signal })
            } else {
                if op == "y" {
                    log::warn!("Y correction on {qubit} is executed as a Z correction");
                }
                Ok(Command::CorrectZ { qubit, signal })
            }
        }
        "send" => {
            arity("2", args.len() == 2)?;
            Ok(Command::Send {
                channel: atom_arg(&args[0], "a channel name")?,
                signal: parse_signal(&args[1])?,
            })
        }
        "recv" => {
            arity("2", args.len() == 2)?;
            // `(recv ch (s ?v))` binds `?v`, read back later as `(s ?v)`
            let binding = match args[1].as_list() {
                Some([SExpr::Atom(h), SExpr::Atom(v)]) if h.eq_ignore_ascii_case("s") => v.clone(),
                _ => atom_arg(&args[1], "an input name")?,
            };
            Ok(Command::Recv {
                channel: atom_arg(&args[0], "a channel name")?,
                binding,
            })
        }
        "qsend" => {
            arity("2", args.len() == 2)?;
            Ok(Command::QSend {
                channel: atom_arg(&args[0], "a channel name")?,
                qubit: parse_qubit(&args[1])?,
            })
        }
        "qrecv" => {
            arity("2", args.len() == 2)?;
            Ok(Command::QRecv {
                channel: atom_arg(&args[0], "a channel name")?,
                binding: parse_qubit(&args[1])?,
            })
        }
        _ => Err(SyntaxError::UnknownOperator(head.to_string())),
    }
}

pub fn parse_command_sequence(
    expr: &SExpr,
    allow_distributed: bool,
) -> Result<Vec<Command<QubitName>>, SyntaxError> {
    expr.as_list()
        .ok_or_else(|| shape("a command sequence", expr))?
        .iter()
        .map(|c| parse_command(c, allow_distributed))
        .collect()
}

/// Parses a whole sequence from text.
pub fn parse_commands(text: &str, allow_distributed: bool) -> Result<Vec<Command<QubitName>>, SyntaxError> {
    parse_command_sequence(&crate::sexpr::parse_sexpr(text)?, allow_distributed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::{parse_sexpr, print_sexpr};
    use proptest::prelude::*;

    fn r(n: u32) -> QubitName {
        QubitName::Ref(QubitRef(n))
    }

    #[test]
    fn hadamard_sequence_parses_in_order() {
        let cmds = parse_commands("((E 0 1) (M 0 0) (X 1 (s 0)))", false).unwrap();
        assert_eq!(
            cmds,
            vec![
                Command::Entangle(r(0), r(1)),
                Command::Measure {
                    qubit: r(0),
                    angle: Angle::Value(0.0),
                    s: None,
                    t: None
                },
                Command::x(r(1), Signal::Outcome(r(0))),
            ]
        );
    }

    #[test]
    fn measurement_with_both_signals() {
        let cmds = parse_commands("((M 2 0.25 (s 0) (s 1)))", false).unwrap();
        match &cmds[0] {
            Command::Measure { qubit, angle, s, t } => {
                assert_eq!(*qubit, r(2));
                assert_eq!(*angle, Angle::Value(0.25));
                assert_eq!(*s, Some(Signal::Outcome(r(0))));
                assert_eq!(*t, Some(Signal::Outcome(r(1))));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn communication_needs_distributed_context() {
        let text = "((send ch0 (s 0)) (recv ch1 x))";
        assert_eq!(
            parse_commands(text, true).unwrap(),
            vec![
                Command::Send {
                    channel: "ch0".into(),
                    signal: Signal::Outcome(r(0))
                },
                Command::Recv {
                    channel: "ch1".into(),
                    binding: "x".into()
                },
            ]
        );
        assert!(matches!(
            parse_commands(text, false),
            Err(SyntaxError::DistributedOpInLocalContext(_))
        ));
    }

    #[test]
    fn recv_accepts_signal_binding_form() {
        let cmds = parse_commands("((recv ?ch (s ?v)) (X ?q (s ?v)))", true).unwrap();
        assert_eq!(
            cmds[0],
            Command::Recv {
                channel: "?ch".into(),
                binding: "?v".into()
            }
        );
    }

    #[test]
    fn quantum_channels() {
        let cmds = parse_commands("((qsend c ?a) (qrecv c ?b))", true).unwrap();
        assert_eq!(
            cmds,
            vec![
                Command::QSend {
                    channel: "c".into(),
                    qubit: QubitName::var("a")
                },
                Command::QRecv {
                    channel: "c".into(),
                    binding: QubitName::var("b")
                },
            ]
        );
    }

    #[test]
    fn every_signal_production() {
        let cmds = parse_commands("((X 1) (Z 1 0) (X 1 1) (Z 1 flag) (X 1 (s 0)) (Z 1 (+ (s 0) 1 flag)))", false)
            .unwrap();
        let signals: Vec<_> = cmds
            .iter()
            .map(|c| match c {
                Command::CorrectX { signal, .. } | Command::CorrectZ { signal, .. } => signal.clone(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(signals[0], None);
        assert_eq!(signals[1], Some(Signal::Const(false)));
        assert_eq!(signals[2], Some(Signal::Const(true)));
        assert_eq!(signals[3], Some(Signal::Input("flag".into())));
        assert_eq!(signals[4], Some(Signal::Outcome(r(0))));
        assert_eq!(
            signals[5],
            Some(Signal::Sum(vec![
                Signal::Outcome(r(0)),
                Signal::Const(true),
                Signal::Input("flag".into())
            ]))
        );
    }

    #[test]
    fn y_correction_becomes_z() {
        let cmds = parse_commands("((Y 3 (s 1)))", false).unwrap();
        assert_eq!(cmds, vec![Command::z(r(3), Signal::Outcome(r(1)))]);
    }

    #[test]
    fn operators_are_case_insensitive() {
        let a = parse_commands("((e 0 1) (m 0 pi) (x 1 (S 0)) (SEND c 1))", true).unwrap();
        let b = parse_commands("((E 0 1) (M 0 pi) (X 1 (s 0)) (send c 1))", true).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            print_sexpr(&sequence_to_sexpr(&a)),
            format!("((E 0 1) (M 0 {}) (X 1 (s 0)) (send c 1))", PI)
        );
    }

    #[test]
    fn angle_literals() {
        let angle = |s: &str| parse_angle(&SExpr::atom(s)).unwrap();
        assert_eq!(angle("pi"), Angle::Value(PI));
        assert_eq!(angle("pi/2"), Angle::Value(PI / 2.0));
        assert_eq!(angle("pi/4"), Angle::Value(PI / 4.0));
        assert_eq!(angle("-pi/2"), Angle::Value(3.0 * PI / 2.0));
        assert_eq!(angle("7"), Angle::Value(7.0 - TAU));
        assert_eq!(
            angle("-alpha"),
            Angle::Param {
                name: "alpha".into(),
                negated: true
            }
        );
        assert!(parse_angle(&SExpr::atom("inf")).is_err());
        assert!(parse_angle(&SExpr::atom("?a")).is_err());
    }

    #[test]
    fn malformed_commands() {
        assert!(matches!(parse_commands("((H 0))", false), Err(SyntaxError::UnknownOperator(_))));
        assert!(matches!(parse_commands("((E 0))", false), Err(SyntaxError::Arity { .. })));
        assert!(matches!(parse_commands("((E 0 0))", false), Err(SyntaxError::SameQubit(_))));
        assert!(matches!(parse_commands("((X 0 (s)))", false), Err(SyntaxError::BadSignal(_))));
        assert!(matches!(parse_commands("((X 0 (+)))", false), Err(SyntaxError::BadSignal(_))));
        assert!(matches!(parse_commands("((X 0 2))", false), Err(SyntaxError::BadSignal(_))));
        assert!(matches!(parse_commands("((X q0))", false), Err(SyntaxError::BadQubitName(_))));
        assert!(matches!(parse_commands("((M 0 0 1 1 1))", false), Err(SyntaxError::Arity { .. })));
    }

    #[test]
    fn concretize_rejects_variables() {
        let cmds = parse_commands("((E ?a 1))", false).unwrap();
        assert!(matches!(concretize(&cmds), Err(SyntaxError::UnresolvedVariable(_))));
    }

    fn arb_qubit() -> impl Strategy<Value = QubitName> {
        prop_oneof![
            (0u32..20).prop_map(|n| QubitName::Ref(QubitRef(n))),
            "[a-z][a-z0-9]{0,3}".prop_map(QubitName::Var),
        ]
    }

    fn arb_signal() -> impl Strategy<Value = Signal<QubitName>> {
        let leaf = prop_oneof![
            any::<bool>().prop_map(Signal::Const),
            arb_qubit().prop_map(Signal::Outcome),
            "[a-z][a-z0-9]{0,3}".prop_map(Signal::Input),
        ];
        leaf.prop_recursive(2, 8, 3, |inner| {
            prop::collection::vec(inner, 1..4).prop_map(Signal::Sum)
        })
    }

    fn arb_angle() -> impl Strategy<Value = Angle> {
        prop_oneof![
            (-10.0f64..10.0).prop_map(Angle::value),
            ("[a-z]{1,4}", any::<bool>()).prop_map(|(name, negated)| Angle::Param { name, negated }),
        ]
    }

    fn arb_command() -> impl Strategy<Value = Command<QubitName>> {
        prop_oneof![
            (arb_qubit(), arb_qubit())
                .prop_filter("distinct", |(a, b)| a != b)
                .prop_map(|(a, b)| Command::Entangle(a, b)),
            (arb_qubit(), arb_angle(), prop::option::of(arb_signal()), prop::option::of(arb_signal()))
                .prop_map(|(qubit, angle, s, t)| {
                    // an absent s with a present t prints as an explicit 0
                    let s = if s.is_none() && t.is_some() { Some(Signal::Const(false)) } else { s };
                    Command::Measure { qubit, angle, s, t }
                }),
            (arb_qubit(), prop::option::of(arb_signal()))
                .prop_map(|(qubit, signal)| Command::CorrectX { qubit, signal }),
            (arb_qubit(), prop::option::of(arb_signal()))
                .prop_map(|(qubit, signal)| Command::CorrectZ { qubit, signal }),
            ("[a-z]{1,3}", arb_signal()).prop_map(|(channel, signal)| Command::Send { channel, signal }),
            ("[a-z]{1,3}", "[a-z]{1,3}").prop_map(|(channel, binding)| Command::Recv { channel, binding }),
            ("[a-z]{1,3}", arb_qubit()).prop_map(|(channel, qubit)| Command::QSend { channel, qubit }),
            ("[a-z]{1,3}", arb_qubit()).prop_map(|(channel, binding)| Command::QRecv { channel, binding }),
        ]
    }

    proptest! {
        #[test]
        fn printed_commands_reparse(cmds in prop::collection::vec(arb_command(), 0..8)) {
            let text = print_sexpr(&sequence_to_sexpr(&cmds));
            let back = parse_command_sequence(&parse_sexpr(&text).unwrap(), true).unwrap();
            prop_assert_eq!(back, cmds);
        }
    }
}
