//! Patterns `(V, I, O, A)`: definition syntax, well-formedness checks and the
//! assembler that replaces variables by concrete references.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::command::{
    concretize, parse_command_sequence, parse_qubit, sequence_to_sexpr, shape, Angle, Command, QubitName, QubitRef,
    SyntaxError,
};
use crate::sexpr::SExpr;

#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    /// Computation space, in declaration order.
    pub space: Vec<QubitName>,
    pub inputs: Vec<QubitName>,
    pub outputs: Vec<QubitName>,
    pub commands: Vec<Command<QubitName>>,
    /// Names of symbolic angles still to be instantiated.
    pub params: Vec<String>,
}

impl Pattern {
    pub fn new(
        space: Vec<QubitName>,
        inputs: Vec<QubitName>,
        outputs: Vec<QubitName>,
        commands: Vec<Command<QubitName>>,
    ) -> Self {
        let params = angle_params(&commands);
        Pattern {
            space,
            inputs,
            outputs,
            commands,
            params,
        }
    }

    /// Builds a pattern over `?`-variables from bare names.
    pub fn from_vars(space: &[&str], inputs: &[&str], outputs: &[&str], commands: Vec<Command<QubitName>>) -> Self {
        let vars = |xs: &[&str]| xs.iter().map(|x| QubitName::var(*x)).collect();
        Pattern::new(vars(space), vars(inputs), vars(outputs), commands)
    }

    pub fn empty() -> Self {
        Pattern::new(vec![], vec![], vec![], vec![])
    }

    pub fn rename(&self, f: &mut impl FnMut(&QubitName) -> QubitName) -> Pattern {
        Pattern {
            space: self.space.iter().map(&mut *f).collect(),
            inputs: self.inputs.iter().map(&mut *f).collect(),
            outputs: self.outputs.iter().map(&mut *f).collect(),
            commands: self.commands.iter().map(|c| c.map_qubits(f)).collect(),
            params: self.params.clone(),
        }
    }

    /// Every qubit name mentioned anywhere, in first-appearance order.
    pub fn names(&self) -> Vec<QubitName> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |q: &QubitName| {
            if seen.insert(q.clone()) {
                out.push(q.clone());
            }
        };
        self.space.iter().for_each(&mut push);
        self.inputs.iter().for_each(&mut push);
        self.outputs.iter().for_each(&mut push);
        for c in &self.commands {
            c.operands().into_iter().for_each(&mut push);
            for s in c.signals() {
                s.outcome_qubits().into_iter().for_each(&mut push);
            }
        }
        out
    }

    /// `(V I O commands)`.
    pub fn to_sexpr(&self) -> SExpr {
        let names = |xs: &[QubitName]| SExpr::list(xs.iter().map(|q| SExpr::atom(q.to_string())));
        SExpr::list([
            names(&self.space),
            names(&self.inputs),
            names(&self.outputs),
            sequence_to_sexpr(&self.commands),
        ])
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

fn angle_params<Q>(commands: &[Command<Q>]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in commands {
        if let Command::Measure {
            angle: Angle::Param { name, .. },
            ..
        } = c
        {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
    }
    out
}

fn parse_names(expr: &SExpr, what: &str) -> Result<Vec<QubitName>, SyntaxError> {
    expr.as_list()
        .ok_or_else(|| shape(format!("a list of {what} qubits"), expr))?
        .iter()
        .map(parse_qubit)
        .collect()
}

/// Parses `(V I O commands)`. Well-formedness is left to
/// [`validate_pattern`].
pub fn parse_pattern_def(expr: &SExpr) -> Result<Pattern, SyntaxError> {
    match expr.as_list() {
        Some([v, i, o, a]) => Ok(Pattern::new(
            parse_names(v, "space")?,
            parse_names(i, "input")?,
            parse_names(o, "output")?,
            parse_command_sequence(a, false)?,
        )),
        _ => Err(shape("a pattern (V I O commands)", expr)),
    }
}

pub fn parse_pattern(text: &str) -> Result<Pattern, SyntaxError> {
    parse_pattern_def(&crate::sexpr::parse_sexpr(text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    InputNotInSpace,
    OutputNotInSpace,
    DuplicateName,
    MixedNames,
    QubitNotInSpace,
    SameQubit,
    MeasuredTwice,
    UsedAfterMeasurement,
    OutputMeasured,
    NonOutputUnmeasured,
    SignalFromUnmeasured,
    CommunicationInPattern,
}

impl ViolationKind {
    pub fn description(self) -> &'static str {
        match self {
            ViolationKind::InputNotInSpace => "input not in space",
            ViolationKind::OutputNotInSpace => "output not in space",
            ViolationKind::DuplicateName => "duplicate name",
            ViolationKind::MixedNames => "mixed variable and concrete names",
            ViolationKind::QubitNotInSpace => "qubit not in space",
            ViolationKind::SameQubit => "entanglement with itself",
            ViolationKind::MeasuredTwice => "qubit measured twice",
            ViolationKind::UsedAfterMeasurement => "qubit used after measurement",
            ViolationKind::OutputMeasured => "output qubit measured",
            ViolationKind::NonOutputUnmeasured => "non-output qubit never measured",
            ViolationKind::SignalFromUnmeasured => "signal from unmeasured qubit",
            ViolationKind::CommunicationInPattern => "communication command in pattern",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending command index, if the violation is tied to one.
    pub index: Option<usize>,
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.index {
            Some(i) => write!(f, "command {i}: {}: {}", self.kind.description(), self.message),
            None => write!(f, "{}: {}", self.kind.description(), self.message),
        }
    }
}

/// Checks the definiteness conditions; an empty result means `p` is valid.
pub fn validate_pattern(p: &Pattern) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut report = |index: Option<usize>, kind: ViolationKind, message: String| {
        out.push(Violation { index, kind, message })
    };

    let space: BTreeSet<&QubitName> = p.space.iter().collect();
    for (list, kind, label) in [
        (&p.inputs, ViolationKind::InputNotInSpace, "input"),
        (&p.outputs, ViolationKind::OutputNotInSpace, "output"),
    ] {
        let mut seen = BTreeSet::new();
        for q in list {
            if !space.contains(q) {
                report(None, kind, format!("{label} {q} is not declared in the space"));
            }
            if !seen.insert(q) {
                report(None, ViolationKind::DuplicateName, format!("{q} listed twice as {label}"));
            }
        }
    }
    let mut seen = BTreeSet::new();
    for q in &p.space {
        if !seen.insert(q) {
            report(None, ViolationKind::DuplicateName, format!("{q} listed twice in the space"));
        }
    }
    let names = p.names();
    if names.iter().any(QubitName::is_var) && names.iter().any(|q| !q.is_var()) {
        report(None, ViolationKind::MixedNames, "definition mixes ?-variables and concrete references".into());
    }

    let outputs: BTreeSet<&QubitName> = p.outputs.iter().collect();
    let mut measured: BTreeMap<&QubitName, usize> = BTreeMap::new();
    for (i, c) in p.commands.iter().enumerate() {
        if c.is_communication() {
            report(Some(i), ViolationKind::CommunicationInPattern, c.to_string());
            continue;
        }
        for s in c.signals() {
            for q in s.outcome_qubits() {
                if !measured.contains_key(q) {
                    report(
                        Some(i),
                        ViolationKind::SignalFromUnmeasured,
                        format!("{c} reads the outcome of {q} before it is measured"),
                    );
                }
            }
        }
        if let Command::Entangle(a, b) = c {
            if a == b {
                report(Some(i), ViolationKind::SameQubit, c.to_string());
            }
        }
        for q in c.operands() {
            if !space.contains(q) {
                report(Some(i), ViolationKind::QubitNotInSpace, format!("{c} uses {q}"));
            }
            if let Some(&at) = measured.get(q) {
                let kind = if matches!(c, Command::Measure { .. }) {
                    ViolationKind::MeasuredTwice
                } else {
                    ViolationKind::UsedAfterMeasurement
                };
                report(Some(i), kind, format!("{c} uses {q}, measured by command {at}"));
            }
        }
        if let Command::Measure { qubit, .. } = c {
            if outputs.contains(qubit) {
                report(Some(i), ViolationKind::OutputMeasured, format!("{c} measures output {qubit}"));
            }
            measured.entry(qubit).or_insert(i);
        }
    }
    for q in &p.space {
        if !outputs.contains(q) && !measured.contains_key(q) {
            report(None, ViolationKind::NonOutputUnmeasured, format!("{q} is neither an output nor measured"));
        }
    }
    out
}

/// Monotone source of fresh qubit references.
#[derive(Debug, Clone, Default)]
pub struct FreshRefs {
    next: u32,
}

impl FreshRefs {
    pub fn starting_at(next: u32) -> Self {
        FreshRefs { next }
    }

    pub fn fresh(&mut self) -> QubitRef {
        let r = QubitRef(self.next);
        self.next += 1;
        r
    }

    pub fn peek(&self) -> u32 {
        self.next
    }

    /// Moves past every reference in `used`.
    pub fn skip_past(&mut self, used: impl IntoIterator<Item = QubitRef>) {
        for r in used {
            self.next = self.next.max(r.0 + 1);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledSequence {
    pub space: Vec<QubitRef>,
    pub inputs: Vec<QubitRef>,
    pub outputs: Vec<QubitRef>,
    pub commands: Vec<Command<QubitRef>>,
    /// Variable name (without `?`) to the reference chosen for it.
    pub mapping: BTreeMap<String, QubitRef>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssembleError {
    #[error("fresh reference {0} collides with a concrete reference in the pattern")]
    NameCollision(QubitRef),
    #[error("angle parameter `{0}` has not been instantiated")]
    UninstantiatedParam(String),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// Maps every variable to a fresh reference (in order of first appearance in
/// V, I, O, then the commands); concrete references pass through.
pub fn assemble(p: &Pattern, fresh: &mut FreshRefs) -> Result<AssembledSequence, AssembleError> {
    if let Some(name) = p.params.first() {
        return Err(AssembleError::UninstantiatedParam(name.clone()));
    }
    let names = p.names();
    let concrete: BTreeSet<QubitRef> = names
        .iter()
        .filter_map(|q| match q {
            QubitName::Ref(r) => Some(*r),
            QubitName::Var(_) => None,
        })
        .collect();
    let mut mapping = BTreeMap::new();
    for q in &names {
        if let QubitName::Var(v) = q {
            let r = fresh.fresh();
            if concrete.contains(&r) {
                return Err(AssembleError::NameCollision(r));
            }
            mapping.insert(v.clone(), r);
        }
    }
    let resolve = |q: &QubitName| match q {
        QubitName::Var(v) => mapping[v],
        QubitName::Ref(r) => *r,
    };
    let renamed = p.rename(&mut |q| QubitName::Ref(resolve(q)));
    let refs = |xs: &[QubitName]| xs.iter().map(resolve).collect();
    Ok(AssembledSequence {
        space: refs(&p.space),
        inputs: refs(&p.inputs),
        outputs: refs(&p.outputs),
        commands: concretize(&renamed.commands)?,
        mapping,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("no value given for angle parameter `{0}`")]
    MissingParam(String),
    #[error("`{0}` is not a parameter of this pattern")]
    UnknownParam(String),
}

/// Substitutes radians for every symbolic angle.
pub fn instantiate_params(p: &Pattern, values: &BTreeMap<String, f64>) -> Result<Pattern, ParamError> {
    if let Some(unknown) = values.keys().find(|k| !p.params.contains(k)) {
        return Err(ParamError::UnknownParam(unknown.clone()));
    }
    if let Some(missing) = p.params.iter().find(|k| !values.contains_key(*k)) {
        return Err(ParamError::MissingParam(missing.clone()));
    }
    let commands = p
        .commands
        .iter()
        .map(|c| match c {
            Command::Measure {
                qubit,
                angle: Angle::Param { name, negated },
                s,
                t,
            } => {
                let v = values[name];
                Command::Measure {
                    qubit: qubit.clone(),
                    angle: Angle::value(if *negated { -v } else { v }),
                    s: s.clone(),
                    t: t.clone(),
                }
            }
            other => other.clone(),
        })
        .collect();
    Ok(Pattern {
        commands,
        params: Vec::new(),
        ..p.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::Signal;
    use crate::sexpr::print_sexpr;

    const LITERAL_H: &str = "((?i ?o) (?i) (?o) ((E ?o ?i) (M ?o 0) (X ?o (s ?i))))";
    const H: &str = "((?i ?o) (?i) (?o) ((E ?i ?o) (M ?i 0) (X ?o (s ?i))))";

    fn kinds(p: &Pattern) -> Vec<ViolationKind> {
        validate_pattern(p).into_iter().map(|v| v.kind).collect()
    }

    #[test]
    fn parses_the_hadamard_definition() {
        let p = parse_pattern(LITERAL_H).unwrap();
        assert_eq!(p.space, vec![QubitName::var("i"), QubitName::var("o")]);
        assert_eq!(p.inputs, vec![QubitName::var("i")]);
        assert_eq!(p.outputs, vec![QubitName::var("o")]);
        assert_eq!(p.commands.len(), 3);
        assert_eq!(print_sexpr(&p.to_sexpr()), LITERAL_H);
    }

    #[test]
    fn parses_concrete_cz() {
        let p = parse_pattern("((1 2) (1 2) (1 2) ((E 1 2)))").unwrap();
        assert_eq!(p.inputs, vec![QubitName::Ref(QubitRef(1)), QubitName::Ref(QubitRef(2))]);
        assert!(validate_pattern(&p).is_empty());
    }

    #[test]
    fn wrong_shape() {
        assert!(matches!(parse_pattern("((?a) (?a))"), Err(SyntaxError::Shape { .. })));
        assert!(matches!(parse_pattern("((q) () (q) ())"), Err(SyntaxError::BadQubitName(_))));
    }

    #[test]
    fn corrected_hadamard_is_valid() {
        assert!(validate_pattern(&parse_pattern(H).unwrap()).is_empty());
    }

    #[test]
    fn literal_hadamard_measures_its_output() {
        let k = kinds(&parse_pattern(LITERAL_H).unwrap());
        assert!(k.contains(&ViolationKind::OutputMeasured));
        assert!(k.contains(&ViolationKind::UsedAfterMeasurement));
        assert!(k.contains(&ViolationKind::SignalFromUnmeasured));
    }

    #[test]
    fn broken_corpus_one_per_rule() {
        let cases = [
            ("((?a ?b) (?c) (?b) ((E ?a ?b) (M ?a 0)))", ViolationKind::InputNotInSpace),
            ("((?a) (?a) (?b) ((M ?a 0)))", ViolationKind::OutputNotInSpace),
            ("((?a ?a) (?a) (?a) ())", ViolationKind::DuplicateName),
            ("((?a 1) (?a) (1) ((E ?a 1) (M ?a 0)))", ViolationKind::MixedNames),
            ("((?a) (?a) (?a) ((E ?a ?z)))", ViolationKind::QubitNotInSpace),
            ("((?a ?b) (?a) (?b) ((E ?a ?b) (M ?a 0) (M ?a 0)))", ViolationKind::MeasuredTwice),
            ("((?a ?b) (?a) (?b) ((M ?a 0) (E ?a ?b)))", ViolationKind::UsedAfterMeasurement),
            ("((?a) (?a) (?a) ((M ?a 0)))", ViolationKind::OutputMeasured),
            ("((?a ?b) (?a) (?b) ((E ?a ?b)))", ViolationKind::NonOutputUnmeasured),
            ("((?a ?b) (?a) (?b) ((X ?b (s ?a)) (M ?a 0)))", ViolationKind::SignalFromUnmeasured),
        ];
        for (text, kind) in cases {
            let k = kinds(&parse_pattern(text).unwrap());
            assert!(k.contains(&kind), "{text}: expected {kind:?}, got {k:?}");
        }
        let same = Pattern::from_vars(&["a"], &["a"], &["a"], vec![Command::Entangle(QubitName::var("a"), QubitName::var("a"))]);
        assert!(kinds(&same).contains(&ViolationKind::SameQubit));
        let comm = Pattern::from_vars(
            &["a"],
            &["a"],
            &["a"],
            vec![Command::Send { channel: "c".into(), signal: Signal::Const(true) }],
        );
        assert!(kinds(&comm).contains(&ViolationKind::CommunicationInPattern));
    }

    #[test]
    fn violation_messages_name_the_rule() {
        let v = validate_pattern(&parse_pattern("((?a) (?a) (?a) ((M ?a 0)))").unwrap());
        assert!(v[0].to_string().contains("output qubit measured"));
        assert_eq!(v[0].index, Some(0));
        let v = validate_pattern(&parse_pattern("((?a ?b) (?a) (?b) ((X ?b (s ?a)) (M ?a 0)))").unwrap());
        assert!(v.iter().any(|v| v.to_string().contains("signal from unmeasured qubit")));
    }

    #[test]
    fn assembles_in_declaration_order() {
        let p = parse_pattern(LITERAL_H).unwrap();
        let a = assemble(&p, &mut FreshRefs::default()).unwrap();
        assert_eq!(print_sexpr(&sequence_to_sexpr(&a.commands)), "((E 1 0) (M 1 0) (X 1 (s 0)))");
        assert_eq!(a.inputs, vec![QubitRef(0)]);
        assert_eq!(a.outputs, vec![QubitRef(1)]);
    }

    #[test]
    fn concrete_patterns_pass_through() {
        let p = parse_pattern("((1 2) (1 2) (1 2) ((E 1 2)))").unwrap();
        let a = assemble(&p, &mut FreshRefs::default()).unwrap();
        assert_eq!(a.commands, vec![Command::Entangle(QubitRef(1), QubitRef(2))]);
        assert!(a.mapping.is_empty());
    }

    #[test]
    fn shared_allocator_gives_disjoint_refs() {
        let p = parse_pattern(H).unwrap();
        let mut fresh = FreshRefs::default();
        let a = assemble(&p, &mut fresh).unwrap();
        let b = assemble(&p, &mut fresh).unwrap();
        let sa: BTreeSet<_> = a.space.iter().collect();
        assert!(b.space.iter().all(|r| !sa.contains(r)));
    }

    #[test]
    fn collision_with_concrete_reference() {
        let p = Pattern::new(
            vec![QubitName::var("a"), QubitName::Ref(QubitRef(0))],
            vec![],
            vec![QubitName::var("a"), QubitName::Ref(QubitRef(0))],
            vec![],
        );
        assert_eq!(
            assemble(&p, &mut FreshRefs::default()),
            Err(AssembleError::NameCollision(QubitRef(0)))
        );
    }

    #[test]
    fn parameters() {
        let j = parse_pattern("((?i ?o) (?i) (?o) ((E ?i ?o) (M ?i -alpha) (X ?o (s ?i))))").unwrap();
        assert_eq!(j.params, vec!["alpha".to_string()]);
        assert!(matches!(
            assemble(&j, &mut FreshRefs::default()),
            Err(AssembleError::UninstantiatedParam(_))
        ));
        let zero = instantiate_params(&j, &BTreeMap::from([("alpha".into(), 0.0)])).unwrap();
        assert_eq!(zero, parse_pattern(H).unwrap());
        let pi = instantiate_params(&j, &BTreeMap::from([("alpha".into(), std::f64::consts::PI)])).unwrap();
        assert!(matches!(&pi.commands[1], Command::Measure { angle: Angle::Value(v), .. } if (*v - std::f64::consts::PI).abs() < 1e-12));
        assert_eq!(
            instantiate_params(&j, &BTreeMap::new()),
            Err(ParamError::MissingParam("alpha".into()))
        );
        assert_eq!(
            instantiate_params(&j, &BTreeMap::from([("alpha".into(), 0.0), ("beta".into(), 1.0)])),
            Err(ParamError::UnknownParam("beta".into()))
        );
    }
}
