//! The `run` subcommand: input assignments, execution and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use dmc_core::command::{parse_angle, parse_qubit, Angle, QubitName, QubitRef};
use dmc_core::interp::{product_state, run_pattern, Mode};
use dmc_core::network::{compile_network, init_network, run_network, Discipline, NetworkError, RunOptions};
use dmc_core::pattern::{assemble, instantiate_params, validate_pattern, FreshRefs};
use dmc_core::sexpr::{parse_sexprs, SExpr};
use dmc_core::state::{format_sig, permute, Amplitude, QuantumState};

use crate::source::Target;
use crate::{Failure, Format};

pub struct RunConfig {
    pub mode: Mode,
    /// (qubit name as typed, state literal)
    pub inputs: Vec<(String, String)>,
    pub bits: BTreeMap<String, bool>,
    pub params: BTreeMap<String, f64>,
    pub tol: f64,
    pub format: Format,
    pub discipline: Discipline,
}

/// Parses `0`, `1`, `+`, `-` or an amplitude pair `(a b)`, where each
/// amplitude is a real number or a `(re im)` pair.
pub fn parse_state(text: &str, tol: f64) -> Result<[Amplitude; 2], String> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let amps = match text.trim() {
        "0" => [Amplitude::new(1.0, 0.0), Amplitude::new(0.0, 0.0)],
        "1" => [Amplitude::new(0.0, 0.0), Amplitude::new(1.0, 0.0)],
        "+" => [Amplitude::new(h, 0.0), Amplitude::new(h, 0.0)],
        "-" | "\u{2212}" => [Amplitude::new(h, 0.0), Amplitude::new(-h, 0.0)],
        other => {
            let bad = || format!("bad state literal `{other}`");
            let exprs = parse_sexprs(other).map_err(|_| bad())?;
            let [SExpr::List(items)] = exprs.as_slice() else {
                return Err(bad());
            };
            let number = |e: &SExpr| e.as_atom().and_then(|a| a.parse::<f64>().ok());
            let amp = |e: &SExpr| match e {
                SExpr::Atom(_) => number(e).map(|re| Amplitude::new(re, 0.0)),
                SExpr::List(p) if p.len() == 2 => Some(Amplitude::new(number(&p[0])?, number(&p[1])?)),
                _ => None,
            };
            match items.as_slice() {
                [a, b] => [amp(a).ok_or_else(bad)?, amp(b).ok_or_else(bad)?],
                _ => return Err(bad()),
            }
        }
    };
    let norm = amps[0].norm_sqr() + amps[1].norm_sqr();
    if (norm - 1.0).abs() > tol {
        return Err(format!("state `{text}` has squared norm {norm}, not 1"));
    }
    let scale = norm.sqrt();
    Ok([amps[0] / scale, amps[1] / scale])
}

pub fn parse_bit(text: &str) -> Result<(String, bool), String> {
    let (name, bit) = text
        .split_once('=')
        .ok_or_else(|| format!("expected name=bit, found `{text}`"))?;
    let bit = match bit.trim() {
        "0" => false,
        "1" => true,
        other => return Err(format!("`{other}` is not a bit")),
    };
    Ok((name.trim().to_string(), bit))
}

pub fn parse_param(text: &str) -> Result<(String, f64), String> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| format!("expected name=angle, found `{text}`"))?;
    match parse_angle(&SExpr::atom(value.trim())) {
        Ok(Angle::Value(v)) => Ok((name.trim().to_string(), v)),
        _ => Err(format!("`{value}` is not an angle")),
    }
}

pub fn parse_assignment(text: &str) -> Result<(String, String), String> {
    let (q, state) = text
        .split_once('=')
        .ok_or_else(|| format!("expected qubit=state, found `{text}`"))?;
    Ok((q.trim().to_string(), state.trim().to_string()))
}

/// `?x`, `x` or a number.
fn qubit_name(text: &str) -> Result<QubitName, Failure> {
    parse_qubit(&SExpr::atom(text))
        .or_else(|_| parse_qubit(&SExpr::atom(format!("?{text}"))))
        .map_err(|_| Failure::usage(format!("`{text}` is not a qubit name")))
}

/// Binds every input assignment to a reference via `resolve`, checking
/// that exactly the `expected` inputs are covered.
fn bind_inputs(
    config: &RunConfig,
    expected: &[QubitRef],
    label: &dyn Fn(QubitRef) -> String,
    resolve: &dyn Fn(&str) -> Result<QubitRef, Failure>,
) -> Result<Vec<(QubitRef, [Amplitude; 2])>, Failure> {
    let mut bound: BTreeMap<QubitRef, [Amplitude; 2]> = BTreeMap::new();
    for (name, literal) in &config.inputs {
        let r = resolve(name)?;
        if !expected.contains(&r) {
            return Err(Failure::usage(format!("`{name}` is not an input qubit")));
        }
        let amps = parse_state(literal, config.tol).map_err(Failure::usage)?;
        if bound.insert(r, amps).is_some() {
            return Err(Failure::usage(format!("input `{name}` assigned twice")));
        }
    }
    let missing: Vec<String> = expected.iter().filter(|r| !bound.contains_key(r)).map(|r| label(*r)).collect();
    if !missing.is_empty() {
        return Err(Failure::usage(format!(
            "input qubits without a state: {} (use --input NAME=STATE)",
            missing.join(", ")
        )));
    }
    Ok(expected.iter().map(|r| (*r, bound[r])).collect())
}

fn complex(a: Amplitude) -> String {
    let re = format_sig(a.re);
    if a.im == 0.0 {
        return re;
    }
    let im = format_sig(a.im.abs());
    if a.re == 0.0 {
        return format!("{}{im}i", if a.im < 0.0 { "-" } else { "" });
    }
    format!("{re}{}{im}i", if a.im < 0.0 { "-" } else { "+" })
}

fn bit(b: bool) -> char {
    if b {
        '1'
    } else {
        '0'
    }
}

fn write_state(out: &mut String, quantum: &QuantumState, label: &dyn Fn(QubitRef) -> String) {
    let mut tangles: Vec<_> = quantum.tangles().iter().collect();
    tangles.sort_by_key(|t| t.qubits().iter().min().copied());
    if tangles.is_empty() {
        out.push_str("  state: no live qubits\n");
    }
    for t in tangles {
        let mut order = t.qubits().to_vec();
        order.sort();
        let names: Vec<String> = order.iter().map(|q| label(*q)).collect();
        let amps: Vec<String> = permute(t.amplitudes(), t.qubits(), &order).into_iter().map(complex).collect();
        let _ = writeln!(out, "  state ({}): {}", names.join(" "), amps.join(", "));
    }
}

fn legend(refs: &BTreeMap<QubitRef, String>) -> SExpr {
    SExpr::list(
        std::iter::once(SExpr::atom("qubits"))
            .chain(refs.iter().map(|(r, l)| SExpr::list([SExpr::atom(r.to_string()), SExpr::atom(l.clone())]))),
    )
}

fn mode_name(mode: Mode) -> String {
    match mode {
        Mode::Enumerate => "enumerate".into(),
        Mode::Sample { seed } => format!("sample (seed {seed})"),
    }
}

fn check_total(mode: Mode, total: f64, tol: f64) {
    if mode == Mode::Enumerate && (total - 1.0).abs() > tol {
        log::warn!("branch probabilities sum to {total}");
    }
}

pub fn run_target(target: &Target, config: &RunConfig) -> Result<String, Failure> {
    match target {
        Target::Pattern { name, pattern, .. } => run_pattern_target(name, pattern, config),
        Target::Network(def) => run_network_target(def, config),
    }
}

fn run_pattern_target(name: &str, pattern: &dmc_core::Pattern, config: &RunConfig) -> Result<String, Failure> {
    let violations = validate_pattern(pattern);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| format!("{name}: {v}")).collect();
        return Err(Failure::validation(lines.join("\n")));
    }
    let pattern = &instantiate_params(pattern, &config.params).map_err(|e| Failure::usage(e.to_string()))?;
    let asm = assemble(pattern, &mut FreshRefs::default()).map_err(|e| Failure::validation(e.to_string()))?;
    let labels: BTreeMap<QubitRef, String> = pattern
        .space
        .iter()
        .map(|q| match q {
            QubitName::Var(v) => (asm.mapping[v], q.to_string()),
            QubitName::Ref(r) => (*r, r.to_string()),
        })
        .collect();
    let label = |r: QubitRef| labels.get(&r).cloned().unwrap_or_else(|| r.to_string());
    let resolve = |text: &str| -> Result<QubitRef, Failure> {
        match qubit_name(text)? {
            QubitName::Var(v) => asm
                .mapping
                .get(&v)
                .copied()
                .ok_or_else(|| Failure::usage(format!("`{text}` is not a qubit of {name}"))),
            QubitName::Ref(r) => Ok(r),
        }
    };
    let inputs = bind_inputs(config, &asm.inputs, &label, &resolve)?;
    let joint = product_state(&inputs)
        .and_then(|s| s.reference_full_state(&asm.inputs))
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let run = run_pattern(&asm, &joint, &config.bits, config.mode).map_err(|e| Failure::runtime(e.to_string()))?;
    check_total(config.mode, run.total_probability(), config.tol);

    let mut out = String::new();
    match config.format {
        Format::Sexpr => {
            let _ = writeln!(out, "(run {name} (mode {})", mode_name(config.mode).split(' ').next().unwrap());
            let _ = writeln!(out, "  {}", legend(&labels));
            for b in &run.branches {
                let _ = writeln!(out, "  {}", b.to_sexpr());
            }
            out.push_str(")\n");
        }
        Format::Report => {
            let _ = writeln!(
                out,
                "pattern {name}: {}, {} branch{}",
                mode_name(config.mode),
                run.branches.len(),
                if run.branches.len() == 1 { "" } else { "es" }
            );
            for (i, b) in run.branches.iter().enumerate() {
                let _ = writeln!(out, "branch {}  probability {:.9}", i + 1, b.probability);
                let outcomes: Vec<String> = b.outcomes.iter().map(|(q, v)| format!("{}={}", label(*q), bit(*v))).collect();
                let _ = writeln!(out, "  outcomes: {}", outcomes.join(" "));
                write_state(&mut out, &b.env.quantum, &label);
            }
            if config.mode == Mode::Enumerate {
                let _ = writeln!(out, "total probability {:.9}", run.total_probability());
            }
            if run.pruned > 0 {
                let _ = writeln!(out, "{} outcomes of negligible probability pruned", run.pruned);
            }
        }
    }
    Ok(out)
}

fn init_failure(e: NetworkError) -> Failure {
    match e {
        NetworkError::MissingInput(_) | NetworkError::UnexpectedInput(_) => Failure::usage(e.to_string()),
        _ => Failure::validation(e.to_string()),
    }
}

fn run_network_target(def: &dmc_core::NetworkDef, config: &RunConfig) -> Result<String, Failure> {
    let net = compile_network(def).map_err(|e| Failure::validation(e.to_string()))?;
    let label = |r: QubitRef| net.label(r).unwrap_or_else(|| r.to_string());
    let resolve = |text: &str| -> Result<QubitRef, Failure> {
        let not_found = || Failure::usage(format!("`{text}` is not a qubit of {} (use AGENT.QUBIT)", def.name));
        match text.split_once('.') {
            Some((agent, q)) => net.qubit(agent, qubit_name(q)?).ok_or_else(not_found),
            None => match qubit_name(text)? {
                QubitName::Ref(r) if net.names.values().any(|v| *v == r) => Ok(r),
                _ => Err(not_found()),
            },
        }
    };
    let inputs = bind_inputs(config, &net.inputs, &label, &resolve)?;
    let quantum = product_state(&inputs).map_err(|e| Failure::runtime(e.to_string()))?;
    let state = init_network(&net, quantum, &config.bits).map_err(init_failure)?;
    let options = RunOptions {
        order: None,
        discipline: config.discipline,
    };
    let run = run_network(state, config.mode, &options).map_err(|e| Failure::runtime(e.to_string()))?;
    check_total(config.mode, run.total_probability(), config.tol);

    let mut out = String::new();
    match config.format {
        Format::Sexpr => {
            let labels: BTreeMap<QubitRef, String> = net.names.iter().map(|(k, v)| (*v, k.to_string())).collect();
            let _ = writeln!(out, "(run {} (mode {})", def.name, mode_name(config.mode).split(' ').next().unwrap());
            let _ = writeln!(out, "  {}", legend(&labels));
            for b in &run.branches {
                let _ = writeln!(out, "  {}", b.to_sexpr(&run.agent_names));
            }
            out.push_str(")\n");
        }
        Format::Report => {
            let _ = writeln!(
                out,
                "network {}: {} agents, {}, {} branch{}",
                def.name,
                run.agent_names.len(),
                mode_name(config.mode),
                run.branches.len(),
                if run.branches.len() == 1 { "" } else { "es" }
            );
            for (i, b) in run.branches.iter().enumerate() {
                let _ = writeln!(out, "branch {}  probability {:.9}", i + 1, b.probability);
                let outcomes: Vec<String> = b.outcomes.iter().map(|(q, v)| format!("{}={}", label(*q), bit(*v))).collect();
                let _ = writeln!(out, "  outcomes: {}", outcomes.join(" "));
                write_state(&mut out, &b.env.quantum, &label);
                let mut held: BTreeMap<&str, Vec<String>> = BTreeMap::new();
                for (q, a) in &b.ownership {
                    held.entry(&run.agent_names[*a]).or_default().push(label(*q));
                }
                let owners: Vec<String> = held.iter().map(|(a, qs)| format!("{a} [{}]", qs.join(" "))).collect();
                let _ = writeln!(out, "  held by: {}", owners.join(", "));
                if !b.channels.is_empty() {
                    let _ = writeln!(out, "  channels not emptied: {}", b.channels.keys().cloned().collect::<Vec<_>>().join(" "));
                }
            }
            if config.mode == Mode::Enumerate {
                let _ = writeln!(out, "total probability {:.9}", run.total_probability());
            }
            if run.pruned > 0 {
                let _ = writeln!(out, "{} outcomes of negligible probability pruned", run.pruned);
            }
        }
    }
    Ok(out)
}
