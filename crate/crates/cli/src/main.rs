//! `dqvm`: validate, compile, run and draw patterns and networks.

mod graph;
mod run;
mod source;

use std::collections::BTreeMap;
use std::io::Write as _;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dmc_core::interp::Mode;
use dmc_core::library::{self, Arity, ProtocolKind};
use dmc_core::network::{compile_network, Discipline};
use dmc_core::pattern::validate_pattern;
use dmc_core::program::Definition;
use dmc_core::sexpr::SExpr;

use run::{parse_assignment, parse_bit, parse_param, run_target, RunConfig};
use source::{load_target, read_program, Target};

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Report,
    Sexpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Enumerate,
    Sample,
}

#[derive(Parser, Debug)]
#[command(name = "dqvm", version, about = "Virtual machine for distributed measurement-based quantum programs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args, Debug)]
struct TargetArgs {
    /// Definition file, or builtin:NAME[:ARG]
    source: String,
    /// Definition to use (default: the file's last definition)
    name: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check every definition in a file
    Validate {
        source: String,
    },
    /// Print a pattern, or a network's per-agent command sequences
    Compile {
        #[command(flatten)]
        target: TargetArgs,
    },
    /// Execute a pattern or network
    Run {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, value_enum, default_value_t = ModeArg::Enumerate)]
        mode: ModeArg,
        /// Random seed (required with --mode sample)
        #[arg(long)]
        seed: Option<u64>,
        /// Input state, QUBIT=STATE with STATE one of 0, 1, +, - or "(a b)"
        #[arg(long = "input", value_name = "QUBIT=STATE")]
        inputs: Vec<String>,
        /// Classical input, NAME=BIT
        #[arg(long = "cinput", value_name = "NAME=BIT")]
        cinputs: Vec<String>,
        /// Value of an angle parameter, NAME=ANGLE
        #[arg(long = "param", value_name = "NAME=ANGLE")]
        params: Vec<String>,
        /// Numerical tolerance
        #[arg(long, env = "DQVM_TOL", default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = Format::Report)]
        format: Format,
        /// Senders wait until their message is received
        #[arg(long)]
        rendezvous: bool,
    },
    /// Print the composition or network structure as Graphviz text
    Graph {
        #[command(flatten)]
        target: TargetArgs,
    },
    /// List the protocol library
    ListBuiltins,
}

fn validate(source: &str) -> Result<String, Failure> {
    if source.starts_with("builtin:") {
        let problems = match load_target(source, None)? {
            Target::Pattern { pattern, .. } => validate_pattern(&pattern).iter().map(|v| v.to_string()).collect(),
            Target::Network(def) => compile_network(&def).err().map(|e| e.to_string()).into_iter().collect(),
        };
        return report_problems(source, 1, problems);
    }
    let program = read_program(source)?;
    let mut problems = Vec::new();
    for (k, def) in program.definitions.iter().enumerate() {
        let at = format!("form {} `{}`", k + 1, def.name());
        match def {
            Definition::Pattern { pattern, .. } => {
                problems.extend(validate_pattern(pattern).iter().map(|v| format!("{at}: {v}")));
            }
            Definition::Network(net) => {
                if let Err(e) = compile_network(net) {
                    problems.push(format!("{at}: {e}"));
                }
            }
            Definition::Agent(_) => {}
        }
    }
    report_problems(source, program.definitions.len(), problems)
}

fn report_problems(source: &str, checked: usize, problems: Vec<String>) -> Result<String, Failure> {
    if problems.is_empty() {
        return Ok(format!(
            "{source}: {checked} definition{} valid\n",
            if checked == 1 { "" } else { "s" }
        ));
    }
    let lines: Vec<String> = problems.iter().map(|p| format!("{source}: {p}")).collect();
    Err(Failure::validation(lines.join("\n")))
}

/// One top-level item per line.
fn layout(e: &SExpr) -> String {
    match e {
        SExpr::List(items) if !items.is_empty() => {
            let mut head = vec![items[0].to_string()];
            let mut rest = &items[1..];
            if let Some(SExpr::Atom(name)) = rest.first() {
                head.push(name.clone());
                rest = &rest[1..];
            }
            let mut s = format!("({}", head.join(" "));
            for item in rest {
                s.push_str("\n  ");
                s.push_str(&item.to_string());
            }
            s.push_str(")\n");
            s
        }
        other => format!("{other}\n"),
    }
}

fn compile(target: &Target) -> Result<String, Failure> {
    match target {
        Target::Pattern { name, pattern, .. } => {
            let violations = validate_pattern(pattern);
            if !violations.is_empty() {
                let lines: Vec<String> = violations.iter().map(|v| format!("{name}: {v}")).collect();
                return Err(Failure::validation(lines.join("\n")));
            }
            let mut items = vec![SExpr::atom("pattern"), SExpr::atom(name.clone())];
            if let SExpr::List(parts) = pattern.to_sexpr() {
                items.extend(parts);
            }
            Ok(layout(&SExpr::List(items)))
        }
        Target::Network(def) => {
            let net = compile_network(def).map_err(|e| Failure::validation(e.to_string()))?;
            Ok(layout(&net.to_sexpr()))
        }
    }
}

fn list_builtins() -> String {
    let mut s = String::new();
    for e in library::registry() {
        let kind = match e.kind {
            ProtocolKind::Pattern => "pattern",
            ProtocolKind::Network => "network",
        };
        let arg = match e.arity {
            Arity::None => String::new(),
            Arity::Size { min, default } => format!(":N (N >= {min}, default {default})"),
            Arity::Angle => ":ANGLE (default 0)".to_string(),
        };
        s.push_str(&format!("{:<8} {:<8} builtin:{}{}\n    {}\n", e.name, kind, e.name, arg, e.summary));
    }
    s
}

fn execute(cli: Cli) -> Result<String, Failure> {
    match cli.command {
        Cmd::Validate { source } => validate(&source),
        Cmd::Compile { target } => compile(&load_target(&target.source, target.name.as_deref())?),
        Cmd::Graph { target } => Ok(graph::graph(&load_target(&target.source, target.name.as_deref())?)),
        Cmd::ListBuiltins => Ok(list_builtins()),
        Cmd::Run {
            target,
            mode,
            seed,
            inputs,
            cinputs,
            params,
            tol,
            format,
            rendezvous,
        } => {
            let mode = match (mode, seed) {
                (ModeArg::Enumerate, _) => Mode::Enumerate,
                (ModeArg::Sample, Some(seed)) => Mode::Sample { seed },
                (ModeArg::Sample, None) => return Err(Failure::usage("--mode sample requires --seed")),
            };
            if !(tol.is_finite() && tol > 0.0) {
                return Err(Failure::usage(format!("--tol must be a positive number, got {tol}")));
            }
            let inputs = inputs
                .iter()
                .map(|a| parse_assignment(a))
                .collect::<Result<Vec<_>, _>>()
                .map_err(Failure::usage)?;
            let bits = cinputs
                .iter()
                .map(|b| parse_bit(b))
                .collect::<Result<BTreeMap<_, _>, _>>()
                .map_err(Failure::usage)?;
            let params = params
                .iter()
                .map(|p| parse_param(p))
                .collect::<Result<BTreeMap<_, _>, _>>()
                .map_err(Failure::usage)?;
            let config = RunConfig {
                mode,
                inputs,
                bits,
                params,
                tol,
                format,
                discipline: if rendezvous { Discipline::Rendezvous } else { Discipline::Buffered },
            };
            let target = load_target(&target.source, target.name.as_deref())?;
            run_target(&target, &config)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(out) => {
            // a closed pipe (e.g. `| head`) is not an error
            let _ = std::io::stdout().lock().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(f) if f.code == 1 => {
            eprintln!("{}", f.message);
            ExitCode::from(1)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
