//! Loading a target: a definition from a file or a `builtin:` entry.

use std::fs;

use dmc_core::compose::CompositionExpr;
use dmc_core::library::{self, Built};
use dmc_core::network::NetworkDef;
use dmc_core::pattern::Pattern;
use dmc_core::program::{parse_program, Definition, Program};

use crate::Failure;

/// Something the tool can compile, run or draw.
#[derive(Debug, Clone)]
pub enum Target {
    Pattern {
        name: String,
        pattern: Pattern,
        composition: Option<CompositionExpr>,
    },
    Network(NetworkDef),
}

pub fn read_program(path: &str) -> Result<Program, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("{path}: {e}")))?;
    parse_program(&text).map_err(|e| Failure::validation(format!("{path}: {e}")))
}

fn from_builtin(spec: &str) -> Result<Target, Failure> {
    let (name, arg) = library::parse_builtin(spec).expect("caller checked the prefix");
    let (entry, _, built) = library::build(name, arg).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(match built {
        Built::Pattern(pattern) => Target::Pattern {
            name: spec.trim_start_matches("builtin:").to_string(),
            pattern,
            // the CX entry is drawn from its three-node composition
            composition: (entry.name == "CX").then(library::cx_explicit),
        },
        Built::Network(net) => Target::Network(net),
    })
}

/// Resolves `source` (a file or `builtin:NAME[:ARG]`) and an optional
/// definition name; without a name the file's last definition is used.
pub fn load_target(source: &str, name: Option<&str>) -> Result<Target, Failure> {
    if source.starts_with("builtin:") {
        if name.is_some() {
            return Err(Failure::usage("a builtin target takes no definition name"));
        }
        return from_builtin(source);
    }
    let program = read_program(source)?;
    let def = match name {
        Some(n) => program
            .get(n)
            .ok_or_else(|| Failure::usage(format!("{source}: no definition named `{n}`")))?,
        None => program
            .definitions
            .last()
            .ok_or_else(|| Failure::usage(format!("{source}: no definitions")))?,
    };
    log::debug!("target `{}` ({})", def.name(), def.kind());
    match def {
        Definition::Pattern {
            name,
            pattern,
            composition,
        } => Ok(Target::Pattern {
            name: name.clone(),
            pattern: pattern.clone(),
            composition: composition.clone(),
        }),
        Definition::Network(n) => Ok(Target::Network(n.clone())),
        Definition::Agent(a) => Err(Failure::usage(format!(
            "`{}` is an agent; agents only run inside a network",
            a.name
        ))),
    }
}
