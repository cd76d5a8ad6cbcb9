#![allow(dead_code)]

use std::collections::BTreeMap;

use dmc_core::interp::Mode;
use dmc_core::network::{compile_network, init_network, run_network, CompiledNetwork, NetworkDef, NetworkRun, RunOptions};
use dmc_core::state::{Amplitude, QuantumState};
use dmc_oracle::C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_amps(v: &[C64]) -> Vec<Amplitude> {
    v.iter().map(|a| Amplitude::new(a.re, a.im)).collect()
}

pub fn from_amps(v: &[Amplitude]) -> Vec<C64> {
    v.iter().map(|a| C64::new(a.re, a.im)).collect()
}

/// Compiles and enumerates a network whose inputs are given jointly, in
/// the compiled input order.
pub fn run_net(def: &NetworkDef, input: &[C64], options: &RunOptions, mode: Mode) -> (CompiledNetwork, NetworkRun) {
    let net = compile_network(def).unwrap();
    let mut q = QuantumState::new();
    q.init_tangle(net.inputs.clone(), to_amps(input)).unwrap();
    let state = init_network(&net, q, &BTreeMap::new()).unwrap();
    let run = run_network(state, mode, options).unwrap();
    (net, run)
}

pub fn enumerate(def: &NetworkDef, input: &[C64]) -> (CompiledNetwork, NetworkRun) {
    run_net(def, input, &RunOptions::default(), Mode::Enumerate)
}

pub fn outputs_state(net: &CompiledNetwork, run: &NetworkRun, i: usize) -> Vec<C64> {
    let outs = net.outputs.as_ref().unwrap();
    from_amps(&run.branches[i].state(outs).unwrap())
}
