mod common;

use common::*;
use std::collections::BTreeMap;

use dmc_core::interp::Mode;
use dmc_core::library::{es_network, sc_compose_es, sc_network, sc_open_network, tp_network};
use dmc_core::network::{
    compile_network, compose_networks, init_network, run_network, Discipline, NetworkDef, NetworkError, RunOptions,
};
use dmc_core::state::QuantumState;
use dmc_oracle::{c, equal_up_to_phase, states, C64};

#[test]
fn teleportation_is_identity() {
    let mut r = rng(1);
    for _ in 0..3 {
        let psi = states::random(1, &mut r);
        let (net, run) = enumerate(&tp_network(), &psi);
        assert_eq!(run.branches.len(), 4);
        for i in 0..4 {
            assert!((run.branches[i].probability - 0.25).abs() < TOL);
            assert!(equal_up_to_phase(&outputs_state(&net, &run, i), &psi, TOL));
        }
    }
}

#[test]
fn swapping_gives_diagonal_ghz() {
    for n in [1, 2, 3] {
        let (net, run) = enumerate(&es_network(n), &[dmc_oracle::c(1.0, 0.0)]);
        let expected = states::ghz_diagonal(n + 1);
        assert!((run.total_probability() - 1.0).abs() < TOL);
        for i in 0..run.branches.len() {
            assert!(equal_up_to_phase(&outputs_state(&net, &run, i), &expected, TOL), "n={n} branch {i}");
        }
    }
}

#[test]
fn share_control_copies_control() {
    let mut r = rng(2);
    for n in [1, 2, 3] {
        let psi = states::random(1, &mut r);
        for def in [sc_network(n).unwrap(), sc_compose_es(n)] {
            let (net, run) = enumerate(&def, &psi);
            let expected = states::cat(n + 1, psi[0], psi[1]);
            assert!((run.total_probability() - 1.0).abs() < TOL);
            for i in 0..run.branches.len() {
                assert!(equal_up_to_phase(&outputs_state(&net, &run, i), &expected, TOL), "{} branch {i}", def.name);
            }
        }
    }
}

fn library_networks() -> Vec<(NetworkDef, Vec<C64>)> {
    let mut r = rng(3);
    let mut out = vec![(tp_network(), states::random(1, &mut r))];
    for n in [1, 2, 3] {
        out.push((es_network(n), vec![c(1.0, 0.0)]));
        out.push((sc_network(n).unwrap(), states::random(1, &mut r)));
        out.push((sc_compose_es(n), states::random(1, &mut r)));
    }
    out
}

#[test]
fn channels_are_empty_at_the_end() {
    for (def, input) in library_networks() {
        let (_, run) = enumerate(&def, &input);
        for b in &run.branches {
            assert!(b.channels.is_empty(), "{}: {:?}", def.name, b.channels);
        }
    }
}

#[test]
fn rendezvous_matches_buffered() {
    let rendezvous = RunOptions {
        discipline: Discipline::Rendezvous,
        ..RunOptions::default()
    };
    for (def, input) in library_networks() {
        let (net, buffered) = enumerate(&def, &input);
        let (_, blocking) = run_net(&def, &input, &rendezvous, Mode::Enumerate);
        assert_eq!(buffered.branches.len(), blocking.branches.len(), "{}", def.name);
        for (i, a) in buffered.branches.iter().enumerate() {
            let j = blocking.branches.iter().position(|b| b.outcomes == a.outcomes).expect("same outcomes");
            assert!((a.probability - blocking.branches[j].probability).abs() < TOL);
            let (x, y) = (outputs_state(&net, &buffered, i), outputs_state(&net, &blocking, j));
            assert!(equal_up_to_phase(&x, &y, TOL), "{} branch {i}", def.name);
        }
    }
}

#[test]
fn sampling_is_reproducible() {
    let psi = states::random(1, &mut rng(4));
    let def = es_network(2);
    for seed in [0, 7, 99] {
        let (_, a) = run_net(&def, &[c(1.0, 0.0)], &RunOptions::default(), Mode::Sample { seed });
        let (_, b) = run_net(&def, &[c(1.0, 0.0)], &RunOptions::default(), Mode::Sample { seed });
        assert_eq!(a.branches[0].outcomes, b.branches[0].outcomes);
        assert_eq!(a.branches[0].probability, b.branches[0].probability);
    }
    let (net, run) = run_net(&tp_network(), &psi, &RunOptions::default(), Mode::Sample { seed: 5 });
    assert_eq!(run.branches.len(), 1);
    assert!(equal_up_to_phase(&outputs_state(&net, &run, 0), &psi, TOL));
}

#[test]
fn bad_schedule_is_rejected() {
    let net = compile_network(&tp_network()).unwrap();
    let mut q = QuantumState::new();
    q.init_tangle(net.inputs.clone(), to_amps(&states::plus())).unwrap();
    let state = init_network(&net, q, &BTreeMap::new()).unwrap();
    let options = RunOptions {
        order: Some(vec![0, 0]),
        ..RunOptions::default()
    };
    assert!(matches!(run_network(state, Mode::Enumerate, &options), Err(NetworkError::BadSchedule(_))));
}

#[test]
fn composing_unknown_agents_fails() {
    let es = es_network(2);
    let sc = sc_open_network(2);
    let pairs = vec![("Nobody".to_string(), "L".to_string())];
    assert!(matches!(compose_networks(&es, &sc, &pairs, &[]), Err(NetworkError::PairMismatch(_))));
    let twice = vec![("L".to_string(), "L".to_string()), ("L".to_string(), "A1".to_string())];
    assert!(matches!(compose_networks(&es, &sc, &twice, &[]), Err(NetworkError::PairMismatch(_))));
}
