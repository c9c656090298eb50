// SPDX-License-Identifier: Apache-2.0

//! INTERNAL vs SMT agreement over the small-circuit corpus.

use qpev_core::circuit::{enumerate_mutants, generate_qpe, Circuit, MutationClass};
use qpev_core::property::{
    check, check_well_formed, emit_smtlib, observe, probe_solver, run_solver, PropertyId,
    SolverConfig, SolverOutcome, Status,
    violation,
};

fn corpus(max_n: u32) -> Vec<(String, Circuit)> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for p in [1, 2] {
            let c = generate_qpe(n, p).unwrap();
            out.push((format!("qpe({n},{p})"), c.clone()));
            for (spec, m) in enumerate_mutants(&c, &MutationClass::ALL) {
                out.push((format!("qpe({n},{p}) {spec}"), m));
            }
        }
    }
    out
}

fn solver() -> Option<SolverConfig> {
    let config = SolverConfig::default();
    probe_solver(&config).ok().map(|_| config)
}

#[test]
fn smt_scripts_are_well_formed() {
    for (name, c) in corpus(3) {
        for id in PropertyId::ALL {
            let script = emit_smtlib(&c, id);
            check_well_formed(&script, c.n()).unwrap_or_else(|e| panic!("{name} {id}: {e}"));
        }
    }
}

#[test]
fn smt_agrees_with_internal() {
    let Some(config) = solver() else {
        eprintln!("no SMT solver configured; structural checks only");
        return;
    };
    // The acceptance target sweeps n <= 3; this keeps the unit run short.
    let corpus = corpus(2);
    let workers = std::thread::available_parallelism().map_or(2, |w| w.get());
    let chunk = corpus.len().div_ceil(workers);
    let checked: usize = std::thread::scope(|scope| {
        let handles: Vec<_> = corpus
            .chunks(chunk)
            .map(|part| {
                let config = &config;
                scope.spawn(move || {
                    let mut checked = 0;
                    for (name, c) in part {
                        for id in PropertyId::ALL {
                            agree(name, c, id, config);
                            checked += 1;
                        }
                    }
                    checked
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).sum()
    });
    assert_eq!(checked, corpus.len() * 4);
}

fn agree(name: &str, c: &Circuit, id: PropertyId, config: &SolverConfig) {
    let internal = check(c, id, None).unwrap();
    let run = run_solver(config, &emit_smtlib(c, id));
    match (internal.status, run.outcome) {
        (Status::Pass, SolverOutcome::Unsat) => {}
        (Status::Fail, SolverOutcome::Sat(model)) => {
            // The model must itself be a counterexample.
            let a = model.assignment(c.n());
            let cx = violation(c, id, &a, None)
                .unwrap()
                .unwrap_or_else(|| panic!("{name} {id}: model b={a} is not a violation"));
            assert_ne!(cx.expected, observe(c, id, None, &cx).unwrap());
        }
        (status, outcome) => panic!("{name} {id}: internal {status:?}, solver {outcome:?}"),
    }
}
