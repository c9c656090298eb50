// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qpev_core::circuit::{generate_qpe, parse_circuit};
use qpev_core::property::{probe_solver, run_external_solver, SolverConfig, SolverOutcome};

fn qpev(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpev"))
        .args(args)
        .env_remove("QPEV_SOLVER")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generated(dir: &Path, n: u32, p: u32) -> PathBuf {
    let path = dir.join(format!("qpe{n}_{p}.qc"));
    let out = qpev(&["generate", "-n", &n.to_string(), "-p", &p.to_string(), "-o", s(&path)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    path
}

fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs").join(name);
    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&value).unwrap()
}

fn assert_valid(schema: &jsonschema::JSONSchema, doc: &serde_json::Value) {
    if let Err(errors) = schema.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| e.to_string()).collect();
        panic!("schema violations: {msgs:?}\n{doc:#}");
    }
}

fn solver() -> Option<String> {
    let config = SolverConfig::default();
    probe_solver(&config).ok().map(|_| config.command)
}

#[test]
fn generate_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = generated(dir.path(), 3, 1);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(parse_circuit(&text).unwrap(), generate_qpe(3, 1).unwrap());
    let piped = qpev(&["generate", "-n", "3", "-p", "1"]);
    assert_eq!(stdout(&piped), text);
}

#[test]
fn generate_refuses_overwrite_and_bad_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let path = generated(dir.path(), 2, 1);
    let again = qpev(&["generate", "-n", "2", "-p", "2", "-o", s(&path)]);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--force"));
    let forced = qpev(&["generate", "-n", "2", "-p", "2", "-o", s(&path), "--force"]);
    assert_eq!(code(&forced), 0);
    assert_eq!(code(&qpev(&["generate", "-n", "0", "-p", "1"])), 2);
    assert_eq!(code(&qpev(&["generate", "-p", "1"])), 2);
}

#[test]
fn large_generate_has_expected_gate_count() {
    let dir = tempfile::tempdir().unwrap();
    let path = generated(dir.path(), 6, 64);
    let text = std::fs::read_to_string(path).unwrap();
    // header + n H + (2^n - 1) CU + n(n-1)/2 CRk + n H + n measure
    let gates = text.lines().count() - 1;
    assert_eq!(gates, 6 + 63 + 15 + 6 + 6);
    assert_eq!(text.lines().filter(|l| l.starts_with("cu ")).count(), 63);
}

#[test]
fn verify_exit_codes_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let correct = generated(dir.path(), 6, 2);
    let report = dir.path().join("ok.json");
    let out = qpev(&["verify", s(&correct), "--report", s(&report)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).matches("PASS").count(), 5);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let schema = schema("report.schema.json");
    assert_valid(&schema, &doc);

    let mutant = dir.path().join("wrong.qc");
    let out = qpev(&[
        "mutate", s(&correct), "--class", "CU_WRONG_CTRL", "--site", "6", "--qubit", "P2", "-o",
        s(&mutant),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = qpev(&["verify", s(&mutant), "--json"]);
    assert_eq!(code(&out), 1);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid(&schema, &doc);
    assert_eq!(doc["properties"][3]["id"], "P4_PHASE");
    assert_eq!(doc["properties"][3]["status"], "FAIL");
    assert_eq!(doc["properties"][3]["counterexample"]["component"], "r");
}

#[test]
fn verify_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.qc");
    std::fs::write(&bad, "qpe n=2 p=1 maxh=2\nh P7\n").unwrap();
    let out = qpev(&["verify", s(&bad)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.qc"));
    assert_eq!(code(&qpev(&["verify", s(&dir.path().join("missing.qc"))])), 2);
    let good = generated(dir.path(), 2, 1);
    assert_eq!(code(&qpev(&["verify", s(&good), "--block", "x"])), 2);
    assert_eq!(code(&qpev(&["verify", s(&good), "--block", "0..3"])), 2);
}

#[test]
fn smt_engine_without_solver_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let c = generated(dir.path(), 2, 1);
    let out = qpev(&["verify", s(&c), "--engine", "smt", "--solver", "no-such-solver-xyz"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("no-such-solver-xyz"));
}

#[test]
fn mutate_lists_and_rejects_sites() {
    let dir = tempfile::tempdir().unwrap();
    let c = generated(dir.path(), 3, 1);
    let out = qpev(&["mutate", s(&c), "--class", "crk_drop"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("11 12 14"), "{}", stdout(&out));
    let out = qpev(&["mutate", s(&c), "--class", "CRK_DROP", "--site", "4"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("11, 12, 14"));
    let out = qpev(&["mutate", s(&c), "--class", "NOPE", "--site", "4"]);
    assert_eq!(code(&out), 2);

    let m = dir.path().join("m.qc");
    let out = qpev(&["mutate", s(&c), "--class", "CU_DROP", "--site", "4", "-o", s(&m)]);
    assert_eq!(code(&out), 0);
    let out = qpev(&["verify", s(&m)]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("P4_PHASE          FAIL"));
}

#[test]
fn mutate_explicit_params() {
    let dir = tempfile::tempdir().unwrap();
    let c = generated(dir.path(), 3, 2);
    let cases: [(&[&str], &str); 4] = [
        (&["--class", "CRK_WRONG_K", "--site", "12", "--k", "4"], "P2_IQFT"),
        (&["--class", "CU_WRONG_TGT", "--site", "3", "--map", "1:H1,2:H1"], "P4_PHASE"),
        (&["--class", "CU_EXTRA", "--site", "5", "--gate", "cu c=P3"], "P4_PHASE"),
        (&["--class", "H_PHASE_ADD", "--site", "1", "--qubit", "H2"], "P1_SUPERPOSITION"),
    ];
    for (i, (flags, property)) in cases.iter().enumerate() {
        let m = dir.path().join(format!("m{i}.qc"));
        let mut args = vec!["mutate", s(&c)];
        args.extend_from_slice(flags);
        args.extend_from_slice(&["-o", s(&m)]);
        let out = qpev(&args);
        assert_eq!(code(&out), 0, "{flags:?}: {}", stderr(&out));
        let out = qpev(&["verify", s(&m)]);
        assert_eq!(code(&out), 1, "{flags:?}");
        assert!(stdout(&out).contains(&format!("{property:<17} FAIL")), "{flags:?}");
    }
    let out = qpev(&["mutate", s(&c), "--class", "CU_WRONG_CTRL", "--site", "3", "--k", "2", "--qubit", "P2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn export_smt_single_and_all() {
    let dir = tempfile::tempdir().unwrap();
    let c = generated(dir.path(), 3, 1);
    let out = qpev(&["export-smt", s(&c), "--property", "p2"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("(set-logic QF_BV)"));
    let all = dir.path().join("smt");
    let out = qpev(&["export-smt", s(&c), "--property", "all", "-o", s(&all)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut names: Vec<String> = std::fs::read_dir(&all)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["P1_SUPERPOSITION.smt2", "P2_IQFT.smt2", "P3_MEASUREMENT.smt2", "P4_PHASE.smt2"]
    );
    assert_eq!(code(&qpev(&["export-smt", s(&c), "--property", "all"])), 2);
    assert_eq!(code(&qpev(&["export-smt", s(&c), "--property", "p9"])), 2);
}

#[test]
fn exported_scripts_solve() {
    let Some(cmd) = solver() else {
        eprintln!("no SMT solver configured; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let c = generated(dir.path(), 3, 1);
    let p2 = dir.path().join("p2.smt2");
    assert_eq!(code(&qpev(&["export-smt", s(&c), "--property", "p2", "-o", s(&p2)])), 0);
    let script = std::fs::read_to_string(&p2).unwrap();
    assert_eq!(run_external_solver(&cmd, &script), SolverOutcome::Unsat);

    let m = dir.path().join("m.qc");
    assert_eq!(code(&qpev(&["mutate", s(&c), "--class", "CU_DROP", "--site", "4", "-o", s(&m)])), 0);
    let out = qpev(&["export-smt", s(&m), "--property", "p4"]);
    match run_external_solver(&cmd, &stdout(&out)) {
        SolverOutcome::Sat(model) => assert_eq!(model.assignment(3).to_string().len(), 3),
        other => panic!("expected SAT, got {other:?}"),
    }
}

#[test]
fn trace_and_cross_validate_emit_json() {
    let dir = tempfile::tempdir().unwrap();
    let c = generated(dir.path(), 2, 1);
    let out = qpev(&["trace", s(&c), "--assignment", "10"]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let steps = doc.as_array().unwrap();
    assert_eq!(steps.len(), 1 + generate_qpe(2, 1).unwrap().len());
    assert_eq!(steps[0][0]["op"], "input");
    assert_eq!(code(&qpev(&["trace", s(&c), "--assignment", "1"])), 2);

    let out = qpev(&["cross-validate", "-n", "2", "-p", "1"]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["sweeps"].as_array().unwrap().len(), 4);
}

#[test]
fn bench_report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("bench.json");
    let out = qpev(&["bench", "-n", "4", "--phases", "1,2,4", "--report", s(&report)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 4);
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_valid(&schema("bench.schema.json"), &doc);
    let out = qpev(&["bench", "-n", "4", "--phases", "128"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--allow-large"));
}
