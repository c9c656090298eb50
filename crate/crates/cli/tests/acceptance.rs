// SPDX-License-Identifier: Apache-2.0

//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use qpev_cli::{cmd_bench, cmd_verify, BenchOptions, EngineArg, SolverArgs, VerifyArgs};
use qpev_core::circuit::{
    enumerate_mutants, generate_qpe, serialize_circuit, Circuit, GateFamily, MutationClass,
};
use qpev_core::domain::{interpret, BasisAssignment, InputTemplate};
use qpev_core::oracle::cross_validate;
use qpev_core::property::{
    check, check_well_formed, emit_smtlib, probe_solver, run_solver, verify_all, violation,
    Engine, IqftBlock, PropertyId, SolverConfig, SolverOutcome, Status, Verdict, VerifyOptions,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mapped(family: GateFamily) -> PropertyId {
    match family {
        GateFamily::H => PropertyId::P1Superposition,
        GateFamily::Crk => PropertyId::P2Iqft,
        GateFamily::M => PropertyId::P3Measurement,
        GateFamily::Cu => PropertyId::P4Phase,
    }
}

fn completeness() -> Outcome {
    let start = Instant::now();
    let mut count = 0;
    for n in 1..=6 {
        for p in [1, 2, 4, 8] {
            let c = generate_qpe(n, p).map_err(|e| e.to_string())?;
            let report = verify_all(&c, &VerifyOptions::internal()).map_err(|e| e.to_string())?;
            ensure(report.all_pass(), || format!("qpe({n},{p}) failed {:?}", report.failed()))?;
            count += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{count} circuits all PASS in {:.2}s", elapsed.as_secs_f64()))
}

fn kill_matrix() -> Outcome {
    let mut killed = 0;
    let mut co_failures: BTreeMap<String, usize> = BTreeMap::new();
    for (n, p) in [(3, 1), (4, 2)] {
        let c = generate_qpe(n, p).map_err(|e| e.to_string())?;
        for (spec, m) in enumerate_mutants(&c, &MutationClass::ALL) {
            let report = verify_all(&m, &VerifyOptions::internal()).map_err(|e| e.to_string())?;
            let expected = mapped(spec.class.family());
            ensure(report.property(expected).status == Verdict::Fail, || {
                format!("qpe({n},{p}) {spec}: {} not flagged, failed {:?}", expected.short(), report.failed())
            })?;
            for other in report.failed().into_iter().filter(|&id| id != expected) {
                *co_failures
                    .entry(format!("{}+{}", spec.class, other.short()))
                    .or_default() += 1;
            }
            killed += 1;
        }
    }
    let extra: Vec<String> = co_failures.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    Ok(format!(
        "{killed}/{killed} mutants flagged by the mapped property; co-failures [{}]",
        extra.join(" ")
    ))
}

fn p2_exhaustive() -> Outcome {
    let mut checked = 0u64;
    for n in 1..=6 {
        let c = generate_qpe(n, 1).map_err(|e| e.to_string())?;
        let block = IqftBlock::detect(&c).circuit(&c).map_err(|e| e.to_string())?;
        for a in BasisAssignment::all(n) {
            let trace = interpret(&block, &a, InputTemplate::IqftSym).map_err(|e| e.to_string())?;
            let out = trace.output();
            for j in 1..=n {
                let st = &out[(j - 1) as usize];
                let r = st.register().map(|r| r.value());
                ensure(r == Some(0) && st.q == a.bit(j), || {
                    format!("n={n} b={a} P{j}: q={} r={r:?}", st.q)
                })?;
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} assignments over n=1..6 give r=0, q=b"))
}

fn oracle() -> Outcome {
    let mut lines = Vec::new();
    let mut diverging: BTreeMap<MutationClass, usize> = BTreeMap::new();
    let mut families = Vec::new();
    for (n, p) in [(3, 1), (2, 2)] {
        let cv = cross_validate(n, p).map_err(|e| e.to_string())?;
        ensure(cv.all_exact() && cv.sweeps.len() == 1 << n, || {
            format!("({n},{p}) recovered {}/{}", cv.exact_count(), cv.sweeps.len())
        })?;
        lines.push(format!("({n},{p}) {}/{} exact", cv.exact_count(), cv.sweeps.len()));
        for d in &cv.mutant_divergences {
            *diverging.entry(d.class).or_default() += d.diverging;
        }
        families.push(cv);
    }
    for family in [GateFamily::H, GateFamily::Crk, GateFamily::M, GateFamily::Cu] {
        ensure(families.iter().any(|cv| cv.family_diverges(family)), || {
            format!("no {family:?} mutant diverges")
        })?;
    }
    let silent: Vec<String> = diverging
        .iter()
        .filter(|(_, &count)| count == 0)
        .map(|(class, _)| class.to_string())
        .collect();
    lines.push(format!(
        "every gate family diverges (TV > 0.1); classes with no diverging mutant: [{}]",
        silent.join(" ")
    ));
    Ok(lines.join("; "))
}

fn corpus() -> Vec<(String, Circuit)> {
    let mut out = Vec::new();
    for n in 1..=3 {
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

fn agree(name: &str, c: &Circuit, id: PropertyId, config: &SolverConfig) -> Result<(), String> {
    let internal = check(c, id, None).map_err(|e| e.to_string())?;
    match (internal.status, run_solver(config, &emit_smtlib(c, id)).outcome) {
        (Status::Pass, SolverOutcome::Unsat) => Ok(()),
        (Status::Fail, SolverOutcome::Sat(model)) => {
            let a = model.assignment(c.n());
            match violation(c, id, &a, None) {
                Ok(Some(_)) => Ok(()),
                _ => Err(format!("{name} {id}: model b={a} is not a violation")),
            }
        }
        (status, outcome) => Err(format!("{name} {id}: internal {status:?}, solver {outcome:?}")),
    }
}

fn engines() -> Outcome {
    let config = SolverConfig::default();
    if let Err(why) = probe_solver(&config) {
        for (n, p) in [(2, 1), (3, 1)] {
            let c = generate_qpe(n, p).unwrap();
            for id in PropertyId::ALL {
                check_well_formed(&emit_smtlib(&c, id), n)
                    .map_err(|e| format!("qpe({n},{p}) {id}: {e}"))?;
            }
        }
        return Ok(format!("no solver ({why}); qpe(2,1), qpe(3,1) scripts well-formed"));
    }
    let corpus = corpus();
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get());
    let chunk = corpus.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = corpus
            .chunks(chunk)
            .map(|part| {
                let config = &config;
                scope.spawn(move || {
                    for (name, c) in part {
                        for id in PropertyId::ALL {
                            agree(name, c, id, config)?;
                        }
                    }
                    Ok::<(), String>(())
                })
            })
            .collect();
        handles
            .into_iter()
            .try_for_each(|h| h.join().map_err(|_| "worker panicked".to_string())?)
    })?;
    Ok(format!(
        "{} circuits x 4 properties agree with `{}`",
        corpus.len(),
        config.command
    ))
}

fn bench() -> Outcome {
    let opts = BenchOptions {
        n: 6,
        phases: vec![2, 4, 8, 16, 32, 64],
        engine: Engine::Internal,
        solver: SolverConfig::default(),
        parallel: false,
        row_timeout: Duration::from_secs(30),
        allow_large: false,
    };
    let first = cmd_bench(&opts).map_err(|e| e.to_string())?;
    let second = cmd_bench(&opts).map_err(|e| e.to_string())?;
    ensure(first.rows.len() == 6, || format!("{} rows", first.rows.len()))?;
    ensure(first.expected_pattern(), || format!("unexpected verdicts\n{}", first.table()))?;
    ensure(first.verdicts() == second.verdicts(), || "verdicts differ between runs".into())?;
    let slowest = first
        .rows
        .iter()
        .chain(&second.rows)
        .map(|r| r.correct_time_s + r.error_time_s)
        .fold(0.0, f64::max);
    ensure(slowest < 30.0, || format!("slowest row {slowest:.2}s"))?;
    Ok(format!("6 rows PASS/P4-FAIL twice, slowest row {slowest:.3}s"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let c = generate_qpe(5, 2).unwrap();
    let (spec, mutant) = enumerate_mutants(&c, &[MutationClass::CuWrongCtrl])
        .into_iter()
        .next()
        .unwrap();
    let mut compared = 0;
    for (name, circuit) in [("correct", &c), ("mutant", &mutant)] {
        let path = dir.path().join(format!("{name}.qc"));
        std::fs::write(&path, serialize_circuit(circuit)).map_err(|e| e.to_string())?;
        let run = |tag: &str| {
            let report: PathBuf = dir.path().join(format!("{name}-{tag}.json"));
            let args = VerifyArgs {
                circuit: path.clone(),
                engine: EngineArg::Internal,
                solver: SolverArgs {
                    solver: "z3".into(),
                    solver_timeout: 300,
                },
                report: Some(report.clone()),
                block: None,
                json: false,
            };
            cmd_verify(&args).map_err(|e| e.to_string())?;
            let text = std::fs::read_to_string(&report).map_err(|e| e.to_string())?;
            let mut doc: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| e.to_string())?;
            for p in doc["properties"].as_array_mut().unwrap() {
                p["time_s"] = serde_json::Value::Null;
            }
            Ok::<String, String>(doc.to_string())
        };
        let (a, b) = (run("a")?, run("b")?);
        ensure(a == b, || format!("{name} reports differ:\n{a}\n{b}"))?;
        compared += 1;
    }
    Ok(format!("{compared} files (qpe(5,2), {spec}) give identical reports"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("correct-circuit completeness", completeness),
        ("mutation kill matrix", kill_matrix),
        ("iQFT exhaustiveness", p2_exhaustive),
        ("oracle cross-validation", oracle),
        ("engine equivalence", engines),
        ("benchmark shape", bench),
        ("report determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (verdict, detail) = match run() {
            Ok(detail) => ("PASS", detail),
            Err(detail) => {
                failed += 1;
                ("FAIL", detail)
            }
        };
        println!(
            "criterion {}: {verdict} {name} ({:.2}s) {detail}",
            i + 1,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
