// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use qpev_core::circuit::{
    generate_qpe, mutate, Circuit, GateOp, MutationClass, MutationParams, MutationSpec, QubitRef,
};
use qpev_core::property::{
    verify_all, Engine, PropertyId, ReportStatus, SolverConfig, VerificationReport, VerifyOptions,
};

use crate::CliError;

/// Largest phase register accepted without `--allow-large`.
pub const DEFAULT_PHASE_CAP: u32 = 64;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub n: u32,
    pub phases: Vec<u32>,
    pub engine: Engine,
    pub solver: SolverConfig,
    pub parallel: bool,
    pub row_timeout: Duration,
    pub allow_large: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RowVerdict {
    Pass,
    Fail,
    Incomplete,
    Timeout,
}

impl RowVerdict {
    fn as_str(self) -> &'static str {
        match self {
            RowVerdict::Pass => "PASS",
            RowVerdict::Fail => "FAIL",
            RowVerdict::Incomplete => "INCOMPLETE",
            RowVerdict::Timeout => "TIMEOUT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub phase_qubits: u32,
    pub correct_time_s: f64,
    pub correct_mem_mb: Option<f64>,
    pub error_time_s: f64,
    pub error_mem_mb: Option<f64>,
    pub correct_verdict: RowVerdict,
    pub error_verdict: RowVerdict,
    /// Properties failing on the error circuit.
    pub error_failed: Vec<PropertyId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub n: u32,
    pub engine: Engine,
    /// The injected error, e.g. `CU_WRONG_CTRL@3 P2`.
    pub error: String,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bench report serializes")
    }

    /// `(p, correct verdict, error verdict, failing properties)` per row.
    pub fn verdicts(&self) -> Vec<(u32, RowVerdict, RowVerdict, Vec<PropertyId>)> {
        self.rows
            .iter()
            .map(|r| {
                (
                    r.phase_qubits,
                    r.correct_verdict,
                    r.error_verdict,
                    r.error_failed.clone(),
                )
            })
            .collect()
    }

    /// Correct rows pass and error rows fail P4.
    pub fn expected_pattern(&self) -> bool {
        self.rows.iter().all(|r| {
            r.correct_verdict == RowVerdict::Pass
                && r.error_verdict == RowVerdict::Fail
                && r.error_failed.contains(&PropertyId::P4Phase)
        })
    }

    pub fn table(&self) -> String {
        let mem = |m: Option<f64>| m.map_or("-".to_string(), |v| format!("{v:.1}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>6}  {:>10}  {:>8}  {:<10}  {:>10}  {:>8}  {:<10}  failed",
            "phase", "correct_s", "mem_mb", "correct", "error_s", "mem_mb", "error"
        );
        for r in &self.rows {
            let failed: Vec<&str> = r.error_failed.iter().map(|id| id.short()).collect();
            let _ = writeln!(
                out,
                "{:>6}  {:>10.3}  {:>8}  {:<10}  {:>10.3}  {:>8}  {:<10}  {}",
                r.phase_qubits,
                r.correct_time_s,
                mem(r.correct_mem_mb),
                r.correct_verdict.as_str(),
                r.error_time_s,
                mem(r.error_mem_mb),
                r.error_verdict.as_str(),
                failed.join(",")
            );
        }
        out
    }
}

/// The benchmark error: the first controlled-U takes its control from `P2`
/// instead of `P1`.
pub fn bench_error(c: &Circuit) -> Result<MutationSpec, CliError> {
    let site = c
        .ops()
        .iter()
        .position(|op| matches!(op, GateOp::Cu { .. }))
        .ok_or_else(|| CliError::Usage("circuit has no controlled-U".into()))?;
    if c.n() < 2 {
        return Err(CliError::Usage(
            "bench needs n >= 2 to move a control to another qubit".into(),
        ));
    }
    Ok(MutationSpec::new(
        MutationClass::CuWrongCtrl,
        site,
        MutationParams::Qubit(QubitRef::precision(2)),
    ))
}

struct Measured {
    verdict: RowVerdict,
    time_s: f64,
    mem_mb: Option<f64>,
    failed: Vec<PropertyId>,
}

fn measure(c: &Circuit, opts: &VerifyOptions) -> Result<Measured, CliError> {
    let start = Instant::now();
    let report: VerificationReport = verify_all(c, opts)?;
    let time_s = start.elapsed().as_secs_f64();
    Ok(Measured {
        verdict: match report.status {
            ReportStatus::Pass => RowVerdict::Pass,
            ReportStatus::Fail => RowVerdict::Fail,
            ReportStatus::Incomplete => RowVerdict::Incomplete,
        },
        time_s,
        mem_mb: report
            .peak_memory_bytes
            .map(|b| b as f64 / (1024.0 * 1024.0)),
        failed: report.failed(),
    })
}

fn run_row(n: u32, p: u32, opts: &VerifyOptions) -> Result<BenchRow, CliError> {
    let correct = generate_qpe(n, p).map_err(|e| CliError::Usage(e.to_string()))?;
    let spec = bench_error(&correct)?;
    let wrong = mutate(&correct, &spec).map_err(|e| CliError::Usage(e.to_string()))?;
    let good = measure(&correct, opts)?;
    let bad = measure(&wrong, opts)?;
    Ok(BenchRow {
        phase_qubits: p,
        correct_time_s: good.time_s,
        correct_mem_mb: good.mem_mb,
        error_time_s: bad.time_s,
        error_mem_mb: bad.mem_mb,
        correct_verdict: good.verdict,
        error_verdict: bad.verdict,
        error_failed: bad.failed,
    })
}

fn timed_out(p: u32, limit: Duration) -> BenchRow {
    BenchRow {
        phase_qubits: p,
        correct_time_s: limit.as_secs_f64(),
        correct_mem_mb: None,
        error_time_s: limit.as_secs_f64(),
        error_mem_mb: None,
        correct_verdict: RowVerdict::Timeout,
        error_verdict: RowVerdict::Timeout,
        error_failed: Vec::new(),
    }
}

type RowResult = Result<BenchRow, CliError>;

fn spawn_row(n: u32, p: u32, opts: VerifyOptions) -> mpsc::Receiver<RowResult> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(run_row(n, p, &opts));
    });
    rx
}

fn collect(
    p: u32,
    rx: &mpsc::Receiver<RowResult>,
    deadline: Instant,
    limit: Duration,
) -> RowResult {
    let wait = deadline.saturating_duration_since(Instant::now());
    match rx.recv_timeout(wait) {
        Ok(row) => row,
        Err(_) => {
            eprintln!("warning: row p={p} exceeded {}s", limit.as_secs_f64());
            Ok(timed_out(p, limit))
        }
    }
}

/// Verifies the correct circuit and the benchmark error for each phase
/// size. A row that exceeds the timeout is recorded as `TIMEOUT` and its
/// worker is abandoned.
pub fn cmd_bench(opts: &BenchOptions) -> Result<BenchReport, CliError> {
    if opts.n == 0 {
        return Err(CliError::Usage("-n must be at least 1".into()));
    }
    let mut phases = opts.phases.clone();
    phases.sort_unstable();
    phases.dedup();
    if phases.is_empty() || phases[0] == 0 {
        return Err(CliError::Usage(
            "--phases needs sizes of at least 1".into(),
        ));
    }
    if let Some(&big) = phases.iter().find(|&&p| p > DEFAULT_PHASE_CAP) {
        if !opts.allow_large {
            return Err(CliError::Usage(format!(
                "phase size {big} exceeds {DEFAULT_PHASE_CAP}; pass --allow-large"
            )));
        }
        eprintln!("warning: phase sizes above {DEFAULT_PHASE_CAP} can take a very long time");
    }
    let probe = generate_qpe(opts.n, phases[0]).map_err(|e| CliError::Usage(e.to_string()))?;
    let error = bench_error(&probe)?.to_string();

    let verify = VerifyOptions {
        engine: opts.engine,
        solver: opts.solver.clone(),
        block: None,
        allow_fallback: false,
    };
    let mut rows = Vec::with_capacity(phases.len());
    if opts.parallel {
        let start = Instant::now();
        let pending: Vec<_> = phases
            .iter()
            .map(|&p| (p, spawn_row(opts.n, p, verify.clone())))
            .collect();
        for (p, rx) in &pending {
            rows.push(collect(*p, rx, start + opts.row_timeout, opts.row_timeout)?);
        }
    } else {
        for &p in &phases {
            let rx = spawn_row(opts.n, p, verify.clone());
            rows.push(collect(
                p,
                &rx,
                Instant::now() + opts.row_timeout,
                opts.row_timeout,
            )?);
        }
    }
    Ok(BenchReport {
        n: opts.n,
        engine: opts.engine,
        error,
        rows,
    })
}
