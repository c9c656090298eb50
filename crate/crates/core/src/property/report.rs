// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::ops::Range;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::smt::emit_smtlib_with_block;
use super::solver::{probe_solver, run_solver, SolverConfig, SolverOutcome};
use super::{check, violation, Counterexample, IqftBlock, PropertyError, PropertyId, Status};
use crate::circuit::Circuit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Engine {
    Internal,
    Smt,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Internal => "INTERNAL",
            Engine::Smt => "SMT",
        })
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "internal" => Ok(Engine::Internal),
            "smt" => Ok(Engine::Smt),
            _ => Err(format!("unknown engine {s:?} (expected internal or smt)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub engine: Engine,
    pub solver: SolverConfig,
    /// Explicit iQFT op range; auto-detected when `None`.
    pub block: Option<Range<usize>>,
    /// With the SMT engine, fall back to the internal engine (with a note)
    /// when the solver is missing instead of returning an error.
    pub allow_fallback: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            engine: Engine::Internal,
            solver: SolverConfig::default(),
            block: None,
            allow_fallback: true,
        }
    }
}

impl VerifyOptions {
    pub fn internal() -> Self {
        VerifyOptions::default()
    }

    pub fn smt(solver: SolverConfig) -> Self {
        VerifyOptions {
            engine: Engine::Smt,
            solver,
            ..VerifyOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReportStatus {
    Pass,
    Fail,
    /// No property failed but at least one could not be decided.
    Incomplete,
}

/// Per-property outcome in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl From<Status> for Verdict {
    fn from(s: Status) -> Self {
        match s {
            Status::Pass => Verdict::Pass,
            Status::Fail => Verdict::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub id: PropertyId,
    pub status: Verdict,
    pub time_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub circuit: String,
    pub engine: Engine,
    pub status: ReportStatus,
    pub properties: Vec<PropertyReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_memory_bytes: Option<u64>,
}

impl VerificationReport {
    pub fn property(&self, id: PropertyId) -> &PropertyReport {
        self.properties
            .iter()
            .find(|p| p.id == id)
            .expect("reports list every property")
    }

    pub fn failed(&self) -> Vec<PropertyId> {
        self.properties
            .iter()
            .filter(|p| p.status == Verdict::Fail)
            .map(|p| p.id)
            .collect()
    }

    pub fn all_pass(&self) -> bool {
        self.status == ReportStatus::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with timing and memory fields zeroed, for run-to-run comparison.
    pub fn to_json_without_timing(&self) -> String {
        let mut copy = self.clone();
        copy.peak_memory_bytes = None;
        for p in &mut copy.properties {
            p.time_s = 0.0;
        }
        copy.to_json()
    }

    /// One line per property, for terminal output.
    pub fn summary(&self) -> String {
        let mut out = format!("circuit {} [{}]\n", self.circuit, self.engine);
        for p in &self.properties {
            let status = match p.status {
                Verdict::Pass => "PASS".to_string(),
                Verdict::Fail => "FAIL".to_string(),
                Verdict::Skipped => format!("SKIP ({})", p.skip_reason.as_deref().unwrap_or("")),
            };
            out.push_str(&format!("  {:<17} {:<6} {:>9.3}s", p.id.name(), status, p.time_s));
            if let Some(cx) = &p.counterexample {
                out.push_str(&format!("  {cx}"));
            }
            out.push('\n');
        }
        for note in &self.notes {
            out.push_str(&format!("  note: {note}\n"));
        }
        let verdict = match self.status {
            ReportStatus::Pass => "PASS",
            ReportStatus::Fail => "FAIL",
            ReportStatus::Incomplete => "INCOMPLETE",
        };
        out.push_str(&format!("result: {verdict}\n"));
        out
    }
}

fn aggregate(properties: &[PropertyReport]) -> ReportStatus {
    if properties.iter().any(|p| p.status == Verdict::Fail) {
        ReportStatus::Fail
    } else if properties.iter().all(|p| p.status == Verdict::Pass) {
        ReportStatus::Pass
    } else {
        ReportStatus::Incomplete
    }
}

fn smt_property(
    c: &Circuit,
    id: PropertyId,
    block: Option<&IqftBlock>,
    solver: &SolverConfig,
    peak: &mut Option<u64>,
) -> Result<PropertyReport, PropertyError> {
    let start = Instant::now();
    let script = emit_smtlib_with_block(c, id, block)?;
    let run = run_solver(solver, &script);
    if let Some(rss) = run.peak_rss_bytes {
        *peak = Some(peak.map_or(rss, |p: u64| p.max(rss)));
    }
    let mut report = PropertyReport {
        id,
        status: Verdict::Skipped,
        time_s: 0.0,
        counterexample: None,
        skip_reason: None,
    };
    match run.outcome {
        SolverOutcome::Unsat => report.status = Verdict::Pass,
        SolverOutcome::Sat(model) => {
            // Localize the failure by replaying the model's assignment.
            let a = model.assignment(c.n());
            match violation(c, id, &a, block)? {
                Some(cx) => {
                    report.status = Verdict::Fail;
                    report.counterexample = Some(cx);
                }
                None => {
                    return Err(PropertyError::EngineDisagreement {
                        id,
                        detail: format!("solver model b={a} does not violate the property"),
                    })
                }
            }
        }
        SolverOutcome::Unknown { reason, .. } => report.skip_reason = Some(reason),
        SolverOutcome::Unavailable(why) => report.skip_reason = Some(why),
    }
    report.time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Checks all four properties and aggregates the verdicts.
pub fn verify_all(c: &Circuit, opts: &VerifyOptions) -> Result<VerificationReport, PropertyError> {
    let block = match &opts.block {
        Some(range) => Some(IqftBlock::from_range(c, range.clone())?),
        None => None,
    };
    let mut notes = Vec::new();
    let mut engine = opts.engine;
    if engine == Engine::Smt {
        if let Err(why) = probe_solver(&opts.solver) {
            if !opts.allow_fallback {
                return Err(PropertyError::SolverUnavailable(opts.solver.command.clone()));
            }
            notes.push(format!(
                "solver `{}` unavailable ({why}); fell back to the internal engine",
                opts.solver.command
            ));
            engine = Engine::Internal;
        }
    }

    let mut peak = None;
    let mut properties = Vec::with_capacity(4);
    for id in PropertyId::ALL {
        let report = match engine {
            Engine::Internal => {
                let start = Instant::now();
                let r = check(c, id, block.as_ref())?;
                PropertyReport {
                    id,
                    status: r.status.into(),
                    time_s: start.elapsed().as_secs_f64(),
                    counterexample: r.counterexample,
                    skip_reason: None,
                }
            }
            Engine::Smt => smt_property(c, id, block.as_ref(), &opts.solver, &mut peak)?,
        };
        properties.push(report);
    }
    Ok(VerificationReport {
        circuit: c.digest(),
        engine,
        status: aggregate(&properties),
        properties,
        notes,
        peak_memory_bytes: peak,
    })
}
