// SPDX-License-Identifier: Apache-2.0

//! The four QPE correctness properties.
//!
//! Every check is built from a per-assignment evaluator ([`violation`]) that
//! folds the abstract interpreter once and returns the first failing
//! observation under the tie-break order: earliest step, then lowest qubit
//! (precision before phase), then component `q, s, r, m`. The checkers differ
//! only in which assignments they sweep.

mod report;
mod smt;
mod solver;

pub use report::{
    verify_all, Engine, PropertyReport, ReportStatus, Verdict, VerificationReport, VerifyOptions,
};
pub use smt::{check_well_formed, emit_smtlib, emit_smtlib_with_block};
pub use solver::{
    probe_solver, run_external_solver, run_solver, SolverConfig, SolverModel, SolverOutcome,
    SolverRun, DEFAULT_SOLVER_TIMEOUT, SOLVER_ENV,
};

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::circuit::{Circuit, CircuitError, GateOp, QubitRef};
use crate::domain::{
    bv_literal, fold, AbstractQubitState, BasisAssignment, DomainError, InputTemplate,
    MeasureCounter, Rotation, RotationBv, SuperpositionCounter, SymbolicRotation,
};

/// Seed for the composite assignments used by the phase property.
const COMPOSITE_SEED: u64 = 0x51ab_0004;
const COMPOSITE_SAMPLES: usize = 2;
/// Sweeps with at least this many assignments are split across threads.
const PARALLEL_THRESHOLD: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PropertyError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("invalid iQFT block: {0}")]
    Block(String),
    #[error("solver command `{0}` is unavailable")]
    SolverUnavailable(String),
    #[error("engines disagree on {id}: {detail}")]
    EngineDisagreement { id: PropertyId, detail: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PropertyId {
    #[serde(rename = "P1_SUPERPOSITION")]
    P1Superposition,
    #[serde(rename = "P2_IQFT")]
    P2Iqft,
    #[serde(rename = "P3_MEASUREMENT")]
    P3Measurement,
    #[serde(rename = "P4_PHASE")]
    P4Phase,
}

impl PropertyId {
    pub const ALL: [PropertyId; 4] = [
        PropertyId::P1Superposition,
        PropertyId::P2Iqft,
        PropertyId::P3Measurement,
        PropertyId::P4Phase,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyId::P1Superposition => "P1_SUPERPOSITION",
            PropertyId::P2Iqft => "P2_IQFT",
            PropertyId::P3Measurement => "P3_MEASUREMENT",
            PropertyId::P4Phase => "P4_PHASE",
        }
    }

    pub fn short(self) -> &'static str {
        &self.name()[..2]
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropertyId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.trim().to_ascii_uppercase();
        PropertyId::ALL
            .into_iter()
            .find(|id| upper == id.name() || upper == id.short())
            .ok_or_else(|| format!("unknown property {s:?} (expected p1..p4)"))
    }
}

/// Where an observation was made: after op `i`, or at circuit output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Op(usize),
    Output,
}

impl<'de> Deserialize<'de> for Step {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) if s == "OUTPUT" => Ok(Step::Output),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|i| Step::Op(i as usize))
                .ok_or_else(|| serde::de::Error::custom("step index must be unsigned")),
            other => Err(serde::de::Error::custom(format!(
                "expected op index or \"OUTPUT\", found {other}"
            ))),
        }
    }
}

impl Serialize for Step {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Step::Op(i) => serializer.serialize_u64(*i as u64),
            Step::Output => serializer.serialize_str("OUTPUT"),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Op(i) => write!(f, "op {i}"),
            Step::Output => f.write_str("output"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Q,
    S,
    R,
    M,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Q => "q",
            Component::S => "s",
            Component::R => "r",
            Component::M => "m",
        })
    }
}

/// Renders one component of an abstract state the way reports show it.
pub fn render_component(st: &AbstractQubitState, comp: Component, max_h: u32) -> String {
    match comp {
        Component::Q => bv_literal(st.q as u64, 1),
        Component::S => st.s.literal(max_h),
        Component::R => st.r.to_string(),
        Component::M => st.m.literal(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub assignment: BasisAssignment,
    pub step: Step,
    pub qubit: QubitRef,
    pub component: Component,
    pub expected: String,
    pub actual: String,
}

impl Counterexample {
    fn key(&self) -> (Step, QubitRef, Component) {
        (self.step, self.qubit, self.component)
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "b={} at {}: {}.{} expected {} got {}",
            self.assignment, self.step, self.qubit, self.component, self.expected, self.actual
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyResult {
    pub id: PropertyId,
    pub status: Status,
    pub counterexample: Option<Counterexample>,
}

impl PropertyResult {
    fn from_violation(id: PropertyId, cex: Option<Counterexample>) -> Self {
        PropertyResult {
            id,
            status: if cex.is_some() {
                Status::Fail
            } else {
                Status::Pass
            },
            counterexample: cex,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Op indices forming the inverse QFT segment checked by the iQFT property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IqftBlock {
    indices: Vec<usize>,
}

impl IqftBlock {
    /// Auto-detection: precision H and inverse rotation ops after both the
    /// leading H layer and the last controlled-U. Measurements and
    /// phase-qubit gates are left out.
    pub fn detect(c: &Circuit) -> IqftBlock {
        let ops = c.ops();
        let mut seen = Vec::new();
        for op in ops {
            match op {
                GateOp::H { target } if target.is_precision() && !seen.contains(target) => {
                    seen.push(*target)
                }
                _ => break,
            }
        }
        let last_cu = ops.iter().rposition(|op| matches!(op, GateOp::Cu { .. }));
        let start = match last_cu {
            Some(i) => (i + 1).max(seen.len()),
            None if seen.len() == c.n() as usize => seen.len(),
            None => 0,
        };
        let indices = (start..ops.len())
            .filter(|&i| match &ops[i] {
                GateOp::H { target } => target.is_precision(),
                GateOp::CrkDag { .. } => true,
                _ => false,
            })
            .collect();
        IqftBlock { indices }
    }

    /// Explicit op range; every op in it belongs to the block.
    pub fn from_range(c: &Circuit, range: Range<usize>) -> Result<IqftBlock, PropertyError> {
        if range.start > range.end || range.end > c.len() {
            return Err(PropertyError::Block(format!(
                "range {}..{} outside 0..{}",
                range.start,
                range.end,
                c.len()
            )));
        }
        if let Some(i) = range
            .clone()
            .find(|&i| matches!(c.ops()[i], GateOp::Cu { .. } | GateOp::Measure { .. }))
        {
            return Err(PropertyError::Block(format!(
                "op {i} ({}) is not an iQFT gate",
                crate::circuit::op_to_string(&c.ops()[i])
            )));
        }
        Ok(IqftBlock {
            indices: range.collect(),
        })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The block as a standalone circuit over the same registers.
    pub fn circuit(&self, c: &Circuit) -> Result<Circuit, PropertyError> {
        let ops = self.indices.iter().map(|&i| c.ops()[i].clone()).collect();
        Ok(Circuit::new(c.n(), c.p(), c.max_h(), ops)?)
    }
}

fn s_lit(v: u32, max_h: u32) -> String {
    SuperpositionCounter(v).literal(max_h)
}

fn cex(
    a: &BasisAssignment,
    step: Step,
    qubit: QubitRef,
    component: Component,
    expected: String,
    actual: String,
) -> Counterexample {
    Counterexample {
        assignment: a.clone(),
        step,
        qubit,
        component,
        expected,
        actual,
    }
}

fn first(found: Vec<Counterexample>) -> Option<Counterexample> {
    found.into_iter().min_by_key(Counterexample::key)
}

fn p1_violation(c: &Circuit, a: &BasisAssignment) -> Result<Option<Counterexample>, PropertyError> {
    let max_h = c.max_h();
    let n = c.n() as usize;
    let mut first_h = vec![false; n];
    let mut found = Vec::new();
    let out = fold(c, a, InputTemplate::Fresh, |i, states| {
        if let GateOp::H { target } = &c.ops()[i] {
            let j = (target.index - 1) as usize;
            if target.is_precision() && !first_h[j] {
                first_h[j] = true;
                if states[j].s != SuperpositionCounter(1) {
                    found.push(cex(
                        a,
                        Step::Op(i),
                        *target,
                        Component::S,
                        s_lit(1, max_h),
                        states[j].s.literal(max_h),
                    ));
                }
            }
        }
        true
    })?;
    let input = InputTemplate::Fresh.initial_states(c.n(), c.p(), a);
    for q in c.qubits() {
        let i = c.slot(q);
        let expected = if q.is_precision() {
            SuperpositionCounter(2)
        } else {
            input[i].s
        };
        if out[i].s != expected {
            found.push(cex(
                a,
                Step::Output,
                q,
                Component::S,
                expected.literal(max_h),
                out[i].s.literal(max_h),
            ));
        }
    }
    Ok(first(found))
}

fn p2_violation(
    block: &Circuit,
    a: &BasisAssignment,
) -> Result<Option<Counterexample>, PropertyError> {
    let n = block.n();
    let out = fold(block, a, InputTemplate::IqftSym, |_, _| true)?;
    for j in 1..=n {
        let st = &out[(j - 1) as usize];
        let qubit = QubitRef::precision(j);
        if st.q != a.bit(j) {
            return Ok(Some(cex(
                a,
                Step::Output,
                qubit,
                Component::Q,
                bv_literal(a.bit(j) as u64, 1),
                bv_literal(st.q as u64, 1),
            )));
        }
        if st.register().is_some_and(|r| !r.is_zero()) {
            return Ok(Some(cex(
                a,
                Step::Output,
                qubit,
                Component::R,
                RotationBv::zero(n).to_string(),
                st.r.to_string(),
            )));
        }
    }
    Ok(None)
}

fn p3_violation(c: &Circuit, a: &BasisAssignment) -> Result<Option<Counterexample>, PropertyError> {
    let layer = c.output_layer_start();
    let mut early = None;
    let out = fold(c, a, InputTemplate::Fresh, |i, states| {
        if i >= layer {
            return true;
        }
        let bad = c
            .qubits()
            .zip(states)
            .find(|(_, st)| st.m != MeasureCounter::UNMEASURED);
        if let Some((q, st)) = bad {
            early = Some(cex(
                a,
                Step::Op(i),
                q,
                Component::M,
                MeasureCounter::UNMEASURED.literal(),
                st.m.literal(),
            ));
            return false;
        }
        true
    })?;
    if early.is_some() {
        return Ok(early);
    }
    for q in c.qubits() {
        let st = &out[c.slot(q)];
        let expected = if q.is_precision() {
            MeasureCounter::ONCE
        } else {
            MeasureCounter::UNMEASURED
        };
        if st.m != expected {
            return Ok(Some(cex(
                a,
                Step::Output,
                q,
                Component::M,
                expected.literal(),
                st.m.literal(),
            )));
        }
    }
    Ok(None)
}

/// `sum_j b_j * 2^(j-1)`: how many times the correct circuit applies `U`.
pub fn expected_phase_count(a: &BasisAssignment) -> u64 {
    (1..=a.len() as u32)
        .filter(|&j| a.bit(j))
        .map(|j| 1u64 << (j - 1))
        .sum()
}

fn p4_violation(c: &Circuit, a: &BasisAssignment) -> Result<Option<Counterexample>, PropertyError> {
    let out = fold(c, a, InputTemplate::Fresh, |_, _| true)?;
    let count = expected_phase_count(a);
    for m in 1..=c.p() {
        let qubit = QubitRef::phase(m);
        let expected = SymbolicRotation::term(c.n(), m, count);
        let actual = &out[c.slot(qubit)].r;
        if *actual != Rotation::Symbolic(expected.clone()) {
            return Ok(Some(cex(
                a,
                Step::Output,
                qubit,
                Component::R,
                expected.to_string(),
                actual.to_string(),
            )));
        }
    }
    Ok(None)
}

/// First violation of `id` under one assignment, or `None` if it holds there.
///
/// `block` is only consulted for the iQFT property; `None` auto-detects.
pub fn violation(
    c: &Circuit,
    id: PropertyId,
    a: &BasisAssignment,
    block: Option<&IqftBlock>,
) -> Result<Option<Counterexample>, PropertyError> {
    match id {
        PropertyId::P1Superposition => p1_violation(c, a),
        PropertyId::P2Iqft => {
            let detected;
            let block = match block {
                Some(b) => b,
                None => {
                    detected = IqftBlock::detect(c);
                    &detected
                }
            };
            p2_violation(&block.circuit(c)?, a)
        }
        PropertyId::P3Measurement => p3_violation(c, a),
        PropertyId::P4Phase => p4_violation(c, a),
    }
}

/// Re-runs the interpreter and reads back the component a counterexample
/// points at.
pub fn observe(
    c: &Circuit,
    id: PropertyId,
    block: Option<&IqftBlock>,
    cx: &Counterexample,
) -> Result<String, PropertyError> {
    let (subject, template) = match id {
        PropertyId::P2Iqft => {
            let b = match block {
                Some(b) => b.clone(),
                None => IqftBlock::detect(c),
            };
            (b.circuit(c)?, InputTemplate::IqftSym)
        }
        _ => (c.clone(), InputTemplate::Fresh),
    };
    let trace = crate::domain::interpret(&subject, &cx.assignment, template)?;
    let states = match cx.step {
        Step::Op(i) => &trace.steps[i].states,
        Step::Output => trace.output(),
    };
    Ok(render_component(
        &states[subject.slot(cx.qubit)],
        cx.component,
        c.max_h(),
    ))
}

fn sweep<I>(
    c: &Circuit,
    id: PropertyId,
    block: Option<&IqftBlock>,
    assignments: I,
) -> Result<PropertyResult, PropertyError>
where
    I: IntoIterator<Item = BasisAssignment>,
{
    for a in assignments {
        if let Some(cx) = violation(c, id, &a, block)? {
            return Ok(PropertyResult::from_violation(id, Some(cx)));
        }
    }
    Ok(PropertyResult::from_violation(id, None))
}

/// Superposition correctness: each precision qubit enters superposition at
/// its first H and leaves it by the output; phase qubits end with the
/// counter they started with. The counter is assignment-independent, so two
/// assignments (all zeros, all ones) suffice.
pub fn check_p1(c: &Circuit) -> Result<PropertyResult, PropertyError> {
    let n = c.n();
    sweep(
        c,
        PropertyId::P1Superposition,
        None,
        [BasisAssignment::zeros(n), BasisAssignment::ones(n)],
    )
}

/// iQFT correctness over all `2^n` assignments; the reported counterexample
/// is the lowest-index failing assignment even when the sweep is parallel.
pub fn check_p2(c: &Circuit, block: &IqftBlock) -> Result<PropertyResult, PropertyError> {
    let sub = block.circuit(c)?;
    let n = c.n();
    let total = 1u64 << n;
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()) as u64;
    let result = if total < PARALLEL_THRESHOLD || workers < 2 {
        first_failure(&sub, 0..total)?
    } else {
        let chunk = total.div_ceil(workers);
        let results: Vec<Result<Option<Counterexample>, PropertyError>> =
            std::thread::scope(|scope| {
                let handles: Vec<_> = (0..workers)
                    .map(|w| {
                        let sub = &sub;
                        let range = (w * chunk).min(total)..((w + 1) * chunk).min(total);
                        scope.spawn(move || first_failure(sub, range))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("iQFT sweep worker panicked"))
                    .collect()
            });
        let mut best: Option<Counterexample> = None;
        for r in results {
            if let Some(cx) = r? {
                if best
                    .as_ref()
                    .is_none_or(|b| cx.assignment.index() < b.assignment.index())
                {
                    best = Some(cx);
                }
            }
        }
        best
    };
    Ok(PropertyResult::from_violation(PropertyId::P2Iqft, result))
}

fn first_failure(sub: &Circuit, range: Range<u64>) -> Result<Option<Counterexample>, PropertyError> {
    let n = sub.n();
    for t in range {
        let a = BasisAssignment::from_index(n, t);
        if let Some(cx) = p2_violation(sub, &a)? {
            return Ok(Some(cx));
        }
    }
    Ok(None)
}

/// Measurement correctness: nothing is measured before the output layer,
/// every precision qubit is measured exactly once, phase qubits never.
pub fn check_p3(c: &Circuit) -> Result<PropertyResult, PropertyError> {
    let n = c.n();
    sweep(
        c,
        PropertyId::P3Measurement,
        None,
        [BasisAssignment::zeros(n), BasisAssignment::ones(n)],
    )
}

/// Assignments swept by the phase property: all zeros, every unit vector
/// `e_j`, then a few seeded composites.
pub fn p4_assignments(n: u32) -> Vec<BasisAssignment> {
    let mut out = vec![BasisAssignment::zeros(n)];
    out.extend((1..=n).map(|j| BasisAssignment::unit(n, j)));
    let mut rng = ChaCha8Rng::seed_from_u64(COMPOSITE_SEED);
    for _ in 0..COMPOSITE_SAMPLES {
        out.push(BasisAssignment::new((0..n).map(|_| rng.gen()).collect()));
    }
    out
}

/// Phase-qubit correctness: phase qubit `l` accumulates exactly
/// `sum_j b_j * 2^(j-1)` copies of `r_l` and nothing else. Accumulation is
/// linear in the control bits, so unit vectors determine it; the composites
/// spot-check additivity.
pub fn check_p4(c: &Circuit) -> Result<PropertyResult, PropertyError> {
    sweep(c, PropertyId::P4Phase, None, p4_assignments(c.n()))
}

/// Runs one property with the internal engine.
pub fn check(
    c: &Circuit,
    id: PropertyId,
    block: Option<&IqftBlock>,
) -> Result<PropertyResult, PropertyError> {
    match id {
        PropertyId::P1Superposition => check_p1(c),
        PropertyId::P2Iqft => match block {
            Some(b) => check_p2(c, b),
            None => check_p2(c, &IqftBlock::detect(c)),
        },
        PropertyId::P3Measurement => check_p3(c),
        PropertyId::P4Phase => check_p4(c),
    }
}
