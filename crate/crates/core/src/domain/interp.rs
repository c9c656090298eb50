// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use super::{
    apply_crk_dag, apply_cu_in_place, apply_h, apply_measure, AbstractQubitState, DomainError,
    Rotation,
};
use crate::circuit::{Circuit, GateOp, QubitRef};

/// Concrete values `b_1..b_n` of the symbolic precision basis bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisAssignment {
    bits: Vec<bool>,
}

impl BasisAssignment {
    pub fn new(bits: Vec<bool>) -> Self {
        BasisAssignment { bits }
    }

    pub fn zeros(n: u32) -> Self {
        BasisAssignment {
            bits: vec![false; n as usize],
        }
    }

    pub fn ones(n: u32) -> Self {
        BasisAssignment {
            bits: vec![true; n as usize],
        }
    }

    /// `e_j`: only `b_j` set.
    pub fn unit(n: u32, j: u32) -> Self {
        let mut a = BasisAssignment::zeros(n);
        a.bits[(j - 1) as usize] = true;
        a
    }

    /// Assignment whose bit string `b_1 b_2 ... b_n` reads as `index` with
    /// `b_1` most significant.
    pub fn from_index(n: u32, index: u64) -> Self {
        let bits = (1..=n).map(|j| (index >> (n - j)) & 1 == 1).collect();
        BasisAssignment { bits }
    }

    pub fn index(&self) -> u64 {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    /// Every assignment of `n` bits in index order.
    pub fn all(n: u32) -> impl Iterator<Item = BasisAssignment> {
        (0..1u64 << n).map(move |t| BasisAssignment::from_index(n, t))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// `b_j`, 1-based.
    pub fn bit(&self, j: u32) -> bool {
        self.bits[(j - 1) as usize]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl fmt::Display for BasisAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl std::str::FromStr for BasisAssignment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|ch| match ch {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid basis bit {other:?}")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BasisAssignment::new)
    }
}

impl Serialize for BasisAssignment {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BasisAssignment {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How initial abstract states are derived from an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InputTemplate {
    /// `q_j = b_j, s = 0, r = 0, m = 00`; phase qubits in `|0>` with no rotation.
    Fresh,
    /// State entering an inverse QFT block: `q_j = b_j, s = 1`, and
    /// `r_j` holds the bit pattern `b_j b_(j+1) ... b_n 0...0`.
    IqftSym,
}

impl InputTemplate {
    pub fn name(self) -> &'static str {
        match self {
            InputTemplate::Fresh => "FRESH",
            InputTemplate::IqftSym => "IQFT_SYM",
        }
    }

    pub fn initial_states(self, n: u32, p: u32, a: &BasisAssignment) -> Vec<AbstractQubitState> {
        let mut states = Vec::with_capacity((n + p) as usize);
        for j in 1..=n {
            let b = a.bit(j);
            let st = match self {
                InputTemplate::Fresh => AbstractQubitState::precision(b, 0, 0, n),
                InputTemplate::IqftSym => {
                    AbstractQubitState::precision(b, 1, iqft_pattern(a, j), n)
                }
            };
            states.push(st);
        }
        states.extend((0..p).map(|_| AbstractQubitState::phase(n)));
        states
    }
}

/// `sum_{t=j..n} b_t * 2^(n-1-(t-j))`.
pub(crate) fn iqft_pattern(a: &BasisAssignment, j: u32) -> u64 {
    let n = a.len() as u32;
    (j..=n)
        .filter(|&t| a.bit(t))
        .map(|t| 1u64 << (n - 1 - (t - j)))
        .sum()
}

fn apply_op(
    c: &Circuit,
    states: &mut [AbstractQubitState],
    op: &GateOp,
) -> Result<(), DomainError> {
    let n = c.n();
    match op {
        GateOp::H { target } => {
            let i = c.slot(*target);
            states[i] = apply_h(&states[i], c.max_h(), n);
        }
        GateOp::CrkDag { k, control, target } => {
            let (ci, ti) = (c.slot(*control), c.slot(*target));
            states[ti] = apply_crk_dag(&states[ci], &states[ti], *k, n)?;
        }
        GateOp::Cu {
            control,
            target_map,
        } => {
            let ctrl_q = states[c.slot(*control)].q;
            apply_cu_in_place(ctrl_q, &mut states[n as usize..], target_map)?;
        }
        GateOp::Measure { target } => {
            let i = c.slot(*target);
            states[i] = apply_measure(&states[i]);
        }
    }
    Ok(())
}

/// Folds the transfer functions over `c` without storing a trace.
///
/// `visit` sees the op index and the state vector after that op; returning
/// `false` stops the fold early. Returns the last state vector reached.
pub fn fold<F>(
    c: &Circuit,
    a: &BasisAssignment,
    template: InputTemplate,
    mut visit: F,
) -> Result<Vec<AbstractQubitState>, DomainError>
where
    F: FnMut(usize, &[AbstractQubitState]) -> bool,
{
    if a.len() != c.n() as usize {
        return Err(DomainError::AssignmentLength {
            expected: c.n(),
            found: a.len(),
        });
    }
    let mut states = template.initial_states(c.n(), c.p(), a);
    for (i, op) in c.ops().iter().enumerate() {
        apply_op(c, &mut states, op)?;
        if !visit(i, &states) {
            break;
        }
    }
    Ok(states)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceStep {
    pub op_index: usize,
    pub states: Vec<AbstractQubitState>,
}

/// Input state vector plus the full state vector after every op.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub n: u32,
    pub p: u32,
    pub max_h: u32,
    pub input: Vec<AbstractQubitState>,
    pub steps: Vec<TraceStep>,
}

impl Trace {
    pub fn output(&self) -> &[AbstractQubitState] {
        self.steps.last().map_or(&self.input, |s| &s.states)
    }

    pub fn state(&self, step: usize, q: QubitRef) -> &AbstractQubitState {
        &self.steps[step].states[slot(self.n, q)]
    }

    /// Debug dump: one array of `{op, qubit, q, s, r, m}` rows per step,
    /// the first holding the input states with `op = "input"`.
    pub fn to_json(&self, c: &Circuit) -> Value {
        let mut out = vec![self.rows(Value::from("input"), &self.input)];
        for step in &self.steps {
            let op = crate::circuit::op_to_string(&c.ops()[step.op_index]);
            let label = Value::from(format!("{}: {}", step.op_index, op));
            out.push(self.rows(label, &step.states));
        }
        Value::Array(out)
    }

    fn rows(&self, op: Value, states: &[AbstractQubitState]) -> Value {
        let qubits = (1..=self.n)
            .map(QubitRef::precision)
            .chain((1..=self.p).map(QubitRef::phase));
        let rows: Vec<Value> = qubits
            .zip(states)
            .map(|(qr, st)| {
                let r = match &st.r {
                    Rotation::Register(r) => r.binary(),
                    Rotation::Symbolic(sym) => sym.to_string(),
                };
                json!({
                    "op": op,
                    "qubit": qr.to_string(),
                    "q": st.q as u8,
                    "s": st.s.literal(self.max_h),
                    "r": r,
                    "m": st.m.literal(),
                })
            })
            .collect();
        Value::Array(rows)
    }
}

fn slot(n: u32, q: QubitRef) -> usize {
    if q.is_precision() {
        (q.index - 1) as usize
    } else {
        (n + q.index - 1) as usize
    }
}

/// Runs `c` from the template's input states, recording every step.
pub fn interpret(
    c: &Circuit,
    a: &BasisAssignment,
    template: InputTemplate,
) -> Result<Trace, DomainError> {
    let mut steps = Vec::with_capacity(c.len());
    fold(c, a, template, |i, states| {
        steps.push(TraceStep {
            op_index: i,
            states: states.to_vec(),
        });
        true
    })?;
    Ok(Trace {
        n: c.n(),
        p: c.p(),
        max_h: c.max_h(),
        input: template.initial_states(c.n(), c.p(), a),
        steps,
    })
}
