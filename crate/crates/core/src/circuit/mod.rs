// SPDX-License-Identifier: Apache-2.0

//! Circuit IR for phase estimation circuits.
//!
//! A [`Circuit`] is an ordered list of [`GateOp`]s over `n` precision qubits
//! (`P1..Pn`) and `p` phase qubits (`H1..Hp`). The gate set is fixed to
//! Hadamard, inverse controlled rotation, controlled unitary and
//! measurement. Circuits are validated on construction and immutable
//! afterwards.

mod mutation;
mod qpe;
mod text;

pub use mutation::{
    applicable_sites, enumerate_mutants, mutate, GateFamily, MutationClass, MutationError,
    MutationParams, MutationSpec,
};
pub use qpe::{generate_qpe, MAX_PRECISION_QUBITS};
pub use text::{op_to_string, parse_circuit, parse_op, serialize_circuit, ParseError};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Default `max(H)` for phase estimation: one H on entry, one in the iQFT.
pub const QPE_MAX_H: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Role {
    Precision,
    Phase,
}

/// A 1-based qubit reference. Precision qubits order before phase qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitRef {
    pub role: Role,
    pub index: u32,
}

impl QubitRef {
    pub const fn precision(index: u32) -> Self {
        QubitRef {
            role: Role::Precision,
            index,
        }
    }

    pub const fn phase(index: u32) -> Self {
        QubitRef {
            role: Role::Phase,
            index,
        }
    }

    pub fn is_precision(&self) -> bool {
        self.role == Role::Precision
    }

    pub fn is_phase(&self) -> bool {
        self.role == Role::Phase
    }
}

impl fmt::Display for QubitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role {
            Role::Precision => write!(f, "P{}", self.index),
            Role::Phase => write!(f, "H{}", self.index),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid qubit reference `{0}` (expected P<i> or H<l>)")]
pub struct QubitRefParseError(String);

impl FromStr for QubitRef {
    type Err = QubitRefParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || QubitRefParseError(s.to_string());
        let (role, digits) = match s.as_bytes().first() {
            Some(b'P') => (Role::Precision, &s[1..]),
            Some(b'H') => (Role::Phase, &s[1..]),
            _ => return Err(err()),
        };
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let index = digits.parse().map_err(|_| err())?;
        Ok(QubitRef { role, index })
    }
}

impl Serialize for QubitRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QubitRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Assignment of unitary rotation symbols `r_l` to phase qubits.
///
/// Entry `l` (1-based) names the phase qubit that receives `r_l`. The
/// identity map is stored without allocation; any explicit map equal to the
/// identity is normalized so that equality is structural.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TargetMap {
    Identity(u32),
    Explicit(Vec<u32>),
}

impl TargetMap {
    pub fn identity(p: u32) -> Self {
        TargetMap::Identity(p)
    }

    /// Builds a map from `targets[l-1] = m`; identity maps are normalized.
    pub fn from_targets(targets: Vec<u32>) -> Self {
        let is_identity = targets.iter().enumerate().all(|(i, &m)| m as usize == i + 1);
        if is_identity {
            TargetMap::Identity(targets.len() as u32)
        } else {
            TargetMap::Explicit(targets)
        }
    }

    pub fn len(&self) -> u32 {
        match self {
            TargetMap::Identity(p) => *p,
            TargetMap::Explicit(v) => v.len() as u32,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, TargetMap::Identity(_))
    }

    /// Phase qubit index receiving symbol `l` (both 1-based).
    pub fn target(&self, l: u32) -> u32 {
        match self {
            TargetMap::Identity(_) => l,
            TargetMap::Explicit(v) => v[(l - 1) as usize],
        }
    }

    /// Iterates `(symbol, phase qubit)` pairs in symbol order.
    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (1..=self.len()).map(move |l| (l, self.target(l)))
    }

    pub fn with_target(&self, l: u32, m: u32) -> Self {
        let mut targets: Vec<u32> = self.pairs().map(|(_, t)| t).collect();
        targets[(l - 1) as usize] = m;
        TargetMap::from_targets(targets)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GateOp {
    H {
        target: QubitRef,
    },
    CrkDag {
        k: u32,
        control: QubitRef,
        target: QubitRef,
    },
    /// One application of the unitary, controlled by a precision qubit.
    Cu {
        control: QubitRef,
        target_map: TargetMap,
    },
    Measure {
        target: QubitRef,
    },
}

impl GateOp {
    pub fn family(&self) -> GateFamily {
        match self {
            GateOp::H { .. } => GateFamily::H,
            GateOp::CrkDag { .. } => GateFamily::Crk,
            GateOp::Cu { .. } => GateFamily::Cu,
            GateOp::Measure { .. } => GateFamily::M,
        }
    }

    /// Whether the op reads or writes `q` in a way other than measuring it.
    pub fn acts_on(&self, q: QubitRef) -> bool {
        match self {
            GateOp::H { target } | GateOp::Measure { target } => *target == q,
            GateOp::CrkDag {
                control, target, ..
            } => *control == q || *target == q,
            GateOp::Cu {
                control,
                target_map,
            } => *control == q || (q.is_phase() && target_map.pairs().any(|(_, m)| m == q.index)),
        }
    }

    pub fn is_measure(&self) -> bool {
        matches!(self, GateOp::Measure { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("circuit needs at least one precision qubit")]
    NoPrecisionQubits,
    #[error("max_h must be at least 1, got {0}")]
    InvalidMaxH(u32),
    #[error("qubit {qubit} out of range (n={n}, p={p})")]
    QubitOutOfRange { qubit: QubitRef, n: u32, p: u32 },
    #[error("rotation index k={0} is below 2")]
    InvalidK(u32),
    #[error("{gate} {what} must be a precision qubit, got {qubit}")]
    WrongRole {
        gate: &'static str,
        what: &'static str,
        qubit: QubitRef,
    },
    #[error("control and target are both {0}")]
    ControlIsTarget(QubitRef),
    #[error("target map has {found} entries, expected {expected}")]
    MapSize { expected: u32, found: u32 },
    #[error("target map sends r{symbol} to phase qubit {target}, which is out of range (p={p})")]
    MapTargetOutOfRange { symbol: u32, target: u32, p: u32 },
    #[error("unsupported circuit size: {0}")]
    Size(String),
}

/// A validated, immutable circuit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Circuit {
    n: u32,
    p: u32,
    max_h: u32,
    ops: Vec<GateOp>,
}

impl Circuit {
    pub fn new(n: u32, p: u32, max_h: u32, ops: Vec<GateOp>) -> Result<Self, CircuitError> {
        if n == 0 {
            return Err(CircuitError::NoPrecisionQubits);
        }
        if max_h == 0 {
            return Err(CircuitError::InvalidMaxH(max_h));
        }
        for op in &ops {
            validate_op(op, n, p)?;
        }
        Ok(Circuit { n, p, max_h, ops })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn max_h(&self) -> u32 {
        self.max_h
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn num_qubits(&self) -> u32 {
        self.n + self.p
    }

    /// Position of `q` in the flat state vector: precision first, then phase.
    pub fn slot(&self, q: QubitRef) -> usize {
        match q.role {
            Role::Precision => (q.index - 1) as usize,
            Role::Phase => (self.n + q.index - 1) as usize,
        }
    }

    pub fn qubits(&self) -> impl Iterator<Item = QubitRef> {
        let (n, p) = (self.n, self.p);
        (1..=n)
            .map(QubitRef::precision)
            .chain((1..=p).map(QubitRef::phase))
    }

    /// Start of the trailing run of measurements (the output layer).
    pub fn output_layer_start(&self) -> usize {
        let trailing = self.ops.iter().rev().take_while(|op| op.is_measure()).count();
        self.ops.len() - trailing
    }

    pub fn cu_count(&self) -> usize {
        self.ops
            .iter()
            .filter(|op| matches!(op, GateOp::Cu { .. }))
            .count()
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let text = serialize_circuit(self);
        let hash = Sha256::digest(text.as_bytes());
        let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
        format!("sha256:{hex}")
    }

    pub(crate) fn with_ops(&self, ops: Vec<GateOp>) -> Result<Circuit, CircuitError> {
        Circuit::new(self.n, self.p, self.max_h, ops)
    }
}

pub(crate) fn validate_op(op: &GateOp, n: u32, p: u32) -> Result<(), CircuitError> {
    let in_range = |q: QubitRef| {
        let limit = match q.role {
            Role::Precision => n,
            Role::Phase => p,
        };
        if q.index == 0 || q.index > limit {
            Err(CircuitError::QubitOutOfRange { qubit: q, n, p })
        } else {
            Ok(())
        }
    };
    let precision = |gate, what, q: QubitRef| {
        if q.is_precision() {
            Ok(())
        } else {
            Err(CircuitError::WrongRole {
                gate,
                what,
                qubit: q,
            })
        }
    };
    match op {
        GateOp::H { target } | GateOp::Measure { target } => in_range(*target),
        GateOp::CrkDag {
            k,
            control,
            target,
        } => {
            if *k < 2 {
                return Err(CircuitError::InvalidK(*k));
            }
            precision("crkdag", "control", *control)?;
            precision("crkdag", "target", *target)?;
            in_range(*control)?;
            in_range(*target)?;
            if control == target {
                return Err(CircuitError::ControlIsTarget(*control));
            }
            Ok(())
        }
        GateOp::Cu {
            control,
            target_map,
        } => {
            precision("cu", "control", *control)?;
            in_range(*control)?;
            if target_map.len() != p {
                return Err(CircuitError::MapSize {
                    expected: p,
                    found: target_map.len(),
                });
            }
            for (symbol, target) in target_map.pairs() {
                if target == 0 || target > p {
                    return Err(CircuitError::MapTargetOutOfRange { symbol, target, p });
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_ref_text() {
        assert_eq!("P3".parse::<QubitRef>().unwrap(), QubitRef::precision(3));
        assert_eq!("H12".parse::<QubitRef>().unwrap(), QubitRef::phase(12));
        assert!("Q1".parse::<QubitRef>().is_err());
        assert!("P".parse::<QubitRef>().is_err());
        assert!("P-1".parse::<QubitRef>().is_err());
        assert_eq!(QubitRef::phase(2).to_string(), "H2");
    }

    #[test]
    fn precision_orders_before_phase() {
        assert!(QubitRef::precision(9) < QubitRef::phase(1));
    }

    #[test]
    fn explicit_identity_map_normalizes() {
        assert_eq!(TargetMap::from_targets(vec![1, 2, 3]), TargetMap::identity(3));
        let m = TargetMap::identity(3).with_target(2, 1);
        assert_eq!(m, TargetMap::Explicit(vec![1, 1, 3]));
        assert_eq!(m.with_target(2, 2), TargetMap::identity(3));
    }

    #[test]
    fn validation_rejects_bad_ops() {
        let h = |q| GateOp::H { target: q };
        assert!(matches!(
            Circuit::new(2, 1, 2, vec![h(QubitRef::precision(3))]),
            Err(CircuitError::QubitOutOfRange { .. })
        ));
        assert!(matches!(
            Circuit::new(2, 1, 2, vec![h(QubitRef::phase(0))]),
            Err(CircuitError::QubitOutOfRange { .. })
        ));
        let crk = GateOp::CrkDag {
            k: 1,
            control: QubitRef::precision(2),
            target: QubitRef::precision(1),
        };
        assert_eq!(
            Circuit::new(2, 1, 2, vec![crk]),
            Err(CircuitError::InvalidK(1))
        );
        let cu = GateOp::Cu {
            control: QubitRef::phase(1),
            target_map: TargetMap::identity(1),
        };
        assert!(matches!(
            Circuit::new(2, 1, 2, vec![cu]),
            Err(CircuitError::WrongRole { .. })
        ));
        let cu = GateOp::Cu {
            control: QubitRef::precision(1),
            target_map: TargetMap::identity(2),
        };
        assert!(matches!(
            Circuit::new(2, 1, 2, vec![cu]),
            Err(CircuitError::MapSize { .. })
        ));
        assert_eq!(Circuit::new(0, 1, 2, vec![]), Err(CircuitError::NoPrecisionQubits));
        assert_eq!(Circuit::new(1, 1, 0, vec![]), Err(CircuitError::InvalidMaxH(0)));
    }

    #[test]
    fn output_layer() {
        let c = generate_qpe(3, 1).unwrap();
        assert_eq!(c.output_layer_start(), c.len() - 3);
        assert_eq!(c.cu_count(), 7);
    }
}
