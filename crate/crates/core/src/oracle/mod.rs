// SPDX-License-Identifier: Apache-2.0

//! Dense statevector simulator for small circuits.
//!
//! Qubits are ordered `P1..Pn` then `H1..Hp`, with `P1` the most significant
//! bit of the basis index. The unitary `U` is a product of single-qubit phase
//! gates, one rational turn `phi_l` per phase qubit. Measurements are exact:
//! a measurement whose qubit is never touched again is read from the final
//! state, any other one collapses the state into weighted branches.

mod cross;

pub use cross::{cross_validate, ClassDivergence, CrossValidation, Sweep, Witness};

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{Circuit, GateOp};

/// Largest `n + p` accepted by the simulator.
pub const MAX_QUBITS: u32 = 12;
/// Branches lighter than this are discarded.
const NEGLIGIBLE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("n+p={0} exceeds the simulator limit of {MAX_QUBITS} qubits")]
    TooLarge(u32),
    #[error("eigenstate {0:?} is not a basis bit-string of the phase register")]
    Eigenstate(String),
    #[error("precision input {0:?} is not a basis bit-string of the precision register")]
    PrecisionInput(String),
    #[error("unitary has {found} phases, circuit has p={expected}")]
    PhaseCount { expected: u32, found: usize },
    #[error("phase {0} is not a turn in [0, 1)")]
    PhaseRange(String),
}

/// `U = diag phase gates`: phase qubit `l` picks up `e^(2 pi i phi_l)` on `|1>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalUnitary {
    phis: Vec<Ratio<u64>>,
}

impl DiagonalUnitary {
    pub fn new(phis: Vec<Ratio<u64>>) -> Result<Self, OracleError> {
        for phi in &phis {
            if *phi >= Ratio::from_integer(1) {
                return Err(OracleError::PhaseRange(phi.to_string()));
            }
        }
        Ok(DiagonalUnitary { phis })
    }

    /// `phi_1 = num / den`, remaining `p - 1` phases zero.
    pub fn single(num: u64, den: u64, p: u32) -> Result<Self, OracleError> {
        let mut phis = vec![Ratio::from_integer(0); p as usize];
        phis[0] = Ratio::new(num, den);
        DiagonalUnitary::new(phis)
    }

    pub fn phis(&self) -> &[Ratio<u64>] {
        &self.phis
    }

    /// `sum of phi_l over the set bits of the eigenstate, mod 1`.
    pub fn eigenphase(&self, eigenstate: &[bool]) -> Ratio<u64> {
        let sum = self
            .phis
            .iter()
            .zip(eigenstate)
            .filter(|(_, &b)| b)
            .fold(Ratio::from_integer(0), |acc, (phi, _)| acc + phi);
        sum - sum.floor()
    }
}

fn turn(phi: Ratio<u64>) -> f64 {
    (*phi.numer() % *phi.denom()) as f64 / *phi.denom() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: u32,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Basis state `|index>` over `num_qubits` qubits.
    pub fn basis(num_qubits: u32, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        StateVector { num_qubits, amps }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn num_qubits(&self) -> u32 {
        self.num_qubits
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn mask(&self, slot: usize) -> usize {
        1 << (self.num_qubits as usize - 1 - slot)
    }

    pub fn apply_h(&mut self, slot: usize) {
        let bit = self.mask(slot);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = (a + b) * h;
                self.amps[i | bit] = (a - b) * h;
            }
        }
    }

    /// Multiplies every amplitude with all `slots` set by `e^(i angle)`.
    pub fn apply_phase(&mut self, slots: &[usize], angle: f64) {
        let mask = slots.iter().fold(0, |m, &s| m | self.mask(s));
        let phase = Complex64::from_polar(1.0, angle);
        for (i, a) in self.amps.iter_mut().enumerate() {
            if i & mask == mask {
                *a *= phase;
            }
        }
    }

    /// Probability of reading 1 on `slot`.
    pub fn prob_one(&self, slot: usize) -> f64 {
        let bit = self.mask(slot);
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// Projects `slot` onto `value` and renormalizes; returns the branch
    /// probability.
    pub fn collapse(&mut self, slot: usize, value: bool) -> f64 {
        let bit = self.mask(slot);
        let p = if value {
            self.prob_one(slot)
        } else {
            1.0 - self.prob_one(slot)
        };
        let scale = if p > 0.0 { 1.0 / p.sqrt() } else { 0.0 };
        for (i, a) in self.amps.iter_mut().enumerate() {
            if (i & bit != 0) == value {
                *a *= scale;
            } else {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        p
    }
}

/// Exact outcome distribution over precision-register readouts. Each key
/// has one character per precision qubit (`P1` first): the measured bit, or
/// `x` if the qubit is never measured.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Distribution {
    probs: BTreeMap<String, f64>,
}

impl Distribution {
    pub fn prob(&self, outcome: &str) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Most likely outcome (lexicographically first on ties).
    pub fn mode(&self) -> Option<(&str, f64)> {
        self.iter()
            .fold(None, |best: Option<(&str, f64)>, (k, v)| match best {
                Some((_, bv)) if bv >= v => best,
                _ => Some((k, v)),
            })
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn tv_distance(&self, other: &Distribution) -> f64 {
        let keys: std::collections::BTreeSet<&String> =
            self.probs.keys().chain(other.probs.keys()).collect();
        0.5 * keys
            .into_iter()
            .map(|k| (self.prob(k) - other.prob(k)).abs())
            .sum::<f64>()
    }
}

fn parse_bits(s: &str, len: u32) -> Option<Vec<bool>> {
    if s.len() != len as usize {
        return None;
    }
    s.chars()
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Readout {
    Never,
    /// Read from the final state.
    Final,
    /// Collapsed earlier; the branch keeps the bit.
    Recorded,
}

struct Branch {
    weight: f64,
    state: StateVector,
    record: Vec<bool>,
}

/// Runs `c` on `|precision_input>|eigenstate>` and returns the exact
/// distribution of precision-register readouts.
pub fn simulate(
    c: &Circuit,
    u: &DiagonalUnitary,
    eigenstate: &str,
    precision_input: &str,
) -> Result<Distribution, OracleError> {
    let (n, p) = (c.n(), c.p());
    if n + p > MAX_QUBITS {
        return Err(OracleError::TooLarge(n + p));
    }
    if u.phis.len() != p as usize {
        return Err(OracleError::PhaseCount {
            expected: p,
            found: u.phis.len(),
        });
    }
    let eig = parse_bits(eigenstate, p).ok_or_else(|| OracleError::Eigenstate(eigenstate.into()))?;
    let inp = parse_bits(precision_input, n)
        .ok_or_else(|| OracleError::PrecisionInput(precision_input.into()))?;
    let index = inp
        .iter()
        .chain(&eig)
        .fold(0usize, |acc, &b| (acc << 1) | b as usize);

    let mut branches = vec![Branch {
        weight: 1.0,
        state: StateVector::basis(n + p, index),
        record: vec![false; n as usize],
    }];
    let mut readout = vec![Readout::Never; n as usize];
    let ops = c.ops();
    for (i, op) in ops.iter().enumerate() {
        match op {
            GateOp::H { target } => {
                for b in &mut branches {
                    b.state.apply_h(c.slot(*target));
                }
            }
            GateOp::CrkDag { k, control, target } => {
                let angle = -TAU / 2f64.powi(*k as i32);
                for b in &mut branches {
                    b.state.apply_phase(&[c.slot(*control), c.slot(*target)], angle);
                }
            }
            GateOp::Cu {
                control,
                target_map,
            } => {
                for (l, m) in target_map.pairs() {
                    let angle = TAU * turn(u.phis[(l - 1) as usize]);
                    let slots = [c.slot(*control), (n + m - 1) as usize];
                    for b in &mut branches {
                        b.state.apply_phase(&slots, angle);
                    }
                }
            }
            GateOp::Measure { target } => {
                let touched_later = ops[i + 1..].iter().any(|o| o.acts_on(*target));
                if target.is_precision() {
                    readout[(target.index - 1) as usize] = if touched_later {
                        Readout::Recorded
                    } else {
                        Readout::Final
                    };
                }
                if touched_later {
                    branches = branches
                        .into_iter()
                        .flat_map(|b| split(b, c.slot(*target), target.is_precision()))
                        .collect();
                }
            }
        }
    }

    let mut dist = Distribution::default();
    let total = n + p;
    for b in &branches {
        for (idx, amp) in b.state.amps.iter().enumerate() {
            let prob = b.weight * amp.norm_sqr();
            if prob < NEGLIGIBLE {
                continue;
            }
            let key: String = (0..n as usize)
                .map(|j| match readout[j] {
                    Readout::Never => 'x',
                    Readout::Final => {
                        if idx >> (total as usize - 1 - j) & 1 == 1 {
                            '1'
                        } else {
                            '0'
                        }
                    }
                    Readout::Recorded => {
                        if b.record[j] {
                            '1'
                        } else {
                            '0'
                        }
                    }
                })
                .collect();
            *dist.probs.entry(key).or_insert(0.0) += prob;
        }
    }
    Ok(dist)
}

fn split(b: Branch, slot: usize, record: bool) -> Vec<Branch> {
    let mut out = Vec::with_capacity(2);
    for value in [false, true] {
        let mut state = b.state.clone();
        let p = state.collapse(slot, value);
        if b.weight * p < NEGLIGIBLE {
            continue;
        }
        let mut rec = b.record.clone();
        if record {
            rec[slot] = value;
        }
        out.push(Branch {
            weight: b.weight * p,
            state,
            record: rec,
        });
    }
    out
}
