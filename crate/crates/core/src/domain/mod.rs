// SPDX-License-Identifier: Apache-2.0

//! Bit-vector abstraction of qubits and the four gate transfer functions.
//!
//! An abstract qubit is the tuple `<q, s, r, m>`:
//!
//! * `q` - basis bit,
//! * `s` - superposition counter (number of H applications, saturating),
//! * `r` - rotation: an `n`-bit modular register on precision qubits, a
//!   formal sum of unitary rotation symbols on phase qubits,
//! * `m` - 2-bit measurement counter.

mod interp;

pub use interp::{fold, interpret, BasisAssignment, InputTemplate, Trace, TraceStep};

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::circuit::TargetMap;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("rotation index k={k} is below 2")]
    KOutOfRange { k: u32 },
    #[error("{0} expects a precision-role qubit state")]
    ExpectedPrecision(&'static str),
    #[error("{0} expects a phase-role qubit state")]
    ExpectedPhase(&'static str),
    #[error("target map sends r{symbol} to phase qubit {target}, but only {p} phase states exist")]
    MapOutOfRange { symbol: u32, target: u32, p: u32 },
    #[error("basis assignment has {found} bits, circuit has n={expected}")]
    AssignmentLength { expected: u32, found: usize },
}

/// Width of the superposition counter for a given `max(H)`.
///
/// Three bits at minimum so the QPE literals `3b000..3b010` type-check,
/// and wide enough to hold the saturation value `max_h + 2`.
pub fn superposition_width(max_h: u32) -> u32 {
    let needed = u32::BITS - (max_h + 2).leading_zeros();
    needed.max(3)
}

fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Renders `value` as a sized binary literal, e.g. `3b010`.
pub fn bv_literal(value: u64, width: u32) -> String {
    format!("{width}b{value:0w$b}", w = width as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SuperpositionCounter(pub u32);

impl SuperpositionCounter {
    pub fn is_odd(self) -> bool {
        self.0 % 2 == 1
    }

    pub fn literal(self, max_h: u32) -> String {
        bv_literal(self.0 as u64, superposition_width(max_h))
    }
}

/// `n`-bit rotation register; a fraction `value / 2^n` of a full turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RotationBv {
    value: u64,
    width: u32,
}

impl RotationBv {
    pub fn new(value: u64, width: u32) -> Self {
        RotationBv {
            value: value & mask(width),
            width,
        }
    }

    pub fn zero(width: u32) -> Self {
        RotationBv { value: 0, width }
    }

    pub fn value(self) -> u64 {
        self.value
    }

    pub fn width(self) -> u32 {
        self.width
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    /// Half a turn: `nb10...0`.
    pub fn half_turn(width: u32) -> u64 {
        1u64 << (width - 1)
    }

    pub fn msb(self) -> bool {
        (self.value >> (self.width - 1)) & 1 == 1
    }

    pub fn add_mod(self, amount: u64) -> Self {
        RotationBv::new(self.value.wrapping_add(amount), self.width)
    }

    pub fn sub_mod(self, amount: u64) -> Self {
        RotationBv::new(self.value.wrapping_sub(amount), self.width)
    }

    pub fn binary(self) -> String {
        format!("{:0w$b}", self.value, w = self.width as usize)
    }
}

impl fmt::Display for RotationBv {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&bv_literal(self.value, self.width))
    }
}

/// Formal sum `offset + sum_l coeffs[l] * r_l` over unitary rotation symbols.
///
/// `offset` only moves when an H gate lands on a phase qubit, which never
/// happens in a correct circuit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicRotation {
    offset: RotationBv,
    coeffs: BTreeMap<u32, u64>,
}

impl SymbolicRotation {
    pub fn zero(width: u32) -> Self {
        SymbolicRotation {
            offset: RotationBv::zero(width),
            coeffs: BTreeMap::new(),
        }
    }

    /// `coeff * r_symbol` (zero coefficient gives the zero rotation).
    pub fn term(width: u32, symbol: u32, coeff: u64) -> Self {
        let mut r = SymbolicRotation::zero(width);
        if coeff > 0 {
            r.coeffs.insert(symbol, coeff);
        }
        r
    }

    pub fn coeffs(&self) -> &BTreeMap<u32, u64> {
        &self.coeffs
    }

    pub fn coeff(&self, symbol: u32) -> u64 {
        self.coeffs.get(&symbol).copied().unwrap_or(0)
    }

    pub fn offset(&self) -> RotationBv {
        self.offset
    }

    pub fn is_zero(&self) -> bool {
        self.offset.is_zero() && self.coeffs.is_empty()
    }

    pub fn add_symbol(&mut self, symbol: u32) {
        *self.coeffs.entry(symbol).or_insert(0) += 1;
    }
}

impl fmt::Display for SymbolicRotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<String> = self
            .coeffs
            .iter()
            .map(|(l, c)| {
                if *c == 1 {
                    format!("r{l}")
                } else {
                    format!("{c}*r{l}")
                }
            })
            .collect();
        if !self.offset.is_zero() {
            terms.insert(0, self.offset.to_string());
        }
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join(" + "))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rotation {
    Register(RotationBv),
    Symbolic(SymbolicRotation),
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rotation::Register(r) => r.fmt(f),
            Rotation::Symbolic(s) => s.fmt(f),
        }
    }
}

/// 2-bit measurement counter: `00` unmeasured, `01` measured once,
/// `10`/`11` repeated measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeasureCounter(pub u8);

impl MeasureCounter {
    pub const UNMEASURED: MeasureCounter = MeasureCounter(0b00);
    pub const ONCE: MeasureCounter = MeasureCounter(0b01);

    pub fn next(self) -> Self {
        match self.0 {
            0b00 => MeasureCounter(0b01),
            0b01 => MeasureCounter(0b10),
            0b10 => MeasureCounter(0b11),
            _ => MeasureCounter(0b10),
        }
    }

    pub fn literal(self) -> String {
        bv_literal(self.0 as u64, 2)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AbstractQubitState {
    pub q: bool,
    pub s: SuperpositionCounter,
    pub r: Rotation,
    pub m: MeasureCounter,
}

impl AbstractQubitState {
    /// Precision-role state with the given components.
    pub fn precision(q: bool, s: u32, r: u64, n: u32) -> Self {
        AbstractQubitState {
            q,
            s: SuperpositionCounter(s),
            r: Rotation::Register(RotationBv::new(r, n)),
            m: MeasureCounter::UNMEASURED,
        }
    }

    /// Fresh phase-role state: `q=0, s=0, r=0, m=00`.
    pub fn phase(n: u32) -> Self {
        AbstractQubitState {
            q: false,
            s: SuperpositionCounter(0),
            r: Rotation::Symbolic(SymbolicRotation::zero(n)),
            m: MeasureCounter::UNMEASURED,
        }
    }

    pub fn register(&self) -> Option<RotationBv> {
        match &self.r {
            Rotation::Register(r) => Some(*r),
            Rotation::Symbolic(_) => None,
        }
    }

    pub fn symbolic(&self) -> Option<&SymbolicRotation> {
        match &self.r {
            Rotation::Symbolic(s) => Some(s),
            Rotation::Register(_) => None,
        }
    }
}

/// Applies the half-turn update of an H gate to an `n`-bit register.
/// Returns the new basis bit and register.
fn h_rotation(q: bool, odd: bool, r: RotationBv, n: u32) -> (bool, RotationBv) {
    let half = RotationBv::half_turn(n);
    match (odd, q) {
        (false, false) => (q, r),
        (false, true) => (q, r.add_mod(half)),
        (true, true) => (r.msb(), r.sub_mod(half)),
        (true, false) => (r.msb(), r),
    }
}

/// Abstract Hadamard.
///
/// Entering superposition (even `s`) with `q = 1` adds a half turn;
/// leaving it (odd `s`) reads `q` back from the register MSB and removes
/// the half turn when `q = 1`. On phase qubits the same rule acts on the
/// symbolic rotation's constant part.
pub fn apply_h(st: &AbstractQubitState, max_h: u32, n: u32) -> AbstractQubitState {
    let width = superposition_width(max_h);
    let s_in = st.s.0;
    let s_out = if s_in == max_h + 2 {
        max_h + 1
    } else {
        (s_in + 1) & mask(width) as u32
    };
    let odd = st.s.is_odd();
    let (q, r) = match &st.r {
        Rotation::Register(r) => {
            let (q, r) = h_rotation(st.q, odd, *r, n);
            (q, Rotation::Register(r))
        }
        Rotation::Symbolic(sym) => {
            let (q, offset) = h_rotation(st.q, odd, sym.offset, n);
            let mut sym = sym.clone();
            sym.offset = offset;
            (q, Rotation::Symbolic(sym))
        }
    };
    AbstractQubitState {
        q,
        s: SuperpositionCounter(s_out),
        r,
        m: st.m,
    }
}

/// Register amount subtracted by an inverse rotation `R_k^dagger`: a 1 at the
/// k-th most significant bit, i.e. `2^(n-k)`. Rotations finer than the
/// register resolution (`k > n`) round to zero.
pub fn crk_amount(k: u32, n: u32) -> u64 {
    if k > n {
        0
    } else {
        1u64 << (n - k)
    }
}

/// Abstract inverse controlled rotation; returns the new target state.
///
/// Fires only when the control is `|1>` and out of superposition
/// (`s = 3b010`) while the target is in superposition (`s = 3b001`).
pub fn apply_crk_dag(
    ctrl: &AbstractQubitState,
    tgt: &AbstractQubitState,
    k: u32,
    n: u32,
) -> Result<AbstractQubitState, DomainError> {
    if k < 2 {
        return Err(DomainError::KOutOfRange { k });
    }
    if ctrl.register().is_none() {
        return Err(DomainError::ExpectedPrecision("crkdag control"));
    }
    let Some(r) = tgt.register() else {
        return Err(DomainError::ExpectedPrecision("crkdag target"));
    };
    let fires = ctrl.q && ctrl.s.0 == 0b010 && tgt.s.0 == 0b001;
    let mut out = tgt.clone();
    if fires {
        out.r = Rotation::Register(r.sub_mod(crk_amount(k, n)));
    }
    Ok(out)
}

/// In-place form of [`apply_cu`].
pub fn apply_cu_in_place(
    ctrl_q: bool,
    phase_states: &mut [AbstractQubitState],
    target_map: &TargetMap,
) -> Result<(), DomainError> {
    let p = phase_states.len() as u32;
    for (symbol, target) in target_map.pairs() {
        if target == 0 || target > p {
            return Err(DomainError::MapOutOfRange { symbol, target, p });
        }
    }
    if !ctrl_q {
        return Ok(());
    }
    for (symbol, target) in target_map.pairs() {
        match &mut phase_states[(target - 1) as usize].r {
            Rotation::Symbolic(sym) => sym.add_symbol(symbol),
            Rotation::Register(_) => return Err(DomainError::ExpectedPhase("cu target")),
        }
    }
    Ok(())
}

/// Abstract controlled-U: with the control's basis bit set, phase qubit
/// `target_map(l)` accumulates one more `r_l` for every symbol `l`.
pub fn apply_cu(
    ctrl_q: bool,
    phase_states: &[AbstractQubitState],
    target_map: &TargetMap,
) -> Result<Vec<AbstractQubitState>, DomainError> {
    let mut out = phase_states.to_vec();
    apply_cu_in_place(ctrl_q, &mut out, target_map)?;
    Ok(out)
}

/// Abstract measurement: `00 -> 01 -> 10 -> 11 -> 10`.
pub fn apply_measure(st: &AbstractQubitState) -> AbstractQubitState {
    AbstractQubitState {
        m: st.m.next(),
        ..st.clone()
    }
}
