// SPDX-License-Identifier: Apache-2.0

use super::{Circuit, CircuitError, GateOp, QubitRef, TargetMap, QPE_MAX_H};

/// Largest precision register accepted by [`generate_qpe`]; the controlled
/// unitary block is unrolled into `2^n - 1` gates.
pub const MAX_PRECISION_QUBITS: u32 = 30;

/// Builds the textbook phase estimation circuit.
///
/// Layout: an H layer on `P1..Pn`; `2^(j-1)` controlled-U gates controlled
/// by `Pj` (so `P1` carries the most significant phase bit); the inverse QFT
/// without terminal swaps, processed from `Pn` down to `P1` so every
/// rotation fires with its control already out of superposition; and a
/// final measurement of every precision qubit.
pub fn generate_qpe(n: u32, p: u32) -> Result<Circuit, CircuitError> {
    if n == 0 {
        return Err(CircuitError::NoPrecisionQubits);
    }
    if n > MAX_PRECISION_QUBITS {
        return Err(CircuitError::Size(format!(
            "n={n} exceeds the limit of {MAX_PRECISION_QUBITS} precision qubits"
        )));
    }
    if p == 0 {
        return Err(CircuitError::Size("p must be at least 1".into()));
    }

    let cu_total = (1usize << n) - 1;
    let rotations = (n * (n - 1) / 2) as usize;
    let mut ops = Vec::with_capacity(3 * n as usize + cu_total + rotations);

    for j in 1..=n {
        ops.push(GateOp::H {
            target: QubitRef::precision(j),
        });
    }
    for j in 1..=n {
        for _ in 0..(1usize << (j - 1)) {
            ops.push(GateOp::Cu {
                control: QubitRef::precision(j),
                target_map: TargetMap::identity(p),
            });
        }
    }
    for i in (1..=n).rev() {
        ops.push(GateOp::H {
            target: QubitRef::precision(i),
        });
        for t in (1..i).rev() {
            ops.push(GateOp::CrkDag {
                k: i - t + 1,
                control: QubitRef::precision(i),
                target: QubitRef::precision(t),
            });
        }
    }
    for j in 1..=n {
        ops.push(GateOp::Measure {
            target: QubitRef::precision(j),
        });
    }

    Circuit::new(n, p, QPE_MAX_H, ops)
}
