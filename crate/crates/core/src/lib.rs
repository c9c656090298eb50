// SPDX-License-Identifier: Apache-2.0

//! Bit-vector abstraction verifier for quantum phase estimation circuits.
//!
//! * [`circuit`] - circuit IR, text format, QPE generator, mutation engine.
//! * [`domain`] - abstract qubit states, transfer functions, interpreter.
//! * [`property`] - the four QPE properties, SMT-LIB2 export, solver runner.
//! * [`oracle`] - statevector simulator used to cross-check mutants.

pub mod circuit;
pub mod domain;
pub mod oracle;
pub mod property;
