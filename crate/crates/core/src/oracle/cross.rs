// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::{simulate, DiagonalUnitary, Distribution, OracleError, MAX_QUBITS};
use crate::circuit::{enumerate_mutants, generate_qpe, GateFamily, MutationClass};

/// Divergence threshold (total variation) for counting a mutant as a real
/// concrete fault.
pub const DIVERGENCE_TV: f64 = 0.1;
const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sweep {
    pub t: u64,
    pub outcome: String,
    pub prob: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub mutation: String,
    pub t: u64,
    pub tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDivergence {
    pub class: MutationClass,
    pub mutants: usize,
    /// Mutants whose distribution moves by more than the threshold for some `t`.
    pub diverging: usize,
    pub max_tv: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossValidation {
    pub n: u32,
    pub p: u32,
    pub eigenstate: String,
    pub sweeps: Vec<Sweep>,
    pub mutant_divergences: Vec<ClassDivergence>,
}

impl CrossValidation {
    /// Every `t` was recovered deterministically.
    pub fn all_exact(&self) -> bool {
        self.sweeps.iter().all(|s| s.exact)
    }

    pub fn exact_count(&self) -> usize {
        self.sweeps.iter().filter(|s| s.exact).count()
    }

    /// Some mutant of the family diverges beyond the threshold.
    pub fn family_diverges(&self, family: GateFamily) -> bool {
        self.mutant_divergences
            .iter()
            .any(|d| d.class.family() == family && d.diverging > 0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("cross-validation serializes")
    }
}

/// Sweeps `phi_1 = t / 2^n` over every `t` on the correct circuit with
/// eigenstate `10...0`, then measures how far each single mutant moves the
/// outcome distribution.
pub fn cross_validate(n: u32, p: u32) -> Result<CrossValidation, OracleError> {
    if n + p > MAX_QUBITS {
        return Err(OracleError::TooLarge(n + p));
    }
    let correct = generate_qpe(n, p).map_err(|_| OracleError::TooLarge(n + p))?;
    let eigenstate = format!("1{}", "0".repeat(p as usize - 1));
    let input = "0".repeat(n as usize);
    let den = 1u64 << n;
    let unitaries: Vec<DiagonalUnitary> = (0..den)
        .map(|t| DiagonalUnitary::single(t, den, p))
        .collect::<Result<_, _>>()?;

    let mut reference: Vec<Distribution> = Vec::with_capacity(den as usize);
    let mut sweeps = Vec::with_capacity(den as usize);
    for (t, u) in unitaries.iter().enumerate() {
        let d = simulate(&correct, u, &eigenstate, &input)?;
        let expected = format!("{t:0w$b}", w = n as usize);
        let (outcome, prob) = d.mode().map_or((String::new(), 0.0), |(k, v)| (k.to_string(), v));
        sweeps.push(Sweep {
            t: t as u64,
            exact: outcome == expected && (prob - 1.0).abs() <= EXACT_TOL,
            outcome,
            prob,
        });
        reference.push(d);
    }

    let mut mutant_divergences: Vec<ClassDivergence> = MutationClass::ALL
        .iter()
        .map(|&class| ClassDivergence {
            class,
            mutants: 0,
            diverging: 0,
            max_tv: 0.0,
            witness: None,
        })
        .collect();
    for (spec, mutant) in enumerate_mutants(&correct, &MutationClass::ALL) {
        let entry = mutant_divergences
            .iter_mut()
            .find(|d| d.class == spec.class)
            .expect("every class has an entry");
        entry.mutants += 1;
        let mut worst = (0u64, 0.0f64);
        for (t, u) in unitaries.iter().enumerate() {
            let tv = simulate(&mutant, u, &eigenstate, &input)?.tv_distance(&reference[t]);
            if tv > worst.1 + 1e-12 {
                worst = (t as u64, tv);
            }
        }
        if worst.1 > DIVERGENCE_TV {
            entry.diverging += 1;
        }
        if worst.1 > entry.max_tv + 1e-12 {
            entry.max_tv = worst.1;
            entry.witness = Some(Witness {
                mutation: spec.to_string(),
                t: worst.0,
                tv: worst.1,
            });
        }
    }
    Ok(CrossValidation {
        n,
        p,
        eigenstate,
        sweeps,
        mutant_divergences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep() {
        let cv = cross_validate(2, 1).unwrap();
        assert_eq!(cv.sweeps.len(), 4);
        assert!(cv.all_exact());
        let wrong_k = cv
            .mutant_divergences
            .iter()
            .find(|d| d.class == MutationClass::CrkDrop)
            .unwrap();
        assert_eq!(wrong_k.mutants, 1);
        assert_eq!(wrong_k.diverging, 1);
        let json: serde_json::Value = serde_json::from_str(&cv.to_json()).unwrap();
        assert_eq!(json["sweeps"][3]["outcome"], "11");
        assert_eq!(json["mutant_divergences"][0]["class"], "H_DROP");
    }

    #[test]
    fn size_limit() {
        assert_eq!(cross_validate(10, 3), Err(OracleError::TooLarge(13)));
    }
}
