// SPDX-License-Identifier: Apache-2.0

//! Single-gate fault injection.
//!
//! Every [`MutationClass`] changes exactly one gate instance: it removes
//! one op, inserts one op, or changes one field of one op. Composite faults
//! are built by applying [`mutate`] repeatedly.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::text::{op_to_string, serialize_circuit};
use super::{Circuit, CircuitError, GateOp, QubitRef, TargetMap};

/// The four gate families; each maps to the property that must catch it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateFamily {
    H,
    Crk,
    M,
    Cu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MutationClass {
    HDrop,
    HDup,
    HPhaseAdd,
    CrkDrop,
    CrkExtra,
    CrkWrongK,
    CrkWrongCtrl,
    CrkWrongTgt,
    MEarly,
    MDrop,
    MPhase,
    CuDrop,
    CuExtra,
    CuWrongCtrl,
    CuWrongTgt,
}

impl MutationClass {
    pub const ALL: [MutationClass; 15] = [
        MutationClass::HDrop,
        MutationClass::HDup,
        MutationClass::HPhaseAdd,
        MutationClass::CrkDrop,
        MutationClass::CrkExtra,
        MutationClass::CrkWrongK,
        MutationClass::CrkWrongCtrl,
        MutationClass::CrkWrongTgt,
        MutationClass::MEarly,
        MutationClass::MDrop,
        MutationClass::MPhase,
        MutationClass::CuDrop,
        MutationClass::CuExtra,
        MutationClass::CuWrongCtrl,
        MutationClass::CuWrongTgt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MutationClass::HDrop => "H_DROP",
            MutationClass::HDup => "H_DUP",
            MutationClass::HPhaseAdd => "H_PHASE_ADD",
            MutationClass::CrkDrop => "CRK_DROP",
            MutationClass::CrkExtra => "CRK_EXTRA",
            MutationClass::CrkWrongK => "CRK_WRONG_K",
            MutationClass::CrkWrongCtrl => "CRK_WRONG_CTRL",
            MutationClass::CrkWrongTgt => "CRK_WRONG_TGT",
            MutationClass::MEarly => "M_EARLY",
            MutationClass::MDrop => "M_DROP",
            MutationClass::MPhase => "M_PHASE",
            MutationClass::CuDrop => "CU_DROP",
            MutationClass::CuExtra => "CU_EXTRA",
            MutationClass::CuWrongCtrl => "CU_WRONG_CTRL",
            MutationClass::CuWrongTgt => "CU_WRONG_TGT",
        }
    }

    pub fn family(self) -> GateFamily {
        use MutationClass::*;
        match self {
            HDrop | HDup | HPhaseAdd => GateFamily::H,
            CrkDrop | CrkExtra | CrkWrongK | CrkWrongCtrl | CrkWrongTgt => GateFamily::Crk,
            MEarly | MDrop | MPhase => GateFamily::M,
            CuDrop | CuExtra | CuWrongCtrl | CuWrongTgt => GateFamily::Cu,
        }
    }

    /// Whether `site` indexes an insertion point rather than an existing op.
    pub fn inserts(self) -> bool {
        use MutationClass::*;
        matches!(self, HPhaseAdd | CrkExtra | MEarly | MPhase | CuExtra)
    }
}

impl fmt::Display for MutationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MutationClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let upper = s.to_ascii_uppercase().replace('-', "_");
        MutationClass::ALL
            .into_iter()
            .find(|c| c.name() == upper)
            .ok_or_else(|| {
                let names: Vec<_> = MutationClass::ALL.iter().map(|c| c.name()).collect();
                format!("unknown mutation class `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Class-specific replacement values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MutationParams {
    None,
    /// Inserted measure/H target, or the replacement control/target qubit.
    Qubit(QubitRef),
    K(u32),
    /// Gate inserted by `CRK_EXTRA` / `CU_EXTRA`.
    Gate(GateOp),
    Map(TargetMap),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationSpec {
    pub class: MutationClass,
    pub site: usize,
    pub params: MutationParams,
}

impl MutationSpec {
    pub fn new(class: MutationClass, site: usize, params: MutationParams) -> Self {
        MutationSpec {
            class,
            site,
            params,
        }
    }
}

impl fmt::Display for MutationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.class, self.site)?;
        match &self.params {
            MutationParams::None => Ok(()),
            MutationParams::Qubit(q) => write!(f, " {q}"),
            MutationParams::K(k) => write!(f, " k={k}"),
            MutationParams::Gate(op) => write!(f, " [{}]", op_to_string(op)),
            MutationParams::Map(m) => {
                let entries: Vec<String> = m.pairs().map(|(l, t)| format!("{l}:H{t}")).collect();
                write!(f, " map={}", entries.join(","))
            }
        }
    }
}

impl Serialize for MutationSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("site {site} out of range for {class} (circuit has {len} ops)")]
    SiteOutOfRange {
        class: MutationClass,
        site: usize,
        len: usize,
    },
    #[error("{class} does not apply at site {site} (found `{found}`)")]
    Inapplicable {
        class: MutationClass,
        site: usize,
        found: String,
    },
    #[error("{class}: {reason}")]
    BadParams {
        class: MutationClass,
        reason: String,
    },
    #[error("{class} at site {site} leaves the circuit unchanged")]
    NoChange { class: MutationClass, site: usize },
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

pub fn mutate(c: &Circuit, m: &MutationSpec) -> Result<Circuit, MutationError> {
    use MutationClass::*;
    let class = m.class;
    let len = c.len();
    let mut ops = c.ops().to_vec();

    let bad = |reason: &str| MutationError::BadParams {
        class,
        reason: reason.to_string(),
    };
    let check_site = |limit: usize| {
        if m.site >= limit {
            Err(MutationError::SiteOutOfRange {
                class,
                site: m.site,
                len,
            })
        } else {
            Ok(())
        }
    };
    let inapplicable = || MutationError::Inapplicable {
        class,
        site: m.site,
        found: op_to_string(&c.ops()[m.site]),
    };
    let qubit_param = || match &m.params {
        MutationParams::Qubit(q) => Ok(*q),
        _ => Err(bad("expects a qubit parameter")),
    };

    match class {
        HDrop | HDup | CrkDrop | MDrop | CuDrop => {
            check_site(len)?;
            let want = match class {
                HDrop | HDup => super::GateFamily::H,
                CrkDrop => super::GateFamily::Crk,
                MDrop => super::GateFamily::M,
                _ => super::GateFamily::Cu,
            };
            if ops[m.site].family() != want {
                return Err(inapplicable());
            }
            if class == HDup {
                let copy = ops[m.site].clone();
                ops.insert(m.site + 1, copy);
            } else {
                ops.remove(m.site);
            }
        }
        HPhaseAdd | MPhase => {
            check_site(len + 1)?;
            let q = qubit_param()?;
            if !q.is_phase() {
                return Err(bad("target must be a phase qubit"));
            }
            let op = if class == HPhaseAdd {
                GateOp::H { target: q }
            } else {
                GateOp::Measure { target: q }
            };
            ops.insert(m.site, op);
        }
        MEarly => {
            let layer = c.output_layer_start();
            if m.site >= layer {
                return Err(MutationError::SiteOutOfRange {
                    class,
                    site: m.site,
                    len: layer,
                });
            }
            let q = qubit_param()?;
            if !q.is_precision() {
                return Err(bad("target must be a precision qubit"));
            }
            ops.insert(m.site, GateOp::Measure { target: q });
        }
        CrkExtra | CuExtra => {
            check_site(len + 1)?;
            let MutationParams::Gate(op) = &m.params else {
                return Err(bad("expects a gate parameter"));
            };
            let ok = match class {
                CrkExtra => matches!(op, GateOp::CrkDag { .. }),
                _ => matches!(op, GateOp::Cu { .. }),
            };
            if !ok {
                return Err(bad("inserted gate has the wrong kind"));
            }
            ops.insert(m.site, op.clone());
        }
        CrkWrongK | CrkWrongCtrl | CrkWrongTgt => {
            check_site(len)?;
            let GateOp::CrkDag {
                k,
                control,
                target,
            } = &mut ops[m.site]
            else {
                return Err(inapplicable());
            };
            match (class, &m.params) {
                (CrkWrongK, MutationParams::K(new_k)) => {
                    if new_k == k {
                        return Err(MutationError::NoChange {
                            class,
                            site: m.site,
                        });
                    }
                    *k = *new_k;
                }
                (CrkWrongCtrl, MutationParams::Qubit(q)) => {
                    if q == control {
                        return Err(MutationError::NoChange {
                            class,
                            site: m.site,
                        });
                    }
                    *control = *q;
                }
                (CrkWrongTgt, MutationParams::Qubit(q)) => {
                    if q == target {
                        return Err(MutationError::NoChange {
                            class,
                            site: m.site,
                        });
                    }
                    *target = *q;
                }
                _ => return Err(bad("parameter does not match the class")),
            }
        }
        CuWrongCtrl | CuWrongTgt => {
            check_site(len)?;
            let GateOp::Cu {
                control,
                target_map,
            } = &mut ops[m.site]
            else {
                return Err(inapplicable());
            };
            match (class, &m.params) {
                (CuWrongCtrl, MutationParams::Qubit(q)) => {
                    if q == control {
                        return Err(MutationError::NoChange {
                            class,
                            site: m.site,
                        });
                    }
                    *control = *q;
                }
                (CuWrongTgt, MutationParams::Map(map)) => {
                    if map == target_map {
                        return Err(MutationError::NoChange {
                            class,
                            site: m.site,
                        });
                    }
                    *target_map = map.clone();
                }
                _ => return Err(bad("parameter does not match the class")),
            }
        }
    }

    Ok(c.with_ops(ops)?)
}

/// Every single-site mutation of `class` that the enumerator considers.
fn candidates(c: &Circuit, class: MutationClass) -> Vec<MutationSpec> {
    use MutationClass::*;
    let (n, p) = (c.n(), c.p());
    let ops = c.ops();
    let mut out = Vec::new();
    let spec = |site, params| MutationSpec::new(class, site, params);

    match class {
        HDrop | HDup | CrkDrop | MDrop | CuDrop => {
            let want = match class {
                HDrop | HDup => GateFamily::H,
                CrkDrop => GateFamily::Crk,
                MDrop => GateFamily::M,
                _ => GateFamily::Cu,
            };
            for (i, op) in ops.iter().enumerate() {
                if op.family() == want {
                    out.push(spec(i, MutationParams::None));
                }
            }
        }
        HPhaseAdd | MPhase => {
            for site in 0..=ops.len() {
                for l in 1..=p {
                    out.push(spec(site, MutationParams::Qubit(QubitRef::phase(l))));
                }
            }
        }
        MEarly => {
            for site in 0..c.output_layer_start() {
                for j in 1..=n {
                    out.push(spec(site, MutationParams::Qubit(QubitRef::precision(j))));
                }
            }
        }
        CrkExtra => {
            // Over-rotation: a second copy of an existing rotation.
            for (i, op) in ops.iter().enumerate() {
                if matches!(op, GateOp::CrkDag { .. }) {
                    out.push(spec(i + 1, MutationParams::Gate(op.clone())));
                }
            }
        }
        CrkWrongK | CrkWrongCtrl | CrkWrongTgt => {
            for (i, op) in ops.iter().enumerate() {
                let GateOp::CrkDag {
                    k,
                    control,
                    target,
                } = op
                else {
                    continue;
                };
                if class == CrkWrongK {
                    for alt in (2..=n + 1).filter(|alt| alt != k) {
                        out.push(spec(i, MutationParams::K(alt)));
                    }
                } else {
                    // Replacement control (or target) must differ from both ends.
                    for j in (1..=n).filter(|&j| j != control.index && j != target.index) {
                        out.push(spec(i, MutationParams::Qubit(QubitRef::precision(j))));
                    }
                }
            }
        }
        CuExtra => {
            // Extra applications of U inside the modular exponentiation block.
            let cu_sites: Vec<usize> = ops
                .iter()
                .enumerate()
                .filter(|(_, op)| matches!(op, GateOp::Cu { .. }))
                .map(|(i, _)| i)
                .collect();
            if let (Some(&first), Some(&last)) = (cu_sites.first(), cu_sites.last()) {
                for site in first..=last + 1 {
                    for j in 1..=n {
                        let gate = GateOp::Cu {
                            control: QubitRef::precision(j),
                            target_map: TargetMap::identity(p),
                        };
                        out.push(spec(site, MutationParams::Gate(gate)));
                    }
                }
            }
        }
        CuWrongCtrl | CuWrongTgt => {
            for (i, op) in ops.iter().enumerate() {
                let GateOp::Cu {
                    control,
                    target_map,
                } = op
                else {
                    continue;
                };
                if class == CuWrongCtrl {
                    for j in (1..=n).filter(|&j| j != control.index) {
                        out.push(spec(i, MutationParams::Qubit(QubitRef::precision(j))));
                    }
                } else {
                    for (l, current) in target_map.pairs() {
                        for m in (1..=p).filter(|&m| m != current) {
                            out.push(spec(i, MutationParams::Map(target_map.with_target(l, m))));
                        }
                    }
                }
            }
        }
    }
    out
}

/// All single-site mutants for the requested classes, in class order.
///
/// Within a class, mutants whose canonical text coincides are reported once
/// (first spec wins).
pub fn enumerate_mutants(c: &Circuit, classes: &[MutationClass]) -> Vec<(MutationSpec, Circuit)> {
    let parent = serialize_circuit(c);
    let mut ordered: Vec<MutationClass> = classes.to_vec();
    ordered.sort();
    ordered.dedup();

    let mut out = Vec::new();
    for class in ordered {
        let mut seen = HashSet::new();
        for spec in candidates(c, class) {
            let Ok(mutant) = mutate(c, &spec) else {
                continue;
            };
            let text = serialize_circuit(&mutant);
            if text != parent && seen.insert(text) {
                out.push((spec, mutant));
            }
        }
    }
    out
}

/// Sites at which `class` has at least one candidate mutation.
pub fn applicable_sites(c: &Circuit, class: MutationClass) -> Vec<usize> {
    let mut sites: Vec<usize> = candidates(c, class)
        .into_iter()
        .filter(|s| mutate(c, s).is_ok())
        .map(|s| s.site)
        .collect();
    sites.sort_unstable();
    sites.dedup();
    sites
}
