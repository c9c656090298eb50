// SPDX-License-Identifier: Apache-2.0

//! Line-based circuit text format.
//!
//! ```text
//! qpe n=3 p=1 maxh=2
//! h P1
//! cu c=P1              # identity map
//! cu c=P2 map=1:H1
//! crkdag k=2 c=P3 t=P2
//! measure P1
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{validate_op, Circuit, CircuitError, GateOp, QubitRef, TargetMap, QPE_MAX_H};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: CircuitError,
    },
    #[error("line {line}: duplicate header")]
    DuplicateHeader { line: usize },
    #[error("missing `qpe n=<int> p=<int>` header")]
    MissingHeader,
}

impl ParseError {
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { line, .. }
            | ParseError::Invalid { line, .. }
            | ParseError::DuplicateHeader { line } => Some(*line),
            ParseError::MissingHeader => None,
        }
    }
}

struct Header {
    n: u32,
    p: u32,
    max_h: u32,
}

pub fn parse_circuit(text: &str) -> Result<Circuit, ParseError> {
    let mut header: Option<Header> = None;
    let mut ops = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let keyword = tokens.next().unwrap_or_default();
        let rest: Vec<&str> = tokens.collect();

        if keyword == "qpe" {
            if header.is_some() {
                return Err(ParseError::DuplicateHeader { line });
            }
            header = Some(parse_header(line, &rest)?);
            continue;
        }
        let Some(h) = header.as_ref() else {
            return Err(ParseError::MissingHeader);
        };
        let op = parse_gate(line, keyword, &rest, h.p)?;
        validate_op(&op, h.n, h.p).map_err(|source| ParseError::Invalid { line, source })?;
        ops.push(op);
    }

    let h = header.ok_or(ParseError::MissingHeader)?;
    Circuit::new(h.n, h.p, h.max_h, ops).map_err(|source| ParseError::Invalid { line: 1, source })
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

/// Splits `key=value` tokens, rejecting unknown and repeated keys.
fn key_values<'a>(
    line: usize,
    tokens: &[&'a str],
    allowed: &[&str],
) -> Result<Vec<(&'a str, &'a str)>, ParseError> {
    let mut out: Vec<(&str, &str)> = Vec::new();
    for tok in tokens {
        let (key, value) = tok
            .split_once('=')
            .ok_or_else(|| syntax(line, format!("expected key=value, got `{tok}`")))?;
        if !allowed.contains(&key) {
            return Err(syntax(line, format!("unknown field `{key}`")));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(syntax(line, format!("field `{key}` given twice")));
        }
        out.push((key, value));
    }
    Ok(out)
}

fn lookup<'a>(fields: &[(&str, &'a str)], key: &str) -> Option<&'a str> {
    fields.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

fn parse_int(line: usize, key: &str, value: &str) -> Result<u32, ParseError> {
    value
        .parse()
        .map_err(|_| syntax(line, format!("`{key}` expects a nonnegative integer, got `{value}`")))
}

fn parse_qubit(line: usize, value: &str) -> Result<QubitRef, ParseError> {
    value.parse().map_err(|e: super::QubitRefParseError| syntax(line, e.to_string()))
}

fn parse_header(line: usize, tokens: &[&str]) -> Result<Header, ParseError> {
    let fields = key_values(line, tokens, &["n", "p", "maxh"])?;
    let get = |key: &str| -> Result<Option<u32>, ParseError> {
        lookup(&fields, key)
            .map(|v| parse_int(line, key, v))
            .transpose()
    };
    let n = get("n")?.ok_or_else(|| syntax(line, "header is missing `n`"))?;
    let p = get("p")?.ok_or_else(|| syntax(line, "header is missing `p`"))?;
    let max_h = get("maxh")?.unwrap_or(QPE_MAX_H);
    if n == 0 {
        return Err(ParseError::Invalid {
            line,
            source: CircuitError::NoPrecisionQubits,
        });
    }
    if max_h == 0 {
        return Err(ParseError::Invalid {
            line,
            source: CircuitError::InvalidMaxH(max_h),
        });
    }
    Ok(Header { n, p, max_h })
}

fn parse_gate(line: usize, keyword: &str, rest: &[&str], p: u32) -> Result<GateOp, ParseError> {
    let single_qubit = |name: &str| -> Result<QubitRef, ParseError> {
        match rest {
            [q] => parse_qubit(line, q),
            _ => Err(syntax(line, format!("`{name}` takes exactly one qubit"))),
        }
    };
    match keyword {
        "h" => Ok(GateOp::H {
            target: single_qubit("h")?,
        }),
        "measure" => Ok(GateOp::Measure {
            target: single_qubit("measure")?,
        }),
        "crkdag" => {
            let fields = key_values(line, rest, &["k", "c", "t"])?;
            let need = |key: &str| {
                lookup(&fields, key).ok_or_else(|| syntax(line, format!("crkdag is missing `{key}`")))
            };
            let k = parse_int(line, "k", need("k")?)?;
            let control = parse_qubit(line, need("c")?)?;
            let target = parse_qubit(line, need("t")?)?;
            Ok(GateOp::CrkDag { k, control, target })
        }
        "cu" => {
            let fields = key_values(line, rest, &["c", "map"])?;
            let control = parse_qubit(
                line,
                lookup(&fields, "c").ok_or_else(|| syntax(line, "cu is missing `c`"))?,
            )?;
            let target_map = match lookup(&fields, "map") {
                None => TargetMap::identity(p),
                Some(spec) => parse_map(line, spec, p)?,
            };
            Ok(GateOp::Cu {
                control,
                target_map,
            })
        }
        other => Err(syntax(line, format!("unknown gate `{other}`"))),
    }
}

/// Parses `l1:H<m1>,l2:H<m2>,...`; every symbol in `1..=p` must appear once.
fn parse_map(line: usize, spec: &str, p: u32) -> Result<TargetMap, ParseError> {
    let mut targets: Vec<Option<u32>> = vec![None; p as usize];
    for entry in spec.split(',') {
        let (sym, qubit) = entry
            .split_once(':')
            .ok_or_else(|| syntax(line, format!("map entry `{entry}` is not `<l>:H<m>`")))?;
        let l = parse_int(line, "map", sym)?;
        let q = parse_qubit(line, qubit)?;
        if !q.is_phase() {
            return Err(syntax(line, format!("map target `{q}` is not a phase qubit")));
        }
        if l == 0 || l > p {
            return Err(ParseError::Invalid {
                line,
                source: CircuitError::QubitOutOfRange {
                    qubit: QubitRef::phase(l),
                    n: 0,
                    p,
                },
            });
        }
        let slot = &mut targets[(l - 1) as usize];
        if slot.is_some() {
            return Err(syntax(line, format!("map symbol {l} given twice")));
        }
        *slot = Some(q.index);
    }
    let found = targets.iter().filter(|t| t.is_some()).count() as u32;
    if found != p {
        return Err(ParseError::Invalid {
            line,
            source: CircuitError::MapSize { expected: p, found },
        });
    }
    Ok(TargetMap::from_targets(targets.into_iter().flatten().collect()))
}

/// Canonical text form; `parse_circuit` inverts it exactly.
pub fn serialize_circuit(c: &Circuit) -> String {
    let mut out = String::with_capacity(16 * (c.len() + 1));
    let _ = writeln!(out, "qpe n={} p={} maxh={}", c.n(), c.p(), c.max_h());
    for op in c.ops() {
        write_op(&mut out, op);
        out.push('\n');
    }
    out
}

pub(crate) fn write_op(out: &mut String, op: &GateOp) {
    let _ = match op {
        GateOp::H { target } => write!(out, "h {target}"),
        GateOp::Measure { target } => write!(out, "measure {target}"),
        GateOp::CrkDag {
            k,
            control,
            target,
        } => write!(out, "crkdag k={k} c={control} t={target}"),
        GateOp::Cu {
            control,
            target_map,
        } => {
            let _ = write!(out, "cu c={control}");
            if !target_map.is_identity() {
                out.push_str(" map=");
                for (i, (l, m)) in target_map.pairs().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "{l}:H{m}");
                }
            }
            Ok(())
        }
    };
}

pub fn op_to_string(op: &GateOp) -> String {
    let mut s = String::new();
    write_op(&mut s, op);
    s
}

/// Parses a single gate line against an `(n, p)` register shape.
pub fn parse_op(text: &str, n: u32, p: u32) -> Result<GateOp, ParseError> {
    let mut tokens = text.split_whitespace();
    let keyword = tokens.next().unwrap_or_default();
    let rest: Vec<&str> = tokens.collect();
    let op = parse_gate(1, keyword, &rest, p)?;
    validate_op(&op, n, p).map_err(|source| ParseError::Invalid { line: 1, source })?;
    Ok(op)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::generate_qpe;
    use proptest::prelude::*;

    #[test]
    fn single_gate_header_without_maxh() {
        let c = parse_circuit("qpe n=3 p=1\nh P1\n").unwrap();
        assert_eq!((c.n(), c.p(), c.max_h()), (3, 1, 2));
        assert_eq!(
            c.ops(),
            &[GateOp::H {
                target: QubitRef::precision(1)
            }]
        );
    }

    #[test]
    fn crkdag_fields() {
        let c = parse_circuit("qpe n=3 p=1\ncrkdag k=2 c=P1 t=P2").unwrap();
        assert_eq!(
            c.ops()[0],
            GateOp::CrkDag {
                k: 2,
                control: QubitRef::precision(1),
                target: QubitRef::precision(2)
            }
        );
    }

    #[test]
    fn cu_explicit_identity_map() {
        let explicit = parse_circuit("qpe n=1 p=1\ncu c=P1 map=1:H1").unwrap();
        let implicit = parse_circuit("qpe n=1 p=1\ncu c=P1").unwrap();
        assert_eq!(explicit, implicit);
        assert_eq!(
            explicit.ops()[0],
            GateOp::Cu {
                control: QubitRef::precision(1),
                target_map: TargetMap::identity(1)
            }
        );
    }

    #[test]
    fn cu_permuted_map() {
        let c = parse_circuit("qpe n=1 p=2\ncu c=P1 map=2:H1,1:H2").unwrap();
        let GateOp::Cu { target_map, .. } = &c.ops()[0] else {
            panic!()
        };
        assert_eq!(target_map.target(1), 2);
        assert_eq!(target_map.target(2), 1);
        assert!(serialize_circuit(&c).contains("map=1:H2,2:H1"));
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_circuit("# leading\n\nqpe n=1 p=0 # trailing\n  h P1   # gate\n\nmeasure P1\n")
            .unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn serialize_small() {
        let c = Circuit::new(
            1,
            0,
            2,
            vec![
                GateOp::H {
                    target: QubitRef::precision(1),
                },
                GateOp::Measure {
                    target: QubitRef::precision(1),
                },
            ],
        )
        .unwrap();
        assert_eq!(serialize_circuit(&c), "qpe n=1 p=0 maxh=2\nh P1\nmeasure P1\n");
    }

    #[test]
    fn generated_round_trip() {
        let c = generate_qpe(3, 1).unwrap();
        assert_eq!(parse_circuit(&serialize_circuit(&c)).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_circuit("qpe n=2 p=1\nh P1\nfoo P1").unwrap_err();
        assert_eq!(e.line(), Some(3));
        let e = parse_circuit("qpe n=2 p=1\nh P3").unwrap_err();
        assert!(matches!(
            e,
            ParseError::Invalid {
                line: 2,
                source: CircuitError::QubitOutOfRange { .. }
            }
        ));
        let e = parse_circuit("qpe n=2 p=1\ncrkdag k=1 c=P2 t=P1").unwrap_err();
        assert!(matches!(
            e,
            ParseError::Invalid {
                line: 2,
                source: CircuitError::InvalidK(1)
            }
        ));
        let e = parse_circuit("qpe n=2 p=1\nh P1\nqpe n=2 p=1").unwrap_err();
        assert_eq!(e, ParseError::DuplicateHeader { line: 3 });
        assert_eq!(parse_circuit("h P1").unwrap_err(), ParseError::MissingHeader);
        assert_eq!(parse_circuit("").unwrap_err(), ParseError::MissingHeader);
        assert!(parse_circuit("qpe n=2").is_err());
        assert!(parse_circuit("qpe n=2 p=1 n=3").is_err());
        assert!(parse_circuit("qpe n=2 p=2\ncu c=P1 map=1:H1").is_err());
        assert!(parse_circuit("qpe n=2 p=2\ncu c=P1 map=1:H1,1:H2").is_err());
        assert!(parse_circuit("qpe n=2 p=2\ncu c=P1 map=1:P1,2:H2").is_err());
        assert!(parse_circuit("qpe n=2 p=1\ncrkdag k=2 c=P1 t=P1").is_err());
        assert!(parse_circuit("qpe n=2 p=1\nh P1 P2").is_err());
    }

    fn arb_op(n: u32, p: u32) -> impl Strategy<Value = GateOp> {
        let pq = (1..=n).prop_map(QubitRef::precision);
        let any_q = prop_oneof![
            (1..=n).prop_map(QubitRef::precision),
            (1..=p).prop_map(QubitRef::phase)
        ];
        let crk = (2u32..9, 1..=n, 1..=n)
            .prop_filter("distinct", |(_, c, t)| c != t)
            .prop_map(|(k, c, t)| GateOp::CrkDag {
                k,
                control: QubitRef::precision(c),
                target: QubitRef::precision(t),
            });
        let cu = (pq, proptest::collection::vec(1..=p, p as usize)).prop_map(|(control, v)| {
            GateOp::Cu {
                control,
                target_map: TargetMap::from_targets(v),
            }
        });
        prop_oneof![
            any_q.clone().prop_map(|target| GateOp::H { target }),
            any_q.prop_map(|target| GateOp::Measure { target }),
            crk,
            cu,
        ]
    }

    fn arb_circuit() -> impl Strategy<Value = Circuit> {
        (2u32..5, 1u32..4, 1u32..4).prop_flat_map(|(n, p, max_h)| {
            proptest::collection::vec(arb_op(n, p), 0..24)
                .prop_map(move |ops| Circuit::new(n, p, max_h, ops).unwrap())
        })
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(c in arb_circuit()) {
            let text = serialize_circuit(&c);
            prop_assert_eq!(parse_circuit(&text).unwrap(), c);
        }

        #[test]
        fn serialize_is_injective(a in arb_circuit(), b in arb_circuit()) {
            prop_assert_eq!(a == b, serialize_circuit(&a) == serialize_circuit(&b));
        }
    }
}
