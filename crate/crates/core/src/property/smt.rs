// SPDX-License-Identifier: Apache-2.0

//! SMT-LIB2 (QF_BV) encoding of the properties.
//!
//! The circuit is unrolled in SSA form: every component a gate rewrites gets
//! a fresh `define-fun` named after the component, qubit and op position
//! (`r_P2_7` is the rotation of `P2` after op 6; suffix 0 is the input).
//! The only free symbols are the 1-bit basis variables `b_1..b_n`. The
//! script asserts the negated property, so `unsat` means the property holds.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::{IqftBlock, PropertyError, PropertyId};
use crate::circuit::{Circuit, GateOp, QubitRef};
use crate::domain::{crk_amount, superposition_width, InputTemplate};

fn bv(value: u64, width: u32) -> String {
    format!("(_ bv{value} {width})")
}

fn conj(terms: &[String]) -> String {
    match terms.len() {
        0 => "true".into(),
        1 => terms[0].clone(),
        _ => format!("(and {})", terms.join(" ")),
    }
}

/// Current SSA names of one qubit's components; `r` is the rotation
/// register on precision qubits and the constant offset on phase qubits.
#[derive(Clone)]
struct Sym {
    q: String,
    s: String,
    r: String,
    m: String,
}

struct Unroller<'a> {
    c: &'a Circuit,
    n: u32,
    ws: u32,
    cw: u32,
    out: String,
    qubits: Vec<Sym>,
    /// Counter term for coefficient of `r_l` on phase qubit `m`, keyed `(m, l)`.
    counters: BTreeMap<(u32, u32), String>,
    /// `s` right after the first H on each precision qubit.
    first_h_s: Vec<Option<String>>,
    /// `m` terms defined before the output layer.
    early_m: Vec<String>,
}

impl<'a> Unroller<'a> {
    fn new(c: &'a Circuit, template: InputTemplate) -> Self {
        let n = c.n();
        let ws = superposition_width(c.max_h());
        let cu_bits = u64::BITS - (c.cu_count() as u64).leading_zeros();
        let cw = (n + 1).max(cu_bits);
        let mut qubits = Vec::new();
        for j in 1..=n {
            let b = format!("b_{j}");
            let (s, r) = match template {
                InputTemplate::Fresh => (bv(0, ws), bv(0, n)),
                InputTemplate::IqftSym => (bv(1, ws), iqft_input(n, j)),
            };
            qubits.push(Sym {
                q: b,
                s,
                r,
                m: "#b00".into(),
            });
        }
        for _ in 0..c.p() {
            qubits.push(Sym {
                q: "#b0".into(),
                s: bv(0, ws),
                r: bv(0, n),
                m: "#b00".into(),
            });
        }
        Unroller {
            c,
            n,
            ws,
            cw,
            out: String::new(),
            qubits,
            counters: BTreeMap::new(),
            first_h_s: vec![None; n as usize],
            early_m: Vec::new(),
        }
    }

    fn define(&mut self, name: String, width: u32, body: String) -> String {
        writeln!(self.out, "(define-fun {name} () (_ BitVec {width}) {body})").unwrap();
        name
    }

    fn run(&mut self) {
        let layer = self.c.output_layer_start();
        for (i, op) in self.c.ops().iter().enumerate() {
            let v = i + 1;
            match op {
                GateOp::H { target } => self.h(*target, v),
                GateOp::CrkDag { k, control, target } => self.crk(*k, *control, *target, v),
                GateOp::Cu {
                    control,
                    target_map,
                } => {
                    let ctrl = self.qubits[self.c.slot(*control)].q.clone();
                    let inc = self.define(
                        format!("inc_{v}"),
                        self.cw,
                        format!("(ite (= {ctrl} #b1) {} {})", bv(1, self.cw), bv(0, self.cw)),
                    );
                    for (l, m) in target_map.pairs() {
                        let prev = self
                            .counters
                            .get(&(m, l))
                            .cloned()
                            .unwrap_or_else(|| bv(0, self.cw));
                        let name = self.define(
                            format!("c_H{m}_r{l}_{v}"),
                            self.cw,
                            format!("(bvadd {prev} {inc})"),
                        );
                        self.counters.insert((m, l), name);
                    }
                }
                GateOp::Measure { target } => {
                    let slot = self.c.slot(*target);
                    let m = self.qubits[slot].m.clone();
                    let name = self.define(
                        format!("m_{target}_{v}"),
                        2,
                        format!(
                            "(ite (= {m} #b00) #b01 (ite (= {m} #b01) #b10 (ite (= {m} #b10) #b11 #b10)))"
                        ),
                    );
                    if i < layer {
                        self.early_m.push(name.clone());
                    }
                    self.qubits[slot].m = name;
                }
            }
        }
    }

    fn h(&mut self, target: QubitRef, v: usize) {
        let (n, ws, max_h) = (self.n, self.ws, self.c.max_h());
        let slot = self.c.slot(target);
        let Sym { q, s, r, .. } = self.qubits[slot].clone();
        let odd = format!("(= ((_ extract 0 0) {s}) #b1)");
        let half = bv(1 << (n - 1), n);
        let s2 = self.define(
            format!("s_{target}_{v}"),
            ws,
            format!(
                "(ite (= {s} {}) {} (bvadd {s} {}))",
                bv((max_h + 2) as u64, ws),
                bv((max_h + 1) as u64, ws),
                bv(1, ws)
            ),
        );
        let q2 = self.define(
            format!("q_{target}_{v}"),
            1,
            format!("(ite {odd} ((_ extract {m} {m}) {r}) {q})", m = n - 1),
        );
        let prefix = if target.is_precision() { "r" } else { "o" };
        let r2 = self.define(
            format!("{prefix}_{target}_{v}"),
            n,
            format!("(ite (= {q} #b1) (ite {odd} (bvsub {r} {half}) (bvadd {r} {half})) {r})"),
        );
        if target.is_precision() {
            let j = (target.index - 1) as usize;
            if self.first_h_s[j].is_none() {
                self.first_h_s[j] = Some(s2.clone());
            }
        }
        self.qubits[slot] = Sym {
            q: q2,
            s: s2,
            r: r2,
            m: self.qubits[slot].m.clone(),
        };
    }

    fn crk(&mut self, k: u32, control: QubitRef, target: QubitRef, v: usize) {
        let (n, ws) = (self.n, self.ws);
        let ctrl = self.qubits[self.c.slot(control)].clone();
        let slot = self.c.slot(target);
        let tgt = self.qubits[slot].clone();
        let fires = format!(
            "(and (= {} #b1) (= {} {}) (= {} {}))",
            ctrl.q,
            ctrl.s,
            bv(2, ws),
            tgt.s,
            bv(1, ws)
        );
        let amount = bv(crk_amount(k, n), n);
        let r2 = self.define(
            format!("r_{target}_{v}"),
            n,
            format!("(ite {fires} (bvsub {r} {amount}) {r})", r = tgt.r),
        );
        self.qubits[slot].r = r2;
    }

    fn state(&self, q: QubitRef) -> &Sym {
        &self.qubits[self.c.slot(q)]
    }

    fn counter(&self, m: u32, l: u32) -> String {
        self.counters
            .get(&(m, l))
            .cloned()
            .unwrap_or_else(|| bv(0, self.cw))
    }
}

/// `b_j b_(j+1) ... b_n 0...0` as a nested binary concat.
fn iqft_input(n: u32, j: u32) -> String {
    let mut parts: Vec<String> = (j..=n).map(|t| format!("b_{t}")).collect();
    if j > 1 {
        parts.push(bv(0, j - 1));
    }
    let mut term = parts.pop().unwrap();
    while let Some(p) = parts.pop() {
        term = format!("(concat {p} {term})");
    }
    term
}

/// `sum_j b_j * 2^(j-1)` zero-extended to the counter width.
fn expected_count(n: u32, cw: u32) -> String {
    let mut term = "b_1".to_string();
    for j in 2..=n {
        term = format!("(concat b_{j} {term})");
    }
    format!("((_ zero_extend {}) {term})", cw - n)
}

fn property_terms(u: &mut Unroller<'_>, id: PropertyId) -> Vec<String> {
    let c = u.c;
    let (n, ws) = (u.n, u.ws);
    let mut terms = Vec::new();
    match id {
        PropertyId::P1Superposition => {
            for j in 1..=n {
                if let Some(s1) = &u.first_h_s[(j - 1) as usize] {
                    terms.push(format!("(= {s1} {})", bv(1, ws)));
                }
            }
            for q in c.qubits() {
                let expected = if q.is_precision() { 2 } else { 0 };
                terms.push(format!("(= {} {})", u.state(q).s, bv(expected, ws)));
            }
        }
        PropertyId::P2Iqft => {
            for j in 1..=n {
                let st = u.state(QubitRef::precision(j));
                terms.push(format!("(= {} {})", st.r, bv(0, n)));
                terms.push(format!("(= {} b_{j})", st.q));
            }
        }
        PropertyId::P3Measurement => {
            for m in &u.early_m {
                terms.push(format!("(= {m} #b00)"));
            }
            for q in c.qubits() {
                let expected = if q.is_precision() { "#b01" } else { "#b00" };
                terms.push(format!("(= {} {expected})", u.state(q).m));
            }
        }
        PropertyId::P4Phase => {
            let expect = u.define("expected_count".into(), u.cw, expected_count(n, u.cw));
            for m in 1..=c.p() {
                terms.push(format!("(= {} {})", u.state(QubitRef::phase(m)).r, bv(0, n)));
                terms.push(format!("(= {} {expect})", u.counter(m, m)));
                let stray: Vec<u32> = u
                    .counters
                    .keys()
                    .filter(|&&(mm, l)| mm == m && l != m)
                    .map(|&(_, l)| l)
                    .collect();
                for l in stray {
                    terms.push(format!("(= {} {})", u.counter(m, l), bv(0, u.cw)));
                }
            }
        }
    }
    terms
}

/// SMT-LIB2 script for `id`, with the iQFT block auto-detected.
pub fn emit_smtlib(c: &Circuit, id: PropertyId) -> String {
    emit_smtlib_with_block(c, id, None).expect("auto-detected block is always valid")
}

/// SMT-LIB2 script for `id`; `block` overrides iQFT detection.
pub fn emit_smtlib_with_block(
    c: &Circuit,
    id: PropertyId,
    block: Option<&IqftBlock>,
) -> Result<String, PropertyError> {
    let (subject, template) = if id == PropertyId::P2Iqft {
        let b = match block {
            Some(b) => b.clone(),
            None => IqftBlock::detect(c),
        };
        (b.circuit(c)?, InputTemplate::IqftSym)
    } else {
        (c.clone(), InputTemplate::Fresh)
    };
    let mut u = Unroller::new(&subject, template);
    u.run();
    let terms = property_terms(&mut u, id);

    let mut out = String::from("(set-logic QF_BV)\n");
    writeln!(out, "; property {id}").unwrap();
    writeln!(
        out,
        "; circuit {} n={} p={} max_h={}",
        c.digest(),
        c.n(),
        c.p(),
        c.max_h()
    )
    .unwrap();
    if id == PropertyId::P2Iqft {
        writeln!(out, "; iqft block ops {} (template IQFT_SYM)", subject.len()).unwrap();
    }
    out.push_str("(set-option :produce-models true)\n");
    for j in 1..=c.n() {
        writeln!(out, "(declare-fun b_{j} () (_ BitVec 1))").unwrap();
    }
    out.push_str(&u.out);
    writeln!(out, "(assert (not {}))", conj(&terms)).unwrap();
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(out)
}

/// Structural sanity check: logic header, balanced parentheses, exactly
/// `n` declared symbols and a `check-sat` command.
pub fn check_well_formed(script: &str, n: u32) -> Result<(), String> {
    let mut depth: i64 = 0;
    let mut code = String::new();
    for (lineno, line) in script.lines().enumerate() {
        let line = line.split(';').next().unwrap_or("");
        for ch in line.chars() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth < 0 {
                        return Err(format!("unbalanced ')' on line {}", lineno + 1));
                    }
                }
                _ => {}
            }
        }
        code.push_str(line);
        code.push('\n');
    }
    if depth != 0 {
        return Err(format!("{depth} unclosed '('"));
    }
    let first = code.split_whitespace().collect::<Vec<_>>().join(" ");
    if !first.starts_with("(set-logic QF_BV)") {
        return Err("script does not start with (set-logic QF_BV)".into());
    }
    let declared = code.matches("(declare-fun").count() + code.matches("(declare-const").count();
    if declared != n as usize {
        return Err(format!("{declared} declared symbols, expected {n}"));
    }
    if !code.contains("(check-sat)") {
        return Err("missing (check-sat)".into());
    }
    Ok(())
}
