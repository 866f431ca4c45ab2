//! Gate-level lowerings of the operator family.
//!
//! A [`GateCircuit`] is a straight-line program over the elementary gate set
//! plus opaque oracle calls, written against its own register layout. Every
//! element used here is self-inverse, so the adjoint of a circuit is the
//! reversed op list. A circuit may also carry a global −1 phase marker:
//! reflections built from an X-conjugated multi-controlled Z produce
//! I − 2|s⟩⟨s|, and the marker turns that into the true 2|s⟩⟨s| − I. The
//! marker is part of the operator, not bookkeeping: once a reflection is
//! conditioned on other registers, a dropped marker becomes a relative
//! phase between subspaces, which [`verify_equivalence`] reports through
//! `exact_deviation` (and would be invisible in `phase_aligned_deviation`).
//!
//! Lowerings are verified against the semantic forms either densely (full
//! matrix over the operator's own registers, ancillas pinned to |0⟩) or on
//! seeded random states.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::bits;
use crate::dense::{self, DENSE_MAX_QUBITS};
use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::layout::{Register, RegisterLayout};
use crate::operators::{OperatorHandle, OperatorKind, REG_DATA, REG_IMAGE, REG_INPUT};
use crate::perm::PermutationTable;
use crate::state::{random_state, StateVector};

pub const REG_SCRATCH: &str = "a";
pub const REG_FLAG: &str = "flag";

/// Which function an oracle call queries. Both directions count as one call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleLabel {
    Forward,
    Inverse,
}

impl OracleLabel {
    pub fn token(self) -> &'static str {
        match self {
            OracleLabel::Forward => "U_f",
            OracleLabel::Inverse => "U_finv",
        }
    }
}

#[derive(Clone, Debug)]
pub enum CircuitOp {
    Gate(Gate),
    /// XOR-style query: `output ⊕= table(input)`. `table` is the function
    /// actually applied; `label` records whether that is f or f⁻¹.
    Oracle {
        table: Arc<PermutationTable>,
        label: OracleLabel,
        input: String,
        output: String,
    },
}

#[derive(Clone, Debug)]
pub struct GateCircuit {
    name: &'static str,
    layout: RegisterLayout,
    ancillas: Vec<String>,
    ops: Vec<CircuitOp>,
    negative_phase: bool,
}

/// Per-kind gate tallies for one circuit.
#[derive(Clone, Debug, Serialize)]
pub struct GateCounts {
    pub gates: BTreeMap<String, usize>,
    pub total_gates: usize,
    pub oracle_calls: usize,
    pub total_qubits: usize,
    pub ancilla_qubits: usize,
}

impl GateCircuit {
    fn new(name: &'static str, layout: RegisterLayout, ancillas: &[&str]) -> Self {
        Self {
            name,
            layout,
            ancillas: ancillas.iter().map(|s| s.to_string()).collect(),
            ops: Vec::new(),
            negative_phase: false,
        }
    }

    fn push(&mut self, gate: Gate) {
        gate.validate(self.layout.total_width())
            .expect("builders emit gates within their own layout");
        self.ops.push(CircuitOp::Gate(gate));
    }

    fn push_oracle(&mut self, table: Arc<PermutationTable>, label: OracleLabel, input: &str, output: &str) {
        self.ops.push(CircuitOp::Oracle {
            table,
            label,
            input: input.to_string(),
            output: output.to_string(),
        });
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }

    /// Names of registers that must enter and leave as |0⟩.
    pub fn ancilla_names(&self) -> impl Iterator<Item = &str> {
        self.ancillas.iter().map(|s| s.as_str())
    }

    pub fn has_negative_phase(&self) -> bool {
        self.negative_phase
    }

    /// The inverse circuit: every element is self-inverse, so reversing the
    /// op order suffices. The phase marker is its own inverse.
    pub fn reversed(&self) -> GateCircuit {
        let mut out = self.clone();
        out.ops.reverse();
        out
    }

    /// Runs the circuit on a state that contains every circuit register
    /// (same name, same width). Extra registers in the state are untouched.
    pub fn apply_to(&self, state: &mut StateVector) -> Result<()> {
        let mut spans = Vec::new();
        for reg in self.layout.registers() {
            let sreg = state.layout().register(reg.name())?;
            if sreg.width() != reg.width() {
                return Err(Error::RegisterWidthMismatch {
                    register: reg.name().to_string(),
                    expected: reg.width(),
                    actual: sreg.width(),
                });
            }
            spans.push((reg.qubit(1), sreg.qubit(1), reg.width()));
        }
        let map = |q: usize| {
            spans
                .iter()
                .find(|(cs, _, w)| q >= *cs && q < cs + w)
                .map(|(cs, ss, _)| ss + (q - cs))
                .expect("circuit ops stay within circuit registers")
        };
        for op in &self.ops {
            match op {
                CircuitOp::Gate(gate) => state.apply_gate(&gate.map_qubits(map))?,
                CircuitOp::Oracle { table, input, output, .. } => {
                    state.xor_oracle(input, output, table)?;
                }
            }
        }
        if self.negative_phase {
            state.scale(-Complex64::ONE);
        }
        Ok(())
    }

    pub fn counts(&self) -> GateCounts {
        let mut gates = BTreeMap::new();
        let mut oracle_calls = 0usize;
        for op in &self.ops {
            match op {
                CircuitOp::Gate(g) => {
                    *gates.entry(g.kind_name().to_string()).or_insert(0) += 1;
                }
                CircuitOp::Oracle { .. } => oracle_calls += 1,
            }
        }
        let total_gates = gates.values().sum();
        let ancilla_qubits = self
            .ancillas
            .iter()
            .map(|name| self.layout.register(name).map(Register::width).unwrap_or(0))
            .sum();
        GateCounts {
            gates,
            total_gates,
            oracle_calls,
            total_qubits: self.layout.total_width(),
            ancilla_qubits,
        }
    }

    /// Plain-text listing: a header, the phase marker if set, then one line
    /// per element in program order.
    pub fn dump(&self) -> String {
        let mut out = format!("circuit v1 width={}\n", self.layout.total_width());
        if self.negative_phase {
            out.push_str("PHASE -1\n");
        }
        for op in &self.ops {
            match op {
                CircuitOp::Gate(g) => out.push_str(&g.dump_line()),
                CircuitOp::Oracle { label, input, output, .. } => {
                    out.push_str(&format!("ORACLE {} {input} {output}", label.token()));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Splices `source`'s ops into `self`, renaming registers via the
    /// `(source, target)` pairs (registers absent from the list keep their
    /// name). Target registers must exist here with matching widths.
    fn inline(&mut self, source: &GateCircuit, rename: &[(&str, &str)]) -> Result<()> {
        let mut spans = Vec::new();
        for reg in source.layout.registers() {
            let target_name = rename
                .iter()
                .find(|(from, _)| *from == reg.name())
                .map(|(_, to)| *to)
                .unwrap_or(reg.name());
            let treg = self.layout.register(target_name)?;
            if treg.width() != reg.width() {
                return Err(Error::RegisterWidthMismatch {
                    register: target_name.to_string(),
                    expected: reg.width(),
                    actual: treg.width(),
                });
            }
            spans.push((reg.qubit(1), treg.qubit(1), reg.width(), reg.name().to_string(), target_name.to_string()));
        }
        let map = |q: usize| {
            spans
                .iter()
                .find(|(cs, _, w, _, _)| q >= *cs && q < cs + w)
                .map(|(cs, ts, _, _, _)| ts + (q - cs))
                .expect("inlined ops stay within source registers")
        };
        let rename_reg = |name: &str| {
            spans
                .iter()
                .find(|(_, _, _, from, _)| from == name)
                .map(|(_, _, _, _, to)| to.clone())
                .expect("oracle registers are part of the source layout")
        };
        for op in &source.ops {
            match op {
                CircuitOp::Gate(g) => self.ops.push(CircuitOp::Gate(g.map_qubits(map))),
                CircuitOp::Oracle { table, label, input, output } => {
                    self.ops.push(CircuitOp::Oracle {
                        table: table.clone(),
                        label: *label,
                        input: rename_reg(input),
                        output: rename_reg(output),
                    });
                }
            }
        }
        self.negative_phase ^= source.negative_phase;
        Ok(())
    }
}

/// One oracle call on (x, y).
pub fn lower_u_f(f: Arc<PermutationTable>) -> Result<GateCircuit> {
    let n = f.width();
    let layout = RegisterLayout::new(&[(REG_INPUT, n), (REG_DATA, n)])?;
    let mut c = GateCircuit::new("u_f", layout, &[]);
    c.push_oracle(f, OracleLabel::Forward, REG_INPUT, REG_DATA);
    Ok(c)
}

/// Full tag against classical x: copy f(y) into scratch, X the bits where x
/// is 0 so a hit reads all-ones, apply a multi-controlled Z, undo.
pub fn lower_tag_full(f: Arc<PermutationTable>, x: usize) -> Result<GateCircuit> {
    let n = f.width();
    if x >= f.cardinality() {
        return Err(Error::ValueWidth { value: x, width: n });
    }
    let layout = RegisterLayout::new(&[(REG_DATA, n), (REG_SCRATCH, n)])?;
    let mut c = GateCircuit::new("o_full", layout, &[REG_SCRATCH]);
    let a = c.layout.register(REG_SCRATCH)?.clone();
    c.push_oracle(f.clone(), OracleLabel::Forward, REG_DATA, REG_SCRATCH);
    let zero_bits: Vec<usize> =
        (1..=n).filter(|&i| bits::bit_at(x, n, i) == 0).map(|i| a.qubit(i)).collect();
    for &q in &zero_bits {
        c.push(Gate::X(q));
    }
    if n >= 2 {
        c.push(Gate::Mcz { qubits: (1..=n).map(|i| a.qubit(i)).collect() });
    } else {
        // single-bit phase: Z as H·X·H
        c.push(Gate::H(a.qubit(1)));
        c.push(Gate::X(a.qubit(1)));
        c.push(Gate::H(a.qubit(1)));
    }
    for &q in zero_bits.iter().rev() {
        c.push(Gate::X(q));
    }
    c.push_oracle(f, OracleLabel::Forward, REG_DATA, REG_SCRATCH);
    Ok(c)
}

/// Two-bit tag at positions k, k+1: copy f(y) into scratch, XOR in x so a
/// match reads 0, flip to read 1, CZ the pair, undo.
pub fn lower_tag_pair(f: Arc<PermutationTable>, k: usize) -> Result<GateCircuit> {
    let n = f.width();
    if k < 1 || k > n - 1 {
        return Err(Error::TagBitOutOfRange { k, n });
    }
    let layout = RegisterLayout::new(&[(REG_INPUT, n), (REG_DATA, n), (REG_SCRATCH, n)])?;
    let mut c = GateCircuit::new("o_pair", layout, &[REG_SCRATCH]);
    let x = c.layout.register(REG_INPUT)?.clone();
    let a = c.layout.register(REG_SCRATCH)?.clone();
    c.push_oracle(f.clone(), OracleLabel::Forward, REG_DATA, REG_SCRATCH);
    for i in [k, k + 1] {
        c.push(Gate::Cnot { control: x.qubit(i), target: a.qubit(i) });
    }
    for i in [k, k + 1] {
        c.push(Gate::X(a.qubit(i)));
    }
    c.push(Gate::Cz(a.qubit(k), a.qubit(k + 1)));
    for i in [k + 1, k] {
        c.push(Gate::X(a.qubit(i)));
    }
    for i in [k + 1, k] {
        c.push(Gate::Cnot { control: x.qubit(i), target: a.qubit(i) });
    }
    c.push_oracle(f, OracleLabel::Forward, REG_DATA, REG_SCRATCH);
    Ok(c)
}

/// Emits 2|0…0⟩⟨0…0| − I on `qubits` into `ops`; returns true when the
/// emitted gates realize the negative of that reflection, i.e. the caller
/// must add a global −1.
fn reflect_zero_body(qubits: &[usize], c: &mut GateCircuit) -> bool {
    if qubits.len() == 1 {
        // Z is exactly the one-qubit reflection about |0⟩
        c.push(Gate::H(qubits[0]));
        c.push(Gate::X(qubits[0]));
        c.push(Gate::H(qubits[0]));
        return false;
    }
    for &q in qubits {
        c.push(Gate::X(q));
    }
    c.push(phase_on_all_ones(qubits));
    for &q in qubits.iter().rev() {
        c.push(Gate::X(q));
    }
    true
}

/// Phase −1 exactly on |1…1⟩ of the listed qubits, picking the smallest
/// fitting gate kind.
fn phase_on_all_ones(qubits: &[usize]) -> Gate {
    match qubits.len() {
        2 => Gate::Cz(qubits[0], qubits[1]),
        _ => Gate::Mcz { qubits: qubits.to_vec() },
    }
}

/// Reflection about the all-zero state of one register.
pub fn lower_reflect_zero(width: usize) -> Result<GateCircuit> {
    let layout = RegisterLayout::new(&[(REG_DATA, width)])?;
    let mut c = GateCircuit::new("reflect_zero", layout, &[]);
    let y = c.layout.register(REG_DATA)?.clone();
    let qubits: Vec<usize> = (1..=width).map(|i| y.qubit(i)).collect();
    c.negative_phase = reflect_zero_body(&qubits, &mut c);
    Ok(c)
}

/// Reflection about the uniform superposition: H, reflect about zero, H.
pub fn lower_diffusion(width: usize) -> Result<GateCircuit> {
    let layout = RegisterLayout::new(&[(REG_DATA, width)])?;
    let mut c = GateCircuit::new("diffusion", layout, &[]);
    let y = c.layout.register(REG_DATA)?.clone();
    let qubits: Vec<usize> = (1..=width).map(|i| y.qubit(i)).collect();
    for &q in &qubits {
        c.push(Gate::H(q));
    }
    c.negative_phase = reflect_zero_body(&qubits, &mut c);
    for &q in qubits.iter().rev() {
        c.push(Gate::H(q));
    }
    Ok(c)
}

/// The conditioned suffix reflection on (x, z).
///
/// For j ≥ 1: CNOT/X turn the first 2j bits of z into an all-ones pattern
/// exactly when they match x, a multi-controlled X folds that into a flag
/// qubit, and the flag joins the controls of the suffix reflection's
/// phase gate. The phase marker then flips matched blocks from I − 2|ψ⟩⟨ψ|
/// to the true reflection and unmatched blocks from I to −I in one stroke.
/// For j = 0 every block matches and this is the plain diffusion.
pub fn lower_q_prime(n: usize, j: usize) -> Result<GateCircuit> {
    if j >= n / 2 {
        return Err(Error::ReflectionIndexOutOfRange { j, n });
    }
    if j == 0 {
        let layout = RegisterLayout::new(&[(REG_INPUT, n), (REG_IMAGE, n)])?;
        let mut c = GateCircuit::new("q_prime", layout, &[]);
        let z = c.layout.register(REG_IMAGE)?.clone();
        let qubits: Vec<usize> = (1..=n).map(|i| z.qubit(i)).collect();
        for &q in &qubits {
            c.push(Gate::H(q));
        }
        c.negative_phase = reflect_zero_body(&qubits, &mut c);
        for &q in qubits.iter().rev() {
            c.push(Gate::H(q));
        }
        return Ok(c);
    }

    let layout = RegisterLayout::new(&[(REG_INPUT, n), (REG_IMAGE, n), (REG_FLAG, 1)])?;
    let mut c = GateCircuit::new("q_prime", layout, &[REG_FLAG]);
    let x = c.layout.register(REG_INPUT)?.clone();
    let z = c.layout.register(REG_IMAGE)?.clone();
    let flag = c.layout.register(REG_FLAG)?.qubit(1);
    let prefix: Vec<usize> = (1..=2 * j).map(|i| z.qubit(i)).collect();
    let suffix: Vec<usize> = (2 * j + 1..=n).map(|i| z.qubit(i)).collect();

    for i in 1..=2 * j {
        c.push(Gate::Cnot { control: x.qubit(i), target: z.qubit(i) });
    }
    for &q in &prefix {
        c.push(Gate::X(q));
    }
    let fold = match prefix.len() {
        2 => Gate::Toffoli { controls: [prefix[0], prefix[1]], target: flag },
        _ => Gate::Mcx { controls: prefix.clone(), target: flag },
    };
    c.push(fold.clone());

    for &q in &suffix {
        c.push(Gate::H(q));
    }
    for &q in &suffix {
        c.push(Gate::X(q));
    }
    let mut phase_qubits = vec![flag];
    phase_qubits.extend_from_slice(&suffix);
    c.push(phase_on_all_ones(&phase_qubits));
    for &q in suffix.iter().rev() {
        c.push(Gate::X(q));
    }
    for &q in suffix.iter().rev() {
        c.push(Gate::H(q));
    }

    c.push(fold);
    for i in (1..=2 * j).rev() {
        c.push(Gate::X(z.qubit(i)));
        c.push(Gate::Cnot { control: x.qubit(i), target: z.qubit(i) });
    }
    c.negative_phase = true;
    Ok(c)
}

/// In-place relabel |v⟩ ↦ |f(v)⟩: copy f(v) out, swap, erase v with an
/// f⁻¹ query. Swaps are spelled as CNOT triples.
pub fn lower_m_f(f: Arc<PermutationTable>) -> Result<GateCircuit> {
    let n = f.width();
    let layout = RegisterLayout::new(&[(REG_DATA, n), (REG_SCRATCH, n)])?;
    let mut c = GateCircuit::new("m_f", layout, &[REG_SCRATCH]);
    let y = c.layout.register(REG_DATA)?.clone();
    let a = c.layout.register(REG_SCRATCH)?.clone();
    let f_inv = Arc::new(f.inverse());
    c.push_oracle(f, OracleLabel::Forward, REG_DATA, REG_SCRATCH);
    for i in 1..=n {
        c.push(Gate::Cnot { control: y.qubit(i), target: a.qubit(i) });
        c.push(Gate::Cnot { control: a.qubit(i), target: y.qubit(i) });
        c.push(Gate::Cnot { control: y.qubit(i), target: a.qubit(i) });
    }
    c.push_oracle(f_inv, OracleLabel::Inverse, REG_DATA, REG_SCRATCH);
    Ok(c)
}

/// The conditional reflection as relabel, conditioned suffix reflection,
/// relabel back: four oracle calls total.
pub fn lower_q(f: Arc<PermutationTable>, j: usize) -> Result<GateCircuit> {
    let n = f.width();
    if j >= n / 2 {
        return Err(Error::ReflectionIndexOutOfRange { j, n });
    }
    let mut regs = vec![(REG_INPUT, n), (REG_DATA, n), (REG_SCRATCH, n)];
    let mut ancillas = vec![REG_SCRATCH];
    if j >= 1 {
        regs.push((REG_FLAG, 1));
        ancillas.push(REG_FLAG);
    }
    let layout = RegisterLayout::new(&regs)?;
    let mut c = GateCircuit::new("q", layout, &ancillas);
    let relabel = lower_m_f(f.clone())?;
    let middle = lower_q_prime(n, j)?;
    c.inline(&relabel, &[])?;
    c.inline(&middle, &[(REG_IMAGE, REG_DATA)])?;
    c.inline(&relabel.reversed(), &[])?;
    Ok(c)
}

/// Lowers any operator handle to its gate circuit.
pub fn lower_operator(op: &OperatorHandle) -> Result<GateCircuit> {
    match op.kind() {
        OperatorKind::XorOracle { f } => lower_u_f(f.clone()),
        OperatorKind::TagFull { f, x } => lower_tag_full(f.clone(), *x),
        OperatorKind::TagPair { f, k } => lower_tag_pair(f.clone(), *k),
        OperatorKind::Diffusion { width } => lower_diffusion(*width),
        OperatorKind::PrefixReflection { f, j } => lower_q(f.clone(), *j),
        OperatorKind::SuffixReflection { n, j } => lower_q_prime(*n, *j),
        OperatorKind::Relabel { f } => lower_m_f(f.clone()),
        OperatorKind::ConjugatedReflection { f, j, .. } => lower_q(f.clone(), *j),
    }
}

/// Expands a multi-controlled gate into {CNOT, CZ, TOFFOLI} plus H, using a
/// compute/uncompute AND-ladder for three or more controls. Ladder ancillas
/// are fresh qubit lines starting at `ancilla_base`; the second element of
/// the result is how many were used. The caller guarantees the base leaves
/// room (no collision with the gate's own qubits).
pub fn multi_controlled_decomposition(
    gate: &Gate,
    ancilla_base: usize,
) -> Result<(Vec<Gate>, usize)> {
    let (controls, target, phase) = match gate {
        Gate::Mcz { qubits } => {
            if qubits.len() < 2 {
                return Err(Error::NoControls);
            }
            (&qubits[..qubits.len() - 1], qubits[qubits.len() - 1], true)
        }
        Gate::Mcx { controls, target } => {
            if controls.is_empty() {
                return Err(Error::NoControls);
            }
            (&controls[..], *target, false)
        }
        other => return Err(Error::NotMultiControlled(other.kind_name())),
    };
    let gates = match controls.len() {
        1 => {
            let c0 = controls[0];
            if phase {
                vec![Gate::Cz(c0, target)]
            } else {
                vec![Gate::Cnot { control: c0, target }]
            }
        }
        2 => {
            let core = Gate::Toffoli { controls: [controls[0], controls[1]], target };
            if phase {
                vec![Gate::H(target), core, Gate::H(target)]
            } else {
                vec![core]
            }
        }
        c => {
            let mut ladder = Vec::with_capacity(c - 1);
            ladder.push(Gate::Toffoli {
                controls: [controls[0], controls[1]],
                target: ancilla_base,
            });
            for (i, &ctrl) in controls.iter().enumerate().skip(2) {
                ladder.push(Gate::Toffoli {
                    controls: [ancilla_base + i - 2, ctrl],
                    target: ancilla_base + i - 1,
                });
            }
            let top = ancilla_base + c - 2;
            let core = if phase {
                Gate::Cz(top, target)
            } else {
                Gate::Cnot { control: top, target }
            };
            let mut gates = ladder.clone();
            gates.push(core);
            gates.extend(ladder.into_iter().rev());
            gates
        }
    };
    // the ladder holds c−1 partial products; below three controls none exist
    let ancillas = if controls.len() >= 3 { controls.len() - 1 } else { 0 };
    Ok((gates, ancillas))
}

#[derive(Clone, Copy, Debug)]
pub enum VerifyMode {
    /// Full matrix over the operator's registers; ancillas pinned to |0⟩.
    Dense,
    /// Seeded random probe states, embedded and compared per state.
    Sampled { states: usize },
}

/// Number of probe states sampled verification uses unless told otherwise.
pub const DEFAULT_SAMPLED_STATES: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub operator: String,
    pub mode: &'static str,
    pub compared_qubits: usize,
    pub circuit_qubits: usize,
    pub ancilla_qubits: usize,
    pub states_checked: usize,
    /// max |semantic − lowered| over compared amplitudes. Includes any
    /// global phase: a lowering that is only correct up to −1 fails here.
    pub exact_deviation: f64,
    /// Deviation after aligning one global phase, for diagnosis.
    pub phase_aligned_deviation: f64,
    /// max |amplitude| left outside the all-zero ancilla subspace.
    pub ancilla_leak: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Checks a lowered circuit against the semantic operator.
pub fn verify_equivalence(
    op: &OperatorHandle,
    circuit: &GateCircuit,
    mode: VerifyMode,
    tolerance: f64,
    seed: u64,
) -> Result<EquivalenceReport> {
    let sem_layout = op.layout();
    let circ_layout = circuit.layout();
    for reg in circ_layout.registers() {
        let is_semantic = sem_layout.contains(reg.name());
        let is_ancilla = circuit.ancillas.iter().any(|a| a == reg.name());
        if !is_semantic && !is_ancilla {
            return Err(Error::LayoutMismatch(format!(
                "circuit register {} is neither an operator register nor an ancilla",
                reg.name()
            )));
        }
    }
    let width = sem_layout.total_width();
    let dim = sem_layout.dimension();
    // embedding of a semantic basis label into the circuit's label space
    let mut embed = vec![0usize; dim];
    for (b, slot) in embed.iter_mut().enumerate() {
        let mut idx = 0usize;
        for reg in sem_layout.registers() {
            let creg = circ_layout.register(reg.name())?;
            idx |= reg.value_of(b) << creg.shift();
        }
        *slot = idx;
    }
    let ancilla_mask: usize = circuit
        .ancillas
        .iter()
        .map(|name| circ_layout.register(name).map(|r| r.mask()).unwrap_or(0))
        .sum();

    let mut exact = 0.0f64;
    let mut aligned = 0.0f64;
    let mut leak = 0.0f64;
    let states_checked;

    match mode {
        VerifyMode::Dense => {
            if width > DENSE_MAX_QUBITS {
                return Err(Error::DenseWidth { width, max: DENSE_MAX_QUBITS });
            }
            let u_sem = op.dense()?;
            let mut u_circ = ndarray::Array2::zeros((dim, dim));
            for col in 0..dim {
                let mut st = StateVector::from_basis_index(circ_layout.clone(), embed[col]);
                circuit.apply_to(&mut st)?;
                for (idx, amp) in st.amplitudes().iter().enumerate() {
                    if idx & ancilla_mask != 0 {
                        leak = leak.max(amp.norm());
                    }
                }
                for (row, &cidx) in embed.iter().enumerate() {
                    u_circ[(row, col)] = st.amplitudes()[cidx];
                }
            }
            exact = dense::max_abs_diff(&u_sem, &u_circ);
            aligned = dense::phase_aligned_diff(&u_sem, &u_circ);
            states_checked = dim;
        }
        VerifyMode::Sampled { states } => {
            for s in 0..states {
                let probe = random_state(sem_layout.clone(), seed.wrapping_add(s as u64));
                let mut sem = probe.clone();
                op.apply(&mut sem)?;
                let mut circ = StateVector::zeroed(circ_layout.clone());
                circ.amplitudes_mut()[0] = Complex64::ZERO;
                for (b, &cidx) in embed.iter().enumerate() {
                    circ.amplitudes_mut()[cidx] = probe.amplitude(b);
                }
                circuit.apply_to(&mut circ)?;
                for (idx, amp) in circ.amplitudes().iter().enumerate() {
                    if idx & ancilla_mask != 0 {
                        leak = leak.max(amp.norm());
                    }
                }
                let restricted: Vec<Complex64> =
                    embed.iter().map(|&cidx| circ.amplitudes()[cidx]).collect();
                exact = exact.max(dense::max_amp_diff(sem.amplitudes(), &restricted));
                aligned = aligned
                    .max(dense::phase_aligned_amp_diff(sem.amplitudes(), &restricted));
            }
            states_checked = states;
        }
    }

    let counts = circuit.counts();
    Ok(EquivalenceReport {
        operator: op.name().to_string(),
        mode: match mode {
            VerifyMode::Dense => "dense",
            VerifyMode::Sampled { .. } => "sampled",
        },
        compared_qubits: width,
        circuit_qubits: circ_layout.total_width(),
        ancilla_qubits: counts.ancilla_qubits,
        states_checked,
        exact_deviation: exact,
        phase_aligned_deviation: aligned,
        ancilla_leak: leak,
        tolerance,
        passed: exact <= tolerance && leak <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{
        make_diffusion, make_q, make_q_prime, make_tag_full, make_tag_pair, make_u_f,
    };
    use crate::perm::GeneratorKind;

    const TOL: f64 = 1e-9;

    fn table(kind: GeneratorKind, n: usize, seed: u64) -> Arc<PermutationTable> {
        Arc::new(PermutationTable::generate(kind, n, seed).unwrap())
    }

    #[test]
    fn tag_pair_lowering_matches_and_counts_are_fixed() {
        let f = table(GeneratorKind::Random, 3, 4);
        let op = make_tag_pair(f.clone(), 2).unwrap();
        let circuit = lower_tag_pair(f, 2).unwrap();
        let report =
            verify_equivalence(&op, &circuit, VerifyMode::Dense, TOL, 1).unwrap();
        assert!(report.passed, "deviation {}", report.exact_deviation);
        let counts = circuit.counts();
        assert_eq!(counts.oracle_calls, 2);
        assert_eq!(counts.gates["CNOT"], 4);
        assert_eq!(counts.gates["X"], 4);
        assert_eq!(counts.gates["CZ"], 1);
        assert_eq!(counts.ancilla_qubits, 3);
    }

    #[test]
    fn tag_full_lowering_matches_for_every_target() {
        let f = table(GeneratorKind::Random, 3, 8);
        for x in 0..8 {
            let op = make_tag_full(f.clone(), x).unwrap();
            let circuit = lower_tag_full(f.clone(), x).unwrap();
            let report =
                verify_equivalence(&op, &circuit, VerifyMode::Dense, TOL, 1).unwrap();
            assert!(report.passed, "x={x}: deviation {}", report.exact_deviation);
        }
    }

    #[test]
    fn diffusion_and_u_f_lowerings_match() {
        let f = table(GeneratorKind::Random, 2, 3);
        let report = verify_equivalence(
            &make_u_f(f.clone()),
            &lower_u_f(f).unwrap(),
            VerifyMode::Dense,
            TOL,
            1,
        )
        .unwrap();
        assert!(report.passed);
        for width in [1usize, 2, 3, 4] {
            let op = make_diffusion(width).unwrap();
            let circuit = lower_diffusion(width).unwrap();
            let report =
                verify_equivalence(&op, &circuit, VerifyMode::Dense, TOL, 1).unwrap();
            assert!(report.passed, "width {width}: {}", report.exact_deviation);
        }
    }

    #[test]
    fn m_f_lowering_matches_on_every_basis_state() {
        let f = table(GeneratorKind::Random, 4, 12);
        let circuit = lower_m_f(f.clone()).unwrap();
        assert_eq!(circuit.counts().oracle_calls, 2);
        assert_eq!(circuit.counts().gates["CNOT"], 12);
        for v in 0..16usize {
            let mut st = StateVector::from_basis_index(circuit.layout().clone(), v << 4);
            circuit.apply_to(&mut st).unwrap();
            let expected = f.apply(v) << 4;
            assert!((st.amplitude(expected) - Complex64::ONE).norm() < 1e-12);
        }
    }

    #[test]
    fn q_prime_lowering_matches_exactly_including_block_signs() {
        for (n, j) in [(2, 0), (4, 0), (4, 1), (5, 1)] {
            let op = make_q_prime(n, j).unwrap();
            let circuit = lower_q_prime(n, j).unwrap();
            let report =
                verify_equivalence(&op, &circuit, VerifyMode::Dense, TOL, 1).unwrap();
            assert!(
                report.passed,
                "n={n} j={j}: exact {} leak {}",
                report.exact_deviation, report.ancilla_leak
            );
        }
    }

    #[test]
    fn dropping_the_phase_marker_is_a_global_but_not_relative_error() {
        // the marker-free circuit is −Q': phase alignment hides it, the
        // exact comparison pins it at 2 (the unmatched diagonal is ±1)
        let op = make_q_prime(4, 1).unwrap();
        let mut broken = lower_q_prime(4, 1).unwrap();
        broken.negative_phase = false;
        let report = verify_equivalence(&op, &broken, VerifyMode::Dense, TOL, 1).unwrap();
        assert!(!report.passed);
        assert!((report.exact_deviation - 2.0).abs() < 1e-12);
        assert!(report.phase_aligned_deviation < 1e-12);
    }

    #[test]
    fn q_lowering_matches_in_dense_and_sampled_modes() {
        let f = table(GeneratorKind::Random, 4, 6);
        for j in [0, 1] {
            let op = make_q(f.clone(), j).unwrap();
            let circuit = lower_q(f.clone(), j).unwrap();
            assert_eq!(circuit.counts().oracle_calls, 4);
            let dense_report =
                verify_equivalence(&op, &circuit, VerifyMode::Dense, TOL, 1).unwrap();
            assert!(
                dense_report.passed,
                "j={j}: exact {} leak {}",
                dense_report.exact_deviation, dense_report.ancilla_leak
            );
            let sampled_report = verify_equivalence(
                &op,
                &circuit,
                VerifyMode::Sampled { states: 25 },
                TOL,
                7,
            )
            .unwrap();
            assert!(sampled_report.passed);
            assert_eq!(sampled_report.states_checked, 25);
        }
    }

    #[test]
    fn reversed_circuit_is_the_inverse() {
        let f = table(GeneratorKind::Random, 4, 9);
        let circuit = lower_q(f, 1).unwrap();
        let mut st = random_state(circuit.layout().clone(), 33);
        let before = st.clone();
        circuit.apply_to(&mut st).unwrap();
        circuit.reversed().apply_to(&mut st).unwrap();
        assert!(dense::max_amp_diff(st.amplitudes(), before.amplitudes()) < 1e-12);
    }

    #[test]
    fn decomposition_handles_each_control_arity() {
        let (gates, anc) =
            multi_controlled_decomposition(&Gate::Mcx { controls: vec![0], target: 3 }, 10)
                .unwrap();
        assert_eq!(anc, 0);
        assert!(matches!(gates[0], Gate::Cnot { .. }));

        let (gates, anc) =
            multi_controlled_decomposition(&Gate::Mcx { controls: vec![0, 1], target: 3 }, 10)
                .unwrap();
        assert_eq!((gates.len(), anc), (1, 0));

        let (gates, anc) = multi_controlled_decomposition(
            &Gate::Mcx { controls: vec![0, 1, 2], target: 3 },
            10,
        )
        .unwrap();
        assert_eq!(anc, 2);
        let toffolis = gates
            .iter()
            .filter(|g| matches!(g, Gate::Toffoli { .. }))
            .count();
        assert_eq!(toffolis, 4);
        assert_eq!(gates.len(), 5);

        let (gates, _) = multi_controlled_decomposition(
            &Gate::Mcz { qubits: vec![0, 1, 2] },
            10,
        )
        .unwrap();
        assert!(gates.iter().any(|g| matches!(g, Gate::H(_))));
        assert!(matches!(
            multi_controlled_decomposition(&Gate::H(0), 10),
            Err(Error::NotMultiControlled("H"))
        ));
    }

    #[test]
    fn decomposed_multi_controls_act_identically() {
        // embed gate + ladder ancillas in one wide register and compare
        for (gate, width) in [
            (Gate::Mcx { controls: vec![0, 1, 2, 3], target: 4 }, 5usize),
            (Gate::Mcz { qubits: vec![0, 1, 2, 3] }, 4),
        ] {
            let (gates, anc) = multi_controlled_decomposition(&gate, width).unwrap();
            let layout = RegisterLayout::new(&[(REG_DATA, width + anc)]).unwrap();
            for basis in 0..1usize << width {
                let idx = basis << anc;
                let mut direct = StateVector::from_basis_index(layout.clone(), idx);
                direct.apply_gate(&gate).unwrap();
                let mut lowered = StateVector::from_basis_index(layout.clone(), idx);
                for g in &gates {
                    lowered.apply_gate(g).unwrap();
                }
                assert!(
                    dense::max_amp_diff(direct.amplitudes(), lowered.amplitudes()) < 1e-12
                );
            }
        }
    }

    #[test]
    fn dump_is_stable_and_complete() {
        let f = table(GeneratorKind::Identity, 2, 0);
        let circuit = lower_tag_pair(f, 1).unwrap();
        let dump = circuit.dump();
        let mut lines = dump.lines();
        assert_eq!(lines.next(), Some("circuit v1 width=6"));
        assert_eq!(lines.next(), Some("ORACLE U_f y a"));
        assert_eq!(lines.next(), Some("CNOT q0 q4"));
        assert_eq!(dump.lines().count(), 1 + circuit.ops().len());
        assert!(!dump.contains("PHASE"));

        let reflect = lower_reflect_zero(3).unwrap();
        let dump = reflect.dump();
        assert!(dump.starts_with("circuit v1 width=3\nPHASE -1\nX q0\n"));
        assert!(dump.contains("MCZ q0 q1 q2"));
    }

    #[test]
    fn verify_rejects_foreign_registers() {
        let f = table(GeneratorKind::Random, 2, 3);
        // the pair tag circuit carries x, which the diffusion operator
        // neither owns nor declares as ancilla
        let op = make_diffusion(2).unwrap();
        let circuit = lower_tag_pair(f, 1).unwrap();
        let err = verify_equivalence(&op, &circuit, VerifyMode::Dense, TOL, 1);
        assert!(matches!(err, Err(Error::LayoutMismatch(_))));
    }
}
