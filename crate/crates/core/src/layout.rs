//! Named registers over a fixed qubit line.
//!
//! A [`RegisterLayout`] is an ordered list of named registers. The composite
//! basis label is the concatenation of register contents in declaration
//! order: the first-declared register is most significant, and within a
//! register bit 1 is the leftmost (most significant) bit. Global qubit
//! indices count from 0 at the most significant end, so qubit 0 is bit 1 of
//! the first register.

use crate::error::{Error, Result};

/// Hard ceiling on total width unless overridden by the environment.
pub const DEFAULT_MAX_QUBITS: usize = 26;

/// Environment variable that overrides [`DEFAULT_MAX_QUBITS`].
pub const MAX_QUBITS_ENV: &str = "REFLECTRON_MAX_QUBITS";

/// Current total-width guard. Re-read on every layout construction so the
/// override behaves predictably in long-lived processes.
pub fn max_total_qubits() -> usize {
    std::env::var(MAX_QUBITS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(DEFAULT_MAX_QUBITS)
}

/// One named register inside a layout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    name: String,
    width: usize,
    /// Qubits to the left of this register (global index of its bit 1).
    offset: usize,
    /// Bits to the right of this register in the basis label.
    shift: usize,
}

impl Register {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of distinct values this register can hold.
    pub fn cardinality(&self) -> usize {
        1 << self.width
    }

    /// Bit-shift of this register's least significant bit in the basis label.
    pub fn shift(&self) -> usize {
        self.shift
    }

    /// Mask selecting this register's bits in a basis label.
    pub fn mask(&self) -> usize {
        ((1usize << self.width) - 1) << self.shift
    }

    /// This register's value inside a composite basis label.
    pub fn value_of(&self, basis: usize) -> usize {
        basis >> self.shift & ((1 << self.width) - 1)
    }

    /// Replaces this register's bits of `basis` with `value`.
    pub fn with_value(&self, basis: usize, value: usize) -> usize {
        debug_assert!(value < self.cardinality());
        (basis & !self.mask()) | (value << self.shift)
    }

    /// Global qubit index of this register's bit `k`, 1-based from the left.
    pub fn qubit(&self, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.width);
        self.offset + k - 1
    }
}

/// Ordered, validated register map for a state or circuit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterLayout {
    regs: Vec<Register>,
    total: usize,
}

impl RegisterLayout {
    /// Builds a layout from `(name, width)` pairs in declaration order.
    ///
    /// Names must be unique, widths positive, and the total width within the
    /// qubit guard (default 26, override via `REFLECTRON_MAX_QUBITS`).
    pub fn new(regs: &[(&str, usize)]) -> Result<Self> {
        let mut out = Vec::with_capacity(regs.len());
        let mut offset = 0usize;
        for (name, width) in regs {
            if *width == 0 {
                return Err(Error::EmptyRegister(name.to_string()));
            }
            if out.iter().any(|r: &Register| r.name == *name) {
                return Err(Error::DuplicateRegister(name.to_string()));
            }
            out.push(Register {
                name: name.to_string(),
                width: *width,
                offset,
                shift: 0, // fixed up below once the total is known
            });
            offset += width;
        }
        let total = offset;
        if total == 0 {
            return Err(Error::LayoutMismatch("layout has no registers".into()));
        }
        let max = max_total_qubits();
        if total > max {
            return Err(Error::WidthGuard { total, max });
        }
        for reg in &mut out {
            reg.shift = total - reg.offset - reg.width;
        }
        Ok(Self { regs: out, total })
    }

    pub fn total_width(&self) -> usize {
        self.total
    }

    /// Dimension of the composite space, `2^total_width`.
    pub fn dimension(&self) -> usize {
        1 << self.total
    }

    pub fn registers(&self) -> impl Iterator<Item = &Register> {
        self.regs.iter()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.regs.iter().any(|r| r.name == name)
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        self.regs
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::UnknownRegister(name.to_string()))
    }

    /// Mask of one global qubit (0 = most significant bit of the label).
    pub fn qubit_mask(&self, qubit: usize) -> usize {
        debug_assert!(qubit < self.total);
        1 << (self.total - 1 - qubit)
    }

    /// Basis label for a full assignment of bit-strings to registers.
    /// Every register must be assigned exactly its width.
    pub fn assignment_index(&self, assignment: &[(&str, &str)]) -> Result<usize> {
        for (name, _) in assignment {
            self.register(name)?;
        }
        let mut basis = 0usize;
        for reg in &self.regs {
            let (_, text) = assignment
                .iter()
                .find(|(name, _)| *name == reg.name)
                .ok_or_else(|| Error::MissingAssignment(reg.name.clone()))?;
            if text.len() != reg.width {
                return Err(Error::RegisterWidthMismatch {
                    register: reg.name.clone(),
                    expected: reg.width,
                    actual: text.len(),
                });
            }
            basis = reg.with_value(basis, crate::bits::parse_bits(text, reg.width)?);
        }
        Ok(basis)
    }
}
