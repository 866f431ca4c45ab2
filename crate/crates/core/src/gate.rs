//! The elementary gate set and its multi-controlled extensions.
//!
//! Lowered circuits are written over {H, X, CNOT, CZ, TOFFOLI, SWAP} plus
//! MCZ/MCX kept as counted intermediates; oracle calls are a separate circuit
//! element, never expressed in gates. Qubit indices are global line indices
//! (0 = most significant, see [`crate::layout`]).

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Gate {
    H(usize),
    X(usize),
    Cnot { control: usize, target: usize },
    Cz(usize, usize),
    Toffoli { controls: [usize; 2], target: usize },
    Swap(usize, usize),
    /// Phase −1 exactly when every listed qubit is 1. Symmetric in its
    /// qubits; at least two (one control plus a target by convention).
    Mcz { qubits: Vec<usize> },
    /// Flips `target` when every control is 1. At least one control.
    Mcx { controls: Vec<usize>, target: usize },
}

impl Gate {
    /// Token used in circuit dumps and per-kind tallies.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Gate::H(_) => "H",
            Gate::X(_) => "X",
            Gate::Cnot { .. } => "CNOT",
            Gate::Cz(..) => "CZ",
            Gate::Toffoli { .. } => "TOFFOLI",
            Gate::Swap(..) => "SWAP",
            Gate::Mcz { .. } => "MCZ",
            Gate::Mcx { .. } => "MCX",
        }
    }

    /// Qubits in dump order (controls before targets).
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::H(q) | Gate::X(q) => vec![*q],
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::Cz(a, b) => vec![*a, *b],
            Gate::Toffoli { controls, target } => vec![controls[0], controls[1], *target],
            Gate::Swap(a, b) => vec![*a, *b],
            Gate::Mcz { qubits } => qubits.clone(),
            Gate::Mcx { controls, target } => {
                let mut qs = controls.clone();
                qs.push(*target);
                qs
            }
        }
    }

    /// Checks index bounds, distinctness, and control arity against a line
    /// of `width` qubits.
    pub fn validate(&self, width: usize) -> Result<()> {
        let qs = self.qubits();
        for &q in &qs {
            if q >= width {
                return Err(Error::QubitOutOfRange { qubit: q, width });
            }
        }
        let mut seen = qs.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::RepeatedQubit(w[0]));
        }
        match self {
            Gate::Mcz { qubits } if qubits.len() < 2 => Err(Error::NoControls),
            Gate::Mcx { controls, .. } if controls.is_empty() => Err(Error::NoControls),
            _ => Ok(()),
        }
    }

    /// Rewrites every qubit index through `map` (used when a circuit is
    /// applied to a state with a larger layout).
    pub fn map_qubits(&self, map: impl Fn(usize) -> usize) -> Gate {
        match self {
            Gate::H(q) => Gate::H(map(*q)),
            Gate::X(q) => Gate::X(map(*q)),
            Gate::Cnot { control, target } => Gate::Cnot {
                control: map(*control),
                target: map(*target),
            },
            Gate::Cz(a, b) => Gate::Cz(map(*a), map(*b)),
            Gate::Toffoli { controls, target } => Gate::Toffoli {
                controls: [map(controls[0]), map(controls[1])],
                target: map(*target),
            },
            Gate::Swap(a, b) => Gate::Swap(map(*a), map(*b)),
            Gate::Mcz { qubits } => Gate::Mcz {
                qubits: qubits.iter().map(|q| map(*q)).collect(),
            },
            Gate::Mcx { controls, target } => Gate::Mcx {
                controls: controls.iter().map(|q| map(*q)).collect(),
                target: map(*target),
            },
        }
    }

    /// Dump line for this gate: `<KIND> q<i> [q<j> ...]`.
    pub fn dump_line(&self) -> String {
        let mut line = self.kind_name().to_string();
        for q in self.qubits() {
            line.push_str(&format!(" q{q}"));
        }
        line
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_misuse() {
        assert!(Gate::H(3).validate(4).is_ok());
        assert!(matches!(
            Gate::H(4).validate(4),
            Err(Error::QubitOutOfRange { .. })
        ));
        assert!(matches!(
            Gate::Cnot { control: 1, target: 1 }.validate(4),
            Err(Error::RepeatedQubit(1))
        ));
        assert!(matches!(
            Gate::Mcz { qubits: vec![2] }.validate(4),
            Err(Error::NoControls)
        ));
        assert!(matches!(
            Gate::Mcx { controls: vec![], target: 0 }.validate(4),
            Err(Error::NoControls)
        ));
    }

    #[test]
    fn dump_lines_list_controls_first() {
        let g = Gate::Mcx { controls: vec![0, 2], target: 5 };
        assert_eq!(g.dump_line(), "MCX q0 q2 q5");
        assert_eq!(Gate::H(1).dump_line(), "H q1");
    }
}
