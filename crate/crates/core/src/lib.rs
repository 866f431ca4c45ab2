//! Exact statevector simulation of permutation-inversion reflections.
//!
//! # Overview
//!
//! This crate simulates, exactly and in double precision, the operator family
//! used to invert an n-bit permutation f with reflections: the XOR oracle
//! `U_f`, the tagging operators `O` (full match) and `O[k]` (two-bit match),
//! the conditional reflections `Q_j` about prefix-matched preimage sets, the
//! in-place relabeling `M_f`, and the f-free conjugated form `Q'_j`. On top
//! of those it runs three algorithms: exact inversion in n/2 reflection
//! rounds, plain amplitude-amplification search, and amplitude-amplification
//! inversion, with exact readout of every probability.
//!
//! Every operator exists in two forms that are tested against each other:
//!
//! * a **semantic** form acting directly on a [`state::StateVector`], and
//! * a **lowered** [`circuits::GateCircuit`] over {H, X, CNOT, CZ, TOFFOLI,
//!   SWAP} plus counted multi-controlled intermediates and opaque oracle
//!   calls.
//!
//! The semantic form is the reference; the circuit form is the verification
//! backend and the source of gate/oracle counts. [`dense`] builds explicit
//! matrices of either form (≤ 10 qubits) for the equivalence checks.
//!
//! # Conventions
//!
//! Basis labels concatenate register contents in declaration order, first
//! register most significant; within a register, bit 1 is the leftmost bit.
//! States are bounded to 26 qubits unless `REFLECTRON_MAX_QUBITS` overrides
//! the guard. All tolerances are explicit at call sites; nothing is sampled.

pub mod algorithms;
pub mod bits;
pub mod circuits;
pub mod dense;
pub mod error;
pub mod gate;
pub mod layout;
pub mod operators;
pub mod perm;
pub mod state;

pub use error::{Error, Result};
pub use gate::Gate;
pub use layout::RegisterLayout;
pub use perm::{GeneratorKind, PermutationTable};
pub use state::StateVector;
