//! Crate-wide error type.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by the
//! subsystem that raises them; messages carry enough context to be surfaced
//! directly by the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    // layout / state construction
    #[error("duplicate register name `{0}`")]
    DuplicateRegister(String),
    #[error("register `{0}` has width 0")]
    EmptyRegister(String),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("total width {total} exceeds the {max}-qubit guard")]
    WidthGuard { total: usize, max: usize },
    #[error("register `{register}` expects {expected} bits, got {actual}")]
    RegisterWidthMismatch {
        register: String,
        expected: usize,
        actual: usize,
    },
    #[error("no value assigned to register `{0}`")]
    MissingAssignment(String),
    #[error("{0}")]
    BadBitString(String),
    #[error("value {value} does not fit in {width} bits")]
    ValueWidth { value: usize, width: usize },

    // gates
    #[error("qubit index {qubit} out of range for width {width}")]
    QubitOutOfRange { qubit: usize, width: usize },
    #[error("gate uses qubit {0} more than once")]
    RepeatedQubit(usize),
    #[error("multi-controlled gate needs at least one control")]
    NoControls,

    // reflections
    #[error("empty reflection subset on populated control value {value:#b}")]
    EmptyReflectionSubset { value: usize },

    // permutation tables
    #[error("bit-width {n} outside supported range {min}..={max}")]
    TableWidth { n: usize, min: usize, max: usize },
    #[error("table is not a bijection: value {value} appears twice")]
    NotABijection { value: usize },
    #[error("table length {len} does not match width {n} (expected {expected})")]
    TableLength { len: usize, n: usize, expected: usize },
    #[error("could not draw an invertible matrix after {0} attempts")]
    SingularRetries(usize),
    #[error("permutation file, line {line}: {problem}")]
    PermFormat { line: usize, problem: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),

    // operators
    #[error("tag position k={k} outside 1..={max} for width {n}", max = .n - 1)]
    TagBitOutOfRange { k: usize, n: usize },
    #[error("reflection index j={j} outside 0..={max} for width {n}", max = .n / 2 - 1)]
    ReflectionIndexOutOfRange { j: usize, n: usize },
    #[error("operator `{0}` takes no classical input register")]
    NoClassicalInput(&'static str),

    // circuits / dense verification
    #[error("dense form of width {width} exceeds the {max}-qubit dense guard")]
    DenseWidth { width: usize, max: usize },
    #[error("circuit/operator layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("gate is not multi-controlled: {0}")]
    NotMultiControlled(&'static str),

    // algorithms
    #[error("exact inversion needs an even width, got n={0}")]
    OddWidth(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
