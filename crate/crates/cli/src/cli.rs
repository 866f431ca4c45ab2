//! Command-line surface. Every command shares the same flag vocabulary;
//! `--n` and `--kind` repeat to span instance matrices.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reflectron_core::GeneratorKind;

fn parse_kind(s: &str) -> Result<GeneratorKind, String> {
    s.parse().map_err(|e: reflectron_core::Error| e.to_string())
}

#[derive(Parser)]
#[command(
    name = "reflectron",
    version,
    about = "Exact permutation inversion and amplitude amplification on a dense statevector simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a permutation table in perm v1 text format.
    GenPerm(GenPermArgs),
    /// Recover f^{-1}(x) exactly in n/2 tagged reflections.
    InvertExact(InvertExactArgs),
    /// Amplitude amplification toward a marked bitstring.
    GroverSearch(GroverSearchArgs),
    /// Amplitude amplification toward f^{-1}(x).
    GroverInvert(GroverInvertArgs),
    /// Query budgets and measured success of exact inversion versus
    /// optimally iterated amplification, on the same instances.
    Compare(CompareArgs),
    /// Check a lowered gate circuit against its semantic operator.
    VerifyLowering(VerifyLoweringArgs),
    /// Gate, oracle, and qubit tallies for a lowered circuit.
    GateCounts(GateCountsArgs),
}

/// Where permutation tables come from: generated per `--kind`/`--n`/`--seed`
/// cross product, loaded from `--perm` files, or both.
#[derive(Args)]
pub struct SourceArgs {
    /// Register width; repeat to span several widths.
    #[arg(long)]
    pub n: Vec<usize>,
    /// Table generator; repeat to span several.
    #[arg(long, value_parser = parse_kind)]
    pub kind: Vec<GeneratorKind>,
    /// Permutation file in perm v1 format; repeatable.
    #[arg(long)]
    pub perm: Vec<PathBuf>,
    /// Seed for table generation and input sampling.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Args)]
pub struct OutputArgs {
    /// Report format. csv is available for compare only.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Write the report to this path instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Args)]
pub struct GenPermArgs {
    /// Table generator.
    #[arg(long, value_parser = parse_kind, default_value = "random")]
    pub kind: GeneratorKind,
    /// Register width.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Write the table to this path instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct InvertExactArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Input to invert: a bitstring, "all", or "sample:N".
    #[arg(long)]
    pub x: String,
    /// Include the per-iteration trace in the report.
    #[arg(long)]
    pub trace: bool,
    /// Largest accepted deviation of the final success probability from 1.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct GroverSearchArgs {
    /// Register width; repeat to span several widths.
    #[arg(long, required = true)]
    pub n: Vec<usize>,
    /// Marked bitstring, "all", or "sample:N".
    #[arg(long)]
    pub x: String,
    /// Iteration count; defaults to the near-optimal floor((pi/4)*sqrt(2^n)).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Seed for input sampling.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Include the per-iteration success trace in the report.
    #[arg(long)]
    pub trace: bool,
    /// Largest accepted gap between measured and predicted success.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct GroverInvertArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Image value to invert: a bitstring, "all", or "sample:N".
    #[arg(long)]
    pub x: String,
    /// Iteration count; defaults to the near-optimal floor((pi/4)*sqrt(2^n)).
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Include the per-iteration success trace in the report.
    #[arg(long)]
    pub trace: bool,
    /// Largest accepted gap between measured and predicted success.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Image value per instance: a bitstring, "all", or "sample:N".
    /// Defaults to the all-zeros string.
    #[arg(long)]
    pub x: Option<String>,
    /// Tolerance on both measured success probabilities.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct VerifyLoweringArgs {
    /// Operator to verify.
    #[arg(long, value_enum)]
    pub op: OpName,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Round index for o_pair (tag bit 2j+1), q, and q_prime.
    /// Defaults to every valid round at each width.
    #[arg(long)]
    pub j: Option<usize>,
    /// Tagged image for o_full: a bitstring, "all", or "sample:N".
    /// Defaults to the all-zeros string.
    #[arg(long)]
    pub x: Option<String>,
    /// Largest accepted deviation between circuit and operator.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args)]
pub struct GateCountsArgs {
    /// Operator whose lowering is tallied.
    #[arg(long, value_enum)]
    pub op: OpName,
    #[command(flatten)]
    pub source: SourceArgs,
    /// Round index for o_pair (tag bit 2j+1), q, and q_prime.
    /// Defaults to every valid round at each width.
    #[arg(long)]
    pub j: Option<usize>,
    /// Tagged image for o_full: a bitstring, "all", or "sample:N".
    /// Defaults to the all-zeros string.
    #[arg(long)]
    pub x: Option<String>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// CLI names of the operators that have lowerings.
#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpName {
    #[value(name = "u_f")]
    UF,
    #[value(name = "o_full")]
    OFull,
    #[value(name = "o_pair")]
    OPair,
    #[value(name = "diffusion")]
    Diffusion,
    #[value(name = "q")]
    Q,
    #[value(name = "q_prime")]
    QPrime,
    #[value(name = "m_f")]
    MF,
}

impl OpName {
    pub fn token(self) -> &'static str {
        match self {
            OpName::UF => "u_f",
            OpName::OFull => "o_full",
            OpName::OPair => "o_pair",
            OpName::Diffusion => "diffusion",
            OpName::Q => "q",
            OpName::QPrime => "q_prime",
            OpName::MF => "m_f",
        }
    }

    pub fn takes_j(self) -> bool {
        matches!(self, OpName::OPair | OpName::Q | OpName::QPrime)
    }

    pub fn takes_x(self) -> bool {
        matches!(self, OpName::OFull)
    }
}
