//! Expands flag matrices into instance lists, runs them, and assembles the
//! report. Configuration problems are captured per entry so one bad
//! instance never hides the rest of a matrix.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{Value, json};

use reflectron_core::algorithms::{
    self, QueryComparison, TaggingRoute, compare_query_counts, grover_invert, grover_search,
    optimal_iterations,
};
use reflectron_core::circuits::{
    DEFAULT_SAMPLED_STATES, GateCircuit, VerifyMode, lower_diffusion, lower_m_f, lower_q,
    lower_q_prime, lower_tag_full, lower_tag_pair, lower_u_f, verify_equivalence,
};
use reflectron_core::dense::DENSE_MAX_QUBITS;
use reflectron_core::operators::{
    OperatorHandle, make_diffusion, make_m_f, make_q, make_q_prime, make_tag_full, make_tag_pair,
    make_u_f,
};
use reflectron_core::{GeneratorKind, PermutationTable, bits};

use crate::cli::{
    Command, CompareArgs, GateCountsArgs, GenPermArgs, GroverInvertArgs, GroverSearchArgs,
    InvertExactArgs, OpName, OutputArgs, OutputFormat, SourceArgs, VerifyLoweringArgs,
};

/// Mixed into the seed so sampled inputs are decoupled from the stream that
/// generates random tables under the same `--seed`.
const SAMPLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn run(command: Command) -> Result<ExitCode, String> {
    match command {
        Command::GenPerm(args) => gen_perm(args),
        Command::InvertExact(args) => invert_exact_cmd(args),
        Command::GroverSearch(args) => grover_search_cmd(args),
        Command::GroverInvert(args) => grover_invert_cmd(args),
        Command::Compare(args) => compare_cmd(args),
        Command::VerifyLowering(args) => verify_lowering_cmd(args),
        Command::GateCounts(args) => gate_counts_cmd(args),
    }
}

#[derive(Serialize)]
struct Entry {
    config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl Entry {
    fn ok<T: Serialize>(config: Value, passed: bool, result: &T) -> Entry {
        Entry {
            config,
            result: Some(serde_json::to_value(result).expect("results serialize")),
            passed: Some(passed),
            error: None,
        }
    }

    fn config_error(config: Value, message: String) -> Entry {
        Entry { config, result: None, passed: None, error: Some(message) }
    }
}

#[derive(Serialize)]
struct RunReport {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    tolerance: Option<f64>,
    runs: usize,
    passed: usize,
    failed: usize,
    config_errors: usize,
    entries: Vec<Entry>,
}

fn assemble(
    command: &'static str,
    seed: u64,
    tolerance: Option<f64>,
    entries: Vec<Entry>,
) -> (RunReport, ExitCode) {
    let runs = entries.len();
    let passed = entries.iter().filter(|e| e.passed == Some(true)).count();
    let config_errors = entries.iter().filter(|e| e.error.is_some()).count();
    let failed = runs - passed - config_errors;
    let code = if config_errors > 0 {
        ExitCode::from(2)
    } else if failed > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    };
    let report = RunReport {
        tool: "reflectron",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        tolerance,
        runs,
        passed,
        failed,
        config_errors,
        entries,
    };
    (report, code)
}

fn write_output(text: &str, out: Option<&Path>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_json(report: &RunReport, out: Option<&Path>) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| e.to_string())?;
    text.push('\n');
    write_output(&text, out)
}

/// csv is reserved for the comparison tables.
fn require_json(output: &OutputArgs) -> Result<(), String> {
    if output.format == OutputFormat::Csv {
        return Err("csv output is only available for the compare command".into());
    }
    Ok(())
}

/// One permutation instance of the matrix.
enum Source {
    Generated { kind: GeneratorKind, n: usize },
    File(PathBuf),
}

impl Source {
    /// Config echo plus the table, or the error that prevented loading it.
    fn resolve(&self, seed: u64) -> (Value, Result<Arc<PermutationTable>, String>) {
        match self {
            Source::Generated { kind, n } => {
                let config = json!({ "n": n, "kind": kind.name(), "seed": seed });
                let table = PermutationTable::generate(*kind, *n, seed)
                    .map(Arc::new)
                    .map_err(|e| e.to_string());
                (config, table)
            }
            Source::File(path) => {
                let shown = path.display().to_string();
                match PermutationTable::read_file(path) {
                    Ok(table) => (
                        json!({ "perm": shown, "n": table.width() }),
                        Ok(Arc::new(table)),
                    ),
                    Err(e) => (json!({ "perm": shown }), Err(e.to_string())),
                }
            }
        }
    }
}

/// Cross product of sorted `--n` values and `--kind` values, then the
/// `--perm` files in the order given.
fn expand_sources(source: &SourceArgs) -> Result<Vec<Source>, String> {
    let mut ns = source.n.clone();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() && !source.kind.is_empty() {
        return Err("--kind was given without --n".into());
    }
    let mut kinds: Vec<GeneratorKind> = Vec::new();
    for &kind in &source.kind {
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        kinds.push(GeneratorKind::Random);
    }
    let mut sources = Vec::new();
    for &n in &ns {
        for &kind in &kinds {
            sources.push(Source::Generated { kind, n });
        }
    }
    sources.extend(source.perm.iter().cloned().map(Source::File));
    if sources.is_empty() {
        return Err("no instances: pass --n (with optional --kind) or --perm".into());
    }
    Ok(sources)
}

/// Expands an `--x` selector against a width: a literal bitstring, "all",
/// or "sample:N" drawn without replacement.
fn resolve_inputs(selector: &str, n: usize, seed: u64) -> Result<Vec<usize>, String> {
    let dim = 1usize
        .checked_shl(n as u32)
        .ok_or_else(|| format!("width {n} is out of range"))?;
    if selector == "all" {
        return Ok((0..dim).collect());
    }
    if let Some(count) = selector.strip_prefix("sample:") {
        let count: usize = count
            .parse()
            .map_err(|_| format!("bad sample count in --x {selector}"))?;
        if count > dim {
            return Err(format!("sample of {count} exceeds the {dim} possible inputs"));
        }
        return Ok(sample_distinct(dim, count, seed));
    }
    bits::parse_bits(selector, n).map(|v| vec![v]).map_err(|e| e.to_string())
}

fn sample_distinct(dim: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SAMPLE_SALT);
    if 2 * count >= dim {
        let mut all: Vec<usize> = (0..dim).collect();
        all.shuffle(&mut rng);
        all.truncate(count);
        all.sort_unstable();
        all
    } else {
        let mut picked = std::collections::BTreeSet::new();
        while picked.len() < count {
            picked.insert(rng.gen_range(0..dim));
        }
        picked.into_iter().collect()
    }
}

fn with_fields(base: &Value, fields: &[(&str, Value)]) -> Value {
    let mut config = base.clone();
    if let Value::Object(map) = &mut config {
        for (key, value) in fields {
            map.insert((*key).to_string(), value.clone());
        }
    }
    config
}

fn gen_perm(args: GenPermArgs) -> Result<ExitCode, String> {
    let table =
        PermutationTable::generate(args.kind, args.n, args.seed).map_err(|e| e.to_string())?;
    match &args.out {
        Some(path) => table.write_file(path).map_err(|e| e.to_string())?,
        None => print!("{}", table.to_text()),
    }
    Ok(ExitCode::SUCCESS)
}

fn invert_exact_cmd(args: InvertExactArgs) -> Result<ExitCode, String> {
    require_json(&args.output)?;
    let seed = args.source.seed;
    let mut entries = Vec::new();
    for source in expand_sources(&args.source)? {
        let (base, table) = source.resolve(seed);
        let f = match table {
            Ok(f) => f,
            Err(message) => {
                entries.push(Entry::config_error(base, message));
                continue;
            }
        };
        let n = f.width();
        let xs = match resolve_inputs(&args.x, n, seed) {
            Ok(xs) => xs,
            Err(message) => {
                entries.push(Entry::config_error(base, message));
                continue;
            }
        };
        for x in xs {
            let config = with_fields(&base, &[("x", json!(bits::format_bits(x, n)))]);
            match algorithms::invert_exact(&f, x, args.trace) {
                Ok(outcome) => {
                    let passed = f.apply(outcome.result) == x
                        && (1.0 - outcome.result_probability).abs() <= args.tol;
                    entries.push(Entry::ok(config, passed, &outcome));
                }
                Err(e) => entries.push(Entry::config_error(config, e.to_string())),
            }
        }
    }
    let (report, code) = assemble("invert-exact", seed, Some(args.tol), entries);
    emit_json(&report, args.output.out.as_deref())?;
    Ok(code)
}

fn grover_search_cmd(args: GroverSearchArgs) -> Result<ExitCode, String> {
    require_json(&args.output)?;
    let mut ns = args.n.clone();
    ns.sort_unstable();
    ns.dedup();
    let mut entries = Vec::new();
    for n in ns {
        let iterations = args.iterations.unwrap_or_else(|| optimal_iterations(n));
        let base = json!({ "n": n, "iterations": iterations });
        let xs = match resolve_inputs(&args.x, n, args.seed) {
            Ok(xs) => xs,
            Err(message) => {
                entries.push(Entry::config_error(base, message));
                continue;
            }
        };
        for marked in xs {
            let config = with_fields(&base, &[("x", json!(bits::format_bits(marked, n)))]);
            match grover_search(n, marked, iterations, TaggingRoute::Semantic, args.trace) {
                Ok(outcome) => {
                    let passed = outcome.prediction_error <= args.tol;
                    entries.push(Entry::ok(config, passed, &outcome));
                }
                Err(e) => entries.push(Entry::config_error(config, e.to_string())),
            }
        }
    }
    let (report, code) = assemble("grover-search", args.seed, Some(args.tol), entries);
    emit_json(&report, args.output.out.as_deref())?;
    Ok(code)
}

fn grover_invert_cmd(args: GroverInvertArgs) -> Result<ExitCode, String> {
    require_json(&args.output)?;
    let seed = args.source.seed;
    let mut entries = Vec::new();
    for source in expand_sources(&args.source)? {
        let (base, table) = source.resolve(seed);
        let f = match table {
            Ok(f) => f,
            Err(message) => {
                entries.push(Entry::config_error(base, message));
                continue;
            }
        };
        let n = f.width();
        let iterations = args.iterations.unwrap_or_else(|| optimal_iterations(n));
        let base = with_fields(&base, &[("iterations", json!(iterations))]);
        let xs = match resolve_inputs(&args.x, n, seed) {
            Ok(xs) => xs,
            Err(message) => {
                entries.push(Entry::config_error(base, message));
                continue;
            }
        };
        for x in xs {
            let config = with_fields(&base, &[("x", json!(bits::format_bits(x, n)))]);
            match grover_invert(&f, x, iterations, TaggingRoute::Semantic, args.trace) {
                Ok(outcome) => {
                    let passed = outcome.prediction_error <= args.tol;
                    entries.push(Entry::ok(config, passed, &outcome));
                }
                Err(e) => entries.push(Entry::config_error(config, e.to_string())),
            }
        }
    }
    let (report, code) = assemble("grover-invert", seed, Some(args.tol), entries);
    emit_json(&report, args.output.out.as_deref())?;
    Ok(code)
}

fn compare_cmd(args: CompareArgs) -> Result<ExitCode, String> {
    let seed = args.source.seed;
    let mut entries = Vec::new();
    let mut rows: Vec<QueryComparison> = Vec::new();
    for source in expand_sources(&args.source)? {
        let (base, table) = source.resolve(seed);
        let f = match table {
            Ok(f) => f,
            Err(message) => {
                entries.push(Entry::config_error(base, message));
                continue;
            }
        };
        let n = f.width();
        let xs = match &args.x {
            None => Ok(vec![0usize]),
            Some(selector) => resolve_inputs(selector, n, seed),
        };
        let xs = match xs {
            Ok(xs) => xs,
            Err(message) => {
                entries.push(Entry::config_error(base, message));
                continue;
            }
        };
        for x in xs {
            let config = with_fields(&base, &[("x", json!(bits::format_bits(x, n)))]);
            match compare_query_counts(&f, x) {
                Ok(cmp) => {
                    let passed = (cmp.exact_success_probability - 1.0).abs() <= args.tol
                        && (cmp.grover_success_probability - cmp.grover_predicted_probability)
                            .abs()
                            <= args.tol;
                    entries.push(Entry::ok(config, passed, &cmp));
                    rows.push(cmp);
                }
                Err(e) => entries.push(Entry::config_error(config, e.to_string())),
            }
        }
    }
    let (report, code) = assemble("compare", seed, Some(args.tol), entries);
    match args.output.format {
        OutputFormat::Json => emit_json(&report, args.output.out.as_deref())?,
        OutputFormat::Csv => {
            for entry in &report.entries {
                if let Some(message) = &entry.error {
                    eprintln!("skipped {}: {message}", entry.config);
                }
            }
            let mut text = String::from("n,A_queries,C_queries,A_success,C_success\n");
            for row in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.n,
                    row.exact_tag_queries,
                    row.grover_queries,
                    row.exact_success_probability,
                    row.grover_success_probability
                ));
            }
            write_output(&text, args.output.out.as_deref())?;
        }
    }
    Ok(code)
}

/// Rounds to run when `--j` is absent: every round the width admits.
fn default_rounds(op: OpName, n: usize) -> Vec<usize> {
    match op {
        // tag bit 2j+1 must leave room for its partner bit 2j+2
        OpName::OPair => (0..).take_while(|j| 2 * j + 2 <= n).collect(),
        OpName::Q | OpName::QPrime => (0..n / 2).collect(),
        _ => Vec::new(),
    }
}

fn build_op(
    op: OpName,
    f: &Arc<PermutationTable>,
    n: usize,
    j: Option<usize>,
    x: Option<usize>,
) -> reflectron_core::Result<(OperatorHandle, GateCircuit)> {
    match op {
        OpName::UF => Ok((make_u_f(f.clone()), lower_u_f(f.clone())?)),
        OpName::OFull => {
            let x = x.unwrap_or(0);
            Ok((make_tag_full(f.clone(), x)?, lower_tag_full(f.clone(), x)?))
        }
        OpName::OPair => {
            let k = 2 * j.unwrap_or(0) + 1;
            Ok((make_tag_pair(f.clone(), k)?, lower_tag_pair(f.clone(), k)?))
        }
        OpName::Diffusion => Ok((make_diffusion(n)?, lower_diffusion(n)?)),
        OpName::Q => {
            let j = j.unwrap_or(0);
            Ok((make_q(f.clone(), j)?, lower_q(f.clone(), j)?))
        }
        OpName::QPrime => {
            let j = j.unwrap_or(0);
            Ok((make_q_prime(n, j)?, lower_q_prime(n, j)?))
        }
        OpName::MF => Ok((make_m_f(f.clone()), lower_m_f(f.clone())?)),
    }
}

/// Per-instance work shared by verify-lowering and gate-counts: resolve the
/// table, expand rounds and inputs, then hand each built pair to `visit`.
fn for_each_built_op(
    source_args: &SourceArgs,
    op: OpName,
    j: Option<usize>,
    x: &Option<String>,
    entries: &mut Vec<Entry>,
    mut visit: impl FnMut(Value, OperatorHandle, GateCircuit) -> Entry,
) -> Result<(), String> {
    if j.is_some() && !op.takes_j() {
        return Err(format!("--j does not apply to {}", op.token()));
    }
    if x.is_some() && !op.takes_x() {
        return Err(format!("--x only applies to o_full, not {}", op.token()));
    }
    let seed = source_args.seed;
    for source in expand_sources(source_args)? {
        let (base, table) = source.resolve(seed);
        let f = match table {
            Ok(f) => f,
            Err(message) => {
                entries.push(Entry::config_error(base, message));
                continue;
            }
        };
        let n = f.width();
        let base = with_fields(&base, &[("op", json!(op.token()))]);
        let rounds: Vec<Option<usize>> = match (op.takes_j(), j) {
            (false, _) => vec![None],
            (true, Some(j)) => vec![Some(j)],
            (true, None) => default_rounds(op, n).into_iter().map(Some).collect(),
        };
        let xs: Vec<Option<usize>> = if op.takes_x() {
            let selector = x.as_deref().unwrap_or("");
            let resolved = if selector.is_empty() {
                Ok(vec![0usize])
            } else {
                resolve_inputs(selector, n, seed)
            };
            match resolved {
                Ok(values) => values.into_iter().map(Some).collect(),
                Err(message) => {
                    entries.push(Entry::config_error(base, message));
                    continue;
                }
            }
        } else {
            vec![None]
        };
        for &round in &rounds {
            for &input in &xs {
                let mut fields = Vec::new();
                if let Some(j) = round {
                    fields.push(("j", json!(j)));
                }
                if let Some(x) = input {
                    fields.push(("x", json!(bits::format_bits(x, n))));
                }
                let config = with_fields(&base, &fields);
                match build_op(op, &f, n, round, input) {
                    Ok((handle, circuit)) => entries.push(visit(config, handle, circuit)),
                    Err(e) => entries.push(Entry::config_error(config, e.to_string())),
                }
            }
        }
    }
    Ok(())
}

fn verify_lowering_cmd(args: VerifyLoweringArgs) -> Result<ExitCode, String> {
    require_json(&args.output)?;
    let seed = args.source.seed;
    let mut entries = Vec::new();
    for_each_built_op(
        &args.source,
        args.op,
        args.j,
        &args.x,
        &mut entries,
        |config, handle, circuit| {
            let mode = if handle.layout().total_width() <= DENSE_MAX_QUBITS {
                VerifyMode::Dense
            } else {
                VerifyMode::Sampled { states: DEFAULT_SAMPLED_STATES }
            };
            match verify_equivalence(&handle, &circuit, mode, args.tol, seed) {
                Ok(report) => {
                    let passed = report.passed;
                    Entry::ok(config, passed, &report)
                }
                Err(e) => Entry::config_error(config, e.to_string()),
            }
        },
    )?;
    let (report, code) = assemble("verify-lowering", seed, Some(args.tol), entries);
    emit_json(&report, args.output.out.as_deref())?;
    Ok(code)
}

fn gate_counts_cmd(args: GateCountsArgs) -> Result<ExitCode, String> {
    require_json(&args.output)?;
    let seed = args.source.seed;
    let mut entries = Vec::new();
    for_each_built_op(
        &args.source,
        args.op,
        args.j,
        &args.x,
        &mut entries,
        |config, _handle, circuit| {
            let config = with_fields(&config, &[("circuit", json!(circuit.name()))]);
            Entry::ok(config, true, &circuit.counts())
        },
    )?;
    let (report, code) = assemble("gate-counts", seed, None, entries);
    emit_json(&report, args.output.out.as_deref())?;
    Ok(code)
}
