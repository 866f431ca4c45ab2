//! The three algorithms: exact inversion by paired tagging, plain
//! amplitude-amplification search, and amplification-based inversion.
//!
//! Exact inversion consumes the bits of x two at a time. Iteration j tags
//! the quarter of the current support whose image agrees with x on bits
//! 2j+1 and 2j+2, then reflects about the superposition of the previous
//! support. The untagged three quarters cancel exactly and the tagged
//! amplitudes double, so after n/2 iterations all weight sits on f⁻¹(x).
//! This is exact only because the width is even and the bits come in
//! pairs: the doubling needs the tagged set to be exactly a quarter.
//! [`invert_with_tag`] keeps the broken one-bit variant available so tests
//! can watch that cancellation fail.
//!
//! Query accounting is in oracle calls of the lowered forms: a tag costs 2
//! calls, a conditional reflection 4. Exact inversion therefore spends n
//! tag calls plus 2n reflection calls and succeeds with certainty, while
//! amplification at the optimal iteration count spends 2·⌊(π/4)·√2ⁿ⌋ calls
//! and still misses occasionally. Success rates are measured, not assumed:
//! every run reports its probability against the sin² closed form.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::bits;
use crate::circuits::{lower_q, lower_tag_pair};
use crate::error::{Error, Result};
use crate::layout::RegisterLayout;
use crate::operators::{
    make_diffusion, make_q, make_tag_full, make_tag_pair, REG_DATA, REG_INPUT,
};
use crate::perm::PermutationTable;
use crate::state::StateVector;

/// Amplitude agreement treated as success in outcome summaries.
pub const SUCCESS_EPS: f64 = 1e-9;

/// Which tagging operator drives the inversion loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    /// The correct two-bit tag: marks a quarter of the support.
    Pair,
    /// Deliberately wrong one-bit tag: marks half, so the reflection's
    /// cross terms no longer cancel. Kept for falsification tests.
    SingleBit,
}

impl TagKind {
    pub fn name(self) -> &'static str {
        match self {
            TagKind::Pair => "pair",
            TagKind::SingleBit => "single_bit",
        }
    }
}

/// How a phase tag is realized inside the amplification loops.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaggingRoute {
    /// Direct phase flip on the matching basis states.
    Semantic,
    /// Two XOR-oracle queries around a phase flip on a copy register.
    OracleConjugation,
}

impl TaggingRoute {
    pub fn name(self) -> &'static str {
        match self {
            TaggingRoute::Semantic => "semantic",
            TaggingRoute::OracleConjugation => "oracle_conjugation",
        }
    }
}

/// Amplitude bookkeeping after one inversion iteration, measured against
/// the support the correct algorithm would occupy.
#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub j: usize,
    /// |{y : f(y) agrees with x on the first 2j+2 bits}|.
    pub support_size: usize,
    /// The amplitude law on that support: 2^(j+1)/√2ⁿ.
    pub expected_amplitude: f64,
    /// Largest |amplitude − expected| over the support.
    pub amplitude_spread: f64,
    /// Largest |amplitude| outside the support.
    pub max_off_support: f64,
    /// Total probability mass outside the support.
    pub off_support_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InversionOutcome {
    pub n: usize,
    pub x: usize,
    pub x_bits: String,
    pub tag: TagKind,
    pub backend: &'static str,
    pub iterations: usize,
    pub result: usize,
    pub result_bits: String,
    pub result_probability: f64,
    pub expected_preimage: usize,
    /// | |amplitude on f⁻¹(x)| − 1 | after the final iteration.
    pub final_amplitude_error: f64,
    /// Largest amplitude left outside scratch-zero space (lowered backend).
    pub ancilla_leak: f64,
    pub tag_queries: usize,
    pub reflection_queries: usize,
    pub succeeded: bool,
    pub trace: Vec<IterationRecord>,
}

/// Per-iteration success probability of an amplification run.
#[derive(Clone, Debug, Serialize)]
pub struct GroverRecord {
    pub iteration: usize,
    pub success_probability: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroverOutcome {
    pub n: usize,
    pub target: usize,
    pub target_bits: String,
    pub iterations: usize,
    pub route: TaggingRoute,
    pub result: usize,
    pub result_bits: String,
    pub success_probability: f64,
    /// sin²((2k+1)·arcsin(2^(−n/2))).
    pub predicted_probability: f64,
    pub prediction_error: f64,
    pub oracle_queries: usize,
    pub succeeded: bool,
    pub trace: Vec<GroverRecord>,
}

/// Oracle-call budgets of exact inversion versus optimal amplification,
/// with both success probabilities measured on the same instance.
#[derive(Clone, Debug, Serialize)]
pub struct QueryComparison {
    pub n: usize,
    pub x: usize,
    pub x_bits: String,
    pub exact_tag_queries: usize,
    pub exact_reflection_queries: usize,
    pub exact_total_queries: usize,
    pub exact_success_probability: f64,
    pub grover_iterations: usize,
    pub grover_queries: usize,
    pub grover_success_probability: f64,
    pub grover_predicted_probability: f64,
}

fn check_even(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) {
        return Err(Error::OddWidth(n));
    }
    Ok(())
}

fn check_value(x: usize, n: usize) -> Result<()> {
    if x >= 1 << n {
        return Err(Error::ValueWidth { value: x, width: n });
    }
    Ok(())
}

/// Exact inversion: n/2 tagged reflections driving all amplitude onto
/// f⁻¹(x). The width must be even.
pub fn invert_exact(f: &Arc<PermutationTable>, x: usize, with_trace: bool) -> Result<InversionOutcome> {
    invert_with_tag(f, x, TagKind::Pair, with_trace)
}

/// The inversion loop with a chosen tag. `TagKind::Pair` is the real
/// algorithm; `TagKind::SingleBit` demonstrates why the pairing matters.
pub fn invert_with_tag(
    f: &Arc<PermutationTable>,
    x: usize,
    tag: TagKind,
    with_trace: bool,
) -> Result<InversionOutcome> {
    let n = f.width();
    check_even(n)?;
    check_value(x, n)?;
    let layout = RegisterLayout::new(&[(REG_DATA, n)])?;
    let mut state = StateVector::zeroed(layout);
    state.hadamard_all(REG_DATA)?;

    let rounds = n / 2;
    let mut trace = Vec::new();
    for j in 0..rounds {
        let k = 2 * j + 1;
        match tag {
            TagKind::Pair => {
                make_tag_pair(f.clone(), k)?.apply_with_input(&mut state, x)?;
            }
            TagKind::SingleBit => {
                let y = state.layout().register(REG_DATA)?.clone();
                let f_tag = f.clone();
                state.phase_flip(|b| {
                    bits::bit_at(f_tag.apply(y.value_of(b)), n, k) == bits::bit_at(x, n, k)
                });
            }
        }
        make_q(f.clone(), j)?.apply_with_input(&mut state, x)?;
        if with_trace {
            trace.push(iteration_record(f, x, j, |y| state.amplitude(y)));
        }
    }

    let pre = f.preimage(x);
    let (result, result_probability) = state.dominant_value(REG_DATA)?;
    let final_amplitude_error = (state.amplitude(pre).norm() - 1.0).abs();
    Ok(InversionOutcome {
        n,
        x,
        x_bits: bits::format_bits(x, n),
        tag,
        backend: "semantic",
        iterations: rounds,
        result,
        result_bits: bits::format_bits(result, n),
        result_probability,
        expected_preimage: pre,
        final_amplitude_error,
        ancilla_leak: 0.0,
        tag_queries: 2 * rounds,
        reflection_queries: 4 * rounds,
        succeeded: result == pre && final_amplitude_error <= SUCCESS_EPS,
        trace,
    })
}

/// Exact inversion run entirely through the lowered circuits, with x in a
/// real register and the tags and reflections as gate programs. Needs
/// 3n+1 qubit lines, so it is the small-width cross-check of the lowering.
pub fn invert_exact_circuit(
    f: &Arc<PermutationTable>,
    x: usize,
    with_trace: bool,
) -> Result<InversionOutcome> {
    let n = f.width();
    check_even(n)?;
    check_value(x, n)?;
    let mut regs = vec![(REG_INPUT, n), (REG_DATA, n), (crate::circuits::REG_SCRATCH, n)];
    if n >= 4 {
        regs.push((crate::circuits::REG_FLAG, 1));
    }
    let layout = RegisterLayout::new(&regs)?;
    let x_bits_string = bits::format_bits(x, n);
    let mut assignment: Vec<(&str, String)> = regs
        .iter()
        .map(|(name, width)| (*name, "0".repeat(*width)))
        .collect();
    assignment[0].1 = x_bits_string.clone();
    let pairs: Vec<(&str, &str)> =
        assignment.iter().map(|(name, v)| (*name, v.as_str())).collect();
    let mut state = StateVector::basis_state(layout, &pairs)?;
    state.hadamard_all(REG_DATA)?;

    let x_reg = state.layout().register(REG_INPUT)?.clone();
    let y_reg = state.layout().register(REG_DATA)?.clone();
    let base = x_reg.with_value(0, x);
    let amp_at = |state: &StateVector, y: usize| state.amplitude(y_reg.with_value(base, y));

    let rounds = n / 2;
    let mut trace = Vec::new();
    for j in 0..rounds {
        lower_tag_pair(f.clone(), 2 * j + 1)?.apply_to(&mut state)?;
        lower_q(f.clone(), j)?.apply_to(&mut state)?;
        if with_trace {
            trace.push(iteration_record(f, x, j, |y| amp_at(&state, y)));
        }
    }

    let pre = f.preimage(x);
    let (result, result_probability) = state.dominant_value(REG_DATA)?;
    let final_amplitude_error = (amp_at(&state, pre).norm() - 1.0).abs();
    // everything should have returned to the x-basis, scratch-zero slice
    let clean = y_reg.mask() | x_reg.mask();
    let ancilla_leak = state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(idx, _)| idx & !clean != 0 || (idx & x_reg.mask()) != base)
        .map(|(_, amp)| amp.norm())
        .fold(0.0, f64::max);

    Ok(InversionOutcome {
        n,
        x,
        x_bits: x_bits_string,
        tag: TagKind::Pair,
        backend: "lowered",
        iterations: rounds,
        result,
        result_bits: bits::format_bits(result, n),
        result_probability,
        expected_preimage: pre,
        final_amplitude_error,
        ancilla_leak,
        tag_queries: 2 * rounds,
        reflection_queries: 4 * rounds,
        succeeded: result == pre && final_amplitude_error <= SUCCESS_EPS,
        trace,
    })
}

fn iteration_record(
    f: &Arc<PermutationTable>,
    x: usize,
    j: usize,
    amp_of: impl Fn(usize) -> Complex64,
) -> IterationRecord {
    let n = f.width();
    let matched = 2 * j + 2;
    let expected_amplitude = 2f64.powi((j as i32 + 1) - n as i32 / 2);
    let mut support_size = 0usize;
    let mut amplitude_spread = 0f64;
    let mut max_off_support = 0f64;
    let mut off_support_mass = 0f64;
    for y in 0..f.cardinality() {
        let amp = amp_of(y);
        if bits::prefix_eq(f.apply(y), x, n, matched) {
            support_size += 1;
            let diff = (amp - Complex64::new(expected_amplitude, 0.0)).norm();
            amplitude_spread = amplitude_spread.max(diff);
        } else {
            max_off_support = max_off_support.max(amp.norm());
            off_support_mass += amp.norm_sqr();
        }
    }
    IterationRecord {
        j,
        support_size,
        expected_amplitude,
        amplitude_spread,
        max_off_support,
        off_support_mass,
    }
}

/// The state after `j` exact-inversion iterations: the uniform
/// superposition over {y : f(y) agrees with x on its first 2j bits}. This
/// is also the axis of the next reflection, so `make_q(f, j)` fixes it.
pub fn prepare_prefix_superposition(
    f: &Arc<PermutationTable>,
    x: usize,
    j: usize,
) -> Result<StateVector> {
    let n = f.width();
    check_even(n)?;
    check_value(x, n)?;
    if j > n / 2 {
        return Err(Error::ReflectionIndexOutOfRange { j, n });
    }
    let layout = RegisterLayout::new(&[(REG_DATA, n)])?;
    let mut state = StateVector::zeroed(layout);
    state.hadamard_all(REG_DATA)?;
    for i in 0..j {
        make_tag_pair(f.clone(), 2 * i + 1)?.apply_with_input(&mut state, x)?;
        make_q(f.clone(), i)?.apply_with_input(&mut state, x)?;
    }
    Ok(state)
}

/// ⌊(π/4)·√2ⁿ⌋, the amplification sweet spot for a single marked item.
pub fn optimal_iterations(n: usize) -> usize {
    (std::f64::consts::FRAC_PI_4 * 2f64.powi(n as i32 / 2) * if n % 2 == 1 { std::f64::consts::SQRT_2 } else { 1.0 })
        .floor() as usize
}

/// sin²((2k+1)·arcsin(2^(−n/2))): exact success probability after k
/// iterations with one marked item.
pub fn predicted_success(n: usize, iterations: usize) -> f64 {
    let theta = 2f64.powf(-(n as f64) / 2.0).asin();
    ((2 * iterations + 1) as f64 * theta).sin().powi(2)
}

/// Unstructured search for one marked value.
pub fn grover_search(
    n: usize,
    marked: usize,
    iterations: usize,
    route: TaggingRoute,
    with_trace: bool,
) -> Result<GroverOutcome> {
    check_value(marked, n)?;
    let layout = match route {
        TaggingRoute::Semantic => RegisterLayout::new(&[(REG_DATA, n)])?,
        TaggingRoute::OracleConjugation => RegisterLayout::new(&[(REG_DATA, n), ("b", 1)])?,
    };
    let mut state = StateVector::zeroed(layout);
    state.hadamard_all(REG_DATA)?;
    let diffusion = make_diffusion(n)?;
    let y = state.layout().register(REG_DATA)?.clone();

    let mut trace = Vec::new();
    for it in 1..=iterations {
        match route {
            TaggingRoute::Semantic => {
                state.phase_flip(|b| y.value_of(b) == marked);
            }
            TaggingRoute::OracleConjugation => {
                let hit = move |v: usize| usize::from(v == marked);
                state.xor_oracle_fn(REG_DATA, "b", hit)?;
                let b = state.layout().register("b")?.clone();
                state.phase_flip(|basis| b.value_of(basis) == 1);
                state.xor_oracle_fn(REG_DATA, "b", hit)?;
            }
        }
        diffusion.apply(&mut state)?;
        if with_trace {
            trace.push(GroverRecord {
                iteration: it,
                success_probability: state.probability_of(REG_DATA, marked)?,
            });
        }
    }

    let success_probability = state.probability_of(REG_DATA, marked)?;
    let predicted = predicted_success(n, iterations);
    let (result, _) = state.dominant_value(REG_DATA)?;
    let queries_per_tag = match route {
        TaggingRoute::Semantic => 1,
        TaggingRoute::OracleConjugation => 2,
    };
    Ok(GroverOutcome {
        n,
        target: marked,
        target_bits: bits::format_bits(marked, n),
        iterations,
        route,
        result,
        result_bits: bits::format_bits(result, n),
        success_probability,
        predicted_probability: predicted,
        prediction_error: (success_probability - predicted).abs(),
        oracle_queries: queries_per_tag * iterations,
        succeeded: result == marked,
        trace,
    })
}

/// Inversion by amplification: amplify f⁻¹(x) with the full tag. Two
/// oracle calls per iteration however the tag is realized.
pub fn grover_invert(
    f: &Arc<PermutationTable>,
    x: usize,
    iterations: usize,
    route: TaggingRoute,
    with_trace: bool,
) -> Result<GroverOutcome> {
    let n = f.width();
    check_value(x, n)?;
    let layout = match route {
        TaggingRoute::Semantic => RegisterLayout::new(&[(REG_DATA, n)])?,
        TaggingRoute::OracleConjugation => {
            RegisterLayout::new(&[(REG_DATA, n), (crate::operators::REG_IMAGE, n)])?
        }
    };
    let mut state = StateVector::zeroed(layout);
    state.hadamard_all(REG_DATA)?;
    let diffusion = make_diffusion(n)?;
    let tag = make_tag_full(f.clone(), x)?;
    let target = f.preimage(x);

    let mut trace = Vec::new();
    for it in 1..=iterations {
        match route {
            TaggingRoute::Semantic => tag.apply(&mut state)?,
            TaggingRoute::OracleConjugation => {
                state.xor_oracle(REG_DATA, crate::operators::REG_IMAGE, f)?;
                let z = state.layout().register(crate::operators::REG_IMAGE)?.clone();
                state.phase_flip(|basis| z.value_of(basis) == x);
                state.xor_oracle(REG_DATA, crate::operators::REG_IMAGE, f)?;
            }
        }
        diffusion.apply(&mut state)?;
        if with_trace {
            trace.push(GroverRecord {
                iteration: it,
                success_probability: state.probability_of(REG_DATA, target)?,
            });
        }
    }

    let success_probability = state.probability_of(REG_DATA, target)?;
    let predicted = predicted_success(n, iterations);
    let (result, _) = state.dominant_value(REG_DATA)?;
    Ok(GroverOutcome {
        n,
        target,
        target_bits: bits::format_bits(target, n),
        iterations,
        route,
        result,
        result_bits: bits::format_bits(result, n),
        success_probability,
        predicted_probability: predicted,
        prediction_error: (success_probability - predicted).abs(),
        oracle_queries: 2 * iterations,
        succeeded: result == target,
        trace,
    })
}

/// Runs exact inversion and optimally amplified search on the same
/// instance and reports oracle budgets next to measured success.
pub fn compare_query_counts(f: &Arc<PermutationTable>, x: usize) -> Result<QueryComparison> {
    let n = f.width();
    check_even(n)?;
    check_value(x, n)?;
    let exact = invert_exact(f, x, false)?;
    let grover_iterations = optimal_iterations(n);
    let grover = grover_invert(f, x, grover_iterations, TaggingRoute::Semantic, false)?;
    Ok(QueryComparison {
        n,
        x,
        x_bits: bits::format_bits(x, n),
        exact_tag_queries: exact.tag_queries,
        exact_reflection_queries: exact.reflection_queries,
        exact_total_queries: exact.tag_queries + exact.reflection_queries,
        exact_success_probability: exact.result_probability,
        grover_iterations,
        grover_queries: grover.oracle_queries,
        grover_success_probability: grover.success_probability,
        grover_predicted_probability: grover.predicted_probability,
    })
}
