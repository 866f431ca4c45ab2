//! The operator family, in semantic (statevector) form.
//!
//! Each constructor returns an [`OperatorHandle`]: a name plus parameters
//! that the circuits module can independently lower to gates. The handle's
//! `apply` implements the operator meaning directly on amplitudes via the
//! statevector primitives; `dense` builds its matrix for verification.
//!
//! Operators act on conventionally named registers: `x` for the value being
//! inverted, `y` for the working register, `z` for the relabeled image
//! register of the f-free form. A state may carry additional registers;
//! they are left untouched.
//!
//! Two handles condition on `x`: the two-bit tag and the prefix reflection.
//! They also run with a classical `x` via [`OperatorHandle::apply_with_input`],
//! which is how the inversion algorithm scales past dense widths.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;

use crate::bits;
use crate::dense;
use crate::error::{Error, Result};
use crate::layout::RegisterLayout;
use crate::perm::PermutationTable;
use crate::state::StateVector;

pub const REG_INPUT: &str = "x";
pub const REG_DATA: &str = "y";
pub const REG_IMAGE: &str = "z";

#[derive(Clone, Debug)]
pub enum OperatorKind {
    /// |x⟩|y⟩ ↦ |x⟩|f(x)⊕y⟩.
    XorOracle { f: Arc<PermutationTable> },
    /// Phase −1 on y with f(y) = x, i.e. I − 2|f⁻¹(x)⟩⟨f⁻¹(x)| on `y`.
    TagFull { f: Arc<PermutationTable>, x: usize },
    /// Phase −1 on (x, y) where f(y) agrees with x at bits k and k+1.
    TagPair { f: Arc<PermutationTable>, k: usize },
    /// 2|ψ⟩⟨ψ| − I about the uniform superposition of the whole register.
    Diffusion { width: usize },
    /// For each x: reflect y about the uniform superposition over
    /// {y : f(y) and x agree on their first 2j bits}.
    PrefixReflection { f: Arc<PermutationTable>, j: usize },
    /// The f-free conjugated reflection on (x, z): where the first 2j bits
    /// of z equal those of x, reflect the last n−2j qubits of z about
    /// uniform; elsewhere −I. The block sign is part of the operator, not a
    /// global phase (see `make_q_prime`).
    SuffixReflection { n: usize, j: usize },
    /// In-place relabel |v⟩ ↦ |f(v)⟩ on `y`.
    Relabel { f: Arc<PermutationTable> },
    /// The prefix reflection realized as M_f† · Q'_j · M_f on (x, y).
    ConjugatedReflection {
        f: Arc<PermutationTable>,
        f_inv: Arc<PermutationTable>,
        j: usize,
    },
}

#[derive(Clone, Debug)]
pub struct OperatorHandle {
    kind: OperatorKind,
}

/// U_f, the XOR oracle on (x, y). Self-inverse.
pub fn make_u_f(f: Arc<PermutationTable>) -> OperatorHandle {
    OperatorHandle { kind: OperatorKind::XorOracle { f } }
}

/// O, the full tag against a classical target value x.
pub fn make_tag_full(f: Arc<PermutationTable>, x: usize) -> Result<OperatorHandle> {
    if x >= f.cardinality() {
        return Err(Error::ValueWidth { value: x, width: f.width() });
    }
    Ok(OperatorHandle { kind: OperatorKind::TagFull { f, x } })
}

/// O\[k\], the two-bit tag at positions k, k+1 (1-based), on (x, y).
pub fn make_tag_pair(f: Arc<PermutationTable>, k: usize) -> Result<OperatorHandle> {
    let n = f.width();
    if k < 1 || k > n - 1 {
        return Err(Error::TagBitOutOfRange { k, n });
    }
    Ok(OperatorHandle { kind: OperatorKind::TagPair { f, k } })
}

/// The plain reflection about uniform on a register of `width` qubits.
pub fn make_diffusion(width: usize) -> Result<OperatorHandle> {
    if width == 0 {
        return Err(Error::EmptyRegister(REG_DATA.into()));
    }
    Ok(OperatorHandle { kind: OperatorKind::Diffusion { width } })
}

/// Q_j, the conditional reflection about prefix-matched preimage sets.
pub fn make_q(f: Arc<PermutationTable>, j: usize) -> Result<OperatorHandle> {
    check_reflection_index(f.width(), j)?;
    Ok(OperatorHandle { kind: OperatorKind::PrefixReflection { f, j } })
}

/// Q'_j on (x, z): prefix-compare, then reflect the suffix; −I on
/// mismatched-prefix blocks.
///
/// The mismatched-block sign is forced by Q'_j = (I⊗M_f)·Q_j·(I⊗M_f)†: the
/// reflection 2|ψ_{j,x}⟩⟨ψ_{j,x}|−I acts as −I outside its support, and the
/// conjugation maps that support exactly onto the matched-prefix block.
/// Dropping the sign gives an operator that agrees only up to a phase that
/// turns relative the moment the block is conditioned, which the
/// equivalence tests check explicitly.
pub fn make_q_prime(n: usize, j: usize) -> Result<OperatorHandle> {
    check_reflection_index(n, j)?;
    Ok(OperatorHandle { kind: OperatorKind::SuffixReflection { n, j } })
}

/// M_f, the in-place relabel |v⟩ ↦ |f(v)⟩ on `y`.
pub fn make_m_f(f: Arc<PermutationTable>) -> OperatorHandle {
    OperatorHandle { kind: OperatorKind::Relabel { f } }
}

/// Q_j built by conjugation: M_f on y, then Q'_j on (x, y), then M_f†.
/// Semantically identical to [`make_q`].
pub fn make_q_conjugated(f: Arc<PermutationTable>, j: usize) -> Result<OperatorHandle> {
    check_reflection_index(f.width(), j)?;
    let f_inv = Arc::new(f.inverse());
    Ok(OperatorHandle { kind: OperatorKind::ConjugatedReflection { f, f_inv, j } })
}

fn check_reflection_index(n: usize, j: usize) -> Result<()> {
    if j >= n / 2 {
        return Err(Error::ReflectionIndexOutOfRange { j, n });
    }
    Ok(())
}

impl OperatorHandle {
    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    /// Short name, aligned with the CLI's `--op` values.
    pub fn name(&self) -> &'static str {
        match &self.kind {
            OperatorKind::XorOracle { .. } => "u_f",
            OperatorKind::TagFull { .. } => "o_full",
            OperatorKind::TagPair { .. } => "o_pair",
            OperatorKind::Diffusion { .. } => "diffusion",
            OperatorKind::PrefixReflection { .. } => "q",
            OperatorKind::SuffixReflection { .. } => "q_prime",
            OperatorKind::Relabel { .. } => "m_f",
            OperatorKind::ConjugatedReflection { .. } => "q_conjugated",
        }
    }

    /// Registers this operator requires, in declaration order.
    pub fn layout(&self) -> RegisterLayout {
        let pairs: Vec<(&str, usize)> = match &self.kind {
            OperatorKind::XorOracle { f } => {
                vec![(REG_INPUT, f.width()), (REG_DATA, f.width())]
            }
            OperatorKind::TagFull { f, .. } => vec![(REG_DATA, f.width())],
            OperatorKind::TagPair { f, .. } => {
                vec![(REG_INPUT, f.width()), (REG_DATA, f.width())]
            }
            OperatorKind::Diffusion { width } => vec![(REG_DATA, *width)],
            OperatorKind::PrefixReflection { f, .. } => {
                vec![(REG_INPUT, f.width()), (REG_DATA, f.width())]
            }
            OperatorKind::SuffixReflection { n, .. } => {
                vec![(REG_INPUT, *n), (REG_IMAGE, *n)]
            }
            OperatorKind::Relabel { f } => vec![(REG_DATA, f.width())],
            OperatorKind::ConjugatedReflection { f, .. } => {
                vec![(REG_INPUT, f.width()), (REG_DATA, f.width())]
            }
        };
        RegisterLayout::new(&pairs).expect("operator layouts are within guards")
    }

    /// Applies the operator to a state holding (at least) its registers.
    pub fn apply(&self, state: &mut StateVector) -> Result<()> {
        match &self.kind {
            OperatorKind::XorOracle { f } => state.xor_oracle(REG_INPUT, REG_DATA, f),
            OperatorKind::TagFull { f, x } => {
                let y = expect_register(state, REG_DATA, f.width())?;
                let (f, x) = (f.clone(), *x);
                state.phase_flip(|b| f.apply(y.value_of(b)) == x);
                Ok(())
            }
            OperatorKind::TagPair { f, k } => {
                let n = f.width();
                let x = expect_register(state, REG_INPUT, n)?;
                let y = expect_register(state, REG_DATA, n)?;
                let (f, k) = (f.clone(), *k);
                state.phase_flip(|b| {
                    pair_matched(f.apply(y.value_of(b)), x.value_of(b), n, k)
                });
                Ok(())
            }
            OperatorKind::Diffusion { width } => {
                expect_register(state, REG_DATA, *width)?;
                state.conditional_subset_reflection(None, REG_DATA, |_, _| true)
            }
            OperatorKind::PrefixReflection { f, j } => {
                let n = f.width();
                expect_register(state, REG_INPUT, n)?;
                expect_register(state, REG_DATA, n)?;
                let (f, j) = (f.clone(), *j);
                state.conditional_subset_reflection(Some(REG_INPUT), REG_DATA, |c, t| {
                    bits::prefix_eq(f.apply(t), c, n, 2 * j)
                })
            }
            OperatorKind::SuffixReflection { n, j } => {
                conditioned_suffix_reflection(state, REG_INPUT, REG_IMAGE, *n, *j)
            }
            OperatorKind::Relabel { f } => state.basis_relabel(REG_DATA, f),
            OperatorKind::ConjugatedReflection { f, f_inv, j } => {
                let n = f.width();
                expect_register(state, REG_INPUT, n)?;
                state.basis_relabel(REG_DATA, f)?;
                conditioned_suffix_reflection(state, REG_INPUT, REG_DATA, n, *j)?;
                state.basis_relabel(REG_DATA, f_inv)
            }
        }
    }

    /// Applies an x-conditioned operator with a classical input value, so
    /// the state only needs the `y` register. Supported by the two-bit tag
    /// and the prefix reflection; other kinds have no input register.
    pub fn apply_with_input(&self, state: &mut StateVector, x: usize) -> Result<()> {
        match &self.kind {
            OperatorKind::TagPair { f, k } => {
                let n = f.width();
                if x >= f.cardinality() {
                    return Err(Error::ValueWidth { value: x, width: n });
                }
                let y = expect_register(state, REG_DATA, n)?;
                let (f, k) = (f.clone(), *k);
                state.phase_flip(|b| pair_matched(f.apply(y.value_of(b)), x, n, k));
                Ok(())
            }
            OperatorKind::PrefixReflection { f, j } => {
                let n = f.width();
                if x >= f.cardinality() {
                    return Err(Error::ValueWidth { value: x, width: n });
                }
                expect_register(state, REG_DATA, n)?;
                let (f, j) = (f.clone(), *j);
                state.conditional_subset_reflection(None, REG_DATA, |_, t| {
                    bits::prefix_eq(f.apply(t), x, n, 2 * j)
                })
            }
            _ => Err(Error::NoClassicalInput(self.name())),
        }
    }

    /// Dense matrix over this operator's own layout.
    pub fn dense(&self) -> Result<Array2<Complex64>> {
        dense::dense_matrix(&self.layout(), |st| self.apply(st))
    }
}

/// True when `fv` and `xv` agree at bit positions k and k+1 (1-based).
fn pair_matched(fv: usize, xv: usize, n: usize, k: usize) -> bool {
    bits::bit_at(fv, n, k) == bits::bit_at(xv, n, k)
        && bits::bit_at(fv, n, k + 1) == bits::bit_at(xv, n, k + 1)
}

fn expect_register(
    state: &StateVector,
    name: &str,
    width: usize,
) -> Result<crate::layout::Register> {
    let reg = state.layout().register(name)?.clone();
    if reg.width() != width {
        return Err(Error::RegisterWidthMismatch {
            register: name.to_string(),
            expected: width,
            actual: reg.width(),
        });
    }
    Ok(reg)
}

/// The conditioned suffix reflection shared by Q'_j and the conjugated Q_j:
/// per control value and data prefix, either reflect the 2^(n−2j) suffix
/// block about uniform (prefixes equal) or negate it (prefixes differ).
fn conditioned_suffix_reflection(
    state: &mut StateVector,
    control: &str,
    data: &str,
    n: usize,
    j: usize,
) -> Result<()> {
    let x = expect_register(state, control, n)?;
    let d = expect_register(state, data, n)?;
    let suffix_width = n - 2 * j;
    let suffix_card = 1usize << suffix_width;
    let suffix_shift = d.shift();
    let low_mask = (1usize << suffix_shift) - 1;
    let amps = state.amplitudes_mut();
    let blocks = amps.len() >> suffix_width;

    for o in 0..blocks {
        let outer = ((o & !low_mask) << suffix_width) | (o & low_mask);
        let matched = bits::prefix_eq(d.value_of(outer), x.value_of(outer), n, 2 * j);
        if matched {
            let mut sum = Complex64::ZERO;
            for s in 0..suffix_card {
                sum += amps[outer | (s << suffix_shift)];
            }
            let twice_mean = sum * (2.0 / suffix_card as f64);
            for s in 0..suffix_card {
                let idx = outer | (s << suffix_shift);
                amps[idx] = twice_mean - amps[idx];
            }
        } else {
            for s in 0..suffix_card {
                let idx = outer | (s << suffix_shift);
                amps[idx] = -amps[idx];
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{dense_matrix, max_abs_diff, max_amp_diff};
    use crate::perm::GeneratorKind;
    use crate::state::random_state;

    const EPS: f64 = 1e-12;

    fn table(kind: GeneratorKind, n: usize, seed: u64) -> Arc<PermutationTable> {
        Arc::new(PermutationTable::generate(kind, n, seed).unwrap())
    }

    #[test]
    fn tag_full_is_a_rank_one_deflection() {
        let f = table(GeneratorKind::Random, 2, 7);
        let x = 0b10;
        let op = make_tag_full(f.clone(), x).unwrap();
        let u = op.dense().unwrap();
        let pre = f.preimage(x);
        let expected = Array2::from_shape_fn((4, 4), |(r, c)| {
            let d = if r == c { 1.0 } else { 0.0 };
            let p = if r == pre && c == pre { 2.0 } else { 0.0 };
            Complex64::new(d - p, 0.0)
        });
        assert!(max_abs_diff(&u, &expected) < EPS);
    }

    #[test]
    fn tag_full_equals_the_two_query_oracle_route() {
        // the identity needs the copy register at |0⟩: U_f writes f(y) into
        // it, the flip compares against x, U_f erases it again
        let f = table(GeneratorKind::Random, 3, 5);
        let x = 0b011;
        let mut semantic = random_state(RegisterLayout::new(&[("y", 3)]).unwrap(), 42);

        let layout = RegisterLayout::new(&[("y", 3), ("z", 3)]).unwrap();
        let mut viaoracle = StateVector::zeroed(layout);
        viaoracle.amplitudes_mut()[0] = Complex64::ZERO;
        for yv in 0..8usize {
            viaoracle.amplitudes_mut()[yv << 3] = semantic.amplitude(yv);
        }

        make_tag_full(f.clone(), x).unwrap().apply(&mut semantic).unwrap();

        viaoracle.xor_oracle("y", "z", &f).unwrap();
        let z = viaoracle.layout().register("z").unwrap().clone();
        viaoracle.phase_flip(|b| z.value_of(b) == x);
        viaoracle.xor_oracle("y", "z", &f).unwrap();

        for yv in 0..8usize {
            assert!((viaoracle.amplitude(yv << 3) - semantic.amplitude(yv)).norm() < EPS);
            for zv in 1..8usize {
                assert!(viaoracle.amplitude((yv << 3) | zv).norm() < EPS);
            }
        }
    }

    #[test]
    fn tag_pair_on_identity_marks_the_diagonal() {
        let f = table(GeneratorKind::Identity, 2, 0);
        let op = make_tag_pair(f, 1).unwrap();
        let u = op.dense().unwrap();
        for basis in 0..16 {
            let (x, y) = (basis >> 2, basis & 0b11);
            let expected = if x == y { -1.0 } else { 1.0 };
            assert!((u[(basis, basis)] - expected).norm() < EPS);
        }
    }

    #[test]
    fn tag_pair_negates_a_quarter_of_the_data_register() {
        let f = table(GeneratorKind::Random, 4, 7);
        let op = make_tag_pair(f, 1).unwrap();
        let layout = RegisterLayout::new(&[("x", 4), ("y", 4)]).unwrap();
        let mut st = StateVector::basis_state(
            layout,
            &[("x", "1011"), ("y", "0000")],
        )
        .unwrap();
        st.hadamard_all("y").unwrap();
        let before = st.amplitudes().to_vec();
        op.apply(&mut st).unwrap();
        let flipped = st
            .amplitudes()
            .iter()
            .zip(&before)
            .filter(|(a, b)| (**a + **b).norm() < EPS && a.norm() > EPS)
            .count();
        assert_eq!(flipped, 4);
    }

    #[test]
    fn classical_input_matches_the_quantum_register_form() {
        let f = table(GeneratorKind::Random, 4, 9);
        let x = 0b0110;
        for op in [make_tag_pair(f.clone(), 3).unwrap(), make_q(f.clone(), 1).unwrap()] {
            let quantum_layout = RegisterLayout::new(&[("x", 4), ("y", 4)]).unwrap();
            let mut quantum = StateVector::basis_state(
                quantum_layout,
                &[("x", "0110"), ("y", "0000")],
            )
            .unwrap();
            quantum.hadamard_all("y").unwrap();
            op.apply(&mut quantum).unwrap();

            let y_layout = RegisterLayout::new(&[("y", 4)]).unwrap();
            let mut classical = StateVector::zeroed(y_layout);
            classical.hadamard_all("y").unwrap();
            op.apply_with_input(&mut classical, x).unwrap();

            let y = quantum.layout().register("y").unwrap().clone();
            for basis in 0..quantum.amplitudes().len() {
                let expected = if basis >> 4 == x {
                    classical.amplitude(y.value_of(basis))
                } else {
                    Complex64::ZERO
                };
                assert!((quantum.amplitude(basis) - expected).norm() < EPS);
            }
        }
        assert!(matches!(
            make_diffusion(2).unwrap().apply_with_input(
                &mut StateVector::zeroed(RegisterLayout::new(&[("y", 2)]).unwrap()),
                0
            ),
            Err(Error::NoClassicalInput("diffusion"))
        ));
    }

    #[test]
    fn q_at_j_zero_is_bit_identical_to_diffusion() {
        let f = table(GeneratorKind::Random, 3, 2);
        let layout = RegisterLayout::new(&[("x", 3), ("y", 3)]).unwrap();
        let mut a = random_state(layout, 17);
        let mut b = a.clone();
        make_q(f, 0).unwrap().apply(&mut a).unwrap();
        make_diffusion(3).unwrap().apply(&mut b).unwrap();
        for (p, q) in a.amplitudes().iter().zip(b.amplitudes()) {
            assert_eq!(p.re.to_bits(), q.re.to_bits());
            assert_eq!(p.im.to_bits(), q.im.to_bits());
        }
    }

    #[test]
    fn q_prime_reflects_matched_blocks_and_negates_the_rest() {
        let op = make_q_prime(4, 1).unwrap();
        let layout = op.layout();
        // matched prefix: reflection of a suffix basis state about uniform-4
        let mut st = StateVector::basis_state(
            layout.clone(),
            &[("x", "1010"), ("z", "1000")],
        )
        .unwrap();
        op.apply(&mut st).unwrap();
        let x_field = 0b1010usize << 4;
        assert!((st.amplitude(x_field | 0b1000) - Complex64::new(-0.5, 0.0)).norm() < EPS);
        for suffix in 1..4usize {
            assert!(
                (st.amplitude(x_field | 0b1000 | suffix) - Complex64::new(0.5, 0.0)).norm()
                    < EPS
            );
        }
        // mismatched prefix: −I on the block
        let mut st = StateVector::basis_state(layout, &[("x", "1010"), ("z", "0010")]).unwrap();
        op.apply(&mut st).unwrap();
        assert!((st.amplitude(x_field | 0b0010) + Complex64::ONE).norm() < EPS);
    }

    #[test]
    fn q_prime_at_j_zero_is_the_unconditioned_diffusion() {
        let op = make_q_prime(4, 0).unwrap();
        let u = op.dense().unwrap();
        let d = dense_matrix(&RegisterLayout::new(&[("z", 4)]).unwrap(), |st| {
            st.conditional_subset_reflection(None, "z", |_, _| true)
        })
        .unwrap();
        // block diagonal: one diffusion block per x value
        for xv in 0..16usize {
            for r in 0..16 {
                for c in 0..16 {
                    let expected = d[(r, c)];
                    assert!((u[((xv << 4) | r, (xv << 4) | c)] - expected).norm() < EPS);
                }
            }
        }
    }

    #[test]
    fn m_f_relabels_basis_states() {
        let f = table(GeneratorKind::BitReverse, 2, 0);
        let op = make_m_f(f);
        let layout = op.layout();
        let mut st = StateVector::basis_state(layout, &[("y", "10")]).unwrap();
        op.apply(&mut st).unwrap();
        assert!((st.amplitude(0b01) - Complex64::ONE).norm() < EPS);
    }

    #[test]
    fn conjugated_reflection_equals_the_direct_one() {
        let f = table(GeneratorKind::Random, 4, 3);
        for j in [0, 1] {
            let direct = make_q(f.clone(), j).unwrap();
            let conjugated = make_q_conjugated(f.clone(), j).unwrap();
            let layout = direct.layout();
            for seed in 0..20 {
                let mut a = random_state(layout.clone(), 100 + seed);
                let mut b = a.clone();
                direct.apply(&mut a).unwrap();
                conjugated.apply(&mut b).unwrap();
                assert!(max_amp_diff(a.amplitudes(), b.amplitudes()) < EPS);
            }
        }
    }

    #[test]
    fn constructors_validate_their_parameters() {
        let f = table(GeneratorKind::Identity, 4, 0);
        assert!(matches!(
            make_tag_pair(f.clone(), 0),
            Err(Error::TagBitOutOfRange { k: 0, n: 4 })
        ));
        assert!(matches!(
            make_tag_pair(f.clone(), 4),
            Err(Error::TagBitOutOfRange { k: 4, n: 4 })
        ));
        assert!(matches!(
            make_q(f.clone(), 2),
            Err(Error::ReflectionIndexOutOfRange { j: 2, n: 4 })
        ));
        assert!(matches!(make_q_prime(4, 7), Err(Error::ReflectionIndexOutOfRange { .. })));
        assert!(matches!(
            make_tag_full(f, 16),
            Err(Error::ValueWidth { value: 16, width: 4 })
        ));
    }
}
