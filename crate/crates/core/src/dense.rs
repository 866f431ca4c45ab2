//! Dense operator forms and the numeric comparisons built on them.
//!
//! Dense matrices exist for verification: operators are applied column by
//! column to basis states, so any applier can be densified and compared.
//! Matrices are bounded to 10 qubits (a 1024×1024 complex matrix); larger
//! verification runs use the sampled comparisons instead.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layout::RegisterLayout;
use crate::state::StateVector;

/// Width bound for dense forms.
pub const DENSE_MAX_QUBITS: usize = 10;

/// Builds the matrix of an applier over `layout`, one basis column at a time.
pub fn dense_matrix(
    layout: &RegisterLayout,
    mut apply: impl FnMut(&mut StateVector) -> Result<()>,
) -> Result<Array2<Complex64>> {
    let width = layout.total_width();
    if width > DENSE_MAX_QUBITS {
        return Err(Error::DenseWidth { width, max: DENSE_MAX_QUBITS });
    }
    let dim = layout.dimension();
    let mut u = Array2::zeros((dim, dim));
    for col in 0..dim {
        let mut state = StateVector::from_basis_index(layout.clone(), col);
        apply(&mut state)?;
        for (row, amp) in state.amplitudes().iter().enumerate() {
            u[(row, col)] = *amp;
        }
    }
    Ok(u)
}

/// max |(U†U − I)_{ij}|: zero for exactly unitary U.
pub fn unitarity_defect(u: &Array2<Complex64>) -> f64 {
    let uh = u.t().mapv(|z| z.conj());
    defect_from_identity(&uh.dot(u))
}

/// max |(U·U − I)_{ij}|: zero when U is an involution.
pub fn involution_defect(u: &Array2<Complex64>) -> f64 {
    defect_from_identity(&u.dot(u))
}

fn defect_from_identity(m: &Array2<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for ((i, j), z) in m.indexed_iter() {
        let expected = if i == j { Complex64::ONE } else { Complex64::ZERO };
        worst = worst.max((z - expected).norm());
    }
    worst
}

/// max elementwise |A − B|.
pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// max elementwise |A − φB| with φ the unit phase aligning A to B at B's
/// largest element. Zero means equal up to a global phase.
pub fn phase_aligned_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    let phi = alignment_phase(a.iter().copied(), b.iter().copied());
    a.iter().zip(b.iter()).map(|(x, y)| (x - phi * y).norm()).fold(0.0, f64::max)
}

/// max |a_i − b_i| over amplitude slices.
pub fn max_amp_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// max |a_i − φ·b_i| with φ chosen as in [`phase_aligned_diff`].
pub fn phase_aligned_amp_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let phi = alignment_phase(a.iter().copied(), b.iter().copied());
    a.iter().zip(b).map(|(x, y)| (x - phi * y).norm()).fold(0.0, f64::max)
}

fn alignment_phase(
    a: impl Iterator<Item = Complex64>,
    b: impl Iterator<Item = Complex64>,
) -> Complex64 {
    let mut reference = (Complex64::ZERO, Complex64::ZERO);
    let mut best = 0.0f64;
    for (x, y) in a.zip(b) {
        if y.norm_sqr() > best {
            best = y.norm_sqr();
            reference = (x, y);
        }
    }
    let (x, y) = reference;
    if best == 0.0 || x.norm() < 1e-14 {
        return Complex64::ONE; // no common phase exists; compare as-is
    }
    let ratio = x / y;
    ratio / ratio.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::RegisterLayout;

    fn diffusion_matrix(dim: usize) -> Array2<Complex64> {
        // 2|ψ⟩⟨ψ| − I has entries 2/dim − δ_ij
        Array2::from_shape_fn((dim, dim), |(i, j)| {
            Complex64::new(2.0 / dim as f64 - if i == j { 1.0 } else { 0.0 }, 0.0)
        })
    }

    #[test]
    fn densified_reflection_matches_the_analytic_matrix() {
        let layout = RegisterLayout::new(&[("y", 2)]).unwrap();
        let u = dense_matrix(&layout, |st| {
            st.conditional_subset_reflection(None, "y", |_, _| true)
        })
        .unwrap();
        assert!(max_abs_diff(&u, &diffusion_matrix(4)) < 1e-12);
        assert!(unitarity_defect(&u) < 1e-12);
        assert!(involution_defect(&u) < 1e-12);
    }

    #[test]
    fn dense_width_guard_holds() {
        let layout = RegisterLayout::new(&[("y", 11)]).unwrap();
        assert!(matches!(
            dense_matrix(&layout, |_| Ok(())),
            Err(Error::DenseWidth { width: 11, .. })
        ));
    }

    #[test]
    fn phase_alignment_sees_through_a_global_sign() {
        let layout = RegisterLayout::new(&[("y", 2)]).unwrap();
        let u = dense_matrix(&layout, |st| {
            st.conditional_subset_reflection(None, "y", |_, _| true)
        })
        .unwrap();
        let negated = u.mapv(|z| -z);
        // largest element of the 2-qubit reflection is 1/2, so the raw gap is 1
        assert!((max_abs_diff(&u, &negated) - 1.0).abs() < 1e-12);
        assert!(phase_aligned_diff(&u, &negated) < 1e-12);
    }
}
