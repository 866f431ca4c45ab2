//! Dense statevector simulation over a register layout.
//!
//! Amplitudes are `Complex64`, indexed by the composite basis label (see
//! [`crate::layout`] for the ordering convention). All operations are exact
//! up to f64 rounding: no sampling, no truncation. Readout is done on the
//! amplitudes themselves via [`StateVector::exact_distribution`].

use num_complex::Complex64;
use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};
use crate::gate::Gate;
use crate::layout::{Register, RegisterLayout};
use crate::perm::PermutationTable;

/// Squared-magnitude mass below which a control block counts as unpopulated
/// (amplitudes up to 1e−12 are treated as numerical dust).
const POPULATED_EPS: f64 = 1e-24;

#[derive(Clone, Debug)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// |0…0⟩ on the given layout.
    pub fn zeroed(layout: RegisterLayout) -> Self {
        let mut amps = vec![Complex64::ZERO; layout.dimension()];
        amps[0] = Complex64::ONE;
        Self { layout, amps }
    }

    /// Basis state |basis⟩ by global label.
    pub fn from_basis_index(layout: RegisterLayout, basis: usize) -> Self {
        assert!(basis < layout.dimension());
        let mut amps = vec![Complex64::ZERO; layout.dimension()];
        amps[basis] = Complex64::ONE;
        Self { layout, amps }
    }

    /// Basis state from a full register assignment, e.g.
    /// `[("x", "01"), ("y", "00")]`.
    pub fn basis_state(layout: RegisterLayout, assignment: &[(&str, &str)]) -> Result<Self> {
        let basis = layout.assignment_index(assignment)?;
        Ok(Self::from_basis_index(layout, basis))
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn amplitude(&self, basis: usize) -> Complex64 {
        self.amps[basis]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    fn reg(&self, name: &str) -> Result<Register> {
        Ok(self.layout.register(name)?.clone())
    }

    /// H on every qubit of `register`: |0…0⟩ becomes the uniform
    /// superposition over that register.
    pub fn hadamard_all(&mut self, register: &str) -> Result<()> {
        let reg = self.reg(register)?;
        for k in 1..=reg.width() {
            self.hadamard_qubit_mask(self.layout.qubit_mask(reg.qubit(k)));
        }
        Ok(())
    }

    fn hadamard_qubit_mask(&mut self, mask: usize) {
        for i in 0..self.amps.len() {
            if i & mask == 0 {
                let j = i | mask;
                let a = self.amps[i];
                let b = self.amps[j];
                self.amps[i] = (a + b) * FRAC_1_SQRT_2;
                self.amps[j] = (a - b) * FRAC_1_SQRT_2;
            }
        }
    }

    /// Multiplies by −1 every amplitude whose basis label satisfies the
    /// predicate. Diagonal, hence trivially unitary.
    pub fn phase_flip(&mut self, predicate: impl Fn(usize) -> bool) {
        for (basis, amp) in self.amps.iter_mut().enumerate() {
            if predicate(basis) {
                *amp = -*amp;
            }
        }
    }

    /// Conditional reflection about the uniform superposition over a subset
    /// of `target` values.
    ///
    /// For every value `c` of `control` (and every assignment of any other
    /// registers), the block of `target` amplitudes is reflected about the
    /// uniform superposition over `S(c) = {t : member(c, t)}`: members map to
    /// `2·mean − a`, non-members to `−a`. With `control = None` the subset is
    /// the same for all blocks (`member` receives `c = 0`).
    ///
    /// Errors if `S(c)` is empty while the control value `c` carries
    /// amplitude mass.
    pub fn conditional_subset_reflection(
        &mut self,
        control: Option<&str>,
        target: &str,
        member: impl Fn(usize, usize) -> bool,
    ) -> Result<()> {
        let target = self.reg(target)?;
        let control = match control {
            Some(name) => {
                let c = self.reg(name)?;
                if c.name() == target.name() {
                    return Err(Error::LayoutMismatch(
                        "control and target must be distinct registers".into(),
                    ));
                }
                Some(c)
            }
            None => None,
        };

        let t_shift = target.shift();
        let t_card = target.cardinality();
        let low_mask = (1usize << t_shift) - 1;
        let blocks = self.amps.len() >> target.width();

        for o in 0..blocks {
            // insert `width` zero bits at the target's position
            let outer = ((o & !low_mask) << target.width()) | (o & low_mask);
            let c = control.as_ref().map_or(0, |r| r.value_of(outer));

            let mut sum = Complex64::ZERO;
            let mut count = 0usize;
            let mut mass = 0.0f64;
            for t in 0..t_card {
                let amp = self.amps[outer | (t << t_shift)];
                mass += amp.norm_sqr();
                if member(c, t) {
                    sum += amp;
                    count += 1;
                }
            }
            if count == 0 {
                if mass > POPULATED_EPS {
                    return Err(Error::EmptyReflectionSubset { value: c });
                }
                // empty subset over a dead block: the reflection is −I
                for t in 0..t_card {
                    let idx = outer | (t << t_shift);
                    self.amps[idx] = -self.amps[idx];
                }
                continue;
            }
            let twice_mean = sum * (2.0 / count as f64);
            for t in 0..t_card {
                let idx = outer | (t << t_shift);
                self.amps[idx] = if member(c, t) {
                    twice_mean - self.amps[idx]
                } else {
                    -self.amps[idx]
                };
            }
        }
        Ok(())
    }

    /// |a⟩|b⟩ ↦ |a⟩|f(a) ⊕ b⟩ with a table-backed f. Self-inverse.
    pub fn xor_oracle(
        &mut self,
        input: &str,
        output: &str,
        table: &PermutationTable,
    ) -> Result<()> {
        let in_reg = self.reg(input)?;
        let out_reg = self.reg(output)?;
        for reg in [&in_reg, &out_reg] {
            if reg.width() != table.width() {
                return Err(Error::RegisterWidthMismatch {
                    register: reg.name().to_string(),
                    expected: table.width(),
                    actual: reg.width(),
                });
            }
        }
        self.xor_with(&in_reg, &out_reg, |v| table.apply(v));
        Ok(())
    }

    /// General XOR oracle |a⟩|b⟩ ↦ |a⟩|g(a) ⊕ b⟩ for an arbitrary function
    /// into the output register's value space.
    pub fn xor_oracle_fn(
        &mut self,
        input: &str,
        output: &str,
        g: impl Fn(usize) -> usize,
    ) -> Result<()> {
        let in_reg = self.reg(input)?;
        let out_reg = self.reg(output)?;
        if in_reg.name() == out_reg.name() {
            return Err(Error::LayoutMismatch(
                "oracle input and output must be distinct registers".into(),
            ));
        }
        self.xor_with(&in_reg, &out_reg, g);
        Ok(())
    }

    fn xor_with(&mut self, in_reg: &Register, out_reg: &Register, g: impl Fn(usize) -> usize) {
        let out_card = out_reg.cardinality();
        for basis in 0..self.amps.len() {
            let gv = g(in_reg.value_of(basis));
            debug_assert!(gv < out_card);
            let partner = basis ^ (gv << out_reg.shift());
            // XOR pairs states two by two; swap each pair once
            if partner > basis {
                self.amps.swap(basis, partner);
            }
        }
    }

    /// Relabels one register's basis values in place: |v⟩ ↦ |f(v)⟩.
    pub fn basis_relabel(&mut self, register: &str, table: &PermutationTable) -> Result<()> {
        let reg = self.reg(register)?;
        if reg.width() != table.width() {
            return Err(Error::RegisterWidthMismatch {
                register: reg.name().to_string(),
                expected: table.width(),
                actual: reg.width(),
            });
        }
        let mut relabeled = vec![Complex64::ZERO; self.amps.len()];
        for (basis, &amp) in self.amps.iter().enumerate() {
            let mapped = reg.with_value(basis, table.apply(reg.value_of(basis)));
            relabeled[mapped] = amp;
        }
        self.amps = relabeled;
        Ok(())
    }

    /// Applies one elementary gate by global qubit indices.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.layout.total_width())?;
        let mask = |q: usize| self.layout.qubit_mask(q);
        match gate {
            Gate::H(q) => self.hadamard_qubit_mask(mask(*q)),
            Gate::X(q) => {
                let m = mask(*q);
                for i in 0..self.amps.len() {
                    if i & m == 0 {
                        self.amps.swap(i, i | m);
                    }
                }
            }
            Gate::Cnot { control, target } => {
                let c = mask(*control);
                let t = mask(*target);
                for i in 0..self.amps.len() {
                    if i & c != 0 && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
            Gate::Cz(a, b) => {
                let m = mask(*a) | mask(*b);
                for i in 0..self.amps.len() {
                    if i & m == m {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            Gate::Toffoli { controls, target } => {
                let c = mask(controls[0]) | mask(controls[1]);
                let t = mask(*target);
                for i in 0..self.amps.len() {
                    if i & c == c && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
            Gate::Swap(a, b) => {
                let ma = mask(*a);
                let mb = mask(*b);
                for i in 0..self.amps.len() {
                    if i & ma != 0 && i & mb == 0 {
                        self.amps.swap(i, i ^ ma ^ mb);
                    }
                }
            }
            Gate::Mcz { qubits } => {
                let m = qubits.iter().fold(0usize, |acc, q| acc | mask(*q));
                for i in 0..self.amps.len() {
                    if i & m == m {
                        self.amps[i] = -self.amps[i];
                    }
                }
            }
            Gate::Mcx { controls, target } => {
                let c = controls.iter().fold(0usize, |acc, q| acc | mask(*q));
                let t = mask(*target);
                for i in 0..self.amps.len() {
                    if i & c == c && i & t == 0 {
                        self.amps.swap(i, i | t);
                    }
                }
            }
        }
        Ok(())
    }

    /// Multiplies the whole state by a scalar (used for circuit phase
    /// markers).
    pub fn scale(&mut self, factor: Complex64) {
        for amp in &mut self.amps {
            *amp *= factor;
        }
    }

    /// Exact marginal distribution of one register: entry `v` is the
    /// probability of reading value `v`. Sums to `norm_sqr`.
    pub fn exact_distribution(&self, register: &str) -> Result<Vec<f64>> {
        let reg = self.reg(register)?;
        let mut dist = vec![0.0f64; reg.cardinality()];
        for (basis, amp) in self.amps.iter().enumerate() {
            dist[reg.value_of(basis)] += amp.norm_sqr();
        }
        Ok(dist)
    }

    /// Probability of reading `value` on `register`.
    pub fn probability_of(&self, register: &str, value: usize) -> Result<f64> {
        let reg = self.reg(register)?;
        if value >= reg.cardinality() {
            return Err(Error::ValueWidth { value, width: reg.width() });
        }
        Ok(self
            .amps
            .iter()
            .enumerate()
            .filter(|(basis, _)| reg.value_of(*basis) == value)
            .map(|(_, amp)| amp.norm_sqr())
            .sum())
    }

    /// Most probable value of one register with its probability.
    pub fn dominant_value(&self, register: &str) -> Result<(usize, f64)> {
        let dist = self.exact_distribution(register)?;
        let (value, p) = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("register has at least two values");
        Ok((value, *p))
    }
}

/// Seeded pseudo-random unit state over `layout`. The same seed always
/// yields the same amplitudes; used for sampled equivalence checks.
pub fn random_state(layout: RegisterLayout, seed: u64) -> StateVector {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut st = StateVector::zeroed(layout);
    loop {
        for amp in st.amps.iter_mut() {
            *amp = Complex64::new(rng.r#gen::<f64>() - 0.5, rng.r#gen::<f64>() - 0.5);
        }
        let norm = st.norm_sqr().sqrt();
        if norm > 1e-6 {
            let inv = 1.0 / norm;
            for amp in st.amps.iter_mut() {
                *amp *= inv;
            }
            return st;
        }
    }
}
