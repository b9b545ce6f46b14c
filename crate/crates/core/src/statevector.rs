//! Dense complex statevector simulator.
//!
//! Qubit ordering is global: qubit 0 is the leftmost symbol of a ket and the
//! most significant bit of the amplitude index, so `|001⟩` on three qubits is
//! amplitude index 1 and qubit 2 is the least significant bit.
//!
//! Only the primitives needed by the ensemble and Deutsch-Jozsa circuits are
//! provided: basis preparation, single-qubit gates, bit-flip oracles, a
//! multiplexed Ry rotation, direct amplitude encoding, marginals and
//! postselection. Memory is `16 · 2^n` bytes, so construction refuses more
//! than [`DEFAULT_MAX_QUBITS`] qubits unless a larger cap is passed explicitly.

use std::fmt;

use num_complex::Complex64;

use crate::deutsch_jozsa::BooleanOracle;
use crate::error::{Error, Result};

/// Tolerance for norm checks.
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Tolerance for algebraic identities such as `H·H = I`.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Postselection refuses branches whose probability is at or below this.
pub const POSTSELECT_MIN_PROBABILITY: f64 = 1e-12;
pub const DEFAULT_MAX_QUBITS: usize = 26;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A 2×2 complex matrix acting on one qubit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleQubitGate {
    matrix: [[Complex64; 2]; 2],
}

impl SingleQubitGate {
    /// Wraps an arbitrary matrix, rejecting it unless it is unitary within
    /// [`IDENTITY_TOLERANCE`].
    pub fn new(matrix: [[Complex64; 2]; 2]) -> Result<Self> {
        let gate = Self { matrix };
        if gate.unitarity_defect() > IDENTITY_TOLERANCE {
            return Err(Error::invalid("gate matrix is not unitary"));
        }
        Ok(gate)
    }

    pub fn hadamard() -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self {
            matrix: [[h, h], [h, -h]],
        }
    }

    pub fn pauli_x() -> Self {
        Self {
            matrix: [[ZERO, ONE], [ONE, ZERO]],
        }
    }

    pub fn pauli_z() -> Self {
        Self {
            matrix: [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    /// `Ry(angle) = exp(-i·angle·Y/2)`, so `Ry(angle)|0⟩ = cos(angle/2)|0⟩ + sin(angle/2)|1⟩`.
    pub fn ry(angle: f64) -> Self {
        let (s, c) = (angle / 2.0).sin_cos();
        Self {
            matrix: [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
        }
    }

    pub fn matrix(&self) -> &[[Complex64; 2]; 2] {
        &self.matrix
    }

    /// Largest entrywise deviation of `U·U†` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let entry = m[r][0] * m[c][0].conj() + m[r][1] * m[c][1].conj();
                let expected = if r == c { ONE } else { ZERO };
                worst = worst.max((entry - expected).norm());
            }
        }
        worst
    }
}

/// Dense amplitude vector over `num_qubits` qubits.
#[derive(Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateVector")
            .field("num_qubits", &self.num_qubits)
            .field("amplitudes", &self.amplitudes)
            .finish()
    }
}

fn check_capacity(num_qubits: usize, cap: usize) -> Result<()> {
    if num_qubits < 1 {
        return Err(Error::invalid("a state needs at least one qubit"));
    }
    if num_qubits > cap {
        return Err(Error::CapacityExceeded {
            requested: num_qubits,
            cap,
        });
    }
    Ok(())
}

impl StateVector {
    /// `|basis_index⟩` on `num_qubits` qubits.
    pub fn new_basis_state(num_qubits: usize, basis_index: usize) -> Result<Self> {
        Self::new_basis_state_capped(num_qubits, basis_index, DEFAULT_MAX_QUBITS)
    }

    pub fn new_basis_state_capped(num_qubits: usize, basis_index: usize, cap: usize) -> Result<Self> {
        check_capacity(num_qubits, cap)?;
        let dim = 1usize << num_qubits;
        if basis_index >= dim {
            return Err(Error::invalid(format!(
                "basis index {basis_index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[basis_index] = ONE;
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    /// Takes ownership of explicit amplitudes. They must already be normalized.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "amplitude count {len} is not a power of two ≥ 2"
            )));
        }
        let num_qubits = len.trailing_zeros() as usize;
        check_capacity(num_qubits, DEFAULT_MAX_QUBITS)?;
        let state = Self {
            num_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::invalid(format!("amplitudes have squared norm {norm}")));
        }
        Ok(state)
    }

    /// Direct state preparation `Σ_k √(w_k/Σw) |k⟩ ⊗ |0…0⟩` with `extra_qubits`
    /// ancillas appended on the right.
    pub fn amplitude_encode(weights: &[f64], extra_qubits: usize) -> Result<Self> {
        let len = weights.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "weight count {len} is not a power of two ≥ 2"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::invalid(format!("weight {w} is not a finite non-negative real")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("all weights are zero"));
        }
        let register_qubits = len.trailing_zeros() as usize;
        let num_qubits = register_qubits + extra_qubits;
        check_capacity(num_qubits, DEFAULT_MAX_QUBITS)?;
        let mut amplitudes = vec![ZERO; 1 << num_qubits];
        for (k, w) in weights.iter().enumerate() {
            amplitudes[k << extra_qubits] = Complex64::new((w / total).sqrt(), 0.0);
        }
        Ok(Self {
            num_qubits,
            amplitudes,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, basis_index: usize) -> Complex64 {
        self.amplitudes[basis_index]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Bit mask of `qubit` inside an amplitude index.
    pub fn mask(&self, qubit: usize) -> usize {
        1 << (self.num_qubits - 1 - qubit)
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit >= self.num_qubits {
            return Err(Error::QubitOutOfRange {
                index: qubit,
                num_qubits: self.num_qubits,
            });
        }
        Ok(())
    }

    fn check_distinct(&self, qubits: &[usize]) -> Result<()> {
        let mut seen = 0usize;
        for &q in qubits {
            self.check_qubit(q)?;
            let m = self.mask(q);
            if seen & m != 0 {
                return Err(Error::invalid(format!("qubit {q} listed twice")));
            }
            seen |= m;
        }
        Ok(())
    }

    /// Reads the bits of `qubits` out of `index`, `qubits[0]` most significant.
    fn gather(&self, index: usize, qubits: &[usize]) -> usize {
        qubits
            .iter()
            .fold(0, |acc, &q| (acc << 1) | usize::from(index & self.mask(q) != 0))
    }

    pub fn apply_gate(&mut self, gate: &SingleQubitGate, target: usize) -> Result<()> {
        self.check_qubit(target)?;
        let mask = self.mask(target);
        let [[m00, m01], [m10, m11]] = gate.matrix;
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let a = self.amplitudes[i];
            let b = self.amplitudes[j];
            self.amplitudes[i] = m00 * a + m01 * b;
            self.amplitudes[j] = m10 * a + m11 * b;
        }
        Ok(())
    }

    pub fn apply_hadamard_layer(&mut self, targets: &[usize]) -> Result<()> {
        self.check_distinct(targets)?;
        let h = SingleQubitGate::hadamard();
        for &t in targets {
            self.apply_gate(&h, t)?;
        }
        Ok(())
    }

    /// `U_g : |x, y⟩ → |x, y ⊕ g(x)⟩`, with `inputs[0]` the most significant
    /// bit of `x`.
    pub fn apply_boolean_oracle(&mut self, g: &BooleanOracle, inputs: &[usize], target: usize) -> Result<()> {
        if g.arity() != inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: g.arity(),
                actual: inputs.len(),
            });
        }
        let mut all = inputs.to_vec();
        all.push(target);
        self.check_distinct(&all)?;
        let tmask = self.mask(target);
        for i in 0..self.amplitudes.len() {
            if i & tmask == 0 && g.eval(self.gather(i, inputs)) {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// Uniformly controlled Ry: on the branch where the `controls` register
    /// holds value `k`, applies `Ry(angles[k])` to `target`.
    pub fn apply_multiplexed_ry(&mut self, controls: &[usize], target: usize, angles: &[f64]) -> Result<()> {
        if angles.len() != 1 << controls.len() {
            return Err(Error::DimensionMismatch {
                expected: 1 << controls.len(),
                actual: angles.len(),
            });
        }
        let mut all = controls.to_vec();
        all.push(target);
        self.check_distinct(&all)?;
        let gates: Vec<SingleQubitGate> = angles.iter().map(|&a| SingleQubitGate::ry(a)).collect();
        let tmask = self.mask(target);
        for i in 0..self.amplitudes.len() {
            if i & tmask != 0 {
                continue;
            }
            let [[m00, m01], [m10, m11]] = gates[self.gather(i, controls)].matrix;
            let j = i | tmask;
            let a = self.amplitudes[i];
            let b = self.amplitudes[j];
            self.amplitudes[i] = m00 * a + m01 * b;
            self.amplitudes[j] = m10 * a + m11 * b;
        }
        Ok(())
    }

    pub fn marginal_probability(&self, qubit: usize, outcome: bool) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = self.mask(qubit);
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| (i & mask != 0) == outcome)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Probability that the register `qubits` (first entry most significant)
    /// reads `value`.
    pub fn register_probability(&self, qubits: &[usize], value: usize) -> Result<f64> {
        Ok(self.register_distribution(qubits)?[value])
    }

    /// Full marginal distribution of the register `qubits`.
    pub fn register_distribution(&self, qubits: &[usize]) -> Result<Vec<f64>> {
        self.check_distinct(qubits)?;
        let mut dist = vec![0.0; 1 << qubits.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            dist[self.gather(i, qubits)] += a.norm_sqr();
        }
        Ok(dist)
    }

    /// Zeroes every amplitude inconsistent with `qubit = outcome` and
    /// renormalizes. Refuses branches of probability ≤ [`POSTSELECT_MIN_PROBABILITY`].
    pub fn postselect(&mut self, qubit: usize, outcome: bool) -> Result<()> {
        let probability = self.marginal_probability(qubit, outcome)?;
        if !(probability > POSTSELECT_MIN_PROBABILITY) {
            return Err(Error::ZeroProbabilityBranch { probability });
        }
        let mask = self.mask(qubit);
        let scale = 1.0 / probability.sqrt();
        for (i, a) in self.amplitudes.iter_mut().enumerate() {
            if (i & mask != 0) == outcome {
                *a *= scale;
            } else {
                *a = ZERO;
            }
        }
        Ok(())
    }

    /// Largest amplitude-wise distance to `other`.
    pub fn max_deviation(&self, other: &StateVector) -> f64 {
        if self.num_qubits != other.num_qubits {
            return f64::INFINITY;
        }
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest amplitude-wise distance to `other` after removing the best
    /// single global phase.
    pub fn max_deviation_up_to_phase(&self, other: &StateVector) -> f64 {
        if self.num_qubits != other.num_qubits {
            return f64::INFINITY;
        }
        let overlap: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            ONE
        };
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a * phase - b).norm())
            .fold(0.0, f64::max)
    }
}
