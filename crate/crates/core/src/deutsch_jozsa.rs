//! Deutsch-Jozsa and its embedding in the quantum ensemble template.
//!
//! Both circuits act on `n + 1` qubits: qubits `0..n` are the input (or
//! parameter) register and qubit `n` is the output qubit.
//!
//! The two protocols store the oracle differently. Deutsch-Jozsa keeps the
//! output qubit in `|−⟩` and picks up `g` as a phase, while the ensemble
//! embedding first rotates the output qubit to `|0⟩` and writes `g` into it
//! as a bit. [`congruence_report`] compares the two sequences through the
//! phase-kickback map `|x⟩|f⟩ ↦ (−1)^f |x⟩|−⟩` on the output qubit, up to a
//! global phase.

use std::fmt;

use crate::error::{Error, Result};
use crate::statevector::{SingleQubitGate, StateVector, DEFAULT_MAX_QUBITS, NORM_TOLERANCE};

/// Promise carried by a [`BooleanOracle`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OracleKind {
    Constant,
    Balanced,
    /// No promise; used for ensemble classifiers.
    General,
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::Constant => "constant",
            OracleKind::Balanced => "balanced",
            OracleKind::General => "general",
        })
    }
}

/// How to build a balanced oracle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BalancedSpec {
    /// `g(x) = popcount(x & mask) mod 2`; balanced for every nonzero mask.
    Mask(u64),
    /// `g(x) = 1` exactly on the listed inputs; must have `2^(n−1)` distinct entries.
    Subset(Vec<usize>),
}

/// Total function `{0,1}^n → {0,1}` stored as a truth table indexed by the
/// integer value of `x` (first input bit most significant).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BooleanOracle {
    arity: usize,
    table: Vec<bool>,
    kind: OracleKind,
}

fn check_arity(n: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::invalid("oracle arity must be at least 1"));
    }
    // one output qubit on top of the inputs must still fit in a state
    if n >= DEFAULT_MAX_QUBITS {
        return Err(Error::CapacityExceeded {
            requested: n + 1,
            cap: DEFAULT_MAX_QUBITS,
        });
    }
    Ok(())
}

impl BooleanOracle {
    pub fn constant(n: usize, value: bool) -> Result<Self> {
        check_arity(n)?;
        Ok(Self {
            arity: n,
            table: vec![value; 1 << n],
            kind: OracleKind::Constant,
        })
    }

    pub fn balanced(n: usize, spec: &BalancedSpec) -> Result<Self> {
        check_arity(n)?;
        let size = 1usize << n;
        let table = match spec {
            BalancedSpec::Mask(mask) => {
                let mask = *mask as usize;
                if mask == 0 {
                    return Err(Error::invalid("balanced mask must be nonzero"));
                }
                if mask >= size {
                    return Err(Error::invalid(format!("mask {mask} has bits beyond arity {n}")));
                }
                (0..size).map(|x| (x & mask).count_ones() % 2 == 1).collect()
            }
            BalancedSpec::Subset(ones) => {
                let mut table = vec![false; size];
                for &x in ones {
                    if x >= size {
                        return Err(Error::invalid(format!("subset entry {x} out of range for arity {n}")));
                    }
                    if table[x] {
                        return Err(Error::invalid(format!("subset entry {x} repeated")));
                    }
                    table[x] = true;
                }
                if ones.len() != size / 2 {
                    return Err(Error::invalid(format!(
                        "balanced subset needs {} entries, got {}",
                        size / 2,
                        ones.len()
                    )));
                }
                table
            }
        };
        Ok(Self {
            arity: n,
            table,
            kind: OracleKind::Balanced,
        })
    }

    /// Oracle with no promise.
    pub fn general(table: Vec<bool>) -> Result<Self> {
        let len = table.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::invalid(format!("truth table length {len} is not a power of two ≥ 2")));
        }
        let arity = len.trailing_zeros() as usize;
        check_arity(arity)?;
        Ok(Self {
            arity,
            table,
            kind: OracleKind::General,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn eval(&self, x: usize) -> bool {
        self.table[x]
    }

    pub fn count_ones(&self) -> usize {
        self.table.iter().filter(|b| **b).count()
    }
}

/// Result of one Deutsch-Jozsa run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DjOutcome {
    pub p_all_zeros: f64,
    pub verdict: OracleKind,
}

fn input_register(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// `|ψ₀⟩ … |ψ₃⟩` of the Deutsch-Jozsa protocol.
pub fn deutsch_jozsa_states(g: &BooleanOracle) -> Result<[StateVector; 4]> {
    let n = g.arity();
    let inputs = input_register(n);
    let psi0 = StateVector::new_basis_state(n + 1, 1)?;
    let mut psi1 = psi0.clone();
    psi1.apply_hadamard_layer(&input_register(n + 1))?;
    let mut psi2 = psi1.clone();
    psi2.apply_boolean_oracle(g, &inputs, n)?;
    let mut psi3 = psi2.clone();
    psi3.apply_hadamard_layer(&inputs)?;
    Ok([psi0, psi1, psi2, psi3])
}

/// Runs the protocol and measures `|0⟩^⊗n` on the input register. Refuses
/// oracles without the constant/balanced promise.
pub fn run_deutsch_jozsa(g: &BooleanOracle) -> Result<DjOutcome> {
    if g.kind() == OracleKind::General {
        return Err(Error::PromiseViolated);
    }
    let [.., psi3] = deutsch_jozsa_states(g)?;
    let p_all_zeros = psi3.register_probability(&input_register(g.arity()), 0)?;
    // exact runs give 0 or 1; the threshold only absorbs rounding
    let verdict = if p_all_zeros > 0.5 {
        OracleKind::Constant
    } else {
        OracleKind::Balanced
    };
    Ok(DjOutcome { p_all_zeros, verdict })
}

/// The composite `A_DJ = (H^⊗n ⊗ I) · U_g · (I^⊗n ⊗ X) · (I^⊗n ⊗ H)`,
/// applied right to left.
pub fn apply_a_dj(state: &mut StateVector, g: &BooleanOracle) -> Result<()> {
    let n = g.arity();
    if state.num_qubits() != n + 1 {
        return Err(Error::DimensionMismatch {
            expected: n + 1,
            actual: state.num_qubits(),
        });
    }
    state.apply_gate(&SingleQubitGate::hadamard(), n)?;
    state.apply_gate(&SingleQubitGate::pauli_x(), n)?;
    state.apply_boolean_oracle(g, &input_register(n), n)?;
    state.apply_hadamard_layer(&input_register(n))
}

/// `|ψ₀⟩ … |ψ₃⟩` of the ensemble embedding: initial state, uniform `W_DJ`,
/// `A_DJ`, and the closing Hadamard layer on the parameter register.
pub fn qensemble_dj_states(g: &BooleanOracle) -> Result<[StateVector; 4]> {
    let n = g.arity();
    let psi0 = StateVector::new_basis_state(n + 1, 1)?;
    let mut psi1 = psi0.clone();
    // W_DJ: uniform weights, plus the Hadamard on the output qubit that
    // puts it in |−⟩ as in Deutsch-Jozsa step ii
    psi1.apply_hadamard_layer(&input_register(n + 1))?;
    let mut psi2 = psi1.clone();
    apply_a_dj(&mut psi2, g)?;
    let mut psi3 = psi2.clone();
    psi3.apply_hadamard_layer(&input_register(n))?;
    Ok([psi0, psi1, psi2, psi3])
}

/// Probability of reading the output qubit as `|0⟩` (ensemble label −1)
/// after the uniform-weight embedding.
pub fn run_qensemble_dj(g: &BooleanOracle) -> Result<f64> {
    let [.., psi3] = qensemble_dj_states(g)?;
    psi3.marginal_probability(g.arity(), false)
}

/// Maps the output qubit's computational value to a phase on `|−⟩`:
/// `α|0⟩ + β|1⟩ ↦ (α − β)|−⟩`, branch by branch.
pub fn phase_kickback_image(state: &StateVector) -> StateVector {
    let n = state.num_qubits();
    let mask = state.mask(n - 1);
    let amps = state.amplitudes();
    let mut out = amps.to_vec();
    for i in (0..amps.len()).filter(|i| i & mask == 0) {
        let diff = (amps[i] - amps[i | mask]) * std::f64::consts::FRAC_1_SQRT_2;
        out[i] = diff;
        out[i | mask] = -diff;
    }
    StateVector::from_amplitudes(out).expect("kickback image of a one-branch-per-input state stays normalized")
}

/// Amplitude-wise deviations, up to global phase, between corresponding
/// states of the two protocols.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CongruenceReport {
    /// Ensemble `|ψ₁⟩` against Deutsch-Jozsa `|ψ₁⟩` (both hold `|−⟩` on the output).
    pub prepared: f64,
    /// Ensemble `|ψ₂⟩` (after `A_DJ`) against Deutsch-Jozsa `|ψ₃⟩`: both have
    /// the oracle and the input Hadamard layer applied.
    pub after_a_dj: f64,
    /// Ensemble `|ψ₃⟩` (layer uncomputed) against Deutsch-Jozsa `|ψ₂⟩`.
    pub uncomputed: f64,
}

impl CongruenceReport {
    pub fn max(&self) -> f64 {
        self.prepared.max(self.after_a_dj).max(self.uncomputed)
    }
}

pub fn congruence_report(g: &BooleanOracle) -> Result<CongruenceReport> {
    let [_, dj1, dj2, dj3] = deutsch_jozsa_states(g)?;
    let [_, qe1, qe2, qe3] = qensemble_dj_states(g)?;
    Ok(CongruenceReport {
        prepared: qe1.max_deviation_up_to_phase(&dj1),
        after_a_dj: phase_kickback_image(&qe2).max_deviation_up_to_phase(&dj3),
        uncomputed: phase_kickback_image(&qe3).max_deviation_up_to_phase(&dj2),
    })
}

/// True iff every step of the embedding matches its Deutsch-Jozsa
/// counterpart within [`NORM_TOLERANCE`].
pub fn congruence_check(g: &BooleanOracle) -> bool {
    congruence_report(g).is_ok_and(|r| r.max() < NORM_TOLERANCE)
}
