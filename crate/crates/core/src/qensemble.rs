//! Quantum ensemble of classifiers on the statevector simulator.
//!
//! Register layout for `n = P·b` parameter bits: qubits `0..n` hold the
//! parameter code, qubit `n` is the output qubit (`|0⟩` ↔ label −1,
//! `|1⟩` ↔ label +1), and qubit `n + 1` is the accuracy ancilla while an
//! accuracy-weighted state is being built. Training and query data stay
//! classical and are folded into the classifier oracle.

use crate::deutsch_jozsa::BooleanOracle;
use crate::error::{Error, Result};
use crate::models::{self, Dataset, ModelFamily, ModelSpec};
use crate::statevector::{StateVector, NORM_TOLERANCE};

/// Largest parameter register the simulated pipelines accept.
pub const MAX_TOTAL_BITS: usize = 20;

/// Differences `|p_plus − p_minus|` at or below this are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Uniform `b`-bit grid over `[−1, 1]` for each of `P` parameters,
/// endpoints included. Parameter `j` occupies bits `j·b .. (j+1)·b` of the
/// code counted from the left, most significant first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParameterCode {
    num_params: usize,
    bits_per_param: usize,
}

impl ParameterCode {
    pub fn new(num_params: usize, bits_per_param: usize) -> Result<Self> {
        if num_params < 1 || bits_per_param < 1 {
            return Err(Error::invalid("parameter code needs P ≥ 1 and b ≥ 1"));
        }
        let total = num_params.saturating_mul(bits_per_param);
        if total > MAX_TOTAL_BITS {
            return Err(Error::invalid(format!(
                "{total} parameter bits exceeds the simulation cap of {MAX_TOTAL_BITS}"
            )));
        }
        Ok(Self {
            num_params,
            bits_per_param,
        })
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn bits_per_param(&self) -> usize {
        self.bits_per_param
    }

    pub fn total_bits(&self) -> usize {
        self.num_params * self.bits_per_param
    }

    pub fn num_codes(&self) -> usize {
        1 << self.total_bits()
    }

    fn levels(&self) -> usize {
        1 << self.bits_per_param
    }

    /// Parameters for the integer `code`.
    pub fn decode(&self, code: usize) -> Result<Vec<f64>> {
        if code >= self.num_codes() {
            return Err(Error::invalid(format!("code {code} has more than {} bits", self.total_bits())));
        }
        let b = self.bits_per_param;
        let top = (self.levels() - 1) as f64;
        Ok((0..self.num_params)
            .map(|j| {
                let shift = (self.num_params - 1 - j) * b;
                let k = (code >> shift) & (self.levels() - 1);
                -1.0 + 2.0 * k as f64 / top
            })
            .collect())
    }

    /// Parameters for a code written as a bit string such as `"0110"`.
    pub fn decode_bits(&self, bits: &str) -> Result<Vec<f64>> {
        if bits.len() != self.total_bits() {
            return Err(Error::DimensionMismatch {
                expected: self.total_bits(),
                actual: bits.len(),
            });
        }
        let code = usize::from_str_radix(bits, 2).map_err(|_| Error::invalid(format!("{bits:?} is not a bit string")))?;
        self.decode(code)
    }

    /// Inverse of [`ParameterCode::decode`]; each entry is snapped to its
    /// nearest grid level.
    pub fn encode(&self, theta: &[f64]) -> Result<usize> {
        if theta.len() != self.num_params {
            return Err(Error::DimensionMismatch {
                expected: self.num_params,
                actual: theta.len(),
            });
        }
        let top = (self.levels() - 1) as f64;
        theta.iter().try_fold(0usize, |acc, &t| {
            if !(-1.0..=1.0).contains(&t) {
                return Err(Error::invalid(format!("parameter {t} outside [-1, 1]")));
            }
            let k = ((t + 1.0) / 2.0 * top).round() as usize;
            Ok((acc << self.bits_per_param) | k)
        })
    }

    /// Bit string of `code`, left-padded to the register width.
    pub fn format(&self, code: usize) -> String {
        format!("{code:0width$b}", width = self.total_bits())
    }
}

/// A base-model family with a discretized parameter register.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    family: ModelFamily,
    input_dim: usize,
    hidden: usize,
    code: ParameterCode,
}

impl EnsembleModel {
    pub fn new(family: ModelFamily, input_dim: usize, hidden: usize, bits_per_param: usize) -> Result<Self> {
        if input_dim < 1 || (family == ModelFamily::Mlp3 && hidden < 1) {
            return Err(Error::invalid(format!("invalid model shape d={input_dim}, h={hidden}")));
        }
        let code = ParameterCode::new(family.param_count(input_dim, hidden), bits_per_param)?;
        Ok(Self {
            family,
            input_dim,
            hidden,
            code,
        })
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn code(&self) -> &ParameterCode {
        &self.code
    }

    pub fn spec(&self, code: usize) -> Result<ModelSpec> {
        ModelSpec::new(self.family, self.input_dim, self.hidden, self.code.decode(code)?)
    }

    pub fn specs(&self) -> Vec<ModelSpec> {
        (0..self.code.num_codes())
            .map(|c| self.spec(c).expect("every code decodes to a valid model"))
            .collect()
    }

    /// `f(x; θ)` for every code, in code order.
    pub fn predictions(&self, x: &[f64]) -> Result<Vec<i8>> {
        (0..self.code.num_codes()).map(|c| self.spec(c)?.predict(x)).collect()
    }

    /// `a_θ` on `data` for every code, in code order.
    pub fn accuracy_table(&self, data: &Dataset) -> Result<Vec<f64>> {
        models::accuracies(&self.specs(), data)
    }
}

/// Oracle whose bit for code `θ` is `(1 + f(x; θ)) / 2`.
pub fn build_classifier_oracle(model: &EnsembleModel, x: &[f64]) -> Result<BooleanOracle> {
    let table = model.predictions(x)?.into_iter().map(|f| f == 1).collect();
    BooleanOracle::general(table)
}

/// Ensemble state over parameter and output qubits, with the classical
/// weights it realizes.
#[derive(Clone, Debug)]
pub struct WeightedEnsembleState {
    state: StateVector,
    weights: Vec<f64>,
    normalizer: f64,
    param_qubits: usize,
    predictions: Option<Vec<i8>>,
}

impl WeightedEnsembleState {
    /// Weighting routine: `Σ_θ √(w_θ/E) |θ⟩|0⟩` by direct amplitude assignment.
    pub fn prepare(weights: &[f64]) -> Result<Self> {
        let state = StateVector::amplitude_encode(weights, 1)?;
        Ok(Self {
            param_qubits: state.num_qubits() - 1,
            state,
            weights: weights.to_vec(),
            normalizer: weights.iter().sum(),
            predictions: None,
        })
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn param_qubits(&self) -> usize {
        self.param_qubits
    }

    pub fn output_qubit(&self) -> usize {
        self.param_qubits
    }

    /// Per-code predictions written by [`apply_a`], if it has run.
    pub fn predictions(&self) -> Option<&[i8]> {
        self.predictions.as_deref()
    }

    fn param_register(&self) -> Vec<usize> {
        (0..self.param_qubits).collect()
    }

    /// Measurement distribution of the parameter register.
    pub fn parameter_distribution(&self) -> Vec<f64> {
        self.state
            .register_distribution(&self.param_register())
            .expect("parameter register is valid")
    }
}

/// Writes the classifier output into the output qubit of every branch.
/// The output qubit must be `|0⟩` on every branch beforehand.
pub fn apply_a(ws: &mut WeightedEnsembleState, oracle: &BooleanOracle) -> Result<()> {
    if oracle.arity() != ws.param_qubits {
        return Err(Error::DimensionMismatch {
            expected: ws.param_qubits,
            actual: oracle.arity(),
        });
    }
    let occupied = ws.state.marginal_probability(ws.output_qubit(), true)?;
    if occupied > NORM_TOLERANCE {
        return Err(Error::Precondition(format!(
            "output qubit has probability {occupied} of |1⟩ before the classifier is applied"
        )));
    }
    let inputs = ws.param_register();
    ws.state.apply_boolean_oracle(oracle, &inputs, ws.output_qubit())?;
    ws.predictions = Some(oracle.table().iter().map(|&b| if b { 1 } else { -1 }).collect());
    Ok(())
}

/// Builds the accuracy-weighted ensemble from a precomputed accuracy table:
/// uniform superposition over codes, an accuracy ancilla rotated to
/// `√a_θ|0⟩ + √(1−a_θ)|1⟩` on each branch, postselection of the ancilla's
/// `|0⟩` branch, then the classifier oracle. The ancilla is dropped from
/// the returned state.
pub fn accuracy_weighted_state_from_table(accuracies: &[f64], oracle: &BooleanOracle) -> Result<WeightedEnsembleState> {
    let len = accuracies.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(Error::invalid(format!("accuracy table length {len} is not a power of two ≥ 2")));
    }
    if let Some(a) = accuracies.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::invalid(format!("accuracy {a} outside [0, 1]")));
    }
    let n = len.trailing_zeros() as usize;
    let (output, ancilla) = (n, n + 1);
    let params: Vec<usize> = (0..n).collect();

    let mut state = StateVector::new_basis_state(n + 2, 0)?;
    state.apply_hadamard_layer(&params)?;
    let angles: Vec<f64> = accuracies.iter().map(|a| 2.0 * (1.0 - a).sqrt().asin()).collect();
    state.apply_multiplexed_ry(&params, ancilla, &angles)?;
    state.postselect(ancilla, false)?;

    // the ancilla is now |0⟩ on every branch; the low half of each pair of
    // amplitudes is the (n + 1)-qubit state
    let reduced: Vec<_> = state.amplitudes().iter().step_by(2).copied().collect();
    let mut ws = WeightedEnsembleState {
        state: StateVector::from_amplitudes(reduced)?,
        weights: accuracies.to_vec(),
        normalizer: accuracies.iter().sum(),
        param_qubits: n,
        predictions: None,
    };
    debug_assert_eq!(ws.output_qubit(), output);
    apply_a(&mut ws, oracle)?;
    Ok(ws)
}

/// Accuracy-weighted ensemble for predicting `x_tilde`, with accuracies
/// tallied on `data`.
pub fn accuracy_weighted_state(model: &EnsembleModel, data: &Dataset, x_tilde: &[f64]) -> Result<WeightedEnsembleState> {
    let oracle = build_classifier_oracle(model, x_tilde)?;
    let table = model.accuracy_table(data)?;
    accuracy_weighted_state_from_table(&table, &oracle)
}

/// One member's contribution to an ensemble vote.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelVote {
    pub theta_id: usize,
    pub weight: f64,
    pub prediction: i8,
}

/// Label probabilities and the weighted-sign label.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub p_minus: f64,
    pub p_plus: f64,
    pub label: i8,
    pub per_model: Vec<ModelVote>,
}

/// `sgn(p_plus − p_minus)` with ties going to `+1`.
pub fn sign_rule(p_minus: f64, p_plus: f64) -> i8 {
    if p_plus - p_minus >= -TIE_TOLERANCE {
        1
    } else {
        -1
    }
}

/// Reads the label probabilities off the output qubit.
pub fn measure_prediction(ws: &WeightedEnsembleState) -> Result<EnsembleResult> {
    let p_minus = ws.state.marginal_probability(ws.output_qubit(), false)?;
    let p_plus = 1.0 - p_minus;
    let per_model = match &ws.predictions {
        Some(preds) => ws
            .weights
            .iter()
            .zip(preds)
            .enumerate()
            .map(|(theta_id, (&weight, &prediction))| ModelVote {
                theta_id,
                weight,
                prediction,
            })
            .collect(),
        None => Vec::new(),
    };
    Ok(EnsembleResult {
        p_minus,
        p_plus,
        label: sign_rule(p_minus, p_plus),
        per_model,
    })
}

/// Label probabilities by direct summation: `p(−1) = Σ_{f=−1} w / Σ w`.
pub fn exact_ensemble_probabilities(weights: &[f64], predictions: &[i8]) -> Result<(f64, f64)> {
    if weights.len() != predictions.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            actual: predictions.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("ensemble weights sum to zero"));
    }
    let minus: f64 = weights
        .iter()
        .zip(predictions)
        .filter(|(_, f)| **f == -1)
        .map(|(w, _)| w)
        .sum();
    let plus: f64 = weights
        .iter()
        .zip(predictions)
        .filter(|(_, f)| **f == 1)
        .map(|(w, _)| w)
        .sum();
    Ok((minus / total, plus / total))
}
