//! Classical rejection sampling that reproduces the accuracy-weighted ensemble.
//!
//! A proposal draws a parameter id uniformly and a uniform `u′ ∈ [0, 1)`.
//! In [`SelectionMode::AccuracyWeighted`] it is kept iff `u′ < a_θ`, so the
//! accepted ids are distributed as `a_θ / Σ a`, the same as the parameter
//! register after postselecting the accuracy ancilla. In
//! [`SelectionMode::AboveHalf`] it is kept iff `a_θ > 0.5` and carries weight
//! `a_θ`.
//!
//! Proposal `i` always reads words `4i .. 4i + 4` of the proposal stream of
//! the seed, so results are identical for any chunking or thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::Dataset;
use crate::qensemble::{self, sign_rule, EnsembleModel, EnsembleResult, ModelVote};
use crate::rng::{self, streams};

/// Largest parameter register [`equivalence_audit`] will simulate.
pub const AUDIT_MAX_TOTAL_BITS: usize = 12;

const CHUNK: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMode {
    /// Accept iff `u′ < a_θ`; members carry weight 1.
    AccuracyWeighted,
    /// Accept iff `a_θ > 0.5`; members carry weight `a_θ`.
    AboveHalf,
}

impl fmt::Display for SelectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionMode::AccuracyWeighted => "accuracy_weighted",
            SelectionMode::AboveHalf => "above_half",
        })
    }
}

impl FromStr for SelectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy_weighted" | "accuracy-weighted" => Ok(SelectionMode::AccuracyWeighted),
            "above_half" | "above-half" => Ok(SelectionMode::AboveHalf),
            other => Err(Error::invalid(format!(
                "unknown mode {other:?} (expected accuracy_weighted or above_half)"
            ))),
        }
    }
}

/// Where proposed parameter ids come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Proposal {
    /// Uniform over `0..num_thetas`, with replacement.
    Uniform { num_thetas: usize },
    /// Proposal `i` is id `i mod num_thetas`: every id once per pass.
    Sweep { num_thetas: usize },
}

impl Proposal {
    fn num_thetas(&self) -> usize {
        match *self {
            Proposal::Uniform { num_thetas } | Proposal::Sweep { num_thetas } => num_thetas,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RejectionConfig {
    pub n_proposals: usize,
    pub mode: SelectionMode,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceptedMember {
    pub theta_id: usize,
    pub a_theta: f64,
    pub weight: f64,
}

/// Accepted proposals in proposal order; an id accepted twice appears twice.
#[derive(Clone, Debug, PartialEq)]
pub struct AcceptedEnsemble {
    pub members: Vec<AcceptedMember>,
    pub n_proposals: usize,
    pub acceptance_rate: f64,
}

impl AcceptedEnsemble {
    /// Accepted count per id divided by the number accepted.
    pub fn frequencies(&self, num_thetas: usize) -> Vec<f64> {
        let mut counts = vec![0usize; num_thetas];
        for m in &self.members {
            counts[m.theta_id] += 1;
        }
        let total = self.members.len() as f64;
        counts.into_iter().map(|c| c as f64 / total).collect()
    }

    /// `(accepted count, total weight)` per id.
    pub fn tally(&self, num_thetas: usize) -> Vec<(usize, f64)> {
        let mut out = vec![(0usize, 0.0); num_thetas];
        for m in &self.members {
            out[m.theta_id].0 += 1;
            out[m.theta_id].1 += m.weight;
        }
        out
    }
}

fn unit_interval(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn uniform_index(word: u64, n: usize) -> usize {
    ((u128::from(word) * n as u128) >> 64) as usize
}

/// Runs `cfg.n_proposals` proposals and keeps those passing the selection
/// rule. Returns [`Error::EmptyEnsemble`] when nothing is accepted.
pub fn rejection_sample<F>(accuracy_fn: F, proposal: Proposal, cfg: &RejectionConfig) -> Result<AcceptedEnsemble>
where
    F: Fn(usize) -> f64 + Sync,
{
    if cfg.n_proposals < 1 {
        return Err(Error::invalid("need at least one proposal"));
    }
    let num_thetas = proposal.num_thetas();
    if num_thetas < 1 {
        return Err(Error::invalid("proposal distribution has no support"));
    }
    let starts: Vec<usize> = (0..cfg.n_proposals).step_by(CHUNK).collect();
    let chunks: Vec<Vec<AcceptedMember>> = starts
        .into_par_iter()
        .map(|start| {
            let mut rng = rng::substream(cfg.seed, &[streams::PROPOSALS]);
            rng.set_word_pos(4 * start as u128);
            let end = (start + CHUNK).min(cfg.n_proposals);
            let mut kept = Vec::new();
            for i in start..end {
                let id_word = rng.next_u64();
                let u_word = rng.next_u64();
                let theta_id = match proposal {
                    Proposal::Uniform { .. } => uniform_index(id_word, num_thetas),
                    Proposal::Sweep { .. } => i % num_thetas,
                };
                let a_theta = accuracy_fn(theta_id);
                if !(0.0..=1.0).contains(&a_theta) {
                    return Err(Error::invalid(format!("accuracy {a_theta} of id {theta_id} outside [0, 1]")));
                }
                let member = match cfg.mode {
                    SelectionMode::AccuracyWeighted => (unit_interval(u_word) < a_theta).then_some(1.0),
                    SelectionMode::AboveHalf => (a_theta > 0.5).then_some(a_theta),
                };
                if let Some(weight) = member {
                    kept.push(AcceptedMember {
                        theta_id,
                        a_theta,
                        weight,
                    });
                }
            }
            Ok(kept)
        })
        .collect::<Result<_>>()?;
    let members: Vec<AcceptedMember> = chunks.into_iter().flatten().collect();
    if members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    Ok(AcceptedEnsemble {
        acceptance_rate: members.len() as f64 / cfg.n_proposals as f64,
        n_proposals: cfg.n_proposals,
        members,
    })
}

/// Expected acceptance rate of accuracy-weighted sampling under a uniform
/// proposal: the mean accuracy.
pub fn acceptance_probability(accuracies: &[f64]) -> Result<f64> {
    if accuracies.is_empty() {
        return Err(Error::invalid("no accuracies given"));
    }
    Ok(accuracies.iter().sum::<f64>() / accuracies.len() as f64)
}

/// Weighted vote of the accepted members; `predict` gives `f(x̃; θ)` per id.
pub fn classical_predict<F>(ens: &AcceptedEnsemble, predict: F) -> Result<EnsembleResult>
where
    F: Fn(usize) -> i8,
{
    if ens.members.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let mut per_id: BTreeMap<usize, f64> = BTreeMap::new();
    for m in &ens.members {
        *per_id.entry(m.theta_id).or_default() += m.weight;
    }
    let per_model: Vec<ModelVote> = per_id
        .into_iter()
        .map(|(theta_id, weight)| ModelVote {
            theta_id,
            weight,
            prediction: predict(theta_id),
        })
        .collect();
    let total: f64 = per_model.iter().map(|v| v.weight).sum();
    if !(total > 0.0) {
        return Err(Error::EmptyEnsemble);
    }
    let minus: f64 = per_model.iter().filter(|v| v.prediction == -1).map(|v| v.weight).sum();
    let p_minus = minus / total;
    let p_plus = 1.0 - p_minus;
    Ok(EnsembleResult {
        p_minus,
        p_plus,
        label: sign_rule(p_minus, p_plus),
        per_model,
    })
}

/// Half the ℓ1 distance between two distributions on the same support.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len(), "distributions must share a support");
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Quantum and classical runs of the accuracy-weighted ensemble on the
/// same inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditReport {
    pub accuracies: Vec<f64>,
    pub quantum_distribution: Vec<f64>,
    pub classical_distribution: Vec<f64>,
    pub quantum: EnsembleResult,
    pub classical: EnsembleResult,
    pub p_minus_gap: f64,
    pub tv_distance: f64,
    pub acceptance_rate: f64,
    pub mean_accuracy: f64,
}

pub fn equivalence_audit(
    model: &EnsembleModel,
    data: &Dataset,
    x_tilde: &[f64],
    n_proposals: usize,
    seed: u64,
) -> Result<AuditReport> {
    let bits = model.code().total_bits();
    if bits > AUDIT_MAX_TOTAL_BITS {
        return Err(Error::invalid(format!(
            "{bits} parameter bits exceeds the audit cap of {AUDIT_MAX_TOTAL_BITS}"
        )));
    }
    let accuracies = model.accuracy_table(data)?;
    let predictions = model.predictions(x_tilde)?;
    let oracle = qensemble::build_classifier_oracle(model, x_tilde)?;

    let ws = qensemble::accuracy_weighted_state_from_table(&accuracies, &oracle)?;
    let quantum = qensemble::measure_prediction(&ws)?;
    let quantum_distribution = ws.parameter_distribution();

    let num_thetas = accuracies.len();
    let ens = rejection_sample(
        |id| accuracies[id],
        Proposal::Uniform { num_thetas },
        &RejectionConfig {
            n_proposals,
            mode: SelectionMode::AccuracyWeighted,
            seed,
        },
    )?;
    let classical = classical_predict(&ens, |id| predictions[id])?;
    let classical_distribution = ens.frequencies(num_thetas);

    Ok(AuditReport {
        p_minus_gap: (quantum.p_minus - classical.p_minus).abs(),
        tv_distance: total_variation(&quantum_distribution, &classical_distribution),
        acceptance_rate: ens.acceptance_rate,
        mean_accuracy: acceptance_probability(&accuracies)?,
        accuracies,
        quantum_distribution,
        classical_distribution,
        quantum,
        classical,
    })
}
