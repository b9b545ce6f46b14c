//! Accuracy-concentration experiments over data dimension.
//!
//! Random draws come from substreams of one seed: the dataset for the `k`-th
//! dimension uses `(DATASET, k)` and model `i` at that dimension uses
//! `(MODELS, k, i)`, so every record is reproducible on its own.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::dequantize::{self, Proposal, RejectionConfig, SelectionMode};
use crate::error::{Error, Result};
use crate::models::{self, Dataset, GroundTruth, ModelFamily, ModelSpec};
use crate::qensemble::sign_rule;
use crate::rng::{self, streams};

/// Training-set size used for the concentration figures.
pub const PAPER_M: usize = 10_000;
/// Models sampled per dimension for the concentration figures.
pub const PAPER_N: usize = 100;

/// Models generated and scored at a time, bounding memory at large `d`.
const MODEL_BATCH: usize = 256;

/// Neumaier-compensated sum.
fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Mean and sample variance (`n − 1` denominator).
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = if values.len() > 1 {
        compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0)
    } else {
        0.0
    };
    (mean, var)
}

fn model_at(family: ModelFamily, d: usize, hidden: usize, seed: u64, path: &[u64]) -> ModelSpec {
    let mut rng = rng::substream(seed, path);
    models::sample_model_from(family, d, hidden, &mut rng).expect("shape validated by caller")
}

/// Accuracies of `count` models whose substream paths are `prefix ++ [i]`.
fn sampled_accuracies(
    family: ModelFamily,
    hidden: usize,
    count: usize,
    data: &Dataset,
    seed: u64,
    prefix: &[u64],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    for start in (0..count).step_by(MODEL_BATCH) {
        let end = (start + MODEL_BATCH).min(count);
        let specs: Vec<ModelSpec> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut path = prefix.to_vec();
                path.push(i as u64);
                model_at(family, data.dim(), hidden, seed, &path)
            })
            .collect();
        out.extend(models::accuracies(&specs, data)?);
    }
    Ok(out)
}

fn check_dims(d_list: &[usize]) -> Result<()> {
    if d_list.is_empty() || d_list.contains(&0) {
        return Err(Error::invalid("dimension list must be non-empty with every d ≥ 1"));
    }
    Ok(())
}

/// Mean and spread of model accuracies at one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationRecord {
    pub family: ModelFamily,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub mean_a: f64,
    pub std_a: f64,
}

/// For each `d`: draw a fresh dataset of `m` points, sample `n` models of
/// `family`, and record the mean and sample standard deviation of their
/// accuracies.
pub fn concentration_study(
    family: ModelFamily,
    d_list: &[usize],
    m: usize,
    n: usize,
    hidden: usize,
    seed: u64,
) -> Result<Vec<ConcentrationRecord>> {
    check_dims(d_list)?;
    if m < 2 || n < 2 {
        return Err(Error::invalid(format!("need M ≥ 2 and n ≥ 2, got M={m}, n={n}")));
    }
    if family == ModelFamily::Mlp3 && hidden < 1 {
        return Err(Error::invalid("mlp3 needs a hidden width ≥ 1"));
    }
    d_list
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let mut rng = rng::substream(seed, &[streams::DATASET, k as u64]);
            let data = Dataset::sample(m, d, &GroundTruth::FirstCoordinate, &mut rng)?;
            let acc = sampled_accuracies(family, hidden, n, &data, seed, &[streams::MODELS, k as u64])?;
            let (mean_a, var) = mean_and_variance(&acc);
            Ok(ConcentrationRecord {
                family,
                d,
                m,
                n,
                mean_a,
                std_a: var.sqrt(),
            })
        })
        .collect()
}

/// The reference curve `c · d^(−1/2)`.
pub fn berry_esseen_reference(d_list: &[usize], c: f64) -> Result<Vec<(usize, f64)>> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid(format!("scale {c} must be positive")));
    }
    check_dims(d_list)?;
    Ok(d_list.iter().map(|&d| (d, c / (d as f64).sqrt())).collect())
}

/// Scale that puts the reference curve through the record with the smallest `d`.
pub fn fit_berry_esseen_scale(records: &[ConcentrationRecord]) -> Result<f64> {
    let first = records
        .iter()
        .min_by_key(|r| r.d)
        .ok_or_else(|| Error::invalid("no records"))?;
    if !(first.std_a > 0.0) {
        return Err(Error::invalid("smallest-d record has zero spread"));
    }
    Ok(first.std_a * (first.d as f64).sqrt())
}

/// Least-squares slope of `ln std_a` against `ln d`.
pub fn fit_decay_slope(records: &[ConcentrationRecord]) -> Result<f64> {
    if records.len() < 3 {
        return Err(Error::invalid("need at least 3 records to fit a slope"));
    }
    if let Some(r) = records.iter().find(|r| !(r.std_a > 0.0)) {
        return Err(Error::invalid(format!("record at d={} has zero spread", r.d)));
    }
    let xs: Vec<f64> = records.iter().map(|r| (r.d as f64).ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.std_a.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("all records share one dimension"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Outcome of the weak-ensemble experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct HighDResult {
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub m_test: usize,
    pub accepted_count: usize,
    pub test_accuracy: f64,
    pub seed: u64,
}

/// Samples `n` perceptrons, keeps those with training accuracy above 0.5,
/// weights them by accuracy, and scores the weighted vote on `m_test` fresh
/// points from the same labeling rule.
pub fn highd_experiment(d: usize, m: usize, n: usize, m_test: usize, seed: u64) -> Result<HighDResult> {
    if d < 1 || m < 1 || n < 1 || m_test < 1 {
        return Err(Error::invalid(format!(
            "all sizes must be ≥ 1, got d={d}, M={m}, n={n}, M_test={m_test}"
        )));
    }
    let family = ModelFamily::Perceptron;
    let truth = GroundTruth::FirstCoordinate;
    let train = Dataset::sample(m, d, &truth, &mut rng::substream(seed, &[streams::DATASET]))?;
    let acc = sampled_accuracies(family, 0, n, &train, seed, &[streams::MODELS])?;
    drop(train);

    let ens = dequantize::rejection_sample(
        |i| acc[i],
        Proposal::Sweep { num_thetas: n },
        &RejectionConfig {
            n_proposals: n,
            mode: SelectionMode::AboveHalf,
            seed,
        },
    )?;

    // weighted votes per test point, accumulated in model order
    let test = Dataset::sample(m_test, d, &truth, &mut rng::substream(seed, &[streams::TEST_SET]))?;
    let mut plus = vec![0.0f64; m_test];
    let mut minus = vec![0.0f64; m_test];
    for block in ens.members.chunks(MODEL_BATCH) {
        let specs: Vec<(ModelSpec, f64)> = block
            .par_iter()
            .map(|mem| (model_at(family, d, 0, seed, &[streams::MODELS, mem.theta_id as u64]), mem.weight))
            .collect();
        let votes: Vec<(f64, f64)> = test
            .rows()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|x| {
                specs.iter().fold((0.0, 0.0), |(p, q), (spec, w)| {
                    if spec.predict(x).expect("dimensions match") == 1 {
                        (p + w, q)
                    } else {
                        (p, q + w)
                    }
                })
            })
            .collect();
        for (t, (p, q)) in votes.into_iter().enumerate() {
            plus[t] += p;
            minus[t] += q;
        }
    }
    let correct = (0..m_test)
        .filter(|&t| {
            let total = plus[t] + minus[t];
            sign_rule(minus[t] / total, plus[t] / total) == test.labels()[t]
        })
        .count();
    Ok(HighDResult {
        d,
        m,
        n,
        m_test,
        accepted_count: ens.members.len(),
        test_accuracy: correct as f64 / m_test as f64,
        seed,
    })
}

/// How the ground truth is chosen for [`appendix_b_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundTruthChoice {
    /// `θ* = (1, 0, …, 0)`.
    FirstCoordinate,
    /// `θ*` drawn uniformly from `[−1, 1]^d`, afresh for each dimension.
    Uniform,
}

/// Monte Carlo moments of perceptron accuracy at one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct AppendixBRecord {
    pub d: usize,
    pub trials: usize,
    pub mean_a: f64,
    pub var_a: f64,
}

/// Estimates `E[a_θ]` and `Var[a_θ]` for uniformly sampled perceptrons at
/// each dimension, `trials` models per dimension.
pub fn appendix_b_check(
    d_list: &[usize],
    m: usize,
    trials: usize,
    truth: GroundTruthChoice,
    seed: u64,
) -> Result<Vec<AppendixBRecord>> {
    check_dims(d_list)?;
    if trials < 2 || m < 1 {
        return Err(Error::invalid(format!("need trials ≥ 2 and M ≥ 1, got trials={trials}, M={m}")));
    }
    d_list
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let gt = match truth {
                GroundTruthChoice::FirstCoordinate => GroundTruth::FirstCoordinate,
                GroundTruthChoice::Uniform => {
                    GroundTruth::sample_uniform_from(d, &mut rng::substream(seed, &[streams::GROUND_TRUTH, k as u64]))
                }
            };
            let mut rng = rng::substream(seed, &[streams::DATASET, k as u64]);
            let data = Dataset::sample(m, d, &gt, &mut rng)?;
            let acc = sampled_accuracies(ModelFamily::Perceptron, 0, trials, &data, seed, &[streams::MODELS, k as u64])?;
            let (mean_a, var_a) = mean_and_variance(&acc);
            Ok(AppendixBRecord {
                d,
                trials,
                mean_a,
                var_a,
            })
        })
        .collect()
}

/// A row type with a fixed CSV schema.
pub trait CsvRecord: Sized {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
    fn parse(fields: &csv::StringRecord) -> Result<Self>;
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).ok_or_else(|| Error::invalid(format!("missing column {i}")))?;
    raw.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse column {i} value {raw:?}")))
}

impl CsvRecord for ConcentrationRecord {
    const HEADER: &'static [&'static str] = &["family", "d", "M", "n", "mean_A", "std_A"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.family.to_string(),
            self.d.to_string(),
            self.m.to_string(),
            self.n.to_string(),
            format_float(self.mean_a),
            format_float(self.std_a),
        ]
    }

    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        Ok(Self {
            family: field(rec, 0)?,
            d: field(rec, 1)?,
            m: field(rec, 2)?,
            n: field(rec, 3)?,
            mean_a: field(rec, 4)?,
            std_a: field(rec, 5)?,
        })
    }
}

impl CsvRecord for HighDResult {
    const HEADER: &'static [&'static str] = &["d", "M", "n", "M_test", "accepted_count", "test_accuracy", "seed"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.m.to_string(),
            self.n.to_string(),
            self.m_test.to_string(),
            self.accepted_count.to_string(),
            format_float(self.test_accuracy),
            self.seed.to_string(),
        ]
    }

    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        Ok(Self {
            d: field(rec, 0)?,
            m: field(rec, 1)?,
            n: field(rec, 2)?,
            m_test: field(rec, 3)?,
            accepted_count: field(rec, 4)?,
            test_accuracy: field(rec, 5)?,
            seed: field(rec, 6)?,
        })
    }
}

impl CsvRecord for AppendixBRecord {
    const HEADER: &'static [&'static str] = &["d", "trials", "mean_a", "var_a"];

    fn fields(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.trials.to_string(),
            format_float(self.mean_a),
            format_float(self.var_a),
        ]
    }

    fn parse(rec: &csv::StringRecord) -> Result<Self> {
        Ok(Self {
            d: field(rec, 0)?,
            trials: field(rec, 1)?,
            mean_a: field(rec, 2)?,
            var_a: field(rec, 3)?,
        })
    }
}

/// Writes the header and one row per record.
pub fn write_records<R: CsvRecord, W: Write>(records: &[R], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(R::HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `path` through a temporary file in the same directory and renames
/// it into place, so the destination is either complete or untouched.
pub fn write_atomically<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        body(&mut buf).map_err(io_err)?;
        buf.flush().map_err(io_err)?;
    }
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Writes `records` as CSV to `path`, atomically.
pub fn export_csv<R: CsvRecord>(records: &[R], path: &Path) -> Result<()> {
    write_atomically(path, |w| write_records(records, w).map_err(std::io::Error::other))
}

/// Reads records written by [`export_csv`]; lines starting with `#` are skipped.
pub fn import_csv<R: CsvRecord>(path: &Path) -> Result<Vec<R>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.clone();
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(Error::invalid(format!(
            "{} has header {:?}, expected {:?}",
            path.display(),
            header,
            R::HEADER
        )));
    }
    reader
        .records()
        .map(|r| R::parse(&r.map_err(csv_err)?))
        .collect()
}
