//! Classical base models, synthetic data and the accuracy functional.
//!
//! Labels are `±1` stored as `i8`. The threshold maps `0` to `+1`
//! everywhere in the crate.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{self, streams, Rng};

/// Default hidden width of [`ModelFamily::Mlp3`].
pub const DEFAULT_HIDDEN_WIDTH: usize = 32;

/// Sign threshold with `σ(0) = +1`.
#[inline]
pub fn threshold(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    /// `sign(x·θ)`.
    Linear,
    /// `σ(x·θ)`; the same map as `Linear`, kept separate because the two
    /// families are reported separately.
    Perceptron,
    /// Three hidden tanh layers of width `h`, no biases, sign of the scalar output.
    Mlp3,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 3] = [ModelFamily::Linear, ModelFamily::Perceptron, ModelFamily::Mlp3];

    pub fn name(&self) -> &'static str {
        match self {
            ModelFamily::Linear => "linear",
            ModelFamily::Perceptron => "perceptron",
            ModelFamily::Mlp3 => "mlp3",
        }
    }

    /// Number of parameters for input dimension `d` and hidden width `h`.
    pub fn param_count(&self, d: usize, h: usize) -> usize {
        match self {
            ModelFamily::Linear | ModelFamily::Perceptron => d,
            ModelFamily::Mlp3 => d * h + 2 * h * h + h,
        }
    }

    /// Whether `f(x; −θ) = −f(x; θ)` off the decision boundary.
    pub fn is_point_symmetric(&self) -> bool {
        !matches!(self, ModelFamily::Mlp3)
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelFamily::Linear),
            "perceptron" => Ok(ModelFamily::Perceptron),
            "mlp3" => Ok(ModelFamily::Mlp3),
            other => Err(Error::invalid(format!(
                "unknown model family {other:?} (expected linear, perceptron or mlp3)"
            ))),
        }
    }
}

/// A base model: family, flat parameters in `[−1, 1]^P`, and shape.
///
/// For `Mlp3` the flat layout is `W1 (h×d)`, `W2 (h×h)`, `W3 (h×h)`, `w4 (h)`,
/// each row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    family: ModelFamily,
    input_dim: usize,
    hidden: usize,
    theta: Vec<f64>,
}

impl ModelSpec {
    pub fn new(family: ModelFamily, input_dim: usize, hidden: usize, theta: Vec<f64>) -> Result<Self> {
        if input_dim < 1 {
            return Err(Error::invalid("input dimension must be at least 1"));
        }
        if family == ModelFamily::Mlp3 && hidden < 1 {
            return Err(Error::invalid("mlp3 hidden width must be at least 1"));
        }
        let expected = family.param_count(input_dim, hidden);
        if theta.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: theta.len(),
            });
        }
        if let Some(t) = theta.iter().find(|t| !(-1.0..=1.0).contains(*t)) {
            return Err(Error::invalid(format!("parameter {t} outside [-1, 1]")));
        }
        Ok(Self {
            family,
            input_dim,
            hidden,
            theta,
        })
    }

    /// Shorthand for linear and perceptron models, whose dimension is `θ.len()`.
    pub fn linear(family: ModelFamily, theta: Vec<f64>) -> Result<Self> {
        Self::new(family, theta.len(), 0, theta)
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn negated(&self) -> Self {
        Self {
            theta: self.theta.iter().map(|t| -t).collect(),
            ..self.clone()
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> i8 {
        match self.family {
            ModelFamily::Linear | ModelFamily::Perceptron => threshold(dot(x, &self.theta)),
            ModelFamily::Mlp3 => threshold(self.mlp_output(x)),
        }
    }

    fn mlp_output(&self, x: &[f64]) -> f64 {
        let (d, h) = (self.input_dim, self.hidden);
        let (w1, rest) = self.theta.split_at(h * d);
        let (w2, rest) = rest.split_at(h * h);
        let (w3, w4) = rest.split_at(h * h);
        let layer = |w: &[f64], input: &[f64]| -> Vec<f64> {
            w.chunks_exact(input.len()).map(|row| dot(row, input).tanh()).collect()
        };
        let h1 = layer(w1, x);
        let h2 = layer(w2, &h1);
        let h3 = layer(w3, &h2);
        dot(w4, &h3)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Labeling rule for synthetic data.
#[derive(Clone, Debug, PartialEq)]
pub enum GroundTruth {
    /// `+1` iff the first coordinate is positive, i.e. `θ* = (1, 0, …, 0)`.
    FirstCoordinate,
    /// `σ(x·θ*)` for an explicit `θ*`.
    Linear(Vec<f64>),
}

impl GroundTruth {
    /// A ground truth with entries drawn uniformly from `[−1, 1]`.
    pub fn sample_uniform(d: usize, seed: u64) -> Self {
        Self::sample_uniform_from(d, &mut rng::substream(seed, &[streams::GROUND_TRUTH]))
    }

    pub fn sample_uniform_from(d: usize, rng: &mut Rng) -> Self {
        GroundTruth::Linear((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
    }

    pub fn label(&self, x: &[f64]) -> i8 {
        match self {
            // strictly positive, so an exact zero is labeled −1
            GroundTruth::FirstCoordinate => {
                if x[0] > 0.0 {
                    1
                } else {
                    -1
                }
            }
            GroundTruth::Linear(theta) => threshold(dot(x, theta)),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        match self {
            GroundTruth::Linear(theta) if theta.len() != d => Err(Error::DimensionMismatch {
                expected: d,
                actual: theta.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// `M` unit-norm points in `d` dimensions with `±1` labels, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    dim: usize,
    points: Vec<f64>,
    labels: Vec<i8>,
}

impl Dataset {
    /// Normalizes each raw row and labels it with `truth`.
    pub fn from_raw_rows(rows: &[Vec<f64>], truth: &GroundTruth) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || dim == 0 {
            return Err(Error::invalid("dataset needs at least one non-empty row"));
        }
        truth.check_dim(dim)?;
        let mut points = Vec::with_capacity(rows.len() * dim);
        let mut labels = Vec::with_capacity(rows.len());
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            let start = points.len();
            points.extend_from_slice(row);
            normalize(&mut points[start..])?;
            labels.push(truth.label(&points[start..]));
        }
        Ok(Self { dim, points, labels })
    }

    /// Draws `size` i.i.d. standard normal rows from `rng`, normalizes them
    /// and labels them with `truth`.
    pub fn sample(size: usize, dim: usize, truth: &GroundTruth, rng: &mut Rng) -> Result<Self> {
        if size < 1 || dim < 1 {
            return Err(Error::invalid(format!("invalid dataset shape {size}×{dim}")));
        }
        truth.check_dim(dim)?;
        let mut points = Vec::with_capacity(size * dim);
        let mut labels = Vec::with_capacity(size);
        for _ in 0..size {
            let start = points.len();
            loop {
                points.extend((0..dim).map(|_| -> f64 { StandardNormal.sample(rng) }));
                if normalize(&mut points[start..]).is_ok() {
                    break;
                }
                points.truncate(start);
            }
            labels.push(truth.label(&points[start..]));
        }
        Ok(Self { dim, points, labels })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// Writes `x_0,…,x_{d−1},label` with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x_{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, label) in self.rows().zip(&self.labels) {
            let mut record: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            record.push(label.to_string());
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format written by [`Dataset::write_csv`]. Rows are taken as
    /// given (not renormalized) but must have unit norm within `1e-9`.
    pub fn read_csv<R: Read>(reader: R, source: &Path) -> Result<Self> {
        let csv_err = |source_err| Error::Csv {
            path: source.to_path_buf(),
            source: source_err,
        };
        let mut r = csv::Reader::from_reader(reader);
        let dim = r.headers().map_err(csv_err)?.len().saturating_sub(1);
        if dim == 0 {
            return Err(Error::invalid("dataset CSV needs at least one feature column"));
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for record in r.records() {
            let record = record.map_err(csv_err)?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad number {s:?} in {}: {e}", source.display())))
            };
            let start = points.len();
            for field in record.iter().take(dim) {
                points.push(parse(field)?);
            }
            let norm = dot(&points[start..], &points[start..]).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("row {} has norm {norm}", labels.len())));
            }
            labels.push(match record.get(dim).map(str::trim) {
                Some("1") | Some("+1") => 1,
                Some("-1") => -1,
                other => return Err(Error::invalid(format!("bad label {other:?}"))),
            });
        }
        if labels.is_empty() {
            return Err(Error::invalid("dataset CSV has no rows"));
        }
        Ok(Self { dim, points, labels })
    }
}

fn normalize(row: &mut [f64]) -> Result<()> {
    let norm = dot(row, row).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid("cannot normalize a zero row"));
    }
    row.iter_mut().for_each(|v| *v /= norm);
    Ok(())
}

/// `M × d` dataset labeled by the sign of the first coordinate, drawn from
/// the dataset substream of `seed`.
pub fn generate_dataset(size: usize, dim: usize, seed: u64) -> Result<Dataset> {
    let mut rng = rng::substream(seed, &[streams::DATASET]);
    Dataset::sample(size, dim, &GroundTruth::FirstCoordinate, &mut rng)
}

/// Accuracy of one model: `a_θ` with its id.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracyRecord {
    pub theta_id: usize,
    pub a_theta: f64,
}

/// Number of points `spec` classifies correctly.
pub fn correct_count(spec: &ModelSpec, data: &Dataset) -> Result<usize> {
    if data.is_empty() {
        return Err(Error::invalid("accuracy of an empty dataset"));
    }
    if spec.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim(),
            actual: data.dim(),
        });
    }
    Ok(data
        .rows()
        .zip(data.labels())
        .filter(|(x, y)| spec.predict_unchecked(x) == **y)
        .count())
}

/// Fraction of points `spec` classifies correctly; always a multiple of `1/M`.
pub fn accuracy(spec: &ModelSpec, data: &Dataset) -> Result<f64> {
    Ok(correct_count(spec, data)? as f64 / data.len() as f64)
}

/// Models scored together against every row, to reuse each row while it is in cache.
const MODEL_BLOCK: usize = 8;

/// Accuracies of many models on one dataset, in input order. Parallel over
/// blocks of models; results do not depend on the thread count.
pub fn accuracies(specs: &[ModelSpec], data: &Dataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::invalid("accuracy of an empty dataset"));
    }
    if let Some(s) = specs.iter().find(|s| s.input_dim() != data.dim()) {
        return Err(Error::DimensionMismatch {
            expected: s.input_dim(),
            actual: data.dim(),
        });
    }
    let m = data.len() as f64;
    let counts: Vec<usize> = specs
        .par_chunks(MODEL_BLOCK)
        .flat_map_iter(|block| {
            let mut counts = [0usize; MODEL_BLOCK];
            for (x, y) in data.rows().zip(data.labels()) {
                for (k, spec) in block.iter().enumerate() {
                    counts[k] += usize::from(spec.predict_unchecked(x) == *y);
                }
            }
            counts.into_iter().take(block.len()).collect::<Vec<_>>()
        })
        .collect();
    Ok(counts.into_iter().map(|c| c as f64 / m).collect())
}

/// Model with i.i.d. `U[−1, 1]` parameters drawn from `rng`.
pub fn sample_model_from(family: ModelFamily, d: usize, h: usize, rng: &mut Rng) -> Result<ModelSpec> {
    if d < 1 || (family == ModelFamily::Mlp3 && h < 1) {
        return Err(Error::invalid(format!("invalid model shape d={d}, h={h}")));
    }
    let theta = (0..family.param_count(d, h))
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    ModelSpec::new(family, d, h, theta)
}

/// Model drawn from the model substream of `seed`.
pub fn sample_model(family: ModelFamily, d: usize, h: usize, seed: u64) -> Result<ModelSpec> {
    sample_model_from(family, d, h, &mut rng::substream(seed, &[streams::MODELS]))
}
