//! The `qens` command line.
//!
//! Exit codes: 0 on success, 1 when arguments fail validation, 2 when the
//! computation itself fails (zero-probability postselection, empty
//! ensemble, I/O). Summaries go to standard output as `# `-prefixed lines;
//! CSV goes to `--output` when given and is written atomically.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dequantize::{self, Proposal, RejectionConfig, SelectionMode};
use crate::deutsch_jozsa::{self, BalancedSpec, BooleanOracle};
use crate::error::{Error, Result};
use crate::experiments::{self, format_float, GroundTruthChoice};
use crate::models::{self, Dataset, GroundTruth, ModelFamily, DEFAULT_HIDDEN_WIDTH};
use crate::qensemble::{self, EnsembleModel};
use crate::rng::{self, streams};

#[derive(Debug, Parser)]
#[command(name = "qens", version, about = "Quantum ensemble simulation and dequantization experiments")]
struct Cli {
    /// Master seed for every random draw.
    #[arg(long, env = "QENS_SEED", default_value_t = 0, global = true)]
    seed: u64,

    /// CSV destination.
    #[arg(long, short = 'o', global = true)]
    output: Option<PathBuf>,

    /// Worker thread cap; 1 runs serially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Deutsch-Jozsa and its uniform-weight ensemble embedding.
    Dj(DjArgs),
    /// Accuracy-weighted ensemble on the statevector simulator.
    Qensemble(PipelineArgs),
    /// Rejection-sampling ensemble.
    Dequantize(DequantizeArgs),
    /// Mean and spread of model accuracies per dimension.
    Concentration(ConcentrationArgs),
    /// Above-half ensemble of perceptrons in high dimension.
    Highd(HighdArgs),
    /// Monte Carlo moments of perceptron accuracy.
    #[command(name = "appendix-b")]
    AppendixB(AppendixBArgs),
    /// Statevector pipeline against rejection sampling on the same instance.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct DjArgs {
    /// Number of input qubits.
    #[arg(long)]
    n: usize,
    /// `constant:{0|1}`, `balanced:mask=<int>` or `balanced:subset=<i,j,...>`.
    #[arg(long)]
    oracle: String,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long, default_value = "perceptron")]
    family: String,
    /// Bits per parameter.
    #[arg(long, default_value_t = 2)]
    bits: usize,
    /// Input dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Training points.
    #[arg(long = "M", default_value_t = 32)]
    m: usize,
    /// Hidden width for mlp3.
    #[arg(long, default_value_t = 1)]
    hidden: usize,
    /// Query point as comma-separated coordinates; sampled when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct DequantizeArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 100_000)]
    proposals: usize,
    /// `accuracy_weighted` or `above_half`.
    #[arg(long, default_value = "accuracy_weighted")]
    mode: String,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value_t = 100_000)]
    proposals: usize,
}

#[derive(Debug, Args)]
struct ConcentrationArgs {
    #[arg(long, default_value = "perceptron")]
    family: String,
    #[arg(long = "d-list", value_delimiter = ',', default_value = "10,100,1000")]
    d_list: Vec<usize>,
    #[arg(long = "M", default_value_t = experiments::PAPER_M)]
    m: usize,
    /// Models sampled per dimension.
    #[arg(long, default_value_t = experiments::PAPER_N)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_HIDDEN_WIDTH)]
    hidden: usize,
}

#[derive(Debug, Args)]
struct HighdArgs {
    #[arg(long, default_value_t = 1000)]
    d: usize,
    #[arg(long = "M", default_value_t = 2000)]
    m: usize,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long = "M-test", default_value_t = 500)]
    m_test: usize,
}

#[derive(Debug, Args)]
struct AppendixBArgs {
    #[arg(long = "d-list", value_delimiter = ',', default_value = "10,100,1000,5000")]
    d_list: Vec<usize>,
    #[arg(long = "M", default_value_t = 2000)]
    m: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    /// `first` for θ* = (1, 0, …, 0) or `uniform` for a sampled θ*.
    #[arg(long = "ground-truth", default_value = "first")]
    ground_truth: String,
}

/// Parses the oracle mini-language.
pub fn parse_oracle(n: usize, text: &str) -> Result<BooleanOracle> {
    let bad = || Error::invalid(format!("cannot parse oracle {text:?}"));
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    match kind.trim() {
        "constant" => match rest.trim() {
            "0" => BooleanOracle::constant(n, false),
            "1" => BooleanOracle::constant(n, true),
            _ => Err(bad()),
        },
        "balanced" => {
            let (key, value) = rest.split_once('=').ok_or_else(bad)?;
            match key.trim() {
                "mask" => {
                    let mask = value.trim().parse::<u64>().map_err(|_| bad())?;
                    BooleanOracle::balanced(n, &BalancedSpec::Mask(mask))
                }
                "subset" => {
                    let ones = value
                        .split(',')
                        .map(|v| v.trim().parse::<usize>().map_err(|_| bad()))
                        .collect::<Result<Vec<_>>>()?;
                    BooleanOracle::balanced(n, &BalancedSpec::Subset(ones))
                }
                _ => Err(bad()),
            }
        }
        _ => Err(bad()),
    }
}

/// Probability for display: 12 decimals, trailing zeros dropped.
fn fmt_prob(p: f64) -> String {
    let p = if p.abs() < 5e-13 { 0.0 } else { p };
    let s = format!("{p:.12}");
    let trimmed = s.trim_end_matches('0');
    if trimmed.ends_with('.') {
        format!("{trimmed}0")
    } else {
        trimmed.to_string()
    }
}

struct Ctx<'a> {
    seed: u64,
    output: Option<&'a Path>,
    out: &'a mut (dyn Write + Send),
}

impl Ctx<'_> {
    fn say(&mut self, line: impl AsRef<str>) -> Result<()> {
        writeln!(self.out, "# {}", line.as_ref()).map_err(|source| Error::Io {
            path: PathBuf::from("<stdout>"),
            source,
        })
    }

    /// Writes `header` + `rows`, then `summary` as `# ` lines.
    fn write_csv(&self, header: &[&str], rows: &[Vec<String>], summary: &[String]) -> Result<()> {
        let Some(path) = self.output else {
            return Ok(());
        };
        experiments::write_atomically(path, |w| {
            {
                let mut cw = csv::Writer::from_writer(&mut *w);
                cw.write_record(header)?;
                for r in rows {
                    cw.write_record(r)?;
                }
                cw.flush()?;
            }
            for line in summary {
                writeln!(w, "# {line}")?;
            }
            Ok(())
        })
    }
}

struct Pipeline {
    model: EnsembleModel,
    data: Dataset,
    x: Vec<f64>,
}

fn build_pipeline(args: &PipelineArgs, seed: u64) -> Result<Pipeline> {
    let family: ModelFamily = args.family.parse()?;
    let model = EnsembleModel::new(family, args.d, args.hidden, args.bits)?;
    if args.m < 1 {
        return Err(Error::invalid("need at least one training point"));
    }
    let x = match &args.x {
        Some(x) if x.len() != args.d => {
            return Err(Error::DimensionMismatch {
                expected: args.d,
                actual: x.len(),
            })
        }
        Some(x) => x.clone(),
        None => {
            let mut rng = rng::substream(seed, &[streams::QUERY_POINT]);
            Dataset::sample(1, args.d, &GroundTruth::FirstCoordinate, &mut rng)?.row(0).to_vec()
        }
    };
    let data = models::generate_dataset(args.m, args.d, seed)?;
    Ok(Pipeline { model, data, x })
}

fn cmd_dj(ctx: &mut Ctx, args: &DjArgs) -> Result<()> {
    let g = parse_oracle(args.n, &args.oracle)?;
    let outcome = deutsch_jozsa::run_deutsch_jozsa(&g)?;
    let p_f0 = deutsch_jozsa::run_qensemble_dj(&g)?;
    let congruent = deutsch_jozsa::congruence_check(&g);
    let summary = vec![
        format!("p_all_zeros={} verdict={}", fmt_prob(outcome.p_all_zeros), outcome.verdict),
        format!("qensemble_p_f0={} congruent={congruent}", fmt_prob(p_f0)),
    ];
    for s in &summary {
        ctx.say(s)?;
    }
    ctx.write_csv(
        &["n", "oracle", "p_all_zeros", "verdict", "qensemble_p_f0", "congruent"],
        &[vec![
            args.n.to_string(),
            args.oracle.clone(),
            format_float(outcome.p_all_zeros),
            outcome.verdict.to_string(),
            format_float(p_f0),
            congruent.to_string(),
        ]],
        &summary,
    )
}

fn cmd_qensemble(ctx: &mut Ctx, args: &PipelineArgs) -> Result<()> {
    let p = build_pipeline(args, ctx.seed)?;
    let ws = qensemble::accuracy_weighted_state(&p.model, &p.data, &p.x)?;
    let result = qensemble::measure_prediction(&ws)?;
    let shares = ws.parameter_distribution();
    let code = p.model.code();
    let rows: Vec<Vec<String>> = result
        .per_model
        .iter()
        .map(|v| {
            vec![
                code.format(v.theta_id),
                format_float(v.weight),
                v.prediction.to_string(),
                format_float(shares[v.theta_id]),
            ]
        })
        .collect();
    let summary = vec![format!(
        "p_minus={} p_plus={} label={}",
        fmt_prob(result.p_minus),
        fmt_prob(result.p_plus),
        result.label
    )];
    ctx.say(&summary[0])?;
    ctx.write_csv(&["theta_code", "a_theta", "prediction", "weight_share"], &rows, &summary)
}

fn cmd_dequantize(ctx: &mut Ctx, args: &DequantizeArgs) -> Result<()> {
    let mode: SelectionMode = args.mode.parse()?;
    let p = build_pipeline(&args.pipeline, ctx.seed)?;
    if args.proposals < 1 {
        return Err(Error::invalid("need at least one proposal"));
    }
    let accuracies = p.model.accuracy_table(&p.data)?;
    let predictions = p.model.predictions(&p.x)?;
    let num_thetas = accuracies.len();
    let ens = dequantize::rejection_sample(
        |id| accuracies[id],
        Proposal::Uniform { num_thetas },
        &RejectionConfig {
            n_proposals: args.proposals,
            mode,
            seed: ctx.seed,
        },
    )?;
    let result = dequantize::classical_predict(&ens, |id| predictions[id])?;
    let rows: Vec<Vec<String>> = ens
        .tally(num_thetas)
        .iter()
        .enumerate()
        .map(|(id, (count, weight))| {
            vec![
                id.to_string(),
                format_float(accuracies[id]),
                count.to_string(),
                format_float(*weight),
            ]
        })
        .collect();
    let summary = vec![format!(
        "acceptance_rate={} p_minus={} p_plus={} label={}",
        fmt_prob(ens.acceptance_rate),
        fmt_prob(result.p_minus),
        fmt_prob(result.p_plus),
        result.label
    )];
    ctx.say(&summary[0])?;
    ctx.write_csv(&["theta_id", "a_theta", "accepted", "weight"], &rows, &summary)
}

fn cmd_compare(ctx: &mut Ctx, args: &CompareArgs) -> Result<()> {
    let p = build_pipeline(&args.pipeline, ctx.seed)?;
    let report = dequantize::equivalence_audit(&p.model, &p.data, &p.x, args.proposals, ctx.seed)?;
    let predictions = p.model.predictions(&p.x)?;
    let rows: Vec<Vec<String>> = (0..report.accuracies.len())
        .map(|id| {
            vec![
                p.model.code().format(id),
                format_float(report.accuracies[id]),
                predictions[id].to_string(),
                format_float(report.quantum_distribution[id]),
                format_float(report.classical_distribution[id]),
            ]
        })
        .collect();
    let summary = vec![
        format!(
            "p_minus_quantum={} p_minus_classical={} gap={}",
            fmt_prob(report.quantum.p_minus),
            fmt_prob(report.classical.p_minus),
            format_float(report.p_minus_gap)
        ),
        format!(
            "tv_distance={} acceptance_rate={} mean_accuracy={}",
            format_float(report.tv_distance),
            fmt_prob(report.acceptance_rate),
            fmt_prob(report.mean_accuracy)
        ),
    ];
    for s in &summary {
        ctx.say(s)?;
    }
    ctx.write_csv(
        &["theta_code", "a_theta", "prediction", "quantum_share", "classical_share"],
        &rows,
        &summary,
    )
}

fn cmd_concentration(ctx: &mut Ctx, args: &ConcentrationArgs) -> Result<()> {
    let family: ModelFamily = args.family.parse()?;
    let records = experiments::concentration_study(family, &args.d_list, args.m, args.n, args.hidden, ctx.seed)?;
    for r in &records {
        ctx.say(format!("d={} mean_A={:.6} std_A={:.6}", r.d, r.mean_a, r.std_a))?;
    }
    if records.len() >= 3 && records.iter().all(|r| r.std_a > 0.0) {
        let slope = experiments::fit_decay_slope(&records)?;
        let scale = experiments::fit_berry_esseen_scale(&records)?;
        ctx.say(format!("log_log_slope={slope:.6} berry_esseen_scale={scale:.6}"))?;
    }
    if let Some(path) = ctx.output {
        experiments::export_csv(&records, path)?;
    }
    Ok(())
}

fn cmd_highd(ctx: &mut Ctx, args: &HighdArgs) -> Result<()> {
    let r = experiments::highd_experiment(args.d, args.m, args.n, args.m_test, ctx.seed)?;
    ctx.say(format!(
        "accepted_count={} of n={} test_accuracy={}",
        r.accepted_count,
        r.n,
        fmt_prob(r.test_accuracy)
    ))?;
    if let Some(path) = ctx.output {
        experiments::export_csv(&[r], path)?;
    }
    Ok(())
}

fn cmd_appendix_b(ctx: &mut Ctx, args: &AppendixBArgs) -> Result<()> {
    let truth = match args.ground_truth.as_str() {
        "first" => GroundTruthChoice::FirstCoordinate,
        "uniform" => GroundTruthChoice::Uniform,
        other => {
            return Err(Error::invalid(format!(
                "unknown ground truth {other:?} (expected first or uniform)"
            )))
        }
    };
    let records = experiments::appendix_b_check(&args.d_list, args.m, args.trials, truth, ctx.seed)?;
    for r in &records {
        ctx.say(format!("d={} mean_a={:.6} var_a={:.3e}", r.d, r.mean_a, r.var_a))?;
    }
    if let Some(path) = ctx.output {
        experiments::export_csv(&records, path)?;
    }
    Ok(())
}

fn execute(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    if cli.threads == Some(0) {
        return Err(Error::invalid("--threads must be at least 1"));
    }
    let mut ctx = Ctx {
        seed: cli.seed,
        output: cli.output.as_deref(),
        out,
    };
    let body = |ctx: &mut Ctx| match &cli.command {
        Command::Dj(a) => cmd_dj(ctx, a),
        Command::Qensemble(a) => cmd_qensemble(ctx, a),
        Command::Dequantize(a) => cmd_dequantize(ctx, a),
        Command::Compare(a) => cmd_compare(ctx, a),
        Command::Concentration(a) => cmd_concentration(ctx, a),
        Command::Highd(a) => cmd_highd(ctx, a),
        Command::AppendixB(a) => cmd_appendix_b(ctx, a),
    };
    match cli.threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start {t} worker threads: {e}")))?;
            pool.install(|| body(&mut ctx))
        }
        None => body(&mut ctx),
    }
}

/// Runs the command line with summaries written to `out`; returns the exit code.
pub fn run_with_output<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_runtime() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(args, &mut std::io::stdout())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = run_with_output(std::iter::once("qens").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn oracle_language() {
        assert_eq!(parse_oracle(2, "constant:1").unwrap(), BooleanOracle::constant(2, true).unwrap());
        assert_eq!(
            parse_oracle(3, "balanced:mask=5").unwrap(),
            BooleanOracle::balanced(3, &BalancedSpec::Mask(5)).unwrap()
        );
        assert_eq!(
            parse_oracle(2, "balanced:subset=0,3").unwrap().table(),
            &[true, false, false, true]
        );
        for bad in ["constant:2", "balanced:mask=x", "balanced:foo=1", "general:1", "constant", "balanced:subset=0"] {
            assert!(parse_oracle(2, bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn dj_summaries() {
        let (code, out) = run_capture(&["dj", "--n", "3", "--oracle", "constant:0"]);
        assert_eq!(code, 0);
        assert!(out.contains("p_all_zeros=1.0 verdict=constant"), "{out}");
        let (code, out) = run_capture(&["dj", "--n", "3", "--oracle", "balanced:mask=5"]);
        assert_eq!(code, 0);
        assert!(out.contains("p_all_zeros=0.0 verdict=balanced"), "{out}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run_capture(&["dj", "--n", "3", "--oracle", "balanced:mask=0"]).0, 1);
        assert_eq!(run_capture(&["dj", "--bogus"]).0, 1);
        assert_eq!(run_capture(&["qensemble", "--family", "svm"]).0, 1);
        assert_eq!(run_capture(&["qensemble", "--bits", "11", "--d", "2"]).0, 1);
        assert_eq!(run_capture(&["--threads", "0", "dj", "--n", "1", "--oracle", "constant:0"]).0, 1);
        assert_eq!(run_capture(&["dequantize", "--proposals", "0"]).0, 1);
        assert_eq!(run_capture(&["qensemble", "--d", "2", "--x", "0.5"]).0, 1);
        assert_eq!(run_capture(&["--help"]).0, 0);
    }

    #[test]
    fn empty_ensemble_is_a_runtime_failure() {
        // d = 1, b = 1: one code has accuracy 1, the other 0; a single
        // above-half proposal is accepted or the ensemble is empty
        let codes: Vec<i32> = (0..64u64)
            .map(|s| {
                let seed = s.to_string();
                run_capture(&[
                    "--seed", &seed, "dequantize", "--d", "1", "--bits", "1", "--M", "1", "--x", "1.0",
                    "--proposals", "1", "--mode", "above_half",
                ])
                .0
            })
            .collect();
        assert!(codes.iter().all(|&c| c == 0 || c == 2));
        assert!(codes.contains(&0) && codes.contains(&2));
    }
}
