//! End-to-end acceptance checks, one line of output per criterion.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng as _;

use qens::dequantize::equivalence_audit;
use qens::deutsch_jozsa::{
    congruence_check, run_deutsch_jozsa, run_qensemble_dj, BalancedSpec, BooleanOracle,
};
use qens::experiments::{
    appendix_b_check, concentration_study, fit_decay_slope, highd_experiment, GroundTruthChoice,
};
use qens::models::{generate_dataset, Dataset, GroundTruth, ModelFamily, DEFAULT_HIDDEN_WIDTH};
use qens::qensemble::{accuracy_weighted_state, exact_ensemble_probabilities, measure_prediction, EnsembleModel};
use qens::rng::{substream, Rng};
use qens::statevector::{SingleQubitGate, StateVector};

type Outcome = std::result::Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> std::result::Result<(), String> {
    check(elapsed < limit, format!("took {elapsed:.1?}, limit {limit:?}"))
}

/// Every half-size subset of `0..2^n`.
fn all_balanced_subsets(n: usize) -> Vec<Vec<usize>> {
    let size = 1usize << n;
    (0u64..(1u64 << size))
        .filter(|m| m.count_ones() as usize == size / 2)
        .map(|m| (0..size).filter(|x| m >> x & 1 == 1).collect())
        .collect()
}

/// Constant oracles, random balanced ones, and every balanced one for n ≤ 3.
fn dj_oracles() -> Vec<BooleanOracle> {
    let mut rng = substream(101, &[]);
    let mut out = Vec::new();
    for n in 1..=6 {
        out.push(BooleanOracle::constant(n, false).unwrap());
        out.push(BooleanOracle::constant(n, true).unwrap());
        let mut inputs: Vec<usize> = (0..1 << n).collect();
        for _ in 0..200 {
            inputs.shuffle(&mut rng);
            let ones = inputs[..1 << (n - 1)].to_vec();
            out.push(BooleanOracle::balanced(n, &BalancedSpec::Subset(ones)).unwrap());
        }
        if n <= 3 {
            for ones in all_balanced_subsets(n) {
                out.push(BooleanOracle::balanced(n, &BalancedSpec::Subset(ones)).unwrap());
            }
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let oracles = dj_oracles();
    let mut worst = 0.0f64;
    for g in &oracles {
        let ones = g.table().iter().filter(|&&b| b).count();
        let want = if ones == 0 || ones == g.table().len() { 1.0 } else { 0.0 };
        let got = run_deutsch_jozsa(g).map_err(|e| e.to_string())?.p_all_zeros;
        worst = worst.max((got - want).abs());
    }
    check(worst < 1e-12, format!("max |p_all_zeros − expected| = {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("{} oracles, max deviation {worst:.1e}", oracles.len()))
}

fn criterion_2() -> Outcome {
    let oracles = dj_oracles();
    let mut worst = 0.0f64;
    for g in &oracles {
        check(congruence_check(g), format!("congruence fails for {:?}", g.table()))?;
        let zeros = g.table().iter().filter(|&&b| !b).count() as f64 / g.table().len() as f64;
        let p = run_qensemble_dj(g).map_err(|e| e.to_string())?;
        worst = worst.max((p - zeros).abs());
    }
    check(worst < 1e-12, format!("max |p(f=0) − zero fraction| = {worst:e}"))?;
    Ok(format!("{} oracles congruent, max deviation {worst:.1e}", oracles.len()))
}

fn random_point(d: usize, rng: &mut Rng) -> Vec<f64> {
    Dataset::sample(1, d, &GroundTruth::FirstCoordinate, rng).unwrap().row(0).to_vec()
}

/// Brute-force p(−1): weighted share of codes voting −1.
fn brute_p_minus(model: &EnsembleModel, data: &Dataset, x: &[f64]) -> f64 {
    let (mut minus, mut total) = (0.0, 0.0);
    for spec in model.specs() {
        let correct = data
            .rows()
            .zip(data.labels())
            .filter(|(row, &y)| spec.predict(row).unwrap() == y)
            .count();
        let a = correct as f64 / data.len() as f64;
        total += a;
        if spec.predict(x).unwrap() == -1 {
            minus += a;
        }
    }
    minus / total
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = substream(303, &[]);
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let family = if i % 2 == 0 { ModelFamily::Perceptron } else { ModelFamily::Linear };
        let d = rng.random_range(1..=8usize);
        let bits = rng.random_range(1..=12 / d);
        let m = rng.random_range(1..=64usize);
        let model = EnsembleModel::new(family, d, 0, bits).map_err(|e| e.to_string())?;
        let data = generate_dataset(m, d, 1000 + i).map_err(|e| e.to_string())?;
        let x = random_point(d, &mut rng);
        let ws = accuracy_weighted_state(&model, &data, &x).map_err(|e| e.to_string())?;
        let quantum = measure_prediction(&ws).map_err(|e| e.to_string())?.p_minus;
        let accs = model.accuracy_table(&data).map_err(|e| e.to_string())?;
        let preds = model.predictions(&x).map_err(|e| e.to_string())?;
        let (exact, _) = exact_ensemble_probabilities(&accs, &preds).map_err(|e| e.to_string())?;
        let brute = brute_p_minus(&model, &data, &x);
        worst = worst.max((quantum - exact).abs()).max((quantum - brute).abs());
    }
    check(worst < 1e-10, format!("max |Δp_minus| = {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("50 instances, max |Δp_minus| {worst:.1e}"))
}

fn criterion_4() -> Outcome {
    let mut rng = substream(404, &[]);
    let (mut worst_tv, mut worst_gap) = (0.0f64, 0.0f64);
    let mut rate_ok = 0;
    let n_proposals = 1_000_000;
    for i in 0..20u64 {
        let family = if i % 2 == 0 { ModelFamily::Perceptron } else { ModelFamily::Linear };
        let d = rng.random_range(1..=3usize);
        let bits = rng.random_range(1..=6 / d);
        let m = rng.random_range(8..=64usize);
        let model = EnsembleModel::new(family, d, 0, bits).map_err(|e| e.to_string())?;
        let data = generate_dataset(m, d, 2000 + i).map_err(|e| e.to_string())?;
        let x = random_point(d, &mut rng);
        let r = equivalence_audit(&model, &data, &x, n_proposals, 3000 + i).map_err(|e| e.to_string())?;
        worst_tv = worst_tv.max(r.tv_distance);
        worst_gap = worst_gap.max(r.p_minus_gap);
        let p = r.mean_accuracy;
        let se = (p * (1.0 - p) / n_proposals as f64).sqrt();
        if (r.acceptance_rate - p).abs() <= 3.0 * se {
            rate_ok += 1;
        }
    }
    check(worst_tv < 0.01, format!("max TV {worst_tv}"))?;
    check(worst_gap < 0.01, format!("max p_minus gap {worst_gap}"))?;
    check(rate_ok >= 18, format!("acceptance rate within 3 SE in {rate_ok}/20"))?;
    Ok(format!(
        "max TV {worst_tv:.4}, max p_minus gap {worst_gap:.4}, rate within 3 SE in {rate_ok}/20"
    ))
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let ds = [10, 100, 1000];
    let n = 100;
    let mut notes = Vec::new();
    for (family, m) in [
        (ModelFamily::Linear, 10_000),
        (ModelFamily::Perceptron, 10_000),
        (ModelFamily::Mlp3, 2_000),
    ] {
        let recs = concentration_study(family, &ds, m, n, DEFAULT_HIDDEN_WIDTH, 505).map_err(|e| e.to_string())?;
        for r in &recs {
            let band = 5.0 * r.std_a / (n as f64).sqrt();
            check(
                (r.mean_a - 0.5).abs() <= band,
                format!("{family} d={}: mean {} outside 0.5 ± {band}", r.d, r.mean_a),
            )?;
        }
        check(
            recs[2].std_a < recs[0].std_a,
            format!("{family}: std(1000) {} ≥ std(10) {}", recs[2].std_a, recs[0].std_a),
        )?;
        notes.push(format!("{family} std {:.4}→{:.4}", recs[0].std_a, recs[2].std_a));
    }
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(notes.join(", "))
}

fn criterion_6() -> Outcome {
    let recs = concentration_study(
        ModelFamily::Perceptron,
        &[10, 30, 100, 300, 1000, 2000],
        10_000,
        100,
        0,
        606,
    )
    .map_err(|e| e.to_string())?;
    let slope = fit_decay_slope(&recs).map_err(|e| e.to_string())?;
    check((-1.5..=-0.25).contains(&slope), format!("slope {slope}"))?;
    Ok(format!("log-log slope {slope:.3}"))
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let r = highd_experiment(1000, 2000, 2000, 500, 707).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let frac = r.accepted_count as f64 / r.n as f64;
    let detail = format!("test accuracy {}, accepted fraction {frac:.3}, {elapsed:.1?}", r.test_accuracy);
    within(elapsed, Duration::from_secs(300))?;
    check((0.4..=0.6).contains(&frac), detail.clone())?;
    check((0.45..=0.55).contains(&r.test_accuracy), detail.clone())?;
    Ok(detail)
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    for (truth, name) in [
        (GroundTruthChoice::FirstCoordinate, "first"),
        (GroundTruthChoice::Uniform, "uniform"),
    ] {
        let trials = 200;
        let recs = appendix_b_check(&[10, 100, 1000, 5000], 2000, trials, truth, 808).map_err(|e| e.to_string())?;
        for r in &recs {
            let band = 3.0 * (r.var_a / trials as f64).sqrt();
            check(
                (r.mean_a - 0.5).abs() < band,
                format!("{name} d={}: mean {} outside 0.5 ± {band}", r.d, r.mean_a),
            )?;
        }
        check(
            recs[0].var_a > recs[1].var_a && recs[1].var_a > recs[2].var_a,
            format!(
                "{name}: var not decreasing {} {} {}",
                recs[0].var_a, recs[1].var_a, recs[2].var_a
            ),
        )?;
        notes.push(format!("{name} var {:.2e}→{:.2e}", recs[0].var_a, recs[2].var_a));
    }
    Ok(notes.join(", "))
}

fn random_state(n: usize, rng: &mut Rng) -> StateVector {
    let raw: Vec<Complex64> = (0..1 << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(raw.into_iter().map(|c| c / norm).collect()).unwrap()
}

/// `e^{iα} Rz(β) Ry(γ) Rz(δ)` built by hand.
fn random_unitary(rng: &mut Rng) -> [[Complex64; 2]; 2] {
    let mut angle = || rng.random_range(0.0..std::f64::consts::TAU);
    let (a, b, g, d) = (angle(), angle(), angle(), angle());
    let e = |t: f64| Complex64::from_polar(1.0, t);
    let (c, s) = ((g / 2.0).cos(), (g / 2.0).sin());
    [
        [e(a - b / 2.0 - d / 2.0) * c, -e(a - b / 2.0 + d / 2.0) * s],
        [e(a + b / 2.0 - d / 2.0) * s, e(a + b / 2.0 + d / 2.0) * c],
    ]
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut rng = substream(909, &[]);
    let cases = 1000;

    for _ in 0..cases {
        let n = rng.random_range(1..=6usize);
        let mut s = random_state(n, &mut rng);
        let gate = SingleQubitGate::new(random_unitary(&mut rng)).map_err(|e| e.to_string())?;
        s.apply_gate(&gate, rng.random_range(0..n)).map_err(|e| e.to_string())?;
        if n >= 2 {
            let controls: Vec<usize> = (1..n).collect();
            let angles: Vec<f64> = (0..1 << (n - 1)).map(|_| rng.random_range(-4.0..4.0)).collect();
            s.apply_multiplexed_ry(&controls, 0, &angles).map_err(|e| e.to_string())?;
        }
        check((s.norm_sqr() - 1.0).abs() < 1e-10, format!("norm drift {}", s.norm_sqr() - 1.0))?;
    }

    for _ in 0..cases {
        let u = random_unitary(&mut rng);
        let gate = SingleQubitGate::new(u).map_err(|e| e.to_string())?;
        let mut defect = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                let dot: Complex64 = (0..2).map(|k| u[k][i].conj() * u[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((dot - want).norm());
            }
        }
        check(defect < 1e-12 && gate.unitarity_defect() < 1e-12, format!("unitarity defect {defect}"))?;
    }

    for _ in 0..cases {
        let n = rng.random_range(2..=6usize);
        let arity = n - 1;
        let table: Vec<bool> = (0..1 << arity).map(|_| rng.random_bool(0.5)).collect();
        let g = BooleanOracle::general(table).map_err(|e| e.to_string())?;
        let mut qubits: Vec<usize> = (0..n).collect();
        qubits.shuffle(&mut rng);
        let (target, inputs) = qubits.split_last().unwrap();
        let before = random_state(n, &mut rng);
        let mut s = before.clone();
        s.apply_boolean_oracle(&g, inputs, *target).map_err(|e| e.to_string())?;
        s.apply_boolean_oracle(&g, inputs, *target).map_err(|e| e.to_string())?;
        let dev = s.max_deviation(&before);
        check(dev < 1e-12, format!("oracle involution deviation {dev}"))?;
    }

    for _ in 0..cases {
        let n = rng.random_range(1..=6usize);
        let before = random_state(n, &mut rng);
        let q = rng.random_range(0..n);
        let outcome = rng.random_bool(0.5);
        let p = before.marginal_probability(q, outcome).map_err(|e| e.to_string())?;
        let mut s = before.clone();
        s.postselect(q, outcome).map_err(|e| e.to_string())?;
        check((s.norm_sqr() - 1.0).abs() < 1e-10, "postselected norm")?;
        let bit = 1usize << (n - 1 - q);
        for (i, (a, b)) in s.amplitudes().iter().zip(before.amplitudes()).enumerate() {
            let want = if (i & bit != 0) == outcome { *b / p.sqrt() } else { Complex64::new(0.0, 0.0) };
            check((a - want).norm() < 1e-12, format!("postselected amplitude {i}"))?;
        }
    }

    for _ in 0..cases {
        let k = rng.random_range(1..=5usize);
        let extra = rng.random_range(0..=2usize);
        let w: Vec<f64> = (0..1 << k).map(|_| rng.random_range(0.0..1.0)).collect();
        let total: f64 = w.iter().sum();
        let s = StateVector::amplitude_encode(&w, extra).map_err(|e| e.to_string())?;
        let reg: Vec<usize> = (0..k).collect();
        let dist = s.register_distribution(&reg).map_err(|e| e.to_string())?;
        let dev = dist.iter().zip(&w).map(|(p, wi)| (p - wi / total).abs()).fold(0.0, f64::max);
        check(dev < 1e-12, format!("amplitude_encode readout deviation {dev}"))?;
    }

    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("5 properties × {cases} cases"))
}

fn run_cli(args: &[&str], out: &Path) -> std::result::Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_qens"))
        .args(["--seed", "42", "--output"])
        .arg(out)
        .args(args)
        .env_remove("QENS_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    check(status.status.success(), format!("{args:?} failed: {}", String::from_utf8_lossy(&status.stderr)))?;
    std::fs::read(out).map_err(|e| e.to_string())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: [&[&str]; 7] = [
        &["dj", "--n", "4", "--oracle", "balanced:mask=6"],
        &["qensemble", "--family", "perceptron", "--bits", "3", "--d", "2", "--M", "32"],
        &["dequantize", "--family", "linear", "--bits", "2", "--d", "3", "--M", "40", "--proposals", "20000"],
        &["concentration", "--family", "perceptron", "--d-list", "10,100", "--M", "500", "--n", "20"],
        &["highd", "--d", "50", "--M", "200", "--n", "100", "--M-test", "50"],
        &["appendix-b", "--d-list", "10,100", "--M", "200", "--trials", "20", "--ground-truth", "uniform"],
        &["compare", "--family", "perceptron", "--bits", "4", "--d", "2", "--M", "32", "--proposals", "100000"],
    ];
    for args in commands {
        let first = run_cli(args, &dir.path().join("a.csv"))?;
        let second = run_cli(args, &dir.path().join("b.csv"))?;
        check(!first.is_empty(), format!("{}: empty CSV", args[0]))?;
        check(first == second, format!("{}: CSV differs between runs", args[0]))?;
    }
    Ok(format!("{} subcommands byte-identical", commands.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("Deutsch-Jozsa exactness", criterion_1),
        ("embedding congruence", criterion_2),
        ("quantum/analytic ensemble equivalence", criterion_3),
        ("dequantization equivalence", criterion_4),
        ("concentration", criterion_5),
        ("decay rate", criterion_6),
        ("desk-scale high-d experiment", criterion_7),
        ("accuracy moments", criterion_8),
        ("simulator properties", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
