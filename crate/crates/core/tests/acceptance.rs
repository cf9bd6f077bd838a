//! Acceptance suite. Prints one `[PASS]`/`[FAIL]`/`[SKIP]` line per criterion
//! and exits non-zero if any criterion fails.
//!
//! Real datasets are looked up under `$CCRAL_DATA_DIR` (default: `data/` at the
//! workspace root). A missing german file is reported as `[SKIP]` unless
//! `CCRAL_REQUIRE_DATA=1`, in which case it fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ccral_core::classifier::{loss_and_gradient, LinearModel, LossKind, TrainConfig};
use ccral_core::counterfactual::{build_counterfactual_set, flip_treatment, match_label};
use ccral_core::experiment::{run_experiment, run_experiment_on, write_report, ExperimentConfig, ExperimentReport, Method};
use ccral_core::metrics::roc_auc;
use ccral_core::tabular::{
    generate_synthetic, load_csv, split, synthetic_schema, Dataset, Encoder, FeatureSchema, SplitSpec,
};
use ccral_core::trainer::{make_margin_grid, run_ccral, run_counterfactual_all, run_standard, uncertain_indices, MarginGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

enum Status {
    Pass(String),
    Fail(String),
    Skip(String),
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

// Observed on the first verified run of criterion 2; a change means the
// numerics moved and should be looked at.
const SYNTH_STANDARD_MEAN: f64 = 0.746;
const SYNTH_CCRAL_MEAN: f64 = 0.748;

const MASTER_SEED: u64 = 1;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data_dir() -> PathBuf {
    std::env::var_os("CCRAL_DATA_DIR").map(PathBuf::from).unwrap_or_else(|| workspace_root().join("data"))
}

fn schema_path(name: &str) -> PathBuf {
    workspace_root().join("schemas").join(format!("{name}.schema.json"))
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- oracles

/// Exhaustive nearest-neighbour scan: full Euclidean distance over every
/// coordinate, candidates restricted to real rows with the same treatment.
fn nearest_oracle(cf: &[f64], ds: &Dataset) -> Option<(u8, usize, f64)> {
    let c = ds.treatment_coord();
    let want = if cf[c] == 1.0 { 1 } else { 0 };
    let mut best: Option<(usize, f64)> = None;
    for i in 0..ds.n_rows() {
        if ds.treatments()[i] != want {
            continue;
        }
        let sq: f64 = cf.iter().zip(ds.row(i)).map(|(a, b)| (a - b) * (a - b)).sum();
        match best {
            Some((_, b)) if b <= sq => {}
            _ => best = Some((i, sq)),
        }
    }
    best.map(|(i, sq)| (ds.labels()[i], i, sq.sqrt()))
}

fn pair_count_auc(y: &[u8], s: &[f64]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1.0;
            if s[i] > s[j] {
                wins += 1.0;
            } else if s[i] == s[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn central_difference(model: &LinearModel, ds: &Dataset, lambda: f64, h: f64) -> Vec<f64> {
    let loss = |m: &LinearModel| loss_and_gradient(m, ds, lambda).unwrap().0;
    let d = model.weights.len();
    (0..=d)
        .map(|k| {
            let (mut up, mut down) = (model.clone(), model.clone());
            if k < d {
                up.weights[k] += h;
                down.weights[k] -= h;
            } else {
                up.bias += h;
                down.bias -= h;
            }
            (loss(&up) - loss(&down)) / (2.0 * h)
        })
        .collect()
}

// ---------------------------------------------------------------- helpers

fn random_dataset(r: &mut ChaCha8Rng, n: usize, d: usize, coord: usize, lattice: bool) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..d)
                .map(|k| {
                    if k == coord {
                        f64::from(r.random_range(0..=1u8))
                    } else if lattice {
                        f64::from(r.random_range(-2..=2i32))
                    } else {
                        r.random_range(-3.0..3.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut y: Vec<u8> = (0..n).map(|_| r.random_range(0..=1u8)).collect();
    y[0] = 0;
    y[n - 1] = 1;
    Dataset::from_rows(&rows, y, coord).unwrap()
}

fn synthetic_parts(n: usize, d: usize, seed: u64) -> (Dataset, Dataset, Dataset) {
    let raw = generate_synthetic(n, d, 2.0, 0.1, seed).unwrap();
    let ds = Encoder::fit(&raw, &synthetic_schema(d)).unwrap().transform(&raw).unwrap();
    split(&ds, &SplitSpec { seed, ..SplitSpec::default() }).unwrap()
}

/// Correct test predictions summed over repeats; compares methods without
/// rounding noise in the mean.
fn correct_total(report: &ExperimentReport, method: Method) -> Result<u64, String> {
    let m = report.method(method).ok_or_else(|| format!("{method} missing from report"))?;
    Ok(m.runs.iter().map(|r| (r.test_accuracy * r.n_test as f64).round() as u64).sum())
}

fn means(report: &ExperimentReport) -> Result<(f64, f64), String> {
    ensure!(report.failures.is_empty(), "failed repeats: {:?}", report.failures);
    let std = report.method(Method::Standard).ok_or("standard missing")?.accuracy.mean;
    let ccral = report.method(Method::Ccral).ok_or("ccral missing")?.accuracy.mean;
    Ok((std, ccral))
}

fn dataset_config(name: &str, data: PathBuf) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(data, schema_path(name));
    cfg.methods = vec![Method::Standard, Method::Ccral];
    cfg.repeats = 5;
    cfg.k = 10;
    cfg.master_seed = MASTER_SEED;
    cfg
}

// ---------------------------------------------------------------- criterion 1

fn uncertain_region_invariants() -> Outcome {
    let mut r = rng(11);
    for case in 0..1000 {
        let n = r.random_range(1..=80);
        let scores: Vec<f64> = (0..n)
            .map(|_| match r.random_range(0..10) {
                0 => 0.0,
                1 => 1.0,
                2 => 0.5,
                _ => r.random_range(0.0..=1.0),
            })
            .collect();
        let mut alphas: Vec<f64> = (0..4).map(|_| r.random_range(0.0..=0.5)).collect();
        alphas.push(0.0);
        alphas.push(0.5);
        alphas.sort_by(f64::total_cmp);
        let sets: Vec<Vec<usize>> = alphas.iter().map(|&a| uncertain_indices(&scores, a).unwrap()).collect();
        for w in sets.windows(2) {
            ensure!(w[0].iter().all(|i| w[1].contains(i)), "case {case}: region shrank as alpha grew");
        }
        ensure!(sets.last().unwrap().len() == n, "case {case}: alpha 0.5 missed some rows");
    }
    Ok("1000 score lists".into())
}

fn flip_invariants() -> Outcome {
    let mut r = rng(12);
    for case in 0..1000 {
        let d = r.random_range(1..=30);
        let c = r.random_range(0..d);
        let mut x: Vec<f64> = (0..d).map(|_| r.random_range(-10.0..10.0)).collect();
        x[c] = f64::from(r.random_range(0..=1u8));
        let f = flip_treatment(&x, c).unwrap();
        ensure!(flip_treatment(&f, c).unwrap() == x, "case {case}: flip is not an involution");
        let differing: Vec<usize> = (0..d).filter(|&k| x[k].to_bits() != f[k].to_bits()).collect();
        ensure!(differing == vec![c], "case {case}: coordinates {differing:?} changed");
        ensure!(f[c] == 1.0 - x[c], "case {case}: treatment not complemented");
    }
    Ok("1000 vectors".into())
}

fn matching_equals_scan() -> Outcome {
    let mut r = rng(13);
    let mut queries = 0;
    for case in 0..50 {
        let n = r.random_range(2..=200);
        let d = r.random_range(2..=8);
        let c = r.random_range(0..d);
        let ds = random_dataset(&mut r, n, d, c, case % 2 == 0);
        for i in 0..n {
            let cf = flip_treatment(ds.row(i), c).unwrap();
            let got = match_label(&cf, &ds).ok().map(|m| (m.label, m.index, m.distance));
            ensure!(got == nearest_oracle(&cf, &ds), "dataset {case} row {i}: {got:?} vs scan");
            queries += 1;
        }
        if let Ok(set) = build_counterfactual_set(&ds) {
            for e in &set.entries {
                let want = nearest_oracle(&e.cf_x, &ds).unwrap();
                ensure!(
                    (e.cf_label, e.matched_index, e.match_distance) == want,
                    "dataset {case}: blocked set disagrees at source {}",
                    e.source_index
                );
            }
        }
    }
    Ok(format!("50 datasets, {queries} queries, exact"))
}

fn gradient_check() -> Outcome {
    let mut r = rng(14);
    let mut worst: f64 = 0.0;
    for kind in [LossKind::Logistic, LossKind::Hinge] {
        let mut done = 0;
        while done < 20 {
            let n = r.random_range(5..=40);
            let d = r.random_range(1..=6);
            let ds = random_dataset(&mut r, n, d + 1, d, false);
            let mut model = LinearModel::zeros(kind, d + 1);
            for w in model.weights.iter_mut() {
                *w = r.random_range(-1.0..1.0);
            }
            model.bias = r.random_range(-0.5..0.5);
            let lambda = r.random_range(0.0..0.1);
            let h = 1e-6;
            if kind == LossKind::Hinge {
                // finite differences are meaningless across the kink
                let near_kink = ds.rows().zip(ds.labels()).any(|(x, &y)| {
                    let z = model.decision(x).unwrap();
                    let s = if y == 1 { 1.0 } else { -1.0 };
                    (s * z - 1.0).abs() < 1e-3
                });
                if near_kink {
                    continue;
                }
            }
            let analytic = loss_and_gradient(&model, &ds, lambda).unwrap().1;
            let numeric = central_difference(&model, &ds, lambda, h);
            let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
            let rel = diff / scale;
            ensure!(rel < 1e-5, "{kind:?} instance {done}: relative error {rel:e}");
            worst = worst.max(rel);
            done += 1;
        }
    }
    Ok(format!("20 instances per loss, worst relative error {worst:.2e}"))
}

fn auc_checks() -> Outcome {
    let mut r = rng(15);
    for case in 0..100 {
        let n = r.random_range(2..=120);
        let mut y: Vec<u8> = (0..n).map(|_| r.random_range(0..=1u8)).collect();
        y[0] = 0;
        y[n - 1] = 1;
        // scores on a dyadic lattice so ties occur and the transforms below
        // are exact and strictly increasing
        let s: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..=64u32)) / 64.0).collect();
        let auc = roc_auc(&y, &s).unwrap();
        let oracle = pair_count_auc(&y, &s);
        ensure!((auc - oracle).abs() <= 1e-12, "case {case}: {auc} vs pair count {oracle}");
        for (name, f) in [
            ("affine", (|v: f64| 2.0 * v + 3.0) as fn(f64) -> f64),
            ("cubic", |v: f64| v * v * v + v),
            ("exp", f64::exp),
        ] {
            let t: Vec<f64> = s.iter().map(|&v| f(v)).collect();
            let moved = roc_auc(&y, &t).unwrap();
            ensure!(moved.to_bits() == auc.to_bits(), "case {case}: {name} transform moved AUC {auc} -> {moved}");
        }
    }
    Ok("100 inputs, rank = pairs within 1e-12, transforms exact".into())
}

fn baseline_equivalences() -> Outcome {
    let mut checked = 0;
    for (seed, kind) in [(21, LossKind::Logistic), (22, LossKind::Hinge), (23, LossKind::Logistic)] {
        let (train, val, _) = synthetic_parts(600, 4, seed);
        let cfg = TrainConfig { loss_kind: kind, ..TrainConfig::default() };
        let (m, _) = run_ccral(&train, &val, &cfg, &MarginGrid::new(vec![0.5]).unwrap()).map_err(|e| e.to_string())?;
        ensure!(m == run_counterfactual_all(&train, &cfg).unwrap(), "seed {seed}: grid [0.5] differs from counterfactual baseline");
        let (m, trace) = run_ccral(&train, &val, &cfg, &MarginGrid::new(vec![0.0]).unwrap()).map_err(|e| e.to_string())?;
        ensure!(trace.points[0].n_uncertain == 0, "seed {seed}: alpha 0 selected rows; pick another seed");
        ensure!(m == run_standard(&train, &cfg).unwrap(), "seed {seed}: grid [0] differs from standard baseline");
        checked += 1;
    }
    Ok(format!("{checked} datasets, bitwise"))
}

fn grid_dominance() -> Outcome {
    let grid = make_margin_grid(10).unwrap();
    for seed in 31..36 {
        let (train, val, _) = synthetic_parts(600, 4, seed);
        let (_, trace) = run_ccral(&train, &val, &TrainConfig::default(), &grid).map_err(|e| e.to_string())?;
        let best = trace.points.iter().map(|p| p.val_accuracy).fold(f64::NEG_INFINITY, f64::max);
        ensure!(trace.selected().val_accuracy == best, "seed {seed}: selected point is not the maximum");
        ensure!(trace.selected().val_accuracy >= trace.points[0].val_accuracy, "seed {seed}: below alpha 0");
    }
    Ok("5 datasets, K=10".into())
}

// ---------------------------------------------------------------- criterion 2

fn synthetic_experiment() -> Outcome {
    let raw = generate_synthetic(2000, 5, 2.0, 0.1, MASTER_SEED).map_err(|e| e.to_string())?;
    let schema = synthetic_schema(5);
    let mut cfg = ExperimentConfig::new("synthetic.csv", "synthetic.schema.json");
    cfg.repeats = 5;
    cfg.k = 10;
    cfg.master_seed = MASTER_SEED;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let report = pool.install(|| run_experiment_on(&raw, &schema, &cfg)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (std, ccral) = means(&report)?;
    ensure!(
        correct_total(&report, Method::Ccral)? >= correct_total(&report, Method::Standard)?,
        "ccral {ccral} < standard {std}"
    );
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?} single-threaded");
    Ok(format!(
        "standard {std:.4}, ccral {ccral:.4}, margin {:+.4}, {:.1}s on 1 thread",
        ccral - std,
        elapsed.as_secs_f64()
    ))
}

fn synthetic_regression() -> Outcome {
    let raw = generate_synthetic(2000, 5, 2.0, 0.1, MASTER_SEED).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::new("synthetic.csv", "synthetic.schema.json");
    cfg.methods = vec![Method::Standard, Method::Ccral];
    cfg.master_seed = MASTER_SEED;
    let report = run_experiment_on(&raw, &synthetic_schema(5), &cfg).map_err(|e| e.to_string())?;
    let (std, ccral) = means(&report)?;
    ensure!(
        (std - SYNTH_STANDARD_MEAN).abs() < 1e-9 && (ccral - SYNTH_CCRAL_MEAN).abs() < 1e-9,
        "means moved: standard {std} (was {SYNTH_STANDARD_MEAN}), ccral {ccral} (was {SYNTH_CCRAL_MEAN})"
    );
    Ok(format!("standard {std}, ccral {ccral}"))
}

// ---------------------------------------------------------------- criterion 3

fn german_directional() -> Status {
    let data = data_dir().join("german.csv");
    if !data.is_file() {
        let msg = format!(
            "{} not found; run `python3 scripts/prepare_datasets.py --raw-dir <dir> --out-dir data` (see README)",
            data.display()
        );
        return if std::env::var("CCRAL_REQUIRE_DATA").is_ok_and(|v| v == "1") {
            Status::Fail(msg)
        } else {
            Status::Skip(msg)
        };
    }
    into_status((|| {
        let schema = FeatureSchema::load(&schema_path("german")).map_err(|e| e.to_string())?;
        let raw = load_csv(&data, &schema).map_err(|e| e.to_string())?;
        ensure!(raw.n_rows() == 1000, "expected 1000 rows, loaded {}", raw.n_rows());
        ensure!(schema.n_features() == 20, "expected 20 features, schema has {}", schema.n_features());
        let report = run_experiment_on(&raw, &schema, &dataset_config("german", data.clone())).map_err(|e| e.to_string())?;
        let (std, ccral) = means(&report)?;
        ensure!(
            correct_total(&report, Method::Ccral)? >= correct_total(&report, Method::Standard)?,
            "ccral {ccral:.4} < standard {std:.4}"
        );
        Ok(format!(
            "N=1000 M=20, standard {:.1}% -> ccral {:.1}% (gap {:+.1} points; published 61.0% -> 70.0%, +9.0)",
            100.0 * std,
            100.0 * ccral,
            100.0 * (ccral - std)
        ))
    })())
}

fn adult_directional() -> Status {
    let data = data_dir().join("adult.csv");
    if !data.is_file() {
        return Status::Skip(format!("{} not prepared", data.display()));
    }
    into_status((|| {
        let start = Instant::now();
        let report = run_experiment(&dataset_config("adult", data.clone())).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ensure!(report.dataset.n_rows == 30162, "expected 30162 complete rows, loaded {}", report.dataset.n_rows);
        let (std, ccral) = means(&report)?;
        let summary = format!(
            "N=30162, standard {:.2}% -> ccral {:.2}% (gap {:+.2} points; published 79.28% -> 82.82%, +3.54), {:.0}s",
            100.0 * std,
            100.0 * ccral,
            100.0 * (ccral - std),
            elapsed.as_secs_f64()
        );
        ensure!(elapsed < Duration::from_secs(600), "over 10 minutes: {summary}");
        let (c, s) = (correct_total(&report, Method::Ccral)?, correct_total(&report, Method::Standard)?);
        ensure!(c >= s, "ccral below standard ({c} vs {s} correct test predictions): {summary}");
        Ok(summary)
    })())
}

// ---------------------------------------------------------------- criterion 4

fn report_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = dir.path().join("synth.csv");
    let schema = dir.path().join("synth.schema.json");
    generate_synthetic(600, 4, 2.0, 0.1, 5).and_then(|t| t.save_csv(&csv)).map_err(|e| e.to_string())?;
    std::fs::write(&schema, synthetic_schema(4).to_json()).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::new(&csv, &schema);
    cfg.repeats = 3;
    cfg.master_seed = 9;

    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (i, one_thread) in [false, false, true].into_iter().enumerate() {
        let report = if one_thread { single.install(|| run_experiment(&cfg)) } else { run_experiment(&cfg) }
            .map_err(|e| e.to_string())?;
        let out = dir.path().join(format!("report{i}.json"));
        write_report(&report, &out).map_err(|e| e.to_string())?;
        outputs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure!(outputs[0] == outputs[1], "consecutive runs differ");
    ensure!(outputs[0] == outputs[2], "single-threaded run differs");
    Ok(format!("{} bytes, identical across runs and thread counts", outputs[0].len()))
}

// ---------------------------------------------------------------- driver

fn into_status(o: Outcome) -> Status {
    match o {
        Ok(detail) => Status::Pass(detail),
        Err(detail) => Status::Fail(detail),
    }
}

fn main() {
    // `cargo test -- --list` and filter arguments from the default harness
    // are accepted but ignored.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: Vec<(&str, Box<dyn Fn() -> Status>)> = vec![
        ("1a uncertain-region monotonicity and saturation", Box::new(|| into_status(uncertain_region_invariants()))),
        ("1b treatment flip involution and single-coordinate change", Box::new(|| into_status(flip_invariants()))),
        ("1c match_label equals exhaustive scan", Box::new(|| into_status(matching_equals_scan()))),
        ("1d gradient vs central differences", Box::new(|| into_status(gradient_check()))),
        ("1e AUC rank form vs pair count, transform invariance", Box::new(|| into_status(auc_checks()))),
        ("1f baseline equivalences at alpha 0.5 and 0", Box::new(|| into_status(baseline_equivalences()))),
        ("1g grid dominance", Box::new(|| into_status(grid_dominance()))),
        ("2a synthetic: ccral >= standard, < 60s single-threaded", Box::new(|| into_status(synthetic_experiment()))),
        ("2b synthetic: regression baseline", Box::new(|| into_status(synthetic_regression()))),
        ("3a german: ccral >= standard", Box::new(german_directional)),
        ("3b adult: ccral >= standard, < 10 min", Box::new(adult_directional)),
        ("4 determinism: byte-identical reports", Box::new(|| into_status(report_determinism()))),
    ];

    let mut failed = 0;
    for (name, check) in &criteria {
        match check() {
            Status::Pass(d) => println!("[PASS] {name}: {d}"),
            Status::Skip(d) => println!("[SKIP] {name}: {d}"),
            Status::Fail(d) => {
                failed += 1;
                println!("[FAIL] {name}: {d}");
            }
        }
    }
    println!("acceptance: {} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
