//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any criterion fails.
//!
//! Set `CANN_SPAMBASE` to the path of `spambase.data` to run criterion 7 on
//! the real dataset; otherwise it runs on the bundled spam-like generator.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cann::cann::{composite_gradient, composite_objective, exact_covariances};
use cann::network::train_plain_with;
use cann::stats::{chi_squared_rank, chi_squared_statistic, DEFAULT_BINS};
use cann::synthetic::{informative_plus_noise, shifted_features, spam_like};
use cann::{
    compute_importance, learning_curve, run_trials, train_cann_with, CannTrainer, Dataset,
    ImportanceSource, ImportanceSpec, Method, Network, Schema, TrainConfig,
};

use common::{path_str, run_ok, write_fixture};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, k: usize, c: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.gen()).collect()).collect();
    let labels: Vec<usize> = (0..n)
        .map(|i| if i < c { i } else { rng.gen_range(0..c) })
        .collect();
    Dataset::from_rows(&rows, &labels, c).unwrap()
}

fn composite_gradient_correctness() -> Outcome {
    const STEP: f64 = 1e-6;
    const TOL: f64 = 1e-5;
    const FLOOR: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let cases = 24;
    for case in 0..cases {
        let k = rng.gen_range(1..=3);
        let h = rng.gen_range(1..=4);
        let n = rng.gen_range(4..=10);
        let ds = random_dataset(&mut rng, n, k, 2);
        let train: Vec<usize> = (0..n).collect();
        let importance: Vec<f64> = (0..k * 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let spec = ImportanceSpec::build(&ds, &importance, &train).unwrap();
        let p = [0.0, 0.3, 0.7, 1.0][rng.gen_range(0..4)];
        let net = Network::init(&[k, h, 2], case, 1.5).unwrap();
        let grad = composite_gradient(&net, &ds, &train, &spec, p).unwrap();
        let objective = |m: &Network| composite_objective(m, &ds, &train, &spec, p).unwrap();
        for (idx, g) in grad.flatten().iter().enumerate() {
            let mut plus = net.clone();
            *plus.parameter_mut(idx) += STEP;
            let mut minus = net.clone();
            *minus.parameter_mut(idx) -= STEP;
            let fd = -(objective(&plus) - objective(&minus)) / (2.0 * STEP);
            let err = (g - fd).abs() / g.abs().max(fd.abs()).max(FLOOR);
            worst = worst.max(err);
            ensure(err <= TOL, || {
                format!("case {case} ({k}-{h}-2, n={n}, p={p}) param {idx}: {g} vs {fd}")
            })?;
        }
    }
    Ok(format!("{cases} nets, worst relative error {worst:.2e}"))
}

fn exact_reduction() -> Outcome {
    let datasets = [
        informative_plus_noise(30, 3, 0.4, 0.2, 1).unwrap(),
        shifted_features(24, 2, 2, 0.2, 4).unwrap(),
    ];
    let mut epochs_compared = 0;
    for (d, ds) in datasets.iter().enumerate() {
        let train: Vec<usize> = (0..ds.n_instances()).step_by(2).collect();
        let importance = compute_importance(ds).unwrap().matrix();
        let spec = ImportanceSpec::build(ds, &importance, &train).unwrap();
        for seed in 0..5 {
            let cfg = TrainConfig {
                learning_rate: 0.3,
                epochs: 10,
                hidden_sizes: vec![5],
                seed,
                init_range: 0.5,
            };
            let mut plain = Vec::new();
            let mut net = cfg.init_network(ds).unwrap();
            train_plain_with(&mut net, ds, &train, &cfg, |_, n| {
                plain.push(n.clone());
                Ok(())
            })
            .unwrap();
            let mut blended = Vec::new();
            let mut net = cfg.init_network(ds).unwrap();
            train_cann_with(&mut net, ds, &train, &spec, &cfg, 1.0, |_, n, _| {
                blended.push(n.clone());
                Ok(())
            })
            .unwrap();
            ensure(plain == blended, || format!("dataset {d} seed {seed}: trajectories differ"))?;
            epochs_compared += plain.len();
        }
    }
    Ok(format!("{epochs_compared} epoch snapshots bit-identical"))
}

fn memoization_fidelity() -> Outcome {
    let ds = informative_plus_noise(100, 4, 0.4, 0.2, 21).unwrap();
    let train: Vec<usize> = (0..100).collect();
    let importance = compute_importance(&ds).unwrap().matrix();
    let spec = ImportanceSpec::build(&ds, &importance, &train).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.3,
        epochs: 50,
        hidden_sizes: vec![5],
        seed: 21,
        init_range: 0.5,
    };
    let mut net = cfg.init_network(&ds).unwrap();
    let mut trainer = CannTrainer::new(&mut net, &ds, &train, &spec, &cfg, 0.5).unwrap();
    let (mut worst_pre, mut worst_post): (f64, f64) = (0.0, 0.0);
    for epoch in 0..cfg.epochs {
        trainer.run_epoch().unwrap();
        trainer.sync_tables().unwrap();
        let exact = exact_covariances(trainer.network(), &ds, &train).unwrap();
        let max_diff = |memo: Vec<f64>| {
            memo.iter()
                .zip(&exact)
                .map(|(m, e)| (m - e).abs())
                .fold(0.0, f64::max)
        };
        let pre = max_diff(trainer.state().covariances(&spec));
        ensure(pre <= 1e-6, || format!("epoch {epoch}: pre-refresh drift {pre:.2e}"))?;
        trainer.refresh_tables();
        let post = max_diff(trainer.state().covariances(&spec));
        ensure(post <= 1e-12, || format!("epoch {epoch}: post-refresh drift {post:.2e}"))?;
        worst_pre = worst_pre.max(pre);
        worst_post = worst_post.max(post);
    }
    Ok(format!(
        "50 epochs, worst drift {worst_pre:.1e} before refresh, {worst_post:.1e} after"
    ))
}

fn brute_force_corr(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        cov += (x[i] - mx) * (y[i] - my);
        vx += (x[i] - mx) * (x[i] - mx);
        vy += (y[i] - my) * (y[i] - my);
    }
    if x.iter().all(|v| *v == x[0]) || y.iter().all(|v| *v == y[0]) {
        return None;
    }
    Some((cov / n) / ((vx / n).sqrt() * (vy / n).sqrt()))
}

fn correlation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut flagged = 0;
    for case in 0..10 {
        let n = rng.gen_range(5..50);
        let k = rng.gen_range(2..8);
        let c = rng.gen_range(2..4);
        let constant_col = case % k;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..k)
                    .map(|j| if j == constant_col { 0.7 } else { rng.gen() })
                    .collect()
            })
            .collect();
        let labels: Vec<usize> = (0..n)
            .map(|i| if i < c { i } else { rng.gen_range(0..c) })
            .collect();
        let ds = Dataset::from_rows(&rows, &labels, c).unwrap();
        let report = compute_importance(&ds).unwrap();
        for f in 0..k {
            let x: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            for o in 0..c {
                let y: Vec<f64> = labels.iter().map(|&l| if l == o { 1.0 } else { 0.0 }).collect();
                let got = report.get(f, o);
                match brute_force_corr(&x, &y) {
                    Some(r) => {
                        let diff = (got.correlation - r).abs();
                        worst = worst.max(diff);
                        ensure(!got.undefined && diff <= 1e-12, || {
                            format!("case {case} ({f},{o}): {} vs {r}", got.correlation)
                        })?;
                    }
                    None => {
                        flagged += 1;
                        ensure(got.undefined && got.correlation == 0.0, || {
                            format!("case {case} ({f},{o}): zero variance not flagged")
                        })?;
                    }
                }
            }
        }
    }
    Ok(format!("10 datasets, worst difference {worst:.1e}, {flagged} zero-variance pairs flagged"))
}

fn chi_squared_oracle() -> Outcome {
    let separating = chi_squared_statistic(&[vec![10.0, 0.0], vec![0.0, 10.0]]);
    ensure((separating - 20.0).abs() <= 1e-12, || format!("separating table gave {separating}"))?;
    let independent = chi_squared_statistic(&[vec![5.0, 5.0], vec![5.0, 5.0]]);
    ensure(independent.abs() <= 1e-12, || format!("independent table gave {independent}"))?;

    // feature 0 separates the classes, feature 1 is independent of them
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..20 {
        let class = i / 10;
        rows.push(vec![class as f64, (i % 2) as f64]);
        labels.push(class);
    }
    let ds = Dataset::from_rows(&rows, &labels, 2).unwrap();
    let ranked = chi_squared_rank(&ds, DEFAULT_BINS).unwrap();
    ensure(ranked[0].feature == 0 && ranked[1].feature == 1, || {
        format!("ranking {:?}", ranked.iter().map(|s| s.feature).collect::<Vec<_>>())
    })?;
    ensure((ranked[0].chi_squared - 20.0).abs() <= 1e-12, || {
        format!("separating feature scored {}", ranked[0].chi_squared)
    })?;
    ensure(ranked[1].chi_squared.abs() <= 1e-12, || {
        format!("independent feature scored {}", ranked[1].chi_squared)
    })?;
    Ok(format!("chi2 = {separating} and {independent}; ranking [0, 1]"))
}

fn learning_curve_trend() -> Outcome {
    let ds = informative_plus_noise(400, 9, 0.4, 0.2, 1).unwrap();
    // true correlations from a large draw of the same population
    let population = informative_plus_noise(20_000, 9, 0.4, 0.2, 999).unwrap();
    let importance = ImportanceSource::Fixed(compute_importance(&population).unwrap().matrix());
    let cfg = TrainConfig {
        learning_rate: 0.5,
        epochs: 200,
        hidden_sizes: vec![6],
        seed: 100,
        init_range: 0.5,
    };
    let fractions = [0.1, 0.2, 0.4, 0.8];
    let curve = learning_curve(
        &ds,
        &[Method::Plain, Method::Cann { p: 0.1 }],
        &fractions,
        Some(&importance),
        &cfg,
        20,
    )
    .unwrap();
    let mlp: Vec<f64> = curve.for_method("mlp").map(|p| p.mean).collect();
    let aided: Vec<f64> = curve.for_method("cann").map(|p| p.mean).collect();
    let gaps: Vec<f64> = aided.iter().zip(&mlp).map(|(a, m)| a - m).collect();
    let summary = fractions
        .iter()
        .zip(&gaps)
        .map(|(f, g)| format!("{f}: {g:+.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(gaps[0] >= 0.0 && gaps[1] >= 0.0, || format!("cann behind mlp early ({summary})"))?;
    ensure(gaps[0] >= gaps[3], || format!("gap grows with data ({summary})"))?;
    Ok(format!("gaps {summary}"))
}

fn spambase_schema() -> Schema {
    let mut columns: Vec<serde_json::Value> = (0..57)
        .map(|i| serde_json::json!({"name": format!("f{i}"), "type": "continuous"}))
        .collect();
    columns.push(serde_json::json!({"name": "spam", "type": "nominal"}));
    serde_json::from_value(serde_json::json!({
        "columns": columns,
        "class_column": 57,
        "header": false,
    }))
    .unwrap()
}

fn table_ballpark() -> Outcome {
    let cfg = TrainConfig {
        learning_rate: 0.1,
        epochs: 50,
        hidden_sizes: vec![30],
        seed: 100,
        init_range: 0.5,
    };
    let (ds, source) = match std::env::var_os("CANN_SPAMBASE") {
        Some(path) => {
            let raw = cann::load_csv(&path, &spambase_schema()).map_err(|e| e.to_string())?;
            (cann::encode(&raw).map_err(|e| e.to_string())?, "spambase")
        }
        None => (spam_like(600, 1).unwrap(), "spam-like synthetic"),
    };
    let mlp = run_trials(&ds, Method::Plain, None, &cfg, 20, 0.5).unwrap();
    let aided = run_trials(
        &ds,
        Method::Cann { p: 0.5 },
        Some(&ImportanceSource::Full),
        &cfg,
        20,
        0.5,
    )
    .unwrap();
    let gap = aided.mean - mlp.mean;
    let summary = format!(
        "{source}: mlp {:.2}, cann {:.2}, gap {gap:+.2}",
        mlp.mean, aided.mean
    );
    ensure(gap >= 0.0, || summary.clone())?;
    if source == "spambase" {
        ensure((mlp.mean - 89.76).abs() <= 5.0 && (aided.mean - 91.35).abs() <= 5.0, || {
            format!("{summary}; outside the +/-5 band")
        })?;
    }
    Ok(summary)
}

fn result_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy();
            !name.ends_with("manifest.json") && name != "data.csv" && name != "schema.json"
        })
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn cli_determinism() -> Outcome {
    let run_all = |dir: &Path| {
        let (data, schema) = write_fixture(dir, 60);
        let out = |name: &str| dir.join(name).to_string_lossy().into_owned();
        let (imp_full, bench) = (out("imp_full.json"), out("bench"));
        let invocations: Vec<Vec<String>> = vec![
            vec!["encode", "--out", &out("encoded.json")],
            vec!["importance", "--out", &imp_full],
            vec![
                "importance", "--scope", "train", "--seed", "3", "--train-fraction", "0.5",
                "--out", &out("imp_train.json"),
            ],
            vec!["train", "--method", "plain", "--epochs", "20", "--out", &out("plain.json")],
            vec![
                "train", "--importance", &imp_full, "--train-fraction", "0.5", "--epochs", "20",
                "--out", &out("cann.json"),
            ],
            vec![
                "bench", "--trials", "4", "--keep-fraction", "0.6", "--epochs", "20", "--seed",
                "5", "--jobs", "3", "--out-dir", &bench,
            ],
            vec![
                "curve", "--trials", "3", "--fractions", "0.2,0.5", "--epochs", "20", "--seed",
                "5", "--jobs", "2", "--out", &out("curve.csv"),
            ],
        ]
        .into_iter()
        .map(|v| v.into_iter().map(String::from).collect())
        .collect();
        for inv in &invocations {
            let mut args: Vec<&str> = inv.iter().map(String::as_str).collect();
            args.splice(1..1, ["--data", path_str(&data), "--schema", path_str(&schema)]);
            run_ok(&args);
        }
        let mut files = result_files(dir);
        files.extend(
            result_files(&dir.join("bench"))
                .into_iter()
                .map(|(n, b)| (format!("bench/{n}"), b)),
        );
        files
    };
    let a_dir = tempfile::tempdir().unwrap();
    let b_dir = tempfile::tempdir().unwrap();
    let a = run_all(a_dir.path());
    let b = run_all(b_dir.path());
    let names: Vec<&str> = a.iter().map(|(n, _)| n.as_str()).collect();
    ensure(names == b.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(), || {
        "different file sets".into()
    })?;
    for ((name, x), (_, y)) in a.iter().zip(&b) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    ensure(a.len() >= 12, || format!("only {} result files: {names:?}", a.len()))?;
    Ok(format!("{} result files byte-identical across reruns", a.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("composite gradient matches finite differences", composite_gradient_correctness),
        ("p = 1 reproduces plain backprop bit for bit", exact_reduction),
        ("memoized covariances track direct recomputation", memoization_fidelity),
        ("correlation report matches brute force", correlation_oracle),
        ("chi-squared hand values and ranking", chi_squared_oracle),
        ("learning-curve trend at desk scale", learning_curve_trend),
        ("accuracy-table ballpark", table_ballpark),
        ("CLI determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name} ({detail}) [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name} ({detail}) [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
