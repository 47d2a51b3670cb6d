use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use cann::dataset::encode as encode_table;
use cann::cann::{composite_objective, exact_correlation_error};
use cann::network::{accuracy, data_error, default_hidden_size};
use cann::stats::{ImportanceFile, ImportanceScope};
use cann::{
    compute_importance, learning_curve, load_csv, run_feature_selected_trials, run_trials,
    split, train_cann_with, train_plain_with, Dataset, ImportanceSource, ImportanceSpec, Method,
    Network, Schema, TrainConfig,
};

use crate::output::{OutputSet, RunManifest};
use crate::{
    usage_error, BenchArgs, CurveArgs, DataArgs, EncodeArgs, ImportanceArgs, MethodArg, NetArgs,
    Scope, TrainArgs,
};

fn load_dataset(args: &DataArgs) -> Result<Dataset> {
    let schema = Schema::from_json_file(&args.schema)?;
    let raw = load_csv(&args.data, &schema)?;
    Ok(encode_table(&raw)?)
}

fn train_config(net: &NetArgs, ds: &Dataset) -> TrainConfig {
    let hidden_sizes = if net.hidden.is_empty() {
        vec![default_hidden_size(ds.n_features(), ds.n_outputs())]
    } else {
        net.hidden.clone()
    };
    TrainConfig {
        learning_rate: net.learning_rate,
        epochs: net.epochs,
        hidden_sizes,
        seed: net.seed,
        init_range: net.init_range,
    }
}

/// Flags as JSON, with the hidden widths replaced by their resolved value.
fn resolved_flags<T: Serialize>(args: &T, cfg: Option<&TrainConfig>) -> Result<serde_json::Value> {
    let mut flags = serde_json::to_value(args)?;
    if let Some(cfg) = cfg {
        flags["hidden"] = serde_json::to_value(&cfg.hidden_sizes)?;
    }
    Ok(flags)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn manifest_json(manifest: &RunManifest) -> Result<String> {
    let mut s = serde_json::to_string_pretty(manifest)?;
    s.push('\n');
    Ok(s)
}

fn write_manifest(
    outputs: &mut OutputSet,
    path: &Path,
    manifest: RunManifest,
    started: Instant,
) -> Result<()> {
    let mut manifest = manifest.finish(started.elapsed());
    manifest.outputs = outputs.names();
    outputs.write(path, &manifest_json(&manifest)?)
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")
}

fn check_p(p: f64) {
    if !(0.0..=1.0).contains(&p) {
        usage_error(format!("--p must lie in [0, 1], got {p}"));
    }
}

pub fn encode(args: &EncodeArgs) -> Result<()> {
    let started = Instant::now();
    let ds = load_dataset(&args.data)?;
    let manifest = RunManifest::new("encode", resolved_flags(args, None)?, ds.fingerprint());
    let mut outputs = OutputSet::new();
    outputs.write(&args.out, &(ds.to_json()? + "\n"))?;
    write_manifest(&mut outputs, &manifest_path(&args.out), manifest, started)?;
    outputs.commit();
    println!(
        "{} instances, {} features, {} classes",
        ds.n_instances(),
        ds.n_features(),
        ds.n_outputs()
    );
    Ok(())
}

pub fn importance(args: &ImportanceArgs) -> Result<()> {
    let scope = match (args.scope, args.seed, args.train_fraction) {
        (Scope::Full, _, _) => ImportanceScope::Full,
        (Scope::Train, Some(seed), Some(train_fraction)) => {
            ImportanceScope::Train { seed, train_fraction }
        }
        (Scope::Train, _, _) => usage_error("--scope train requires --seed and --train-fraction"),
    };
    let started = Instant::now();
    let ds = load_dataset(&args.data)?;
    let measured = match &scope {
        ImportanceScope::Train { seed, train_fraction } => {
            ds.subset(&split(ds.n_instances(), *train_fraction, *seed)?.train_indices)?
        }
        _ => ds.clone(),
    };
    let report = compute_importance(&measured)?;
    let file = ImportanceFile::from_report(&ds, &report, scope);

    let manifest = RunManifest::new("importance", resolved_flags(args, None)?, ds.fingerprint());
    let mut outputs = OutputSet::new();
    outputs.write(&args.out, &file.to_json())?;
    write_manifest(&mut outputs, &manifest_path(&args.out), manifest, started)?;
    outputs.commit();

    let labels = ds.class_labels();
    let names = ds.feature_names();
    let width = names.iter().map(String::len).max().unwrap_or(0);
    print!("{:width$}", "");
    for l in labels {
        print!("  {l:>8}");
    }
    println!();
    for (k, name) in names.iter().enumerate() {
        print!("{name:width$}");
        for o in 0..labels.len() {
            let e = report.get(k, o);
            if e.undefined {
                print!("  {:>8}", "n/a");
            } else {
                print!("  {:>8.4}", e.correlation);
            }
        }
        println!();
    }
    Ok(())
}

#[derive(Serialize)]
struct ModelFile<'a> {
    method: MethodArg,
    p: Option<f64>,
    config: &'a TrainConfig,
    dataset_fingerprint: String,
    train_fraction: Option<f64>,
    network: &'a Network,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    check_p(args.net.p);
    let importance_path = match args.method {
        MethodArg::Plain => {
            if args.importance.is_some() {
                eprintln!("warning: --importance is ignored with --method plain");
            }
            None
        }
        MethodArg::Cann => {
            if args.importance.is_none() && args.net.p < 1.0 {
                usage_error("--method cann with --p below 1 requires --importance");
            }
            args.importance.as_deref()
        }
    };
    let started = Instant::now();
    let ds = load_dataset(&args.data)?;
    let cfg = train_config(&args.net, &ds);
    let train: Vec<usize> = match args.train_fraction {
        Some(f) => split(ds.n_instances(), f, cfg.seed)?.train_indices,
        None => (0..ds.n_instances()).collect(),
    };
    let matrix = match importance_path {
        Some(path) => Some(
            ImportanceFile::load(path)?
                .matrix_for(&ds)
                .with_context(|| format!("importance file {}", path.display()))?,
        ),
        None => None,
    };
    let spec = match &matrix {
        Some(m) => Some(ImportanceSpec::build(&ds, m, &train)?),
        None => None,
    };

    let mut log = String::from("epoch,data_error,correlation_error,objective,train_accuracy\n");
    let mut log_row = |epoch: usize, net: &Network| -> cann::Result<()> {
        let ed = data_error(net, &ds, &train)?;
        let (ec, objective) = match &spec {
            Some(s) => (
                exact_correlation_error(net, &ds, &train, s)?.to_string(),
                composite_objective(net, &ds, &train, s, args.net.p)?.to_string(),
            ),
            None => (String::new(), ed.to_string()),
        };
        let acc = accuracy(net, &ds, &train)?;
        log.push_str(&format!("{},{ed},{ec},{objective},{acc}\n", epoch + 1));
        Ok(())
    };

    let mut net = cfg.init_network(&ds)?;
    let p = match args.method {
        MethodArg::Plain => {
            train_plain_with(&mut net, &ds, &train, &cfg, |e, n| log_row(e, n))?;
            None
        }
        MethodArg::Cann => {
            let zeros;
            let spec = match &spec {
                Some(s) => s,
                None => {
                    let matrix = vec![0.0; ds.n_features() * ds.n_outputs()];
                    zeros = ImportanceSpec::build(&ds, &matrix, &train)?;
                    &zeros
                }
            };
            train_cann_with(&mut net, &ds, &train, spec, &cfg, args.net.p, |e, n, _| {
                log_row(e, n)
            })?;
            Some(args.net.p)
        }
    };

    let model = ModelFile {
        method: args.method,
        p,
        config: &cfg,
        dataset_fingerprint: ds.fingerprint(),
        train_fraction: args.train_fraction,
        network: &net,
    };
    let mut model_json = serde_json::to_string_pretty(&model)?;
    model_json.push('\n');
    let log_path = args.log.clone().unwrap_or_else(|| args.out.with_extension("log.csv"));

    let manifest = RunManifest::new("train", resolved_flags(args, Some(&cfg))?, ds.fingerprint());
    let mut outputs = OutputSet::new();
    outputs.write(&args.out, &model_json)?;
    outputs.write(&log_path, &log)?;
    write_manifest(&mut outputs, &manifest_path(&args.out), manifest, started)?;
    outputs.commit();
    println!(
        "trained {} on {} instances, train accuracy {:.2}%",
        match args.method {
            MethodArg::Plain => "mlp",
            MethodArg::Cann => "cann",
        },
        train.len(),
        accuracy(&net, &ds, &train)?
    );
    Ok(())
}

fn importance_source(
    file: Option<&Path>,
    scope: Scope,
    ds: &Dataset,
) -> Result<ImportanceSource> {
    Ok(match (file, scope) {
        (Some(path), _) => ImportanceSource::Fixed(
            ImportanceFile::load(path)?
                .matrix_for(ds)
                .with_context(|| format!("importance file {}", path.display()))?,
        ),
        (None, Scope::Full) => ImportanceSource::Full,
        (None, Scope::Train) => ImportanceSource::Train,
    })
}

pub fn bench(args: &BenchArgs) -> Result<()> {
    check_p(args.net.p);
    let started = Instant::now();
    let ds = load_dataset(&args.data)?;
    let cfg = train_config(&args.net, &ds);
    let manifest = RunManifest::new("bench", resolved_flags(args, Some(&cfg))?, ds.fingerprint());

    let manifest_file = args.out_dir.join("manifest.json");
    if manifest_file.exists() && !args.force {
        let text = std::fs::read_to_string(&manifest_file)
            .with_context(|| format!("reading {}", manifest_file.display()))?;
        let conflicting = match serde_json::from_str::<RunManifest>(&text) {
            Ok(existing) => !existing.same_run(&manifest),
            Err(_) => true,
        };
        if conflicting {
            bail!(
                "{} holds results of a different run; pass --force to overwrite",
                args.out_dir.display()
            );
        }
    }

    let source = importance_source(args.importance.as_deref(), args.importance_scope, &ds)?;
    let pool = thread_pool(args.jobs)?;
    let (plain, cann_report, selected) = pool.install(|| -> Result<_> {
        let plain = run_trials(&ds, Method::Plain, None, &cfg, args.trials, args.fraction)?;
        let cann_report = run_trials(
            &ds,
            Method::Cann { p: args.net.p },
            Some(&source),
            &cfg,
            args.trials,
            args.fraction,
        )?;
        let selected = match args.keep_fraction {
            Some(keep) => Some(run_feature_selected_trials(
                &ds,
                keep,
                Method::Plain,
                None,
                &cfg,
                args.trials,
                args.fraction,
            )?),
            None => None,
        };
        Ok((plain, cann_report, selected))
    })?;

    let mut outputs = OutputSet::new();
    let dir = &args.out_dir;
    outputs.write(&dir.join("mlp.csv"), &plain.to_csv())?;
    outputs.write(&dir.join("mlp.json"), &plain.to_json())?;
    outputs.write(&dir.join("cann.csv"), &cann_report.to_csv())?;
    outputs.write(&dir.join("cann.json"), &cann_report.to_json())?;
    if let Some(sel) = &selected {
        outputs.write(&dir.join("mlp_selected.csv"), &sel.to_csv())?;
        outputs.write(&dir.join("mlp_selected.json"), &sel.to_json())?;
    }
    write_manifest(&mut outputs, &manifest_file, manifest, started)?;
    outputs.commit();

    println!("method        mean     std  trials");
    let mut rows = vec![("mlp", &plain), ("cann", &cann_report)];
    if let Some(sel) = &selected {
        rows.push(("mlp_selected", sel));
    }
    for (name, r) in rows {
        println!("{name:<12} {:>6.2} {:>7.2} {:>7}", r.mean, r.std, r.n_trials);
    }
    Ok(())
}

pub fn curve(args: &CurveArgs) -> Result<()> {
    check_p(args.net.p);
    let started = Instant::now();
    let ds = load_dataset(&args.data)?;
    let cfg = train_config(&args.net, &ds);
    let source = importance_source(args.importance.as_deref(), args.importance_scope, &ds)?;
    let methods = [Method::Plain, Method::Cann { p: args.net.p }];
    let pool = thread_pool(args.jobs)?;
    let curve = pool.install(|| {
        learning_curve(&ds, &methods, &args.fractions, Some(&source), &cfg, args.trials)
    })?;

    let manifest = RunManifest::new("curve", resolved_flags(args, Some(&cfg))?, ds.fingerprint());
    let mut outputs = OutputSet::new();
    outputs.write(&args.out, &curve.to_csv())?;
    write_manifest(&mut outputs, &manifest_path(&args.out), manifest, started)?;
    outputs.commit();
    print!("{}", curve.to_csv());
    Ok(())
}
