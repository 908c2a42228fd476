use std::fs;
use std::path::Path;

use pqv_core::encoder::{
    encode_snapshot, read_dataset, write_dataset, Label, LabeledDataset, Split, CHANNELS,
};
use pqv_core::eval::{
    bench_assessment, evaluate, export_conv1_weights, misclassification_report, operating_features,
    radar_csv, run_cases, CaseSpec,
};
use pqv_core::generate::generate_dataset;
use pqv_core::grid::default_contingencies;
use pqv_core::nn::{load_checkpoint, predict, save_checkpoint};
use pqv_core::stability::{assess_security, DynamicParams};
use pqv_core::train::train_with;
use pqv_core::{Model32, Tensor32};

use crate::config::Resolved;
use crate::error::{CliError, DISAGREEMENT};

fn require(path: &Path, what: &str, hint: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{what} {} not found; {hint}",
            path.display()
        )))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => Ok(fs::create_dir_all(dir)?),
        _ => Ok(()),
    }
}

fn open_dataset(r: &Resolved) -> Result<LabeledDataset, CliError> {
    require(&r.dataset, "dataset", "run `pqv generate` first")?;
    Ok(read_dataset(&r.dataset)?)
}

fn open_model(r: &Resolved, n: usize) -> Result<Model32, CliError> {
    require(&r.checkpoint, "checkpoint", "run `pqv train` first")?;
    let model: Model32 = load_checkpoint(&r.checkpoint)?;
    if model.input_shape() != [n, n, CHANNELS] {
        return Err(CliError::Validation(format!(
            "checkpoint expects {:?} images but the dataset has {n} buses",
            model.input_shape()
        )));
    }
    Ok(model)
}

pub fn generate(r: &Resolved) -> Result<u8, CliError> {
    let grid = r.grid.load()?;
    let dynp = DynamicParams::from_grid(&grid);
    let (ds, stats) = generate_dataset(&grid, &dynp, &r.run.generate)?;
    ensure_parent(&r.dataset)?;
    write_dataset(&ds, &r.dataset)?;
    let usable = stats.safe + stats.unsafe_;
    println!("requested = {}", stats.requested);
    println!("converged = {}", stats.converged);
    println!("oracle_failures = {}", stats.oracle_failures);
    println!("safe = {}", stats.safe);
    println!("unsafe = {}", stats.unsafe_);
    println!("safe_share = {:.4}", stats.safe as f64 / usable as f64);
    println!("dataset = {}", r.dataset.display());
    Ok(0)
}

pub fn train(r: &Resolved) -> Result<u8, CliError> {
    let ds = open_dataset(r)?;
    let cfg = &r.run.train;
    println!("batch_size = {}", cfg.batch_size);
    println!("max_epochs = {}", cfg.max_epochs);
    println!("patience = {}", cfg.patience);
    println!("lr = {}", cfg.adam.lr);
    println!("phi = {}", cfg.loss.phi);
    println!("alpha = {:?}", cfg.loss.alpha);
    println!("lambda = {}", cfg.loss.lambda);
    println!("seed = {}", cfg.seed);
    let n = ds.n_buses();
    let model = Model32::new([n, n, CHANNELS], r.run.model.chain(), cfg.seed)?;
    ensure_parent(&r.checkpoint)?;
    let (model, history) = train_with(model, &ds, cfg, |e| {
        println!(
            "epoch {:>3}  train_loss {:.6}  val_loss {:.6}  val_acc {:.4}",
            e.epoch, e.train_loss, e.val_loss, e.val_acc
        );
    })?;
    save_checkpoint(&model, &r.checkpoint)?;
    write_file(&r.out_dir.join("history.csv"), &history.to_csv())?;
    println!("best_epoch = {}", history.best_epoch);
    println!("checkpoint = {}", r.checkpoint.display());
    Ok(0)
}

pub fn eval(r: &Resolved) -> Result<u8, CliError> {
    let ds = open_dataset(r)?;
    let model = open_model(r, ds.n_buses())?;
    let batch = r.run.train.batch_size;
    let ev = evaluate(&model, &ds, Split::Test, batch)?;
    let metrics = ev.report.to_csv(&ev.confusion);
    print!("{metrics}");
    write_file(&r.out_dir.join("metrics.csv"), &metrics)?;

    let radar = if r.run.eval.cases.is_empty() {
        let loss = &r.run.train.loss;
        let case = CaseSpec {
            id: 0,
            phi: loss.phi,
            alpha: loss.alpha,
        };
        radar_csv([(&case, Ok(&ev.report))])
    } else {
        let n = ds.n_buses();
        let init = Model32::new([n, n, CHANNELS], r.run.model.chain(), r.run.train.seed)?;
        let results = run_cases(
            &ds,
            &r.run.eval.cases,
            &r.run.train,
            &init,
            |case, outcome| match outcome {
                Ok((ev, h)) => println!(
                    "case {}: best epoch {}, {:?}",
                    case.id, h.best_epoch, ev.confusion
                ),
                Err(e) => println!("case {}: failed: {e}", case.id),
            },
        );
        radar_csv(results.iter().map(|c| c.radar_row()))
    };
    write_file(&r.out_dir.join("radar.csv"), &radar)?;

    let report = misclassification_report(
        &operating_features(&ds),
        &ev.misclassified(&ds),
        &r.run.eval.ks,
        r.run.train.seed,
    )?;
    write_file(&r.out_dir.join("misclassification.csv"), &report.to_csv())?;
    export_conv1_weights(&model, &r.out_dir.join("conv1.ppm"))?;
    println!("outputs = {}", r.out_dir.display());
    Ok(0)
}

fn name(label: Label) -> &'static str {
    match label {
        Label::Safe => "safe",
        Label::Unsafe => "unsafe",
    }
}

pub fn assess(r: &Resolved, sample: usize, bench: Option<usize>) -> Result<u8, CliError> {
    let grid = r.grid.load()?;
    let ds = open_dataset(r)?;
    if ds.n_buses() != grid.n_buses() {
        return Err(CliError::Validation(format!(
            "dataset has {} buses, grid has {}",
            ds.n_buses(),
            grid.n_buses()
        )));
    }
    let model = open_model(r, ds.n_buses())?;
    let point = ds.samples.get(sample).ok_or_else(|| {
        CliError::Config(format!(
            "sample {sample} out of range; the dataset holds {}",
            ds.len()
        ))
    })?;
    let dynp = DynamicParams::from_grid(&grid);
    let gen = &r.run.generate;
    let cont = gen
        .contingencies
        .clone()
        .unwrap_or_else(|| default_contingencies(&grid));

    let img = encode_snapshot::<f32>(&point.snapshot, &grid.topology(), &ds.norms)?;
    let n = img.n;
    let probs = model.forward_single(&Tensor32::from_vec(&[1, n, n, CHANNELS], img.data))?;
    let cnn = Label::from_index(predict(&probs)[0]);
    let oracle = assess_security(&grid, &point.snapshot, &dynp, &cont, gen.threshold)?;
    let truth = Label::from_safe(oracle.is_safe);

    println!("sample = {sample}");
    println!("stored_label = {}", name(point.label));
    println!("cnn = {} (p = {:.6})", name(cnn), probs.data()[cnn.index()]);
    println!(
        "oracle = {} (min_damping = {:.6}, worst = {})",
        name(truth),
        oracle.min_damping,
        oracle.worst
    );
    if let Some(reps) = bench {
        let report = bench_assessment(
            &grid,
            &dynp,
            &cont,
            gen.threshold,
            &point.snapshot,
            &ds.norms,
            &model,
            reps,
        )?;
        println!("{report}");
    }
    if cnn != truth {
        println!("verdict = disagreement");
        return Ok(DISAGREEMENT);
    }
    println!("verdict = agreement");
    Ok(0)
}
