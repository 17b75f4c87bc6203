use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use tcresnet::audio_io::{
    index_from_listing, pad_or_trim, read_index_csv, write_index_csv, AugmentConfig, IndexConfig, Label, Split,
    CLIP_LEN,
};
use tcresnet::eval::{roc_pooled, uniform_grid, vertical_average, RocCurve, GRID_POINTS};
use tcresnet::features::{FeatureConfig, MfccExtractor, MfccMatrix};
use tcresnet::models::{build_model, load_checkpoint, ModelInstance, ModelSpec};
use tcresnet::nn_core::{softmax, Mode, Tensor};
use tcresnet::profiler::{benchmark_latency, cost_report};
use tcresnet::train::{
    accuracy_from_logits, argmax, predict_logits, read_wav, train_loop_with, Corpus, TrainConfig,
};

use crate::{BenchArgs, EvalArgs, ModelSource, RocArgs, SplitArgs, TrainArgs};

fn sink(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn extractor() -> Result<MfccExtractor> {
    Ok(MfccExtractor::new(FeatureConfig::default())?)
}

fn features_of(path: &Path) -> Result<MfccMatrix> {
    let clip = read_wav(path)?;
    Ok(extractor()?.compute(&pad_or_trim(&clip, CLIP_LEN))?)
}

fn open_checkpoint(path: &Path) -> Result<ModelInstance> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(load_checkpoint(io::BufReader::new(file))?)
}

/// A model name builds a fresh instance; anything else is read as a checkpoint.
fn resolve_model(source: &ModelSource, seed: u64) -> Result<ModelInstance> {
    if let Some(path) = &source.checkpoint {
        return open_checkpoint(path);
    }
    let name = source.model.as_deref().expect("clap requires --model or --checkpoint");
    match name.parse::<ModelSpec>() {
        Ok(spec) => {
            let mut m = build_model(&spec, seed)?;
            m.set_mode(Mode::Infer)?;
            Ok(m)
        }
        Err(e) if Path::new(name).is_file() => open_checkpoint(Path::new(name)).context(e.to_string()),
        Err(e) => Err(e.into()),
    }
}

fn corpus(root: &Path, index: Option<&Path>, seed: u64) -> Result<Corpus> {
    Ok(match index {
        Some(p) => {
            let entries = read_index_csv(File::open(p).with_context(|| format!("opening {}", p.display()))?)?;
            Corpus::from_index(root, entries)?
        }
        None => Corpus::open(
            root,
            &IndexConfig {
                seed,
                ..IndexConfig::default()
            },
        )?,
    })
}

pub fn featurize(wav: &Path, out: Option<&Path>) -> Result<()> {
    let m = features_of(wav)?;
    match out {
        Some(p) => {
            m.write_to(BufWriter::new(File::create(p)?))?;
            println!("{}: {}x{} -> {}", wav.display(), m.t, m.f, p.display());
        }
        None => m.write_to(io::stdout().lock())?,
    }
    Ok(())
}

pub fn split(a: &SplitArgs) -> Result<()> {
    let cfg = IndexConfig {
        val_pct: a.val,
        test_pct: a.test,
        unknown_pct: a.unknown,
        silence_pct: a.silence,
        seed: a.seed,
    };
    let entries = match (&a.list, &a.data_root) {
        (Some(list), _) => {
            let text = fs::read_to_string(list).with_context(|| format!("reading {}", list.display()))?;
            let paths: Vec<String> = text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
            index_from_listing(&paths, &cfg)?
        }
        (None, Some(root)) => tcresnet::audio_io::build_dataset_index(root, &cfg)?,
        (None, None) => bail!("one of --list or --data-root is required"),
    };
    write_index_csv(&entries, sink(a.out.as_deref())?)?;
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let spec: ModelSpec = a.model.parse()?;
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::from_kv_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.rng_seed = seed;
    }
    let aug = AugmentConfig {
        rng_seed: cfg.rng_seed,
        ..AugmentConfig::default()
    };
    let data = corpus(&a.data_root, a.index.as_deref(), IndexConfig::default().seed)?;
    fs::create_dir_all(&a.out)?;
    let model = build_model(&spec, cfg.rng_seed)?;
    let outcome = train_loop_with(model, &data, &cfg, &aug, &extractor()?, |row| {
        if let Some(acc) = row.val_acc {
            eprintln!("iter {:>6}  lr {:<6}  loss {:.4}  val_acc {:.4}", row.iter, row.lr, row.train_loss, acc);
        }
    })?;
    fs::write(a.out.join("best.ckpt"), &outcome.best_checkpoint)?;
    outcome.log.write_csv(BufWriter::new(File::create(a.out.join("metrics.csv"))?))?;
    println!(
        "best val_acc {:.4} at iter {}{}; wrote {}",
        outcome.best_val_acc,
        outcome.best_iter,
        if outcome.stopped_early { " (stopped early)" } else { "" },
        a.out.join("best.ckpt").display()
    );
    Ok(())
}

pub fn infer(source: &ModelSource, wav: &Path, fold: bool) -> Result<()> {
    let mut model = resolve_model(source, 0)?;
    if fold && !model.is_folded() {
        model = model.fold_batchnorm()?;
    }
    let logits = model.forward_mfcc(&features_of(wav)?)?;
    let probs = softmax(&logits.iter().map(|&v| v as f64).collect::<Vec<_>>());
    let top = argmax(&logits);
    println!("{}", Label::from_id(top).map_or("?", Label::name));
    for (label, p) in Label::ALL.iter().zip(&probs) {
        println!("{:<8} {p:.6}", label.name());
    }
    Ok(())
}

/// Class probabilities and labels for one split of the corpus.
fn split_scores(checkpoint: &Path, root: &Path, index: Option<&Path>, split: &str, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Label>)> {
    let split: Split = split.parse()?;
    let model = open_checkpoint(checkpoint)?;
    let data = corpus(root, index, IndexConfig::default().seed)?;
    let idx = data.indices(split);
    if idx.is_empty() {
        bail!("the {split} split is empty");
    }
    let aug = AugmentConfig {
        rng_seed: seed,
        ..AugmentConfig::default()
    };
    let samples = data.eval_features(&idx, &extractor()?, &aug)?;
    let mats: Vec<&MfccMatrix> = samples.iter().map(|(m, _)| m).collect();
    let logits = predict_logits(&model, &mats)?;
    let probs = logits
        .iter()
        .map(|row| softmax(&row.iter().map(|&v| v as f64).collect::<Vec<_>>()))
        .collect();
    Ok((probs, samples.iter().map(|(_, l)| *l).collect()))
}

fn write_scores(path: &Path, probs: &[Vec<f64>], labels: &[Label]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["label".to_string()];
    header.extend(Label::ALL.iter().map(|l| l.name().to_string()));
    w.write_record(&header)?;
    for (row, label) in probs.iter().zip(labels) {
        let mut rec = vec![label.name().to_string()];
        rec.extend(row.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn read_scores(path: &Path) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let (mut scores, mut labels) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec?;
        let label: Label = rec.get(0).unwrap_or_default().parse()?;
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().with_context(|| format!("bad score {v:?}")))
            .collect::<Result<Vec<_>>>()?;
        if row.len() != Label::COUNT {
            bail!("{}: expected {} scores per row, got {}", path.display(), Label::COUNT, row.len());
        }
        scores.push(row);
        labels.push(label.id());
    }
    Ok((scores, labels))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    let (probs, labels) = split_scores(&a.checkpoint, &a.data_root, a.index.as_deref(), &a.split, a.seed)?;
    let logits: Vec<Vec<f32>> = probs.iter().map(|r| r.iter().map(|&p| p as f32).collect()).collect();
    let acc = accuracy_from_logits(&logits, &labels)?;
    if let Some(p) = &a.scores_out {
        write_scores(p, &probs, &labels)?;
    }
    println!("accuracy {acc:.4} on {} {} samples", labels.len(), a.split);
    Ok(())
}

pub fn eval_roc(a: &RocArgs) -> Result<()> {
    let exclude = a
        .exclude_classes
        .iter()
        .map(|name| Ok(name.parse::<Label>()?.id()))
        .collect::<Result<Vec<_>>>()?;
    let mut curves: Vec<RocCurve> = Vec::new();
    if let Some(ckpt) = &a.checkpoint {
        let root = a.data_root.as_deref().expect("clap requires --data-root");
        let (probs, labels) = split_scores(ckpt, root, a.index.as_deref(), &a.split, a.seed)?;
        let ids: Vec<usize> = labels.iter().map(|l| l.id()).collect();
        curves.push(roc_pooled(&probs, &ids, &exclude)?);
    }
    for path in &a.scores {
        let (scores, labels) = read_scores(path)?;
        curves.push(roc_pooled(&scores, &labels, &exclude)?);
    }
    let curve = if curves.len() == 1 {
        curves.pop().expect("one curve")
    } else {
        vertical_average(&curves, &uniform_grid(GRID_POINTS))?
    };
    curve.write_csv(sink(a.out.as_deref())?)?;
    eprintln!("auc {:.6}", curve.auc);
    if a.out.is_some() {
        println!("auc {:.6}", curve.auc);
    }
    Ok(())
}

pub fn profile(model: &str, csv: bool, out: Option<&Path>) -> Result<()> {
    let report = cost_report(&model.parse()?);
    let mut w = sink(out)?;
    if csv {
        report.write_csv(&mut w)?;
    } else {
        writeln!(w, "{}", report.model)?;
        write!(w, "{}", report.to_table())?;
    }
    w.flush()?;
    Ok(())
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    let mut model = resolve_model(&a.source, a.seed)?;
    if !a.no_fold && !model.is_folded() {
        model = model.fold_batchnorm()?;
    }
    let shape = model.spec().input_shape().to_vec();
    let mut state = a.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let input = Tensor::from_fn(shape, |_| {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 40) as f32 / (1u64 << 24) as f32 * 2.0 - 1.0
    });
    let report = benchmark_latency(&model, &input, a.runs, a.warmup)?;
    let mut w = sink(a.out.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
