use std::io::Write;

use rand::Rng;

use super::config::{lr_at, TrainConfig};
use super::data::Corpus;
use super::sgd::{sgd_step, OptimizerState};
use crate::audio_io::{AugmentConfig, Label, Split};
use crate::error::{Error, Result};
use crate::features::{MfccExtractor, MfccMatrix};
use crate::models::{batch_input, checkpoint_bytes, ModelInstance};
use crate::nn_core::par::map_indices;
use crate::nn_core::{softmax_cross_entropy, Mode, Tensor};
use crate::rng;

const BATCH_STREAM: u64 = 0x6261_7463;
const DROPOUT_STREAM: u64 = 0x6472_6f70;
const EVAL_BATCH: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub iter: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// Present on evaluation rounds only.
    pub val_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<MetricsRow>,
}

impl MetricsLog {
    /// `iter,lr,train_loss,val_acc`; `val_acc` is empty between evaluations.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> Result<()> {
        writeln!(sink, "iter,lr,train_loss,val_acc")?;
        for r in &self.rows {
            let acc = r.val_acc.map(|a| a.to_string()).unwrap_or_default();
            writeln!(sink, "{},{},{},{}", r.iter, r.lr, r.train_loss, acc)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

pub struct TrainOutcome {
    /// Best-validation model, in infer mode.
    pub best: ModelInstance<f32>,
    pub best_checkpoint: Vec<u8>,
    pub best_val_acc: f64,
    pub best_iter: usize,
    /// Model after the last iteration, still in train mode.
    pub last: ModelInstance<f32>,
    pub log: MetricsLog,
    pub stopped_early: bool,
}

/// Mean softmax cross-entropy over the batch and its gradient with respect to the logits.
pub fn batch_loss(logits: &Tensor<f32>, labels: &[usize]) -> Result<(f64, Tensor<f32>)> {
    let n = labels.len();
    if n == 0 || logits.len() % n != 0 {
        return Err(Error::shape(format!("{} logits for {n} labels", logits.len())));
    }
    let k = logits.len() / n;
    let mut grad = Vec::with_capacity(logits.len());
    let mut total = 0.0;
    for (row, &label) in logits.data().chunks_exact(k).zip(labels) {
        let (loss, g) = softmax_cross_entropy(row, label)?;
        total += loss as f64;
        grad.extend(g.into_iter().map(|v| v / n as f32));
    }
    Ok((total / n as f64, Tensor::new(vec![n, k], grad)?))
}

/// Logits for each matrix, computed in batches. The model must be in infer mode.
pub fn predict_logits(model: &ModelInstance<f32>, mats: &[&MfccMatrix]) -> Result<Vec<Vec<f32>>> {
    if model.mode() != Mode::Infer {
        return Err(Error::Eval("prediction needs an infer-mode model".into()));
    }
    let k = model.spec().n_classes;
    let mut out = Vec::with_capacity(mats.len());
    for chunk in mats.chunks(EVAL_BATCH) {
        let logits = model.forward(&batch_input(model.spec(), chunk)?)?;
        out.extend(logits.data().chunks_exact(k).map(<[f32]>::to_vec));
    }
    Ok(out)
}

/// Fraction of rows whose first maximal logit is the label.
pub fn accuracy_from_logits(logits: &[Vec<f32>], labels: &[Label]) -> Result<f64> {
    if logits.is_empty() || logits.len() != labels.len() {
        return Err(Error::Eval(format!(
            "{} predictions for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    let hits = logits
        .iter()
        .zip(labels)
        .filter(|(row, label)| argmax(row) == label.id())
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Accuracy of an infer-mode model on precomputed features.
pub fn evaluate_accuracy(model: &ModelInstance<f32>, samples: &[(MfccMatrix, Label)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Eval("no samples to evaluate".into()));
    }
    let mats: Vec<&MfccMatrix> = samples.iter().map(|(m, _)| m).collect();
    let labels: Vec<Label> = samples.iter().map(|(_, l)| *l).collect();
    accuracy_from_logits(&predict_logits(model, &mats)?, &labels)
}

/// Runs [`train_loop_with`] without a progress callback.
pub fn train_loop(
    model: ModelInstance<f32>,
    corpus: &Corpus,
    cfg: &TrainConfig,
    aug: &AugmentConfig,
    extractor: &MfccExtractor,
) -> Result<TrainOutcome> {
    train_loop_with(model, corpus, cfg, aug, extractor, |_| {})
}

/// SGD training with periodic validation and early stopping.
///
/// Batch `i` is drawn with replacement from the train split using the stream
/// `(rng_seed, i)`; each drawn clip is augmented with its own stream, then
/// featurized. `on_row` sees every metrics row as it is produced.
pub fn train_loop_with<F: FnMut(&MetricsRow)>(
    mut model: ModelInstance<f32>,
    corpus: &Corpus,
    cfg: &TrainConfig,
    aug: &AugmentConfig,
    extractor: &MfccExtractor,
    mut on_row: F,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    aug.validate()?;
    if model.mode() != Mode::Train {
        return Err(Error::Train("training needs a train-mode model".into()));
    }
    let train_idx = corpus.indices(Split::Train);
    let val_idx = corpus.indices(Split::Validation);
    if train_idx.is_empty() {
        return Err(Error::Train("train split is empty".into()));
    }
    if val_idx.is_empty() {
        return Err(Error::Train("validation split is empty".into()));
    }
    let val = corpus.eval_features(&val_idx, extractor, aug)?;

    let mut state = OptimizerState::default();
    let mut log = MetricsLog::default();
    let mut best: Option<(f64, usize, ModelInstance<f32>)> = None;
    let mut stale_rounds = 0;
    let mut stopped_early = false;

    for iter in 0..cfg.total_iters {
        let mut pick = rng::stream(cfg.rng_seed, BATCH_STREAM, iter as u64);
        let batch: Vec<usize> = (0..cfg.batch_size)
            .map(|_| train_idx[pick.gen_range(0..train_idx.len())])
            .collect();
        let mats = map_indices(batch.len(), |slot| {
            let draw = (iter * cfg.batch_size + slot) as u64;
            extractor.compute(&corpus.train_clip(batch[slot], draw, aug)?)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let labels: Vec<usize> = batch.iter().map(|&i| corpus.entries()[i].label.id()).collect();

        let x = batch_input(model.spec(), &mats.iter().collect::<Vec<_>>())?;
        let mut drop_rng = rng::stream(cfg.rng_seed, DROPOUT_STREAM, iter as u64);
        let (logits, trace) = model.forward_train(&x, cfg.dropout_p, &mut drop_rng)?;
        let (loss, grad) = batch_loss(&logits, &labels)?;
        if !loss.is_finite() {
            return Err(Error::Train(format!("loss diverged at iteration {iter}")));
        }
        let grads = model.backward(&trace, &grad)?;
        let lr = lr_at(iter, cfg);
        sgd_step(model.params_mut(), &grads, &mut state, lr, cfg.momentum, cfg.weight_decay)?;

        let last_iter = iter + 1 == cfg.total_iters;
        let mut row = MetricsRow {
            iter,
            lr,
            train_loss: loss,
            val_acc: None,
        };
        if (iter + 1) % cfg.eval_every == 0 || last_iter {
            let mut snapshot = model.clone();
            snapshot.set_mode(Mode::Infer)?;
            let acc = evaluate_accuracy(&snapshot, &val)?;
            row.val_acc = Some(acc);
            if best.as_ref().map_or(true, |(b, _, _)| acc > *b) {
                best = Some((acc, iter, snapshot));
                stale_rounds = 0;
            } else {
                stale_rounds += 1;
            }
        }
        on_row(&row);
        log.rows.push(row);
        if stale_rounds >= cfg.early_stop_patience {
            stopped_early = true;
            break;
        }
    }

    let (best_val_acc, best_iter, best_model) = best.expect("the last iteration always evaluates");
    Ok(TrainOutcome {
        best_checkpoint: checkpoint_bytes(&best_model)?,
        best: best_model,
        best_val_acc,
        best_iter,
        last: model,
        log,
        stopped_early,
    })
}
