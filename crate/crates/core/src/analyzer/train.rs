//! Classifier training and evaluation on patch datasets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::patches::{PatchDataset, TEXTURE};
use super::AnalyzerError;
use crate::nn::{layers, sgd_step, NetParams, NetSpec, Tensor4, TrainConfig, Velocity};

/// Samples per forward pass when only predicting.
const EVAL_BATCH: usize = 1024;

#[derive(Debug, Clone, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean weighted cross-entropy over the epoch's batches.
    pub loss: f64,
    /// Training-mode (dropout on) accuracy over the epoch.
    pub train_accuracy: f64,
    pub val_balanced_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainLog {
    pub class_weights: Vec<f64>,
    pub epochs: Vec<EpochLog>,
    /// Set when the validation target was met before the last epoch.
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
#[derive(Default)]
pub struct TrainOptions<'a> {
    pub spec: NetSpec,
    pub config: TrainConfig,
    pub validation: Option<&'a PatchDataset>,
    /// Stop after the first epoch whose validation balanced accuracy
    /// reaches this value.
    pub target_balanced_accuracy: Option<f64>,
}


/// Binary confusion counts with texture as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn accuracy(&self) -> f64 {
        let n = self.tp + self.fp + self.tn + self.fn_;
        (self.tp + self.tn) as f64 / n.max(1) as f64
    }

    /// Mean of the per-class recalls.
    pub fn balanced_accuracy(&self) -> f64 {
        let tpr = self.tp as f64 / (self.tp + self.fn_).max(1) as f64;
        let tnr = self.tn as f64 / (self.tn + self.fp).max(1) as f64;
        0.5 * (tpr + tnr)
    }

    fn add(&mut self, texture_truth: bool, texture_pred: bool) {
        match (texture_truth, texture_pred) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }
}

/// Class weights proportional to inverse class frequency, scaled so a
/// balanced dataset gets weight 1 for both classes.
pub fn inverse_frequency_weights(counts: [usize; 2]) -> Vec<f64> {
    let n = (counts[0] + counts[1]) as f64;
    counts.iter().map(|&c| n / (2.0 * c.max(1) as f64)).collect()
}

/// Texture-class probability from a (N, 2, 1, 1) softmax output.
pub fn texture_probs(probs: &Tensor4<f32>) -> Vec<f64> {
    probs.data.chunks_exact(2).map(|p| p[TEXTURE] as f64).collect()
}

/// Eval-mode texture probability for every sample.
pub fn predict(params: &NetParams<f32>, data: &PatchDataset) -> Result<Vec<f64>, AnalyzerError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut out = Vec::with_capacity(data.len());
    for chunk in idx.chunks(EVAL_BATCH) {
        out.extend(texture_probs(&params.forward_eval(&data.batch(chunk))?));
    }
    Ok(out)
}

pub fn evaluate(params: &NetParams<f32>, data: &PatchDataset, threshold: f64) -> Result<Confusion, AnalyzerError> {
    let mut c = Confusion::default();
    for (p, &l) in predict(params, data)?.iter().zip(&data.labels) {
        c.add(l == TEXTURE, *p >= threshold);
    }
    Ok(c)
}

/// Train a classifier with shuffled mini-batches and momentum SGD. Class
/// weights are set from the dataset's inverse class frequencies. A final
/// batch of one sample is dropped because batchnorm needs two.
pub fn train_classifier(data: &PatchDataset, opts: &TrainOptions) -> Result<(NetParams<f32>, TrainLog), AnalyzerError> {
    let counts = data.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(AnalyzerError::SingleClass);
    }
    let mut cfg = opts.config.clone();
    cfg.class_weights = inverse_frequency_weights(counts);
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut params = NetParams::<f32>::init(&opts.spec, &mut rng)?;
    let mut velocity = Velocity::zeros_like(&params);
    let mut log = TrainLog {
        class_weights: cfg.class_weights.clone(),
        ..Default::default()
    };
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let (mut loss_sum, mut batches, mut correct, mut seen) = (0.0, 0usize, 0usize, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let x = data.batch(chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
            let (probs, cache) = params.forward_train(&x, &mut rng)?;
            let ce = layers::cross_entropy_weighted(&probs, &labels, &cfg.class_weights)?;
            if !ce.loss.is_finite() {
                return Err(AnalyzerError::Diverged { epoch });
            }
            let (grads, _) = params
                .backward(cache, &ce.grad_logits, false)
                .map_err(|_| AnalyzerError::Diverged { epoch })?;
            sgd_step(&mut params, &grads, &mut velocity, &cfg);
            loss_sum += ce.loss;
            batches += 1;
            for (p, &l) in texture_probs(&probs).iter().zip(&labels) {
                correct += usize::from((*p >= 0.5) == (l == TEXTURE));
            }
            seen += labels.len();
        }
        let val = opts
            .validation
            .map(|v| evaluate(&params, v, 0.5).map(|c| c.balanced_accuracy()))
            .transpose()?;
        let entry = EpochLog {
            epoch,
            loss: loss_sum / batches.max(1) as f64,
            train_accuracy: correct as f64 / seen.max(1) as f64,
            val_balanced_accuracy: val,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train acc {:.4} val balanced acc {}",
            entry.loss,
            entry.train_accuracy,
            val.map_or("-".to_string(), |v| format!("{v:.4}"))
        );
        log.epochs.push(entry);
        if let (Some(v), Some(target)) = (val, opts.target_balanced_accuracy) {
            if v >= target && epoch + 1 < cfg.epochs {
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok((params, log))
}
