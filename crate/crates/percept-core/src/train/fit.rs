//! The mini-batch training loop and chunked evaluation.

use std::io::{self, Write};

use crate::nn::Network;
use crate::rng::Prng;
use crate::tensor::Tensor;

use super::loss::{cross_entropy_sum, per_sample_ce};
use super::{
    fused_ce_grad, metrics_from_confusion, one_hot_rows, AdamHyper, AdamState, ConfusionMatrix,
    Dataset, EarlyStopper, StopDecision, StopReason, TrainError,
};

#[derive(Debug, Clone, Copy)]
pub struct FitConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamHyper,
    /// Early stopping patience; `None` disables early stopping.
    pub patience: Option<usize>,
    pub min_delta: f32,
}

impl FitConfig {
    pub fn new(epochs: usize, batch_size: usize) -> Self {
        FitConfig {
            epochs,
            batch_size,
            adam: AdamHyper::default(),
            patience: None,
            min_delta: 0.0,
        }
    }

    pub fn with_patience(mut self, patience: usize) -> Self {
        self.patience = Some(patience);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitOutcome {
    /// Ran all configured epochs; final parameters are the last epoch's.
    Completed,
    /// Validation loss stalled; parameters restored to the best epoch.
    EarlyStopped {
        stopped_epoch: usize,
        best_epoch: usize,
    },
    /// A loss went NaN. Training halted immediately; if early stopping was
    /// active the best snapshot was restored. A warning outcome, not an
    /// error — partial artifacts remain writable.
    NanLoss { epoch: usize },
}

#[derive(Debug, Clone)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub outcome: FitOutcome,
    /// Total optimizer steps taken (batches processed).
    pub steps: u64,
}

impl History {
    /// Fixed-point CSV: `epoch,train_loss,train_acc,val_loss,val_acc`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "epoch,train_loss,train_acc,val_loss,val_acc")?;
        for e in &self.epochs {
            writeln!(
                w,
                "{},{:.6},{:.6},{:.6},{:.6}",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc
            )?;
        }
        Ok(())
    }
}

/// Batch transform applied after gathering and before the forward pass —
/// image augmentation plugs in here. Must be deterministic in the prng.
pub type AugmentFn<'a> = dyn FnMut(&Tensor, &mut Prng) -> Result<Tensor, TrainError> + 'a;

pub struct EvalReport {
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    /// Support-weighted F1 over the evaluated samples.
    pub weighted_f1: f64,
}

/// Inference-mode evaluation over `data` in deterministic chunks. Chunking
/// never changes the result: each sample's forward pass is independent of
/// its batch, and per-sample losses are reduced in data order regardless of
/// where the chunk boundaries fall.
pub fn evaluate(net: &Network, data: &Dataset, batch_size: usize) -> Result<EvalReport, TrainError> {
    if batch_size == 0 {
        return Err(TrainError::BatchSizeZero);
    }
    let n = data.len();
    let indices: Vec<usize> = (0..n).collect();
    let mut losses: Vec<f64> = Vec::with_capacity(n);
    let mut predictions: Vec<u32> = Vec::with_capacity(n);
    for chunk in indices.chunks(batch_size) {
        let xb = data.x().gather_first_axis(chunk)?;
        let yb: Vec<u32> = chunk.iter().map(|&i| data.labels()[i]).collect();
        let probs = net.forward_infer(&xb)?;
        losses.extend(per_sample_ce(&probs, &yb)?);
        predictions.extend(probs.argmax_rows()?.iter().map(|&p| p as u32));
    }
    let loss_sum: f64 = losses.iter().sum();
    let confusion = ConfusionMatrix::from_pairs(data.labels(), &predictions, data.classes())?;
    let metrics = metrics_from_confusion(&confusion)?;
    Ok(EvalReport {
        loss: loss_sum / n as f64,
        accuracy: metrics.accuracy,
        confusion,
        weighted_f1: metrics.weighted_f1,
    })
}

/// Train `net` with mini-batch Adam under softmax + cross-entropy.
///
/// Per epoch: deterministic reshuffle, forward/backward/step per batch,
/// then a full inference-mode validation pass. A trailing batch of one
/// sample is dropped (batch statistics are undefined for it) unless it is
/// the whole dataset. NaN losses stop training with a warning outcome
/// rather than an error.
pub fn fit(
    net: &mut Network,
    train_data: &Dataset,
    val_data: &Dataset,
    cfg: &FitConfig,
    prng: &mut Prng,
    mut augment: Option<&mut AugmentFn<'_>>,
) -> Result<History, TrainError> {
    if cfg.batch_size == 0 {
        return Err(TrainError::BatchSizeZero);
    }
    let trainable: Vec<&Tensor> = net.params().iter().flat_map(|p| p.trainable()).collect();
    let mut adam = AdamState::new(&trainable, cfg.adam);
    drop(trainable);

    let mut stopper = cfg
        .patience
        .map(|p| EarlyStopper::new(p, cfg.min_delta, net.params().to_vec()));
    let mut history = History {
        epochs: Vec::new(),
        outcome: FitOutcome::Completed,
        steps: 0,
    };

    let n = train_data.len();
    let classes = train_data.classes();
    'epochs: for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        prng.shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() == 1 && cfg.batch_size > 1 && n > 1 {
                continue;
            }
            let mut xb = train_data.x().gather_first_axis(chunk)?;
            let yb: Vec<u32> = chunk.iter().map(|&i| train_data.labels()[i]).collect();
            if let Some(hook) = augment.as_deref_mut() {
                xb = hook(&xb, prng)?;
            }

            let (probs, cache) = net.forward_train(&xb, prng)?;
            let batch_sum = cross_entropy_sum(&probs, &yb)?;
            if batch_sum.is_nan() {
                if let Some(s) = stopper.as_ref() {
                    net.params_mut().clone_from_slice(s.best());
                }
                history.outcome = FitOutcome::NanLoss { epoch };
                history.steps = adam.step_count();
                return Ok(history);
            }
            loss_sum += batch_sum;
            correct += probs
                .argmax_rows()?
                .iter()
                .zip(&yb)
                .filter(|(&p, &y)| p == y as usize)
                .count();
            seen += chunk.len();

            let one_hot = one_hot_rows(&yb, classes)?;
            let dlogits = fused_ce_grad(&probs, &one_hot)?;
            let (grads, _) = net.backward_fused_ce(&cache, &dlogits)?;
            let grads_flat: Vec<Tensor> = grads.into_iter().flat_map(|g| g.tensors).collect();
            let params_flat: Vec<&mut Tensor> = net
                .params_mut()
                .iter_mut()
                .flat_map(|p| p.trainable_mut())
                .collect();
            adam.step(params_flat, &grads_flat)?;
        }

        let eval = evaluate(net, val_data, cfg.batch_size)?;
        history.epochs.push(EpochStats {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_acc: correct as f64 / seen as f64,
            val_loss: eval.loss,
            val_acc: eval.accuracy,
        });

        if let Some(s) = stopper.as_mut() {
            let snapshot = net.params().to_vec();
            match s.observe(epoch, eval.loss as f32, &snapshot) {
                StopDecision::Continue => {}
                StopDecision::Stop(reason) => {
                    net.params_mut().clone_from_slice(s.best());
                    history.outcome = match reason {
                        StopReason::Patience => FitOutcome::EarlyStopped {
                            stopped_epoch: epoch,
                            best_epoch: s.best_epoch(),
                        },
                        StopReason::NanLoss => FitOutcome::NanLoss { epoch },
                    };
                    break 'epochs;
                }
            }
        }
    }
    history.steps = adam.step_count();
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerSpec;

    /// Two linearly separable blobs in 4 dimensions.
    fn blob_dataset(prng: &mut Prng, per_class: usize) -> Dataset {
        let n = per_class * 2;
        let mut data = Vec::with_capacity(n * 4);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = (i % 2) as u32;
            let center = if class == 0 { -1.0 } else { 1.0 };
            for _ in 0..4 {
                data.push(center + prng.uniform(-0.3, 0.3));
            }
            labels.push(class);
        }
        Dataset::new(Tensor::from_vec([n, 4], data).unwrap(), labels, 2).unwrap()
    }

    fn dense_softmax_net(prng: &mut Prng) -> Network {
        Network::build(
            vec![4],
            vec![
                LayerSpec::Dense { units: 8 },
                LayerSpec::ReLU,
                LayerSpec::Dense { units: 2 },
                LayerSpec::Softmax,
            ],
            prng,
        )
        .unwrap()
    }

    #[test]
    fn whole_dataset_batch_takes_exactly_one_step_per_epoch() {
        let mut prng = Prng::new(1);
        let data = blob_dataset(&mut prng, 8);
        let mut net = dense_softmax_net(&mut prng);
        let cfg = FitConfig::new(1, data.len());
        let history = fit(&mut net, &data, &data, &cfg, &mut prng, None).unwrap();
        assert_eq!(history.steps, 1);
        assert_eq!(history.epochs.len(), 1);
        assert_eq!(history.outcome, FitOutcome::Completed);
    }

    #[test]
    fn training_is_bit_identical_under_the_same_seed() {
        let run = || {
            let mut prng = Prng::new(42);
            let data = blob_dataset(&mut prng, 10);
            let mut net = dense_softmax_net(&mut prng);
            let cfg = FitConfig::new(4, 5);
            let history = fit(&mut net, &data, &data, &cfg, &mut prng, None).unwrap();
            let params: Vec<Vec<f32>> = net
                .named_params()
                .into_iter()
                .map(|(_, t)| t.data().to_vec())
                .collect();
            (history, params)
        };
        let (h1, p1) = run();
        let (h2, p2) = run();
        assert_eq!(p1, p2);
        assert_eq!(h1.epochs, h2.epochs);
        assert_eq!(h1.steps, h2.steps);
    }

    #[test]
    fn loss_decreases_on_easy_data_for_most_seeds() {
        let mut good = 0;
        for seed in 0..10 {
            let mut prng = Prng::new(seed);
            let data = blob_dataset(&mut prng, 10);
            let mut net = dense_softmax_net(&mut prng);
            let cfg = FitConfig::new(5, 4);
            let history = fit(&mut net, &data, &data, &cfg, &mut prng, None).unwrap();
            let non_increasing = history
                .epochs
                .windows(2)
                .all(|w| w[1].train_loss <= w[0].train_loss + 1e-12);
            if non_increasing {
                good += 1;
            }
        }
        assert!(good >= 9, "loss decreased in only {good}/10 seeds");
    }

    #[test]
    fn early_stop_restores_the_best_epoch_parameters() {
        // min_delta so large that only the first epoch can ever "improve":
        // epoch 2 must strike, and patience 0 stops on the first strike.
        let train_one = || {
            let mut prng = Prng::new(7);
            let data = blob_dataset(&mut prng, 10);
            let mut net = dense_softmax_net(&mut prng);
            let cfg = FitConfig::new(1, 5);
            fit(&mut net, &data, &data, &cfg, &mut prng, None).unwrap();
            net.named_params()
                .into_iter()
                .map(|(_, t)| t.data().to_vec())
                .collect::<Vec<_>>()
        };
        let after_one_epoch = train_one();

        let mut prng = Prng::new(7);
        let data = blob_dataset(&mut prng, 10);
        let mut net = dense_softmax_net(&mut prng);
        let mut cfg = FitConfig::new(10, 5).with_patience(0);
        cfg.min_delta = 1e9;
        let history = fit(&mut net, &data, &data, &cfg, &mut prng, None).unwrap();
        assert_eq!(
            history.outcome,
            FitOutcome::EarlyStopped {
                stopped_epoch: 2,
                best_epoch: 1
            }
        );
        assert_eq!(history.epochs.len(), 2);
        let restored: Vec<Vec<f32>> = net
            .named_params()
            .into_iter()
            .map(|(_, t)| t.data().to_vec())
            .collect();
        assert_eq!(restored, after_one_epoch);
    }

    #[test]
    fn augment_hook_runs_per_batch_and_stays_deterministic() {
        let run = || {
            let mut prng = Prng::new(3);
            let data = blob_dataset(&mut prng, 6);
            let mut net = dense_softmax_net(&mut prng);
            let cfg = FitConfig::new(2, 4);
            let mut batches_seen = 0usize;
            let mut hook = |batch: &Tensor, prng: &mut Prng| -> Result<Tensor, TrainError> {
                batches_seen += 1;
                let noisy: Vec<f32> = batch
                    .data()
                    .iter()
                    .map(|&v| v + prng.uniform(-0.01, 0.01))
                    .collect();
                Ok(Tensor::from_vec(batch.dims().to_vec(), noisy)?)
            };
            let history = fit(&mut net, &data, &data, &cfg, &mut prng, Some(&mut hook)).unwrap();
            let params: Vec<Vec<f32>> = net
                .named_params()
                .into_iter()
                .map(|(_, t)| t.data().to_vec())
                .collect();
            (history.steps, batches_seen, params)
        };
        let (steps1, batches1, p1) = run();
        let (_, _, p2) = run();
        assert_eq!(steps1 as usize, batches1);
        assert_eq!(p1, p2);
    }

    #[test]
    fn evaluate_is_invariant_to_chunk_size() {
        let mut prng = Prng::new(8);
        let data = blob_dataset(&mut prng, 12);
        let net = dense_softmax_net(&mut prng);
        let full = evaluate(&net, &data, data.len()).unwrap();
        let chunked = evaluate(&net, &data, 7).unwrap();
        assert_eq!(full.loss, chunked.loss);
        assert_eq!(full.accuracy, chunked.accuracy);
        assert_eq!(full.confusion, chunked.confusion);
    }

    #[test]
    fn evaluate_reports_a_consistent_confusion_matrix() {
        let mut prng = Prng::new(9);
        let data = blob_dataset(&mut prng, 9);
        let net = dense_softmax_net(&mut prng);
        let report = evaluate(&net, &data, 4).unwrap();
        assert_eq!(report.confusion.total(), data.len() as u64);
        assert_eq!(
            report.accuracy,
            report.confusion.trace() as f64 / data.len() as f64
        );
        assert!(report.loss.is_finite());
    }

    #[test]
    fn history_csv_uses_fixed_point_six_decimals() {
        let history = History {
            epochs: vec![EpochStats {
                epoch: 1,
                train_loss: 0.5,
                train_acc: 0.25,
                val_loss: 1.0 / 3.0,
                val_acc: 1.0,
            }],
            outcome: FitOutcome::Completed,
            steps: 3,
        };
        let mut buf = Vec::new();
        history.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "epoch,train_loss,train_acc,val_loss,val_acc\n1,0.500000,0.250000,0.333333,1.000000\n"
        );
    }

    #[test]
    fn zero_batch_size_is_rejected() {
        let mut prng = Prng::new(1);
        let data = blob_dataset(&mut prng, 4);
        let mut net = dense_softmax_net(&mut prng);
        let cfg = FitConfig::new(1, 0);
        assert!(matches!(
            fit(&mut net, &data, &data, &cfg, &mut prng, None).unwrap_err(),
            TrainError::BatchSizeZero
        ));
    }
}
