use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::{augment, AugmentConfig};
use super::dataset::{SequenceDataset, Split};
use super::mixup::{mixup, Batch};
use super::schedule::cosine_lr;
use super::sgd::Sgd;
use super::{Result, TrainError};
use crate::model::{ModelError, ModelGraph};
use crate::params::{Mode, ParamStore, Session};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, TensorError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub base_lr: f64,
    pub weight_decay: f64,
    /// Apply weight decay directly to the weights instead of the gradient.
    pub decoupled_weight_decay: bool,
    pub momentum: f64,
    pub batch_size: usize,
    /// Dropout rate at every temporal block output during training.
    pub dropout: f64,
    pub mixup: bool,
    pub mixup_alpha: f64,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 80,
            base_lr: 0.02,
            weight_decay: 0.01,
            decoupled_weight_decay: false,
            momentum: 0.9,
            batch_size: 32,
            dropout: 0.2,
            mixup: true,
            mixup_alpha: 0.4,
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be ≥ 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        let rates = [
            self.base_lr,
            self.weight_decay,
            self.momentum,
            self.dropout,
            self.augment.flip_prob,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("rates must be finite and nonnegative");
        }
        if self.dropout >= 1.0 || self.momentum >= 1.0 || self.augment.flip_prob > 1.0 {
            return bad("dropout and momentum must be below 1, flip probability at most 1");
        }
        if self.mixup && !(self.mixup_alpha > 0.0 && self.mixup_alpha.is_finite()) {
            return Err(TrainError::NonPositiveAlpha(self.mixup_alpha));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<F> {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub best: ParamStore<F>,
}

fn stack<F: Scalar>(items: &[Tensor<F>]) -> Result<Tensor<F>> {
    let mut shape = alloc::vec![items.len()];
    shape.extend_from_slice(items[0].shape());
    let mut data = Vec::with_capacity(items.len() * items[0].len());
    for t in items {
        data.extend_from_slice(t.data());
    }
    Ok(Tensor::new(shape, data)?)
}

fn one_hot<F: Scalar>(labels: &[usize], classes: usize) -> Result<Tensor<F>> {
    Ok(Tensor::from_fn(&[labels.len(), classes], |i| {
        if labels[i / classes] == i % classes {
            F::one()
        } else {
            F::zero()
        }
    })?)
}

fn gather<F: Scalar>(b: &Batch<F>, order: &[usize]) -> Result<Batch<F>> {
    let pick = |t: &Tensor<F>| -> Result<Tensor<F>> {
        let row = t.len() / b.len();
        let mut data = Vec::with_capacity(t.len());
        for &i in order {
            data.extend_from_slice(&t.data()[i * row..][..row]);
        }
        Ok(Tensor::new(t.shape().to_vec(), data)?)
    };
    Ok(Batch {
        inputs: pick(&b.inputs)?,
        targets: pick(&b.targets)?,
        valid_len: order.iter().map(|&i| b.valid_len[i]).collect(),
    })
}

fn diverged(epoch: usize, step: usize) -> impl Fn(TrainError) -> TrainError {
    move |e| match e {
        TrainError::Tensor(TensorError::NonFinite { op }) => TrainError::Diverged {
            epoch,
            step,
            reason: format!("non-finite values in {op}"),
        },
        TrainError::NonFiniteGradient(p) => TrainError::Diverged {
            epoch,
            step,
            reason: format!("non-finite gradient for {p}"),
        },
        other => other,
    }
}

fn check_classes<F: Scalar, D: SequenceDataset<F>>(graph: &ModelGraph<F>, data: &D) -> Result<()> {
    if graph.num_classes() != data.num_classes() {
        return Err(TrainError::ClassMismatch {
            model: graph.num_classes(),
            dataset: data.num_classes(),
        });
    }
    Ok(())
}

/// Runs the epoch loop and leaves the best-validation weights in `graph`.
///
/// Epoch `e` trains at `cosine_lr(e, epochs, base_lr)` on shuffled,
/// augmented, MixUp-blended batches with soft-target cross-entropy, then
/// measures validation accuracy; the parameters after the epoch with the
/// highest accuracy (earliest on ties) are retained.
pub fn train<F: Scalar, D: SequenceDataset<F>>(
    graph: &mut ModelGraph<F>,
    cfg: &TrainConfig,
    data: &D,
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    check_classes(graph, data)?;
    let n = data.len(Split::Train);
    if n == 0 {
        return Err(TrainError::EmptySplit(Split::Train));
    }
    let classes = data.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sgd = Sgd::new(cfg.weight_decay, cfg.momentum, cfg.decoupled_weight_decay);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ParamStore<F>)> = None;
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        let lr = cosine_lr(epoch, cfg.epochs, cfg.base_lr)?;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut steps = 0;
        for (step, idx) in order.chunks(cfg.batch_size).enumerate() {
            let on_err = diverged(epoch, step);
            let mut frames = Vec::with_capacity(idx.len());
            let mut labels = Vec::with_capacity(idx.len());
            let mut valid_len = Vec::with_capacity(idx.len());
            for &i in idx {
                let (seq, label) = data.sample(Split::Train, i)?;
                let a = augment(&seq, &cfg.augment, &mut rng, true)?;
                frames.push(a.frames);
                labels.push(label);
                valid_len.push(a.valid_len);
            }
            let mut batch = Batch {
                inputs: stack(&frames)?,
                targets: one_hot(&labels, classes)?,
                valid_len,
            };
            if cfg.mixup {
                let mut partner: Vec<usize> = (0..batch.len()).collect();
                partner.shuffle(&mut rng);
                let other = gather(&batch, &partner)?;
                batch = mixup(&batch, &other, cfg.mixup_alpha, &mut rng)?.0;
            }
            let pass_seed = rng.random::<u64>();
            let (loss, grads, updates) = {
                let mut s = Session::new(&graph.store, Mode::Train, pass_seed).with_dropout(cfg.dropout);
                let x = s.input(batch.inputs)?;
                let z = graph
                    .logits(&mut s, x, &batch.valid_len)
                    .map_err(TrainError::from)
                    .map_err(&on_err)?;
                let l = s
                    .tape
                    .soft_cross_entropy(z, &batch.targets)
                    .map_err(TrainError::from)
                    .map_err(&on_err)?;
                let loss = s.tape.value(l)?.data()[0].as_f64();
                s.backward(l).map_err(TrainError::from).map_err(&on_err)?;
                let grads: Vec<_> = graph.store.param_ids().map(|id| s.param_grad(id).cloned()).collect();
                (loss, grads, s.into_updates())
            };
            if !loss.is_finite() {
                return Err(on_err(TensorError::NonFinite { op: "loss" }.into()));
            }
            graph.store.apply_updates(updates)?;
            sgd.step(&mut graph.store, &grads, lr).map_err(&on_err)?;
            loss_sum += loss;
            steps += 1;
        }
        let val_acc = evaluate(graph, data, Split::Val, &cfg.augment)?;
        history.push(EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / steps as f64,
            val_acc,
        });
        if best.as_ref().is_none_or(|b| val_acc > b.1) {
            best = Some((epoch, val_acc, graph.store.clone()));
        }
    }
    let (best_epoch, best_val_acc, best) = best.expect("at least one epoch");
    graph.store = best.clone();
    Ok(TrainOutcome {
        history,
        best_epoch,
        best_val_acc,
        best,
    })
}

/// Top-1 accuracy on a split: center crop, full length, no dropout, running
/// batch-norm statistics.
pub fn evaluate<F: Scalar, D: SequenceDataset<F>>(
    graph: &ModelGraph<F>,
    data: &D,
    split: Split,
    aug: &AugmentConfig,
) -> Result<f64> {
    check_classes(graph, data)?;
    let n = data.len(split);
    if n == 0 {
        return Err(TrainError::EmptySplit(split));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut correct = 0usize;
    let indices: Vec<usize> = (0..n).collect();
    for idx in indices.chunks(32) {
        let mut frames = Vec::with_capacity(idx.len());
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            let (seq, label) = data.sample(split, i)?;
            frames.push(augment(&seq, aug, &mut rng, false)?.frames);
            labels.push(label);
        }
        let t = frames[0].shape()[1];
        let x = stack(&frames)?;
        let probs = graph
            .predict(&x, &alloc::vec![t; idx.len()])
            .map_err(|e: ModelError| TrainError::from(e))?;
        let k = probs.shape()[1];
        for (row, &label) in probs.data().chunks(k).zip(&labels) {
            let mut arg = 0;
            for j in 1..k {
                if row[j] > row[arg] {
                    arg = j;
                }
            }
            correct += (arg == label) as usize;
        }
    }
    Ok(correct as f64 / n as f64)
}
