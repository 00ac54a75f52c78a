//! Self-checks shared by the test suites and the command-line tool: causal
//! masking of the temporal stack, and agreement of analytic gradients with
//! finite differences.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{grad_check_store, GradCheckOptions, GradCheckReport};
use crate::blocks::{BlockKind, BlockSpec, Classifier, LayerFactory, TemporalBlock};
use crate::model::{build_model, ModelConfig, Result};
use crate::params::{Mode, ParamStore};
use crate::tensor::Tensor;

fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Result<Tensor<f64>> {
    Ok(Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))?)
}

/// One TCN-only model and a cut frame: inputs after `cut` are replaced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalityCase {
    pub kind: BlockKind,
    pub stages: usize,
    pub channels: usize,
    pub frames: usize,
    pub cut: usize,
    pub seed: u64,
}

impl CausalityCase {
    /// Draws a case over every block kind, 1–6 stages and sequences long
    /// enough for the deepest dilation to reach past the start.
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let kind = BlockKind::ALL[rng.random_range(0..BlockKind::ALL.len())];
        let stages = rng.random_range(1..=6);
        let frames = rng.random_range(2..=(1usize << stages) + 24);
        CausalityCase {
            kind,
            stages,
            channels: 2 * rng.random_range(1..=4),
            frames,
            cut: rng.random_range(0..frames - 1),
            seed: rng.random(),
        }
    }

    pub fn config(&self) -> ModelConfig {
        let mut cfg = ModelConfig::tcn_only(self.kind, self.stages, self.channels);
        cfg.classifier.num_classes = 5;
        cfg
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalityOutcome {
    pub case: CausalityCase,
    /// Frames `<= cut` of the TCN output whose bits changed.
    pub changed_frames: Vec<usize>,
    /// Whether class probabilities pooled over the first `cut + 1` frames changed.
    pub pooled_changed: bool,
}

impl CausalityOutcome {
    pub fn passed(&self) -> bool {
        self.changed_frames.is_empty() && !self.pooled_changed
    }
}

/// Runs the model in evaluation mode on an input and on a copy whose frames
/// after `cut` are redrawn, and compares outputs up to `cut` bit for bit.
pub fn check_causality(case: &CausalityCase) -> Result<CausalityOutcome> {
    let graph = build_model::<f64>(&case.config(), case.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed ^ 0x5eed);
    let (c, t) = (case.channels, case.frames);
    let x = random_tensor(&[1, c, t], &mut rng)?;
    let mut future = x.clone().into_data();
    for ch in 0..c {
        for v in &mut future[ch * t + case.cut + 1..(ch + 1) * t] {
            *v = rng.random_range(-10.0..10.0);
        }
    }
    let x2 = Tensor::new(alloc::vec![1, c, t], future)?;
    let y1 = graph.eval_features(&x)?;
    let y2 = graph.eval_features(&x2)?;
    let oc = y1.shape()[1];
    let changed_frames = (0..=case.cut)
        .filter(|&i| (0..oc).any(|ch| y1.data()[ch * t + i].to_bits() != y2.data()[ch * t + i].to_bits()))
        .collect();
    let p1 = graph.predict(&x, &[case.cut + 1])?;
    let p2 = graph.predict(&x2, &[case.cut + 1])?;
    Ok(CausalityOutcome {
        case: *case,
        changed_frames,
        pooled_changed: !p1.bit_eq(&p2),
    })
}

/// A gradient check with the names of the checked parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientProbe {
    pub label: String,
    pub param_names: Vec<String>,
    pub report: GradCheckReport,
}

impl GradientProbe {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

fn probe(label: String, store: &ParamStore<f64>, report: GradCheckReport) -> GradientProbe {
    GradientProbe {
        label,
        param_names: store.param_ids().map(|id| store.param_name(id).into()).collect(),
        report,
    }
}

/// Gradient check of one temporal block (4 channels, dilation 2, batch of
/// two 7-frame sequences) in training mode, loss `Σ y ⊙ r` for a fixed
/// random `r`.
pub fn block_gradient_check(kind: BlockKind, opts: &GradCheckOptions) -> Result<GradientProbe> {
    let (c, t) = (4, 7);
    let mut store = ParamStore::new();
    let block = {
        let mut f = LayerFactory::new(&mut store, opts.seed);
        TemporalBlock::new(&mut f, kind.name(), BlockSpec::new(kind, 3), c, 3, 2, 0.0)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let x = random_tensor(&[2, c, t], &mut rng)?;
    let r = random_tensor(&[2, c, t], &mut rng)?;
    let report = grad_check_store(
        &store,
        Mode::Train,
        |s| {
            let xv = s.input(x.clone())?;
            let y = block.forward(s, xv)?;
            let w = s.tape.mul_const(y, r.clone())?;
            s.tape.sum(w)
        },
        opts,
    )?;
    Ok(probe(format!("block {kind}"), &store, report))
}

/// Gradient check of the classifier head: masked pooling over unequal
/// valid lengths, linear map and soft-target cross-entropy.
pub fn classifier_gradient_check(opts: &GradCheckOptions) -> Result<GradientProbe> {
    let (c, t, k) = (6, 5, 7);
    let mut store = ParamStore::new();
    let head = {
        let mut f = LayerFactory::new(&mut store, opts.seed);
        Classifier::new(&mut f, "classifier", c, k)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(2));
    let feats = random_tensor(&[2, c, t], &mut rng)?;
    let raw: Vec<f64> = (0..2 * k).map(|_| rng.random_range(0.0..1.0)).collect();
    let targets = Tensor::new(
        alloc::vec![2, k],
        raw.chunks(k)
            .flat_map(|row| {
                let s: f64 = row.iter().sum();
                row.iter().map(move |v| v / s)
            })
            .collect(),
    )?;
    let report = grad_check_store(
        &store,
        Mode::Train,
        |s| {
            let fv = s.input(feats.clone())?;
            let z = head.logits(s, fv, &[t, t - 2])?;
            s.tape.soft_cross_entropy(z, &targets)
        },
        opts,
    )?;
    Ok(probe(String::from("classifier"), &store, report))
}

/// Gradient check of a whole model on a random input, loss = cross-entropy
/// against random one-hot targets.
pub fn model_gradient_check(
    config: &ModelConfig,
    input_shape: &[usize],
    opts: &GradCheckOptions,
) -> Result<GradientProbe> {
    let graph = build_model::<f64>(config, opts.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(3));
    let x = random_tensor(input_shape, &mut rng)?;
    let n = input_shape[0];
    let k = graph.num_classes();
    let t = input_shape[2];
    let mut onehot = alloc::vec![0.0; n * k];
    for i in 0..n {
        onehot[i * k + rng.random_range(0..k)] = 1.0;
    }
    let targets = Tensor::new(alloc::vec![n, k], onehot)?;
    let valid = alloc::vec![t; n];
    let report = grad_check_store(
        &graph.store,
        Mode::Train,
        |s| {
            let xv = s.input(x.clone())?;
            let z = graph.logits(s, xv, &valid).map_err(|e| match e {
                crate::model::ModelError::Tensor(t) => t,
                other => crate::tensor::TensorError::InvalidSpec(format!("{other}")),
            })?;
            s.tape.soft_cross_entropy(z, &targets)
        },
        opts,
    )?;
    Ok(probe(
        format!("model {:016x}", graph.meta.config_hash),
        &graph.store,
        report,
    ))
}
