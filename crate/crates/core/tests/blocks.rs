mod common;

use common::{rng, uniform, uniform32};
use rand::Rng;
use tempconv_core::blocks::{
    BlockKind, BlockSpec, Classifier, Expansion, Extractor, ExtractorSpec, LayerFactory, Stem, StemSpec, TemporalBlock,
    TemporalBody,
};
use tempconv_core::params::{Mode, ParamStore, Session};
use tempconv_core::Tensor;

fn eval<F: tempconv_core::Scalar>(
    store: &ParamStore<F>,
    x: &Tensor<F>,
    f: impl FnOnce(&mut Session<'_, F>, tempconv_core::Var) -> tempconv_core::Var,
) -> Tensor<F> {
    let mut s = Session::eval(store);
    let xv = s.input(x.clone()).unwrap();
    let y = f(&mut s, xv);
    s.tape.value(y).unwrap().clone()
}

fn block(kind: BlockKind, c: usize, d: usize, seed: u64) -> (ParamStore<f64>, TemporalBlock) {
    let mut store = ParamStore::new();
    let b = {
        let mut f = LayerFactory::new(&mut store, seed);
        TemporalBlock::new(&mut f, "b", BlockSpec::new(kind, 3), c, 3, d, 0.2).unwrap()
    };
    (store, b)
}

#[test]
fn stem_maps_reference_clip_to_half_resolution() {
    let mut store = ParamStore::<f32>::new();
    let stem = Stem::new(&mut LayerFactory::new(&mut store, 0), "stem", StemSpec::default()).unwrap();
    let x = uniform32(&[1, 1, 29, 88, 88], &mut rng(1));
    let y = eval(&store, &x, |s, v| stem.forward(s, v).unwrap());
    assert_eq!(y.shape(), &[1, 32, 29, 44, 44]);
    let zero = eval(&store, &Tensor::zeros(&[1, 1, 29, 88, 88]).unwrap(), |s, v| {
        stem.forward(s, v).unwrap()
    });
    assert!(zero.data().iter().all(|&v| v == 0.0));
    assert_eq!(stem.param_count(), 32 * 75 + 64);
}

#[test]
fn stem_frame_perturbation_stays_within_one_frame() {
    let mut store = ParamStore::<f64>::new();
    let stem = Stem::new(&mut LayerFactory::new(&mut store, 2), "stem", StemSpec::default()).unwrap();
    let mut r = rng(2);
    let (t, hw) = (9, 12);
    let x = uniform(&[1, 1, t, hw, hw], &mut r);
    let base = eval(&store, &x, |s, v| stem.forward(s, v).unwrap());
    for frame in [0, 4, t - 1] {
        let mut d = x.clone().into_data();
        for v in &mut d[frame * hw * hw..(frame + 1) * hw * hw] {
            *v += r.random_range(1.0..2.0);
        }
        let y = eval(&store, &Tensor::new(vec![1, 1, t, hw, hw], d).unwrap(), |s, v| {
            stem.forward(s, v).unwrap()
        });
        let plane = (hw / 2) * (hw / 2);
        for c in 0..32 {
            for ot in 0..t {
                let range = (c * t + ot) * plane..(c * t + ot + 1) * plane;
                let same = base.data()[range.clone()] == y.data()[range];
                assert_eq!(
                    same,
                    ot + 1 < frame || ot > frame + 1,
                    "frame {frame} out {ot} channel {c}"
                );
            }
        }
    }
}

#[test]
fn stem_rejects_clips_it_cannot_cover() {
    let spec = StemSpec::default();
    assert!(spec.output_extent(2, 88, 88).is_err());
    assert!(spec.output_extent(29, 87, 88).is_err());
    assert_eq!(spec.output_extent(29, 88, 88).unwrap(), [29, 44, 44]);
}

fn small_extractor() -> (ParamStore<f64>, Extractor) {
    let mut store = ParamStore::new();
    let spec = ExtractorSpec {
        widths: vec![4, 6],
        blocks_per_stage: 2,
        expansion: 2,
        out_dim: 5,
    };
    let e = Extractor::new(&mut LayerFactory::new(&mut store, 3), "ex", spec, 3).unwrap();
    (store, e)
}

#[test]
fn extractor_processes_frames_independently() {
    let (store, ex) = small_extractor();
    let mut r = rng(4);
    let (t, hw) = (5, 8);
    let x = uniform(&[2, 3, t, hw, hw], &mut r);
    let y = eval(&store, &x, |s, v| ex.forward(s, v).unwrap());
    assert_eq!(y.shape(), &[2, 5, t]);
    // Reversing the frames reverses the output; changing one frame changes one column.
    let perm: Vec<usize> = (0..t).rev().collect();
    let xp = Tensor::from_fn(&[2, 3, t, hw, hw], |i| {
        let (n, rest) = (i / (3 * t * hw * hw), i % (3 * t * hw * hw));
        let (c, rest) = (rest / (t * hw * hw), rest % (t * hw * hw));
        let (tt, pix) = (rest / (hw * hw), rest % (hw * hw));
        x.data()[((n * 3 + c) * t + perm[tt]) * hw * hw + pix]
    })
    .unwrap();
    let yp = eval(&store, &xp, |s, v| ex.forward(s, v).unwrap());
    for n in 0..2 {
        for d in 0..5 {
            for (tt, &src) in perm.iter().enumerate() {
                assert_eq!(yp.at(&[n, d, tt]).to_bits(), y.at(&[n, d, src]).to_bits());
            }
        }
    }
    let mut d = x.clone().into_data();
    d[2 * hw * hw] += 3.0;
    let y2 = eval(&store, &Tensor::new(x.shape().to_vec(), d).unwrap(), |s, v| {
        ex.forward(s, v).unwrap()
    });
    for tt in 0..t {
        let same = (0..5).all(|c| y.at(&[0, c, tt]) == y2.at(&[0, c, tt]));
        assert_eq!(same, tt != 2);
    }
}

#[test]
fn extractor_parameter_count_matches_closed_form() {
    let (store, ex) = small_extractor();
    assert_eq!(ex.param_count(), ex.spec.closed_form_params(3));
    assert_eq!(store.num_params(), ex.param_count());
    let mut s = ParamStore::<f32>::new();
    let full = Extractor::new(&mut LayerFactory::new(&mut s, 0), "ex", ExtractorSpec::default(), 32).unwrap();
    assert_eq!(full.param_count(), 412_608);
    assert_eq!(full.spec.closed_form_params(32), 412_608);
}

#[test]
fn zeroed_body_makes_every_block_the_identity() {
    let mut r = rng(5);
    for kind in BlockKind::ALL {
        let (mut store, b) = block(kind, 4, 2, 6);
        for id in b.params() {
            let z = Tensor::zeros(store.param(id).shape()).unwrap();
            store.set_param(id, z).unwrap();
        }
        let x = uniform(&[2, 4, 9], &mut r);
        let y = eval(&store, &x, |s, v| b.forward(s, v).unwrap());
        assert!(y.bit_eq(&x), "{kind}");
        let mut s = Session::new(&store, Mode::Train, 1);
        let xv = s.input(x.clone()).unwrap();
        let yv = b.forward(&mut s, xv).unwrap();
        assert!(s.tape.value(yv).unwrap().bit_eq(&x), "{kind} train");
    }
}

#[test]
fn block_parameter_counts_agree_three_ways() {
    for kind in BlockKind::ALL {
        for c in [4, 8, 12, 64, 512] {
            let spec = BlockSpec::new(kind, 3);
            let mut store = ParamStore::<f32>::new();
            let b = TemporalBlock::new(&mut LayerFactory::new(&mut store, 0), "b", spec, c, 3, 1, 0.0).unwrap();
            let from_layers: u64 = b.layers().iter().map(|l| l.param_count()).sum();
            assert_eq!(b.param_count(), from_layers, "{kind} {c}");
            assert_eq!(store.num_params(), from_layers, "{kind} {c}");
            assert_eq!(
                TemporalBlock::closed_form_params(&spec, c, 3).unwrap(),
                from_layers,
                "{kind} {c}"
            );
            assert_eq!(
                b.macs(29).unwrap(),
                29 * TemporalBlock::closed_form_macs_per_step(&spec, c, 3).unwrap(),
                "{kind} {c}"
            );
        }
    }
}

#[test]
fn baseline_block_matches_hand_count() {
    // Two full k=3 convs with bias and two batch norms.
    let c = 512u64;
    let spec = BlockSpec::new(BlockKind::BaselineTcn, 3);
    assert_eq!(
        TemporalBlock::closed_form_params(&spec, 512, 3).unwrap(),
        2 * (3 * c * c + c) + 4 * c
    );
    assert_eq!(
        TemporalBlock::closed_form_macs_per_step(&spec, 512, 3).unwrap(),
        2 * 3 * c * c
    );
}

#[test]
fn fractional_expansion_needs_divisible_width() {
    let spec = BlockSpec::new(BlockKind::FusedMb, 3);
    assert_eq!(spec.expansion, Expansion::new(7, 2));
    assert_eq!(spec.expanded(512).unwrap(), 1792);
    let mut store = ParamStore::<f32>::new();
    assert!(TemporalBlock::new(&mut LayerFactory::new(&mut store, 0), "b", spec, 5, 3, 1, 0.0).is_err());
    let even = BlockSpec::new(BlockKind::StarV, 3).with_dw_kernel(4);
    assert!(even.validate(8).is_err());
}

#[test]
fn lookback_matches_kernel_taps() {
    let spec = BlockSpec::new(BlockKind::StarV, 3);
    assert_eq!(TemporalBlock::temporal_kernels(&spec, 3), vec![7, 7]);
    assert_eq!(TemporalBlock::lookback(&spec, 3, 4), 48);
    let cib = BlockSpec::new(BlockKind::Cib, 3);
    assert_eq!(TemporalBlock::lookback(&cib, 3, 1), 6);
    let base = BlockSpec::new(BlockKind::BaselineTcn, 3);
    assert_eq!(TemporalBlock::lookback(&base, 3, 8), 32);
}

fn swap_branches(store: &mut ParamStore<f64>, b: &TemporalBlock) {
    let TemporalBody::Star(sb) = &b.body else {
        panic!("not a star block")
    };
    for (p, q) in sb.f1.params().into_iter().zip(sb.f2.params()) {
        let (tp, tq) = (store.param(p).clone(), store.param(q).clone());
        store.set_param(p, tq).unwrap();
        store.set_param(q, tp).unwrap();
    }
}

#[test]
fn symmetric_star_mixers_ignore_branch_order() {
    let x = uniform(&[1, 8, 11], &mut rng(7));
    for (kind, symmetric) in [
        (BlockKind::StarI, true),
        (BlockKind::StarII, true),
        (BlockKind::StarV, false),
    ] {
        let (mut store, b) = block(kind, 8, 1, 8);
        let before = eval(&store, &x, |s, v| b.forward(s, v).unwrap());
        swap_branches(&mut store, &b);
        let after = eval(&store, &x, |s, v| b.forward(s, v).unwrap());
        if symmetric {
            assert!(after.max_abs_diff(&before).unwrap() < 1e-12, "{kind}");
        } else {
            assert!(after.max_abs_diff(&before).unwrap() > 1e-6, "{kind}");
        }
    }
}

#[test]
fn dropout_is_inactive_at_evaluation_and_seeded_in_training() {
    let (store, b) = block(BlockKind::StarV, 8, 2, 9);
    let x = uniform(&[2, 8, 10], &mut rng(9));
    let run = |mode, seed| {
        let mut s = Session::new(&store, mode, seed);
        let xv = s.input(x.clone()).unwrap();
        let y = b.forward(&mut s, xv).unwrap();
        s.tape.value(y).unwrap().clone()
    };
    assert!(run(Mode::Eval, 1).bit_eq(&run(Mode::Eval, 2)));
    assert!(run(Mode::Train, 1).bit_eq(&run(Mode::Train, 1)));
    assert!(!run(Mode::Train, 1).bit_eq(&run(Mode::Train, 2)));
}

fn head(c: usize, k: usize) -> (ParamStore<f64>, Classifier) {
    let mut store = ParamStore::new();
    let h = Classifier::new(&mut LayerFactory::new(&mut store, 10), "classifier", c, k).unwrap();
    (store, h)
}

#[test]
fn zero_weight_classifier_is_uniform() {
    let (mut store, h) = head(512, 500);
    for id in h.params() {
        let z = Tensor::zeros(store.param(id).shape()).unwrap();
        store.set_param(id, z).unwrap();
    }
    let x = uniform(&[2, 512, 6], &mut rng(11));
    let p = eval(&store, &x, |s, v| h.forward(s, v, &[6, 3]).unwrap());
    assert_eq!(p.shape(), &[2, 500]);
    assert!(p.data().iter().all(|&v| (v - 1.0 / 500.0).abs() < 1e-15));
}

#[test]
fn classifier_pooling_properties() {
    let (store, h) = head(6, 4);
    let mut r = rng(12);
    let t = 5;
    let x = uniform(&[1, 6, t], &mut r);
    let full = eval(&store, &x, |s, v| h.forward(s, v, &[t]).unwrap());
    let mean = Tensor::from_fn(&[1, 6, 1], |c| {
        (0..t).map(|i| x.data()[c * t + i]).sum::<f64>() / t as f64
    })
    .unwrap();
    let single = eval(&store, &mean, |s, v| h.forward(s, v, &[1]).unwrap());
    assert!(full.max_abs_diff(&single).unwrap() < 1e-12);
    // Repeating every frame twice leaves the pooled mean unchanged.
    let doubled = Tensor::from_fn(&[1, 6, 2 * t], |i| x.data()[(i / (2 * t)) * t + (i % (2 * t)) / 2]).unwrap();
    let twice = eval(&store, &doubled, |s, v| h.forward(s, v, &[2 * t]).unwrap());
    assert!(full.max_abs_diff(&twice).unwrap() < 1e-12);
    // Frames past the valid length are ignored.
    let mut d = x.clone().into_data();
    d[t - 1] = 100.0;
    let masked = eval(&store, &Tensor::new(vec![1, 6, t], d).unwrap(), |s, v| {
        h.forward(s, v, &[t - 1]).unwrap()
    });
    let clean = eval(&store, &x, |s, v| h.forward(s, v, &[t - 1]).unwrap());
    assert!(masked.bit_eq(&clean));
}

#[test]
fn block_kind_names_round_trip() {
    for kind in BlockKind::ALL {
        assert_eq!(kind.name().parse::<BlockKind>().unwrap(), kind);
        assert_eq!(kind.to_string(), kind.name());
    }
    assert_eq!(
        "Inverted-Residual".parse::<BlockKind>().unwrap(),
        BlockKind::InvertedResidual
    );
    assert!("star9".parse::<BlockKind>().is_err());
}
