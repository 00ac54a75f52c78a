mod common;

use common::{conv_oracle, normwise_rel, random_zoo_conv, rng, uniform, uniform32};
use proptest::prelude::*;
use rand::Rng;
use tempconv_core::ops::{self, ConvSpec};
use tempconv_core::{Tensor, TensorError};

#[test]
fn zoo_convolutions_match_nested_loop_oracle() {
    let mut r = rng(7);
    for case in 0..200 {
        let (spec, xshape) = random_zoo_conv(&mut r);
        let x = uniform(&xshape, &mut r);
        let w = uniform(&spec.weight_shape(), &mut r);
        let b = r.random_bool(0.5).then(|| uniform(&[spec.out_channels], &mut r));
        let got = ops::conv(&x, &w, b.as_ref(), &spec).unwrap();
        let want = conv_oracle(&x, &w, b.as_ref(), &spec);
        assert_eq!(got.shape(), want.shape(), "case {case}: {spec:?}");
        let err = normwise_rel(&got, &want);
        assert!(err <= 1e-12, "case {case}: {spec:?} rel err {err}");
    }
}

#[test]
fn single_precision_conv_tracks_the_oracle() {
    let mut r = rng(8);
    for case in 0..50 {
        let (spec, xshape) = random_zoo_conv(&mut r);
        let x = uniform32(&xshape, &mut r);
        let w = uniform32(&spec.weight_shape(), &mut r);
        let got: Tensor<f64> = ops::conv(&x, &w, None, &spec).unwrap().cast();
        let want = conv_oracle(&x.cast(), &w.cast(), None, &spec);
        let err = normwise_rel(&got, &want);
        assert!(err <= 1e-5, "case {case}: {spec:?} rel err {err}");
    }
}

#[test]
fn dilation_wider_than_sequence_sees_only_the_present() {
    let spec = ConvSpec::causal1d(2, 3, 3, 128, 1);
    let mut r = rng(1);
    let x = uniform(&[1, 2, 100], &mut r);
    let w = uniform(&spec.weight_shape(), &mut r);
    let y = ops::conv(&x, &w, None, &spec).unwrap();
    let mut last_tap = Tensor::zeros(&spec.weight_shape()).unwrap();
    for co in 0..3 {
        for ci in 0..2 {
            let i = (co * 2 + ci) * 3 + 2;
            last_tap = {
                let mut d = last_tap.into_data();
                d[i] = w.data()[i];
                Tensor::new(spec.weight_shape(), d).unwrap()
            };
        }
    }
    let only_present = ops::conv(&x, &last_tap, None, &spec).unwrap();
    assert!(y.bit_eq(&only_present));
}

#[test]
fn conv_rejects_bad_shapes() {
    let spec = ConvSpec::causal1d(4, 4, 3, 1, 2);
    let w = Tensor::<f64>::zeros(&spec.weight_shape()).unwrap();
    let x = Tensor::<f64>::zeros(&[1, 3, 5]).unwrap();
    assert!(matches!(
        ops::conv(&x, &w, None, &spec),
        Err(TensorError::ShapeMismatch { .. })
    ));
    let bad = ConvSpec::causal1d(4, 3, 3, 1, 2);
    assert!(matches!(
        bad.validate(),
        Err(TensorError::Divisibility { .. }) | Err(TensorError::InvalidSpec(_))
    ));
    let nan = Tensor::<f64>::new(vec![1, 4, 1], vec![0.0, f64::NAN, 0.0, 0.0]);
    assert!(matches!(nan, Err(TensorError::NonFinite { .. })));
}

#[test]
fn linear_matches_dot_products_at_classifier_size() {
    let mut r = rng(3);
    let x32 = uniform32(&[4, 512], &mut r);
    let w32 = uniform32(&[500, 512], &mut r);
    let b32 = uniform32(&[500], &mut r);
    let y = ops::linear(&x32, &w32, Some(&b32)).unwrap();
    assert_eq!(y.shape(), &[4, 500]);
    for n in 0..4 {
        for o in 0..500 {
            let mut acc = b32.data()[o] as f64;
            for i in 0..512 {
                acc += x32.data()[n * 512 + i] as f64 * w32.data()[o * 512 + i] as f64;
            }
            let got = y.data()[n * 500 + o] as f64;
            assert!(
                (got - acc).abs() <= 1e-5 * acc.abs().max(1.0),
                "({n},{o}) {got} vs {acc}"
            );
        }
    }
}

#[test]
fn batch_norm_training_statistics() {
    let mut r = rng(4);
    let (n, c, t) = (3, 2, 7);
    let x = uniform(&[n, c, t], &mut r);
    let gamma = Tensor::new(vec![c], vec![1.5, -0.5]).unwrap();
    let beta = Tensor::new(vec![c], vec![0.25, 2.0]).unwrap();
    let rm = Tensor::zeros(&[c]).unwrap();
    let rv = Tensor::ones(&[c]).unwrap();
    let out = ops::batch_norm(&x, &gamma, &beta, &rm, &rv, ops::BN_EPS, true).unwrap();
    let (new_m, new_v) = out.running.unwrap();
    for ch in 0..c {
        let vals: Vec<f64> = (0..n)
            .flat_map(|b| (0..t).map(move |i| (b, i)))
            .map(|(b, i)| x.at(&[b, ch, i]))
            .collect();
        let m = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64;
        let unbiased = var * vals.len() as f64 / (vals.len() - 1) as f64;
        for b in 0..n {
            for i in 0..t {
                let want = gamma.data()[ch] * (x.at(&[b, ch, i]) - m) / (var + ops::BN_EPS).sqrt() + beta.data()[ch];
                assert!((out.output.at(&[b, ch, i]) - want).abs() < 1e-12);
            }
        }
        assert!((new_m.data()[ch] - 0.1 * m).abs() < 1e-12);
        assert!((new_v.data()[ch] - (0.9 + 0.1 * unbiased)).abs() < 1e-12);
    }
    let eval = ops::batch_norm(&x, &gamma, &beta, &new_m, &new_v, ops::BN_EPS, false).unwrap();
    assert!(eval.running.is_none());
    let want =
        gamma.data()[0] * (x.data()[0] - new_m.data()[0]) / (new_v.data()[0] + ops::BN_EPS).sqrt() + beta.data()[0];
    assert!((eval.output.data()[0] - want).abs() < 1e-12);
}

#[test]
fn masked_mean_uses_prefix_only() {
    let x = Tensor::from_fn(&[2, 1, 4], |i| i as f64).unwrap();
    let m = ops::masked_time_mean(&x, &[2, 4]).unwrap();
    assert_eq!(m.data(), &[0.5, 5.5]);
    assert!(ops::masked_time_mean(&x, &[0, 4]).is_err());
    assert!(ops::masked_time_mean(&x, &[5, 4]).is_err());
}

#[test]
fn softmax_is_stable_for_huge_logits() {
    let x = Tensor::new(vec![1, 3], vec![1000.0, 1000.0, -1000.0]).unwrap();
    let p = ops::softmax(&x, 1).unwrap();
    assert!((p.data()[0] - 0.5f64).abs() < 1e-15 && p.data()[2] == 0.0);
    let lp = ops::log_softmax(&x, 1).unwrap();
    assert!((lp.data()[0] + std::f64::consts::LN_2).abs() < 1e-12);
}

fn causal_case() -> impl Strategy<Value = (usize, usize, usize, usize, usize, u64)> {
    (1usize..=4, 1usize..=3, 0u32..=7, 2usize..40, 0usize..40, any::<u64>())
        .prop_map(|(c, k2, dpow, t, cut, seed)| (c * 2, 2 * k2 - 1, 1usize << dpow, t, cut % t, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn causal_conv_ignores_the_future((c, k, d, t, cut, seed) in causal_case(), groups in prop::sample::select(vec![1usize, 2])) {
        let spec = ConvSpec::causal1d(c, c, k, d, groups);
        let mut r = rng(seed);
        let x = uniform(&[1, c, t], &mut r);
        let w = uniform(&spec.weight_shape(), &mut r);
        let mut x2 = x.clone().into_data();
        for ch in 0..c {
            for i in cut + 1..t {
                x2[ch * t + i] += r.random_range(1.0..5.0);
            }
        }
        let x2 = Tensor::new(vec![1, c, t], x2).unwrap();
        let y1 = ops::conv(&x, &w, None, &spec).unwrap();
        let y2 = ops::conv(&x2, &w, None, &spec).unwrap();
        for ch in 0..c {
            for i in 0..=cut {
                prop_assert_eq!(y1.data()[ch * t + i].to_bits(), y2.data()[ch * t + i].to_bits());
            }
        }
    }

    #[test]
    fn conv_is_linear_in_the_input(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut r = rng(seed);
        let (spec, shape) = random_zoo_conv(&mut r);
        let x = uniform(&shape, &mut r);
        let z = uniform(&shape, &mut r);
        let w = uniform(&spec.weight_shape(), &mut r);
        let combo = Tensor::new(shape.clone(), x.data().iter().zip(z.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let lhs = ops::conv(&combo, &w, None, &spec).unwrap();
        let yx = ops::conv(&x, &w, None, &spec).unwrap();
        let yz = ops::conv(&z, &w, None, &spec).unwrap();
        let rhs = Tensor::new(lhs.shape().to_vec(), yx.data().iter().zip(yz.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn depthwise_equals_per_channel_convs(c in 1usize..6, k in prop::sample::select(vec![3usize, 7]), dpow in 0u32..5, t in 1usize..30, seed in any::<u64>()) {
        let d = 1 << dpow;
        let spec = ConvSpec::depthwise1d(c, k, d);
        let mut r = rng(seed);
        let x = uniform(&[2, c, t], &mut r);
        let w = uniform(&spec.weight_shape(), &mut r);
        let y = ops::conv(&x, &w, None, &spec).unwrap();
        let single = ConvSpec::causal1d(1, 1, k, d, 1);
        for ch in 0..c {
            let xc = ops::narrow(&x, 1, ch, 1).unwrap();
            let wc = ops::narrow(&w, 0, ch, 1).unwrap();
            let yc = ops::conv(&xc, &wc, None, &single).unwrap();
            prop_assert!(ops::narrow(&y, 1, ch, 1).unwrap().bit_eq(&yc));
        }
    }

    #[test]
    fn softmax_rows_are_distributions(rows in 1usize..5, cols in 1usize..40, seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut r = rng(seed);
        let x = Tensor::from_fn(&[rows, cols], |_| r.random_range(-20.0..20.0)).unwrap();
        let p = ops::softmax(&x, 1).unwrap();
        for row in p.data().chunks(cols) {
            prop_assert!(row.iter().all(|&v| v > 0.0 && v <= 1.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let shifted = Tensor::new(vec![rows, cols], x.data().iter().map(|v| v + shift).collect()).unwrap();
        prop_assert!(ops::softmax(&shifted, 1).unwrap().max_abs_diff(&p).unwrap() < 1e-12);
    }

    #[test]
    fn kernels_are_deterministic(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (spec, shape) = random_zoo_conv(&mut r);
        let x = uniform32(&shape, &mut r);
        let w = uniform32(&spec.weight_shape(), &mut r);
        let a = ops::conv(&x, &w, None, &spec).unwrap();
        let b = ops::conv(&x, &w, None, &spec).unwrap();
        prop_assert!(a.bit_eq(&b));
    }
}
