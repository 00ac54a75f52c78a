#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempconv_core::ops::{ConvSpec, Padding};
use tempconv_core::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| r.random_range(-1.0..1.0)).unwrap()
}

pub fn uniform32(shape: &[usize], r: &mut ChaCha8Rng) -> Tensor<f32> {
    Tensor::from_fn(shape, |_| r.random_range(-1.0f32..1.0)).unwrap()
}

/// Direct summation over every output position and kernel tap, with padding
/// handled by bounds checks on the unpadded input.
pub fn conv_oracle(x: &Tensor<f64>, w: &Tensor<f64>, b: Option<&Tensor<f64>>, spec: &ConvSpec) -> Tensor<f64> {
    let r = spec.kernel.len();
    let n = x.shape()[0];
    let ins: Vec<usize> = x.shape()[2..].to_vec();
    let (lo, hi): (Vec<usize>, Vec<usize>) = match &spec.padding {
        Padding::CausalLeft => (vec![(spec.kernel[0] - 1) * spec.dilation[0]], vec![0]),
        Padding::Symmetric(p) => (p.clone(), p.clone()),
    };
    let outs: Vec<usize> = (0..r)
        .map(|a| (ins[a] + lo[a] + hi[a] - spec.dilation[a] * (spec.kernel[a] - 1) - 1) / spec.stride[a] + 1)
        .collect();
    let cin_g = spec.in_channels / spec.groups;
    let cout_g = spec.out_channels / spec.groups;
    let ext = |v: &[usize], a: usize| v.get(a).copied().unwrap_or(1);
    let (o0, o1, o2) = (ext(&outs, 0), ext(&outs, 1), ext(&outs, 2));
    let (k0, k1, k2) = (ext(&spec.kernel, 0), ext(&spec.kernel, 1), ext(&spec.kernel, 2));
    let (i0, i1, i2) = (ext(&ins, 0), ext(&ins, 1), ext(&ins, 2));
    let mut y = vec![0.0; n * spec.out_channels * o0 * o1 * o2];
    for bi in 0..n {
        for co in 0..spec.out_channels {
            let g = co / cout_g;
            for p0 in 0..o0 {
                for p1 in 0..o1 {
                    for p2 in 0..o2 {
                        let mut acc = b.map_or(0.0, |b| b.data()[co]);
                        for ci in 0..cin_g {
                            let cx = g * cin_g + ci;
                            for q0 in 0..k0 {
                                for q1 in 0..k1 {
                                    for q2 in 0..k2 {
                                        let pos = [(p0, q0, 0), (p1, q1, 1), (p2, q2, 2)];
                                        let mut idx = [0usize; 3];
                                        let mut inside = true;
                                        for (a, &(p, q, ax)) in pos.iter().enumerate().take(r) {
                                            let v =
                                                (p * spec.stride[ax] + q * spec.dilation[ax]) as i64 - lo[ax] as i64;
                                            if v < 0 || v >= ins[ax] as i64 {
                                                inside = false;
                                            }
                                            idx[a] = v.max(0) as usize;
                                        }
                                        if !inside {
                                            continue;
                                        }
                                        let xi =
                                            (((bi * spec.in_channels + cx) * i0 + idx[0]) * i1 + idx[1]) * i2 + idx[2];
                                        let wi = (((co * cin_g + ci) * k0 + q0) * k1 + q1) * k2 + q2;
                                        acc += x.data()[xi] * w.data()[wi];
                                    }
                                }
                            }
                        }
                        y[(((bi * spec.out_channels + co) * o0 + p0) * o1 + p1) * o2 + p2] = acc;
                    }
                }
            }
        }
    }
    let mut shape = vec![n, spec.out_channels];
    shape.extend_from_slice(&outs);
    Tensor::new(shape, y).unwrap()
}

/// `max |a - b| / max(max |b|, tiny)`.
pub fn normwise_rel(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    let scale = b.data().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.max_abs_diff(b).unwrap() / scale
}

/// A random convolution of the kinds the block zoo uses: full, grouped,
/// depth-wise and point-wise causal 1-D with dilation up to 128, plus the
/// strided 2-D and 3-D convolutions of the extractor and stem.
pub fn random_zoo_conv(r: &mut ChaCha8Rng) -> (ConvSpec, Vec<usize>) {
    let pick = r.random_range(0..10);
    match pick {
        0..=6 => {
            let d = 1usize << r.random_range(0..8);
            let c = r.random_range(1..=6) * 2;
            let t = r.random_range(1..=2 * d + 20);
            let spec = match pick {
                0 | 1 => ConvSpec::causal1d(c, r.random_range(1..=8), r.random_range(1..=4) * 2 - 1, d, 1),
                2 => ConvSpec::causal1d(c, c, 3, d, 2),
                3 | 4 => ConvSpec::depthwise1d(c, [3, 7][r.random_range(0..2)], d),
                _ => ConvSpec::pointwise1d(c, r.random_range(1..=8)),
            };
            let n = r.random_range(1..=2);
            (spec.clone(), vec![n, spec.in_channels, t])
        }
        7 | 8 => {
            let c = r.random_range(1..=4) * 2;
            let spec = if pick == 7 {
                ConvSpec::same2d(c, c, 3, r.random_range(1..=2), c)
            } else {
                ConvSpec::same2d(c, r.random_range(1..=6), 1, 1, 1)
            };
            let h = r.random_range(2..=9);
            (spec.clone(), vec![1, c, h, r.random_range(2..=9)])
        }
        _ => {
            let spec = ConvSpec {
                in_channels: 1,
                out_channels: r.random_range(1..=4),
                kernel: vec![3, 5, 5],
                stride: vec![1, 2, 2],
                dilation: vec![1, 1, 1],
                groups: 1,
                padding: Padding::Symmetric(vec![1, 2, 2]),
            };
            let t = r.random_range(3..=6);
            (
                spec.clone(),
                vec![1, 1, t, 2 * r.random_range(1..=5), 2 * r.random_range(1..=5)],
            )
        }
    }
}
