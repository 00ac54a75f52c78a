//! N-d grouped, strided, dilated convolution over `[N, C, *spatial]` inputs
//! with spatial rank 1, 2 or 3.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::{numel, Result, Tensor, TensorError};

/// How the borders of the input are padded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// `(kernel - 1) * dilation` zeros on the left of a 1-D input, none on the right.
    CausalLeft,
    /// The given number of zeros on both sides of each spatial axis.
    Symmetric(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub dilation: Vec<usize>,
    pub groups: usize,
    pub padding: Padding,
}

impl ConvSpec {
    /// 1-D causal convolution with stride 1.
    pub fn causal1d(in_channels: usize, out_channels: usize, kernel: usize, dilation: usize, groups: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: vec![kernel],
            stride: vec![1],
            dilation: vec![dilation],
            groups,
            padding: Padding::CausalLeft,
        }
    }

    /// Depth-wise causal 1-D convolution.
    pub fn depthwise1d(channels: usize, kernel: usize, dilation: usize) -> Self {
        Self::causal1d(channels, channels, kernel, dilation, channels)
    }

    /// Point-wise (kernel 1) 1-D convolution.
    pub fn pointwise1d(in_channels: usize, out_channels: usize) -> Self {
        Self::causal1d(in_channels, out_channels, 1, 1, 1)
    }

    /// Square 2-D convolution with symmetric `kernel / 2` padding.
    pub fn same2d(in_channels: usize, out_channels: usize, kernel: usize, stride: usize, groups: usize) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel: vec![kernel, kernel],
            stride: vec![stride, stride],
            dilation: vec![1, 1],
            groups,
            padding: Padding::Symmetric(vec![kernel / 2, kernel / 2]),
        }
    }

    pub fn rank(&self) -> usize {
        self.kernel.len()
    }

    pub fn is_depthwise(&self) -> bool {
        self.groups > 1 && self.groups == self.in_channels && self.groups == self.out_channels
    }

    pub fn is_pointwise(&self) -> bool {
        self.kernel.iter().all(|&k| k == 1) && self.groups == 1
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rank();
        if !(1..=3).contains(&r) {
            return Err(TensorError::InvalidSpec(format!("kernel rank {r} not in 1..=3")));
        }
        if self.stride.len() != r || self.dilation.len() != r {
            return Err(TensorError::InvalidSpec(
                "stride/dilation rank differs from kernel rank".into(),
            ));
        }
        let positive = |v: &[usize]| v.iter().all(|&x| x > 0);
        if !positive(&self.kernel) || !positive(&self.stride) || !positive(&self.dilation) {
            return Err(TensorError::InvalidSpec(
                "kernel, stride and dilation must be positive".into(),
            ));
        }
        if self.in_channels == 0 || self.out_channels == 0 || self.groups == 0 {
            return Err(TensorError::InvalidSpec("channel counts must be positive".into()));
        }
        if !self.in_channels.is_multiple_of(self.groups) || !self.out_channels.is_multiple_of(self.groups) {
            return Err(TensorError::InvalidSpec(format!(
                "groups {} must divide in_channels {} and out_channels {}",
                self.groups, self.in_channels, self.out_channels
            )));
        }
        match &self.padding {
            Padding::CausalLeft if r != 1 => return Err(TensorError::CausalRank { rank: r }),
            Padding::Symmetric(p) if p.len() != r => {
                return Err(TensorError::InvalidSpec("padding rank differs from kernel rank".into()))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        let mut s = vec![self.out_channels, self.in_channels / self.groups];
        s.extend_from_slice(&self.kernel);
        s
    }

    pub fn weight_len(&self) -> usize {
        numel(&self.weight_shape())
    }

    /// Leading/trailing zero padding per spatial axis.
    pub fn pads(&self) -> Vec<(usize, usize)> {
        match &self.padding {
            Padding::CausalLeft => vec![((self.kernel[0] - 1) * self.dilation[0], 0)],
            Padding::Symmetric(p) => p.iter().map(|&p| (p, p)).collect(),
        }
    }

    /// Output spatial extent for the given input extent.
    pub fn output_spatial(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        if input.len() != self.rank() {
            return Err(TensorError::ShapeMismatch {
                op: "conv",
                detail: format!("spatial rank {} vs kernel rank {}", input.len(), self.rank()),
            });
        }
        let mut out = Vec::with_capacity(input.len());
        for (i, &n) in input.iter().enumerate() {
            let (lo, hi) = self.pads()[i];
            let span = self.dilation[i] * (self.kernel[i] - 1) + 1;
            let padded = n + lo + hi;
            if padded < span {
                return Err(TensorError::ShapeMismatch {
                    op: "conv",
                    detail: format!("axis {i}: input {n} smaller than kernel span {span}"),
                });
            }
            out.push((padded - span) / self.stride[i] + 1);
        }
        Ok(out)
    }

    /// Multiply-accumulates per sample for the given output extent.
    pub fn macs(&self, output_spatial: &[usize]) -> u64 {
        let per_output = (self.in_channels / self.groups) as u64 * numel(&self.kernel) as u64;
        self.out_channels as u64 * numel(output_spatial) as u64 * per_output
    }
}

/// Convolution geometry normalised to three spatial axes.
struct Geometry {
    batch: usize,
    cin: usize,
    cout: usize,
    cin_g: usize,
    cout_g: usize,
    inp: [usize; 3],
    out: [usize; 3],
    k: [usize; 3],
    s: [usize; 3],
    d: [usize; 3],
    pad: [usize; 3],
}

impl Geometry {
    fn new(spec: &ConvSpec, input_shape: &[usize], weight_shape: &[usize]) -> Result<Self> {
        spec.validate()?;
        let r = spec.rank();
        if input_shape.len() != r + 2 {
            return Err(TensorError::ShapeMismatch {
                op: "conv",
                detail: format!("input rank {} but kernel rank {r} needs {}", input_shape.len(), r + 2),
            });
        }
        if input_shape[1] != spec.in_channels {
            return Err(TensorError::ShapeMismatch {
                op: "conv",
                detail: format!("input channels {} vs spec {}", input_shape[1], spec.in_channels),
            });
        }
        if weight_shape != spec.weight_shape().as_slice() {
            return Err(TensorError::ShapeMismatch {
                op: "conv",
                detail: format!("weight {:?} vs expected {:?}", weight_shape, spec.weight_shape()),
            });
        }
        let out_sp = spec.output_spatial(&input_shape[2..])?;
        let pads = spec.pads();
        let lift = |v: &[usize], fill: usize| {
            let mut a = [fill; 3];
            a[3 - r..].copy_from_slice(v);
            a
        };
        let lo: Vec<usize> = pads.iter().map(|p| p.0).collect();
        Ok(Geometry {
            batch: input_shape[0],
            cin: spec.in_channels,
            cout: spec.out_channels,
            cin_g: spec.in_channels / spec.groups,
            cout_g: spec.out_channels / spec.groups,
            inp: lift(&input_shape[2..], 1),
            out: lift(&out_sp, 1),
            k: lift(&spec.kernel, 1),
            s: lift(&spec.stride, 1),
            d: lift(&spec.dilation, 1),
            pad: lift(&lo, 0),
        })
    }

    fn in_len(&self) -> usize {
        self.inp.iter().product()
    }

    fn out_len(&self) -> usize {
        self.out.iter().product()
    }

    fn taps(&self) -> usize {
        self.k.iter().product()
    }

    /// Input index along `axis` for output `o` and tap `k`, if inside the input.
    #[inline]
    fn src(&self, axis: usize, o: usize, k: usize) -> Option<usize> {
        let pos = (o * self.s[axis] + k * self.d[axis]) as isize - self.pad[axis] as isize;
        (pos >= 0 && (pos as usize) < self.inp[axis]).then_some(pos as usize)
    }

    /// Range of innermost output positions whose tap `k` lands inside the input,
    /// and the input offset of the first one.
    #[inline]
    fn inner_range(&self, k: usize) -> (usize, usize) {
        let s = self.s[2] as isize;
        let off = (k * self.d[2]) as isize - self.pad[2] as isize;
        let n_in = self.inp[2] as isize;
        let lo = if off >= 0 { 0 } else { (-off + s - 1) / s };
        let hi = if n_in - off > 0 { (n_in - off + s - 1) / s } else { 0 };
        let hi = hi.min(self.out[2] as isize);
        (lo as usize, hi.max(lo) as usize)
    }

    /// Calls `f(out_row_offset, in_row_offset, tap_index, lo, hi, kw)` for each
    /// valid (tap, outer output row) pair.
    #[inline]
    fn for_each_row(&self, mut f: impl FnMut(usize, usize, usize, usize, usize, usize)) {
        let mut tap = 0;
        for kd in 0..self.k[0] {
            for kh in 0..self.k[1] {
                for kw in 0..self.k[2] {
                    let (lo, hi) = self.inner_range(kw);
                    if lo < hi {
                        for od in 0..self.out[0] {
                            let Some(id) = self.src(0, od, kd) else { continue };
                            for oh in 0..self.out[1] {
                                let Some(ih) = self.src(1, oh, kh) else { continue };
                                let orow = (od * self.out[1] + oh) * self.out[2];
                                let irow = (id * self.inp[1] + ih) * self.inp[2];
                                f(orow, irow, tap, lo, hi, kw);
                            }
                        }
                    }
                    tap += 1;
                }
            }
        }
    }

    #[inline]
    fn in_pos(&self, ow: usize, kw: usize) -> usize {
        ow * self.s[2] + kw * self.d[2] - self.pad[2]
    }
}

/// Forward convolution.
pub fn conv<F: Scalar>(
    input: &Tensor<F>,
    weight: &Tensor<F>,
    bias: Option<&Tensor<F>>,
    spec: &ConvSpec,
) -> Result<Tensor<F>> {
    let g = Geometry::new(spec, input.shape(), weight.shape())?;
    if let Some(b) = bias {
        if b.shape() != [spec.out_channels] {
            return Err(TensorError::ShapeMismatch {
                op: "conv",
                detail: format!("bias {:?} vs [{}]", b.shape(), spec.out_channels),
            });
        }
    }
    input.ensure_finite("conv")?;
    weight.ensure_finite("conv")?;
    let (in_len, out_len, taps) = (g.in_len(), g.out_len(), g.taps());
    let x = input.data();
    let w = weight.data();
    let mut out = vec![F::zero(); g.batch * g.cout * out_len];
    for n in 0..g.batch {
        for oc in 0..g.cout {
            let grp = oc / g.cout_g;
            let o = &mut out[(n * g.cout + oc) * out_len..][..out_len];
            if let Some(b) = bias {
                o.fill(b.data()[oc]);
            }
            for icg in 0..g.cin_g {
                let ic = grp * g.cin_g + icg;
                let xi = &x[(n * g.cin + ic) * in_len..][..in_len];
                let wk = &w[(oc * g.cin_g + icg) * taps..][..taps];
                g.for_each_row(|orow, irow, tap, lo, hi, kw| {
                    let wv = wk[tap];
                    for ow in lo..hi {
                        o[orow + ow] += wv * xi[irow + g.in_pos(ow, kw)];
                    }
                });
            }
        }
    }
    let mut shape = vec![g.batch, g.cout];
    shape.extend_from_slice(&g.out[3 - spec.rank()..]);
    let out = Tensor::from_parts(shape, out);
    out.ensure_finite("conv")?;
    Ok(out)
}

/// Gradients of a convolution with respect to its input, weight and bias.
pub(crate) struct ConvGrads<F> {
    pub input: Option<Tensor<F>>,
    pub weight: Option<Tensor<F>>,
    pub bias: Option<Tensor<F>>,
}

pub(crate) fn conv_backward<F: Scalar>(
    input: &Tensor<F>,
    weight: &Tensor<F>,
    spec: &ConvSpec,
    grad_out: &Tensor<F>,
    need: [bool; 3],
) -> Result<ConvGrads<F>> {
    let g = Geometry::new(spec, input.shape(), weight.shape())?;
    let (in_len, out_len, taps) = (g.in_len(), g.out_len(), g.taps());
    let x = input.data();
    let w = weight.data();
    let go = grad_out.data();
    let mut gx = need[0].then(|| vec![F::zero(); x.len()]);
    let mut gw = need[1].then(|| vec![F::zero(); w.len()]);
    for n in 0..g.batch {
        for oc in 0..g.cout {
            let grp = oc / g.cout_g;
            let gor = &go[(n * g.cout + oc) * out_len..][..out_len];
            for icg in 0..g.cin_g {
                let ic = grp * g.cin_g + icg;
                let base_in = (n * g.cin + ic) * in_len;
                let base_w = (oc * g.cin_g + icg) * taps;
                if let Some(gx) = gx.as_mut() {
                    let gxi = &mut gx[base_in..][..in_len];
                    let wk = &w[base_w..][..taps];
                    g.for_each_row(|orow, irow, tap, lo, hi, kw| {
                        let wv = wk[tap];
                        for ow in lo..hi {
                            gxi[irow + g.in_pos(ow, kw)] += wv * gor[orow + ow];
                        }
                    });
                }
                if let Some(gw) = gw.as_mut() {
                    let xi = &x[base_in..][..in_len];
                    let gwk = &mut gw[base_w..][..taps];
                    g.for_each_row(|orow, irow, tap, lo, hi, kw| {
                        let mut acc = F::zero();
                        for ow in lo..hi {
                            acc += gor[orow + ow] * xi[irow + g.in_pos(ow, kw)];
                        }
                        gwk[tap] += acc;
                    });
                }
            }
        }
    }
    let gb = need[2].then(|| {
        let mut b = vec![F::zero(); g.cout];
        for n in 0..g.batch {
            for (oc, bv) in b.iter_mut().enumerate() {
                for &v in &go[(n * g.cout + oc) * out_len..][..out_len] {
                    *bv += v;
                }
            }
        }
        Tensor::from_parts(vec![g.cout], b)
    });
    Ok(ConvGrads {
        input: gx.map(|d| Tensor::from_parts(input.shape().to_vec(), d)),
        weight: gw.map(|d| Tensor::from_parts(weight.shape().to_vec(), d)),
        bias: gb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn identity_kernel() {
        let spec = ConvSpec::causal1d(1, 1, 1, 1, 1);
        let y = conv(&t(&[1, 1, 3], &[1., 2., 3.]), &t(&[1, 1, 1], &[1.]), None, &spec).unwrap();
        assert_eq!(y.data(), &[1., 2., 3.]);
    }

    #[test]
    fn causal_prefix_sums() {
        let spec = ConvSpec::causal1d(1, 1, 3, 1, 1);
        let (a, b, c) = (0.5, -2.0, 4.25);
        let y = conv(&t(&[1, 1, 3], &[a, b, c]), &t(&[1, 1, 3], &[1., 1., 1.]), None, &spec).unwrap();
        assert_eq!(y.data(), &[a, a + b, a + b + c]);
    }

    #[test]
    fn causal_preserves_length_at_any_dilation() {
        for d in [1, 2, 4, 8, 128] {
            let spec = ConvSpec::depthwise1d(2, 3, d);
            assert_eq!(spec.output_spatial(&[29]).unwrap(), vec![29]);
        }
    }

    #[test]
    fn causal_rejected_for_2d() {
        let mut spec = ConvSpec::same2d(1, 1, 3, 1, 1);
        spec.padding = Padding::CausalLeft;
        assert_eq!(spec.validate(), Err(TensorError::CausalRank { rank: 2 }));
    }

    #[test]
    fn groups_must_divide_channels() {
        let spec = ConvSpec::causal1d(4, 6, 3, 1, 4);
        assert!(matches!(spec.validate(), Err(TensorError::InvalidSpec(_))));
    }

    #[test]
    fn weight_shape_mismatch_is_an_error() {
        let spec = ConvSpec::causal1d(2, 2, 3, 1, 1);
        let x = Tensor::<f32>::zeros(&[1, 2, 5]).unwrap();
        let w = Tensor::<f32>::zeros(&[2, 2, 2]).unwrap();
        assert!(matches!(
            conv(&x, &w, None, &spec),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn strided_2d_output_size() {
        let spec = ConvSpec {
            in_channels: 1,
            out_channels: 32,
            kernel: vec![3, 5, 5],
            stride: vec![1, 2, 2],
            dilation: vec![1, 1, 1],
            groups: 1,
            padding: Padding::Symmetric(vec![1, 2, 2]),
        };
        assert_eq!(spec.output_spatial(&[29, 88, 88]).unwrap(), vec![29, 44, 44]);
        assert_eq!(spec.weight_shape(), vec![32, 1, 3, 5, 5]);
    }

    #[test]
    fn one_conv_macs_closed_form() {
        let spec = ConvSpec::causal1d(512, 512, 3, 1, 1);
        assert_eq!(spec.macs(&[29]), 22_806_528);
    }
}
