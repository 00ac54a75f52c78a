use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tensor::{Result, Tensor, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Relu6,
}

impl Activation {
    #[inline]
    pub fn apply<F: Scalar>(self, x: F) -> F {
        match self {
            Activation::Relu => x.max(F::zero()),
            Activation::Relu6 => x.max(F::zero()).min(F::of(6.0)),
        }
    }

    /// Derivative, taken as 0 at the kinks.
    #[inline]
    pub fn derivative<F: Scalar>(self, x: F) -> F {
        let on = match self {
            Activation::Relu => x > F::zero(),
            Activation::Relu6 => x > F::zero() && x < F::of(6.0),
        };
        if on {
            F::one()
        } else {
            F::zero()
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Relu6 => "relu6",
        }
    }
}

pub fn activation<F: Scalar>(input: &Tensor<F>, kind: Activation) -> Tensor<F> {
    map(input, |x| kind.apply(x))
}

pub(crate) fn map<F: Scalar>(input: &Tensor<F>, f: impl Fn(F) -> F) -> Tensor<F> {
    Tensor::from_parts(input.shape().to_vec(), input.data().iter().map(|&x| f(x)).collect())
}

pub(crate) fn zip_with<F: Scalar>(
    op: &'static str,
    a: &Tensor<F>,
    b: &Tensor<F>,
    f: impl Fn(F, F) -> F,
) -> Result<Tensor<F>> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        });
    }
    let data: Vec<F> = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    let out = Tensor::from_parts(a.shape().to_vec(), data);
    out.ensure_finite(op)?;
    Ok(out)
}

/// Elementwise (Hadamard) product.
pub fn hadamard<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    zip_with("hadamard", a, b, |x, y| x * y)
}

pub fn add<F: Scalar>(a: &Tensor<F>, b: &Tensor<F>) -> Result<Tensor<F>> {
    zip_with("add", a, b, |x, y| x + y)
}

pub fn scale<F: Scalar>(a: &Tensor<F>, factor: F) -> Result<Tensor<F>> {
    let out = map(a, |x| x * factor);
    out.ensure_finite("scale")?;
    Ok(out)
}
