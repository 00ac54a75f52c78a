use alloc::vec::Vec;

use super::{Result, TrainError};
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One plain SGD update `w ← w − lr·(g + wd·w)`.
pub fn sgd_step<F: Scalar>(param: &mut Tensor<F>, grad: &Tensor<F>, lr: f64, weight_decay: f64) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(crate::tensor::TensorError::ShapeMismatch {
            op: "sgd_step",
            detail: alloc::format!("param {:?} vs grad {:?}", param.shape(), grad.shape()),
        }
        .into());
    }
    grad.ensure_finite("sgd_step")?;
    let (lr, wd) = (F::of(lr), F::of(weight_decay));
    for (w, &g) in param.data_mut().iter_mut().zip(grad.data()) {
        *w -= lr * (g + wd * *w);
    }
    Ok(())
}

/// Stochastic gradient descent with weight decay on every parameter and
/// optional heavy-ball momentum.
///
/// Coupled decay (the default) adds `wd·w` to the gradient before the
/// momentum buffer; decoupled decay subtracts `lr·wd·w` from the weight
/// directly. Without momentum the two coincide.
#[derive(Clone, Debug)]
pub struct Sgd<F> {
    pub weight_decay: f64,
    pub momentum: f64,
    pub decoupled: bool,
    velocity: Vec<Option<Tensor<F>>>,
}

impl<F: Scalar> Sgd<F> {
    pub fn new(weight_decay: f64, momentum: f64, decoupled: bool) -> Self {
        Sgd {
            weight_decay,
            momentum,
            decoupled,
            velocity: Vec::new(),
        }
    }

    /// Updates every parameter that has a gradient; `grads[i]` belongs to
    /// parameter `i` of `store`.
    pub fn step(&mut self, store: &mut ParamStore<F>, grads: &[Option<Tensor<F>>], lr: f64) -> Result<()> {
        let ids: Vec<_> = store.param_ids().collect();
        if self.velocity.len() < ids.len() {
            self.velocity.resize(ids.len(), None);
        }
        for (id, g) in ids.into_iter().zip(grads) {
            let Some(g) = g else { continue };
            if !g.is_finite() {
                return Err(TrainError::NonFiniteGradient(store.param_name(id).into()));
            }
            if self.momentum == 0.0 && !self.decoupled {
                sgd_step(store.param_mut(id), g, lr, self.weight_decay)?;
                continue;
            }
            let w = store.param_mut(id);
            let (mu, wd, lr) = (F::of(self.momentum), F::of(self.weight_decay), F::of(lr));
            let v = self.velocity[id.index()]
                .get_or_insert_with(|| Tensor::from_parts(g.shape().to_vec(), alloc::vec![F::zero(); g.len()]));
            for ((wi, vi), &gi) in w.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                let d = if self.decoupled { gi } else { gi + wd * *wi };
                *vi = mu * *vi + d;
                if self.decoupled {
                    *wi -= lr * wd * *wi;
                }
                *wi -= lr * *vi;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn closed_form_steps() {
        let mut w = Tensor::new(vec![1], vec![1.0f64]).unwrap();
        sgd_step(&mut w, &Tensor::zeros(&[1]).unwrap(), 0.02, 0.01).unwrap();
        assert!((w.data()[0] - 0.9998).abs() < 1e-15);
        let mut w = Tensor::new(vec![1], vec![0.0f64]).unwrap();
        sgd_step(&mut w, &Tensor::ones(&[1]).unwrap(), 0.02, 0.0).unwrap();
        assert_eq!(w.data()[0], -0.02);
    }
}
