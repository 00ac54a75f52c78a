use alloc::vec::Vec;

use super::layers::{LayerFactory, LayerRef, LinearLayer};
use crate::autograd::Var;
use crate::params::{ParamId, Session};
use crate::scalar::Scalar;
use crate::tensor::Result;

/// Masked temporal average pool, then a linear map to class scores.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub linear: LinearLayer,
}

impl Classifier {
    pub fn new<F: Scalar>(
        factory: &mut LayerFactory<'_, F>,
        name: &str,
        in_features: usize,
        num_classes: usize,
    ) -> Result<Self> {
        Ok(Classifier {
            linear: factory.linear(name, in_features, num_classes, true)?,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.linear.out_features
    }

    /// `[N, C, T]` features → `[N, classes]` logits, pooling only over the
    /// first `valid_len[n]` frames of sample `n`.
    pub fn logits<F: Scalar>(&self, s: &mut Session<'_, F>, features: Var, valid_len: &[usize]) -> Result<Var> {
        let pooled = s.tape.masked_time_mean(features, valid_len)?;
        self.linear.forward(s, pooled)
    }

    /// Class probabilities, `[N, classes]`.
    pub fn forward<F: Scalar>(&self, s: &mut Session<'_, F>, features: Var, valid_len: &[usize]) -> Result<Var> {
        let z = self.logits(s, features, valid_len)?;
        s.tape.softmax(z, 1)
    }

    pub fn layers(&self) -> Vec<LayerRef<'_>> {
        alloc::vec![LayerRef::Linear(&self.linear)]
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.linear.params()
    }

    pub fn param_count(&self) -> u64 {
        self.linear.param_count()
    }
}
