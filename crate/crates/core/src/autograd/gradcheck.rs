use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GradTape, Var};
use crate::params::{Mode, ParamId, ParamStore, Session};
use crate::tensor::{Result, Tensor, TensorError};

/// Options for [`grad_check`].
#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Pass threshold on the maximum relative error.
    pub tolerance: f64,
    /// Central-difference step.
    pub step: f64,
    /// Coordinates sampled per parameter tensor; `None` checks all of them.
    pub coords_per_param: Option<usize>,
    /// Relative errors are taken against `max(|analytic|, |numeric|, floor)`.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            tolerance: 1e-3,
            step: 1e-4,
            coords_per_param: Some(5),
            floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckEntry {
    pub param: usize,
    pub coords_checked: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.max_rel_err))
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tolerance
    }
}

fn eval<G>(f: &mut G, params: &[Tensor<f64>]) -> Result<(f64, GradTape<f64>, Vec<Var>)>
where
    G: FnMut(&mut GradTape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = GradTape::new();
    let vars = params
        .iter()
        .map(|p| tape.leaf(p.clone(), true))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut tape, &vars)?;
    let v = tape.value(out)?;
    if v.len() != 1 {
        return Err(TensorError::NonScalarLoss(v.shape().to_vec()));
    }
    let loss = v.data()[0];
    tape.backward(out)?;
    Ok((loss, tape, vars))
}

/// Compares analytic gradients of the scalar function `f` against central
/// finite differences, per parameter tensor.
///
/// `f` receives the tape and one leaf per entry of `params`. It is evaluated
/// twice at the base point first; differing outputs raise
/// [`TensorError::NonDeterministic`].
pub fn grad_check<G>(mut f: G, params: &[Tensor<f64>], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    G: FnMut(&mut GradTape<f64>, &[Var]) -> Result<Var>,
{
    let mut report = GradCheckReport {
        tolerance: opts.tolerance,
        entries: Vec::new(),
    };
    if params.is_empty() {
        return Ok(report);
    }
    let (base, tape, vars) = eval(&mut f, params)?;
    let (again, _, _) = eval(&mut f, params)?;
    if base.to_bits() != again.to_bits() {
        return Err(TensorError::NonDeterministic);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work: Vec<Tensor<f64>> = params.to_vec();
    for (pi, p) in params.iter().enumerate() {
        let analytic = match tape.grad(vars[pi]) {
            Some(g) => g.clone(),
            None => Tensor::zeros(p.shape())?,
        };
        let coords: Vec<usize> = match opts.coords_per_param {
            Some(k) if k < p.len() => index::sample(&mut rng, p.len(), k).into_vec(),
            _ => (0..p.len()).collect(),
        };
        let mut worst = 0.0f64;
        for &c in &coords {
            let orig = p.data()[c];
            work[pi].data_mut()[c] = orig + opts.step;
            let plus = eval_loss(&mut f, &work)?;
            work[pi].data_mut()[c] = orig - opts.step;
            let minus = eval_loss(&mut f, &work)?;
            work[pi].data_mut()[c] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic.data()[c];
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            worst = worst.max((a - numeric).abs() / denom);
        }
        report.entries.push(GradCheckEntry {
            param: pi,
            coords_checked: coords.len(),
            max_rel_err: worst,
        });
    }
    Ok(report)
}

fn eval_loss<G>(f: &mut G, params: &[Tensor<f64>]) -> Result<f64>
where
    G: FnMut(&mut GradTape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = GradTape::new();
    let vars = params
        .iter()
        .map(|p| tape.leaf(p.clone(), false))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut tape, &vars)?;
    Ok(tape.value(out)?.data()[0])
}

fn session_loss<G>(
    f: &mut G,
    store: &ParamStore<f64>,
    mode: Mode,
    grads: bool,
) -> Result<(f64, Vec<Option<Tensor<f64>>>)>
where
    G: FnMut(&mut Session<'_, f64>) -> Result<Var>,
{
    let mut s = Session::new(store, mode, 0).with_dropout(0.0).with_grads(grads);
    let out = f(&mut s)?;
    let v = s.tape.value(out)?;
    if v.len() != 1 {
        return Err(TensorError::NonScalarLoss(v.shape().to_vec()));
    }
    let loss = v.data()[0];
    if !grads {
        return Ok((loss, Vec::new()));
    }
    s.backward(out)?;
    let g = store.param_ids().map(|id| s.param_grad(id).cloned()).collect();
    Ok((loss, g))
}

/// [`grad_check`] over every parameter of a store. `f` runs a forward pass
/// in a fresh session (dropout disabled) and returns a scalar; each report
/// entry's `param` is the [`ParamId`] index. Parameters the loss does not
/// reach are compared against a zero gradient.
pub fn grad_check_store<G>(
    store: &ParamStore<f64>,
    mode: Mode,
    mut f: G,
    opts: &GradCheckOptions,
) -> Result<GradCheckReport>
where
    G: FnMut(&mut Session<'_, f64>) -> Result<Var>,
{
    let (base, grads) = session_loss(&mut f, store, mode, true)?;
    let (again, _) = session_loss(&mut f, store, mode, false)?;
    if base.to_bits() != again.to_bits() {
        return Err(TensorError::NonDeterministic);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = store.clone();
    let mut report = GradCheckReport {
        tolerance: opts.tolerance,
        entries: Vec::new(),
    };
    let ids: Vec<ParamId> = store.param_ids().collect();
    for (id, grad) in ids.into_iter().zip(grads) {
        let len = store.param(id).len();
        let coords: Vec<usize> = match opts.coords_per_param {
            Some(k) if k < len => index::sample(&mut rng, len, k).into_vec(),
            _ => (0..len).collect(),
        };
        let mut worst = 0.0f64;
        for &c in &coords {
            let orig = store.param(id).data()[c];
            work.param_mut(id).data_mut()[c] = orig + opts.step;
            let plus = session_loss(&mut f, &work, mode, false)?.0;
            work.param_mut(id).data_mut()[c] = orig - opts.step;
            let minus = session_loss(&mut f, &work, mode, false)?.0;
            work.param_mut(id).data_mut()[c] = orig;
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = grad.as_ref().map_or(0.0, |g| g.data()[c]);
            let denom = a.abs().max(numeric.abs()).max(opts.floor);
            worst = worst.max((a - numeric).abs() / denom);
        }
        report.entries.push(GradCheckEntry {
            param: id.index(),
            coords_checked: coords.len(),
            max_rel_err: worst,
        });
    }
    Ok(report)
}
