use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::NmtModel;
use super::tensor::{Gradients, ParamSet, Real};
use crate::error::{Error, Result};

/// Global gradient-norm ceiling applied before every update.
pub const CLIP_NORM: f64 = 5.0;

/// Plain gradient descent: `p ← p − lr · g` for every parameter.
///
/// Rejects non-positive learning rates, mismatched layouts and non-finite
/// gradients; on error the parameters are untouched.
pub fn sgd_step<T: Real>(model: &mut NmtModel<T>, grads: &Gradients<T>, lr: T) -> Result<()> {
    if !(lr > T::zero()) || !lr.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "learning rate must be positive, got {lr:?}"
        )));
    }
    model.params().check_layout(grads)?;
    if !grads.is_finite() {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    for (p, g) in model.params_mut().tensors_mut().iter_mut().zip(grads.tensors()) {
        for (x, d) in p.data_mut().iter_mut().zip(g.data()) {
            *x -= lr * *d;
        }
    }
    Ok(())
}

/// Adam moment estimates, for offline pretraining only.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: ParamSet<T>,
    v: ParamSet<T>,
    t: i32,
}

impl<T: Real> Adam<T> {
    pub fn new(model: &NmtModel<T>) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: model.params().zeros_like(),
            v: model.params().zeros_like(),
            t: 0,
        }
    }

    pub fn step(&mut self, model: &mut NmtModel<T>, grads: &Gradients<T>, lr: T) -> Result<()> {
        model.params().check_layout(grads)?;
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        self.t += 1;
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let eps = T::lit(self.eps);
        let params = model.params_mut().tensors_mut();
        let moments = self.m.tensors_mut().iter_mut().zip(self.v.tensors_mut());
        for ((p, g), (m, v)) in params.iter_mut().zip(grads.tensors()).zip(moments) {
            let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (T::one() - b1) * g[k];
                v[k] = b2 * v[k] + (T::one() - b2) * g[k] * g[k];
                p[k] -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Offline training schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub clip_norm: f64,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            learning_rate: 0.005,
            epochs: 30,
            batch_size: 4,
            optimizer: OptimizerKind::Adam,
            clip_norm: CLIP_NORM,
            seed: 17,
        }
    }
}

/// A training pair already mapped to vocabulary indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdPair {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

/// Shuffled minibatch training; returns the mean loss of every epoch.
///
/// Losses are recorded on the fly, before each batch's update.
pub fn train_batch<T: Real>(
    model: &mut NmtModel<T>,
    pairs: &[IdPair],
    opts: &TrainOptions,
) -> Result<Vec<f64>> {
    if pairs.is_empty() {
        return Err(Error::EmptySequence("training pairs"));
    }
    if opts.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let lr = T::lit(opts.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut adam = match opts.optimizer {
        OptimizerKind::Adam => Some(Adam::new(model)),
        OptimizerKind::Sgd => None,
    };
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut trace = Vec::with_capacity(opts.epochs);
    for _ in 0..opts.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(opts.batch_size) {
            let mut grads = model.params().zeros_like();
            for &i in batch {
                total += model.accumulate_grad(&pairs[i].src, &pairs[i].tgt, &mut grads)?.as_f64();
            }
            grads.scale(T::one() / T::lit(batch.len() as f64));
            grads.clip_norm(T::lit(opts.clip_norm));
            match adam.as_mut() {
                Some(a) => a.step(model, &grads, lr)?,
                None => sgd_step(model, &grads, lr)?,
            }
        }
        trace.push(total / pairs.len() as f64);
    }
    Ok(trace)
}
