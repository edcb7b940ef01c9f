use std::time::Instant;

use super::backward::loss_and_gradients;
use super::forward::NodeFeatures;
use super::negative::{sample_negative_graph, NegGraph};
use super::params::Weights;
use super::{ModelError, ModelParams};
use crate::hetgraph::HeteroGraph;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub neg_ratio: usize,
    pub seed: u64,
    /// Draw fresh negatives every epoch instead of once.
    pub resample_negatives: bool,
    /// Keep the bilinear scorer fixed at its current value when false.
    pub train_scorer: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            neg_ratio: 5,
            seed: 0,
            resample_negatives: true,
            train_scorer: true,
        }
    }
}

/// AdamW moments.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Weights,
    pub v: Weights,
}

impl AdamState {
    pub fn new(like: &Weights) -> Self {
        Self {
            step: 0,
            m: like.zeros_like(),
            v: like.zeros_like(),
        }
    }

    /// One decoupled-weight-decay Adam step.
    pub fn apply(&mut self, params: &mut Weights, grads: &Weights, lr: f64, weight_decay: f64) {
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        let ps = params.tensors_mut();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        let gs = grads.tensors();
        for (((p, m), v), g) in ps.into_iter().zip(ms).zip(vs).zip(gs) {
            let p = p.data_mut();
            let m = m.data_mut();
            let v = v.data_mut();
            for i in 0..p.len() {
                let gi = g.data()[i];
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] *= 1.0 - lr * weight_decay;
                p[i] -= lr * mhat / (vhat.sqrt() + EPS);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub adam: AdamState,
    /// Loss at the start of each epoch.
    pub losses: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    /// Users skipped by negative sampling in the last epoch.
    pub skipped_negatives: usize,
}

fn epoch_seed(seed: u64, epoch: u64) -> u64 {
    seed ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Full-batch training. Resuming with the `adam` state and params of an
/// earlier run continues exactly where it stopped: the negative stream is
/// keyed on the global step count.
pub fn train(
    mut params: ModelParams,
    graph: &HeteroGraph,
    feats: &NodeFeatures,
    cfg: &TrainConfig,
    adam: Option<AdamState>,
) -> Result<TrainOutcome, ModelError> {
    if !(params.hyper.learning_rate > 0.0) || !params.hyper.learning_rate.is_finite() {
        return Err(ModelError::InvalidParameter(
            "learning rate must be positive".into(),
        ));
    }
    let mut adam = adam.unwrap_or_else(|| AdamState::new(&params.weights));
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut epoch_seconds = Vec::with_capacity(cfg.epochs);
    let mut neg: Option<NegGraph> = None;
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let global = params.steps;
        if neg.is_none() || cfg.resample_negatives {
            let seed = if cfg.resample_negatives {
                epoch_seed(cfg.seed, global)
            } else {
                cfg.seed
            };
            neg = Some(sample_negative_graph(graph, cfg.neg_ratio, seed)?);
        }
        let negs = neg.as_ref().expect("negatives sampled");
        let (loss, mut grads) = loss_and_gradients(&params, graph, feats, negs)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(ModelError::DivergenceDetected {
                epoch,
                last_good: Box::new(params),
            });
        }
        if !cfg.train_scorer {
            grads.scorer.fill(0.0);
        }
        let mut next = params.weights.clone();
        let scorer = next.scorer.clone();
        adam.apply(
            &mut next,
            &grads,
            params.hyper.learning_rate,
            params.hyper.weight_decay,
        );
        if !cfg.train_scorer {
            next.scorer = scorer;
        }
        if !next.is_finite() {
            return Err(ModelError::DivergenceDetected {
                epoch,
                last_good: Box::new(params),
            });
        }
        params.weights = next;
        params.steps += 1;
        losses.push(loss);
        epoch_seconds.push(start.elapsed().as_secs_f64());
        log::debug!("epoch {epoch}: loss {loss:.6}");
    }
    let skipped_negatives = neg.map_or(0, |n| n.skipped.len());
    Ok(TrainOutcome {
        params,
        adam,
        losses,
        epoch_seconds,
        skipped_negatives,
    })
}
