//! Bayesian model averaging under a single (precise) prior over models.

use crate::error::Result;
use crate::model_space::{logsumexp, Ensemble, Evidence};
use crate::priors::{log_prior_masses, PriorSpec};

/// Normalized log posterior model probabilities, indexed by mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorWeights {
    k: usize,
    log_weights: Vec<f64>,
}

impl PosteriorWeights {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|v| v.exp()).collect()
    }
}

/// `P(m_i | D)` proportional to `exp(-BIC_i / 2) * P(m_i)`.
pub fn posterior_weights(e: &Evidence, p: &PriorSpec) -> Result<PosteriorWeights> {
    p.check_k(e.k())?;
    let joint: Vec<f64> = e
        .log_marginals()
        .iter()
        .zip(log_prior_masses(p, e.k()))
        .map(|(lm, lp)| lm + lp)
        .collect();
    let total = logsumexp(&joint);
    Ok(PosteriorWeights {
        k: e.k(),
        log_weights: joint.into_iter().map(|v| v - total).collect(),
    })
}

/// Model-averaged `P(c1 | x)` from per-model probabilities in mask order.
pub fn predict_from_probs(w: &PosteriorWeights, model_probs: &[f64]) -> f64 {
    let p: f64 = w.log_weights.iter().zip(model_probs).map(|(lw, p)| lw.exp() * p).sum();
    p.clamp(0.0, 1.0)
}

pub fn predict(e: &Ensemble, w: &PosteriorWeights, x: &[f64]) -> f64 {
    predict_from_probs(w, &e.model_probs(x))
}

/// Posterior probability that covariate `j` (zero-based) is in the model.
pub fn inclusion_prob(w: &PosteriorWeights, j: usize) -> f64 {
    let bit = 1usize << j;
    w.log_weights
        .iter()
        .enumerate()
        .filter(|(mask, _)| mask & bit != 0)
        .map(|(_, lw)| lw.exp())
        .sum::<f64>()
        .min(1.0)
}
