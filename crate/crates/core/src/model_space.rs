//! The space of `2^k` covariate subsets, the fitted ensemble over it, and the
//! per-size marginal-likelihood sums shared by every prior.
//!
//! Model `i` is identified with the bitmask `i`: bit `j` set means covariate
//! `j` (zero-based) is included. All marginal-likelihood arithmetic stays in
//! log space.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::logit::{self, FitOptions, FittedModel};

/// Largest covariate count handled by exhaustive enumeration.
pub const MAX_COVARIATES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ModelStructure {
    mask: u32,
}

impl ModelStructure {
    pub fn new(mask: u32, k: usize) -> Result<Self> {
        if k > MAX_COVARIATES {
            return Err(Error::ModelSpaceTooLarge { k, cap: MAX_COVARIATES });
        }
        if mask >> k != 0 {
            return Err(Error::InvalidDataset(format!(
                "mask {mask:#b} names covariates beyond k={k}"
            )));
        }
        Ok(Self { mask })
    }

    pub fn empty() -> Self {
        Self { mask: 0 }
    }

    /// Panics if an index is not below [`MAX_COVARIATES`].
    pub fn from_covariates(covariates: &[usize]) -> Self {
        let mask = covariates.iter().fold(0u32, |m, &j| {
            assert!(j < MAX_COVARIATES, "covariate index {j} out of range");
            m | (1 << j)
        });
        Self { mask }
    }

    pub fn mask(self) -> u32 {
        self.mask
    }

    pub fn size(self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(self, j: usize) -> bool {
        j < 32 && self.mask & (1 << j) != 0
    }

    /// Included covariate indices in ascending order.
    pub fn covariates(self) -> impl Iterator<Item = usize> {
        let mask = self.mask;
        (0..32usize).filter(move |&j| mask & (1 << j) != 0)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > MAX_COVARIATES {
        return Err(Error::ModelSpaceTooLarge { k, cap: MAX_COVARIATES });
    }
    Ok(())
}

/// All `2^k` structures in ascending mask order.
pub fn enumerate(k: usize) -> Result<Vec<ModelStructure>> {
    check_k(k)?;
    Ok((0..1u32 << k).map(|mask| ModelStructure { mask }).collect())
}

/// `ln(sum(exp(values)))`, returning `-inf` for an empty or all `-inf` input.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log marginal likelihoods of all `2^k` models, shifted so the largest is 0,
/// together with their per-size log sums `ln L_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    k: usize,
    log_marginals: Vec<f64>,
    grouped_log_sums: Vec<f64>,
}

impl Evidence {
    /// `log_marginals[i]` belongs to the model with mask `i`. Only differences
    /// matter; the values are shifted by their maximum on construction.
    pub fn new(k: usize, log_marginals: Vec<f64>) -> Result<Self> {
        check_k(k)?;
        if log_marginals.len() != 1 << k {
            return Err(Error::DimensionMismatch {
                expected: 1 << k,
                actual: log_marginals.len(),
            });
        }
        if log_marginals.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::InvalidDataset(
                "log marginal likelihoods must be finite or -inf".into(),
            ));
        }
        let max = log_marginals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::InvalidDataset("every model has zero marginal likelihood".into()));
        }
        let log_marginals: Vec<f64> = log_marginals.into_iter().map(|v| v - max).collect();
        let mut by_size: Vec<Vec<f64>> = vec![Vec::new(); k + 1];
        for (mask, &lm) in log_marginals.iter().enumerate() {
            by_size[(mask as u32).count_ones() as usize].push(lm);
        }
        let grouped_log_sums = by_size.iter().map(|v| logsumexp(v)).collect();
        Ok(Self {
            k,
            log_marginals,
            grouped_log_sums,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.log_marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_marginals.is_empty()
    }

    pub fn log_marginals(&self) -> &[f64] {
        &self.log_marginals
    }

    /// `ln L_j` for `j = 0..=k`.
    pub fn grouped_log_sums(&self) -> &[f64] {
        &self.grouped_log_sums
    }

    /// Marginal likelihoods normalized to sum to one (uniform prior posterior).
    pub fn normalized_marginals(&self) -> Vec<f64> {
        let total = logsumexp(&self.log_marginals);
        self.log_marginals.iter().map(|v| (v - total).exp()).collect()
    }
}

/// Every model structure fitted on one dataset.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub models: Vec<FittedModel>,
    pub evidence: Evidence,
    n: usize,
}

impl Ensemble {
    pub fn k(&self) -> usize {
        self.evidence.k()
    }

    /// Training-set size the models were fitted on.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `P(c1 | x, m_i)` for every model, in mask order.
    pub fn model_probs(&self, x: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| logit::predict_prob(m, x)).collect()
    }
}

pub fn fit_ensemble(d: &Dataset) -> Result<Ensemble> {
    fit_ensemble_with(d, &FitOptions::default())
}

/// Fits all `2^k` structures (in parallel) and caches their evidence.
pub fn fit_ensemble_with(d: &Dataset, opts: &FitOptions) -> Result<Ensemble> {
    let structures = enumerate(d.k())?;
    if !d.has_both_classes() {
        return Err(Error::MissingClass(if d.positives() == 0 { 1 } else { 0 }));
    }
    let models = structures
        .into_par_iter()
        .map(|s| logit::fit_with(d, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let evidence = Evidence::new(d.k(), models.iter().map(|m| m.log_marginal).collect())?;
    Ok(Ensemble {
        models,
        evidence,
        n: d.n(),
    })
}
