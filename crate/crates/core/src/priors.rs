//! Prior mass functions over model structures.
//!
//! * `Ib`: every covariate enters independently with the same probability.
//! * `Bb`: the common inclusion probability is Beta(alpha, beta) distributed
//!   and integrated out.
//! * `Nb`: every covariate has its own inclusion probability.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model_space::ModelStructure;

#[derive(Debug, Clone, PartialEq)]
pub enum PriorSpec {
    Ib { theta: f64 },
    Bb { alpha: f64, beta: f64 },
    Nb { theta: Vec<f64> },
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidPrior(format!(
            "{name} = {v} must lie strictly inside (0, 1); degenerate inclusion probabilities prevent learning from data"
        )))
    }
}

impl PriorSpec {
    pub fn ib(theta: f64) -> Result<Self> {
        check_open_unit("theta", theta)?;
        Ok(PriorSpec::Ib { theta })
    }

    pub fn bb(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidPrior(format!(
                "beta-binomial hyperparameters must be positive, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(PriorSpec::Bb { alpha, beta })
    }

    pub fn nb(theta: Vec<f64>) -> Result<Self> {
        for (j, &t) in theta.iter().enumerate() {
            check_open_unit(&format!("theta[{j}]"), t)?;
        }
        Ok(PriorSpec::Nb { theta })
    }

    /// Uniform prior over models.
    pub fn uniform() -> Self {
        PriorSpec::Ib { theta: 0.5 }
    }

    /// Errors unless the prior is usable with `k` covariates.
    pub fn check_k(&self, k: usize) -> Result<()> {
        match self {
            PriorSpec::Nb { theta } if theta.len() != k => Err(Error::DimensionMismatch {
                expected: k,
                actual: theta.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// Sum over covariates of `ln theta_j` (included) or `ln(1 - theta_j)`
/// (excluded), accumulated in covariate order.
pub(crate) fn bernoulli_log_mass(theta: impl Fn(usize) -> f64, s: ModelStructure, k: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..k {
        let t = theta(j);
        acc += if s.contains(j) { t.ln() } else { (1.0 - t).ln() };
    }
    acc
}

/// `ln B(alpha + size, beta + k - size) - ln B(alpha, beta)`
fn beta_binomial_log_mass(alpha: f64, beta: f64, size: usize, k: usize) -> f64 {
    let size = size as f64;
    let k = k as f64;
    ln_gamma(alpha + beta) - ln_gamma(alpha) - ln_gamma(beta) + ln_gamma(alpha + size) + ln_gamma(beta + k - size)
        - ln_gamma(alpha + beta + k)
}

fn ln_binomial(k: usize, w: usize) -> f64 {
    ln_gamma(k as f64 + 1.0) - ln_gamma(w as f64 + 1.0) - ln_gamma((k - w) as f64 + 1.0)
}

/// `ln P(m)` for structure `s` among the `2^k` models.
pub fn log_prior_mass(p: &PriorSpec, s: ModelStructure, k: usize) -> f64 {
    match p {
        PriorSpec::Ib { theta } => bernoulli_log_mass(|_| *theta, s, k),
        PriorSpec::Bb { alpha, beta } => beta_binomial_log_mass(*alpha, *beta, s.size(), k),
        PriorSpec::Nb { theta } => bernoulli_log_mass(|j| theta[j], s, k),
    }
}

/// `ln P(m_i)` for every mask `i` in `0..2^k`.
pub fn log_prior_masses(p: &PriorSpec, k: usize) -> Vec<f64> {
    match p {
        PriorSpec::Bb { alpha, beta } => {
            let by_size: Vec<f64> = (0..=k).map(|w| beta_binomial_log_mass(*alpha, *beta, w, k)).collect();
            (0..1u32 << k).map(|m| by_size[m.count_ones() as usize]).collect()
        }
        _ => (0..1u32 << k)
            .map(|m| log_prior_mass(p, ModelStructure::new(m, k).expect("mask below 2^k"), k))
            .collect(),
    }
}

/// Distribution of the model size `W` (number of included covariates).
pub fn model_size_pmf(p: &PriorSpec, k: usize) -> Vec<f64> {
    match p {
        PriorSpec::Ib { theta } => (0..=k)
            .map(|w| (ln_binomial(k, w) + w as f64 * theta.ln() + (k - w) as f64 * (1.0 - theta).ln()).exp())
            .collect(),
        PriorSpec::Bb { alpha, beta } => (0..=k)
            .map(|w| (ln_binomial(k, w) + beta_binomial_log_mass(*alpha, *beta, w, k)).exp())
            .collect(),
        PriorSpec::Nb { theta } => {
            // Poisson-binomial by convolution
            let mut pmf = vec![0.0; k + 1];
            pmf[0] = 1.0;
            for (j, &t) in theta.iter().enumerate().take(k) {
                for w in (0..=j + 1).rev() {
                    let stay = pmf[w] * (1.0 - t);
                    let grow = if w > 0 { pmf[w - 1] * t } else { 0.0 };
                    pmf[w] = stay + grow;
                }
            }
            pmf
        }
    }
}
