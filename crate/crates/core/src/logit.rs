//! Maximum-likelihood logistic regression on a covariate subset, fitted by
//! iteratively reweighted least squares (Newton-Raphson).
//!
//! A tiny ridge penalty on the slopes keeps the estimate finite under
//! (quasi-)separation. The reported log-likelihood is the unpenalized one at
//! the returned coefficients, and the BIC counts the intercept as a
//! parameter.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model_space::ModelStructure;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub deviance_tol: f64,
    pub coeff_tol: f64,
    /// Penalty weight on non-intercept coefficients.
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            deviance_tol: 1e-10,
            coeff_tol: 1e-9,
            ridge: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub structure: ModelStructure,
    /// Intercept first, then one slope per included covariate in ascending
    /// covariate order.
    pub coeffs: Vec<f64>,
    pub log_lik: f64,
    pub bic: f64,
    /// `-bic / 2`, the unnormalized log marginal likelihood.
    pub log_marginal: f64,
    pub iterations: usize,
}

impl FittedModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.coeffs[0]
            + self
                .structure
                .covariates()
                .zip(&self.coeffs[1..])
                .map(|(j, b)| b * x[j])
                .sum::<f64>()
    }
}

/// Logistic function without overflow for large `|eta|`.
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^eta)`
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// `P(c1 | x, m)` for a fitted model; `x` carries all `k` covariates.
pub fn predict_prob(m: &FittedModel, x: &[f64]) -> f64 {
    sigmoid(m.linear_predictor(x))
}

pub fn fit(d: &Dataset, s: ModelStructure) -> Result<FittedModel> {
    fit_with(d, s, &FitOptions::default())
}

struct Design {
    n: usize,
    p: usize,
    // row-major n * p with a leading column of ones
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Design {
    fn new(d: &Dataset, s: ModelStructure) -> Self {
        let cols: Vec<usize> = s.covariates().collect();
        let p = cols.len() + 1;
        let mut x = Vec::with_capacity(d.n() * p);
        for row in d.rows() {
            x.push(1.0);
            x.extend(cols.iter().map(|&j| row[j]));
        }
        let y = d
            .labels()
            .iter()
            .map(|c| if c.is_positive() { 1.0 } else { 0.0 })
            .collect();
        Self { n: d.n(), p, x, y }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    fn eta(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    fn log_lik(&self, beta: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let eta = self.eta(i, beta);
                self.y[i] * eta - softplus(eta)
            })
            .sum()
    }

    fn penalized(&self, beta: &[f64], ridge: f64) -> f64 {
        self.log_lik(beta) - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
    }

    /// Gradient and negative Hessian of the penalized log-likelihood.
    fn newton_system(&self, beta: &[f64], ridge: f64) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.p;
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..self.n {
            let row = self.row(i);
            let mu = sigmoid(self.eta(i, beta));
            let r = self.y[i] - mu;
            let w = mu * (1.0 - mu);
            for a in 0..p {
                grad[a] += row[a] * r;
                for b in 0..=a {
                    info[(a, b)] += w * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        for a in 1..p {
            grad[a] -= ridge * beta[a];
            info[(a, a)] += ridge;
        }
        (grad, info)
    }
}

/// Solves `info * step = grad` by Cholesky, adding diagonal jitter when the
/// matrix is not numerically positive definite.
fn newton_step(info: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let mut jitter = 0.0;
    for _ in 0..12 {
        let mut m = info.clone();
        for a in 0..m.nrows() {
            m[(a, a)] += jitter;
        }
        if let Some(ch) = m.cholesky() {
            return Some(ch.solve(grad));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
    }
    None
}

pub fn fit_with(d: &Dataset, s: ModelStructure, opts: &FitOptions) -> Result<FittedModel> {
    let design = Design::new(d, s);
    let n = design.n;
    if n == 0 {
        return Err(Error::InvalidDataset("cannot fit on an empty dataset".into()));
    }
    let mut beta = vec![0.0; design.p];
    let ybar = design.y.iter().sum::<f64>() / n as f64;
    if ybar > 0.0 && ybar < 1.0 {
        beta[0] = (ybar / (1.0 - ybar)).ln();
    }

    let mut objective = design.penalized(&beta, opts.ridge);
    let mut deviance = -2.0 * design.log_lik(&beta);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let (grad, info) = design.newton_system(&beta, opts.ridge);
        let Some(step) = newton_step(info, &grad) else {
            break;
        };

        // step halving keeps the penalized likelihood from decreasing
        let mut t = 1.0;
        let mut candidate: Vec<f64>;
        let mut cand_obj;
        loop {
            candidate = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            cand_obj = design.penalized(&candidate, opts.ridge);
            if cand_obj >= objective - 1e-12 * (1.0 + objective.abs()) || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }

        let change = candidate
            .iter()
            .zip(&beta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let new_deviance = -2.0 * design.log_lik(&candidate);
        let dev_change = (deviance - new_deviance).abs();
        beta = candidate;
        objective = cand_obj;
        deviance = new_deviance;
        if dev_change < opts.deviance_tol || change < opts.coeff_tol {
            converged = true;
            break;
        }
    }
    if !converged || beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonConvergence {
            mask: s.mask(),
            iterations,
            last_coeffs: beta,
        });
    }

    let log_lik = design.log_lik(&beta);
    let bic = -2.0 * log_lik + design.p as f64 * (n as f64).ln();
    Ok(FittedModel {
        structure: s,
        coeffs: beta,
        log_lik,
        bic,
        log_marginal: -bic / 2.0,
        iterations,
    })
}

#[cfg(test)]
pub(crate) fn penalized_gradient(d: &Dataset, m: &FittedModel, ridge: f64) -> Vec<f64> {
    let design = Design::new(d, m.structure);
    let (g, _) = design.newton_system(&m.coeffs, ridge);
    g.iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, Class};

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(-3.0) - 0.04742587317756678).abs() < 1e-15);
        assert!(sigmoid(40.0) >= 1.0 - 1e-17);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((softplus(1000.0) - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn intercept_only_matches_closed_form() {
        let d = generate_synthetic(2, 400, &[-1.0, 0.0, 0.0], &[], 3).unwrap();
        let m = fit(&d, ModelStructure::empty()).unwrap();
        let p = d.prevalence();
        let n = d.n() as f64;
        assert!((m.coeffs[0] - (p / (1.0 - p)).ln()).abs() < 1e-9);
        let ll = n * (p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        assert!((m.log_lik - ll).abs() < 1e-8);
        assert_eq!(m.bic, -2.0 * m.log_lik + n.ln());
        assert_eq!(m.log_marginal, -m.bic / 2.0);
    }

    #[test]
    fn symmetric_data_has_zero_intercept() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (i, x) in [0.3, 1.2, -0.7, 2.0, 0.1].iter().enumerate() {
            let c = Class::from_bool(i % 2 == 0);
            rows.push(vec![*x]);
            labels.push(c);
            rows.push(vec![-x]);
            labels.push(if c == Class::C1 { Class::C0 } else { Class::C1 });
        }
        let d = Dataset::new(vec!["x".into()], rows, labels).unwrap();
        let m = fit(&d, ModelStructure::from_covariates(&[0])).unwrap();
        assert!(m.coeffs[0].abs() < 1e-9, "{:?}", m.coeffs);
    }

    #[test]
    fn bic_counts_intercept() {
        let d = generate_synthetic(3, 300, &[-0.5, 1.0, -1.0, 0.0], &[0, 1], 9).unwrap();
        let s = ModelStructure::from_covariates(&[0, 2]);
        let m = fit(&d, s).unwrap();
        assert_eq!(m.coeffs.len(), 3);
        assert_eq!(m.bic, -2.0 * m.log_lik + 3.0 * 300f64.ln());
    }

    #[test]
    fn gradient_vanishes_at_solution() {
        for seed in 0..5 {
            let d = generate_synthetic(4, 250, &[-1.0, 1.5, 0.0, -0.8, 0.3], &[0, 2, 3], seed).unwrap();
            let s = ModelStructure::new(0b1111, 4).unwrap();
            let m = fit(&d, s).unwrap();
            let g = penalized_gradient(&d, &m, FitOptions::default().ridge);
            let norm = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(norm <= 1e-6 * d.n() as f64, "{norm}");
        }
    }

    #[test]
    fn nesting_never_loses_likelihood() {
        for seed in 0..4 {
            let d = generate_synthetic(3, 200, &[-0.5, 1.0, 0.5, 0.0], &[0, 1], 100 + seed).unwrap();
            for mask in 0u32..8 {
                let small = fit(&d, ModelStructure::new(mask, 3).unwrap()).unwrap();
                for j in 0..3 {
                    if mask & (1 << j) == 0 {
                        let big = fit(&d, ModelStructure::new(mask | (1 << j), 3).unwrap()).unwrap();
                        assert!(big.log_lik >= small.log_lik - 1e-8, "mask {mask} + {j}");
                    }
                }
            }
        }
    }

    #[test]
    fn separated_data_stays_finite() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0]).collect();
        let labels = (0..30).map(|i| Class::from_bool(i >= 28)).collect();
        let d = Dataset::new(vec!["x".into()], rows, labels).unwrap();
        let m = fit(&d, ModelStructure::from_covariates(&[0])).unwrap();
        assert!(m.coeffs.iter().all(|b| b.is_finite()));
        assert!(m.log_lik <= 0.0);
    }

    #[test]
    fn zero_coefficients_predict_half() {
        let m = FittedModel {
            structure: ModelStructure::from_covariates(&[0, 1]),
            coeffs: vec![0.0; 3],
            log_lik: 0.0,
            bic: 0.0,
            log_marginal: 0.0,
            iterations: 0,
        };
        assert_eq!(predict_prob(&m, &[3.0, -7.0]), 0.5);
        let m = FittedModel {
            structure: ModelStructure::empty(),
            coeffs: vec![-3.0],
            ..m
        };
        assert!((predict_prob(&m, &[1.0, 1.0]) - 0.04742587).abs() < 1e-8);
    }

    #[test]
    fn non_convergence_is_reported() {
        let d = generate_synthetic(2, 100, &[0.0, 1.0, 1.0], &[0, 1], 2).unwrap();
        let opts = FitOptions {
            max_iter: 1,
            ..FitOptions::default()
        };
        match fit_with(&d, ModelStructure::from_covariates(&[0, 1]), &opts) {
            Err(Error::NonConvergence { last_coeffs, .. }) => assert_eq!(last_coeffs.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
