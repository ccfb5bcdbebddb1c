//! Credal model averaging over the independent-Bernoulli priors with a common
//! inclusion probability `theta` ranging over `[theta_lo, theta_hi]`.
//!
//! Models of equal size share a prior weight `theta^j (1 - theta)^(k - j)`,
//! so any posterior expectation reduces to the rational function
//!
//! ```text
//! h(theta) = sum_j theta^j (1 - theta)^(k - j) Z_j / sum_j theta^j (1 - theta)^(k - j) L_j
//! ```
//!
//! where `L_j` sums the marginal likelihoods of size-`j` models and `Z_j`
//! weights the same sum by the per-model quantity being averaged. Its extrema
//! over the interval lie at the endpoints or at real roots of
//! `f' g - f g'` (numerator over denominator), which are isolated on the
//! expanded polynomial.

use log::warn;

use crate::error::{Error, Result};
use crate::model_space::{logsumexp, Ensemble, Evidence};
use crate::poly;

/// Half-width of the excluded margin used for near-ignorance credal sets.
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Closed probability interval `[lo, hi]` within `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ProbabilityInterval {
    /// Rounding overshoots beyond `[0, 1]` are clamped; `lo > hi` is an error.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidCredalSet(format!(
                "invalid probability interval [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self { lo: p, hi: p }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Interval of the complementary event.
    pub fn complement(&self) -> Self {
        Self {
            lo: 1.0 - self.hi,
            hi: 1.0 - self.lo,
        }
    }

    pub fn contains(&self, p: f64, tol: f64) -> bool {
        p >= self.lo - tol && p <= self.hi + tol
    }

    pub fn is_within(&self, other: &ProbabilityInterval, tol: f64) -> bool {
        self.lo >= other.lo - tol && self.hi <= other.hi + tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCredalSet {
    theta_lo: f64,
    theta_hi: f64,
}

impl ScalarCredalSet {
    pub fn new(theta_lo: f64, theta_hi: f64) -> Result<Self> {
        if !(theta_lo > 0.0 && theta_lo <= theta_hi && theta_hi < 1.0) {
            return Err(Error::InvalidCredalSet(format!(
                "need 0 < theta_lo <= theta_hi < 1, got [{theta_lo}, {theta_hi}]"
            )));
        }
        Ok(Self { theta_lo, theta_hi })
    }

    /// `[epsilon, 1 - epsilon]`
    pub fn near_ignorance(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 1.0 - epsilon)
    }

    pub fn lo(&self) -> f64 {
        self.theta_lo
    }

    pub fn hi(&self) -> f64 {
        self.theta_hi
    }
}

/// Quantity averaged over models.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    /// Per-model `P(c1 | x, m_i)`, in mask order.
    ClassProbability(&'a [f64]),
    /// Indicator that covariate `j` (zero-based) is in the model.
    Inclusion(usize),
}

impl Target<'_> {
    /// Per-model value `a_i` for all `2^k` models.
    pub fn model_values(&self, k: usize) -> Result<Vec<f64>> {
        match *self {
            Target::ClassProbability(p) => {
                if p.len() != 1 << k {
                    return Err(Error::DimensionMismatch {
                        expected: 1 << k,
                        actual: p.len(),
                    });
                }
                if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidDataset("model probabilities must lie in [0, 1]".into()));
                }
                Ok(p.to_vec())
            }
            Target::Inclusion(j) => {
                if j >= k {
                    return Err(Error::DimensionMismatch { expected: k, actual: j });
                }
                Ok((0..1usize << k).map(|m| ((m >> j) & 1) as f64).collect())
            }
        }
    }
}

/// `ln L_j` and `ln Z_j` for `j = 0..=k`, on the shifted evidence scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSums {
    pub log_l: Vec<f64>,
    pub log_z: Vec<f64>,
}

impl GroupedSums {
    pub fn k(&self) -> usize {
        self.log_l.len() - 1
    }

    /// `h(theta)` evaluated stably in log space.
    pub fn objective(&self, theta: f64) -> f64 {
        let k = self.k();
        let (lt, lu) = (theta.ln(), (1.0 - theta).ln());
        let log_w = |j: usize| j as f64 * lt + (k - j) as f64 * lu;
        let num: Vec<f64> = self.log_z.iter().enumerate().map(|(j, z)| z + log_w(j)).collect();
        let den: Vec<f64> = self.log_l.iter().enumerate().map(|(j, l)| l + log_w(j)).collect();
        let num = logsumexp(&num);
        if num == f64::NEG_INFINITY {
            return 0.0;
        }
        (num - logsumexp(&den)).exp().clamp(0.0, 1.0)
    }

    /// Smallest and largest ratio `Z_j / L_j` over sizes with `L_j > 0`.
    fn ratio_bounds(&self) -> (f64, f64) {
        self.log_l
            .iter()
            .zip(&self.log_z)
            .filter(|(l, _)| **l > f64::NEG_INFINITY)
            .map(|(l, z)| (z - l).exp())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)))
    }

    /// Monomial coefficients of the numerator and denominator polynomials,
    /// both divided by `max_j L_j`.
    pub fn polynomials(&self) -> (Vec<f64>, Vec<f64>) {
        let shift = self.log_l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: Vec<f64> = self.log_z.iter().map(|v| (v - shift).exp()).collect();
        let l: Vec<f64> = self.log_l.iter().map(|v| (v - shift).exp()).collect();
        (poly::from_bernstein(&z), poly::from_bernstein(&l))
    }

    /// Coefficients of `f' g - f g'`, whose roots are the stationary points of `h`.
    pub fn stationarity_polynomial(&self) -> Vec<f64> {
        let (f, g) = self.polynomials();
        let lhs = poly::mul(&poly::derivative(&f), &g);
        let rhs = poly::mul(&f, &poly::derivative(&g));
        poly::sub(&lhs, &rhs)
    }
}

/// Groups `a_i * P(D | m_i)` by model size.
pub fn build_grouped_sums(e: &Evidence, target: &Target) -> Result<GroupedSums> {
    let k = e.k();
    let values = target.model_values(k)?;
    let mut by_size_z: Vec<Vec<f64>> = vec![Vec::new(); k + 1];
    for (mask, (&lm, &a)) in e.log_marginals().iter().zip(&values).enumerate() {
        by_size_z[(mask as u32).count_ones() as usize].push(lm + a.ln());
    }
    Ok(GroupedSums {
        log_l: e.grouped_log_sums().to_vec(),
        log_z: by_size_z.iter().map(|v| logsumexp(v)).collect(),
    })
}

/// Minimum and maximum of `h(theta)` over the credal interval.
pub fn optimize_scalar(g: &GroupedSums, cs: &ScalarCredalSet) -> Result<ProbabilityInterval> {
    if g.log_l.iter().all(|l| *l == f64::NEG_INFINITY) {
        return Err(Error::InvalidDataset(
            "all grouped marginal likelihoods are zero".into(),
        ));
    }
    let (lo, hi) = (cs.lo(), cs.hi());
    if lo == hi {
        return ProbabilityInterval::new(g.objective(lo), g.objective(lo));
    }

    let n = g.stationarity_polynomial();
    let mut candidates = vec![lo, hi];
    candidates.extend(poly::real_roots_in(&n, lo, hi));
    let values: Vec<f64> = candidates.iter().map(|&t| g.objective(t)).collect();

    let (rmin, rmax) = g.ratio_bounds();
    if values
        .iter()
        .any(|v| !v.is_finite() || *v < rmin - 1e-9 || *v > rmax + 1e-9)
    {
        warn!("candidate evaluation left the admissible range; falling back to grid search");
        return grid_search(g, cs, 1e-4);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ProbabilityInterval::new(min, max)
}

/// Extremes of `h` on a uniform grid with the given step (endpoints included).
pub fn grid_search(g: &GroupedSums, cs: &ScalarCredalSet, step: f64) -> Result<ProbabilityInterval> {
    let (lo, hi) = (cs.lo(), cs.hi());
    let steps = ((hi - lo) / step).ceil().max(1.0) as usize;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=steps {
        let t = (lo + step * i as f64).min(hi);
        let v = g.objective(t);
        min = min.min(v);
        max = max.max(v);
    }
    ProbabilityInterval::new(min, max)
}

/// Lower/upper posterior probability of `c1` from per-model probabilities;
/// returns `(c1, c0)` intervals.
pub fn class_interval_from_probs(
    e: &Evidence,
    cs: &ScalarCredalSet,
    model_probs: &[f64],
) -> Result<(ProbabilityInterval, ProbabilityInterval)> {
    let g = build_grouped_sums(e, &Target::ClassProbability(model_probs))?;
    let c1 = optimize_scalar(&g, cs)?;
    Ok((c1, c1.complement()))
}

pub fn class_interval(
    e: &Ensemble,
    cs: &ScalarCredalSet,
    x: &[f64],
) -> Result<(ProbabilityInterval, ProbabilityInterval)> {
    class_interval_from_probs(&e.evidence, cs, &e.model_probs(x))
}

/// Lower/upper posterior probability that covariate `j` is in the model.
pub fn inclusion_interval(e: &Evidence, cs: &ScalarCredalSet, j: usize) -> Result<ProbabilityInterval> {
    optimize_scalar(&build_grouped_sums(e, &Target::Inclusion(j))?, cs)
}
