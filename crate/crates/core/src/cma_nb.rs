//! Credal model averaging over non-identical Bernoulli priors, each inclusion
//! probability `theta_j` ranging independently over `[lo_j, hi_j]`.
//!
//! The unnormalized posterior weight of a model is multilinear in `theta`, so
//! at fixed other coordinates the posterior expectation is a ratio of two
//! affine functions of `theta_j` with a positive denominator, which is
//! monotone. Box extrema are therefore attained at vertices, and the exact
//! default enumerates them. A multi-start projected-gradient optimizer is kept
//! as a cross-check and for boxes with too many free coordinates.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cma_ib::{ProbabilityInterval, ScalarCredalSet, Target};
use crate::error::{Error, Result};
use crate::model_space::{Ensemble, Evidence};

#[derive(Debug, Clone, PartialEq)]
pub struct BoxCredalSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxCredalSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                actual: hi.len(),
            });
        }
        if lo.is_empty() {
            return Err(Error::InvalidCredalSet("box has no coordinates".into()));
        }
        for (j, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(*l > 0.0 && l <= h && *h < 1.0) {
                return Err(Error::InvalidCredalSet(format!(
                    "covariate {j}: need 0 < lo <= hi < 1, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// Every coordinate in `[epsilon, 1 - epsilon]`.
    pub fn near_ignorance(k: usize, epsilon: f64) -> Result<Self> {
        Self::new(vec![epsilon; k], vec![1.0 - epsilon; k])
    }

    /// The scalar interval replicated on every coordinate.
    pub fn from_scalar(k: usize, cs: &ScalarCredalSet) -> Result<Self> {
        Self::new(vec![cs.lo(); k], vec![cs.hi(); k])
    }

    pub fn point(theta: Vec<f64>) -> Result<Self> {
        Self::new(theta.clone(), theta)
    }

    pub fn k(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.k()
            && theta
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(t, (l, h))| t >= l && t <= h)
    }

    pub fn is_within(&self, other: &BoxCredalSet) -> bool {
        self.k() == other.k() && other.contains(&self.lo) && other.contains(&self.hi)
    }

    /// Coordinates with `lo < hi`.
    fn free_coordinates(&self) -> Vec<usize> {
        (0..self.k()).filter(|&j| self.lo[j] < self.hi[j]).collect()
    }
}

/// Posterior expectation of per-model values as a function of the
/// inclusion-probability vector.
#[derive(Debug, Clone)]
pub struct BoxObjective<'a> {
    k: usize,
    log_marginals: &'a [f64],
    values: Vec<f64>,
}

impl<'a> BoxObjective<'a> {
    pub fn new(e: &'a Evidence, target: &Target) -> Result<Self> {
        Ok(Self {
            k: e.k(),
            log_marginals: e.log_marginals(),
            values: target.model_values(e.k())?,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Shifted weights `exp(ln P(D|m) + ln P(m) - max)` for every model.
    fn weights(&self, theta: &[f64]) -> Vec<f64> {
        let k = self.k;
        let log_in: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
        let log_out: Vec<f64> = theta.iter().map(|t| (1.0 - t).ln()).collect();
        let mut log_w = vec![0.0; 1 << k];
        log_w[0] = log_out.iter().sum();
        for mask in 1..1usize << k {
            let b = mask.trailing_zeros() as usize;
            log_w[mask] = log_w[mask & (mask - 1)] + log_in[b] - log_out[b];
        }
        for (w, lm) in log_w.iter_mut().zip(self.log_marginals) {
            *w += lm;
        }
        let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        log_w.iter().map(|w| (w - max).exp()).collect()
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let w = self.weights(theta);
        let num: f64 = w.iter().zip(&self.values).map(|(w, a)| w * a).sum();
        let den: f64 = w.iter().sum();
        (num / den).clamp(0.0, 1.0)
    }

    pub fn value_and_gradient(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let w = self.weights(theta);
        let den: f64 = w.iter().sum();
        let h = w.iter().zip(&self.values).map(|(w, a)| w * a).sum::<f64>() / den;
        let mut inside = vec![0.0; self.k];
        let mut outside = vec![0.0; self.k];
        for (mask, (wi, a)) in w.iter().zip(&self.values).enumerate() {
            let c = (a - h) * wi;
            for j in 0..self.k {
                if mask >> j & 1 == 1 {
                    inside[j] += c;
                } else {
                    outside[j] += c;
                }
            }
        }
        let grad = (0..self.k)
            .map(|j| (inside[j] / theta[j] - outside[j] / (1.0 - theta[j])) / den)
            .collect();
        (h.clamp(0.0, 1.0), grad)
    }
}

pub fn objective(e: &Evidence, target: &Target, theta: &[f64]) -> Result<f64> {
    check_theta(e.k(), theta)?;
    Ok(BoxObjective::new(e, target)?.value(theta))
}

pub fn gradient(e: &Evidence, target: &Target, theta: &[f64]) -> Result<Vec<f64>> {
    check_theta(e.k(), theta)?;
    Ok(BoxObjective::new(e, target)?.value_and_gradient(theta).1)
}

fn check_theta(k: usize, theta: &[f64]) -> Result<()> {
    if theta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: theta.len(),
        });
    }
    if theta.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::InvalidCredalSet("theta must lie strictly inside (0, 1)".into()));
    }
    Ok(())
}

/// Settings for the projected-gradient optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        Self {
            starts: 20,
            max_iter: 500,
            tol: 1e-10,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxOptions {
    /// Largest number of free coordinates enumerated exhaustively.
    pub vertex_cap: usize,
    /// Use the local optimizer when the vertex cap is exceeded.
    pub allow_local: bool,
    /// Also run the local optimizer and warn when it disagrees.
    pub cross_check: bool,
    pub local: LocalOptions,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self {
            vertex_cap: 20,
            allow_local: false,
            cross_check: false,
            local: LocalOptions::default(),
        }
    }
}

/// Exact extremes over the box by evaluating every vertex.
pub fn vertex_extremes(f: &BoxObjective, b: &BoxCredalSet) -> Result<ProbabilityInterval> {
    check_box(f, b)?;
    let free = b.free_coordinates();
    let mut theta = b.lo().to_vec();
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in 0..1usize << free.len() {
        for (bit, &j) in free.iter().enumerate() {
            theta[j] = if v >> bit & 1 == 1 { b.hi[j] } else { b.lo[j] };
        }
        let h = f.value(&theta);
        min = min.min(h);
        max = max.max(h);
    }
    ProbabilityInterval::new(min, max)
}

fn check_box(f: &BoxObjective, b: &BoxCredalSet) -> Result<()> {
    if b.k() != f.k() {
        return Err(Error::DimensionMismatch {
            expected: f.k(),
            actual: b.k(),
        });
    }
    Ok(())
}

/// Multi-start projected gradient descent (for the minimum) and ascent (for
/// the maximum) with backtracking line search.
pub fn local_extremes(f: &BoxObjective, b: &BoxCredalSet, opts: &LocalOptions) -> Result<ProbabilityInterval> {
    check_box(f, b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..opts.starts.max(1) {
        let start: Vec<f64> =
            b.lo.iter()
                .zip(&b.hi)
                .map(|(l, h)| if l < h { rng.random_range(*l..=*h) } else { *l })
                .collect();
        min = min.min(projected_descent(f, b, start.clone(), 1.0, opts));
        max = max.max(-projected_descent(f, b, start, -1.0, opts));
    }
    ProbabilityInterval::new(min, max)
}

/// Minimizes `sign * h` from `x`; returns the final `sign * h`.
fn projected_descent(f: &BoxObjective, b: &BoxCredalSet, mut x: Vec<f64>, sign: f64, opts: &LocalOptions) -> f64 {
    let project = |v: &mut [f64]| {
        for ((v, l), h) in v.iter_mut().zip(&b.lo).zip(&b.hi) {
            *v = v.clamp(*l, *h);
        }
    };
    let diameter = b.lo.iter().zip(&b.hi).map(|(l, h)| h - l).fold(0.0, f64::max);
    let eval = |x: &[f64]| {
        let (h, g) = f.value_and_gradient(x);
        (sign * h, g.into_iter().map(|g| sign * g).collect::<Vec<_>>())
    };
    let (mut fx, mut gx) = eval(&x);
    for _ in 0..opts.max_iter {
        let gmax = gx.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax == 0.0 || diameter == 0.0 {
            break;
        }
        // The first trial lets every coordinate with a nonzero slope reach
        // its bound; the objective is often exponentially flat along some
        // axes, and a step sized by the steepest axis would crawl along them.
        let gmin = gx.iter().map(|g| g.abs()).filter(|g| *g > 0.0).fold(gmax, f64::min);
        let mut t = diameter / gmin.max(gmax * 1e-18);
        let t_min = diameter / gmax * 1e-20;
        let mut accepted = None;
        while t > t_min {
            let mut y: Vec<f64> = x.iter().zip(&gx).map(|(x, g)| x - t * g).collect();
            project(&mut y);
            let decrease: f64 = gx.iter().zip(x.iter().zip(&y)).map(|(g, (a, b))| g * (a - b)).sum();
            let fy = sign * f.value(&y);
            if fy <= fx - 1e-4 * decrease {
                accepted = Some((y, fy));
                break;
            }
            t *= 0.5;
        }
        let Some((y, fy)) = accepted else {
            break;
        };
        let moved = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        if moved < opts.tol {
            fx = fy;
            break;
        }
        (fx, gx) = eval(&x);
    }
    fx
}

pub fn optimize_box(e: &Evidence, target: &Target, b: &BoxCredalSet) -> Result<ProbabilityInterval> {
    optimize_box_with(e, target, b, &BoxOptions::default())
}

pub fn optimize_box_with(
    e: &Evidence,
    target: &Target,
    b: &BoxCredalSet,
    opts: &BoxOptions,
) -> Result<ProbabilityInterval> {
    let f = BoxObjective::new(e, target)?;
    check_box(&f, b)?;
    let free = b.free_coordinates().len();
    if free > opts.vertex_cap {
        if opts.allow_local {
            return local_extremes(&f, b, &opts.local);
        }
        return Err(Error::VertexCapExceeded {
            k: free,
            cap: opts.vertex_cap,
        });
    }
    let exact = vertex_extremes(&f, b)?;
    if opts.cross_check {
        let local = local_extremes(&f, b, &opts.local)?;
        if (local.lo - exact.lo).abs() > 1e-6 || (local.hi - exact.hi).abs() > 1e-6 {
            warn!("local optimizer {local:?} disagrees with vertex enumeration {exact:?}");
        }
    }
    Ok(exact)
}

pub fn class_interval_nb_from_probs(
    e: &Evidence,
    b: &BoxCredalSet,
    model_probs: &[f64],
) -> Result<(ProbabilityInterval, ProbabilityInterval)> {
    let c1 = optimize_box(e, &Target::ClassProbability(model_probs), b)?;
    Ok((c1, c1.complement()))
}

/// `(c1, c0)` posterior intervals for one instance.
pub fn class_interval_nb(
    e: &Ensemble,
    b: &BoxCredalSet,
    x: &[f64],
) -> Result<(ProbabilityInterval, ProbabilityInterval)> {
    class_interval_nb_from_probs(&e.evidence, b, &e.model_probs(x))
}

pub fn inclusion_interval_nb(e: &Evidence, b: &BoxCredalSet, j: usize) -> Result<ProbabilityInterval> {
    optimize_box(e, &Target::Inclusion(j), b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cma_ib::{self, build_grouped_sums};

    fn worked() -> Evidence {
        Evidence::new(2, [1f64, 2.0, 3.0, 4.0].map(f64::ln).to_vec()).unwrap()
    }

    #[test]
    fn vertex_hand_value() {
        let h = objective(&worked(), &Target::Inclusion(0), &[0.95, 0.05]).unwrap();
        assert!((h - 1.995 / 2.05).abs() < 1e-12, "{h}");
    }

    #[test]
    fn equal_theta_matches_scalar_objective() {
        let e = Evidence::new(3, vec![0.1, -0.3, 0.7, 0.2, -1.0, 0.4, 0.0, 0.5]).unwrap();
        let probs = [0.1, 0.9, 0.4, 0.3, 0.7, 0.2, 0.5, 0.8];
        let target = Target::ClassProbability(&probs);
        let g = build_grouped_sums(&e, &target).unwrap();
        for t in [0.05, 0.3, 0.77] {
            let h = objective(&e, &target, &[t; 3]).unwrap();
            assert!((h - g.objective(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_values_give_constant() {
        let h = objective(&worked(), &Target::ClassProbability(&[0.42; 4]), &[0.2, 0.9]).unwrap();
        assert!((h - 0.42).abs() < 1e-14);
    }

    #[test]
    fn point_box_equals_objective() {
        let e = worked();
        let b = BoxCredalSet::point(vec![0.3, 0.8]).unwrap();
        let iv = optimize_box(&e, &Target::Inclusion(1), &b).unwrap();
        let h = objective(&e, &Target::Inclusion(1), &[0.3, 0.8]).unwrap();
        assert_eq!((iv.lo, iv.hi), (h, h));
    }

    #[test]
    fn diagonal_box_equals_degenerate_scalar() {
        let e = worked();
        let b = BoxCredalSet::point(vec![0.35, 0.35]).unwrap();
        let nb = optimize_box(&e, &Target::Inclusion(0), &b).unwrap();
        let ib = cma_ib::inclusion_interval(&e, &ScalarCredalSet::new(0.35, 0.35).unwrap(), 0).unwrap();
        assert!((nb.lo - ib.lo).abs() < 1e-13 && (nb.hi - ib.hi).abs() < 1e-13);
    }

    #[test]
    fn worked_ignorance_box_matches_grid_and_contains_ib() {
        let e = worked();
        let target = Target::Inclusion(0);
        let b = BoxCredalSet::near_ignorance(2, 0.05).unwrap();
        let iv = optimize_box(&e, &target, &b).unwrap();
        let f = BoxObjective::new(&e, &target).unwrap();
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for i in 0..=45 {
            for j in 0..=45 {
                let h = f.value(&[0.05 + 0.02 * i as f64, 0.05 + 0.02 * j as f64]);
                min = min.min(h);
                max = max.max(h);
            }
        }
        assert!((iv.lo - min).abs() < 1e-8 && (iv.hi - max).abs() < 1e-8);
        let ib = cma_ib::inclusion_interval(&e, &ScalarCredalSet::new(0.05, 0.95).unwrap(), 0).unwrap();
        assert!(iv.hi >= ib.hi && iv.lo <= ib.lo);
    }

    #[test]
    fn complement_and_errors() {
        let e = worked();
        let (c1, c0) = class_interval_nb_from_probs(
            &e,
            &BoxCredalSet::near_ignorance(2, 0.05).unwrap(),
            &[0.2, 0.9, 0.5, 0.6],
        )
        .unwrap();
        assert!((c0.lo - (1.0 - c1.hi)).abs() < 1e-15);
        assert!(BoxCredalSet::new(vec![0.1], vec![0.05]).is_err());
        assert!(BoxCredalSet::new(vec![0.0], vec![0.5]).is_err());
        assert!(optimize_box(
            &e,
            &Target::Inclusion(0),
            &BoxCredalSet::near_ignorance(3, 0.05).unwrap()
        )
        .is_err());
        assert!(objective(&e, &Target::Inclusion(0), &[0.0, 0.5]).is_err());
    }

    #[test]
    fn vertex_cap() {
        let e = worked();
        let b = BoxCredalSet::near_ignorance(2, 0.05).unwrap();
        let opts = BoxOptions {
            vertex_cap: 1,
            ..BoxOptions::default()
        };
        assert!(matches!(
            optimize_box_with(&e, &Target::Inclusion(0), &b, &opts),
            Err(Error::VertexCapExceeded { k: 2, cap: 1 })
        ));
        let opts = BoxOptions {
            allow_local: true,
            ..opts
        };
        let local = optimize_box_with(&e, &Target::Inclusion(0), &b, &opts).unwrap();
        let exact = optimize_box(&e, &Target::Inclusion(0), &b).unwrap();
        assert!((local.lo - exact.lo).abs() < 1e-6 && (local.hi - exact.hi).abs() < 1e-6);
    }

    #[test]
    fn nested_boxes_nest() {
        let e = Evidence::new(3, vec![0.1, -0.3, 0.7, 0.2, -1.0, 0.4, 0.0, 0.5]).unwrap();
        let outer = BoxCredalSet::near_ignorance(3, 0.05).unwrap();
        let inner = BoxCredalSet::new(vec![0.2, 0.5, 0.1], vec![0.6, 0.9, 0.3]).unwrap();
        assert!(inner.is_within(&outer));
        let a = inclusion_interval_nb(&e, &inner, 2).unwrap();
        let b = inclusion_interval_nb(&e, &outer, 2).unwrap();
        assert!(a.is_within(&b, 1e-12));
    }
}
