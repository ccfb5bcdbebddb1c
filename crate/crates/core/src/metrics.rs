//! Scores for point and set-valued predictions.

use statrs::statistics::{Data, Distribution, OrderStatistics};

use crate::dataset::Class;
use crate::decision::{decide_point, Prediction};
use crate::error::{Error, Result};

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: b, actual: a });
    }
    if a == 0 {
        return Err(Error::Metric("no instances to score".into()));
    }
    Ok(())
}

pub fn accuracy(preds: &[Class], truth: &[Class]) -> Result<f64> {
    check_aligned(preds.len(), truth.len())?;
    let correct = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// Fraction of positives predicted positive.
pub fn recall(preds: &[Class], truth: &[Class]) -> Result<f64> {
    check_aligned(preds.len(), truth.len())?;
    let positives = truth.iter().filter(|t| t.is_positive()).count();
    if positives == 0 {
        return Err(Error::Metric("recall needs at least one positive instance".into()));
    }
    let hits = preds
        .iter()
        .zip(truth)
        .filter(|(p, t)| t.is_positive() && p.is_positive())
        .count();
    Ok(hits as f64 / positives as f64)
}

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted as
/// half a win.
pub fn auc(scores: &[f64], truth: &[Class]) -> Result<f64> {
    check_aligned(scores.len(), truth.len())?;
    let n1 = truth.iter().filter(|t| t.is_positive()).count();
    let n0 = truth.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::Metric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // sum of average ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos = order[i..=j].iter().filter(|&&r| truth[r].is_positive()).count();
        rank_sum += avg_rank * pos as f64;
        i = j + 1;
    }
    let (n0, n1) = (n0 as f64, n1 as f64);
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n0 * n1))
}

/// `1 / |prediction|` when the prediction contains the truth, else 0.
pub fn discounted_accuracy(pred: Prediction, truth: Class) -> f64 {
    if pred.contains(truth) {
        1.0 / pred.set_size() as f64
    } else {
        0.0
    }
}

/// Quadratic utilities of discounted accuracy that value a correct
/// two-class answer at 0.65 and 0.80. Written as `x + c x (1 - x)`, which
/// equals `(1 + c) x - c x^2` and keeps both endpoints exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Utility {
    U65,
    U80,
}

impl Utility {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Utility::U65 => x + 0.6 * x * (1.0 - x),
            Utility::U80 => x + 1.2 * x * (1.0 - x),
        }
    }
}

pub fn utility(score: f64, which: Utility) -> f64 {
    which.apply(score)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub n_test: usize,
    pub n_indeterminate: usize,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub accuracy: f64,
    /// Absent when the test set holds a single class.
    pub auc: Option<f64>,
    /// Absent when the test set has no positives.
    pub recall: Option<f64>,
    pub indeterminacy: f64,
    pub acc_safe: Option<f64>,
    pub acc_prior_dependent: Option<f64>,
    pub discounted_accuracy: f64,
    pub u65: f64,
    pub u80: f64,
    pub counts: Counts,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Scores a reference point predictor (through its probabilities of `c1`)
/// together with a set-valued predictor on the same instances. Accuracy,
/// AUC and recall describe the point predictor; the remaining scores
/// describe the set-valued one, and the safe/prior-dependent split
/// partitions the point predictor's hits by whether the set-valued
/// prediction was determinate.
pub fn split_report(point_probs: &[f64], preds: &[Prediction], truth: &[Class]) -> Result<EvaluationReport> {
    check_aligned(point_probs.len(), truth.len())?;
    check_aligned(preds.len(), truth.len())?;
    let point: Vec<Class> = point_probs.iter().map(|&p| decide_point(p)).collect();
    let hit = |i: usize| if point[i] == truth[i] { 1.0 } else { 0.0 };

    let mut counts = Counts {
        n_test: truth.len(),
        ..Counts::default()
    };
    for (i, pred) in preds.iter().enumerate() {
        match (pred.class(), truth[i]) {
            (None, _) => counts.n_indeterminate += 1,
            (Some(Class::C1), Class::C1) => counts.tp += 1,
            (Some(Class::C1), Class::C0) => counts.fp += 1,
            (Some(Class::C0), Class::C0) => counts.tn += 1,
            (Some(Class::C0), Class::C1) => counts.fn_ += 1,
        }
    }
    let disc: Vec<f64> = preds
        .iter()
        .zip(truth)
        .map(|(p, t)| discounted_accuracy(*p, *t))
        .collect();
    let n = truth.len() as f64;
    Ok(EvaluationReport {
        accuracy: accuracy(&point, truth)?,
        auc: auc(point_probs, truth).ok(),
        recall: recall(&point, truth).ok(),
        indeterminacy: counts.n_indeterminate as f64 / n,
        acc_safe: mean((0..truth.len()).filter(|&i| !preds[i].is_indeterminate()).map(hit)),
        acc_prior_dependent: mean((0..truth.len()).filter(|&i| preds[i].is_indeterminate()).map(hit)),
        discounted_accuracy: disc.iter().sum::<f64>() / n,
        u65: disc.iter().map(|&x| Utility::U65.apply(x)).sum::<f64>() / n,
        u80: disc.iter().map(|&x| Utility::U80.apply(x)).sum::<f64>() / n,
        counts,
    })
}

/// Mean, median and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// `None` for an empty sample. Quartiles follow the statrs convention
/// (median-unbiased interpolation).
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut data = Data::new(values.to_vec());
    Some(Summary {
        mean: data.mean()?,
        median: data.median(),
        q1: data.lower_quartile(),
        q3: data.upper_quartile(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Class::{C0, C1};

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[C1, C0], &[C1, C0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[C1, C0], &[C0, C1]).unwrap(), 0.0);
        assert!((accuracy(&[C1, C0, C1], &[C1, C1, C1]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[C1], &[C1, C0]).is_err());
    }

    #[test]
    fn recall_examples() {
        let truth = [C1; 8];
        let mut preds = [C0; 8];
        assert_eq!(recall(&preds, &truth).unwrap(), 0.0);
        preds[2] = C1;
        preds[5] = C1;
        assert_eq!(recall(&preds, &truth).unwrap(), 0.25);
        assert!(recall(&[C0], &[C0]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[C0, C0, C1, C1]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4; 4], &[C0, C1, C0, C1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.9, 0.8, 0.3], &[C1, C0, C1]).unwrap(), 0.5);
        assert!(auc(&[0.1, 0.2], &[C1, C1]).is_err());
    }

    #[test]
    fn utilities() {
        assert!((utility(0.5, Utility::U65) - 0.65).abs() < 1e-15);
        assert!((utility(0.5, Utility::U80) - 0.80).abs() < 1e-15);
        for u in [Utility::U65, Utility::U80] {
            assert_eq!(u.apply(0.0), 0.0);
            assert_eq!(u.apply(1.0), 1.0);
        }
    }

    #[test]
    fn discounted() {
        assert_eq!(discounted_accuracy(Prediction::Determinate(C1), C1), 1.0);
        assert_eq!(discounted_accuracy(Prediction::Determinate(C1), C0), 0.0);
        assert_eq!(discounted_accuracy(Prediction::Indeterminate, C0), 0.5);
    }

    #[test]
    fn report_partitions() {
        let probs = [0.9, 0.2, 0.6, 0.4];
        let truth = [C1, C0, C0, C0];
        let preds = [
            Prediction::Determinate(C1),
            Prediction::Determinate(C0),
            Prediction::Indeterminate,
            Prediction::Indeterminate,
        ];
        let r = split_report(&probs, &preds, &truth).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.indeterminacy, 0.5);
        assert_eq!(r.acc_safe, Some(1.0));
        assert_eq!(r.acc_prior_dependent, Some(0.5));
        assert_eq!(r.discounted_accuracy, 0.75);
        assert!((r.u65 - (2.0 + 1.3) / 4.0).abs() < 1e-15);
        assert_eq!(r.counts.n_indeterminate, 2);
        assert_eq!((r.counts.tp, r.counts.tn), (1, 1));
        assert_eq!(r.recall, Some(1.0));
    }

    #[test]
    fn all_determinate_has_no_prior_dependent_split() {
        let probs = [0.9, 0.2];
        let preds: Vec<Prediction> = probs
            .iter()
            .map(|&p| Prediction::Determinate(decide_point(p)))
            .collect();
        let r = split_report(&probs, &preds, &[C1, C1]).unwrap();
        assert_eq!(r.indeterminacy, 0.0);
        assert_eq!(r.acc_prior_dependent, None);
        assert_eq!(r.auc, None);
        assert_eq!(r.u65, r.accuracy);
    }

    #[test]
    fn summary() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!((s.mean, s.median), (3.0, 3.0));
        assert!(s.q1 < 3.0 && s.q3 > 3.0);
        assert!(summarize(&[]).is_none());
    }
}
