//! Replicated train/test protocol over down-sampled training sizes, and
//! inclusion-probability curves, emitted as CSV tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use crate::bma::{self, PosteriorWeights};
use crate::cma_ib::{self, ProbabilityInterval};
use crate::cma_nb;
use crate::config::{Method, MethodConfig, MethodSpec};
use crate::dataset::{format_float, stratified_sample, stratified_split, Class, Dataset, SplitSpec, Standardizer};
use crate::decision::{decide_interval, decide_point, Prediction};
use crate::error::{Error, Result};
use crate::metrics::{split_report, summarize, EvaluationReport};
use crate::model_space::{fit_ensemble, Ensemble};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Training sizes for the prediction experiment, ascending.
    pub sizes: Vec<usize>,
    /// Training sizes for the inclusion curves, ascending.
    pub inclusion_sizes: Vec<usize>,
    pub replicates: usize,
    /// Samples drawn per inclusion size; 1 gives a single-pass curve.
    pub inclusion_replicates: usize,
    pub test_size: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Z-score covariates with statistics of the training part.
    pub standardize: bool,
    /// Per-method configuration keyed by method name.
    pub method: BTreeMap<String, MethodConfig>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            sizes: vec![30, 60, 100, 200, 400, 600, 1000, 1500],
            inclusion_sizes: vec![30, 100, 300, 1000, 3000, 6000],
            replicates: 30,
            inclusion_replicates: 1,
            test_size: 1000,
            seed: 0,
            methods: Method::ALL.to_vec(),
            standardize: false,
            method: BTreeMap::new(),
        }
    }
}

fn check_ascending(name: &str, sizes: &[usize]) -> Result<()> {
    if sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("{name} must be strictly ascending")));
    }
    Ok(())
}

impl ProtocolConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        check_ascending("sizes", &self.sizes)?;
        check_ascending("inclusion_sizes", &self.inclusion_sizes)?;
        if self.replicates == 0 || self.inclusion_replicates == 0 {
            return Err(Error::Config("replicate counts must be at least 1".into()));
        }
        if self.test_size == 0 {
            return Err(Error::Config("test_size must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        for name in self.method.keys() {
            name.parse::<Method>()?;
        }
        Ok(())
    }

    pub fn method_config(&self, m: Method) -> MethodConfig {
        self.method.get(m.name()).cloned().unwrap_or_default()
    }

    pub fn resolve(&self, m: Method, k: usize) -> Result<MethodSpec> {
        m.resolve(&self.method_config(m), k)
    }
}

/// Independent seed for one (size, replicate) unit, so that changing the
/// size grid leaves the other units' draws untouched.
pub fn unit_seed(seed: u64, size: usize, replicate: usize) -> u64 {
    let mut z = seed;
    for v in [size as u64, replicate as u64] {
        z = splitmix(z ^ splitmix(v));
    }
    z
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A method bound to one fitted ensemble.
pub struct Inference<'a> {
    ensemble: &'a Ensemble,
    spec: &'a MethodSpec,
    weights: Option<PosteriorWeights>,
}

impl<'a> Inference<'a> {
    pub fn new(ensemble: &'a Ensemble, spec: &'a MethodSpec) -> Result<Self> {
        let weights = match spec {
            MethodSpec::Point(p) => Some(bma::posterior_weights(&ensemble.evidence, p)?),
            _ => None,
        };
        Ok(Self {
            ensemble,
            spec,
            weights,
        })
    }

    pub fn is_credal(&self) -> bool {
        self.weights.is_none()
    }

    /// Posterior probability of `c1` (a point for precise priors) from the
    /// per-model probabilities.
    pub fn class_interval(&self, model_probs: &[f64]) -> Result<ProbabilityInterval> {
        let ev = &self.ensemble.evidence;
        match (self.spec, &self.weights) {
            (_, Some(w)) => Ok(ProbabilityInterval::point(bma::predict_from_probs(w, model_probs))),
            (MethodSpec::Scalar(cs), _) => Ok(cma_ib::class_interval_from_probs(ev, cs, model_probs)?.0),
            (MethodSpec::Box(b), _) => Ok(cma_nb::class_interval_nb_from_probs(ev, b, model_probs)?.0),
            (MethodSpec::Point(_), None) => unreachable!("point priors always carry weights"),
        }
    }

    pub fn inclusion(&self, j: usize) -> Result<ProbabilityInterval> {
        let ev = &self.ensemble.evidence;
        if j >= ev.k() {
            return Err(Error::DimensionMismatch {
                expected: ev.k(),
                actual: j,
            });
        }
        match (self.spec, &self.weights) {
            (_, Some(w)) => Ok(ProbabilityInterval::point(bma::inclusion_prob(w, j))),
            (MethodSpec::Scalar(cs), _) => cma_ib::inclusion_interval(ev, cs, j),
            (MethodSpec::Box(b), _) => cma_nb::inclusion_interval_nb(ev, b, j),
            (MethodSpec::Point(_), None) => unreachable!("point priors always carry weights"),
        }
    }

    /// Point rule for precise priors, interval dominance otherwise.
    pub fn decide(&self, c1: &ProbabilityInterval) -> Prediction {
        if self.is_credal() {
            decide_interval(c1)
        } else {
            Prediction::Determinate(decide_point(c1.lo))
        }
    }
}

/// Per-model probabilities for every row of `test`.
pub fn model_probs_for(ensemble: &Ensemble, test: &Dataset) -> Vec<Vec<f64>> {
    test.rows().map(|x| ensemble.model_probs(x)).collect()
}

pub fn class_intervals(inf: &Inference, probs: &[Vec<f64>]) -> Result<Vec<ProbabilityInterval>> {
    probs.iter().map(|p| inf.class_interval(p)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub size: usize,
    pub replicate: usize,
    pub method: Method,
    pub report: EvaluationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionRow {
    pub size: usize,
    pub replicate: usize,
    pub covariate: String,
    pub method: Method,
    /// Precise-prior methods give a point, credal methods an interval.
    pub point: Option<f64>,
    pub interval: Option<ProbabilityInterval>,
}

/// Evaluates every method on one split. Credal methods are scored against
/// their reference point method.
pub fn evaluate_split(
    train: &Dataset,
    test: &Dataset,
    cfg: &ProtocolConfig,
) -> Result<Vec<(Method, EvaluationReport)>> {
    let k = train.k();
    let ensemble = fit_ensemble(train)?;
    let probs = model_probs_for(&ensemble, test);
    let truth: &[Class] = test.labels();

    let mut point_cache: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    let mut point_probs = |m: Method| -> Result<Vec<f64>> {
        if let Some(p) = point_cache.get(&m) {
            return Ok(p.clone());
        }
        let spec = cfg.resolve(m, k)?;
        let inf = Inference::new(&ensemble, &spec)?;
        let p: Vec<f64> = class_intervals(&inf, &probs)?.iter().map(|iv| iv.lo).collect();
        point_cache.insert(m, p.clone());
        Ok(p)
    };

    let mut out = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let reference = point_probs(m.reference())?;
        let preds: Vec<Prediction> = if m.is_credal() {
            let spec = cfg.resolve(m, k)?;
            let inf = Inference::new(&ensemble, &spec)?;
            class_intervals(&inf, &probs)?.iter().map(decide_interval).collect()
        } else {
            reference
                .iter()
                .map(|&p| Prediction::Determinate(decide_point(p)))
                .collect()
        };
        out.push((m, split_report(&reference, &preds, truth)?));
    }
    Ok(out)
}

fn prepare(train: Dataset, test: Dataset, standardize: bool) -> (Dataset, Dataset) {
    if standardize {
        let s = Standardizer::fit(&train);
        (s.apply(&train), s.apply(&test))
    } else {
        (train, test)
    }
}

/// Runs every (size, replicate) unit in parallel; rows come back ordered by
/// size, replicate and method.
pub fn run_protocol(d: &Dataset, cfg: &ProtocolConfig) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    for &m in &cfg.methods {
        cfg.resolve(m, d.k())?;
        cfg.resolve(m.reference(), d.k())?;
    }
    let units: Vec<(usize, usize)> = cfg
        .sizes
        .iter()
        .flat_map(|&s| (0..cfg.replicates).map(move |r| (s, r)))
        .collect();
    let per_unit = units
        .par_iter()
        .map(|&(size, replicate)| {
            let spec = SplitSpec::stratified(size, cfg.test_size, unit_seed(cfg.seed, size, replicate));
            let (train, test) = stratified_split(d, &spec)?;
            let (train, test) = prepare(train, test, cfg.standardize);
            let reports = evaluate_split(&train, &test, cfg)?;
            Ok(reports
                .into_iter()
                .map(|(method, report)| MetricRow {
                    size,
                    replicate,
                    method,
                    report,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_unit.into_iter().flatten().collect())
}

/// Inclusion probabilities (points or intervals) of every covariate on
/// training-only samples of each inclusion size.
pub fn inclusion_curves(d: &Dataset, cfg: &ProtocolConfig) -> Result<Vec<InclusionRow>> {
    cfg.validate()?;
    let specs: Vec<(Method, MethodSpec)> = cfg
        .methods
        .iter()
        .map(|&m| Ok((m, cfg.resolve(m, d.k())?)))
        .collect::<Result<_>>()?;
    let units: Vec<(usize, usize)> = cfg
        .inclusion_sizes
        .iter()
        .flat_map(|&s| (0..cfg.inclusion_replicates).map(move |r| (s, r)))
        .collect();
    let per_unit = units
        .par_iter()
        .map(|&(size, replicate)| {
            let sample = stratified_sample(d, size, unit_seed(cfg.seed ^ 0x1c1_u64, size, replicate))?;
            let sample = if cfg.standardize {
                Standardizer::fit(&sample).apply(&sample)
            } else {
                sample
            };
            let ensemble = fit_ensemble(&sample)?;
            let mut rows = Vec::new();
            for (j, name) in d.covariate_names().iter().enumerate() {
                for (m, spec) in &specs {
                    let inf = Inference::new(&ensemble, spec)?;
                    let iv = inf.inclusion(j)?;
                    let credal = inf.is_credal();
                    rows.push(InclusionRow {
                        size,
                        replicate,
                        covariate: name.clone(),
                        method: *m,
                        point: (!credal).then_some(iv.lo),
                        interval: credal.then_some(iv),
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_unit.into_iter().flatten().collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

const METRIC_COLUMNS: [&str; 10] = [
    "accuracy",
    "auc",
    "recall",
    "indeterminacy",
    "disc_acc",
    "u65",
    "u80",
    "acc_safe",
    "acc_prior_dep",
    "n_indet",
];

fn metric_values(r: &EvaluationReport) -> [Option<f64>; 10] {
    [
        Some(r.accuracy),
        r.auc,
        r.recall,
        Some(r.indeterminacy),
        Some(r.discounted_accuracy),
        Some(r.u65),
        Some(r.u80),
        r.acc_safe,
        r.acc_prior_dependent,
        Some(r.counts.n_indeterminate as f64),
    ]
}

pub fn write_metrics_csv(rows: &[MetricRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["size", "replicate", "method"];
    header.extend(METRIC_COLUMNS);
    out.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.size.to_string(), row.replicate.to_string(), row.method.to_string()];
        rec.extend(metric_values(&row.report).iter().map(|v| fmt_opt(*v)));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

fn summary_header(keys: &[&str], columns: &[&str]) -> Vec<String> {
    let mut header: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
    for c in columns {
        for suffix in ["mean", "median", "q1", "q3"] {
            header.push(format!("{c}_{suffix}"));
        }
    }
    header
}

fn summary_cells(samples: &[Vec<f64>]) -> Vec<String> {
    samples
        .iter()
        .flat_map(|v| match summarize(v) {
            Some(s) => [s.mean, s.median, s.q1, s.q3].map(format_float),
            None => Default::default(),
        })
        .collect()
}

/// Per (size, method) mean, median and quartiles over replicates; absent
/// values are skipped.
pub fn write_metrics_summary_csv(rows: &[MetricRow], w: impl Write) -> Result<()> {
    let mut groups: BTreeMap<(usize, Method), Vec<Vec<f64>>> = BTreeMap::new();
    for row in rows {
        let g = groups
            .entry((row.size, row.method))
            .or_insert_with(|| vec![Vec::new(); METRIC_COLUMNS.len()]);
        for (col, v) in g.iter_mut().zip(metric_values(&row.report)) {
            col.extend(v);
        }
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(summary_header(&["size", "method"], &METRIC_COLUMNS))?;
    for ((size, method), samples) in &groups {
        let mut rec = vec![size.to_string(), method.to_string()];
        rec.extend(summary_cells(samples));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<metrics summary>", e))?;
    Ok(())
}

pub fn write_inclusion_csv(rows: &[InclusionRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["size", "replicate", "covariate", "method", "point", "lo", "hi"])?;
    for row in rows {
        out.write_record([
            row.size.to_string(),
            row.replicate.to_string(),
            row.covariate.clone(),
            row.method.to_string(),
            fmt_opt(row.point),
            fmt_opt(row.interval.map(|iv| iv.lo)),
            fmt_opt(row.interval.map(|iv| iv.hi)),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<inclusion>", e))?;
    Ok(())
}

pub fn write_inclusion_summary_csv(rows: &[InclusionRow], w: impl Write) -> Result<()> {
    // covariates keep their first-seen order
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, usize, Method), Vec<Vec<f64>>> = BTreeMap::new();
    for row in rows {
        let c = match order.iter().position(|n| *n == row.covariate) {
            Some(c) => c,
            None => {
                order.push(&row.covariate);
                order.len() - 1
            }
        };
        let g = groups
            .entry((row.size, c, row.method))
            .or_insert_with(|| vec![Vec::new(); 3]);
        g[0].extend(row.point);
        g[1].extend(row.interval.map(|iv| iv.lo));
        g[2].extend(row.interval.map(|iv| iv.hi));
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(summary_header(&["size", "covariate", "method"], &["point", "lo", "hi"]))?;
    for ((size, c, method), samples) in &groups {
        let mut rec = vec![size.to_string(), order[*c].to_string(), method.to_string()];
        rec.extend(summary_cells(samples));
        out.write_record(&rec)?;
    }
    out.flush().map_err(|e| Error::io("<inclusion summary>", e))?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    let path = dir.join(name);
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok(std::io::BufWriter::new(f))
}

/// Runs both experiments and writes `metrics.csv`, `metrics_summary.csv`,
/// `inclusion.csv` and `inclusion_summary.csv` into `dir`.
pub fn run_to_dir(d: &Dataset, cfg: &ProtocolConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if !cfg.sizes.is_empty() {
        let rows = run_protocol(d, cfg)?;
        write_metrics_csv(&rows, create(dir, "metrics.csv")?)?;
        write_metrics_summary_csv(&rows, create(dir, "metrics_summary.csv")?)?;
    }
    if !cfg.inclusion_sizes.is_empty() {
        let rows = inclusion_curves(d, cfg)?;
        write_inclusion_csv(&rows, create(dir, "inclusion.csv")?)?;
        write_inclusion_summary_csv(&rows, create(dir, "inclusion_summary.csv")?)?;
    }
    Ok(())
}
