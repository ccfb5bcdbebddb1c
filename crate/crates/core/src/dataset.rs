//! Binary-class tabular data: CSV ingestion, stratified splitting and a
//! synthetic generator driven by a known logistic model.
//!
//! The CSV layout is a header row naming the covariates followed by a final
//! column called `class`; every other cell is a decimal number and class
//! values are `0` or `1`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::logit::sigmoid;

/// Name of the mandatory last CSV column.
pub const CLASS_COLUMN: &str = "class";

/// Binary class label. `C1` is the positive class (presence).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Class {
    C0,
    C1,
}

impl Class {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Class::C1
        } else {
            Class::C0
        }
    }

    pub fn is_positive(self) -> bool {
        self == Class::C1
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Class::C0 => 0,
            Class::C1 => 1,
        }
    }
}

/// Immutable table of `n` rows with `k` finite covariates and a binary class.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariate_names: Vec<String>,
    // row-major, n * k
    values: Vec<f64>,
    labels: Vec<Class>,
}

impl Dataset {
    pub fn new(covariate_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Class>) -> Result<Self> {
        let k = covariate_names.len();
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} covariate rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidDataset(format!(
                    "row {} has {} covariates, expected {k}",
                    i + 1,
                    row.len()
                )));
            }
            if let Some(c) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    column: c + 1,
                    message: "non-finite covariate value".into(),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            covariate_names,
            values,
            labels,
        })
    }

    pub fn k(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.k();
        &self.values[i * k..(i + 1) * k]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn labels(&self) -> &[Class] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Class {
        self.labels[i]
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|c| c.is_positive()).count()
    }

    /// Fraction of class-1 rows; 0 for an empty dataset.
    pub fn prevalence(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        self.positives() as f64 / self.n() as f64
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.n()
    }

    /// Rows at `indices`, in the order given.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let k = self.k();
        let mut values = Vec::with_capacity(indices.len() * k);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            covariate_names: self.covariate_names.clone(),
            values,
            labels,
        }
    }

    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
            return Err(Error::EmptyFile);
        }
        if header.len() < 2 {
            return Err(Error::MalformedHeader(
                "need at least one covariate column and a class column".into(),
            ));
        }
        let last = header.len() - 1;
        if &header[last] != CLASS_COLUMN {
            return Err(Error::MalformedHeader(format!(
                "last column must be named `{CLASS_COLUMN}`, found `{}`",
                &header[last]
            )));
        }
        if let Some(c) = header.iter().take(last).position(|h| h.is_empty()) {
            return Err(Error::MalformedHeader(format!("column {} has an empty name", c + 1)));
        }
        let names: Vec<String> = header.iter().take(last).map(str::to_owned).collect();
        let k = names.len();

        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let row = r + 1;
            let record = record.map_err(|e| Error::Parse {
                row,
                column: 0,
                message: e.to_string(),
            })?;
            if record.len() != k + 1 {
                return Err(Error::Parse {
                    row,
                    column: record.len().min(k + 1),
                    message: format!("expected {} fields, found {}", k + 1, record.len()),
                });
            }
            for (c, cell) in record.iter().take(k).enumerate() {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("non-numeric covariate `{cell}`"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: c + 1,
                        message: format!("non-finite covariate `{cell}`"),
                    });
                }
                values.push(v);
            }
            let cell = &record[k];
            let label = match cell.parse::<f64>() {
                Ok(0.0) => Class::C0,
                Ok(1.0) => Class::C1,
                _ => {
                    return Err(Error::Parse {
                        row,
                        column: k + 1,
                        message: format!("class value `{cell}` is not 0 or 1"),
                    })
                }
            };
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(Error::EmptyFile);
        }
        Ok(Self {
            covariate_names: names,
            values,
            labels,
        })
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.covariate_names.iter().map(String::as_str).collect();
        header.push(CLASS_COLUMN);
        w.write_record(&header)?;
        let mut fields = Vec::with_capacity(self.k() + 1);
        for (row, label) in self.rows().zip(&self.labels) {
            fields.clear();
            fields.extend(row.iter().map(|v| format_float(*v)));
            fields.push(label.as_u8().to_string());
            w.write_record(&fields)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Reads a dataset from a CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::read_csv(file)
}

pub fn save_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    d.write_csv(std::io::BufWriter::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_size: usize,
    pub test_size: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn stratified(train_size: usize, test_size: usize, seed: u64) -> Self {
        Self {
            train_size,
            test_size,
            seed,
            stratified: true,
        }
    }
}

/// `round(size * positives / n)` with halves rounded up, in exact integer
/// arithmetic.
fn rounded_positive_count(size: usize, positives: usize, n: usize) -> usize {
    let num = 2 * size as u128 * positives as u128 + n as u128;
    (num / (2 * n as u128)) as usize
}

/// Draws disjoint train and test subsets. With `stratified` set, each part
/// holds the source prevalence rounded to the nearest achievable count, and
/// the training part keeps at least one row of each class. Rows keep their
/// source order.
pub fn stratified_split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(d, spec.train_size, spec.test_size, spec.seed, spec.stratified)?;
    Ok((d.subset(&train), d.subset(&test)))
}

/// Training-only variant of [`stratified_split`].
pub fn stratified_sample(d: &Dataset, size: usize, seed: u64) -> Result<Dataset> {
    let (train, _) = split_indices(d, size, 0, seed, true)?;
    Ok(d.subset(&train))
}

fn split_indices(
    d: &Dataset,
    train_size: usize,
    test_size: usize,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = d.n();
    if train_size == 0 {
        return Err(Error::InfeasibleSplit("training size must be positive".into()));
    }
    if train_size + test_size > n {
        return Err(Error::InfeasibleSplit(format!(
            "train {train_size} + test {test_size} exceeds {n} rows"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if !stratified {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        let mut train = idx[..train_size].to_vec();
        let mut test = idx[train_size..train_size + test_size].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        return Ok((train, test));
    }

    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, c) in d.labels().iter().enumerate() {
        if c.is_positive() {
            pos.push(i)
        } else {
            neg.push(i)
        }
    }
    if pos.is_empty() {
        return Err(Error::MissingClass(1));
    }
    if neg.is_empty() {
        return Err(Error::MissingClass(0));
    }
    if train_size < 2 {
        return Err(Error::InfeasibleSplit(
            "a stratified training set needs at least two rows".into(),
        ));
    }

    let train_pos = rounded_positive_count(train_size, pos.len(), n).clamp(1, train_size - 1);
    let train_neg = train_size - train_pos;
    let test_pos = rounded_positive_count(test_size, pos.len(), n).min(test_size);
    let test_neg = test_size - test_pos;
    if train_pos + test_pos > pos.len() || train_neg + test_neg > neg.len() {
        return Err(Error::InfeasibleSplit(format!(
            "need {} class-1 and {} class-0 rows, source has {} and {}",
            train_pos + test_pos,
            train_neg + test_neg,
            pos.len(),
            neg.len()
        )));
    }

    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut train: Vec<usize> = pos[..train_pos].iter().chain(&neg[..train_neg]).copied().collect();
    let mut test: Vec<usize> = pos[train_pos..train_pos + test_pos]
        .iter()
        .chain(&neg[train_neg..train_neg + test_neg])
        .copied()
        .collect();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Draws `n` rows with i.i.d. standard-normal covariates and a Bernoulli class
/// whose logit is `coeffs[0] + sum over active j of coeffs[j + 1] * x_j`.
/// `active` holds zero-based covariate indices.
pub fn generate_synthetic(k: usize, n: usize, coeffs: &[f64], active: &[usize], seed: u64) -> Result<Dataset> {
    if k == 0 || n == 0 {
        return Err(Error::InvalidDataset("k and n must be positive".into()));
    }
    if coeffs.len() != k + 1 {
        return Err(Error::DimensionMismatch {
            expected: k + 1,
            actual: coeffs.len(),
        });
    }
    if let Some(&j) = active.iter().find(|&&j| j >= k) {
        return Err(Error::InvalidDataset(format!(
            "active covariate {j} out of range for k={k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * k);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = values.len();
        for _ in 0..k {
            values.push(rng.sample::<f64, _>(StandardNormal));
        }
        let x = &values[start..];
        let eta = coeffs[0] + active.iter().map(|&j| coeffs[j + 1] * x[j]).sum::<f64>();
        let u: f64 = rng.random();
        labels.push(Class::from_bool(u < sigmoid(eta)));
    }
    Ok(Dataset {
        covariate_names: (1..=k).map(|j| format!("x{j}")).collect(),
        values,
        labels,
    })
}

/// Shortest round-tripping decimal form, switching to exponent notation for
/// magnitudes below 1e-4 or from 1e15 on.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

/// Per-covariate z-scoring fitted on one dataset and applied to others.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(d: &Dataset) -> Self {
        let k = d.k();
        let n = d.n().max(1) as f64;
        let mut mean = vec![0.0; k];
        for row in d.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; k];
        for row in d.rows() {
            for j in 0..k {
                var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        // constant columns are centred but not rescaled
        let scale = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, d: &Dataset) -> Dataset {
        let mut out = d.clone();
        let k = d.k();
        for (i, v) in out.values.iter_mut().enumerate() {
            let j = i % k;
            *v = (*v - self.mean[j]) / self.scale[j];
        }
        out
    }
}
