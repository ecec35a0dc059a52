use std::io::Read;
use std::path::Path;

use crate::error::{check_dim, invalid, Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;

/// Labelled examples with a row-major `n × m` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    features: Vec<T>,
    m: usize,
    labels: Vec<usize>,
    classes: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Vec<T>, m: usize, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if m == 0 {
            return Err(invalid("features", "feature dimension must be >= 1"));
        }
        check_dim(labels.len() * m, features.len())?;
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(invalid("labels", format!("label {l} outside [0, {classes})")));
        }
        Ok(Self {
            features,
            m,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.m
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.m..(i + 1) * self.m]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub(crate) fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if let Some(&i) = batch.iter().find(|&&i| i >= self.len()) {
            return Err(invalid("batch", format!("index {i} outside dataset of {}", self.len())));
        }
        Ok(())
    }
}

/// `k` Gaussian clusters (unit variance) whose means are pairwise `separation` apart when
/// `m ≥ k`; otherwise the means sit on a circle (or a line for `m = 1`) with neighbouring
/// means `separation` apart. Labels cycle `0, 1, …, k−1`, so every contiguous shard is
/// balanced.
pub fn synth_blobs<T: Scalar>(
    rng: &mut RngStream,
    n: usize,
    m: usize,
    k: usize,
    separation: f64,
) -> Result<Dataset<T>> {
    if k < 2 || n < k {
        return Err(invalid("n", format!("need n >= k >= 2, got n={n}, k={k}")));
    }
    if m == 0 {
        return Err(invalid("m", "feature dimension must be >= 1"));
    }
    let means: Vec<Vec<f64>> = (0..k)
        .map(|c| {
            let mut mu = vec![0.0; m];
            if m >= k {
                mu[c] = separation / std::f64::consts::SQRT_2;
            } else if m == 1 {
                mu[0] = c as f64 * separation;
            } else {
                let radius = separation / (2.0 * (std::f64::consts::PI / k as f64).sin());
                let angle = 2.0 * std::f64::consts::PI * c as f64 / k as f64;
                mu[0] = radius * angle.cos();
                mu[1] = radius * angle.sin();
            }
            mu
        })
        .collect();
    let mut features = Vec::with_capacity(n * m);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        labels.push(c);
        for mu in &means[c] {
            features.push(T::lit(mu + rng.standard_normal()));
        }
    }
    Dataset::new(features, m, labels, k)
}

/// Parses a headerless CSV: feature columns followed by one integer label column.
/// The class count is `max label + 1`.
pub fn parse_csv<T: Scalar, R: Read>(reader: R) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            reason: e.to_string(),
        })?;
        if record.len() < 2 {
            return Err(Error::Parse {
                line,
                reason: format!("expected at least 2 columns, found {}", record.len()),
            });
        }
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    reason: format!("expected {w} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        let last = record.len() - 1;
        for (col, field) in record.iter().take(last).enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                reason: format!("column {}: `{field}` is not a number", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    reason: format!("column {}: non-finite value", col + 1),
                });
            }
            features.push(T::lit(v));
        }
        let label: usize = record[last].parse().map_err(|_| Error::Parse {
            line,
            reason: format!("label `{}` is not a non-negative integer", &record[last]),
        })?;
        labels.push(label);
    }
    let width = width.ok_or(Error::Parse {
        line: 0,
        reason: "no rows".into(),
    })?;
    let classes = labels.iter().max().map_or(0, |&l| l + 1).max(2);
    Dataset::new(features, width - 1, labels, classes)
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_csv(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blobs_are_reproducible_and_balanced() {
        let a: Dataset<f64> = synth_blobs(&mut RngStream::new(3), 100, 2, 4, 5.0).unwrap();
        let b: Dataset<f64> = synth_blobs(&mut RngStream::new(3), 100, 2, 4, 5.0).unwrap();
        assert_eq!(a, b);
        for c in 0..4 {
            assert_eq!(a.labels().iter().filter(|&&l| l == c).count(), 25);
        }
    }

    #[test]
    fn blob_means_are_separated() {
        let n = 4000;
        let d: Dataset<f64> = synth_blobs(&mut RngStream::new(4), n, 3, 2, 10.0).unwrap();
        let mut means = [[0.0; 3]; 2];
        for i in 0..n {
            for j in 0..3 {
                means[d.label(i)][j] += d.row(i)[j] / (n / 2) as f64;
            }
        }
        let dist: f64 = (0..3).map(|j| (means[0][j] - means[1][j]).powi(2)).sum::<f64>().sqrt();
        assert!((dist - 10.0).abs() < 0.2, "{dist}");
    }

    #[test]
    fn blobs_reject_bad_sizes() {
        assert!(synth_blobs::<f64>(&mut RngStream::new(0), 1, 2, 2, 1.0).is_err());
        assert!(synth_blobs::<f64>(&mut RngStream::new(0), 10, 2, 1, 1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let d: Dataset<f64> = parse_csv("1.0,2.0,0\n3.5,-1,1\n".as_bytes()).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.feature_dim(), 2);
        assert_eq!(d.row(1), &[3.5, -1.0]);
        assert_eq!(d.labels(), &[0, 1]);
    }

    #[test]
    fn csv_errors_name_line() {
        let err = parse_csv::<f64, _>("1,2,0\n1,x,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_csv::<f64, _>("1,2,0\n1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_csv::<f64, _>("1,2,0\n1,1,-1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_csv::<f64, _>("".as_bytes()).is_err());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::<f64>::new(vec![1.0], 1, vec![2], 2).is_err());
        assert!(Dataset::<f64>::new(vec![f64::NAN], 1, vec![0], 2).is_err());
        assert!(Dataset::<f64>::new(vec![], 1, vec![], 2).is_err());
    }
}
