//! Datasets: seeded Gaussian class clusters, the text file format, and
//! client partitioning (stratified IID or Dirichlet label skew).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Batch, Matrix};
use crate::rng::{rng_for, stream};

/// Labeled samples plus the number of classes they are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Batch,
    pub classes: usize,
}

impl Dataset {
    pub fn new(samples: Batch, classes: usize) -> Result<Self> {
        if let Some(&l) = samples.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label: l, classes });
        }
        Ok(Self { samples, classes })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        histogram(&self.samples.labels, self.classes)
    }

    /// Reads the text format: a header `n_samples,n_features,n_classes`, then
    /// one sample per line as comma-separated features followed by the label.
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)
            .map_err(|e| Error::DatasetFormat(format!("{}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines();
        let read_err = |e: std::io::Error| Error::DatasetFormat(format!("{}: {e}", path.display()));
        let header = lines
            .next()
            .ok_or_else(|| Error::DatasetFormat(format!("{}: missing header", path.display())))?
            .map_err(read_err)?;
        let dims: Vec<usize> = header
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::DatasetFormat(format!("bad header {header:?}: {e}")))?;
        let [n, features, classes] = dims[..] else {
            return Err(Error::DatasetFormat(format!(
                "header must be n_samples,n_features,n_classes, got {header:?}"
            )));
        };
        let mut data = Vec::with_capacity(n * features);
        let mut labels = Vec::with_capacity(n);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(read_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != features + 1 {
                return Err(Error::DatasetFormat(format!(
                    "line {}: expected {} fields, found {}",
                    i + 2,
                    features + 1,
                    fields.len()
                )));
            }
            for f in &fields[..features] {
                data.push(f.parse::<f64>().map_err(|e| {
                    Error::DatasetFormat(format!("line {}: bad feature {f:?}: {e}", i + 2))
                })?);
            }
            labels.push(fields[features].parse::<usize>().map_err(|e| {
                Error::DatasetFormat(format!("line {}: bad label: {e}", i + 2))
            })?);
        }
        if labels.len() != n {
            return Err(Error::DatasetFormat(format!(
                "header declares {n} samples but file has {}",
                labels.len()
            )));
        }
        Dataset::new(Batch::new(Matrix::from_vec(n, features, data), labels)?, classes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::DatasetFormat(format!("{}: {e}", path.display()));
        let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
        writeln!(out, "{},{},{}", self.len(), self.samples.n_features(), self.classes).map_err(io)?;
        for (i, &label) in self.samples.labels.iter().enumerate() {
            for v in self.samples.features.row(i) {
                write!(out, "{v},").map_err(io)?;
            }
            writeln!(out, "{label}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

pub fn histogram(labels: &[usize], classes: usize) -> Vec<usize> {
    let mut h = vec![0; classes];
    for &l in labels {
        h[l] += 1;
    }
    h
}

/// Gaussian class clusters: each class mean is drawn from `N(0, separation²)`
/// per feature and samples add unit-variance noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub features: usize,
    pub train_points: usize,
    pub test_points: usize,
    pub separation: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 8,
            features: 16,
            train_points: 2000,
            test_points: 800,
            separation: 1.0,
        }
    }
}

/// Train and test sets sharing the same class means.
pub fn synthetic_clusters(cfg: &SyntheticConfig, seed: u64) -> Result<(Dataset, Dataset)> {
    if cfg.classes == 0 || cfg.features == 0 || cfg.train_points == 0 || cfg.test_points == 0 {
        return Err(Error::EmptyData("synthetic dataset dimensions must be >= 1".into()));
    }
    let mut rng = rng_for(seed, &[stream::DATA]);
    let means: Vec<Vec<f64>> = (0..cfg.classes)
        .map(|_| {
            (0..cfg.features)
                .map(|_| cfg.separation * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let draw = |points: usize, tag: u64| -> Result<Dataset> {
        let mut rng = rng_for(seed, &[tag]);
        let mut data = Vec::with_capacity(points * cfg.features);
        let labels: Vec<usize> = (0..points).map(|i| i % cfg.classes).collect();
        for &y in &labels {
            for &m in &means[y] {
                data.push(m + rng.sample::<f64, _>(StandardNormal));
            }
        }
        Dataset::new(
            Batch::new(Matrix::from_vec(points, cfg.features, data), labels)?,
            cfg.classes,
        )
    };
    Ok((draw(cfg.train_points, stream::DATA + 100)?, draw(cfg.test_points, stream::TEST_DATA)?))
}

/// How training data is spread over clients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DataDistribution {
    Iid,
    Dirichlet { alpha: f64 },
}

/// Retry bound when a Dirichlet draw leaves some client without data.
pub const PARTITION_RETRIES: usize = 1000;

/// Splits sample indices of `labels` across `n_clients`.
///
/// Returned shards are disjoint, cover every index, are sorted, and are all
/// nonempty.
pub fn partition_dirichlet(
    labels: &[usize],
    classes: usize,
    n_clients: usize,
    distribution: DataDistribution,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if n_clients == 0 {
        return Err(Error::Partition("need at least one client".into()));
    }
    if labels.len() < n_clients {
        return Err(Error::Partition(format!(
            "{} samples cannot fill {n_clients} clients",
            labels.len()
        )));
    }
    let mut rng = rng_for(seed, &[stream::PARTITION]);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::LabelOutOfRange { label: l, classes });
        }
        by_class[l].push(i);
    }

    let mut shards = match distribution {
        DataDistribution::Iid => {
            let mut shards = vec![Vec::new(); n_clients];
            let mut next = 0;
            for members in &mut by_class {
                members.shuffle(&mut rng);
                for &i in members.iter() {
                    shards[next].push(i);
                    next = (next + 1) % n_clients;
                }
            }
            shards
        }
        DataDistribution::Dirichlet { alpha } => {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::Partition(format!("alpha must be > 0, got {alpha}")));
            }
            let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Partition(e.to_string()))?;
            let mut found = None;
            for _ in 0..PARTITION_RETRIES {
                let mut shards = vec![Vec::new(); n_clients];
                for members in &mut by_class {
                    members.shuffle(&mut rng);
                    let mut q: Vec<f64> = (0..n_clients).map(|_| gamma.sample(&mut rng)).collect();
                    let total: f64 = q.iter().sum();
                    if !(total > 0.0 && total.is_finite()) {
                        // Every draw underflowed: the one-hot limit of Dir(alpha).
                        q = vec![0.0; n_clients];
                        q[rng.random_range(0..n_clients)] = 1.0;
                    } else {
                        q.iter_mut().for_each(|v| *v /= total);
                    }
                    let n = members.len();
                    let mut start = 0;
                    let mut cumulative = 0.0;
                    for (c, share) in q.iter().enumerate() {
                        cumulative += share;
                        let end = if c + 1 == n_clients {
                            n
                        } else {
                            ((cumulative * n as f64).round() as usize).clamp(start, n)
                        };
                        shards[c].extend_from_slice(&members[start..end]);
                        start = end;
                    }
                }
                if shards.iter().all(|s| !s.is_empty()) {
                    found = Some(shards);
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::Partition(format!(
                    "no draw gave every client data within {PARTITION_RETRIES} attempts"
                ))
            })?
        }
    };
    for s in &mut shards {
        s.sort_unstable();
    }
    Ok(shards)
}

/// Mean total-variation distance between each shard's label distribution
/// and the global one.
pub fn mean_label_skew(labels: &[usize], classes: usize, shards: &[Vec<usize>]) -> f64 {
    let global = histogram(labels, classes);
    let n = labels.len() as f64;
    let total: f64 = shards
        .iter()
        .map(|s| {
            let local: Vec<usize> = s.iter().map(|&i| labels[i]).collect();
            let h = histogram(&local, classes);
            let m = s.len() as f64;
            0.5 * h
                .iter()
                .zip(&global)
                .map(|(&a, &b)| (a as f64 / m - b as f64 / n).abs())
                .sum::<f64>()
        })
        .sum();
    total / shards.len() as f64
}
