//! Binary-labelled numeric datasets with a seeded train/test split and nested
//! prefix sampling.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::ProbeError;
use crate::seed::{derive_seed, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Part {
    Train,
    Test,
}

impl Part {
    pub fn as_str(&self) -> &'static str {
        match self {
            Part::Train => "train",
            Part::Test => "test",
        }
    }
}

/// A loaded dataset, immutable after construction.
///
/// Features are stored row-major and min-max normalized per column. The rows
/// are split once into `D_tr` and `D_te` by a seeded shuffle; each part keeps
/// its own seeded order so that samples of growing size are nested prefixes.
#[derive(Debug, Clone)]
pub struct DatasetHandle {
    features: Vec<f64>,
    labels: Vec<u8>,
    cols: usize,
    holdout: f64,
    seed: u64,
    train: Vec<usize>,
    test: Vec<usize>,
}

impl DatasetHandle {
    /// Builds a handle from raw rows. `holdout` is the fraction of rows kept
    /// for testing, `seed` drives both the split and the sampling orders.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<u8>, holdout: f64, seed: u64) -> Result<Self, ProbeError> {
        if features.len() != labels.len() {
            return Err(ProbeError::Data(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if features.len() < 2 {
            return Err(ProbeError::Data("need at least two rows".into()));
        }
        if !(holdout > 0.0 && holdout < 1.0) {
            return Err(ProbeError::Data(format!("holdout ratio {holdout} not in (0, 1)")));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(ProbeError::Data(format!("label {bad} is not 0 or 1")));
        }
        let cols = features[0].len();
        if cols == 0 {
            return Err(ProbeError::Data("rows have no features".into()));
        }
        if let Some((i, _)) = features.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(ProbeError::Data(format!("row {} has a different column count", i + 1)));
        }
        let mut flat: Vec<f64> = features.into_iter().flatten().collect();
        min_max_normalize(&mut flat, cols);

        let rows = labels.len();
        let n_test = ((rows as f64 * holdout).round() as usize).clamp(1, rows - 1);
        let mut order: Vec<usize> = (0..rows).collect();
        order.shuffle(&mut rng_from(derive_seed(seed, &[0])));
        let mut test = order.split_off(rows - n_test);
        let mut train = order;
        // Independent within-part orders so prefixes are uniform samples.
        train.shuffle(&mut rng_from(derive_seed(seed, &[1])));
        test.shuffle(&mut rng_from(derive_seed(seed, &[2])));

        Ok(Self {
            features: flat,
            labels,
            cols,
            holdout,
            seed,
            train,
            test,
        })
    }

    /// Reads a numeric CSV whose last column is the label (0 or 1).
    pub fn load_csv(path: &Path, has_header: bool, holdout: f64, seed: u64) -> Result<Self, ProbeError> {
        let err = |reason: String| ProbeError::Dataset {
            path: path.to_path_buf(),
            reason,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .from_path(path)
            .map_err(|e| err(e.to_string()))?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| err(e.to_string()))?;
            let line = i + 1 + has_header as usize;
            if record.len() < 2 {
                return Err(err(format!("line {line}: need at least one feature and a label")));
            }
            let mut row = Vec::with_capacity(record.len() - 1);
            for field in record.iter().take(record.len() - 1) {
                row.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| err(format!("line {line}: `{field}` is not numeric")))?,
                );
            }
            let label = record[record.len() - 1].trim();
            labels.push(match label {
                "0" | "0.0" => 0,
                "1" | "1.0" => 1,
                other => return Err(err(format!("line {line}: label `{other}` is not 0 or 1"))),
            });
            features.push(row);
        }
        Self::from_rows(features, labels, holdout, seed).map_err(|e| match e {
            ProbeError::Data(reason) => err(reason),
            other => other,
        })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn holdout(&self) -> f64 {
        self.holdout
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn part_size(&self, part: Part) -> usize {
        match part {
            Part::Train => self.train.len(),
            Part::Test => self.test.len(),
        }
    }

    /// The first `size` row indices of the part's seeded order.
    pub fn sample_nested(&self, part: Part, size: usize) -> Result<&[usize], ProbeError> {
        let all = match part {
            Part::Train => &self.train,
            Part::Test => &self.test,
        };
        if size > all.len() {
            return Err(ProbeError::SampleTooLarge {
                part: part.as_str(),
                requested: size as u64,
                available: all.len() as u64,
            });
        }
        Ok(&all[..size])
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.features[index * self.cols..(index + 1) * self.cols]
    }

    pub fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }
}

fn min_max_normalize(flat: &mut [f64], cols: usize) {
    for c in 0..cols {
        let (lo, hi) = flat
            .iter()
            .skip(c)
            .step_by(cols)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let span = hi - lo;
        for v in flat.iter_mut().skip(c).step_by(cols) {
            *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        }
    }
}

/// Writes a CSV of `rows` points with one feature uniform on `[-1, 1]`,
/// `extra_noise_cols` irrelevant uniform features, and label `x > 0`.
pub fn write_separable_csv(path: &Path, rows: usize, extra_noise_cols: usize, seed: u64) -> Result<(), ProbeError> {
    let err = |e: csv::Error| ProbeError::Dataset {
        path: PathBuf::from(path),
        reason: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(err)?;
    let mut header = vec!["x".to_string()];
    header.extend((1..=extra_noise_cols).map(|i| format!("noise{i}")));
    header.push("label".into());
    writer.write_record(&header).map_err(err)?;
    let mut rng = rng_from(seed);
    for _ in 0..rows {
        let x: f64 = rng.random_range(-1.0..1.0);
        let mut record = vec![format!("{x:.6}")];
        for _ in 0..extra_noise_cols {
            let v: f64 = rng.random_range(-1.0..1.0);
            record.push(format!("{v:.6}"));
        }
        record.push(if x > 0.0 { "1".into() } else { "0".into() });
        writer.write_record(&record).map_err(err)?;
    }
    writer.flush().map_err(|e| ProbeError::Dataset {
        path: PathBuf::from(path),
        reason: e.to_string(),
    })
}
