//! Tabular datasets: synthetic generators, CSV I/O, min-max scaling, the IQR
//! anomaly threshold and background sampling.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Name of the optional trailing label column in CSV files.
pub const LABEL_COLUMN: &str = "class";

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rectangular table of named numeric features with optional 0/1 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    feature_names: Vec<String>,
    rows: Array2<T>,
    labels: Option<Vec<u8>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(feature_names: Vec<String>, rows: Array2<T>, labels: Option<Vec<u8>>) -> Result<Self> {
        if rows.ncols() != feature_names.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                rows.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if name.is_empty() {
                return Err(Error::InvalidDataset("empty feature name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate feature name {name:?}")));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != rows.nrows() {
                return Err(Error::InvalidDataset(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    rows.nrows()
                )));
            }
            if let Some(bad) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::InvalidDataset(format!("label {bad} is not 0 or 1")));
            }
        }
        // row-major storage lets rows be handed out as slices
        let rows = if rows.is_standard_layout() {
            rows
        } else {
            rows.as_standard_layout().into_owned()
        };
        Ok(Self {
            feature_names,
            rows,
            labels,
        })
    }

    /// Dataset with generated names `X1..Xn`.
    pub fn unnamed(rows: Array2<T>, labels: Option<Vec<u8>>) -> Result<Self> {
        let names = default_names(rows.ncols());
        Self::new(names, rows, labels)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &Array2<T> {
        &self.rows
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, T> {
        self.rows.row(i)
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    /// Keeps the rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let rows = self.rows.select(Axis(0), indices);
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Self {
            feature_names: self.feature_names.clone(),
            rows,
            labels,
        }
    }

    /// Rows labeled 0, or every row when the dataset is unlabeled.
    pub fn normal_rows(&self) -> Self {
        match &self.labels {
            None => self.clone(),
            Some(l) => {
                let idx: Vec<usize> = (0..l.len()).filter(|&i| l[i] == 0).collect();
                self.select_rows(&idx)
            }
        }
    }

    /// Indices of rows labeled 1.
    pub fn anomaly_indices(&self) -> Vec<usize> {
        match &self.labels {
            None => Vec::new(),
            Some(l) => (0..l.len()).filter(|&i| l[i] == 1).collect(),
        }
    }

    /// Per-feature means, used by the MEAN substitution policy.
    pub fn column_means(&self) -> Vec<T> {
        if self.n_rows() == 0 {
            return vec![T::zero(); self.n_features()];
        }
        self.rows.mean_axis(Axis(0)).map(|m| m.to_vec()).unwrap_or_default()
    }

    fn with_rows(&self, rows: Array2<T>) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            rows,
            labels: self.labels.clone(),
        }
    }
}

pub(crate) fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("X{i}")).collect()
}

/// Six-feature linear dataset: `X5 = X1 + X2`, `X6 = X3 + X4`, with
/// `n_anomalies` rows where one of the two sums is overwritten by a
/// `Uniform(0,1)` draw.
pub fn gen_linear_artificial<T: Scalar>(n: usize, n_anomalies: usize, seed: u64) -> Result<Dataset<T>> {
    if n_anomalies >= n && !(n == 0 && n_anomalies == 0) {
        return Err(Error::InvalidArgument(format!(
            "n_anomalies ({n_anomalies}) must be smaller than n ({n})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut rows = Array2::<T>::zeros((n, 6));
    for mut row in rows.rows_mut() {
        for j in 0..4 {
            row[j] = T::lit(rng.random::<f64>());
        }
        row[4] = row[0] + row[1];
        row[5] = row[2] + row[3];
    }
    let mut labels = vec![0u8; n];
    let mut chosen = index::sample(&mut rng, n, n_anomalies).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let col = if rng.random::<bool>() { 4 } else { 5 };
        rows[[i, col]] = T::lit(rng.random::<f64>());
        labels[i] = 1;
    }
    Dataset::unnamed(rows, Some(labels))
}

/// Binary dataset: `X5 = X1 AND X2`, `X6 = X3 OR X4`, plus `n_extra`
/// independent fair bits. `n_noisy` rows get X5 or X6 flipped.
pub fn gen_binary_logic<T: Scalar>(n: usize, n_noisy: usize, n_extra: usize, seed: u64) -> Result<Dataset<T>> {
    if n_noisy >= n && !(n == 0 && n_noisy == 0) {
        return Err(Error::InvalidArgument(format!(
            "n_noisy ({n_noisy}) must be smaller than n ({n})"
        )));
    }
    let width = 6 + n_extra;
    let mut rng = rng_from_seed(seed);
    let mut rows = Array2::<T>::zeros((n, width));
    let bit = |b: bool| if b { T::one() } else { T::zero() };
    for mut row in rows.rows_mut() {
        let x: [bool; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
        for j in 0..4 {
            row[j] = bit(x[j]);
        }
        row[4] = bit(x[0] && x[1]);
        row[5] = bit(x[2] || x[3]);
        for j in 6..width {
            row[j] = bit(rng.random());
        }
    }
    let mut labels = vec![0u8; n];
    let mut chosen = index::sample(&mut rng, n, n_noisy).into_vec();
    chosen.sort_unstable();
    for i in chosen {
        let col = if rng.random::<bool>() { 4 } else { 5 };
        rows[[i, col]] = T::one() - rows[[i, col]];
        labels[i] = 1;
    }
    Dataset::unnamed(rows, Some(labels))
}

/// Replaces column `feature` with i.i.d. `Uniform(min, max)` draws over the
/// column's original range.
pub fn inject_noise_feature<T: Scalar>(d: &Dataset<T>, feature: usize, seed: u64) -> Result<Dataset<T>> {
    if feature >= d.n_features() {
        return Err(Error::InvalidIndex {
            index: feature,
            len: d.n_features(),
        });
    }
    let col = d.rows.column(feature);
    let (lo, hi) = min_max(col.iter().copied());
    let mut rows = d.rows.clone();
    if d.n_rows() > 0 && lo < hi {
        let mut rng = rng_from_seed(seed);
        let (lo64, hi64) = (lo.as_f64(), hi.as_f64());
        for v in rows.column_mut(feature) {
            let draw = T::lit(rng.random_range(lo64..hi64));
            // guard against rounding past the range in narrower types
            *v = draw.max(lo).min(hi);
        }
    }
    Ok(d.with_rows(rows))
}

fn min_max<T: Scalar>(values: impl Iterator<Item = T>) -> (T, T) {
    values.fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Reads a CSV file: header row, numeric cells, optional trailing `class`
/// column of 0/1 labels.
pub fn load_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let parse_err = |line: u64, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let header = reader.headers().map_err(|e| parse_err(1, 0, e.to_string()))?.clone();
    let mut names: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
    let has_labels = names.last().is_some_and(|n| n == LABEL_COLUMN);
    if has_labels {
        names.pop();
    }
    let width = header.len();
    let n_features = names.len();

    let mut values: Vec<T> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut n_rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, 0, e.to_string())
        })?;
        let line = record.position().map_or(n_rows as u64 + 2, |p| p.line());
        if record.len() != width {
            return Err(parse_err(
                line,
                record.len().min(width) + 1,
                format!("row {} has {} fields, header has {width}", n_rows + 1, record.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if has_labels && j == n_features {
                let label = match cell {
                    "0" => 0,
                    "1" => 1,
                    _ => return Err(parse_err(line, j + 1, format!("label {cell:?} is not 0 or 1"))),
                };
                labels.push(label);
            } else {
                let v: T = cell
                    .parse()
                    .map_err(|_| parse_err(line, j + 1, format!("cannot parse {cell:?} as a number")))?;
                values.push(v);
            }
        }
        n_rows += 1;
    }
    let rows =
        Array2::from_shape_vec((n_rows, n_features), values).map_err(|e| Error::InvalidDataset(e.to_string()))?;
    Dataset::new(names, rows, has_labels.then_some(labels))
}

/// Writes `d` in the format read by [`load_csv`]. Values use the shortest
/// representation that parses back to the same float.
pub fn save_csv<T: Scalar>(d: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = d.feature_names.join(",");
    if d.labels.is_some() {
        header.push(',');
        header.push_str(LABEL_COLUMN);
    }
    writeln!(out, "{header}").map_err(io)?;
    let mut line = String::new();
    for (i, row) in d.rows.rows().into_iter().enumerate() {
        line.clear();
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&v.to_string());
        }
        if let Some(l) = &d.labels {
            line.push(',');
            line.push_str(if l[i] == 1 { "1" } else { "0" });
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Per-feature min and max of the data a scaler was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NormStats<T> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> NormStats<T> {
    pub fn fit(d: &Dataset<T>) -> Self {
        let (min, max) = d
            .rows
            .columns()
            .into_iter()
            .map(|c| {
                if c.is_empty() {
                    (T::zero(), T::zero())
                } else {
                    min_max(c.iter().copied())
                }
            })
            .unzip();
        Self { min, max }
    }

    pub fn n_features(&self) -> usize {
        self.min.len()
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_features() {
            return Err(Error::WidthMismatch {
                expected: self.n_features(),
                actual: width,
            });
        }
        Ok(())
    }

    /// `(x - min) / (max - min)`; constant features map to 0.
    pub fn apply(&self, d: &Dataset<T>) -> Result<Dataset<T>> {
        self.check_width(d.n_features())?;
        let mut rows = d.rows.clone();
        for mut row in rows.rows_mut() {
            self.apply_row(row.as_slice_mut().expect("standard layout"));
        }
        Ok(d.with_rows(rows))
    }

    pub fn apply_row(&self, x: &mut [T]) {
        for (j, v) in x.iter_mut().enumerate() {
            let span = self.max[j] - self.min[j];
            *v = if span > T::zero() {
                (*v - self.min[j]) / span
            } else {
                T::zero()
            };
        }
    }

    /// Inverse of [`apply`](Self::apply). Constant features come back as
    /// their fitted value.
    pub fn invert(&self, d: &Dataset<T>) -> Result<Dataset<T>> {
        self.check_width(d.n_features())?;
        let mut rows = d.rows.clone();
        for mut row in rows.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.min[j] + *v * (self.max[j] - self.min[j]);
            }
        }
        Ok(d.with_rows(rows))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let stats: Self = serde_json::from_str(s)?;
        if stats.min.len() != stats.max.len() {
            return Err(Error::InvalidArgument("min and max lengths differ".into()));
        }
        Ok(stats)
    }
}

pub fn minmax_normalize<T: Scalar>(d: &Dataset<T>) -> (Dataset<T>, NormStats<T>) {
    let stats = NormStats::fit(d);
    let scaled = stats.apply(d).expect("stats fitted on the same width");
    (scaled, stats)
}

/// Quantile with linear interpolation between order statistics
/// (position `q * (n - 1)`). `sorted` must be ascending and non-empty.
pub fn quantile_sorted<T: Scalar>(sorted: &[T], q: f64) -> T {
    debug_assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// `Q3 + 1.5 * (Q3 - Q1)` with linearly interpolated quartiles.
pub fn iqr_threshold<T: Scalar>(scores: &[T]) -> Result<T> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no scores to threshold".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    Ok(q3 + (q3 - q1) * T::lit(1.5))
}

/// Reference rows that stand in for "absent" features during attribution.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet<T> {
    pub rows: Array2<T>,
    pub source_seed: u64,
    /// Row indices in the originating dataset, when known.
    pub indices: Vec<usize>,
}

impl<T: Scalar> BackgroundSet<T> {
    /// Wraps explicit rows (no originating dataset).
    pub fn from_rows(rows: Array2<T>) -> Result<Self> {
        if rows.nrows() == 0 {
            return Err(Error::InvalidArgument("background set needs at least one row".into()));
        }
        Ok(Self {
            rows,
            source_seed: 0,
            indices: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn n_features(&self) -> usize {
        self.rows.ncols()
    }

    pub fn mean(&self) -> Vec<T> {
        self.rows
            .mean_axis(Axis(0))
            .map(|m| m.to_vec())
            .unwrap_or_else(|| vec![T::zero(); self.n_features()])
    }

    /// Population standard deviation per feature.
    pub fn std_dev(&self) -> Vec<T> {
        self.rows.std_axis(Axis(0), T::zero()).to_vec()
    }
}

/// Draws `k` distinct rows uniformly without replacement.
pub fn sample_background<T: Scalar>(d: &Dataset<T>, k: usize, seed: u64) -> Result<BackgroundSet<T>> {
    if k == 0 || k > d.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "background size {k} must be in 1..={}",
            d.n_rows()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let indices = index::sample(&mut rng, d.n_rows(), k).into_vec();
    Ok(BackgroundSet {
        rows: d.rows.select(Axis(0), &indices),
        source_seed: seed,
        indices,
    })
}
