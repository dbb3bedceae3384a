//! Masked tabular data: CSV ingestion, MCAR deletion and stratified splits.
//!
//! Values are stored row-major. Unobserved cells hold `NaN` and are flagged
//! `false` in the mask; nothing downstream reads a value without consulting
//! the mask first.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature matrix with an explicit observation mask and optional class labels.
///
/// Class labels are dense zero-based indices into `class_names`, assigned in
/// order of first appearance.
#[derive(Debug, Clone)]
pub struct MaskedDataset {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    labels: Option<Vec<usize>>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

// Missing cells hold NaN, so compare values bitwise.
impl PartialEq for MaskedDataset {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.mask == other.mask
            && self.labels == other.labels
            && self.class_names == other.class_names
            && self.feature_names == other.feature_names
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl MaskedDataset {
    /// Builds a dataset from row-major values and mask. Entries whose mask is
    /// `false` are overwritten with `NaN`.
    pub fn new(n_rows: usize, feature_names: Vec<String>, mut values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let n_cols = feature_names.len();
        if values.len() != n_rows * n_cols || mask.len() != n_rows * n_cols {
            return Err(Error::Schema(format!(
                "expected {} cells for {n_rows}x{n_cols}, got {} values and {} mask entries",
                n_rows * n_cols,
                values.len(),
                mask.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name {name:?}")));
            }
        }
        for (idx, (v, &m)) in values.iter_mut().zip(&mask).enumerate() {
            if m {
                if !v.is_finite() {
                    return Err(Error::Schema(format!(
                        "observed cell ({}, {}) is not finite",
                        idx / n_cols.max(1),
                        idx % n_cols.max(1)
                    )));
                }
            } else {
                *v = f64::NAN;
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
            mask,
            labels: None,
            class_names: Vec::new(),
            feature_names,
        })
    }

    /// Fully observed dataset from row-major values.
    pub fn complete(n_rows: usize, feature_names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let mask = vec![true; values.len()];
        Self::new(n_rows, feature_names, values, mask)
    }

    /// Attaches labels given as zero-based class indices.
    pub fn with_labels(mut self, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_rows {
            return Err(Error::Schema(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n_rows
            )));
        }
        if class_names.len() < 2 {
            return Err(Error::Schema(format!(
                "labelled data needs at least 2 classes, got {}",
                class_names.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Schema(format!("label {bad} outside 0..{}", class_names.len())));
        }
        self.labels = Some(labels);
        self.class_names = class_names;
        Ok(self)
    }

    /// Replaces the mask, keeping values where the new mask is `true`.
    ///
    /// A cell may only become observed if it already was.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.mask.len() {
            return Err(Error::Schema("mask shape mismatch".into()));
        }
        if mask.iter().zip(&self.mask).any(|(&new, &old)| new && !old) {
            return Err(Error::Contract(
                "a replacement mask cannot reveal unobserved cells".into(),
            ));
        }
        let mut out = self.clone();
        for (v, &m) in out.values.iter_mut().zip(&mask) {
            if !m {
                *v = f64::NAN;
            }
        }
        out.mask = mask;
        Ok(out)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_cols
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Labels, or an error naming the operation that needed them.
    pub fn require_labels(&self, op: &str) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Schema(format!("{op} requires class labels")))
    }

    pub fn class_counts(&self) -> Option<Vec<usize>> {
        let labels = self.labels.as_ref()?;
        let mut counts = vec![0; self.n_classes()];
        for &l in labels {
            counts[l] += 1;
        }
        Some(counts)
    }

    /// Row `i`; unobserved entries are `NaN`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        &self.mask[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        let idx = i * self.n_cols + j;
        self.mask[idx].then(|| self.values[idx])
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n_cols + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn n_missing(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        let mut mask = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
            mask.extend_from_slice(self.mask_row(r));
        }
        Self {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
            mask,
            labels: self.labels.as_ref().map(|l| rows.iter().map(|&r| l[r]).collect()),
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Stacks `other` below `self`. Both must share features and class map.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.feature_names != other.feature_names {
            return Err(Error::Schema("cannot stack datasets with different features".into()));
        }
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => {
                if self.class_names != other.class_names {
                    return Err(Error::Schema("class maps differ".into()));
                }
                Some(a.iter().chain(b).copied().collect())
            }
            (None, None) => None,
            _ => return Err(Error::Schema("only one side is labelled".into())),
        };
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        let mut mask = self.mask.clone();
        mask.extend_from_slice(&other.mask);
        Ok(Self {
            n_rows: self.n_rows + other.n_rows,
            n_cols: self.n_cols,
            values,
            mask,
            labels,
            class_names: self.class_names.clone(),
            feature_names: self.feature_names.clone(),
        })
    }

    /// Writes the dataset as CSV. Missing cells are written as empty fields;
    /// labels, when present, go to a trailing column named `label_column`.
    pub fn write_csv<W: Write>(&self, writer: W, label_column: &str) -> Result<()> {
        self.write_csv_with_token(writer, label_column, "")
    }

    /// As [`write_csv`](Self::write_csv), spelling missing cells as `missing_token`.
    pub fn write_csv_with_token<W: Write>(&self, writer: W, label_column: &str, missing_token: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        if self.labels.is_some() {
            header.push(label_column);
        }
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for i in 0..self.n_rows {
            record.clear();
            for j in 0..self.n_cols {
                record.push(match self.value(i, j) {
                    Some(v) => format!("{v}"),
                    None => missing_token.to_string(),
                });
            }
            if let Some(labels) = &self.labels {
                record.push(self.class_names[labels[i]].clone());
            }
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, label_column: &str) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file), label_column)
    }

    /// Writes the mask as a 0/1 CSV with the feature names as header.
    pub fn write_mask_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.feature_names)?;
        for i in 0..self.n_rows {
            w.write_record(self.mask_row(i).iter().map(|&m| if m { "1" } else { "0" }))?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// How missing cells are spelled in a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvOptions {
    pub label_column: Option<String>,
    /// Cells equal to this token (after trimming) are missing. Empty cells
    /// are always missing.
    pub missing_token: String,
    /// Also treat `NA` (any case) as missing.
    pub na_is_missing: bool,
}

impl CsvOptions {
    pub fn with_label(label_column: impl Into<String>) -> Self {
        Self {
            label_column: Some(label_column.into()),
            ..Self::default()
        }
    }

    fn is_missing(&self, cell: &str) -> bool {
        cell.is_empty() || cell == self.missing_token || (self.na_is_missing && cell.eq_ignore_ascii_case("na"))
    }
}

/// Reads a CSV file with one header row.
pub fn load_csv(path: &Path, options: &CsvOptions) -> Result<MaskedDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, options)
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<MaskedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let label_idx = match &options.label_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("label column {name:?} not found")))?,
        ),
        None => None,
    };
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != label_idx).collect();
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| header[c].clone()).collect();

    let mut values = Vec::new();
    let mut mask = Vec::new();
    let mut raw_labels = Vec::new();
    let mut n_rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for &c in &feature_cols {
            let cell = record.get(c).unwrap_or("");
            if options.is_missing(cell) {
                values.push(f64::NAN);
                mask.push(false);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: row + 1,
                    column: header[c].clone(),
                    value: cell.to_owned(),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row: row + 1,
                        column: header[c].clone(),
                        value: cell.to_owned(),
                    });
                }
                values.push(v);
                mask.push(true);
            }
        }
        if let Some(li) = label_idx {
            let cell = record.get(li).unwrap_or("");
            if options.is_missing(cell) {
                return Err(Error::Schema(format!("row {} has no label", row + 1)));
            }
            raw_labels.push(cell.to_owned());
        }
        n_rows += 1;
    }

    let ds = MaskedDataset::new(n_rows, feature_names, values, mask)?;
    if label_idx.is_none() {
        return Ok(ds);
    }
    let mut class_names: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let labels = raw_labels
        .into_iter()
        .map(|name| {
            *lookup.entry(name.clone()).or_insert_with(|| {
                class_names.push(name);
                class_names.len() - 1
            })
        })
        .collect();
    ds.with_labels(labels, class_names)
}

/// Parameters of an MCAR deletion run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissingSpec {
    pub rate: f64,
    pub protect_first_row: bool,
    pub protect_first_feature: bool,
    pub seed: u64,
}

impl MissingSpec {
    /// Protects the first row and first feature, as in the benchmark protocol.
    pub fn protocol(rate: f64, seed: u64) -> Self {
        Self {
            rate,
            protect_first_row: true,
            protect_first_feature: true,
            seed,
        }
    }
}

/// Deletes exactly `floor(rate * pool)` cells chosen uniformly without
/// replacement from the eligible pool.
pub fn simulate_mcar(data: &MaskedDataset, spec: &MissingSpec) -> Result<MaskedDataset> {
    if !(0.0..1.0).contains(&spec.rate) {
        return Err(Error::InvalidSpec(format!(
            "rate must lie in [0, 1), got {}",
            spec.rate
        )));
    }
    if spec.rate == 0.0 {
        return Ok(data.clone());
    }
    let p = data.n_features();
    let first_row = usize::from(spec.protect_first_row);
    let first_col = usize::from(spec.protect_first_feature);
    let mut pool = Vec::new();
    for i in first_row..data.n_rows() {
        for j in first_col..p {
            if !data.is_observed(i, j) {
                return Err(Error::InvalidSpec(format!(
                    "eligible cell ({i}, {j}) is already missing"
                )));
            }
            pool.push(i * p + j);
        }
    }
    let n_delete = deletion_count(spec.rate, pool.len());
    if pool.is_empty() {
        return Err(Error::InvalidSpec("no cells are eligible for deletion".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut mask = data.mask().to_vec();
    for k in index::sample(&mut rng, pool.len(), n_delete) {
        mask[pool[k]] = false;
    }
    data.with_mask(mask)
}

/// `floor(rate * pool)`, robust to products like `0.3 * 10 = 2.9999...`.
pub fn deletion_count(rate: f64, pool: usize) -> usize {
    let exact = rate * pool as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() <= 1e-9 * exact.abs().max(1.0) {
        rounded as usize
    } else {
        exact.floor() as usize
    }
}

/// Row indices of a stratified partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class, `round(test_fraction * n_c)` rows go to test, clamped to
/// `[1, n_c - 1]`. Both parts keep the original row order.
pub fn stratified_split_indices(data: &MaskedDataset, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let labels = data.require_labels("stratified split")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); data.n_classes()];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut rows) in by_class.into_iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(Error::Split(format!(
                "class {:?} has a single sample",
                data.class_names()[class]
            )));
        }
        let n_test = ((test_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        rows.shuffle(&mut rng);
        test.extend_from_slice(&rows[..n_test]);
        train.extend_from_slice(&rows[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

pub fn stratified_split(data: &MaskedDataset, test_fraction: f64, seed: u64) -> Result<(MaskedDataset, MaskedDataset)> {
    let idx = stratified_split_indices(data, test_fraction, seed)?;
    Ok((data.select_rows(&idx.train), data.select_rows(&idx.test)))
}

/// Fraction of missing cells per feature, pooled over every supplied dataset.
pub fn feature_missing_rates(datasets: &[&MaskedDataset]) -> Result<Vec<f64>> {
    let first = datasets
        .first()
        .ok_or_else(|| Error::Empty("no masks supplied".into()))?;
    let p = first.n_features();
    let mut missing = vec![0usize; p];
    let mut rows = 0usize;
    for ds in datasets {
        if ds.n_features() != p {
            return Err(Error::Schema(format!(
                "mask has {} columns, expected {p}",
                ds.n_features()
            )));
        }
        for i in 0..ds.n_rows() {
            for (j, &m) in ds.mask_row(i).iter().enumerate() {
                if !m {
                    missing[j] += 1;
                }
            }
        }
        rows += ds.n_rows();
    }
    if rows == 0 {
        return Err(Error::Empty("masks have no rows".into()));
    }
    Ok(missing.into_iter().map(|c| c as f64 / rows as f64).collect())
}
