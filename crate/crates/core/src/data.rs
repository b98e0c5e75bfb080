//! Tabular ingestion and preprocessing.
//!
//! A [`RawTable`] is the parsed CSV in original units. [`Dataset`] is the
//! immutable training view the solver works on: features min-max scaled to
//! `[0, 1]`, per-feature sorted distinct values, the baseline SSE used to
//! normalize the loss, and rank/order indices used by the split sweeps.
//! Targets are never scaled.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parsed CSV in original units, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// One feature vector per record, in header order with the target removed.
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn validate(&self) -> Result<()> {
        if self.feature_names.is_empty() {
            return Err(Error::NoFeatures);
        }
        if self.rows.len() < 2 {
            return Err(Error::TooFewRows(self.rows.len()));
        }
        Ok(())
    }
}

/// Reads a header-first, comma-separated numeric table.
pub fn load_table(path: impl AsRef<Path>, target_name: &str) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_table(file, target_name)
}

/// Same as [`load_table`] over any reader.
pub fn read_table<R: Read>(reader: R, target_name: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let target_col = header
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| Error::MissingTarget(target_name.to_string()))?;
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != target_col)
        .map(|(_, h)| h.clone())
        .collect();

    let mut rows = Vec::new();
    let mut targets = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row: row_no,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut features = Vec::with_capacity(feature_names.len());
        for (c, cell) in record.iter().enumerate() {
            let value = parse_cell(cell).ok_or_else(|| Error::BadCell {
                row: row_no,
                column: header[c].clone(),
                value: cell.to_string(),
            })?;
            if c == target_col {
                targets.push(value);
            } else {
                features.push(value);
            }
        }
        rows.push(features);
    }
    let table = RawTable {
        feature_names,
        target_name: target_name.to_string(),
        rows,
        targets,
    };
    table.validate()?;
    Ok(table)
}

/// Rows restricted to a given list of columns, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedRows {
    pub rows: Vec<Vec<f64>>,
    pub targets: Option<Vec<f64>>,
}

/// Reads only `columns` (and `target`, if given) from a CSV file. Other
/// columns are ignored and may hold anything.
pub fn load_columns(path: impl AsRef<Path>, columns: &[String], target: Option<&str>) -> Result<SelectedRows> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_columns(file, columns, target)
}

pub fn read_columns<R: Read>(reader: R, columns: &[String], target: Option<&str>) -> Result<SelectedRows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| header.iter().position(|h| h == name);
    let cols = columns
        .iter()
        .map(|c| find(c).ok_or_else(|| Error::MissingColumn(c.clone())))
        .collect::<Result<Vec<_>>>()?;
    let target_col = target
        .map(|t| find(t).ok_or_else(|| Error::MissingTarget(t.to_string())))
        .transpose()?;
    let mut rows = Vec::new();
    let mut targets = target_col.map(|_| Vec::new());
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                row: row_no,
                expected: header.len(),
                found: record.len(),
            });
        }
        let cell = |c: usize| {
            parse_cell(&record[c]).ok_or_else(|| Error::BadCell {
                row: row_no,
                column: header[c].clone(),
                value: record[c].to_string(),
            })
        };
        rows.push(cols.iter().map(|&c| cell(c)).collect::<Result<Vec<_>>>()?);
        if let (Some(c), Some(t)) = (target_col, targets.as_mut()) {
            t.push(cell(c)?);
        }
    }
    Ok(SelectedRows { rows, targets })
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Min-max parameters of one feature, in original units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub min: f64,
    pub max: f64,
}

impl ScaleParams {
    pub fn fit(column: &[f64]) -> Self {
        let (min, max) = column.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        ScaleParams { min, max }
    }

    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    pub fn scale(&self, x: f64) -> f64 {
        if self.is_constant() {
            0.0
        } else {
            (x - self.min) / (self.max - self.min)
        }
    }

    pub fn unscale(&self, s: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + s * (self.max - self.min)
        }
    }
}

/// Train/test split protocol: seeded uniform shuffle, then prefix split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

/// Returns `(train, test)` row indices. Both are sorted ascending.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "train fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    if n_train == 0 {
        return Err(Error::EmptySplit("train"));
    }
    if n_train >= n {
        return Err(Error::EmptySplit("test"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Read access to scaled rows, shared by training data and held-out data.
pub trait Rows {
    fn n_rows(&self) -> usize;
    fn n_features(&self) -> usize;
    /// Scaled feature value.
    fn value(&self, row: usize, feature: usize) -> f64;
    fn target(&self, row: usize) -> f64;

    fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_features()).map(|j| self.value(row, j)).collect()
    }
}

/// Rows scaled with parameters fitted elsewhere (typically the training split).
/// Values may fall outside `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Holdout {
    feature_names: Vec<String>,
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl Holdout {
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

impl Rows for Holdout {
    fn n_rows(&self) -> usize {
        self.targets.len()
    }
    fn n_features(&self) -> usize {
        self.columns.len()
    }
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }
    fn target(&self, row: usize) -> f64 {
        self.targets[row]
    }
}

/// Immutable, preprocessed training data.
#[derive(Debug, Clone)]
pub struct Dataset {
    feature_names: Vec<String>,
    target_name: String,
    raw: Vec<Vec<f64>>,
    columns: Vec<Vec<f64>>,
    targets: Vec<f64>,
    scale: Vec<ScaleParams>,
    constant: Vec<bool>,
    sorted_values: Vec<Vec<f64>>,
    epsilons: Vec<Option<f64>>,
    eps_min: Option<f64>,
    eps_max: Option<f64>,
    baseline_sse: f64,
    mf: f64,
    // rank of each sample's value within `sorted_values[j]`
    ranks: Vec<Vec<u32>>,
    // samples ordered by value of feature j, ties by index
    order: Vec<Vec<u32>>,
    // targets minus their mean; SSE sweeps run on these to limit cancellation
    centered: Vec<f64>,
}

/// Scales features, builds sorted distinct values and the baseline SSE.
pub fn preprocess(table: &RawTable) -> Result<Dataset> {
    table.validate()?;
    let p = table.n_features();
    let mut raw = vec![Vec::with_capacity(table.n_rows()); p];
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != p {
            return Err(Error::RaggedRow {
                row: r + 1,
                expected: p + 1,
                found: row.len() + 1,
            });
        }
        for (j, &v) in row.iter().enumerate() {
            raw[j].push(v);
        }
    }
    Dataset::from_raw_columns(
        table.feature_names.clone(),
        table.target_name.clone(),
        raw,
        table.targets.clone(),
    )
}

impl Dataset {
    /// Builds a dataset from column-major values in original units.
    pub fn from_raw_columns(
        feature_names: Vec<String>,
        target_name: String,
        raw: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        let n = targets.len();
        if feature_names.is_empty() || raw.is_empty() {
            return Err(Error::NoFeatures);
        }
        if n < 2 {
            return Err(Error::TooFewRows(n));
        }
        if raw.len() != feature_names.len() || raw.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidConfig(
                "feature columns and targets disagree in length".into(),
            ));
        }
        if let Some(bad) = raw.iter().flatten().chain(&targets).find(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite value {bad}")));
        }
        if targets.iter().all(|&y| y == targets[0]) {
            return Err(Error::DegenerateTarget);
        }

        let scale: Vec<ScaleParams> = raw.iter().map(|c| ScaleParams::fit(c)).collect();
        let constant: Vec<bool> = scale.iter().map(ScaleParams::is_constant).collect();
        let columns: Vec<Vec<f64>> = raw
            .iter()
            .zip(&scale)
            .map(|(c, s)| c.iter().map(|&v| s.scale(v)).collect())
            .collect();

        let mut sorted_values = Vec::with_capacity(columns.len());
        let mut ranks = Vec::with_capacity(columns.len());
        let mut order = Vec::with_capacity(columns.len());
        for col in &columns {
            let mut ord: Vec<u32> = (0..n as u32).collect();
            ord.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            let mut values: Vec<f64> = Vec::new();
            let mut rank = vec![0u32; n];
            for &i in &ord {
                let v = col[i as usize];
                if values.last() != Some(&v) {
                    values.push(v);
                }
                rank[i as usize] = (values.len() - 1) as u32;
            }
            sorted_values.push(values);
            ranks.push(rank);
            order.push(ord);
        }

        let epsilons: Vec<Option<f64>> = sorted_values
            .iter()
            .map(|vals| {
                vals.windows(2)
                    .map(|w| w[1] - w[0])
                    .filter(|&g| g > 0.0)
                    .min_by(f64::total_cmp)
            })
            .collect();
        let eps_min = epsilons.iter().flatten().copied().min_by(f64::total_cmp);
        let eps_max = epsilons.iter().flatten().copied().max_by(f64::total_cmp);

        let mean = targets.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = targets.iter().map(|&y| y - mean).collect();
        let baseline_sse: f64 = centered.iter().map(|d| d * d).sum();
        if baseline_sse <= 0.0 {
            return Err(Error::DegenerateTarget);
        }
        let (ymin, ymax) = targets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });

        Ok(Dataset {
            feature_names,
            target_name,
            raw,
            columns,
            targets,
            scale,
            constant,
            sorted_values,
            epsilons,
            eps_min,
            eps_max,
            baseline_sse,
            mf: ymax - ymin,
            ranks,
            order,
            centered,
        })
    }

    /// Re-preprocesses the selected rows (scaling refitted on them).
    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let raw = self.raw.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect();
        let targets = rows.iter().map(|&i| self.targets[i]).collect();
        Dataset::from_raw_columns(self.feature_names.clone(), self.target_name.clone(), raw, targets)
    }

    /// Scales the selected rows with this dataset's parameters.
    pub fn holdout(&self, rows: &[usize]) -> Holdout {
        Holdout {
            feature_names: self.feature_names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    /// Scales rows in original units with this dataset's parameters.
    pub fn scale_rows(&self, rows: &[Vec<f64>], targets: Vec<f64>) -> Holdout {
        let columns = (0..self.n_features())
            .map(|j| rows.iter().map(|r| self.scale[j].scale(r[j])).collect())
            .collect();
        Holdout {
            feature_names: self.feature_names.clone(),
            columns,
            targets,
        }
    }

    /// Splits rows into a re-preprocessed training set and a test set scaled
    /// with the training parameters.
    pub fn split(&self, spec: &SplitSpec) -> Result<(Dataset, Holdout)> {
        let (train_idx, test_idx) = split_indices(self.n_samples(), spec)?;
        let train = self.subset(&train_idx)?;
        let test_rows: Vec<Vec<f64>> = test_idx
            .iter()
            .map(|&i| self.raw.iter().map(|c| c[i]).collect())
            .collect();
        let test_targets = test_idx.iter().map(|&i| self.targets[i]).collect();
        let test = train.scale_rows(&test_rows, test_targets);
        Ok((train, test))
    }

    pub fn n_samples(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn column(&self, feature: usize) -> &[f64] {
        &self.columns[feature]
    }

    pub fn raw_column(&self, feature: usize) -> &[f64] {
        &self.raw[feature]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn scale_params(&self) -> &[ScaleParams] {
        &self.scale
    }

    pub fn is_constant(&self, feature: usize) -> bool {
        self.constant[feature]
    }

    /// Features that admit at least one separating threshold.
    pub fn splittable_features(&self) -> Vec<usize> {
        (0..self.n_features()).filter(|&j| !self.constant[j]).collect()
    }

    pub fn sorted_values(&self, feature: usize) -> &[f64] {
        &self.sorted_values[feature]
    }

    /// Position of `threshold` in `sorted_values(feature)`, if present.
    pub fn threshold_index(&self, feature: usize, threshold: f64) -> Option<usize> {
        self.sorted_values[feature]
            .binary_search_by(|v| v.total_cmp(&threshold))
            .ok()
    }

    pub fn epsilon(&self, feature: usize) -> Option<f64> {
        self.epsilons[feature]
    }

    pub fn eps_min(&self) -> Option<f64> {
        self.eps_min
    }

    pub fn eps_max(&self) -> Option<f64> {
        self.eps_max
    }

    /// Σ (y_i − ȳ)², the SSE of predicting every target with the mean.
    pub fn baseline_sse(&self) -> f64 {
        self.baseline_sse
    }

    /// max y − min y.
    pub fn mf(&self) -> f64 {
        self.mf
    }

    pub(crate) fn rank(&self, feature: usize, sample: usize) -> u32 {
        self.ranks[feature][sample]
    }

    pub(crate) fn ranks(&self, feature: usize) -> &[u32] {
        &self.ranks[feature]
    }

    pub(crate) fn order(&self, feature: usize) -> &[u32] {
        &self.order[feature]
    }

    pub(crate) fn centered(&self) -> &[f64] {
        &self.centered
    }

    /// SHA-256 over feature names, raw values and targets.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        h.update(self.target_name.as_bytes());
        h.update([0u8]);
        for col in &self.raw {
            for v in col {
                h.update(v.to_le_bytes());
            }
        }
        for v in &self.targets {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

impl Rows for Dataset {
    fn n_rows(&self) -> usize {
        self.n_samples()
    }
    fn n_features(&self) -> usize {
        self.columns.len()
    }
    fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }
    fn target(&self, row: usize) -> f64 {
        self.targets[row]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(csv: &str, target: &str) -> Result<RawTable> {
        read_table(csv.as_bytes(), target)
    }

    #[test]
    fn parses_small_csv() {
        let t = table("f1,f2,y\n1,2,3\n4,5,6\n7,8,9\n", "y").unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.n_features(), 2);
        assert_eq!(t.rows[1], vec![4.0, 5.0]);
        assert_eq!(t.targets, vec![3.0, 6.0, 9.0]);
    }

    #[test]
    fn target_may_sit_anywhere() {
        let t = table("y,a\n1,2\n3,4\n", "y").unwrap();
        assert_eq!(t.feature_names, vec!["a"]);
        assert_eq!(t.rows, vec![vec![2.0], vec![4.0]]);
    }

    #[test]
    fn rejects_nan_cell_with_location() {
        let err = table("f1,f2,y\n1,2,3\n4,NaN,6\n", "y").unwrap_err();
        match err {
            Error::BadCell { row, column, value } => {
                assert_eq!(row, 2);
                assert_eq!(column, "f2");
                assert_eq!(value, "NaN");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_empty_cell_and_missing_target() {
        assert!(matches!(table("a,y\n1,\n2,3\n", "y"), Err(Error::BadCell { .. })));
        assert!(matches!(table("a,b\n1,2\n3,4\n", "y"), Err(Error::MissingTarget(_))));
        assert!(matches!(table("a,y\n1,2\n", "y"), Err(Error::TooFewRows(1))));
        assert!(matches!(table("y\n1\n2\n", "y"), Err(Error::NoFeatures)));
    }

    #[test]
    fn selected_columns_ignore_the_rest() {
        let csv = "name,b,y,a\nfoo,1,10,2\nbar,3,30,4\n";
        let sel = read_columns(csv.as_bytes(), &["a".into(), "b".into()], Some("y")).unwrap();
        assert_eq!(sel.rows, vec![vec![2.0, 1.0], vec![4.0, 3.0]]);
        assert_eq!(sel.targets, Some(vec![10.0, 30.0]));
        let err = read_columns(csv.as_bytes(), &["a".into(), "c".into()], None).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "c"));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_table("/nonexistent/file.csv", "y"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn min_max_scaling() {
        let d = preprocess(&table("a,b,y\n2,5,1\n4,5,2\n6,5,4\n", "y").unwrap()).unwrap();
        assert_eq!(d.column(0), &[0.0, 0.5, 1.0]);
        assert_eq!(d.column(1), &[0.0, 0.0, 0.0]);
        assert!(d.is_constant(1));
        assert!(!d.is_constant(0));
        assert_eq!(d.splittable_features(), vec![0]);
        assert_eq!(d.epsilon(1), None);
    }

    #[test]
    fn epsilon_is_minimum_gap() {
        // raw 0,1,3,4 scale to 0, 0.25, 0.75, 1
        let d = preprocess(&table("a,y\n0,1\n1,2\n3,3\n4,4\n3,5\n", "y").unwrap()).unwrap();
        assert_eq!(d.sorted_values(0), &[0.0, 0.25, 0.75, 1.0]);
        assert_eq!(d.epsilon(0), Some(0.25));
        assert_eq!(d.eps_min(), Some(0.25));
        assert_eq!(d.eps_max(), Some(0.25));
    }

    #[test]
    fn baseline_and_mf() {
        let d = preprocess(&table("a,y\n0,1\n1,3\n", "y").unwrap()).unwrap();
        assert_eq!(d.baseline_sse(), 2.0);
        assert_eq!(d.mf(), 2.0);
    }

    #[test]
    fn degenerate_target_rejected() {
        let t = table("a,y\n0,0.1\n1,0.1\n2,0.1\n", "y").unwrap();
        assert!(matches!(preprocess(&t), Err(Error::DegenerateTarget)));
    }

    #[test]
    fn ranks_and_order_agree_with_values() {
        let d = preprocess(&table("a,y\n3,1\n1,2\n3,3\n2,4\n", "y").unwrap()).unwrap();
        assert_eq!(d.ranks(0), &[2, 0, 2, 1]);
        assert_eq!(d.order(0), &[1, 3, 0, 2]);
        assert_eq!(d.threshold_index(0, 0.5), Some(1));
        assert_eq!(d.threshold_index(0, 0.4), None);
    }

    #[test]
    fn split_cardinality_and_determinism() {
        let (tr, te) = split_indices(
            10,
            &SplitSpec {
                train_fraction: 0.7,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        assert!(tr.iter().all(|i| !te.contains(i)));
        let again = split_indices(
            10,
            &SplitSpec {
                train_fraction: 0.7,
                seed: 3,
            },
        )
        .unwrap();
        assert_eq!((tr.clone(), te), again);
    }

    #[test]
    fn different_seeds_give_different_partitions() {
        let spec = |seed| SplitSpec {
            train_fraction: 0.7,
            seed,
        };
        let base = split_indices(50, &spec(0)).unwrap().0;
        let differing = (1..20)
            .filter(|&s| split_indices(50, &spec(s)).unwrap().0 != base)
            .count();
        assert!(differing >= 18, "only {differing} of 19 seeds differ");
    }

    #[test]
    fn split_rejects_empty_sides() {
        assert!(matches!(
            split_indices(
                2,
                &SplitSpec {
                    train_fraction: 0.1,
                    seed: 0
                }
            ),
            Err(Error::EmptySplit("train"))
        ));
        assert!(matches!(
            split_indices(
                2,
                &SplitSpec {
                    train_fraction: 0.9,
                    seed: 0
                }
            ),
            Err(Error::EmptySplit("test"))
        ));
        assert!(split_indices(
            5,
            &SplitSpec {
                train_fraction: 1.0,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn split_refits_scaling_on_train_rows() {
        let csv = "a,y\n0,1\n10,2\n20,3\n30,4\n40,5\n50,6\n60,7\n70,8\n80,9\n90,10\n";
        let d = preprocess(&table(csv, "y").unwrap()).unwrap();
        let spec = SplitSpec {
            train_fraction: 0.7,
            seed: 1,
        };
        let (train, test) = d.split(&spec).unwrap();
        let (tr_idx, te_idx) = split_indices(10, &spec).unwrap();
        let raw_train: Vec<f64> = tr_idx.iter().map(|&i| d.raw_column(0)[i]).collect();
        let p = ScaleParams::fit(&raw_train);
        assert_eq!(train.scale_params()[0], p);
        assert!(train.column(0).iter().all(|v| (0.0..=1.0).contains(v)));
        for (r, &i) in te_idx.iter().enumerate() {
            assert_eq!(test.value(r, 0), p.scale(d.raw_column(0)[i]));
            assert_eq!(test.target(r), d.targets()[i]);
        }
    }

    #[test]
    fn unscale_formula() {
        let p = ScaleParams { min: 2.0, max: 6.0 };
        assert_eq!(p.unscale(0.5), 4.0);
        assert_eq!(p.scale(4.0), 0.5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn column() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(prop_oneof![-1e3..1e3f64, (0i32..6).prop_map(f64::from)], 2..40)
        }

        proptest! {
            #[test]
            fn scaling_round_trips(col in column()) {
                let p = ScaleParams::fit(&col);
                prop_assume!(!p.is_constant());
                for &x in &col {
                    let back = p.unscale(p.scale(x));
                    let scale = x.abs().max(p.max.abs()).max(p.min.abs());
                    prop_assert!((back - x).abs() <= 1e-12 * scale);
                }
            }

            #[test]
            fn sorted_values_match_dedup_oracle(col in column(), ys in prop::collection::vec(-5.0..5.0f64, 40)) {
                let n = col.len();
                let mut ys = ys[..n].to_vec();
                ys[0] += 1.0; // avoid an all-equal target
                let d = Dataset::from_raw_columns(vec!["a".into()], "y".into(), vec![col.clone()], ys.clone()).unwrap();
                let mut oracle: Vec<f64> = d.column(0).to_vec();
                oracle.sort_by(f64::total_cmp);
                oracle.dedup();
                prop_assert_eq!(d.sorted_values(0), &oracle[..]);
                prop_assert!(d.column(0).iter().all(|v| (0.0..=1.0).contains(v)));
                for i in 0..n {
                    prop_assert_eq!(d.sorted_values(0)[d.rank(0, i) as usize], d.column(0)[i]);
                }
                let mean = ys.iter().sum::<f64>() / n as f64;
                let identity = ys.iter().map(|y| y * y).sum::<f64>() - n as f64 * mean * mean;
                prop_assert!((d.baseline_sse() - identity).abs() <= 1e-9 * d.baseline_sse().max(1.0));
            }
        }
    }
}
