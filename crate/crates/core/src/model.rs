//! JSON model files.
//!
//! Thresholds are stored both in original units (for people) and scaled (for
//! an exact round trip). Loading trusts only the scaled value.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RawTable, ScaleParams};
use crate::error::{Error, Result};
use crate::tree::{Layout, Split, TreeStructure};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub index: usize,
    pub active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_index: Option<usize>,
    /// Original units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_scaled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafRecord {
    pub index: usize,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_digest: String,
    pub seed: Option<u64>,
    pub objective: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub depth: usize,
    pub lambda: f64,
    pub target_name: String,
    pub feature_names: Vec<String>,
    pub scale_params: Vec<ScaleParams>,
    pub nodes: Vec<NodeRecord>,
    pub leaves: Vec<LeafRecord>,
    pub provenance: Provenance,
}

impl ModelFile {
    /// Describes `tree`, trained on `data`.
    pub fn new(tree: &TreeStructure, data: &Dataset, lambda: f64, provenance: Provenance) -> Self {
        let layout = tree.layout();
        let nodes = layout
            .internal_nodes()
            .map(|t| match tree.split(t) {
                Some(s) => NodeRecord {
                    index: t,
                    active: true,
                    feature: Some(data.feature_names()[s.feature].clone()),
                    feature_index: Some(s.feature),
                    threshold: Some(data.scale_params()[s.feature].unscale(s.threshold)),
                    threshold_scaled: Some(s.threshold),
                },
                None => NodeRecord {
                    index: t,
                    active: false,
                    feature: None,
                    feature_index: None,
                    threshold: None,
                    threshold_scaled: None,
                },
            })
            .collect();
        let leaves = layout
            .leaf_nodes()
            .map(|t| LeafRecord {
                index: t,
                prediction: tree.leaf_value(t),
            })
            .collect();
        ModelFile {
            schema_version: SCHEMA_VERSION,
            depth: layout.depth(),
            lambda,
            target_name: data.target_name().to_string(),
            feature_names: data.feature_names().to_vec(),
            scale_params: data.scale_params().to_vec(),
            nodes,
            leaves,
            provenance,
        }
    }

    /// Parses a model, checking the schema version before anything else.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::CorruptModel("missing schema_version".into()))?;
        if found != SCHEMA_VERSION as u64 {
            return Err(Error::SchemaVersion {
                found: found.min(u32::MAX as u64) as u32,
                expected: SCHEMA_VERSION,
            });
        }
        let model: ModelFile = serde_json::from_value(value)?;
        model.tree()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()? + "\n").map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Rebuilds the tree (scaled thresholds).
    pub fn tree(&self) -> Result<TreeStructure> {
        let layout = Layout::new(self.depth)?;
        let p = self.feature_names.len();
        if self.scale_params.len() != p {
            return Err(Error::CorruptModel(format!(
                "{} scale entries for {p} features",
                self.scale_params.len()
            )));
        }
        if self.nodes.len() != layout.n_internal() || self.leaves.len() != layout.n_leaves() {
            return Err(Error::CorruptModel(format!(
                "depth {} needs {} nodes and {} leaves",
                self.depth,
                layout.n_internal(),
                layout.n_leaves()
            )));
        }
        let mut splits = Vec::with_capacity(self.nodes.len());
        for (k, n) in self.nodes.iter().enumerate() {
            if n.index != k + 1 {
                return Err(Error::CorruptModel(format!("node {} out of order", n.index)));
            }
            if !n.active {
                splits.push(None);
                continue;
            }
            let feature = match (n.feature_index, &n.feature) {
                (Some(j), _) if j < p => j,
                (None, Some(name)) => self
                    .feature_names
                    .iter()
                    .position(|f| f == name)
                    .ok_or_else(|| Error::CorruptModel(format!("node {}: unknown feature {name}", n.index)))?,
                _ => return Err(Error::CorruptModel(format!("node {}: bad feature", n.index))),
            };
            let threshold = n
                .threshold_scaled
                .ok_or_else(|| Error::CorruptModel(format!("node {}: missing threshold", n.index)))?;
            if !threshold.is_finite() {
                return Err(Error::CorruptModel(format!("node {}: non-finite threshold", n.index)));
            }
            splits.push(Some(Split { feature, threshold }));
        }
        let mut tree = TreeStructure::from_splits(layout, splits).map_err(|e| Error::CorruptModel(e.to_string()))?;
        for (k, l) in self.leaves.iter().enumerate() {
            if l.index != layout.n_leaves() + k {
                return Err(Error::CorruptModel(format!("leaf {} out of order", l.index)));
            }
            tree.set_leaf_value(l.index, l.prediction);
        }
        Ok(tree)
    }

    /// Position of each model feature among `header`, by name.
    pub fn column_map(&self, header: &[String]) -> Result<Vec<usize>> {
        self.feature_names
            .iter()
            .map(|f| {
                header
                    .iter()
                    .position(|h| h == f)
                    .ok_or_else(|| Error::MissingColumn(f.clone()))
            })
            .collect()
    }

    /// Scales one row of original-unit features (model column order).
    pub fn scale_row(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.scale_params).map(|(&x, s)| s.scale(x)).collect()
    }

    /// Predicts one row of original-unit features (model column order).
    pub fn predict_raw(&self, tree: &TreeStructure, raw: &[f64]) -> f64 {
        tree.predict(&self.scale_row(raw))
    }

    /// Predicts every row of a table, matching columns by name.
    pub fn predict_table(&self, table: &RawTable) -> Result<Vec<f64>> {
        let tree = self.tree()?;
        let map = self.column_map(&table.feature_names)?;
        Ok(table
            .rows
            .iter()
            .map(|r| {
                let raw: Vec<f64> = map.iter().map(|&c| r[c]).collect();
                self.predict_raw(&tree, &raw)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::fit_cart;

    fn fixture() -> (Dataset, TreeStructure) {
        let x0 = vec![3.0, 7.5, 1.25, 9.0, 4.0, 6.0];
        let x1 = vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0];
        let y = vec![1.0, 5.0, 0.5, 6.0, 2.0, 4.5];
        let d = Dataset::from_raw_columns(vec!["a".into(), "b".into()], "y".into(), vec![x0, x1], y).unwrap();
        let t = fit_cart(&d, 2, 0.0);
        (d, t)
    }

    fn prov() -> Provenance {
        Provenance {
            dataset_digest: "abc".into(),
            seed: Some(7),
            objective: 0.1,
            lower_bound: 0.1,
            gap: 0.0,
            method: "test".into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let (d, t) = fixture();
        let m = ModelFile::new(&t, &d, 1e-3, prov());
        let back = ModelFile::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let t2 = back.tree().unwrap();
        assert_eq!(t2, t);
        for i in 0..d.n_samples() {
            let raw: Vec<f64> = (0..2).map(|j| d.raw_column(j)[i]).collect();
            assert_eq!(back.predict_raw(&t2, &raw).to_bits(), t.predict_row(&d, i).to_bits());
        }
    }

    #[test]
    fn unknown_schema_rejected() {
        let (d, t) = fixture();
        let mut v: serde_json::Value =
            serde_json::from_str(&ModelFile::new(&t, &d, 0.0, prov()).to_json().unwrap()).unwrap();
        v["schema_version"] = 2.into();
        let err = ModelFile::from_json(&v.to_string()).unwrap_err();
        assert!(matches!(err, Error::SchemaVersion { found: 2, expected: 1 }));
    }

    #[test]
    fn truncated_file_is_an_error() {
        let (d, t) = fixture();
        let text = ModelFile::new(&t, &d, 0.0, prov()).to_json().unwrap();
        assert!(ModelFile::from_json(&text[..text.len() / 2]).is_err());
    }

    #[test]
    fn columns_matched_by_name() {
        let (d, t) = fixture();
        let m = ModelFile::new(&t, &d, 0.0, prov());
        let table = RawTable {
            feature_names: vec!["b".into(), "extra".into(), "a".into()],
            target_name: "y".into(),
            rows: (0..d.n_samples())
                .map(|i| vec![d.raw_column(1)[i], 0.0, d.raw_column(0)[i]])
                .collect(),
            targets: d.targets().to_vec(),
        };
        let pred = m.predict_table(&table).unwrap();
        for (i, p) in pred.iter().enumerate() {
            assert_eq!(*p, t.predict_row(&d, i));
        }
        let missing = RawTable {
            feature_names: vec!["a".into()],
            ..table
        };
        assert!(matches!(m.predict_table(&missing), Err(Error::MissingColumn(c)) if c == "b"));
    }
}
