//! Dataset ingestion, feature schema, min-max scaling, one-hot encoding,
//! train/test splitting, and 2-D synthetic data generation.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of a tabular feature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeatureKind {
    Continuous,
    /// Ordered level names; encoded as a one-hot block.
    Categorical { levels: Vec<String> },
}

/// One declared feature: name, kind, and whether it may be acted upon.
/// Serialized as `{"name", "kind": "continuous"|"categorical",
/// "levels": [...], "mutable"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "FeatureRepr", into = "FeatureRepr")]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
    pub mutable: bool,
}

#[derive(Serialize, Deserialize)]
struct FeatureRepr {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    levels: Option<Vec<String>>,
    #[serde(default = "default_mutable")]
    mutable: bool,
}

fn default_mutable() -> bool {
    true
}

impl TryFrom<FeatureRepr> for Feature {
    type Error = String;

    fn try_from(repr: FeatureRepr) -> std::result::Result<Self, String> {
        let kind = match (repr.kind.as_str(), repr.levels) {
            ("continuous", None) => FeatureKind::Continuous,
            ("continuous", Some(_)) => {
                return Err(format!("continuous feature {:?} declares levels", repr.name))
            }
            ("categorical", Some(levels)) => FeatureKind::Categorical { levels },
            ("categorical", None) => {
                return Err(format!("categorical feature {:?} needs levels", repr.name))
            }
            (other, _) => {
                return Err(format!(
                    "feature {:?} has unknown kind {other:?} (continuous or categorical)",
                    repr.name
                ))
            }
        };
        Ok(Feature {
            name: repr.name,
            kind,
            mutable: repr.mutable,
        })
    }
}

impl From<Feature> for FeatureRepr {
    fn from(f: Feature) -> FeatureRepr {
        let (kind, levels) = match f.kind {
            FeatureKind::Continuous => ("continuous".to_string(), None),
            FeatureKind::Categorical { levels } => ("categorical".to_string(), Some(levels)),
        };
        FeatureRepr {
            name: f.name,
            kind,
            levels,
            mutable: f.mutable,
        }
    }
}

/// Layout of one feature inside the encoded vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedBlock {
    pub start: usize,
    pub len: usize,
}

/// Ordered feature declarations plus the derived encoded-coordinate layout.
#[derive(Debug, Clone)]
pub struct FeatureSchema {
    features: Vec<Feature>,
    blocks: Vec<EncodedBlock>,
    encoded_dim: usize,
}

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidSchema("no features declared".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for f in &features {
            if !seen.insert(f.name.clone()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate feature name {:?}",
                    f.name
                )));
            }
            if let FeatureKind::Categorical { levels } = &f.kind {
                if levels.len() < 2 {
                    return Err(Error::InvalidSchema(format!(
                        "categorical feature {:?} has {} levels, need at least 2",
                        f.name,
                        levels.len()
                    )));
                }
                let mut level_seen = std::collections::HashSet::new();
                for l in levels {
                    if !level_seen.insert(l) {
                        return Err(Error::InvalidSchema(format!(
                            "duplicate level {:?} in feature {:?}",
                            l, f.name
                        )));
                    }
                }
            }
        }
        let mut blocks = Vec::with_capacity(features.len());
        let mut offset = 0;
        for f in &features {
            let len = match &f.kind {
                FeatureKind::Continuous => 1,
                FeatureKind::Categorical { levels } => levels.len(),
            };
            blocks.push(EncodedBlock { start: offset, len });
            offset += len;
        }
        Ok(FeatureSchema {
            features,
            blocks,
            encoded_dim: offset,
        })
    }

    /// Reads a schema from a JSON file: an ordered array of feature objects
    /// `{"name": ..., "kind": "continuous" | "categorical", "levels": [...], "mutable": ...}`.
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
        let features: Vec<Feature> = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidSchema(format!("{}: {e}", path.display())))?;
        FeatureSchema::new(features)
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Encoded dimension `p`.
    pub fn encoded_dim(&self) -> usize {
        self.encoded_dim
    }

    pub fn block(&self, feature_index: usize) -> EncodedBlock {
        self.blocks[feature_index]
    }

    /// The feature owning an encoded coordinate.
    pub fn feature_of_coord(&self, coord: usize) -> usize {
        debug_assert!(coord < self.encoded_dim);
        self.blocks
            .partition_point(|b| b.start + b.len <= coord)
    }

    /// Encoded coordinates belonging to immutable features.
    pub fn immutable_coords(&self) -> Vec<usize> {
        let mut coords = Vec::new();
        for (f, b) in self.features.iter().zip(&self.blocks) {
            if !f.mutable {
                coords.extend(b.start..b.start + b.len);
            }
        }
        coords
    }
}

/// A raw (unencoded) cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Continuous(f64),
    /// Index into the feature's level list.
    Level(usize),
}

pub type RawInstance = Vec<RawValue>;

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Csv,
    Synthetic,
}

/// Unencoded dataset: rows aligned with the schema's feature order.
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub rows: Vec<RawInstance>,
    pub labels: Vec<u8>,
    pub provenance: Provenance,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Encoded dataset: instances as columns of a p-by-N matrix.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<u8>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn instance(&self, i: usize) -> DVector<f64> {
        self.x.column(i).into_owned()
    }
}

/// Loads a CSV file with one header row. The header must contain every
/// schema feature name plus the label column; column order in the file is
/// free, the returned rows follow the schema order.
pub fn load_csv(
    path: impl AsRef<Path>,
    schema: &FeatureSchema,
    label_column: &str,
) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let headers = reader.headers()?.clone();
    let column_of = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                path: path.display().to_string(),
                column: name.to_string(),
            })
    };
    let feature_cols: Vec<usize> = schema
        .features()
        .iter()
        .map(|f| column_of(&f.name))
        .collect::<Result<_>>()?;
    let label_col = column_of(label_column)?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = row_idx + 1; // 1-based data row
        let mut row = Vec::with_capacity(schema.features().len());
        for (f, &col) in schema.features().iter().zip(&feature_cols) {
            let cell = record.get(col).unwrap_or("");
            let value = match &f.kind {
                FeatureKind::Continuous => {
                    let v = cell.parse::<f64>().map_err(|_| Error::BadNumericCell {
                        row: row_no,
                        column: f.name.clone(),
                        value: cell.to_string(),
                    })?;
                    RawValue::Continuous(v)
                }
                FeatureKind::Categorical { levels } => {
                    let idx = levels.iter().position(|l| l == cell).ok_or_else(|| {
                        Error::UnknownLevel {
                            row: row_no,
                            column: f.name.clone(),
                            value: cell.to_string(),
                        }
                    })?;
                    RawValue::Level(idx)
                }
            };
            row.push(value);
        }
        let label_cell = record.get(label_col).unwrap_or("");
        let label = match label_cell {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::InvalidLabel {
                    row: row_no,
                    column: label_column.to_string(),
                    value: other.to_string(),
                })
            }
        };
        rows.push(row);
        labels.push(label);
    }
    Ok(RawDataset {
        rows,
        labels,
        provenance: Provenance::Csv,
    })
}

/// Per-continuous-feature min/max learned from a training split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scaler {
    /// One `(min, max)` pair per feature, `None` for categorical features.
    ranges: Vec<Option<(f64, f64)>>,
}

impl Scaler {
    pub fn ranges(&self) -> &[Option<(f64, f64)>] {
        &self.ranges
    }

    /// Scales a raw continuous value into [0, 1]. A constant feature
    /// (max = min) maps to 0; out-of-range values are clamped.
    pub fn scale(&self, feature_index: usize, v: f64) -> f64 {
        let (min, max) = self.ranges[feature_index].expect("continuous feature");
        if max > min {
            ((v - min) / (max - min)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Inverse of [`scale`](Self::scale). A constant feature decodes to its
    /// single observed value.
    pub fn unscale(&self, feature_index: usize, coord: f64) -> f64 {
        let (min, max) = self.ranges[feature_index].expect("continuous feature");
        if max > min {
            min + coord * (max - min)
        } else {
            min
        }
    }
}

/// Learns per-feature min/max from the training split.
pub fn fit_scaler(train: &RawDataset, schema: &FeatureSchema) -> Result<Scaler> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("cannot fit scaler".into()));
    }
    let mut ranges = vec![None; schema.features().len()];
    for (fi, f) in schema.features().iter().enumerate() {
        if let FeatureKind::Continuous = f.kind {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for row in &train.rows {
                if let RawValue::Continuous(v) = row[fi] {
                    min = min.min(v);
                    max = max.max(v);
                }
            }
            ranges[fi] = Some((min, max));
        }
    }
    Ok(Scaler { ranges })
}

/// Encodes a raw instance: scaled continuous coordinates and one-hot
/// categorical blocks, in schema order.
pub fn encode(instance: &RawInstance, schema: &FeatureSchema, scaler: &Scaler) -> DVector<f64> {
    let mut out = DVector::zeros(schema.encoded_dim());
    for (fi, value) in instance.iter().enumerate() {
        let block = schema.block(fi);
        match value {
            RawValue::Continuous(v) => out[block.start] = scaler.scale(fi, *v),
            RawValue::Level(level) => out[block.start + level] = 1.0,
        }
    }
    out
}

/// Decodes an encoded vector back to a raw instance. Each categorical
/// block decodes to the level with the maximum coordinate; ties break to
/// the lowest level index.
pub fn decode(encoded: &DVector<f64>, schema: &FeatureSchema, scaler: &Scaler) -> RawInstance {
    assert_eq!(encoded.len(), schema.encoded_dim());
    let mut out = Vec::with_capacity(schema.features().len());
    for (fi, f) in schema.features().iter().enumerate() {
        let block = schema.block(fi);
        match &f.kind {
            FeatureKind::Continuous => {
                out.push(RawValue::Continuous(scaler.unscale(fi, encoded[block.start])));
            }
            FeatureKind::Categorical { .. } => {
                let mut best = 0;
                let mut best_val = encoded[block.start];
                for j in 1..block.len {
                    let v = encoded[block.start + j];
                    if v > best_val {
                        best_val = v;
                        best = j;
                    }
                }
                out.push(RawValue::Level(best));
            }
        }
    }
    out
}

/// Encodes a whole raw dataset into a p-by-N column matrix.
pub fn encode_dataset(raw: &RawDataset, schema: &FeatureSchema, scaler: &Scaler) -> Dataset {
    let p = schema.encoded_dim();
    let n = raw.len();
    let mut x = DMatrix::zeros(p, n);
    for (i, row) in raw.rows.iter().enumerate() {
        x.set_column(i, &encode(row, schema, scaler));
    }
    Dataset {
        x,
        y: raw.labels.clone(),
        provenance: raw.provenance,
    }
}

/// Train/test split parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Splits a raw dataset into train/test by a seeded permutation. The train
/// size is `train_fraction * N` rounded half up.
pub fn split(dataset: &RawDataset, config: SplitConfig) -> Result<(RawDataset, RawDataset)> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::EmptyDataset(format!(
            "need at least 2 rows to split, got {n}"
        )));
    }
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction must lie in (0,1), got {}",
            config.train_fraction
        )));
    }
    let train_n = (config.train_fraction * n as f64 + 0.5).floor() as usize;
    let train_n = train_n.clamp(1, n - 1);

    let mut perm: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    let take = |ids: &[usize]| RawDataset {
        rows: ids.iter().map(|&i| dataset.rows[i].clone()).collect(),
        labels: ids.iter().map(|&i| dataset.labels[i]).collect(),
        provenance: dataset.provenance,
    };
    Ok((take(&perm[..train_n]), take(&perm[train_n..])))
}

/// Schema of the 2-D synthetic benchmark data: two mutable continuous
/// features `x1` and `x2`.
pub fn synth_schema() -> FeatureSchema {
    FeatureSchema::new(vec![
        Feature {
            name: "x1".into(),
            kind: FeatureKind::Continuous,
            mutable: true,
        },
        Feature {
            name: "x2".into(),
            kind: FeatureKind::Continuous,
            mutable: true,
        },
    ])
    .expect("static schema")
}

/// Labeling rule of the synthetic benchmark: 1 iff
/// `x2 >= 1 + x1 + 2*x1^2 + x1^3 - x1^4`.
pub fn synth_label(x1: f64, x2: f64) -> u8 {
    let boundary = 1.0 + x1 + 2.0 * x1 * x1 + x1.powi(3) - x1.powi(4);
    u8::from(x2 >= boundary)
}

/// Samples `n` points uniformly on [-2, 4] x [-2, 7] and labels them with
/// [`synth_label`]. Deterministic given the seed.
pub fn synth_2d(n: usize, seed: u64) -> RawDataset {
    assert!(n >= 1, "need at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x1 = rng.gen_range(-2.0..4.0);
        let x2 = rng.gen_range(-2.0..7.0);
        rows.push(vec![RawValue::Continuous(x1), RawValue::Continuous(x2)]);
        labels.push(synth_label(x1, x2));
    }
    RawDataset {
        rows,
        labels,
        provenance: Provenance::Synthetic,
    }
}
