//! Tabular input: CSV loading, stratified splits, quantile binning and
//! categorical encoding.
//!
//! Bin layout for every feature is `[value bins..., reserved]`. The reserved
//! last bin holds missing numeric values and missing or unseen categories, so
//! `n_bins() == value_bins() + 1` always.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_MAX_BINS: usize = 255;
pub const DEFAULT_MISSING_MARKERS: [&str; 3] = ["", "NA", "?"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    Feature,
    Label,
    Group,
}

/// Per-column entry of a schema override file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnOverride {
    #[serde(default)]
    pub kind: Option<ColumnKind>,
    #[serde(default)]
    pub role: Option<ColumnRole>,
}

pub type SchemaOverrides = BTreeMap<String, ColumnOverride>;

pub fn read_schema(path: &Path) -> Result<SchemaOverrides> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// A single cell as seen by models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Num(f64),
    Cat(&'a str),
    Missing,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
    /// Used as a model input.
    pub is_feature: bool,
    /// Sensitive attribute available for subgroup reports.
    pub is_group: bool,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
            is_feature: true,
            is_group: false,
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical(values),
            is_feature: true,
            is_group: false,
        }
    }

    pub fn kind(&self) -> ColumnKind {
        match self.data {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    pub fn len(&self) -> usize {
        match &self.data {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, row: usize) -> Value<'_> {
        match &self.data {
            ColumnData::Numeric(v) => match v[row] {
                Some(x) if !x.is_nan() => Value::Num(x),
                _ => Value::Missing,
            },
            ColumnData::Categorical(v) => match &v[row] {
                Some(s) => Value::Cat(s),
                None => Value::Missing,
            },
        }
    }

    /// Display token used for grouping; missing becomes `"<missing>"`.
    pub fn token(&self, row: usize) -> String {
        match self.value(row) {
            Value::Num(x) => format!("{x}"),
            Value::Cat(s) => s.to_string(),
            Value::Missing => "<missing>".to_string(),
        }
    }
}

/// Rows of features with a binary label (soft labels in `[0,1]` are allowed
/// for semi-synthetic data).
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub name: String,
    pub label_name: String,
    pub columns: Vec<Column>,
    pub labels: Vec<f64>,
}

impl RawDataset {
    pub fn new(
        name: impl Into<String>,
        label_name: impl Into<String>,
        columns: Vec<Column>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::Schema("dataset has no rows".into()));
        }
        for c in &columns {
            if c.len() != n {
                return Err(Error::Schema(format!(
                    "column `{}` has {} rows, labels have {n}",
                    c.name,
                    c.len()
                )));
            }
        }
        if let Some(bad) = labels.iter().find(|y| !(0.0..=1.0).contains(*y)) {
            return Err(Error::NonBinaryLabel(format!("label value {bad} outside [0,1]")));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        Ok(RawDataset {
            name: name.into(),
            label_name: label_name.into(),
            columns,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    /// Column indices used as model inputs, in file order.
    pub fn feature_columns(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|&c| self.columns[c].is_feature)
            .collect()
    }

    pub fn n_features(&self) -> usize {
        self.columns.iter().filter(|c| c.is_feature).count()
    }

    pub fn group_columns(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&c| self.columns[c].is_group).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.column_index(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::MissingFeature(name.to_string()))
    }

    pub fn positive_rate(&self) -> f64 {
        self.labels.iter().sum::<f64>() / self.n_rows() as f64
    }

    pub fn with_labels(&self, labels: Vec<f64>) -> Result<Self> {
        RawDataset::new(self.name.clone(), self.label_name.clone(), self.columns.clone(), labels)
    }

    /// The same rows with `feature` no longer used as a model input. The
    /// column stays available for grouping.
    pub fn without_feature(&self, feature: &str) -> Result<Self> {
        let idx = self
            .column_index(feature)
            .filter(|&i| self.columns[i].is_feature)
            .ok_or_else(|| Error::MissingFeature(feature.to_string()))?;
        if self.n_features() == 1 {
            return Err(Error::Config(format!(
                "cannot drop `{feature}`: it is the only feature"
            )));
        }
        let mut out = self.clone();
        out.columns[idx].is_feature = false;
        Ok(out)
    }

    /// Replace missing numeric values by the mean over `rows`. This
    /// reproduces the mean-imputation artifact and is never applied
    /// implicitly.
    pub fn impute_mean(&self, rows: &[usize]) -> Self {
        let mut out = self.clone();
        for col in out.columns.iter_mut() {
            if let ColumnData::Numeric(v) = &mut col.data {
                let (sum, cnt) = rows
                    .iter()
                    .filter_map(|&r| v[r].filter(|x| !x.is_nan()))
                    .fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
                if cnt == 0 {
                    continue;
                }
                let mean = sum / cnt as f64;
                for x in v.iter_mut() {
                    if x.is_none_or(|x| x.is_nan()) {
                        *x = Some(mean);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label: String,
    pub schema: SchemaOverrides,
    pub missing_markers: Vec<String>,
    /// Extra columns to flag as sensitive; they remain features.
    pub group_columns: Vec<String>,
    /// Label token treated as the positive class when labels are not 0/1.
    pub positive_label: Option<String>,
    pub name: Option<String>,
}

impl LoadOptions {
    pub fn new(label: impl Into<String>) -> Self {
        LoadOptions {
            label: label.into(),
            schema: SchemaOverrides::new(),
            missing_markers: DEFAULT_MISSING_MARKERS.iter().map(|s| s.to_string()).collect(),
            group_columns: Vec::new(),
            positive_label: None,
            name: None,
        }
    }
}

/// Load a headered CSV. Columns whose non-missing values all parse as
/// finite numbers are numeric, others categorical, unless overridden.
///
/// Labels are either `0`/`1` or exactly two distinct tokens; in the latter
/// case the positive class is `positive_label` or else the lexicographically
/// larger token.
pub fn load_csv(path: &Path, opts: &LoadOptions) -> Result<RawDataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let label_name = opts
        .schema
        .iter()
        .find(|(_, o)| o.role == Some(ColumnRole::Label))
        .map(|(k, _)| k.clone())
        .unwrap_or_else(|| opts.label.clone());
    let label_idx = headers
        .iter()
        .position(|h| *h == label_name)
        .ok_or_else(|| Error::MissingLabel(label_name.clone()))?;
    for name in opts.schema.keys().chain(opts.group_columns.iter()) {
        if !headers.contains(name) {
            return Err(Error::Schema(format!("column `{name}` not in header")));
        }
    }

    let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record?;
        for (c, field) in record.iter().enumerate().take(headers.len()) {
            let missing = opts.missing_markers.iter().any(|m| m == field);
            cells[c].push(if missing { None } else { Some(field.to_string()) });
        }
    }

    let labels = parse_labels(&cells[label_idx], opts.positive_label.as_deref())?;

    let mut columns = Vec::new();
    for (c, raw) in cells.into_iter().enumerate() {
        if c == label_idx {
            continue;
        }
        let name = headers[c].clone();
        let ov = opts.schema.get(&name).cloned().unwrap_or_default();
        if ov.role == Some(ColumnRole::Label) {
            return Err(Error::Schema(format!("multiple label columns: `{name}`")));
        }
        let parsed: Option<Vec<Option<f64>>> = raw
            .iter()
            .map(|cell| match cell {
                None => Some(None),
                Some(s) => s.parse::<f64>().ok().filter(|x| x.is_finite()).map(Some),
            })
            .collect();
        let kind = ov.kind.unwrap_or(if parsed.is_some() {
            ColumnKind::Numeric
        } else {
            ColumnKind::Categorical
        });
        let data =
            match kind {
                ColumnKind::Numeric => ColumnData::Numeric(parsed.ok_or_else(|| {
                    Error::Schema(format!("column `{name}` forced numeric but has non-numeric values"))
                })?),
                ColumnKind::Categorical => ColumnData::Categorical(raw),
            };
        let is_group_only = ov.role == Some(ColumnRole::Group);
        columns.push(Column {
            is_feature: !is_group_only,
            is_group: is_group_only || opts.group_columns.contains(&name),
            name,
            data,
        });
    }

    let name = opts.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    RawDataset::new(name, label_name, columns, labels)
}

fn parse_labels(cells: &[Option<String>], positive: Option<&str>) -> Result<Vec<f64>> {
    if let Some(row) = cells.iter().position(Option::is_none) {
        return Err(Error::NonBinaryLabel(format!("missing label at data row {row}")));
    }
    let tokens: Vec<&str> = cells.iter().map(|c| c.as_deref().unwrap_or("")).collect();
    let numeric: Option<Vec<f64>> = tokens.iter().map(|t| t.parse::<f64>().ok()).collect();
    if let Some(v) = numeric {
        if v.iter().all(|&y| y == 0.0 || y == 1.0) {
            return Ok(v);
        }
    }
    let mut distinct: Vec<&str> = tokens.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() > 2 {
        return Err(Error::NonBinaryLabel(format!(
            "{} distinct label values",
            distinct.len()
        )));
    }
    let pos = match positive {
        Some(p) if distinct.contains(&p) => p,
        Some(p) => return Err(Error::NonBinaryLabel(format!("positive label `{p}` not present"))),
        None if distinct.len() == 2 => distinct[1],
        None => {
            return Err(Error::NonBinaryLabel(format!(
                "single label token `{}` and no positive label given",
                distinct[0]
            )))
        }
    };
    Ok(tokens.iter().map(|t| if *t == pos { 1.0 } else { 0.0 }).collect())
}

/// Train / validation / test row indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub fractions: [f64; 3],
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub const DEFAULT_FRACTIONS: [f64; 3] = [0.70, 0.15, 0.15];

/// Stratified 3-way split of all rows.
pub fn make_split(ds: &RawDataset, seed: u64, fractions: [f64; 3]) -> Result<SplitPlan> {
    let rows: Vec<usize> = (0..ds.n_rows()).collect();
    let mut parts = stratified_partition(&rows, &ds.labels, seed, &fractions)?;
    let test = parts.pop().unwrap_or_default();
    let val = parts.pop().unwrap_or_default();
    let train = parts.pop().unwrap_or_default();
    Ok(SplitPlan {
        seed,
        fractions,
        train,
        val,
        test,
    })
}

/// Partition `rows` into `fractions.len()` disjoint sorted parts with
/// near-identical positive rates. Part sizes follow the largest-remainder
/// rule, so exact fractions give exact sizes.
pub fn stratified_partition(rows: &[usize], labels: &[f64], seed: u64, fractions: &[f64]) -> Result<Vec<Vec<usize>>> {
    if fractions.iter().any(|&f| f <= 0.0 || !f.is_finite()) {
        return Err(Error::Split("fractions must be positive".into()));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("fractions sum to {total}, not 1")));
    }
    let sizes = allocate(rows.len(), fractions);
    if sizes.contains(&0) {
        return Err(Error::Split(format!(
            "{} rows cannot fill every split: sizes {sizes:?}",
            rows.len()
        )));
    }
    let mut pos: Vec<usize> = rows.iter().copied().filter(|&r| labels[r] >= 0.5).collect();
    let mut neg: Vec<usize> = rows.iter().copied().filter(|&r| labels[r] < 0.5).collect();
    pos.shuffle(&mut seed::rng_for(seed, 1));
    neg.shuffle(&mut seed::rng_for(seed, 0));

    let mut pos_sizes = allocate(pos.len(), fractions);
    // Keep every part's positive share within its overall size.
    loop {
        let Some(over) = (0..sizes.len()).find(|&i| pos_sizes[i] > sizes[i]) else {
            break;
        };
        pos_sizes[over] -= 1;
        let slack = (0..sizes.len())
            .find(|&i| pos_sizes[i] < sizes[i])
            .expect("total positives never exceed total rows");
        pos_sizes[slack] += 1;
    }

    let mut parts = Vec::with_capacity(sizes.len());
    let (mut pi, mut ni) = (0, 0);
    for (size, psize) in sizes.iter().zip(&pos_sizes) {
        let nsize = size - psize;
        let mut part: Vec<usize> = pos[pi..pi + psize]
            .iter()
            .chain(&neg[ni..ni + nsize])
            .copied()
            .collect();
        pi += psize;
        ni += nsize;
        part.sort_unstable();
        parts.push(part);
    }
    Ok(parts)
}

fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let mut left = n.saturating_sub(sizes.iter().sum());
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[i] += 1;
        left -= 1;
    }
    sizes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CategoricalEncoding {
    #[default]
    Label,
    OneHot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureBins {
    Numeric {
        /// Strictly increasing interior cut points; bin `b` covers
        /// `[edges[b-1], edges[b])` with infinite end bins.
        edges: Vec<f64>,
        /// Training-data median of each value bin.
        representatives: Vec<f64>,
    },
    Categorical {
        /// Category tokens in order of first appearance in training rows.
        categories: Vec<String>,
        encoding: CategoricalEncoding,
    },
}

impl FeatureBins {
    pub fn value_bins(&self) -> usize {
        match self {
            FeatureBins::Numeric { edges, .. } => edges.len() + 1,
            FeatureBins::Categorical { categories, .. } => categories.len(),
        }
    }

    pub fn bin_of(&self, value: Value<'_>) -> usize {
        let reserved = self.value_bins();
        match (self, value) {
            (FeatureBins::Numeric { edges, .. }, Value::Num(x)) => numeric_bin(edges, x),
            (FeatureBins::Categorical { categories, .. }, Value::Cat(s)) => {
                categories.iter().position(|c| c == s).unwrap_or(reserved)
            }
            _ => reserved,
        }
    }
}

/// Index of the bin holding `x`: the count of edges `<= x`.
pub fn numeric_bin(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e <= x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBinning {
    pub name: String,
    /// Column index in the source dataset.
    pub column: usize,
    pub bins: FeatureBins,
    /// Constant (or empty) on the training rows.
    pub degenerate: bool,
    pub missing_in_train: bool,
}

impl FeatureBinning {
    pub fn value_bins(&self) -> usize {
        self.bins.value_bins()
    }

    /// Value bins plus the reserved missing/unknown bin.
    pub fn n_bins(&self) -> usize {
        self.value_bins() + 1
    }

    pub fn reserved_bin(&self) -> usize {
        self.value_bins()
    }

    pub fn bin_of(&self, value: Value<'_>) -> usize {
        self.bins.bin_of(value)
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.bins, FeatureBins::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub max_bins: usize,
    pub features: Vec<FeatureBinning>,
}

impl BinningSpec {
    pub fn feature(&self, name: &str) -> Option<&FeatureBinning> {
        self.features.iter().find(|f| f.name == name)
    }

    /// Short content hash, embedded in model files.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("binning spec serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    pub fn with_encoding(mut self, encoding: CategoricalEncoding) -> Self {
        for f in &mut self.features {
            if let FeatureBins::Categorical { encoding: e, .. } = &mut f.bins {
                *e = encoding;
            }
        }
        self
    }
}

/// Fit equal-frequency bins on `train_rows`. Features with at most
/// `max_bins` distinct values get one bin per value.
pub fn fit_binning(ds: &RawDataset, train_rows: &[usize], max_bins: usize) -> Result<BinningSpec> {
    if max_bins < 2 {
        return Err(Error::Config(format!("max_bins must be >= 2, got {max_bins}")));
    }
    if max_bins > u16::MAX as usize - 1 {
        return Err(Error::Config(format!("max_bins {max_bins} too large")));
    }
    let mut features = Vec::new();
    for c in ds.feature_columns() {
        let col = &ds.columns[c];
        let missing_in_train = train_rows.iter().any(|&r| matches!(col.value(r), Value::Missing));
        let (bins, degenerate) = match &col.data {
            ColumnData::Numeric(_) => {
                let mut vals: Vec<f64> = train_rows
                    .iter()
                    .filter_map(|&r| match col.value(r) {
                        Value::Num(x) => Some(x),
                        _ => None,
                    })
                    .collect();
                vals.sort_by(f64::total_cmp);
                let edges = quantile_edges(&vals, max_bins);
                let representatives = bin_medians(&vals, &edges);
                let degenerate = vals.first() == vals.last();
                (FeatureBins::Numeric { edges, representatives }, degenerate)
            }
            ColumnData::Categorical(_) => {
                let mut categories: Vec<String> = Vec::new();
                let mut seen = std::collections::HashSet::new();
                for &r in train_rows {
                    if let Value::Cat(s) = col.value(r) {
                        if seen.insert(s) {
                            categories.push(s.to_string());
                        }
                    }
                }
                let degenerate = categories.len() <= 1;
                (
                    FeatureBins::Categorical {
                        categories,
                        encoding: CategoricalEncoding::Label,
                    },
                    degenerate,
                )
            }
        };
        features.push(FeatureBinning {
            name: col.name.clone(),
            column: c,
            bins,
            degenerate,
            missing_in_train,
        });
    }
    Ok(BinningSpec { max_bins, features })
}

fn quantile_edges(sorted: &[f64], max_bins: usize) -> Vec<f64> {
    let n = sorted.len();
    // Boundaries are indices i with sorted[i-1] < sorted[i].
    let boundaries: Vec<usize> = (1..n).filter(|&i| sorted[i - 1] < sorted[i]).collect();
    let chosen: Vec<usize> = if boundaries.len() < max_bins {
        boundaries
    } else {
        let mut picks: Vec<usize> = (1..max_bins)
            .map(|q| {
                let target = q * n / max_bins;
                let k = boundaries.partition_point(|&b| b < target);
                match (k.checked_sub(1).map(|i| boundaries[i]), boundaries.get(k)) {
                    (Some(lo), Some(&hi)) => {
                        if target - lo < hi - target {
                            lo
                        } else {
                            hi
                        }
                    }
                    (Some(lo), None) => lo,
                    (None, Some(&hi)) => hi,
                    (None, None) => unreachable!("boundaries non-empty here"),
                }
            })
            .collect();
        picks.dedup();
        picks
    };
    chosen
        .into_iter()
        .map(|i| {
            let (a, b) = (sorted[i - 1], sorted[i]);
            let mid = a + (b - a) / 2.0;
            if mid > a {
                mid
            } else {
                b
            }
        })
        .collect()
}

fn bin_medians(sorted: &[f64], edges: &[f64]) -> Vec<f64> {
    if sorted.is_empty() {
        return vec![0.0; edges.len() + 1];
    }
    let mut out = Vec::with_capacity(edges.len() + 1);
    let mut start = 0;
    for b in 0..=edges.len() {
        let end = match edges.get(b) {
            Some(&e) => sorted.partition_point(|&x| x < e),
            None => sorted.len(),
        };
        let slice = &sorted[start..end];
        let m = slice.len();
        out.push(match m {
            0 => edges.get(b).copied().unwrap_or(sorted[sorted.len() - 1]),
            _ if m % 2 == 1 => slice[m / 2],
            _ => {
                let (lo, hi) = (slice[m / 2 - 1], slice[m / 2]);
                lo + (hi - lo) / 2.0
            }
        });
        start = end;
    }
    out
}

/// Binned view of a dataset: bin indices for every row, the split, and
/// the sorted unique training values that FLAM and spline trainers use.
#[derive(Debug, Clone)]
pub struct BinnedDataset {
    pub raw: Arc<RawDataset>,
    pub spec: BinningSpec,
    pub split: SplitPlan,
    /// `bins[j][row]`, aligned with `spec.features`.
    pub bins: Vec<Vec<u16>>,
    /// Sorted unique non-missing training values per numeric feature; empty
    /// for categorical features.
    pub unique_values: Vec<Vec<f64>>,
}

/// Map every row of `raw` onto `spec`. Unseen categories and missing values
/// land in the reserved bin.
pub fn encode(raw: Arc<RawDataset>, spec: BinningSpec, split: SplitPlan) -> Result<BinnedDataset> {
    let mut bins = Vec::with_capacity(spec.features.len());
    let mut unique_values = Vec::with_capacity(spec.features.len());
    for f in &spec.features {
        let col = raw
            .columns
            .get(f.column)
            .filter(|c| c.name == f.name)
            .ok_or_else(|| Error::MissingFeature(f.name.clone()))?;
        if col.kind() != kind_of(&f.bins) {
            return Err(Error::Schema(format!("feature `{}` changed kind", f.name)));
        }
        let lookup: Option<HashMap<&str, u16>> = match &f.bins {
            FeatureBins::Categorical { categories, .. } => Some(
                categories
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.as_str(), i as u16))
                    .collect(),
            ),
            FeatureBins::Numeric { .. } => None,
        };
        let reserved = f.reserved_bin() as u16;
        let col_bins: Vec<u16> = (0..raw.n_rows())
            .map(|r| match (&lookup, col.value(r)) {
                (Some(map), Value::Cat(s)) => map.get(s).copied().unwrap_or(reserved),
                (None, v @ Value::Num(_)) => f.bin_of(v) as u16,
                _ => reserved,
            })
            .collect();
        bins.push(col_bins);

        let mut uniq: Vec<f64> = match &col.data {
            ColumnData::Numeric(_) => split
                .train
                .iter()
                .filter_map(|&r| match col.value(r) {
                    Value::Num(x) => Some(x),
                    _ => None,
                })
                .collect(),
            ColumnData::Categorical(_) => Vec::new(),
        };
        uniq.sort_by(f64::total_cmp);
        uniq.dedup();
        unique_values.push(uniq);
    }
    Ok(BinnedDataset {
        raw,
        spec,
        split,
        bins,
        unique_values,
    })
}

fn kind_of(bins: &FeatureBins) -> ColumnKind {
    match bins {
        FeatureBins::Numeric { .. } => ColumnKind::Numeric,
        FeatureBins::Categorical { .. } => ColumnKind::Categorical,
    }
}

impl BinnedDataset {
    /// Fit binning on the split's training rows and encode every row.
    pub fn prepare(raw: Arc<RawDataset>, split: SplitPlan, max_bins: usize) -> Result<Self> {
        let spec = fit_binning(&raw, &split.train, max_bins)?;
        encode(raw, spec, split)
    }

    pub fn n_features(&self) -> usize {
        self.spec.features.len()
    }

    pub fn n_rows(&self) -> usize {
        self.raw.n_rows()
    }

    pub fn labels(&self) -> &[f64] {
        &self.raw.labels
    }

    pub fn feature(&self, j: usize) -> &FeatureBinning {
        &self.spec.features[j]
    }

    pub fn column(&self, j: usize) -> &Column {
        &self.raw.columns[self.spec.features[j].column]
    }

    pub fn value(&self, j: usize, row: usize) -> Value<'_> {
        self.column(j).value(row)
    }

    /// One boolean column per known category of feature `j`, over all rows.
    /// Rows with a missing or unseen category are all-zero. Returns `None`
    /// for numeric features.
    pub fn one_hot(&self, j: usize) -> Option<Vec<Vec<bool>>> {
        let FeatureBins::Categorical { categories, .. } = &self.feature(j).bins else {
            return None;
        };
        let mut cols = vec![vec![false; self.n_rows()]; categories.len()];
        for (r, &b) in self.bins[j].iter().enumerate() {
            if let Some(col) = cols.get_mut(b as usize) {
                col[r] = true;
            }
        }
        Some(cols)
    }
}
