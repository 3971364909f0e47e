//! The additive model shared by every trainer and metric: an intercept plus
//! one shape function per feature, all in log-odds units.

use serde::{Deserialize, Serialize};

use crate::data::{numeric_bin, BinningSpec, FeatureBins, RawDataset, Value};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Bin geometry carried by a piecewise-constant shape.
#[derive(Debug, Clone, PartialEq)]
pub enum BinLayout {
    Numeric { edges: Vec<f64> },
    Categorical { categories: Vec<String> },
}

impl BinLayout {
    pub fn value_bins(&self) -> usize {
        match self {
            BinLayout::Numeric { edges } => edges.len() + 1,
            BinLayout::Categorical { categories } => categories.len(),
        }
    }

    pub fn bin_of(&self, value: Value<'_>) -> usize {
        match (self, value) {
            (BinLayout::Numeric { edges }, Value::Num(x)) => numeric_bin(edges, x),
            (BinLayout::Categorical { categories }, Value::Cat(s)) => {
                categories.iter().position(|c| c == s).unwrap_or(categories.len())
            }
            _ => self.value_bins(),
        }
    }

    pub fn from_bins(bins: &FeatureBins) -> Self {
        match bins {
            FeatureBins::Numeric { edges, .. } => BinLayout::Numeric { edges: edges.clone() },
            FeatureBins::Categorical { categories, .. } => BinLayout::Categorical {
                categories: categories.clone(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShapeFunction {
    /// One value per bin; the last value belongs to the reserved
    /// missing/unknown bin.
    Binned { layout: BinLayout, values: Vec<f64> },
    /// Linear interpolation between knots, flat beyond the end knots.
    Curve { knots: Vec<(f64, f64)>, missing: f64 },
}

impl ShapeFunction {
    pub fn zeros(layout: BinLayout) -> Self {
        let n = layout.value_bins() + 1;
        ShapeFunction::Binned {
            layout,
            values: vec![0.0; n],
        }
    }

    pub fn eval(&self, value: Value<'_>) -> f64 {
        match self {
            ShapeFunction::Binned { layout, values } => values[layout.bin_of(value)],
            ShapeFunction::Curve { knots, missing } => match value {
                Value::Num(x) => interpolate(knots, x),
                _ => *missing,
            },
        }
    }

    fn shift(&mut self, delta: f64) {
        match self {
            ShapeFunction::Binned { values, .. } => values.iter_mut().for_each(|v| *v += delta),
            ShapeFunction::Curve { knots, missing } => {
                knots.iter_mut().for_each(|k| k.1 += delta);
                *missing += delta;
            }
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let bad = |msg: &str| Err(Error::MalformedModel(format!("feature `{name}`: {msg}")));
        match self {
            ShapeFunction::Binned { layout, values } => {
                if values.len() != layout.value_bins() + 1 {
                    return bad("value count does not match bin count");
                }
                if let BinLayout::Numeric { edges } = layout {
                    if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
                        return bad("bin edges not strictly increasing");
                    }
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return bad("non-finite value");
                }
            }
            ShapeFunction::Curve { knots, missing } => {
                if knots.is_empty() {
                    return bad("curve without knots");
                }
                if knots.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return bad("knots not strictly increasing");
                }
                if knots.iter().any(|k| !k.0.is_finite() || !k.1.is_finite()) || !missing.is_finite() {
                    return bad("non-finite knot");
                }
            }
        }
        Ok(())
    }
}

fn interpolate(knots: &[(f64, f64)], x: f64) -> f64 {
    let k = knots.partition_point(|&(kx, _)| kx <= x);
    if k == 0 {
        return knots[0].1;
    }
    if k == knots.len() {
        return knots[k - 1].1;
    }
    let (x0, y0) = knots[k - 1];
    let (x1, y1) = knots[k];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureShape {
    pub name: String,
    pub shape: ShapeFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveModel {
    pub algorithm: String,
    pub seed: u64,
    pub intercept: f64,
    pub features: Vec<FeatureShape>,
    pub config_digest: String,
    pub binning_digest: String,
}

pub fn logistic(score: f64) -> f64 {
    if score >= 0.0 {
        1.0 / (1.0 + (-score).exp())
    } else {
        let e = score.exp();
        e / (1.0 + e)
    }
}

impl AdditiveModel {
    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.features.iter().map(|f| f.name.as_str()).collect()
    }

    /// Intercept plus the sum of shapes. `row` is aligned with
    /// `self.features`.
    pub fn predict_score(&self, row: &[Value<'_>]) -> Result<f64> {
        if row.len() != self.features.len() {
            return Err(Error::MissingFeature(format!(
                "row has {} values, model has {} features",
                row.len(),
                self.features.len()
            )));
        }
        Ok(self
            .features
            .iter()
            .zip(row)
            .fold(self.intercept, |acc, (f, v)| acc + f.shape.eval(*v)))
    }

    pub fn predict_proba(&self, row: &[Value<'_>]) -> Result<f64> {
        self.predict_score(row).map(logistic)
    }

    pub fn shape_value(&self, feature: usize, value: Value<'_>) -> f64 {
        self.features[feature].shape.eval(value)
    }

    /// Column index in `data` for each model feature.
    pub fn bind(&self, data: &RawDataset) -> Result<Vec<usize>> {
        self.features
            .iter()
            .map(|f| {
                data.column_index(&f.name)
                    .ok_or_else(|| Error::MissingFeature(f.name.clone()))
            })
            .collect()
    }

    /// Log-odds scores for `rows` of `data`, resolving features by name.
    pub fn scores(&self, data: &RawDataset, rows: &[usize]) -> Result<Vec<f64>> {
        let cols = self.bind(data)?;
        let mut out = vec![self.intercept; rows.len()];
        for (f, &c) in self.features.iter().zip(&cols) {
            let col = &data.columns[c];
            for (o, &r) in out.iter_mut().zip(rows) {
                *o += f.shape.eval(col.value(r));
            }
        }
        Ok(out)
    }

    pub fn probabilities(&self, data: &RawDataset, rows: &[usize]) -> Result<Vec<f64>> {
        Ok(self.scores(data, rows)?.into_iter().map(logistic).collect())
    }

    /// Shift every shape to have mean zero over `rows` of `data`, moving the
    /// mass into the intercept. Scores are unchanged.
    pub fn center(&self, data: &RawDataset, rows: &[usize]) -> Result<AdditiveModel> {
        let cols = self.bind(data)?;
        let mut out = self.clone();
        if rows.is_empty() {
            return Ok(out);
        }
        for (f, &c) in out.features.iter_mut().zip(&cols) {
            let col = &data.columns[c];
            let mean = rows.iter().map(|&r| f.shape.eval(col.value(r))).sum::<f64>() / rows.len() as f64;
            f.shape.shift(-mean);
            out.intercept += mean;
        }
        Ok(out)
    }

    /// Project every shape onto the bins of `spec`, evaluating at each bin's
    /// representative point (the reserved bin takes the model's missing
    /// value).
    pub fn discretize(&self, spec: &BinningSpec) -> Result<AdditiveModel> {
        let mut out = self.clone();
        for f in out.features.iter_mut() {
            let fb = spec
                .feature(&f.name)
                .ok_or_else(|| Error::MissingFeature(f.name.clone()))?;
            let mut values: Vec<f64> = match &fb.bins {
                FeatureBins::Numeric { representatives, .. } => {
                    representatives.iter().map(|&x| f.shape.eval(Value::Num(x))).collect()
                }
                FeatureBins::Categorical { categories, .. } => {
                    categories.iter().map(|c| f.shape.eval(Value::Cat(c))).collect()
                }
            };
            values.push(f.shape.eval(Value::Missing));
            f.shape = ShapeFunction::Binned {
                layout: BinLayout::from_bins(&fb.bins),
                values,
            };
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.intercept.is_finite() {
            return Err(Error::MalformedModel("non-finite intercept".into()));
        }
        for f in &self.features {
            f.shape.validate(&f.name)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<AdditiveModel> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != FORMAT_VERSION {
            return Err(Error::UnknownVersion(probe.version));
        }
        let file: ModelFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<AdditiveModel> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    algorithm: String,
    #[serde(default)]
    seed: u64,
    intercept: f64,
    features: Vec<FeatureFile>,
    #[serde(default)]
    config_digest: String,
    #[serde(default)]
    binning_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureFile {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bin_edges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    knots: Option<Vec<f64>>,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    missing_value: Option<f64>,
}

impl From<&AdditiveModel> for ModelFile {
    fn from(m: &AdditiveModel) -> Self {
        let features = m
            .features
            .iter()
            .map(|f| match &f.shape {
                ShapeFunction::Binned { layout, values } => match layout {
                    BinLayout::Numeric { edges } => FeatureFile {
                        name: f.name.clone(),
                        kind: "numeric".into(),
                        bin_edges: Some(edges.clone()),
                        categories: None,
                        knots: None,
                        values: values.clone(),
                        missing_value: None,
                    },
                    BinLayout::Categorical { categories } => FeatureFile {
                        name: f.name.clone(),
                        kind: "categorical".into(),
                        bin_edges: None,
                        categories: Some(categories.clone()),
                        knots: None,
                        values: values.clone(),
                        missing_value: None,
                    },
                },
                ShapeFunction::Curve { knots, missing } => FeatureFile {
                    name: f.name.clone(),
                    kind: "numeric".into(),
                    bin_edges: None,
                    categories: None,
                    knots: Some(knots.iter().map(|k| k.0).collect()),
                    values: knots.iter().map(|k| k.1).collect(),
                    missing_value: Some(*missing),
                },
            })
            .collect();
        ModelFile {
            version: FORMAT_VERSION,
            algorithm: m.algorithm.clone(),
            seed: m.seed,
            intercept: m.intercept,
            features,
            config_digest: m.config_digest.clone(),
            binning_digest: m.binning_digest.clone(),
        }
    }
}

impl TryFrom<ModelFile> for AdditiveModel {
    type Error = Error;

    fn try_from(file: ModelFile) -> Result<Self> {
        let features = file
            .features
            .into_iter()
            .map(|f| {
                let shape = match (f.kind.as_str(), f.bin_edges, f.categories, f.knots) {
                    ("numeric", Some(edges), None, None) => ShapeFunction::Binned {
                        layout: BinLayout::Numeric { edges },
                        values: f.values,
                    },
                    ("categorical", None, Some(categories), None) => ShapeFunction::Binned {
                        layout: BinLayout::Categorical { categories },
                        values: f.values,
                    },
                    ("numeric", None, None, Some(xs)) => {
                        if xs.len() != f.values.len() {
                            return Err(Error::MalformedModel(format!(
                                "feature `{}`: {} knots but {} values",
                                f.name,
                                xs.len(),
                                f.values.len()
                            )));
                        }
                        ShapeFunction::Curve {
                            knots: xs.into_iter().zip(f.values).collect(),
                            missing: f.missing_value.unwrap_or(0.0),
                        }
                    }
                    (kind, ..) => {
                        return Err(Error::MalformedModel(format!(
                            "feature `{}`: kind `{kind}` needs exactly one of bin_edges, categories or knots",
                            f.name
                        )))
                    }
                };
                Ok(FeatureShape { name: f.name, shape })
            })
            .collect::<Result<Vec<_>>>()?;
        let model = AdditiveModel {
            algorithm: file.algorithm,
            seed: file.seed,
            intercept: file.intercept,
            features,
            config_digest: file.config_digest,
            binning_digest: file.binning_digest,
        };
        model.validate()?;
        Ok(model)
    }
}
