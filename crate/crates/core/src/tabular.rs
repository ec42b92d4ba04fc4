//! Typed tabular data: schema, rows, causal specification and group partitions.
//!
//! Cells are either numeric, a category index into the column's declared
//! category list, or an explicit [`Cell::Missing`]. Models never see the
//! typed cells directly; they consume the `f64` encoding produced by
//! [`Dataset::design`], where a category becomes its index and a missing
//! cell becomes `NaN`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
    Binary,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    /// Ordered labels; the index of a label is its encoded value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    /// Whether counterfactual search may change this feature.
    #[serde(default = "default_true")]
    pub mutable: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub unit: String,
}

impl FeatureSchema {
    pub fn numeric(name: impl Into<String>) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Numeric,
            categories: Vec::new(),
            mutable: true,
            unit: String::new(),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            mutable: true,
            unit: String::new(),
        }
    }

    /// Binary feature with labels `["0", "1"]`.
    pub fn binary(name: impl Into<String>) -> Self {
        FeatureSchema {
            name: name.into(),
            kind: FeatureKind::Binary,
            categories: vec!["0".into(), "1".into()],
            mutable: true,
            unit: String::new(),
        }
    }

    pub fn immutable(mut self) -> Self {
        self.mutable = false;
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == FeatureKind::Numeric
    }

    pub fn category_index(&self, label: &str) -> Option<usize> {
        self.categories.iter().position(|c| c == label)
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            FeatureKind::Numeric if !self.categories.is_empty() => Err(Error::InvalidSchema(
                format!("numeric feature `{}` declares categories", self.name),
            )),
            FeatureKind::Categorical | FeatureKind::Binary if self.categories.len() < 2 => {
                Err(Error::InvalidSchema(format!(
                    "feature `{}` needs at least two categories",
                    self.name
                )))
            }
            FeatureKind::Binary if self.categories.len() != 2 => Err(Error::InvalidSchema(
                format!("binary feature `{}` must have exactly two categories", self.name),
            )),
            _ => {
                let unique: HashSet<&String> = self.categories.iter().collect();
                if unique.len() != self.categories.len() {
                    return Err(Error::InvalidSchema(format!(
                        "feature `{}` repeats a category",
                        self.name
                    )));
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(u32),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Model encoding: category index for categoricals, `NaN` for missing.
    pub fn encode(&self) -> f64 {
        match *self {
            Cell::Num(v) => v,
            Cell::Cat(i) => i as f64,
            Cell::Missing => f64::NAN,
        }
    }
}

/// Immutable, row-major table. Construction validates every cell against
/// the schema.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Vec<FeatureSchema>,
    rows: Vec<Vec<Cell>>,
    outcome: String,
    index: HashMap<String, usize>,
}

impl Dataset {
    pub fn new(
        schema: Vec<FeatureSchema>,
        rows: Vec<Vec<Cell>>,
        outcome: impl Into<String>,
    ) -> Result<Self> {
        let outcome = outcome.into();
        let mut index = HashMap::with_capacity(schema.len());
        for (i, f) in schema.iter().enumerate() {
            f.validate()?;
            if index.insert(f.name.clone(), i).is_some() {
                return Err(Error::InvalidSchema(format!("duplicate feature `{}`", f.name)));
            }
        }
        if !index.contains_key(&outcome) {
            return Err(Error::InvalidSchema(format!(
                "outcome `{outcome}` is not in the schema"
            )));
        }
        if rows.is_empty() {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::InvalidDataset(format!(
                    "row {r} has {} cells, schema has {}",
                    row.len(),
                    schema.len()
                )));
            }
            for (cell, f) in row.iter().zip(&schema) {
                match (cell, f.kind) {
                    (Cell::Missing, _) => {}
                    (Cell::Num(_), FeatureKind::Numeric) => {}
                    (Cell::Cat(i), FeatureKind::Categorical | FeatureKind::Binary)
                        if (*i as usize) < f.categories.len() => {}
                    _ => {
                        return Err(Error::InvalidDataset(format!(
                            "row {r}: cell {cell:?} does not match feature `{}`",
                            f.name
                        )))
                    }
                }
            }
        }
        Ok(Dataset {
            schema,
            rows,
            outcome,
            index,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn schema(&self) -> &[FeatureSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn outcome_name(&self) -> &str {
        &self.outcome
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAttribute(name.to_string()))
    }

    pub fn feature(&self, name: &str) -> Result<&FeatureSchema> {
        Ok(&self.schema[self.column_index(name)?])
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// All columns except the outcome, in schema order.
    pub fn feature_names(&self) -> Vec<String> {
        self.schema
            .iter()
            .filter(|f| f.name != self.outcome)
            .map(|f| f.name.clone())
            .collect()
    }

    pub fn cell(&self, row: usize, column: usize) -> Cell {
        self.rows[row][column]
    }

    /// Encoded values of one column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[c].encode()).collect())
    }

    pub fn outcome_values(&self) -> Vec<f64> {
        let c = self.index[&self.outcome];
        self.rows.iter().map(|r| r[c].encode()).collect()
    }

    /// Encoded design matrix for the given columns, one `Vec` per row.
    pub fn design(&self, features: &[String]) -> Result<Vec<Vec<f64>>> {
        let cols = features
            .iter()
            .map(|f| self.column_index(f))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| cols.iter().map(|&c| r[c].encode()).collect())
            .collect())
    }

    /// Label of a categorical cell, `None` for numeric or missing cells.
    pub fn label(&self, row: usize, column: usize) -> Option<&str> {
        match self.rows[row][column] {
            Cell::Cat(i) => Some(self.schema[column].categories[i as usize].as_str()),
            _ => None,
        }
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices
            .iter()
            .map(|&i| {
                self.rows.get(i).cloned().ok_or_else(|| {
                    Error::InvalidDataset(format!("row index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(self.schema.clone(), rows, self.outcome.clone())
    }

    /// Copy with an extra column appended.
    pub fn with_column(&self, feature: FeatureSchema, cells: Vec<Cell>) -> Result<Dataset> {
        if cells.len() != self.rows.len() {
            return Err(Error::LengthMismatch {
                expected: self.rows.len(),
                found: cells.len(),
            });
        }
        let mut schema = self.schema.clone();
        schema.push(feature);
        let rows = self
            .rows
            .iter()
            .zip(cells)
            .map(|(r, c)| {
                let mut r = r.clone();
                r.push(c);
                r
            })
            .collect();
        Dataset::new(schema, rows, self.outcome.clone())
    }

    /// Copy where the mutability flag of each named feature is replaced.
    pub fn with_mutability(&self, mutable: &[String]) -> Dataset {
        let mut out = self.clone();
        for f in &mut out.schema {
            f.mutable = mutable.contains(&f.name);
        }
        out
    }

    /// Derive a categorical column by mapping the labels of an existing one.
    /// Categories of the new column are sorted; missing stays missing.
    pub fn derive_categorical(
        &self,
        source: &str,
        name: &str,
        map: impl Fn(&str) -> String,
    ) -> Result<Dataset> {
        let c = self.column_index(source)?;
        if self.schema[c].is_numeric() {
            return Err(Error::InvalidSchema(format!("`{source}` is not categorical")));
        }
        let mapped: Vec<Option<String>> = (0..self.n_rows())
            .map(|r| self.label(r, c).map(&map))
            .collect();
        let mut categories: Vec<String> = mapped.iter().flatten().cloned().collect();
        categories.sort();
        categories.dedup();
        if categories.len() < 2 {
            return Err(Error::InvalidSchema(format!(
                "derived column `{name}` has fewer than two categories"
            )));
        }
        let cells = mapped
            .iter()
            .map(|m| match m {
                Some(l) => Cell::Cat(categories.iter().position(|c| c == l).unwrap() as u32),
                None => Cell::Missing,
            })
            .collect();
        let mut feature = FeatureSchema::categorical(name, categories);
        feature.mutable = false;
        self.with_column(feature, cells)
    }

    /// Bin a numeric column at the given ascending thresholds. Bin `k`
    /// holds values in `[t_{k-1}, t_k)`; labels read `<t0`, `[t0,t1)`, `>=tn`.
    pub fn bin_numeric(&self, source: &str, name: &str, thresholds: &[f64]) -> Result<Dataset> {
        let c = self.column_index(source)?;
        if !self.schema[c].is_numeric() {
            return Err(Error::InvalidSchema(format!("`{source}` is not numeric")));
        }
        if thresholds.is_empty() || thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "bin thresholds must be nonempty and strictly ascending".into(),
            ));
        }
        let fmt = |v: f64| format!("{v}");
        let mut labels = vec![format!("<{}", fmt(thresholds[0]))];
        for w in thresholds.windows(2) {
            labels.push(format!("[{},{})", fmt(w[0]), fmt(w[1])));
        }
        labels.push(format!(">={}", fmt(*thresholds.last().unwrap())));
        let cells = self
            .rows
            .iter()
            .map(|r| match r[c] {
                Cell::Num(v) if v.is_finite() => {
                    Cell::Cat(thresholds.iter().take_while(|&&t| v >= t).count() as u32)
                }
                _ => Cell::Missing,
            })
            .collect();
        let mut feature = FeatureSchema::categorical(name, labels);
        feature.mutable = false;
        self.with_column(feature, cells)
    }

    /// Median of the non-missing values of a numeric column.
    pub fn median(&self, name: &str) -> Result<f64> {
        let mut v: Vec<f64> = self.column(name)?.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Err(Error::InvalidDataset(format!("column `{name}` has no values")));
        }
        Ok(crate::stats::median(&mut v))
    }

    /// SHA-256 over a canonical rendering of schema and cells.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.schema).expect("schema serializes"));
        h.update(self.outcome.as_bytes());
        for row in &self.rows {
            for cell in row {
                match cell {
                    Cell::Num(v) => {
                        h.update([0u8]);
                        h.update(v.to_bits().to_le_bytes());
                    }
                    Cell::Cat(i) => {
                        h.update([1u8]);
                        h.update(i.to_le_bytes());
                    }
                    Cell::Missing => h.update([2u8]),
                }
            }
        }
        crate::hex(&h.finalize())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeTransform {
    #[default]
    Identity,
    AbsResidual,
    MaxResidualPerWindow,
}

/// Names the treatment, outcome and protected attributes of an audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CausalSpec {
    pub treatment: String,
    pub outcome: String,
    #[serde(default)]
    pub protected: Vec<String>,
    #[serde(default)]
    pub outcome_transform: OutcomeTransform,
}

impl CausalSpec {
    pub fn new(
        treatment: impl Into<String>,
        outcome: impl Into<String>,
        protected: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        CausalSpec {
            treatment: treatment.into(),
            outcome: outcome.into(),
            protected: protected.into_iter().map(Into::into).collect(),
            outcome_transform: OutcomeTransform::Identity,
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.treatment == self.outcome {
            return Err(Error::InvalidCausalSpec("treatment equals outcome".into()));
        }
        if self.protected.contains(&self.outcome) {
            return Err(Error::InvalidCausalSpec("protected set contains the outcome".into()));
        }
        for name in std::iter::once(&self.treatment)
            .chain(std::iter::once(&self.outcome))
            .chain(&self.protected)
        {
            data.column_index(name)?;
        }
        Ok(())
    }

    /// Protected attributes other than the treatment itself.
    pub fn confounders(&self) -> Vec<String> {
        self.protected
            .iter()
            .filter(|p| **p != self.treatment)
            .cloned()
            .collect()
    }
}

/// Row indices grouped by the label of a categorical attribute. Groups are
/// listed in the attribute's category order and are never empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub attribute: String,
    pub groups: Vec<(String, Vec<usize>)>,
}

impl GroupPartition {
    pub fn labels(&self) -> Vec<&str> {
        self.groups.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn group_of(&self) -> BTreeMap<usize, &str> {
        self.groups
            .iter()
            .flat_map(|(l, rows)| rows.iter().map(move |&r| (r, l.as_str())))
            .collect()
    }

    pub fn covered_rows(&self) -> usize {
        self.groups.iter().map(|(_, r)| r.len()).sum()
    }
}

pub fn partition_by(data: &Dataset, attribute: &str) -> Result<GroupPartition> {
    let c = data.column_index(attribute)?;
    let feature = &data.schema()[c];
    if feature.is_numeric() {
        return Err(Error::NumericAttributeRequiresBinning(attribute.to_string()));
    }
    let mut buckets = vec![Vec::new(); feature.categories.len()];
    for (r, row) in data.rows().iter().enumerate() {
        if let Cell::Cat(i) = row[c] {
            buckets[i as usize].push(r);
        }
    }
    let groups = feature
        .categories
        .iter()
        .cloned()
        .zip(buckets)
        .filter(|(_, rows)| !rows.is_empty())
        .collect();
    Ok(GroupPartition {
        attribute: attribute.to_string(),
        groups,
    })
}

/// Map model predictions to the audited outcome.
///
/// `window_len` is required for [`OutcomeTransform::MaxResidualPerWindow`]:
/// predictions and truth are consecutive windows of that many steps.
pub fn apply_transform(
    predictions: &[f64],
    truth: Option<&[f64]>,
    transform: OutcomeTransform,
    window_len: Option<usize>,
) -> Result<Vec<f64>> {
    if transform == OutcomeTransform::Identity {
        return Ok(predictions.to_vec());
    }
    let truth = truth.ok_or(Error::LengthMismatch {
        expected: predictions.len(),
        found: 0,
    })?;
    if truth.len() != predictions.len() {
        return Err(Error::LengthMismatch {
            expected: predictions.len(),
            found: truth.len(),
        });
    }
    let residuals: Vec<f64> = predictions
        .iter()
        .zip(truth)
        .map(|(p, y)| (p - y).abs())
        .collect();
    match transform {
        OutcomeTransform::AbsResidual => Ok(residuals),
        OutcomeTransform::MaxResidualPerWindow => {
            let w = window_len.filter(|&w| w > 0).ok_or(Error::MissingWindowMetadata)?;
            if residuals.len() % w != 0 {
                return Err(Error::LengthMismatch {
                    expected: residuals.len().div_ceil(w) * w,
                    found: residuals.len(),
                });
            }
            Ok(residuals
                .chunks(w)
                .map(|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                .collect())
        }
        OutcomeTransform::Identity => unreachable!(),
    }
}
