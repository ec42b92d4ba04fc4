//! CSV ingestion with a JSON schema sidecar, and the German Credit loader.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tabular::{Cell, Dataset, FeatureKind, FeatureSchema};

/// Sidecar describing the columns of a CSV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemaDescriptor {
    pub outcome: String,
    pub columns: Vec<FeatureSchema>,
}

impl SchemaDescriptor {
    pub fn of(data: &Dataset) -> Self {
        SchemaDescriptor {
            outcome: data.outcome_name().to_string(),
            columns: data.schema().to_vec(),
        }
    }
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s == "NaN"
}

/// Parse a headed CSV whose header lists exactly the descriptor's columns,
/// in order. Empty cells and the literal `NaN` become [`Cell::Missing`].
pub fn load_csv<R: Read>(source: R, descriptor: &SchemaDescriptor) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Io(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let expected: Vec<&str> = descriptor.columns.iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(Error::SchemaMismatch(format!(
            "header {header:?} does not match schema {expected:?}"
        )));
    }
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => Error::SchemaMismatch(format!("row {r}: {e}")),
            _ => Error::Io(e.to_string()),
        })?;
        let mut row = Vec::with_capacity(descriptor.columns.len());
        for (raw, col) in record.iter().zip(&descriptor.columns) {
            let raw = raw.trim();
            let cell = if is_missing_token(raw) {
                Cell::Missing
            } else {
                match col.kind {
                    FeatureKind::Numeric => Cell::Num(raw.parse::<f64>().map_err(|_| Error::Parse {
                        row: r,
                        column: col.name.clone(),
                        message: format!("`{raw}` is not a number"),
                    })?),
                    FeatureKind::Categorical | FeatureKind::Binary => {
                        let i = col.category_index(raw).ok_or_else(|| Error::Parse {
                            row: r,
                            column: col.name.clone(),
                            message: format!("`{raw}` is not a declared category"),
                        })?;
                        Cell::Cat(i as u32)
                    }
                }
            };
            row.push(cell);
        }
        rows.push(row);
    }
    Dataset::new(descriptor.columns.clone(), rows, descriptor.outcome.clone())
}

/// Inverse of [`load_csv`]. Numbers use the shortest round-trip rendering.
pub fn write_csv<W: Write>(data: &Dataset, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(data.schema().iter().map(|f| f.name.as_str())).map_err(io)?;
    for row in data.rows() {
        let fields: Vec<String> = row
            .iter()
            .zip(data.schema())
            .map(|(cell, f)| match cell {
                Cell::Num(v) => format!("{v}"),
                Cell::Cat(i) => f.categories[*i as usize].clone(),
                Cell::Missing => String::new(),
            })
            .collect();
        w.write_record(&fields).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub const GERMAN_CREDIT_SHA256: &str = "b21f3d81db8071257d5ff1deaeba1fd4303b62712e6fcc9715c7a86202cb5871";
pub const GERMAN_CREDIT_URL: &str =
    "http://archive.ics.uci.edu/ml/machine-learning-databases/statlog/german/german.data";

static GERMAN_CREDIT_RAW: &[u8] = include_bytes!("../data/german.data");

pub const GC_OUTCOME: &str = "Cost Matrix(Risk)";
pub const GC_AGE: &str = "Age in years";
pub const GC_DURATION: &str = "Duration in month";
pub const GC_CREDIT: &str = "Credit amount";
pub const GC_STATUS_SEX: &str = "Personal status and sex";
pub const GC_CHECKING: &str = "Status of existing checking account";
/// Derived columns added by [`german_credit_audit_frame`].
pub const GC_SEX: &str = "Sex";
pub const GC_AGE_GROUP: &str = "Age group";

pub const GERMAN_CREDIT_COLUMNS: [&str; 21] = [
    GC_CHECKING,
    GC_DURATION,
    "Credit history",
    "Purpose",
    GC_CREDIT,
    "Savings account/bonds",
    "Present employment since",
    "Installment rate in percentage of disposable income",
    GC_STATUS_SEX,
    "Other debtors / guarantors",
    "Present residence since",
    "Property",
    GC_AGE,
    "Other installment plans",
    "Housing",
    "Number of existing credits at this bank",
    "Job",
    "Number of people being liable to provide maintenance for",
    "Telephone",
    "foreign worker",
    GC_OUTCOME,
];

const NUMERIC_COLUMNS: [&str; 3] = [GC_AGE, GC_DURATION, GC_CREDIT];

/// Code → decoded label, per column, for the thirteen coded columns and the
/// outcome. Columns absent here (integer-valued) keep their raw token.
pub fn german_credit_codebook(column: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match column {
        GC_CHECKING => &[
            ("A14", "no checking account"),
            ("A11", "<0 DM"),
            ("A12", "0 <= <200 DM"),
            ("A13", ">= 200 DM"),
        ],
        "Credit history" => &[
            ("A34", "critical account"),
            ("A33", "delay in paying off"),
            ("A32", "existing credits paid back duly till now"),
            ("A31", "all credits at this bank paid back duly"),
            ("A30", "no credits taken"),
        ],
        "Purpose" => &[
            ("A40", "car (new)"),
            ("A41", "car (used)"),
            ("A42", "furniture/equipment"),
            ("A43", "radio/television"),
            ("A44", "domestic appliances"),
            ("A45", "repairs"),
            ("A46", "education"),
            ("A47", "vacation"),
            ("A48", "retraining"),
            ("A49", "business"),
            ("A410", "others"),
        ],
        "Savings account/bonds" => &[
            ("A65", "no savings account"),
            ("A61", "<100 DM"),
            ("A62", "100 <= <500 DM"),
            ("A63", "500 <= <1000 DM"),
            ("A64", ">= 1000 DM"),
        ],
        "Present employment since" => &[
            ("A75", ">=7 years"),
            ("A74", "4<= <7 years"),
            ("A73", "1<= < 4 years"),
            ("A72", "<1 years"),
            ("A71", "unemployed"),
        ],
        GC_STATUS_SEX => &[
            ("A95", "female:single"),
            ("A94", "male:married/widowed"),
            ("A93", "male:single"),
            ("A92", "female:divorced/separated/married"),
            ("A91", "male:divorced/separated"),
        ],
        "Other debtors / guarantors" => &[
            ("A101", "none"),
            ("A102", "co-applicant"),
            ("A103", "guarantor"),
        ],
        "Property" => &[
            ("A121", "real estate"),
            ("A122", "savings agreement/life insurance"),
            ("A123", "car or other"),
            ("A124", "unknown / no property"),
        ],
        "Other installment plans" => &[("A143", "none"), ("A142", "store"), ("A141", "bank")],
        "Housing" => &[("A153", "for free"), ("A152", "own"), ("A151", "rent")],
        "Job" => &[
            ("A174", "management/ highly qualified employee"),
            ("A173", "skilled employee / official"),
            ("A172", "unskilled - resident"),
            ("A171", "unemployed/ unskilled - non-resident"),
        ],
        "Telephone" => &[("A192", "yes"), ("A191", "none")],
        "foreign worker" => &[("A201", "yes"), ("A202", "no")],
        GC_OUTCOME => &[("1", "Good Risk"), ("2", "Bad Risk")],
        _ => return None,
    })
}

/// One code of a label-encoded column.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodebookEntry {
    pub raw_code: String,
    pub decoded: String,
    /// Integer assigned by alphabetical label encoding.
    pub label: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnCodes {
    pub column: String,
    pub entries: Vec<CodebookEntry>,
}

#[derive(Clone, Debug)]
pub struct GermanCredit {
    pub dataset: Dataset,
    /// Code → label maps for every label-encoded column, in column order.
    pub codes: Vec<ColumnCodes>,
}

/// Load the space-separated 21-column raw file. Coded columns are decoded,
/// then every non-numeric column is label-encoded alphabetically over the
/// decoded strings observed in the file. The outcome becomes binary with
/// `Good Risk = 1`.
pub fn load_german_credit<R: Read>(mut source: R) -> Result<GermanCredit> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let raw: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().collect())
        .collect();
    if raw.is_empty() {
        return Err(Error::SchemaMismatch("empty German Credit file".into()));
    }
    if let Some((r, row)) = raw.iter().enumerate().find(|(_, row)| row.len() != 21) {
        return Err(Error::SchemaMismatch(format!("row {r} has {} columns, expected 21", row.len())));
    }

    let mut schema = Vec::with_capacity(21);
    let mut columns: Vec<Vec<Cell>> = Vec::with_capacity(21);
    let mut codes = Vec::new();
    for (c, &name) in GERMAN_CREDIT_COLUMNS.iter().enumerate() {
        if NUMERIC_COLUMNS.contains(&name) {
            let cells = raw
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    row[c].parse::<f64>().map(Cell::Num).map_err(|_| Error::Parse {
                        row: r,
                        column: name.to_string(),
                        message: format!("`{}` is not a number", row[c]),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let unit = match name {
                GC_AGE => "years",
                GC_DURATION => "months",
                _ => "DM",
            };
            schema.push(FeatureSchema::numeric(name).with_unit(unit));
            columns.push(cells);
            continue;
        }
        let book = german_credit_codebook(name);
        let mut decoded = Vec::with_capacity(raw.len());
        for row in &raw {
            let code = row[c];
            let label = match book {
                Some(book) => book
                    .iter()
                    .find(|(k, _)| *k == code)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::UnknownCode {
                        column: name.to_string(),
                        code: code.to_string(),
                    })?,
                None => code,
            };
            decoded.push((code, label));
        }
        let mut categories: Vec<&str> = decoded.iter().map(|(_, l)| *l).collect();
        categories.sort_unstable();
        categories.dedup();
        let index = |l: &str| categories.iter().position(|c| *c == l).unwrap() as u32;
        let cells = decoded.iter().map(|(_, l)| Cell::Cat(index(l))).collect();
        let mut entries: Vec<CodebookEntry> = decoded
            .iter()
            .map(|(code, l)| CodebookEntry {
                raw_code: code.to_string(),
                decoded: l.to_string(),
                label: index(l),
            })
            .collect();
        entries.sort_by(|a, b| a.label.cmp(&b.label));
        entries.dedup();
        codes.push(ColumnCodes {
            column: name.to_string(),
            entries,
        });
        let feature = if name == GC_OUTCOME {
            if categories.len() != 2 {
                return Err(Error::DegenerateOutcome(name.to_string()));
            }
            FeatureSchema {
                kind: FeatureKind::Binary,
                ..FeatureSchema::categorical(name, categories.iter().copied())
            }
        } else if categories.len() < 2 {
            return Err(Error::SchemaMismatch(format!("column `{name}` has a single value")));
        } else {
            FeatureSchema::categorical(name, categories.iter().copied())
        };
        schema.push(feature);
        columns.push(cells);
    }
    for f in &mut schema {
        if [GC_AGE, GC_STATUS_SEX, "foreign worker"].contains(&f.name.as_str()) {
            f.mutable = false;
        }
    }
    let rows = (0..raw.len())
        .map(|r| columns.iter().map(|col| col[r]).collect())
        .collect();
    Ok(GermanCredit {
        dataset: Dataset::new(schema, rows, GC_OUTCOME)?,
        codes,
    })
}

/// The bundled copy of the UCI raw file.
pub fn german_credit_raw() -> &'static [u8] {
    GERMAN_CREDIT_RAW
}

pub fn german_credit() -> Result<GermanCredit> {
    load_german_credit(GERMAN_CREDIT_RAW)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    crate::hex(&Sha256::digest(bytes))
}

/// Download the raw file and verify it against the pinned checksum.
pub fn fetch_german_credit(url: &str) -> Result<Vec<u8>> {
    let mut resp = ureq::get(url)
        .call()
        .map_err(|e| Error::EndpointUnreachable(e.to_string()))?;
    let bytes = resp
        .body_mut()
        .read_to_vec()
        .map_err(|e| Error::Io(e.to_string()))?;
    let actual = sha256_hex(&bytes);
    if actual != GERMAN_CREDIT_SHA256 {
        return Err(Error::ChecksumMismatch {
            expected: GERMAN_CREDIT_SHA256.into(),
            actual,
        });
    }
    Ok(bytes)
}

/// German Credit plus the two derived protected columns used by the
/// audits: `Sex` (prefix of the personal-status label before `:`) and
/// `Age group` (split at `age_threshold`, the median age by default).
pub fn german_credit_audit_frame(age_threshold: Option<f64>) -> Result<Dataset> {
    audit_frame(&german_credit()?.dataset, age_threshold)
}

pub fn audit_frame(data: &Dataset, age_threshold: Option<f64>) -> Result<Dataset> {
    let threshold = match age_threshold {
        Some(t) => t,
        None => data.median(GC_AGE)?,
    };
    data.derive_categorical(GC_STATUS_SEX, GC_SEX, |l| {
        l.split(':').next().unwrap_or(l).to_string()
    })?
    .bin_numeric(GC_AGE, GC_AGE_GROUP, &[threshold])
}
