use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Text(String),
    Number(f64),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Text,
    Numeric,
}

/// One column of a record source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    /// Scale for the numeric closeness channel; ignored for text.
    #[serde(default = "default_range")]
    pub range: f64,
}

fn default_range() -> f64 {
    1.0
}

impl AttributeSpec {
    pub fn text(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Text,
            range: default_range(),
        }
    }

    pub fn numeric(name: impl Into<String>, range: f64) -> Self {
        Self {
            name: name.into(),
            kind: AttributeKind::Numeric,
            range,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<AttributeSpec>,
}

impl Schema {
    pub fn new(attributes: Vec<AttributeSpec>) -> Result<Self> {
        let mut seen = HashSet::new();
        for attr in &attributes {
            if attr.name == "id" {
                return Err(Error::Schema("attribute name `id` is reserved".into()));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate attribute `{}`",
                    attr.name
                )));
            }
            if attr.kind == AttributeKind::Numeric && !(attr.range.is_finite() && attr.range > 0.0)
            {
                return Err(Error::Schema(format!(
                    "numeric attribute `{}` needs a positive range",
                    attr.name
                )));
            }
        }
        Ok(Self { attributes })
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub attributes: Vec<(String, Value)>,
}

impl Record {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.attributes
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
    }

    /// Checks that the record carries exactly the schema's attributes, in order, with
    /// value types matching each attribute kind.
    pub fn conforms_to(&self, schema: &Schema) -> Result<()> {
        if self.attributes.len() != schema.attributes.len() {
            return Err(Error::Schema(format!(
                "record `{}` has {} attributes, schema declares {}",
                self.id,
                self.attributes.len(),
                schema.attributes.len()
            )));
        }
        for ((name, value), spec) in self.attributes.iter().zip(&schema.attributes) {
            if name != &spec.name {
                return Err(Error::Schema(format!(
                    "record `{}`: expected attribute `{}`, found `{}`",
                    self.id, spec.name, name
                )));
            }
            let ok = match (spec.kind, value) {
                (_, Value::Missing) => true,
                (AttributeKind::Text, Value::Text(_)) => true,
                (AttributeKind::Numeric, Value::Number(n)) => n.is_finite(),
                _ => false,
            };
            if !ok {
                return Err(Error::Schema(format!(
                    "record `{}`: attribute `{}` holds a value of the wrong kind",
                    self.id, name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Equivalent,
    Inequivalent,
    Unknown,
}

impl Label {
    pub fn from_bool(equivalent: bool) -> Self {
        if equivalent {
            Label::Equivalent
        } else {
            Label::Inequivalent
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Label::Equivalent => Some(true),
            Label::Inequivalent => Some(false),
            Label::Unknown => None,
        }
    }
}

/// A candidate pair, referring to records by id.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecordPair {
    pub left: String,
    pub right: String,
    pub label: Label,
}

impl RecordPair {
    pub fn new(left: impl Into<String>, right: impl Into<String>, label: Label) -> Self {
        Self {
            left: left.into(),
            right: right.into(),
            label,
        }
    }

    pub fn id(&self) -> String {
        pair_id(&self.left, &self.right)
    }
}

pub fn pair_id(left: &str, right: &str) -> String {
    format!("{left}|{right}")
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

/// Reads a comma-delimited record file whose header is `id` plus the schema's attributes.
///
/// Header columns may appear in any order. Blank cells become [`Value::Missing`].
pub fn load_records(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<Record>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();

    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::Schema(format!("{}: header has no `id` column", path.display())))?;
    let mut columns = Vec::with_capacity(schema.attributes.len());
    for attr in &schema.attributes {
        let col = headers.iter().position(|h| h == attr.name).ok_or_else(|| {
            Error::Schema(format!(
                "{}: header lacks attribute `{}`",
                path.display(),
                attr.name
            ))
        })?;
        columns.push(col);
    }
    if headers.len() != schema.attributes.len() + 1 {
        return Err(Error::Schema(format!(
            "{}: header has {} columns, schema expects {}",
            path.display(),
            headers.len(),
            schema.attributes.len() + 1
        )));
    }

    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let id = row[id_col].trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "empty id".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(Error::Integrity(format!(
                "{}: duplicate id `{id}` at line {line}",
                path.display()
            )));
        }
        let mut attributes = Vec::with_capacity(columns.len());
        for (attr, &col) in schema.attributes.iter().zip(&columns) {
            let cell = row[col].trim();
            let value = if cell.is_empty() {
                Value::Missing
            } else {
                match attr.kind {
                    AttributeKind::Text => Value::Text(cell.to_string()),
                    AttributeKind::Numeric => match cell.parse::<f64>() {
                        Ok(n) if n.is_finite() => Value::Number(n),
                        _ => {
                            return Err(Error::Parse {
                                path: path.to_path_buf(),
                                line,
                                message: format!("`{cell}` is not a number ({})", attr.name),
                            })
                        }
                    },
                }
            };
            attributes.push((attr.name.clone(), value));
        }
        records.push(Record { id, attributes });
    }
    Ok(records)
}

pub fn write_records(path: impl AsRef<Path>, schema: &Schema, records: &[Record]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["id".to_string()];
    header.extend(schema.attributes.iter().map(|a| a.name.clone()));
    writer
        .write_record(&header)
        .map_err(|e| csv_error(path, e))?;
    for record in records {
        record.conforms_to(schema)?;
        let mut row = vec![record.id.clone()];
        row.extend(record.attributes.iter().map(|(_, v)| match v {
            Value::Text(s) => s.clone(),
            Value::Number(n) => n.to_string(),
            Value::Missing => String::new(),
        }));
        writer.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Reads a `left_id,right_id,label` file; label is `1`, `0`, or blank for unknown.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<RecordPair>> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["left_id", "right_id", "label"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Schema(format!(
            "{}: pairs header must be `left_id,right_id,label`",
            path.display()
        )));
    }
    let mut pairs = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let label = match row[2].trim() {
            "1" => Label::Equivalent,
            "0" => Label::Inequivalent,
            "" => Label::Unknown,
            other => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("label `{other}` is not 1 or 0"),
                })
            }
        };
        pairs.push(RecordPair::new(row[0].trim(), row[1].trim(), label));
    }
    Ok(pairs)
}

pub fn write_pairs(path: impl AsRef<Path>, pairs: &[RecordPair]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(["left_id", "right_id", "label"])
        .map_err(|e| csv_error(path, e))?;
    for pair in pairs {
        let label = match pair.label {
            Label::Equivalent => "1",
            Label::Inequivalent => "0",
            Label::Unknown => "",
        };
        writer
            .write_record([pair.left.as_str(), pair.right.as_str(), label])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
