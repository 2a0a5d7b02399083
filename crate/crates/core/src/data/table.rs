//! Raw CSV tables and the normal-traffic filter.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, Schema};
use crate::error::{Error, Result};

/// A rectangular table of string cells with a kind per column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    pub normal_value: String,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn new(schema: &Schema, rows: Vec<Vec<String>>) -> Result<Self> {
        let width = schema.columns.len();
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("{} fields, expected {width}", rows[i].len()),
            });
        }
        Ok(Self {
            columns: schema.columns.iter().map(|c| c.name.clone()).collect(),
            kinds: schema.columns.iter().map(|c| c.kind).collect(),
            normal_value: schema.normal_value.clone(),
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn index_of_kind(&self, kind: ColumnKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    pub fn label_index(&self) -> Result<usize> {
        self.index_of_kind(ColumnKind::Label)
            .ok_or_else(|| Error::Schema("table has no label column".into()))
    }

    pub fn select_rows(&self, indices: &[usize]) -> RawTable {
        RawTable {
            columns: self.columns.clone(),
            kinds: self.kinds.clone(),
            normal_value: self.normal_value.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    fn keep_columns(&self, keep: &[usize]) -> RawTable {
        RawTable {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            kinds: keep.iter().map(|&i| self.kinds[i]).collect(),
            normal_value: self.normal_value.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| keep.iter().map(|&i| r[i].clone()).collect())
                .collect(),
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_csv(file, schema).map_err(|e| e.in_file(path))
}

/// Parse CSV text with a header row. Columns are reordered to schema order.
/// Every schema column must be present and every file column declared.
pub fn read_csv(reader: impl Read, schema: &Schema) -> Result<RawTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Parse {
            row: 0,
            message: "missing header row".into(),
        });
    }
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(Error::Schema(format!("column {h:?} appears twice in the file")));
        }
        if schema.kind_of(h).is_none() {
            return Err(Error::Schema(format!(
                "column {h:?} is not declared in the schema (use kind \"ignore\" to skip it)"
            )));
        }
    }
    let order = schema
        .columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| *h == c.name)
                .ok_or_else(|| Error::Schema(format!("declared column {:?} is missing", c.name)))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("{} fields, expected {}", record.len(), header.len()),
            });
        }
        rows.push(order.iter().map(|&j| record[j].to_owned()).collect());
    }
    RawTable::new(schema, rows)
}

/// Drop normal-traffic rows and the id, traffic-kind and ignored columns.
pub fn filter_and_drop(table: &RawTable) -> Result<RawTable> {
    let traffic = table
        .index_of_kind(ColumnKind::TrafficKind)
        .ok_or_else(|| Error::Schema("no traffic-kind column declared".into()))?;
    let attacks: Vec<usize> = (0..table.len())
        .filter(|&i| table.rows[i][traffic].trim() != table.normal_value)
        .collect();
    if attacks.is_empty() {
        return Err(Error::Data(
            "no attack rows left after removing normal traffic".into(),
        ));
    }
    let keep: Vec<usize> = (0..table.columns.len())
        .filter(|&j| table.kinds[j].is_feature() || table.kinds[j] == ColumnKind::Label)
        .collect();
    Ok(table.select_rows(&attacks).keep_columns(&keep))
}
