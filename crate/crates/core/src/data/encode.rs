//! Categorical encoding and standardization, fit on the training split.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::schema::ColumnKind;
use super::table::RawTable;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Sorted vocabulary of one categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalMap {
    pub column: String,
    pub vocabulary: Vec<String>,
}

impl CategoricalMap {
    pub fn fit<'a>(column: &str, values: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = values.into_iter().map(str::trim).collect();
        Self {
            column: column.to_owned(),
            vocabulary: set.into_iter().map(str::to_owned).collect(),
        }
    }

    /// Code of `value`; unseen values get the reserved code `vocabulary.len()`.
    pub fn encode(&self, value: &str) -> usize {
        let value = value.trim();
        self.vocabulary
            .binary_search_by(|v| v.as_str().cmp(value))
            .unwrap_or(self.vocabulary.len())
    }

    pub fn decode(&self, code: usize) -> Option<&str> {
        self.vocabulary.get(code).map(String::as_str)
    }
}

/// Ordinal codes for every categorical column.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelEncoder {
    pub columns: Vec<CategoricalMap>,
}

impl LabelEncoder {
    pub fn fit(table: &RawTable) -> Self {
        let columns = (0..table.columns.len())
            .filter(|&j| table.kinds[j] == ColumnKind::Categorical)
            .map(|j| {
                CategoricalMap::fit(&table.columns[j], table.rows.iter().map(|r| r[j].as_str()))
            })
            .collect();
        Self { columns }
    }

    pub fn column(&self, name: &str) -> Option<&CategoricalMap> {
        self.columns.iter().find(|c| c.column == name)
    }
}

/// Per-column standardization with population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardScaler {
    pub fn fit(columns: Vec<String>, x: &Tensor) -> Result<Self> {
        let &[n, f] = x.shape() else {
            return Err(Error::Data("scaler expects a 2-D matrix".into()));
        };
        if columns.len() != f {
            return Err(Error::Data(format!("{f} columns but {} names", columns.len())));
        }
        let mut mean = vec![0.0; f];
        for row in x.data().chunks(f) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; f];
        for row in x.data().chunks(f) {
            for j in 0..f {
                let d = row[j] - mean[j];
                var[j] += d * d;
            }
        }
        let std = var.into_iter().map(|v| (v / n as f64).sqrt()).collect();
        Ok(Self { columns, mean, std })
    }

    /// `(x - mean) / std`; zero-variance columns become 0.
    pub fn transform(&self, x: &Tensor) -> Result<Tensor> {
        let f = self.mean.len();
        if x.ndim() != 2 || x.shape()[1] != f {
            return Err(Error::Data(format!(
                "scaler fit on {f} columns, got shape {:?}",
                x.shape()
            )));
        }
        let data = x
            .data()
            .chunks(f)
            .flat_map(|row| {
                row.iter().enumerate().map(|(j, &v)| {
                    if self.std[j] > 0.0 {
                        (v - self.mean[j]) / self.std[j]
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        Tensor::new(x.shape().to_vec(), data)
    }
}

fn parse_numeric(cell: &str) -> Option<f64> {
    let s = cell.trim();
    let v = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16).ok()? as f64,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

/// Turn the feature columns of a filtered table into a raw (unscaled) matrix.
fn raw_features(table: &RawTable, encoder: &LabelEncoder) -> Result<(Tensor, Vec<String>)> {
    let feature_cols: Vec<usize> = (0..table.columns.len())
        .filter(|&j| table.kinds[j].is_feature())
        .collect();
    if feature_cols.is_empty() {
        return Err(Error::Schema("no feature columns".into()));
    }
    if table.is_empty() {
        return Err(Error::Data("empty table".into()));
    }
    let mut data = Vec::with_capacity(table.len() * feature_cols.len());
    for (i, row) in table.rows.iter().enumerate() {
        for &j in &feature_cols {
            let name = &table.columns[j];
            let v = match table.kinds[j] {
                ColumnKind::Categorical => {
                    let map = encoder.column(name).ok_or_else(|| {
                        Error::Data(format!("encoder has no column {name:?}"))
                    })?;
                    map.encode(&row[j]) as f64
                }
                _ => parse_numeric(&row[j]).ok_or_else(|| {
                    Error::Data(format!(
                        "row {}: column {name:?} value {:?} is not a finite number",
                        i + 1,
                        row[j]
                    ))
                })?,
            };
            data.push(v);
        }
    }
    let names = feature_cols.iter().map(|&j| table.columns[j].clone()).collect();
    Ok((Tensor::new(vec![table.len(), feature_cols.len()], data)?, names))
}

/// Distinct label values of a table, sorted.
pub fn class_names(table: &RawTable) -> Result<Vec<String>> {
    let j = table.label_index()?;
    let set: BTreeSet<&str> = table.rows.iter().map(|r| r[j].trim()).collect();
    Ok(set.into_iter().map(str::to_owned).collect())
}

/// Class id per row under the given sorted class list.
pub fn class_ids(table: &RawTable, classes: &[String]) -> Result<Vec<usize>> {
    let j = table.label_index()?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let v = r[j].trim();
            classes
                .binary_search_by(|c| c.as_str().cmp(v))
                .map_err(|_| Error::Data(format!("row {}: unknown class {v:?}", i + 1)))
        })
        .collect()
}

/// Fit the encoder and scaler on `train` and apply both to `train` and
/// `test`. Encoded categorical codes are standardized like numeric columns.
/// Class names are the sorted labels of `train`.
pub fn encode_and_scale(
    train: &RawTable,
    test: &RawTable,
) -> Result<(Dataset, Dataset, LabelEncoder, StandardScaler)> {
    if train.columns != test.columns || train.kinds != test.kinds {
        return Err(Error::Schema("train and test tables have different columns".into()));
    }
    let encoder = LabelEncoder::fit(train);
    let classes = class_names(train)?;
    let (x_train, names) = raw_features(train, &encoder)?;
    let (x_test, _) = raw_features(test, &encoder)?;
    let scaler = StandardScaler::fit(names.clone(), &x_train)?;
    let train_ds = Dataset::new(
        scaler.transform(&x_train)?,
        class_ids(train, &classes)?,
        classes.clone(),
        names.clone(),
    )?;
    let test_ds = Dataset::new(
        scaler.transform(&x_test)?,
        class_ids(test, &classes)?,
        classes,
        names,
    )?;
    Ok((train_ds, test_ds, encoder, scaler))
}
