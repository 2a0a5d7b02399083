//! Column schema for flow CSV files.
//!
//! ```toml
//! normal_value = "normal"
//!
//! [[column]]
//! name = "pkSeqID"
//! kind = "id"
//!
//! [[column]]
//! name = "proto"
//! kind = "categorical"
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    Id,
    /// Marks normal vs attack traffic; rows equal to `normal_value` are dropped.
    TrafficKind,
    /// Present in the file but not used.
    Ignore,
}

impl ColumnKind {
    pub fn is_feature(self) -> bool {
        matches!(self, ColumnKind::Numeric | ColumnKind::Categorical)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default = "default_normal")]
    pub normal_value: String,
    #[serde(rename = "column")]
    pub columns: Vec<ColumnSpec>,
}

fn default_normal() -> String {
    "normal".into()
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>, normal_value: impl Into<String>) -> Result<Self> {
        let schema = Self {
            normal_value: normal_value.into(),
            columns,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: Schema =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad schema: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    /// Read a schema file. A missing or malformed file is a config error.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read schema file {}: {e}", path.display()))
        })?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn kind_of(&self, column: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|c| c.name == column).map(|c| c.kind)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("column {:?} declared twice", c.name)));
            }
        }
        let count = |k: ColumnKind| self.columns.iter().filter(|c| c.kind == k).count();
        if count(ColumnKind::Label) != 1 {
            return Err(Error::Schema("exactly one label column is required".into()));
        }
        if count(ColumnKind::TrafficKind) > 1 {
            return Err(Error::Schema("at most one traffic-kind column is allowed".into()));
        }
        if !self.columns.iter().any(|c| c.kind.is_feature()) {
            return Err(Error::Schema("no numeric or categorical feature columns".into()));
        }
        Ok(())
    }
}
