//! In-memory datasets and their binary container.
//!
//! ```text
//! magic       4 bytes "QDST"
//! version     u32     DATASET_VERSION
//! rows, features, classes   u64 x 3
//! class names     per class:   u32 len + UTF-8
//! feature names   per feature: u32 len + UTF-8
//! labels      u64 x rows
//! features    f64 x rows*features, row-major
//! ```
//!
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DATASET_MAGIC: &[u8; 4] = b"QDST";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Tensor,
    labels: Vec<usize>,
    class_names: Vec<String>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Tensor,
        labels: Vec<usize>,
        class_names: Vec<String>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let &[n, f] = features.shape() else {
            return Err(Error::Data(format!(
                "features must be 2-D, got {:?}",
                features.shape()
            )));
        };
        if labels.len() != n {
            return Err(Error::Data(format!("{n} feature rows but {} labels", labels.len())));
        }
        if feature_names.len() != f {
            return Err(Error::Data(format!(
                "{f} feature columns but {} names",
                feature_names.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::Data(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        if !features.is_finite() {
            return Err(Error::Data("features contain NaN or infinite values".into()));
        }
        Ok(Self {
            features,
            labels,
            class_names,
            feature_names,
        })
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::Data("empty subset".into()));
        }
        Dataset::new(
            self.features.select_rows(indices)?,
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.class_names.clone(),
            self.feature_names.clone(),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::from(e).in_file(path))?);
        self.write_to(&mut out)
            .and_then(|_| out.flush().map_err(Error::from))
            .map_err(|e| e.in_file(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::from(e).in_file(path))?;
        Dataset::read_from(&mut BufReader::new(file)).map_err(|e| e.in_file(path))
    }

    pub fn write_to(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(DATASET_MAGIC)?;
        out.write_all(&DATASET_VERSION.to_le_bytes())?;
        for n in [self.len(), self.n_features(), self.n_classes()] {
            out.write_all(&(n as u64).to_le_bytes())?;
        }
        for name in self.class_names.iter().chain(&self.feature_names) {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
        }
        for &l in &self.labels {
            out.write_all(&(l as u64).to_le_bytes())?;
        }
        for v in self.features.data() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Dataset> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("not a dataset file (bad magic)".into()));
        }
        let mut b4 = [0u8; 4];
        read_exact(r, &mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != DATASET_VERSION {
            return Err(Error::Format(format!(
                "unsupported dataset version {version}, expected {DATASET_VERSION}"
            )));
        }
        let rows = read_u64(r)? as usize;
        let cols = read_u64(r)? as usize;
        let classes = read_u64(r)? as usize;
        if rows == 0 || cols == 0 || cols > 1 << 20 || classes > 1 << 20 {
            return Err(Error::Format(format!(
                "implausible dataset dimensions {rows} x {cols}, {classes} classes"
            )));
        }
        let class_names = (0..classes).map(|_| read_string(r)).collect::<Result<Vec<_>>>()?;
        let feature_names = (0..cols).map(|_| read_string(r)).collect::<Result<Vec<_>>>()?;
        let labels = (0..rows)
            .map(|_| read_u64(r).map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut data = vec![0.0; rows * cols];
        let mut b8 = [0u8; 8];
        for v in &mut data {
            read_exact(r, &mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        Dataset::new(Tensor::new(vec![rows, cols], data)?, labels, class_names, feature_names)
            .map_err(|e| Error::Format(format!("invalid dataset contents: {e}")))
    }
}

fn read_exact(r: &mut impl Read, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("dataset file is truncated".into())
        } else {
            Error::Io(e)
        }
    })
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_string(r: &mut impl Read) -> Result<String> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    let len = u32::from_le_bytes(b) as usize;
    if len > 1 << 16 {
        return Err(Error::Format("name too long".into()));
    }
    let mut raw = vec![0u8; len];
    read_exact(r, &mut raw)?;
    String::from_utf8(raw).map_err(|_| Error::Format("non-UTF-8 name".into()))
}
