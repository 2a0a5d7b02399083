//! Gaussian-cluster stand-ins for the flow datasets.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::schema::{ColumnKind, ColumnSpec, Schema};
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticClass {
    pub name: String,
    pub count: usize,
    /// Cluster centre; derived from the class index when absent.
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    /// Per-feature standard deviation; the spec-wide `spread` when absent.
    #[serde(default)]
    pub spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_features: usize,
    pub classes: Vec<SyntheticClass>,
    #[serde(default = "one")]
    pub spread: f64,
    /// Distance between derived class means, in units of `spread`.
    #[serde(default = "eight")]
    pub margin: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn eight() -> f64 {
    8.0
}

/// Attack classes of the TON_IoT train-test file with their instance counts.
pub const TON_IOT_CLASSES: [(&str, usize); 9] = [
    ("backdoor", 20000),
    ("ddos", 20000),
    ("dos", 20000),
    ("injection", 20000),
    ("mitm", 1043),
    ("password", 20000),
    ("ransomware", 20000),
    ("scanning", 20000),
    ("xss", 20000),
];

impl SyntheticSpec {
    /// Classes named `class0..` with derived, margin-separated means.
    pub fn separated(n_features: usize, counts: &[usize], margin: f64, seed: u64) -> Self {
        Self {
            n_features,
            classes: counts
                .iter()
                .enumerate()
                .map(|(i, &count)| SyntheticClass {
                    name: format!("class{i}"),
                    count,
                    mean: None,
                    spread: None,
                })
                .collect(),
            spread: 1.0,
            margin,
            seed,
        }
    }

    /// TON_IoT attack-class proportions at 1/10 scale (rounded half down).
    pub fn ton_iot_scaled(n_features: usize, seed: u64) -> Self {
        let mut spec = Self::separated(n_features, &[], 8.0, seed);
        spec.classes = TON_IOT_CLASSES
            .iter()
            .map(|&(name, n)| SyntheticClass {
                name: name.into(),
                count: n / 10,
                mean: None,
                spread: None,
            })
            .collect();
        spec
    }

    /// Centre of class `c`: `margin * spread / sqrt(2)` along axis `c mod F`,
    /// negated for the second pass over the axes. Any two derived centres
    /// are at least `margin * spread` apart.
    pub fn class_mean(&self, c: usize) -> Vec<f64> {
        if let Some(m) = &self.classes[c].mean {
            return m.clone();
        }
        let mut mean = vec![0.0; self.n_features];
        let sign = if (c / self.n_features) % 2 == 0 { 1.0 } else { -1.0 };
        mean[c % self.n_features] = sign * self.margin * self.spread / std::f64::consts::SQRT_2;
        mean
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 {
            return Err(Error::Config("synthetic spec needs at least one feature".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Config("synthetic spec needs at least one class".into()));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite()) || !self.margin.is_finite() {
            return Err(Error::Config("spread and margin must be finite, spread >= 0".into()));
        }
        let derived = self.classes.iter().filter(|c| c.mean.is_none()).count();
        if derived > 2 * self.n_features {
            return Err(Error::Config(format!(
                "{derived} classes without explicit means need at least {} features",
                derived.div_ceil(2)
            )));
        }
        for c in &self.classes {
            if c.count == 0 {
                return Err(Error::Config(format!("class {:?} has count 0", c.name)));
            }
            if matches!(c.spread, Some(s) if !(s >= 0.0 && s.is_finite())) {
                return Err(Error::Config(format!("class {:?} has a bad spread", c.name)));
            }
            if matches!(&c.mean, Some(m) if m.len() != self.n_features) {
                return Err(Error::Config(format!(
                    "class {:?} mean has the wrong length",
                    c.name
                )));
            }
        }
        Ok(())
    }
}

/// Draw every class's points and shuffle the rows under the spec seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let f = spec.n_features;
    let mut rng = SeededRng::new(spec.seed);
    let total: usize = spec.classes.iter().map(|c| c.count).sum();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(total);
    for (c, class) in spec.classes.iter().enumerate() {
        let mean = spec.class_mean(c);
        let spread = class.spread.unwrap_or(spec.spread);
        for _ in 0..class.count {
            rows.push((c, mean.iter().map(|m| m + spread * rng.normal()).collect()));
        }
    }
    rng.shuffle(&mut rows);
    let labels = rows.iter().map(|r| r.0).collect();
    let data = rows.into_iter().flat_map(|r| r.1).collect();
    Dataset::new(
        Tensor::new(vec![total, f], data)?,
        labels,
        spec.classes.iter().map(|c| c.name.clone()).collect(),
        (0..f).map(|j| format!("f{j}")).collect(),
    )
}

pub const NORMAL_LABEL: &str = "normal";

/// Schema of the CSV written by [`write_flow_csv`].
pub fn flow_csv_schema(n_features: usize) -> Schema {
    let col = |name: String, kind| ColumnSpec { name, kind };
    let mut columns = vec![
        col("flow_id".into(), ColumnKind::Id),
        col("proto".into(), ColumnKind::Categorical),
    ];
    columns.extend((0..n_features).map(|j| col(format!("f{j}"), ColumnKind::Numeric)));
    columns.push(col("traffic".into(), ColumnKind::TrafficKind));
    columns.push(col("label".into(), ColumnKind::Label));
    Schema::new(columns, NORMAL_LABEL).expect("static schema is valid")
}

/// Write `ds` as a flow-style CSV with an id column, a random protocol
/// column, a traffic-kind column and `normal_rows` extra normal-traffic rows
/// centred at the origin. Returns the matching schema.
pub fn write_flow_csv(
    ds: &Dataset,
    normal_rows: usize,
    seed: u64,
    out: impl Write,
) -> Result<Schema> {
    const PROTOS: [&str; 3] = ["tcp", "udp", "icmp"];
    let f = ds.n_features();
    let schema = flow_csv_schema(f);
    let mut rng = SeededRng::new(seed).derive(0xC5);
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(schema.columns.iter().map(|c| c.name.as_str()))
        .map_err(csv_err)?;
    let mut id = 0usize;
    let mut record = Vec::with_capacity(f + 4);
    let mut emit = |w: &mut csv::Writer<_>, values: &[f64], traffic: &str, label: &str, rng: &mut SeededRng| {
        record.clear();
        id += 1;
        record.push(id.to_string());
        record.push(PROTOS[rng.below(PROTOS.len())].to_owned());
        record.extend(values.iter().map(|v| v.to_string()));
        record.push(traffic.to_owned());
        record.push(label.to_owned());
        w.write_record(&record).map_err(csv_err)
    };
    for (row, &label) in ds.features().data().chunks(f).zip(ds.labels()) {
        emit(&mut w, row, "attack", &ds.class_names()[label], &mut rng)?;
    }
    for _ in 0..normal_rows {
        let values: Vec<f64> = (0..f).map(|_| rng.normal()).collect();
        emit(&mut w, &values, NORMAL_LABEL, NORMAL_LABEL, &mut rng)?;
    }
    w.flush()?;
    Ok(schema)
}
