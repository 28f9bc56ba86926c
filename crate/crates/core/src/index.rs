//! Per-line discomfort index.
//!
//! `D = sigmoid(A_x·b1 + A_y·b2 + A_z·b3 + b4)` where `A` is the mean of the
//! normalized training features. By default `A` averages absolute values:
//! signed means of oscillating, max-abs normalized acceleration sit near
//! zero on every line and would reduce `D` to `sigmoid(b4)`. The signed
//! reading is available as [`MeanRule::Signed`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::logit::{sigmoid, LineModel};
use crate::signal::{Axis, UniformSeries, UnitTag};

pub const INDEX_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanRule {
    #[default]
    Absolute,
    Signed,
}

impl fmt::Display for MeanRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeanRule::Absolute => "absolute",
            MeanRule::Signed => "signed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFeatures {
    pub a: [f64; 3],
    pub n_samples: usize,
}

pub fn mean_features(series: &UniformSeries, rule: MeanRule) -> Result<MeanFeatures> {
    if series.unit() != UnitTag::Normalized {
        return Err(Error::UnitMismatch {
            expected: UnitTag::Normalized,
            found: series.unit(),
        });
    }
    if series.is_empty() {
        return Err(Error::EmptySignal);
    }
    mean_of_rows(series.rows(), rule)
}

/// Same as [`mean_features`] over bare normalized rows.
pub fn mean_of_rows(rows: impl IntoIterator<Item = [f64; 3]>, rule: MeanRule) -> Result<MeanFeatures> {
    let mut sums = [0.0f64; 3];
    let mut n = 0usize;
    for row in rows {
        for axis in Axis::ALL {
            let v = row[axis.index()];
            sums[axis.index()] += match rule {
                MeanRule::Absolute => v.abs(),
                MeanRule::Signed => v,
            };
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySignal);
    }
    Ok(MeanFeatures {
        a: sums.map(|s| s / n as f64),
        n_samples: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineIndexReport {
    pub line_id: String,
    #[serde(rename = "A")]
    pub a: [f64; 3],
    #[serde(rename = "Z")]
    pub z: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub n_samples: usize,
}

pub fn discomfort_index(model: &LineModel, features: &MeanFeatures) -> Result<LineIndexReport> {
    if !features.a.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig("mean features must be finite".into()));
    }
    let z = model.coefficients.z(features.a);
    Ok(LineIndexReport {
        line_id: model.line_id.clone(),
        a: features.a,
        z,
        d: sigmoid(z),
        n_samples: features.n_samples,
    })
}

/// Orders reports by descending `D`, ties broken by ascending line id.
pub fn compare_lines(reports: &[LineIndexReport]) -> Result<Vec<LineIndexReport>> {
    if reports.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut seen = BTreeSet::new();
    for r in reports {
        if !seen.insert(r.line_id.as_str()) {
            return Err(Error::DuplicateLine(r.line_id.clone()));
        }
    }
    let mut ranked = reports.to_vec();
    ranked.sort_by(|a, b| b.d.total_cmp(&a.d).then_with(|| a.line_id.cmp(&b.line_id)));
    Ok(ranked)
}

/// Index report file: ranked reports plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexDocument {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub reports: Vec<LineIndexReport>,
}

impl IndexDocument {
    pub fn new(config: serde_json::Value, reports: Vec<LineIndexReport>) -> Self {
        Self {
            schema_version: INDEX_SCHEMA_VERSION,
            config,
            reports,
        }
    }

    pub fn to_json(&self) -> String {
        json::to_string_pretty(self).expect("index document serializes")
    }
}
