//! Logistic discomfort model.
//!
//! A line's model maps normalized features `a = (a_x, a_y, a_z)` to
//!
//! ```text
//! z = a_x·b1 + a_y·b2 + a_z·b3 + b4
//! P = 1 / (1 + e^(−z))
//! ```
//!
//! and predicts discomfort whenever `P` exceeds the model's threshold.

mod fit;
mod linalg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::signal::{self, Axis, FeatureSet, NormalizationParams, UniformSeries};

pub use fit::{fit, fit_with_trace, FitConfig, FitTrace, Objective, SEPARATION_NORM_BOUND};
pub use linalg::solve4;

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Numerically stable logistic function.
///
/// Branches on the sign of `z` so `exp` only ever sees a non-positive
/// argument; neither branch overflows.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// Intercept.
    pub b4: f64,
}

impl Coefficients {
    pub const fn new(b1: f64, b2: f64, b3: f64, b4: f64) -> Self {
        Self { b1, b2, b3, b4 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.b1, self.b2, self.b3, self.b4]
    }

    pub fn from_array(b: [f64; 4]) -> Self {
        Self::new(b[0], b[1], b[2], b[3])
    }

    pub fn slopes(&self) -> [f64; 3] {
        [self.b1, self.b2, self.b3]
    }

    pub fn z(&self, a: [f64; 3]) -> f64 {
        a[0] * self.b1 + a[1] * self.b2 + a[2] * self.b3 + self.b4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub n_samples: usize,
    pub n_positive: usize,
    pub final_log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineModel {
    pub schema_version: u32,
    pub line_id: String,
    pub coefficients: Coefficients,
    pub normalization: NormalizationParams,
    pub feature_set: FeatureSet,
    pub threshold: f64,
    /// Channel means are removed from a series before normalization.
    #[serde(default)]
    pub mean_subtract: bool,
    /// Absent for models that were not fitted here.
    pub train_meta: Option<TrainMeta>,
    /// Set when the coefficients came without the normalization constants
    /// they were fitted under; predictions are then only indicative.
    #[serde(default)]
    pub normalization_unknown: bool,
}

impl LineModel {
    pub fn new(line_id: impl Into<String>, coefficients: Coefficients, normalization: NormalizationParams) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            line_id: line_id.into(),
            coefficients,
            normalization,
            feature_set: FeatureSet::Acceleration,
            threshold: DEFAULT_THRESHOLD,
            mean_subtract: false,
            train_meta: None,
            normalization_unknown: false,
        }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn with_feature_set(mut self, feature_set: FeatureSet) -> Self {
        self.feature_set = feature_set;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model schema_version {}",
                self.schema_version
            )));
        }
        if !self.coefficients.as_array().iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidConfig("model coefficients must be finite".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if let Some(meta) = &self.train_meta {
            if meta.n_positive > meta.n_samples {
                return Err(Error::InvalidConfig(
                    "train_meta.n_positive exceeds n_samples".into(),
                ));
            }
        }
        self.normalization.validate()
    }

    /// The axis whose slope has the largest magnitude.
    pub fn dominant_axis(&self) -> Axis {
        let s = self.coefficients.slopes();
        Axis::ALL
            .into_iter()
            .max_by(|a, b| s[a.index()].abs().total_cmp(&s[b.index()].abs()))
            .expect("three axes")
    }

    pub fn to_json(&self) -> String {
        json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let model: Self = serde_json::from_slice(bytes).map_err(|e| Error::FormatError {
            line: e.line(),
            message: format!("bad model file: {e}"),
        })?;
        model.validate()?;
        Ok(model)
    }
}

/// Linear predictor for one normalized feature row.
pub fn z_value(model: &LineModel, a: [f64; 3]) -> f64 {
    model.coefficients.z(a)
}

pub fn probability(model: &LineModel, a: [f64; 3]) -> f64 {
    sigmoid(z_value(model, a))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    pub labels: Vec<u8>,
}

/// Per-sample discomfort probability and thresholded label for a series in
/// the model's physical unit. The model's own normalization is applied.
pub fn predict(model: &LineModel, series: &UniformSeries) -> Result<Prediction> {
    let expected = model.feature_set.unit();
    if series.unit() != expected {
        return Err(Error::UnitMismatch {
            expected,
            found: series.unit(),
        });
    }
    // Training removes channel means before differentiating; jerk is
    // unchanged by that, so only acceleration inputs are re-centred here.
    let prepared;
    let series = if model.mean_subtract && model.feature_set == FeatureSet::Acceleration {
        prepared = signal::subtract_mean(series);
        &prepared
    } else {
        series
    };
    let normalized = signal::normalize(series, &model.normalization)?;
    let probabilities: Vec<f64> = normalized.rows().map(|a| probability(model, a)).collect();
    let labels = probabilities
        .iter()
        .map(|p| u8::from(*p > model.threshold))
        .collect();
    Ok(Prediction {
        probabilities,
        labels,
    })
}

/// Built-in per-line coefficients.
const BUILTIN_TABLE: [(&str, Coefficients); 5] = [
    ("Circle", Coefficients::new(0.1728, 1.2064, -0.9458, -1.1528)),
    ("North-South", Coefficients::new(-1.1764, -0.2396, -1.0849, -3.283)),
    ("North-East", Coefficients::new(0.8223, 0.2607, -0.7349, -0.9995)),
    ("East-West", Coefficients::new(-0.2867, 3.3714, 0.4978, 1.9170)),
    ("LRT", Coefficients::new(-0.7117, 0.4723, -0.2185, -1.2651)),
];

/// The five built-in line models. Their normalization constants are not
/// known, so each carries unit scales and `normalization_unknown`.
pub fn builtin_models() -> Vec<LineModel> {
    BUILTIN_TABLE
        .iter()
        .map(|(id, c)| LineModel {
            normalization_unknown: true,
            ..LineModel::new(*id, *c, NormalizationParams::UNIT)
        })
        .collect()
}

/// Case-insensitive lookup by line id.
pub fn builtin_model(line_id: &str) -> Result<LineModel> {
    builtin_models()
        .into_iter()
        .find(|m| m.line_id.eq_ignore_ascii_case(line_id))
        .ok_or_else(|| Error::UnknownLine(line_id.to_string()))
}
