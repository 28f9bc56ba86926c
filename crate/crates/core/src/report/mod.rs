//! Confusion metrics, probability CSV export and SVG figures.

mod svg;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;

pub use svg::{render_index_figure, render_prediction_figure, render_trip_figure, TimeAxis};

pub const PROBABILITY_CSV_HEADER: &str = "t_s,probability,predicted,actual";
/// About one second at 50 Hz.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 51;

/// Binary confusion counts. Ratios whose denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMetrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl ConfusionMetrics {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn evaluate(predicted: &[u8], actual: &[u8]) -> Result<ConfusionMetrics> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyReport);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, a) in predicted.iter().zip(actual) {
        match (*p != 0, *a != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(ConfusionMetrics {
        tp,
        fp,
        tn,
        fn_,
        accuracy: (tp + tn) as f64 / predicted.len() as f64,
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<f64>,
}

/// Metrics file: `{counts, ratios, config}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsDocument {
    pub counts: Counts,
    pub ratios: Ratios,
    pub config: serde_json::Value,
}

impl MetricsDocument {
    pub fn new(m: &ConfusionMetrics, config: serde_json::Value) -> Self {
        Self {
            counts: Counts {
                tp: m.tp,
                fp: m.fp,
                tn: m.tn,
                fn_: m.fn_,
            },
            ratios: Ratios {
                accuracy: m.accuracy,
                precision: m.precision,
                recall: m.recall,
            },
            config,
        }
    }

    pub fn to_json(&self) -> String {
        json::to_string_pretty(self).expect("metrics serialize")
    }
}

/// Probability series as CSV. The `actual` column is left empty when no
/// reference labels exist.
pub fn probability_csv(
    axis: TimeAxis,
    probabilities: &[f64],
    predicted: &[u8],
    actual: Option<&[u8]>,
) -> Result<String> {
    if predicted.len() != probabilities.len() {
        return Err(Error::LengthMismatch {
            left: probabilities.len(),
            right: predicted.len(),
        });
    }
    if let Some(a) = actual {
        if a.len() != probabilities.len() {
            return Err(Error::LengthMismatch {
                left: probabilities.len(),
                right: a.len(),
            });
        }
    }
    let mut out = String::with_capacity(40 * (probabilities.len() + 1));
    out.push_str(PROBABILITY_CSV_HEADER);
    out.push('\n');
    for (k, (p, l)) in probabilities.iter().zip(predicted).enumerate() {
        let _ = write!(out, "{},{},{},", axis.time_at(k), p, l);
        if let Some(a) = actual {
            let _ = write!(out, "{}", a[k]);
        }
        out.push('\n');
    }
    Ok(out)
}
