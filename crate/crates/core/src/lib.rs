//! Standing-passenger discomfort modelling for rail lines.
//!
//! Pipeline: device log + stopwatch events ([`ingest`]) → uniform series and
//! jerk ([`signal`]) → logistic discomfort model ([`logit`]) → per-sample
//! prediction and the per-line discomfort index ([`index`]). [`synth`]
//! generates trips with known ground truth; [`report`] turns results into
//! metrics, CSV and SVG figures.

pub mod error;
pub mod index;
pub mod ingest;
pub mod json;
pub mod logit;
pub mod report;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
