//! Deterministic synthetic trips with known ground truth.
//!
//! Randomness comes from [`CounterRng`], a counter-based SplitMix64: the
//! value for `(seed, stream, counter)` is a pure function of those three
//! integers, so every draw can be reproduced independently of call order.
//! Gaussian noise uses Box–Muller with the portable `libm` routines, which
//! keeps generated series bit-identical across platforms.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EventLog, RawLog};
use crate::logit::{probability, LineModel};
use crate::signal::{self, Sample, UniformSeries, UnitTag};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

const STREAM_LATERAL: u64 = 1;
const STREAM_VERTICAL: u64 = 2;
const STREAM_LABELS: u64 = 3;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based SplitMix64.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn u64_at(&self, stream: u64, counter: u64) -> u64 {
        let key = mix64(self.seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA)));
        mix64(key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in the open interval (0, 1), 53 bits.
    pub fn uniform(&self, stream: u64, counter: u64) -> f64 {
        ((self.u64_at(stream, counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller on counters `2k` and `2k + 1`.
    pub fn normal(&self, stream: u64, k: u64) -> f64 {
        let u1 = self.uniform(stream, 2 * k);
        let u2 = self.uniform(stream, 2 * k + 1);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Accelerate,
    Cruise,
    Brake,
    Dwell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub phase: Phase,
    pub duration_s: f64,
    /// Plateau magnitude for accelerate and brake; ignored otherwise.
    #[serde(default)]
    pub peak_ay_ms2: f64,
}

impl Segment {
    fn target_ay(&self) -> f64 {
        match self.phase {
            Phase::Accelerate => self.peak_ay_ms2.abs(),
            Phase::Brake => -self.peak_ay_ms2.abs(),
            Phase::Cruise | Phase::Dwell => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripProfile {
    pub segments: Vec<Segment>,
    pub lateral_sigma: f64,
    pub vertical_sigma: f64,
    pub jerk_limit_ms3: f64,
    pub seed: u64,
}

impl TripProfile {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if let Some(s) = self
            .segments
            .iter()
            .find(|s| !(s.duration_s.is_finite() && s.duration_s > 0.0 && s.peak_ay_ms2.is_finite()))
        {
            return Err(Error::InvalidConfig(format!(
                "segment durations must be positive and peaks finite, got {s:?}"
            )));
        }
        let sigma_ok = |s: f64| s.is_finite() && s >= 0.0;
        if !(sigma_ok(self.lateral_sigma) && sigma_ok(self.vertical_sigma)) {
            return Err(Error::InvalidConfig("noise sigmas must be non-negative".into()));
        }
        if !(self.jerk_limit_ms3.is_finite() && self.jerk_limit_ms3 > 0.0) {
            return Err(Error::InvalidConfig("jerk_limit_ms3 must be positive".into()));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// Parses a TOML profile document and validates it.
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: Self = toml::from_str(text).map_err(|e| Error::FormatError {
            line: e
                .span()
                .map_or(1, |sp| 1 + text[..sp.start].matches('\n').count()),
            message: format!("bad trip profile: {}", e.message()),
        })?;
        p.validate()?;
        Ok(p)
    }
}

/// Synthesises a trip on a `rate_hz` grid starting at t = 0.
///
/// `ay` tracks each segment's target level with its slope capped at the
/// jerk limit, giving trapezoidal accelerate/brake pulses. `ax` and `az`
/// are zero-mean Gaussian noise.
pub fn generate_trip(profile: &TripProfile, rate_hz: f64) -> Result<UniformSeries> {
    profile.validate()?;
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidConfig(format!("rate_hz must be positive, got {rate_hz}")));
    }
    let n = ((profile.duration_s() * rate_hz).round() as usize).max(2);
    let max_step = profile.jerk_limit_ms3 / rate_hz;
    let rng = CounterRng::new(profile.seed);

    let mut ends = Vec::with_capacity(profile.segments.len());
    let mut acc = 0.0;
    for s in &profile.segments {
        acc += s.duration_s;
        ends.push(acc);
    }

    let mut ay = Vec::with_capacity(n);
    let mut level = 0.0f64;
    let mut seg = 0usize;
    for k in 0..n {
        let t = k as f64 / rate_hz;
        while seg + 1 < ends.len() && t >= ends[seg] {
            seg += 1;
        }
        if k > 0 {
            let target = profile.segments[seg].target_ay();
            level += (target - level).clamp(-max_step, max_step);
        }
        ay.push(level);
    }
    let noise = |stream: u64, sigma: f64| -> Vec<f64> {
        (0..n as u64)
            .map(|k| if sigma == 0.0 { 0.0 } else { sigma * rng.normal(stream, k) })
            .collect()
    };
    let ax = noise(STREAM_LATERAL, profile.lateral_sigma);
    let az = noise(STREAM_VERTICAL, profile.vertical_sigma);
    UniformSeries::new(0.0, rate_hz, ax, ay, az, UnitTag::Acceleration)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    #[default]
    Bernoulli,
    Threshold,
}

impl fmt::Display for LabelRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelRule::Bernoulli => "bernoulli",
            LabelRule::Threshold => "threshold",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub model: LineModel,
    pub labels: Vec<u8>,
    pub rule: LabelRule,
    pub probabilities: Vec<f64>,
}

impl GroundTruth {
    pub fn positive_fraction(&self) -> f64 {
        self.labels.iter().filter(|l| **l == 1).count() as f64 / self.labels.len() as f64
    }
}

/// Labels a series from a known model. The series must be in the model's
/// physical unit; the model's own normalization is applied.
pub fn label_with_truth(
    series: &UniformSeries,
    truth: &LineModel,
    rule: LabelRule,
    seed: u64,
) -> Result<GroundTruth> {
    let prediction = crate::logit::predict(truth, series)?;
    let probabilities = prediction.probabilities;
    let labels = match rule {
        LabelRule::Threshold => prediction.labels,
        LabelRule::Bernoulli => {
            let rng = CounterRng::new(seed);
            probabilities
                .iter()
                .enumerate()
                .map(|(k, p)| u8::from(rng.uniform(STREAM_LABELS, k as u64) < *p))
                .collect()
        }
    };
    Ok(GroundTruth {
        model: truth.clone(),
        labels,
        rule,
        probabilities,
    })
}

/// Mean model probability over a normalized-feature evaluation, for
/// label-rate sanity checks.
pub fn mean_probability(truth: &LineModel, series: &UniformSeries) -> Result<f64> {
    let n = signal::normalize(series, &truth.normalization)?;
    Ok(n.rows().map(|a| probability(truth, a)).sum::<f64>() / n.len() as f64)
}

/// One event at every positively labelled sample. Ingesting these with a
/// pulse width of one sample period (`1 / rate_hz`) reproduces the labels.
pub fn events_from_labels(labels: &[u8], series: &UniformSeries) -> Result<EventLog> {
    if labels.len() != series.len() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: series.len(),
        });
    }
    EventLog::new(
        labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == 1)
            .map(|(k, _)| series.time_at(k))
            .collect(),
    )
}

/// A uniform series written as a device log (millisecond timestamps).
pub fn series_to_log(series: &UniformSeries, device_id: &str) -> Result<RawLog> {
    let samples = (0..series.len())
        .map(|k| {
            let [x, y, z] = series.row(k);
            Sample::new(series.time_at(k), x, y, z)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawLog {
        device_id: device_id.to_string(),
        samples,
    })
}

/// Per-sample truth labels as CSV with header `t_s,label`.
pub fn labels_to_csv(labels: &[u8], series: &UniformSeries) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("t_s,label\n");
    for (k, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{},{}", series.time_at(k), l);
    }
    out
}
