//! Uniformly sampled three-axis series and the numeric transforms applied to them.
//!
//! Axis convention (vehicle frame): X is lateral, Y points along the direction
//! of motion, Z is perpendicular to the X-Y plane. The Z channel is used as
//! logged, gravity included, unless [`subtract_mean`] is applied explicitly.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical sampling rate: 5000 samples cover about 100 s of trip.
pub const DEFAULT_RATE_HZ: f64 = 50.0;

// Grid arithmetic snaps values within this many samples of an integer.
pub(crate) const GRID_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitTag {
    /// m/s²
    Acceleration,
    /// m/s³
    Jerk,
    Normalized,
}

impl fmt::Display for UnitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitTag::Acceleration => "acceleration (m/s^2)",
            UnitTag::Jerk => "jerk (m/s^3)",
            UnitTag::Normalized => "normalized (dimensionless)",
        })
    }
}

/// Which physical quantity feeds the discomfort model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    #[default]
    Acceleration,
    Jerk,
}

impl FeatureSet {
    pub fn unit(self) -> UnitTag {
        match self {
            FeatureSet::Acceleration => UnitTag::Acceleration,
            FeatureSet::Jerk => UnitTag::Jerk,
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureSet::Acceleration => "acceleration",
            FeatureSet::Jerk => "jerk",
        })
    }
}

impl std::str::FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acceleration" => Ok(FeatureSet::Acceleration),
            "jerk" => Ok(FeatureSet::Jerk),
            other => Err(Error::InvalidConfig(format!(
                "feature_set must be \"acceleration\" or \"jerk\", got {other:?}"
            ))),
        }
    }
}

/// One raw accelerometer reading, `t` in seconds from journey start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl Sample {
    pub fn new(t: f64, ax: f64, ay: f64, az: f64) -> Result<Self> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidSample(format!(
                "time must be finite and non-negative, got {t}"
            )));
        }
        if !(ax.is_finite() && ay.is_finite() && az.is_finite()) {
            return Err(Error::InvalidSample(format!(
                "non-finite acceleration at t = {t}"
            )));
        }
        Ok(Self { t, ax, ay, az })
    }
}

/// Three equal-length channels on an implicit grid `start_t + k / rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    start_t: f64,
    rate_hz: f64,
    channels: [Vec<f64>; 3],
    unit: UnitTag,
}

impl UniformSeries {
    pub fn new(
        start_t: f64,
        rate_hz: f64,
        ax: Vec<f64>,
        ay: Vec<f64>,
        az: Vec<f64>,
        unit: UnitTag,
    ) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "rate_hz must be positive, got {rate_hz}"
            )));
        }
        if !start_t.is_finite() {
            return Err(Error::InvalidConfig("start_t must be finite".into()));
        }
        if ax.len() != ay.len() {
            return Err(Error::LengthMismatch {
                left: ax.len(),
                right: ay.len(),
            });
        }
        if ax.len() != az.len() {
            return Err(Error::LengthMismatch {
                left: ax.len(),
                right: az.len(),
            });
        }
        if ax.len() < 2 {
            return Err(Error::EmptySignal);
        }
        Ok(Self {
            start_t,
            rate_hz,
            channels: [ax, ay, az],
            unit,
        })
    }

    pub fn from_rows(start_t: f64, rate_hz: f64, rows: &[[f64; 3]], unit: UnitTag) -> Result<Self> {
        let pick = |i: usize| rows.iter().map(|r| r[i]).collect::<Vec<_>>();
        Self::new(start_t, rate_hz, pick(0), pick(1), pick(2), unit)
    }

    pub fn start_t(&self) -> f64 {
        self.start_t
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn unit(&self) -> UnitTag {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, axis: Axis) -> &[f64] {
        &self.channels[axis.index()]
    }

    pub fn ax(&self) -> &[f64] {
        self.channel(Axis::X)
    }

    pub fn ay(&self) -> &[f64] {
        self.channel(Axis::Y)
    }

    pub fn az(&self) -> &[f64] {
        self.channel(Axis::Z)
    }

    pub fn time_at(&self, k: usize) -> f64 {
        self.start_t + k as f64 / self.rate_hz
    }

    pub fn end_t(&self) -> f64 {
        self.time_at(self.len() - 1)
    }

    pub fn row(&self, k: usize) -> [f64; 3] {
        [self.channels[0][k], self.channels[1][k], self.channels[2][k]]
    }

    pub fn rows(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        (0..self.len()).map(move |k| self.row(k))
    }

    /// Applies `f` to every channel, keeping grid and length.
    fn map_channels(&self, unit: UnitTag, mut f: impl FnMut(Axis, &[f64]) -> Vec<f64>) -> Self {
        let channels = Axis::ALL.map(|a| f(a, self.channel(a)));
        debug_assert!(channels.iter().all(|c| c.len() == self.len()));
        Self {
            start_t: self.start_t,
            rate_hz: self.rate_hz,
            channels,
            unit,
        }
    }
}

/// Per-axis positive scale factors in the unit of the series they were fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl NormalizationParams {
    pub const UNIT: Self = Self {
        sx: 1.0,
        sy: 1.0,
        sz: 1.0,
    };

    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let params = Self { sx, sy, sz };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scales().iter().all(|s| s.is_finite() && *s > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidNormalization(self.sx, self.sy, self.sz))
        }
    }

    pub fn scales(&self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }

    pub fn scale(&self, axis: Axis) -> f64 {
        self.scales()[axis.index()]
    }

    pub fn apply(&self, row: [f64; 3]) -> [f64; 3] {
        [row[0] / self.sx, row[1] / self.sy, row[2] / self.sz]
    }
}

/// Linear interpolation of irregular samples onto a uniform grid spanning
/// `[first t, last t]`, inclusive. The grid holds `⌊span·rate⌋ + 1` points.
pub fn resample(samples: &[Sample], rate_hz: f64) -> Result<UniformSeries> {
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rate_hz must be positive, got {rate_hz}"
        )));
    }
    if samples.len() < 2 {
        return Err(Error::EmptySignal);
    }
    if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
        return Err(Error::NonMonotonicTime { index: i + 1 });
    }

    let t0 = samples[0].t;
    let t_last = samples[samples.len() - 1].t;
    let n = ((t_last - t0) * rate_hz + GRID_SNAP).floor() as usize + 1;
    let n = n.max(2);

    let mut out = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    let mut seg = 0usize;
    for k in 0..n {
        let t = (t0 + k as f64 / rate_hz).min(t_last);
        while seg + 2 < samples.len() && samples[seg + 1].t <= t {
            seg += 1;
        }
        let (a, b) = (&samples[seg], &samples[seg + 1]);
        let frac = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        out[0].push(lerp(a.ax, b.ax, frac));
        out[1].push(lerp(a.ay, b.ay, frac));
        out[2].push(lerp(a.az, b.az, frac));
    }
    let [ax, ay, az] = out;
    UniformSeries::new(t0, rate_hz, ax, ay, az, UnitTag::Acceleration)
}

fn lerp(a: f64, b: f64, frac: f64) -> f64 {
    if frac == 0.0 {
        a
    } else if frac == 1.0 {
        b
    } else {
        a + frac * (b - a)
    }
}

/// Time derivative of an acceleration series: central differences inside,
/// first-order one-sided differences at the two endpoints.
pub fn jerk(series: &UniformSeries) -> Result<UniformSeries> {
    if series.unit() != UnitTag::Acceleration {
        return Err(Error::UnitMismatch {
            expected: UnitTag::Acceleration,
            found: series.unit(),
        });
    }
    if series.len() < 3 {
        return Err(Error::SignalTooShort {
            len: series.len(),
            min: 3,
        });
    }
    let rate = series.rate_hz();
    Ok(series.map_channels(UnitTag::Jerk, |_, v| differentiate(v, rate)))
}

fn differentiate(v: &[f64], rate: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = Vec::with_capacity(n);
    d.push((v[1] - v[0]) * rate);
    d.extend(v.windows(3).map(|w| (w[2] - w[0]) * rate / 2.0));
    d.push((v[n - 1] - v[n - 2]) * rate);
    d
}

/// Per-axis max-abs scales. An identically zero channel gets scale 1.
pub fn fit_normalization(series: &UniformSeries) -> Result<NormalizationParams> {
    if series.is_empty() {
        return Err(Error::EmptySignal);
    }
    let [sx, sy, sz] = Axis::ALL.map(|a| {
        let m = series
            .channel(a)
            .iter()
            .fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    });
    NormalizationParams::new(sx, sy, sz)
}

pub fn normalize(series: &UniformSeries, params: &NormalizationParams) -> Result<UniformSeries> {
    params.validate()?;
    if series.unit() == UnitTag::Normalized {
        return Err(Error::UnitMismatch {
            expected: UnitTag::Acceleration,
            found: UnitTag::Normalized,
        });
    }
    Ok(series.map_channels(UnitTag::Normalized, |axis, v| {
        let s = params.scale(axis);
        v.iter().map(|x| x / s).collect()
    }))
}

/// Removes each channel's arithmetic mean. Off by default in every pipeline.
pub fn subtract_mean(series: &UniformSeries) -> UniformSeries {
    series.map_channels(series.unit(), |_, v| {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - mean).collect()
    })
}

/// Centered moving average; windows are truncated at the boundaries.
pub fn smooth(series: &UniformSeries, window: usize) -> Result<UniformSeries> {
    check_window(window, series.len())?;
    Ok(series.map_channels(series.unit(), |_, v| moving_average(v, window)))
}

/// Single-channel form of [`smooth`].
pub fn smooth_channel(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptySignal);
    }
    check_window(window, values.len())?;
    Ok(moving_average(values, window))
}

fn check_window(window: usize, len: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidWindow(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window > len {
        return Err(Error::InvalidWindow(format!(
            "smoothing window {window} exceeds series length {len}"
        )));
    }
    Ok(())
}

fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..v.len())
        .map(|k| {
            let w = &v[k.saturating_sub(half)..(k + half + 1).min(v.len())];
            // Offsets from the centre value keep constant runs exact.
            let centre = v[k];
            let offset = w.iter().map(|x| x - centre).sum::<f64>() / w.len() as f64;
            let (lo, hi) = w
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                    (lo.min(*x), hi.max(*x))
                });
            (centre + offset).clamp(lo, hi)
        })
        .collect()
}
