//! Device log and stopwatch event parsing, clock alignment, pulse labelling
//! and the labelled dataset handed to the fitter.
//!
//! Accelerometer logs are CSV with the exact header `t_ms,ax,ay,az`
//! (integer milliseconds, accelerations in m/s², LF or CRLF). Event files
//! hold one decimal seconds value per line; lines starting with `#` are
//! comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::signal::{
    self, FeatureSet, NormalizationParams, Sample, UniformSeries, UnitTag, DEFAULT_RATE_HZ,
    GRID_SNAP,
};

pub const LOG_HEADER: &str = "t_ms,ax,ay,az";
pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_PULSE_WIDTH_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RawLog {
    pub device_id: String,
    pub samples: Vec<Sample>,
}

impl RawLog {
    pub fn with_device_id(mut self, device_id: impl Into<String>) -> Self {
        self.device_id = device_id.into();
        self
    }

    /// Writes the log back in the ingest CSV format.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(32 * (self.samples.len() + 1));
        out.push_str(LOG_HEADER);
        out.push('\n');
        for s in &self.samples {
            let t_ms = (s.t * 1000.0).round() as i64;
            let _ = writeln!(out, "{t_ms},{},{},{}", s.ax, s.ay, s.az);
        }
        out
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

/// CSV records with their 1-based line numbers, offset by `skipped` lines
/// already consumed. Fields are trimmed; blank lines are skipped.
fn csv_records(text: &str, skipped: usize) -> impl Iterator<Item = Result<(usize, csv::StringRecord)>> + '_ {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
        .into_records()
        .map(move |r| {
            let line = |pos: Option<&csv::Position>| skipped + pos.map_or(1, |p| p.line() as usize);
            match r {
                Ok(rec) => Ok((line(rec.position()), rec)),
                Err(e) => Err(Error::FormatError {
                    line: line(e.position()),
                    message: e.to_string(),
                }),
            }
        })
}

fn utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::FormatError {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(),
        message: "input is not valid UTF-8".into(),
    })
}

pub fn parse_accel_log(bytes: &[u8]) -> Result<RawLog> {
    let text = utf8(bytes)?;
    let mut it = csv_records(text, 0);
    match it.next().transpose()? {
        Some((_, h)) if h.iter().eq(LOG_HEADER.split(',')) => {}
        Some((n, h)) => {
            return Err(Error::FormatError {
                line: n,
                message: format!("expected header {LOG_HEADER:?}, found {:?}", h.iter().collect::<Vec<_>>().join(",")),
            })
        }
        None => {
            return Err(Error::FormatError {
                line: 1,
                message: "missing header".into(),
            })
        }
    }

    // (t_ms, sums, count) with duplicate timestamps merged in place.
    let mut rows: Vec<(i64, [f64; 3], u32)> = Vec::new();
    for record in it {
        let (line, fields) = record?;
        if fields.len() != 4 {
            return Err(Error::FormatError {
                line,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let t_ms: i64 = fields[0].parse().map_err(|_| Error::ParseError {
            line,
            column: 1,
            message: format!("t_ms must be an integer, got {:?}", &fields[0]),
        })?;
        if t_ms < 0 {
            return Err(Error::ParseError {
                line,
                column: 1,
                message: format!("t_ms must be non-negative, got {t_ms}"),
            });
        }
        let mut acc = [0.0; 3];
        for (i, slot) in acc.iter_mut().enumerate() {
            let f = &fields[i + 1];
            *slot = f
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ParseError {
                    line,
                    column: i + 2,
                    message: format!("expected a finite number, got {f:?}"),
                })?;
        }
        match rows.last_mut() {
            Some((prev, sums, count)) if *prev == t_ms => {
                for i in 0..3 {
                    sums[i] += acc[i];
                }
                *count += 1;
            }
            Some((prev, _, _)) if *prev > t_ms => {
                return Err(Error::FormatError {
                    line,
                    message: format!("timestamp {t_ms} ms precedes {prev} ms"),
                });
            }
            _ => rows.push((t_ms, acc, 1)),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptySignal);
    }
    let samples = rows
        .into_iter()
        .map(|(t_ms, sums, count)| {
            let n = f64::from(count);
            Sample::new(t_ms as f64 / 1000.0, sums[0] / n, sums[1] / n, sums[2] / n)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RawLog {
        device_id: String::new(),
        samples,
    })
}

/// Discomfort instants in seconds from journey start, strictly increasing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    events: Vec<f64>,
}

impl EventLog {
    /// Sorts and deduplicates; rejects negative or non-finite instants.
    pub fn new(mut events: Vec<f64>) -> Result<Self> {
        if let Some(bad) = events.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "event times must be finite and non-negative, got {bad}"
            )));
        }
        events.sort_by(f64::total_cmp);
        events.dedup();
        Ok(Self { events })
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Moves every event onto the accelerometer clock.
    pub fn shifted(&self, offset_s: f64) -> Self {
        Self {
            events: self.events.iter().map(|e| e + offset_s).collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{e}");
        }
        out
    }
}

pub fn parse_events(bytes: &[u8]) -> Result<EventLog> {
    let text = utf8(bytes)?;
    let mut events = Vec::new();
    for (line, raw) in lines(text) {
        let v = raw.trim();
        if v.is_empty() || v.starts_with('#') {
            continue;
        }
        let e: f64 = v
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| Error::ParseError {
                line,
                column: 1,
                message: format!("expected seconds as a decimal number, got {v:?}"),
            })?;
        if e < 0.0 {
            return Err(Error::ParseError {
                line,
                column: 1,
                message: format!("event time must be non-negative, got {e}"),
            });
        }
        events.push(e);
    }
    EventLog::new(events)
}

/// Expands events into a per-sample 0/1 vector: sample `k` is positive when
/// its timestamp lies in `[e, e + pulse_width)` for some event `e`.
/// Overlapping pulses merge; pulses running past the end are truncated.
pub fn build_labels(events: &EventLog, series: &UniformSeries, pulse_width: f64) -> Result<Vec<u8>> {
    if !(pulse_width.is_finite() && pulse_width > 0.0) {
        return Err(Error::InvalidWindow(format!(
            "pulse width must be positive, got {pulse_width}"
        )));
    }
    let n = series.len();
    let rate = series.rate_hz();
    let start = series.start_t();
    // First grid index at or after `t`, in sample units.
    let index_at = |t: f64| -> usize {
        let x = ((t - start) * rate - GRID_SNAP).ceil();
        if x <= 0.0 {
            0
        } else {
            (x as usize).min(n)
        }
    };
    let mut labels = vec![0u8; n];
    for &e in events.events() {
        let lo = index_at(e);
        let hi = index_at(e + pulse_width);
        for l in &mut labels[lo..hi.max(lo)] {
            *l = 1;
        }
    }
    Ok(labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub rate_hz: f64,
    pub pulse_width_s: f64,
    pub feature_set: FeatureSet,
    /// Added to every event time to move it onto the accelerometer clock.
    pub clock_offset_s: f64,
    /// Remove each channel's mean before anything else (gravity removal).
    pub mean_subtract: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            rate_hz: DEFAULT_RATE_HZ,
            pulse_width_s: DEFAULT_PULSE_WIDTH_S,
            feature_set: FeatureSet::Acceleration,
            clock_offset_s: 0.0,
            mean_subtract: false,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, what: &str, v: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{what} out of range: {v}")))
            }
        };
        check(self.rate_hz.is_finite() && self.rate_hz > 0.0, "rate_hz", self.rate_hz)?;
        check(
            self.pulse_width_s.is_finite() && self.pulse_width_s > 0.0,
            "pulse_width_s",
            self.pulse_width_s,
        )?;
        check(self.clock_offset_s.is_finite(), "clock_offset_s", self.clock_offset_s)
    }
}

/// One trip that contributed rows to a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSegment {
    pub source: String,
    pub start_t: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Vec<[f64; 3]>,
    pub labels: Vec<u8>,
    pub feature_set: FeatureSet,
    pub norm: NormalizationParams,
    pub rate_hz: f64,
    pub config: DatasetConfig,
    pub segments: Vec<DatasetSegment>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.labels.iter().filter(|l| **l == 1).count()
    }

    /// The normalized features as a series, for index computation.
    pub fn feature_series(&self) -> Result<UniformSeries> {
        let start = self.segments.first().map_or(0.0, |s| s.start_t);
        UniformSeries::from_rows(start, self.rate_hz, &self.features, UnitTag::Normalized)
    }

    pub fn validate(&self) -> Result<()> {
        if self.features.len() != self.labels.len() {
            return Err(Error::LengthMismatch {
                left: self.features.len(),
                right: self.labels.len(),
            });
        }
        if let Some(k) = self.labels.iter().position(|l| *l > 1) {
            return Err(Error::InvalidConfig(format!(
                "label {} at row {k} is not 0 or 1",
                self.labels[k]
            )));
        }
        if self.features.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite feature value".into()));
        }
        self.norm.validate()
    }

    /// Dataset archive: one line of JSON header, then a CSV feature block
    /// with header `fx,fy,fz,label`.
    pub fn to_archive(&self) -> String {
        let header = ArchiveHeader {
            schema_version: DATASET_SCHEMA_VERSION,
            feature_set: self.feature_set,
            rate_hz: self.rate_hz,
            normalization: self.norm,
            config: self.config,
            n_rows: self.len(),
            n_positive: self.n_positive(),
            segments: self.segments.clone(),
        };
        let mut out = json::to_string_compact(&header).expect("header serializes");
        out.push('\n');
        out.push_str("fx,fy,fz,label\n");
        for (f, l) in self.features.iter().zip(&self.labels) {
            let _ = writeln!(out, "{},{},{},{}", f[0], f[1], f[2], l);
        }
        out
    }

    pub fn from_archive(bytes: &[u8]) -> Result<Self> {
        let text = utf8(bytes)?;
        let head = text.lines().next().ok_or(Error::FormatError {
            line: 1,
            message: "missing dataset header".into(),
        })?;
        let header: ArchiveHeader =
            serde_json::from_str(head).map_err(|e| Error::FormatError {
                line: 1,
                message: format!("bad dataset header: {e}"),
            })?;
        if header.schema_version != DATASET_SCHEMA_VERSION {
            return Err(Error::FormatError {
                line: 1,
                message: format!("unsupported schema_version {}", header.schema_version),
            });
        }
        let body = text.split_once('\n').map_or("", |(_, rest)| rest);
        let mut records = csv_records(body, 1);
        match records.next().transpose()? {
            Some((_, h)) if h.iter().eq(["fx", "fy", "fz", "label"]) => {}
            Some((line, other)) => {
                return Err(Error::FormatError {
                    line,
                    message: format!("expected feature header, found {:?}", other.iter().collect::<Vec<_>>().join(",")),
                })
            }
            None => {
                return Err(Error::FormatError {
                    line: 2,
                    message: "missing feature block".into(),
                })
            }
        }
        let mut features = Vec::with_capacity(header.n_rows);
        let mut labels = Vec::with_capacity(header.n_rows);
        for record in records {
            let (line, fields) = record?;
            if fields.len() != 4 {
                return Err(Error::FormatError {
                    line,
                    message: format!("expected 4 fields, found {}", fields.len()),
                });
            }
            let mut row = [0.0; 3];
            for (i, slot) in row.iter_mut().enumerate() {
                *slot = fields[i].parse().map_err(|_| Error::ParseError {
                    line,
                    column: i + 1,
                    message: format!("expected a number, got {:?}", &fields[i]),
                })?;
            }
            let label = match &fields[3] {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::ParseError {
                        line,
                        column: 4,
                        message: format!("label must be 0 or 1, got {other:?}"),
                    })
                }
            };
            features.push(row);
            labels.push(label);
        }
        if features.len() != header.n_rows {
            return Err(Error::FormatError {
                line: 1,
                message: format!(
                    "header declares {} rows, found {}",
                    header.n_rows,
                    features.len()
                ),
            });
        }
        let ds = Self {
            features,
            labels,
            feature_set: header.feature_set,
            norm: header.normalization,
            rate_hz: header.rate_hz,
            config: header.config,
            segments: header.segments,
        };
        ds.validate()?;
        Ok(ds)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ArchiveHeader {
    schema_version: u32,
    feature_set: FeatureSet,
    rate_hz: f64,
    normalization: NormalizationParams,
    config: DatasetConfig,
    n_rows: usize,
    n_positive: usize,
    segments: Vec<DatasetSegment>,
}

/// One recorded journey: the device log plus the passenger's event file.
#[derive(Debug, Clone)]
pub struct Trip {
    pub source: String,
    pub log: RawLog,
    pub events: EventLog,
}

/// Resample, then optionally remove channel means and differentiate. The
/// returned series is in the feature set's physical unit.
pub fn preprocess(log: &RawLog, config: &DatasetConfig) -> Result<UniformSeries> {
    let mut series = signal::resample(&log.samples, config.rate_hz)?;
    if config.mean_subtract {
        series = signal::subtract_mean(&series);
    }
    if config.feature_set == FeatureSet::Jerk {
        series = signal::jerk(&series)?;
    }
    Ok(series)
}

fn aligned_labels(
    trip_events: &EventLog,
    series: &UniformSeries,
    config: &DatasetConfig,
) -> Result<Vec<u8>> {
    let events = trip_events.shifted(config.clock_offset_s);
    let (lo, hi) = (series.start_t(), series.end_t());
    if let Some(e) = events.events().iter().find(|e| **e < lo || **e > hi) {
        return Err(Error::EventOutOfRange(*e));
    }
    build_labels(&events, series, config.pulse_width_s)
}

pub fn build_dataset(log: &RawLog, events: &EventLog, config: &DatasetConfig) -> Result<LabeledDataset> {
    build_pooled_dataset(
        &[Trip {
            source: log.device_id.clone(),
            log: log.clone(),
            events: events.clone(),
        }],
        config,
    )
}

/// Pools several trips (e.g. one per passenger) into one dataset. A single
/// normalization is fitted over all trips so every row shares one scale.
pub fn build_pooled_dataset(trips: &[Trip], config: &DatasetConfig) -> Result<LabeledDataset> {
    config.validate()?;
    if trips.is_empty() {
        return Err(Error::EmptySignal);
    }
    let mut prepared = Vec::with_capacity(trips.len());
    for trip in trips {
        let series = preprocess(&trip.log, config)?;
        let labels = aligned_labels(&trip.events, &series, config)?;
        prepared.push((series, labels));
    }

    let mut scales = [0.0f64; 3];
    for (series, _) in &prepared {
        for axis in signal::Axis::ALL {
            let m = series.channel(axis).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            scales[axis.index()] = scales[axis.index()].max(m);
        }
    }
    let [sx, sy, sz] = scales.map(|s| if s > 0.0 { s } else { 1.0 });
    let norm = NormalizationParams::new(sx, sy, sz)?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut segments = Vec::with_capacity(trips.len());
    for (trip, (series, trip_labels)) in trips.iter().zip(prepared) {
        let normalized = signal::normalize(&series, &norm)?;
        segments.push(DatasetSegment {
            source: trip.source.clone(),
            start_t: series.start_t(),
            rows: normalized.len(),
        });
        features.extend(normalized.rows());
        labels.extend(trip_labels);
    }
    Ok(LabeledDataset {
        features,
        labels,
        feature_set: config.feature_set,
        norm,
        rate_hz: config.rate_hz,
        config: *config,
        segments,
    })
}

/// Row counts per source, in segment order.
pub fn rows_by_source(ds: &LabeledDataset) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in &ds.segments {
        *out.entry(s.source.clone()).or_insert(0) += s.rows;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series_50hz(n: usize) -> UniformSeries {
        UniformSeries::new(
            0.0,
            50.0,
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            UnitTag::Acceleration,
        )
        .unwrap()
    }

    fn log_from(f: impl Fn(f64) -> [f64; 3], seconds: f64) -> RawLog {
        let n = (seconds * 50.0) as usize + 1;
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 * 0.02;
                let [x, y, z] = f(t);
                Sample::new(t, x, y, z).unwrap()
            })
            .collect();
        RawLog {
            device_id: "test".into(),
            samples,
        }
    }

    #[test]
    fn parses_basic_log() {
        let log = parse_accel_log(b"t_ms,ax,ay,az\n0,0.0,0.1,9.8\n20,0.0,0.2,9.8").unwrap();
        assert_eq!(log.samples.len(), 2);
        assert_eq!(log.samples[0].t, 0.0);
        assert_eq!(log.samples[1].t, 0.020);
        assert_eq!(log.samples[1].ay, 0.2);
    }

    #[test]
    fn config_validation() {
        assert!(DatasetConfig::default().validate().is_ok());
        for bad in [
            DatasetConfig { rate_hz: 0.0, ..Default::default() },
            DatasetConfig { pulse_width_s: -1.0, ..Default::default() },
            DatasetConfig { clock_offset_s: f64::NAN, ..Default::default() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn crlf_is_accepted() {
        let log = parse_accel_log(b"t_ms,ax,ay,az\r\n0,1,2,3\r\n20,1,2,3\r\n").unwrap();
        assert_eq!(log.samples.len(), 2);
        assert_eq!(log.samples[1].az, 3.0);
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(parse_accel_log(b"t_ms,ax,ay,az\n"), Err(Error::EmptySignal));
    }

    #[test]
    fn duplicate_timestamps_average() {
        let log = parse_accel_log(b"t_ms,ax,ay,az\n0,0,0.1,0\n0,0,0.3,0\n20,0,0.2,0\n").unwrap();
        assert_eq!(log.samples.len(), 2);
        assert!((log.samples[0].ay - 0.2).abs() < 1e-15);
    }

    #[test]
    fn header_and_field_errors() {
        assert!(matches!(
            parse_accel_log(b"time,ax,ay,az\n0,0,0,0\n"),
            Err(Error::FormatError { line: 1, .. })
        ));
        assert!(matches!(parse_accel_log(b""), Err(Error::FormatError { line: 1, .. })));
        assert!(matches!(
            parse_accel_log(b"t_ms,ax,ay,az\n0,0,0,0\n20,0,abc,0\n"),
            Err(Error::ParseError { line: 3, column: 3, .. })
        ));
        assert!(matches!(
            parse_accel_log(b"t_ms,ax,ay,az\n0.5,0,0,0\n"),
            Err(Error::ParseError { line: 2, column: 1, .. })
        ));
        assert!(matches!(
            parse_accel_log(b"t_ms,ax,ay,az\n0,0,0\n"),
            Err(Error::FormatError { line: 2, .. })
        ));
        assert!(matches!(
            parse_accel_log(b"t_ms,ax,ay,az\n20,0,0,0\n0,0,0,0\n"),
            Err(Error::FormatError { line: 3, .. })
        ));
    }

    #[test]
    fn events_parse_sort_dedupe() {
        assert_eq!(parse_events(b"10.0\n42.5\n").unwrap().events(), &[10.0, 42.5]);
        assert!(parse_events(b"").unwrap().is_empty());
        assert_eq!(
            parse_events(b"42.5\n10.0\n10.0\n").unwrap().events(),
            &[10.0, 42.5]
        );
        assert_eq!(
            parse_events(b"# stopwatch\n\n3\r\n").unwrap().events(),
            &[3.0]
        );
    }

    #[test]
    fn events_reject_bad_lines() {
        assert!(matches!(
            parse_events(b"1.0\n-2.0\n"),
            Err(Error::ParseError { line: 2, .. })
        ));
        assert!(matches!(
            parse_events(b"1.0\nsoon\n"),
            Err(Error::ParseError { line: 2, .. })
        ));
    }

    #[test]
    fn single_pulse_window() {
        let s = series_50hz(1000);
        let labels = build_labels(&EventLog::new(vec![10.0]).unwrap(), &s, 1.0).unwrap();
        let on: Vec<usize> = (0..labels.len()).filter(|k| labels[*k] == 1).collect();
        assert_eq!(on, (500..550).collect::<Vec<_>>());
    }

    #[test]
    fn empty_events_all_zero() {
        let labels = build_labels(&EventLog::default(), &series_50hz(100), 1.0).unwrap();
        assert!(labels.iter().all(|l| *l == 0));
    }

    #[test]
    fn overlapping_pulses_union() {
        let s = series_50hz(1000);
        let labels = build_labels(&EventLog::new(vec![10.0, 10.5]).unwrap(), &s, 1.0).unwrap();
        let on: Vec<usize> = (0..labels.len()).filter(|k| labels[*k] == 1).collect();
        assert_eq!(on, (500..575).collect::<Vec<_>>());
    }

    #[test]
    fn pulse_truncated_at_end() {
        let s = series_50hz(100);
        let labels = build_labels(&EventLog::new(vec![1.9]).unwrap(), &s, 1.0).unwrap();
        assert_eq!(labels.iter().filter(|l| **l == 1).count(), 5);
    }

    #[test]
    fn pulse_width_must_be_positive() {
        let s = series_50hz(10);
        assert!(matches!(
            build_labels(&EventLog::default(), &s, 0.0),
            Err(Error::InvalidWindow(_))
        ));
    }

    #[test]
    fn dataset_one_event() {
        let log = log_from(|t| [0.1 * t.sin(), (0.3 * t).cos(), 9.8], 30.0);
        let events = EventLog::new(vec![12.34]).unwrap();
        let ds = build_dataset(&log, &events, &DatasetConfig::default()).unwrap();
        assert_eq!(ds.len(), 1501);
        assert_eq!(ds.n_positive(), 50);
        assert!(ds.features.iter().flatten().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn dataset_zero_events() {
        let log = log_from(|t| [t, t, t], 5.0);
        let ds = build_dataset(&log, &EventLog::default(), &DatasetConfig::default()).unwrap();
        assert_eq!(ds.n_positive(), 0);
    }

    #[test]
    fn jerk_dataset_of_constant_log() {
        let log = log_from(|_| [0.3, -1.2, 9.81], 5.0);
        let cfg = DatasetConfig {
            feature_set: FeatureSet::Jerk,
            ..Default::default()
        };
        let ds = build_dataset(&log, &EventLog::new(vec![1.0]).unwrap(), &cfg).unwrap();
        assert!(ds.features.iter().flatten().all(|v| *v == 0.0));
        assert_eq!(ds.norm, NormalizationParams::UNIT);
        assert_eq!(ds.feature_set, FeatureSet::Jerk);
    }

    #[test]
    fn event_outside_span() {
        let log = log_from(|_| [0.0, 0.0, 0.0], 5.0);
        let err = build_dataset(&log, &EventLog::new(vec![10.0]).unwrap(), &DatasetConfig::default());
        assert_eq!(err, Err(Error::EventOutOfRange(10.0)));
    }

    #[test]
    fn clock_offset_moves_events() {
        let log = log_from(|t| [0.0, t, 0.0], 20.0);
        let cfg = DatasetConfig {
            clock_offset_s: 2.0,
            ..Default::default()
        };
        let ds = build_dataset(&log, &EventLog::new(vec![3.0]).unwrap(), &cfg).unwrap();
        assert_eq!(ds.labels[249], 0);
        assert_eq!(ds.labels[250], 1);
        assert_eq!(ds.labels[299], 1);
        assert_eq!(ds.labels[300], 0);
    }

    #[test]
    fn pooled_dataset_shares_scale() {
        let a = log_from(|t| [0.0, t.sin(), 0.0], 10.0).with_device_id("p1");
        let b = log_from(|t| [0.0, 3.0 * t.sin(), 0.0], 10.0).with_device_id("p2");
        let trips = vec![
            Trip { source: "p1".into(), log: a, events: EventLog::new(vec![1.0]).unwrap() },
            Trip { source: "p2".into(), log: b, events: EventLog::new(vec![2.0]).unwrap() },
        ];
        let ds = build_pooled_dataset(&trips, &DatasetConfig::default()).unwrap();
        assert_eq!(ds.len(), 1002);
        assert!((ds.norm.sy - 3.0).abs() < 0.01);
        assert_eq!(ds.norm.sx, 1.0);
        assert_eq!(ds.n_positive(), 100);
        assert_eq!(rows_by_source(&ds)["p2"], 501);
    }

    #[test]
    fn archive_round_trip() {
        let log = log_from(|t| [0.1 * t.sin(), (0.3 * t).cos(), 9.8 + 0.01 * t], 8.0);
        let ds = build_dataset(&log, &EventLog::new(vec![2.5, 6.0]).unwrap(), &DatasetConfig::default())
            .unwrap();
        let text = ds.to_archive();
        let back = LabeledDataset::from_archive(text.as_bytes()).unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.to_archive(), text);
    }

    #[test]
    fn archive_rejects_bad_label() {
        let log = log_from(|t| [t, t, t], 2.0);
        let ds = build_dataset(&log, &EventLog::default(), &DatasetConfig::default()).unwrap();
        let text = ds.to_archive().replacen(",0\n", ",2\n", 1);
        assert!(matches!(
            LabeledDataset::from_archive(text.as_bytes()),
            Err(Error::ParseError { column: 4, .. })
        ));
    }

    proptest! {
        #[test]
        fn positives_match_brute_force(
            events in prop::collection::vec(0.0f64..40.0, 0..12),
            width in 0.013f64..3.0,
            start in 0.0f64..2.0,
        ) {
            let n = 2000;
            let s = UniformSeries::new(start, 50.0, vec![0.0; n], vec![0.0; n], vec![0.0; n], UnitTag::Acceleration).unwrap();
            let log = EventLog::new(events).unwrap();
            let labels = build_labels(&log, &s, width).unwrap();
            for (k, l) in labels.iter().enumerate() {
                let t = s.time_at(k);
                let inside = log.events().iter().any(|e| *e <= t && t < e + width);
                prop_assert_eq!(*l == 1, inside, "k = {}", k);
            }
        }

        #[test]
        fn log_csv_round_trips(
            rows in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 1..50)
        ) {
            let samples: Vec<Sample> = rows
                .iter()
                .enumerate()
                .map(|(k, (x, y, z))| Sample::new(k as f64 * 0.02, *x, *y, *z).unwrap())
                .collect();
            let log = RawLog { device_id: String::new(), samples };
            let back = parse_accel_log(log.to_csv().as_bytes()).unwrap();
            prop_assert_eq!(back.samples.len(), log.samples.len());
            for (a, b) in back.samples.iter().zip(&log.samples) {
                prop_assert_eq!((a.ax, a.ay, a.az), (b.ax, b.ay, b.az));
                prop_assert!((a.t - b.t).abs() < 1e-12);
            }
        }
    }
}
