//! End-to-end through the public API: synthetic trip, device-log round
//! trip, pooled dataset, fit, index.

use railcomfort::index::{compare_lines, discomfort_index, mean_of_rows, MeanRule};
use railcomfort::ingest::{
    build_pooled_dataset, parse_accel_log, parse_events, DatasetConfig, LabeledDataset, Trip,
};
use railcomfort::logit::{builtin_model, fit, predict, Coefficients, FitConfig, LineModel};
use railcomfort::signal::{self, FeatureSet};
use railcomfort::synth::{self, LabelRule, Phase, Segment, TripProfile};

fn profile(seed: u64) -> TripProfile {
    TripProfile {
        segments: vec![
            Segment { phase: Phase::Accelerate, duration_s: 20.0, peak_ay_ms2: 1.0 },
            Segment { phase: Phase::Cruise, duration_s: 40.0, peak_ay_ms2: 0.0 },
            Segment { phase: Phase::Brake, duration_s: 20.0, peak_ay_ms2: 1.0 },
            Segment { phase: Phase::Dwell, duration_s: 20.0, peak_ay_ms2: 0.0 },
        ],
        lateral_sigma: 0.3,
        vertical_sigma: 0.2,
        jerk_limit_ms3: 0.8,
        seed,
    }
}

/// Simulated trip written out and parsed back exactly as files would be.
fn trip(seed: u64, truth: &LineModel) -> (Trip, Vec<u8>) {
    let series = synth::generate_trip(&profile(seed), 50.0).unwrap();
    let gt = synth::label_with_truth(&series, truth, LabelRule::Bernoulli, seed).unwrap();
    let events = synth::events_from_labels(&gt.labels, &series).unwrap();
    let log = synth::series_to_log(&series, "sim").unwrap();
    let log = parse_accel_log(log.to_csv().as_bytes()).unwrap();
    let events = parse_events(events.to_text().as_bytes()).unwrap();
    (
        Trip { source: format!("trip{seed}"), log, events },
        gt.labels,
    )
}

fn config() -> DatasetConfig {
    DatasetConfig { pulse_width_s: 0.02, ..DatasetConfig::default() }
}

#[test]
fn files_round_trip_reproduces_truth_labels() {
    let truth = builtin_model("East-West").unwrap();
    let (t, labels) = trip(3, &truth);
    let ds = build_pooled_dataset(&[t], &config()).unwrap();
    assert_eq!(ds.labels, labels);
    let back = LabeledDataset::from_archive(ds.to_archive().as_bytes()).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn pooled_trips_share_one_normalization() {
    let truth = builtin_model("Circle").unwrap();
    let trips: Vec<Trip> = (1..=3).map(|s| trip(s, &truth).0).collect();
    let ds = build_pooled_dataset(&trips, &config()).unwrap();
    assert_eq!(ds.segments.len(), 3);
    assert_eq!(ds.len(), 15_000);
    for axis in 0..3 {
        let m = ds.features.iter().map(|r| r[axis].abs()).fold(0.0, f64::max);
        assert_eq!(m, 1.0);
    }
}

#[test]
fn fit_then_index_ranks_lines() {
    let series = synth::generate_trip(&profile(9), 50.0).unwrap();
    let truth = LineModel::new(
        "truth",
        Coefficients::new(0.5, 2.0, -1.0, -2.0),
        signal::fit_normalization(&series).unwrap(),
    );
    let trips: Vec<Trip> = (9..=10).map(|s| trip(s, &truth).0).collect();
    let ds = build_pooled_dataset(&trips, &config()).unwrap();
    let model = fit(&ds, &FitConfig::default(), "synthetic").unwrap();
    assert!(model.train_meta.as_ref().unwrap().converged);
    assert_eq!(model.feature_set, FeatureSet::Acceleration);

    let a = mean_of_rows(ds.features.iter().copied(), MeanRule::Absolute).unwrap();
    let reports = ["Circle", "North-South", "LRT"]
        .iter()
        .map(|l| discomfort_index(&builtin_model(l).unwrap(), &a).unwrap())
        .chain(std::iter::once(discomfort_index(&model, &a).unwrap()))
        .collect::<Vec<_>>();
    let ranked = compare_lines(&reports).unwrap();
    assert!(ranked.windows(2).all(|w| w[0].d >= w[1].d));
    assert!(ranked.iter().all(|r| r.d > 0.0 && r.d < 1.0));

    // The fitted model predicts the same series it was trained on.
    let p = predict(&model, &signal::resample(&trips[0].log.samples, 50.0).unwrap()).unwrap();
    assert_eq!(p.probabilities.len(), 5000);
}
