use std::collections::BTreeSet;

use proptest::prelude::*;

use rppg::bench::{estimate_series, run_benchmark};
use rppg::ingest::{ground_truth_hr, read_manifest, read_raw_video, video_to_trace};
use rppg::synth::{
    render_video, synth_trace, write_dataset, Flicker, FlickerKind, HeartRate, RecordingOptions,
    RenderLayout, SynthSpec, DEFAULT_STRENGTH, PULSE_WEIGHTS,
};
use rppg::trace::sliding_windows;
use rppg::{BenchConfig, Error, FrequencyBand, Method};

const BAND: FrequencyBand = FrequencyBand::PHYSIOLOGICAL;

#[test]
fn ground_truth_matches_spec_rate_on_every_window() {
    for hr in [45.0, 72.0, 133.0, 230.0] {
        let out = synth_trace(&SynthSpec::default().with_hr(hr)).unwrap();
        for window in [15.0, 30.0, 60.0] {
            let gt = ground_truth_hr(&out.ppg, window, 1.0, &BAND).unwrap();
            assert_eq!(
                gt.len(),
                sliding_windows(1200, 20.0, window, 1.0).unwrap().len()
            );
            assert!(
                gt.hr_bpm.iter().all(|g| (g - hr).abs() <= 1.0),
                "{hr} @ {window}"
            );
        }
    }
}

#[test]
fn ramp_readout_tracks_mean_window_rate() {
    let spec = SynthSpec {
        hr: HeartRate::Ramp {
            start: 60.0,
            end: 100.0,
        },
        ..SynthSpec::default()
    };
    let out = synth_trace(&spec).unwrap();
    for method in [Method::Green, Method::Chrom, Method::Pos] {
        let series = estimate_series(&out.trace, method, 15.0, 1.0, &BAND).unwrap();
        for (start, hr) in series.window_starts_s.iter().zip(&series.hr_bpm) {
            let expected = spec.hr.mean_over(*start, start + 15.0, spec.duration_s);
            assert!(
                (hr - expected).abs() <= 2.0,
                "{method} at {start}: {hr} vs {expected}"
            );
        }
    }
}

#[test]
fn noiseless_trace_reads_rate_and_starves_ica() {
    let out = synth_trace(&SynthSpec::default().with_noise(0.0)).unwrap();
    for method in [Method::Green, Method::Chrom, Method::Pos] {
        let series = estimate_series(&out.trace, method, 30.0, 1.0, &BAND).unwrap();
        assert_eq!(series.len(), 31);
        assert!(series.hr_bpm.iter().all(|hr| (hr - 72.0).abs() <= 2.0));
    }
    // without noise the three channels are proportional: rank-one covariance
    let series = estimate_series(&out.trace, Method::Ica, 30.0, 1.0, &BAND).unwrap();
    assert!(series.is_empty());
    assert_eq!(series.skipped.len(), 31);
}

#[test]
fn projections_cancel_strong_flicker() {
    for kind in [
        FlickerKind::Sinusoidal { freq_hz: 0.25 },
        FlickerKind::RandomWalk { step: 0.002 },
    ] {
        let spec = SynthSpec::default().with_hr(96.0).with_flicker(Flicker {
            amp: 5.0 * PULSE_WEIGHTS[1] * DEFAULT_STRENGTH,
            kind,
        });
        let out = synth_trace(&spec).unwrap();
        for method in [Method::Chrom, Method::Pos] {
            let series = estimate_series(&out.trace, method, 30.0, 1.0, &BAND).unwrap();
            assert_eq!(series.len(), 31);
            assert!(
                series.hr_bpm.iter().all(|hr| (hr - 96.0).abs() <= 2.0),
                "{method} {kind:?}: {:?}",
                series.hr_bpm
            );
        }
    }
}

#[test]
fn single_pixel_render_is_accurate_on_average() {
    let dir = tempfile::tempdir().unwrap();
    let out = synth_trace(&SynthSpec::default().with_duration(15.0)).unwrap();
    let path = dir.path().join("p.rppg");
    render_video(&out, 1, 1, RenderLayout::Uniform, &path).unwrap();
    let trace = video_to_trace(read_raw_video(&path).unwrap(), &Default::default()).unwrap();
    for c in 0..3 {
        let (a, b) = (out.trace.channels()[c], trace.channels()[c]);
        assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1.0 / 255.0));
        let mean_err = a.iter().zip(b).map(|(x, y)| y - x).sum::<f64>() / a.len() as f64;
        assert!(
            mean_err.abs() <= 1.0 / (2.0 * 255.0),
            "channel {c}: {mean_err}"
        );
    }
}

fn four_subject_dataset(dir: &std::path::Path) -> std::path::PathBuf {
    let recordings: Vec<_> = [(58.0, "s1"), (75.0, "s2"), (101.0, "s3"), (140.0, "s4")]
        .into_iter()
        .enumerate()
        .map(|(i, (hr, name))| {
            let mut opts = RecordingOptions::new(name);
            if i % 2 == 0 {
                opts.render = Some((8, 8));
                opts.layout = RenderLayout::FaceBox;
            }
            (SynthSpec::default().with_hr(hr).with_seed(i as u64), opts)
        })
        .collect();
    write_dataset(dir, &recordings).unwrap().0
}

#[test]
fn four_entry_manifest_gives_accurate_grid() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = read_manifest(four_subject_dataset(dir.path())).unwrap();
    let report = run_benchmark(&manifest, None, &BenchConfig::default()).unwrap();
    assert_eq!(report.cells.len(), 4 * 3);
    assert_eq!(report.per_video.len(), 4 * 4 * 3);
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    for cell in &report.cells {
        let mae = cell.mae_bpm.unwrap();
        assert!(mae <= 2.0, "{cell:?}");
        assert!(cell.rmse_bpm.unwrap() >= mae);
    }
    let green_only = BenchConfig {
        methods: vec![Method::Green],
        ..BenchConfig::default()
    };
    assert_eq!(
        run_benchmark(&manifest, None, &green_only)
            .unwrap()
            .cells
            .len(),
        3
    );
}

#[test]
fn split_restricts_to_test_subjects() {
    let dir = tempfile::tempdir().unwrap();
    let path = four_subject_dataset(dir.path());
    let mut manifest = read_manifest(&path).unwrap();
    let split = rppg::ingest::SubjectSplit {
        train_ids: BTreeSet::from(["s1".to_string(), "s2".to_string()]),
        test_ids: BTreeSet::from(["s3".to_string(), "s4".to_string()]),
        ..Default::default()
    };
    split.validate(manifest.subjects()).unwrap();
    manifest.split = Some(split);
    manifest.write(&path).unwrap();

    let manifest = read_manifest(&path).unwrap();
    let config = BenchConfig {
        methods: vec![Method::Pos],
        windows_s: vec![60.0],
        ..BenchConfig::default()
    };
    let report = run_benchmark(&manifest, manifest.split.as_ref(), &config).unwrap();
    let origins: Vec<_> = report
        .per_video
        .iter()
        .map(|v| v.origin_id.as_str())
        .collect();
    assert_eq!(origins, ["s3.rppg", "s4.trace.csv"]);
    assert_eq!(report.config.n_entries, 2);
}

#[test]
fn degenerate_dataset_is_empty_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let flat = SynthSpec::default().with_noise(0.0).with_strength(0.0);
    let (path, _) = write_dataset(dir.path(), &[(flat, RecordingOptions::new("flat"))]).unwrap();
    let manifest = read_manifest(path).unwrap();
    assert!(matches!(
        run_benchmark(&manifest, None, &BenchConfig::default()),
        Err(Error::EmptyEvaluation(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimates_stay_inside_the_band(
        seed in any::<u64>(),
        method in prop::sample::select(Method::ALL.to_vec()),
        hr in 42.0f64..240.0,
        noise in 0.0005f64..0.05,
    ) {
        let out = synth_trace(&SynthSpec::default().with_hr(hr).with_noise(noise).with_seed(seed).with_duration(20.0)).unwrap();
        let series = estimate_series(&out.trace, method, 15.0, 1.0, &BAND).unwrap();
        for hr in &series.hr_bpm {
            prop_assert!((42.0..=240.0).contains(hr), "{}", hr);
        }
        for pair in series.window_starts_s.windows(2) {
            prop_assert!(pair[1] > pair[0]);
        }
    }
}
