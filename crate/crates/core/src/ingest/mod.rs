//! Dataset ingestion: manifests, the `RPPGRAW1` raw video container, trace
//! and PPG CSV files, and ground-truth heart rate from contact PPG.

pub mod csv_io;
pub mod manifest;
pub mod raw_video;

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

pub use csv_io::{read_ppg_csv, read_trace_csv, write_ppg_csv, write_trace_csv};
pub use manifest::{read_manifest, DatasetManifest, Illumination, ManifestEntry, SubjectSplit};
pub use raw_video::{read_raw_video, video_to_trace, RawVideoReader, RawVideoWriter, VideoMeta};

use crate::bench::HrSeries;
use crate::error::{Error, Result};
use crate::methods::PulseSignal;
use crate::methods::{hr_from_pulse, Method};
use crate::spectral::FrequencyBand;
use crate::trace::{sliding_windows, ChannelTrace};

/// Default contact-PPG sampling rate.
pub const DEFAULT_PPG_RATE_HZ: f64 = 256.0;

/// Contact PPG waveform at its native rate.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPpg {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl GroundTruthPpg {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "PPG rate must be > 0, got {sample_rate_hz}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite PPG sample".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }
}

/// Per-window heart rate of the contact PPG, read with the same spectral
/// peak picker as the estimators. Window starts land on whole multiples of
/// `step_seconds`, matching the video windows.
pub fn ground_truth_hr(
    ppg: &GroundTruthPpg,
    window_seconds: f64,
    step_seconds: f64,
    band: &FrequencyBand,
) -> Result<HrSeries> {
    band.check_rate(ppg.sample_rate_hz)?;
    let views = sliding_windows(
        ppg.samples.len(),
        ppg.sample_rate_hz,
        window_seconds,
        step_seconds,
    )?;
    let mut series = HrSeries::default();
    for view in views {
        let start = view.start_seconds(ppg.sample_rate_hz);
        let pulse = PulseSignal {
            samples: ppg.samples[view.start_index..view.start_index + view.length].to_vec(),
            fps: ppg.sample_rate_hz,
            // the readout path does not depend on the tag
            method: Method::Pos,
        };
        match hr_from_pulse(&pulse, band) {
            Ok(hr) => series.push(start, hr),
            Err(e) => series.skip(start, e.to_string()),
        }
    }
    Ok(series)
}

/// Loads the trace for a manifest entry: `RPPGRAW1` videos are averaged over
/// the entry's ROI, anything else is read as a trace CSV.
pub fn load_entry_trace(entry: &ManifestEntry) -> Result<ChannelTrace> {
    let trace = if is_raw_video(&entry.video_path)? {
        let reader = read_raw_video(&entry.video_path)?;
        video_to_trace(reader, &entry.roi)?
    } else {
        read_trace_csv(&entry.video_path)?
    };
    let trace = match entry.fps_override {
        Some(fps) => trace.with_fps(fps)?,
        None => trace,
    };
    Ok(trace.with_origin_id(entry.origin_id()))
}

pub fn load_entry_ppg(entry: &ManifestEntry) -> Result<GroundTruthPpg> {
    read_ppg_csv(&entry.ppg_path, entry.ppg_rate_hz)
}

/// True when the file starts with the `RPPGRAW1` magic.
pub fn is_raw_video(path: &Path) -> Result<bool> {
    let mut magic = [0u8; 8];
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut read = 0;
    while read < magic.len() {
        match f.read(&mut magic[read..]) {
            Ok(0) => break,
            Ok(k) => read += k,
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    Ok(read == magic.len() && &magic == raw_video::MAGIC)
}

/// Writes through a temporary file in the destination directory and renames
/// it into place, so readers never observe a partial file.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ppg_tone(bpm: f64, seconds: f64) -> GroundTruthPpg {
        let n = (seconds * 256.0) as usize;
        let samples = (0..n)
            .map(|i| (2.0 * PI * bpm / 60.0 * i as f64 / 256.0).sin())
            .collect();
        GroundTruthPpg::new(samples, 256.0).unwrap()
    }

    #[test]
    fn constant_rate_ppg_reads_its_rate() {
        let gt = ground_truth_hr(
            &ppg_tone(70.0, 60.0),
            15.0,
            1.0,
            &FrequencyBand::PHYSIOLOGICAL,
        )
        .unwrap();
        assert_eq!(gt.len(), 46);
        assert!(gt.hr_bpm.iter().all(|hr| (hr - 70.0).abs() <= 1.0));
        assert_eq!(gt.window_starts_s[..3], [0.0, 1.0, 2.0]);
    }

    #[test]
    fn ramp_ppg_is_monotone() {
        // phase of a linear 60 -> 90 bpm ramp over 60 s
        let n = 60 * 256;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / 256.0;
                let cycles = (60.0 * t + 30.0 * t * t / 120.0) / 60.0;
                (2.0 * PI * cycles).sin()
            })
            .collect();
        let ppg = GroundTruthPpg::new(samples, 256.0).unwrap();
        let gt = ground_truth_hr(&ppg, 15.0, 1.0, &FrequencyBand::PHYSIOLOGICAL).unwrap();
        for w in gt.hr_bpm.windows(2) {
            assert!(w[1] >= w[0] - 2.0, "{w:?}");
        }
        for (start, hr) in gt.window_starts_s.iter().zip(&gt.hr_bpm) {
            let mid = start + 7.5;
            let expected = 60.0 + 30.0 * mid / 60.0;
            assert!((hr - expected).abs() <= 2.0, "{start}: {hr} vs {expected}");
        }
    }

    #[test]
    fn short_ppg_gives_empty_series() {
        let gt = ground_truth_hr(
            &ppg_tone(70.0, 5.0),
            15.0,
            1.0,
            &FrequencyBand::PHYSIOLOGICAL,
        )
        .unwrap();
        assert!(gt.is_empty());
    }

    #[test]
    fn ground_truth_uses_estimator_readout() {
        let ppg = ppg_tone(83.0, 20.0);
        let gt = ground_truth_hr(&ppg, 20.0, 1.0, &FrequencyBand::PHYSIOLOGICAL).unwrap();
        let pulse = PulseSignal {
            samples: ppg.samples.clone(),
            fps: 256.0,
            method: Method::Green,
        };
        assert_eq!(
            gt.hr_bpm[0],
            hr_from_pulse(&pulse, &FrequencyBand::PHYSIOLOGICAL).unwrap()
        );
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, |w| {
            w.write_all(b"one").map_err(|e| Error::io("x", e))
        })
        .unwrap();
        write_atomic(&path, |w| {
            w.write_all(b"two").map_err(|e| Error::io("x", e))
        })
        .unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
