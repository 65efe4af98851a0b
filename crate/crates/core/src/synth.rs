//! Seeded synthetic traces, contact PPG and rendered videos with known heart
//! rate, used as ground truth for every end-to-end check.
//!
//! Each channel follows
//!
//! ```text
//! c(t) = baseline_c * (1 + pulse_amp_c * p(t) + flicker(t) + spikes(t)) + noise
//! ```
//!
//! where `p(t) = sin(phi(t)) + h2 * sin(2 phi(t))` and `phi` is the integral
//! of the instantaneous heart rate. The PPG is `p(t)` sampled at its own rate,
//! so trace and PPG are phase-aligned by construction.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::raw_video::{RawVideoWriter, VideoMeta};
use crate::ingest::{
    write_atomic, write_ppg_csv, write_trace_csv, DatasetManifest, GroundTruthPpg, Illumination,
    ManifestEntry, DEFAULT_PPG_RATE_HZ,
};
use crate::trace::{ChannelTrace, RgbFrame, Roi, RoiSelection};

/// Relative pulse strength per channel (green strongest).
pub const PULSE_WEIGHTS: [f64; 3] = [0.33, 0.77, 0.53];

/// Recorded in generated manifests so datasets can be traced to their RNG.
pub const GENERATOR_ID: &str = "rppg-synth ChaCha8Rng/seed_from_u64";

pub const MIN_HR_BPM: f64 = 42.0;
pub const MAX_HR_BPM: f64 = 240.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeartRate {
    Constant(f64),
    /// Linear ramp from `start` to `end` bpm over the whole duration.
    Ramp {
        start: f64,
        end: f64,
    },
}

impl HeartRate {
    pub fn at(&self, t: f64, duration: f64) -> f64 {
        match *self {
            HeartRate::Constant(bpm) => bpm,
            HeartRate::Ramp { start, end } => start + (end - start) * t / duration,
        }
    }

    /// Mean heart rate over `[t0, t1]`.
    pub fn mean_over(&self, t0: f64, t1: f64, duration: f64) -> f64 {
        0.5 * (self.at(t0, duration) + self.at(t1, duration))
    }

    /// Accumulated phase in radians at time `t`.
    fn phase(&self, t: f64, duration: f64) -> f64 {
        let cycles = match *self {
            HeartRate::Constant(bpm) => bpm * t / 60.0,
            HeartRate::Ramp { start, end } => {
                (start * t + (end - start) * t * t / (2.0 * duration)) / 60.0
            }
        };
        2.0 * PI * cycles
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlickerKind {
    None,
    Sinusoidal {
        freq_hz: f64,
    },
    /// Gaussian random walk rescaled so its peak deviation equals `amp`.
    RandomWalk {
        step: f64,
    },
}

/// Multiplicative illumination change shared by all channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flicker {
    pub amp: f64,
    pub kind: FlickerKind,
}

impl Flicker {
    pub const NONE: Flicker = Flicker {
        amp: 0.0,
        kind: FlickerKind::None,
    };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionSpikes {
    pub count: usize,
    /// Peak relative intensity change of each spike.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub duration_s: f64,
    pub fps: f64,
    pub hr: HeartRate,
    pub pulse_amp: [f64; 3],
    /// Relative amplitude of the optional second harmonic (0 disables it).
    pub second_harmonic: f64,
    pub flicker: Flicker,
    /// Standard deviation of additive Gaussian noise, in `[0, 1]` units.
    pub noise_std: f64,
    pub baseline_rgb: [f64; 3],
    pub motion_spike: MotionSpikes,
    pub ppg_rate_hz: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            duration_s: 60.0,
            fps: 20.0,
            hr: HeartRate::Constant(72.0),
            pulse_amp: PULSE_WEIGHTS.map(|w| w * DEFAULT_STRENGTH),
            second_harmonic: 0.0,
            flicker: Flicker::NONE,
            noise_std: 0.001,
            baseline_rgb: [0.6, 0.45, 0.35],
            motion_spike: MotionSpikes::default(),
            ppg_rate_hz: DEFAULT_PPG_RATE_HZ,
            seed: 0,
        }
    }
}

/// Scale applied to [`PULSE_WEIGHTS`] by default.
pub const DEFAULT_STRENGTH: f64 = 0.02;

impl SynthSpec {
    pub fn with_hr(mut self, bpm: f64) -> Self {
        self.hr = HeartRate::Constant(bpm);
        self
    }

    /// Sets the pulse amplitudes to `PULSE_WEIGHTS * strength`.
    pub fn with_strength(mut self, strength: f64) -> Self {
        self.pulse_amp = PULSE_WEIGHTS.map(|w| w * strength);
        self
    }

    pub fn with_noise(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn with_flicker(mut self, flicker: Flicker) -> Self {
        self.flicker = flicker;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_duration(mut self, duration_s: f64) -> Self {
        self.duration_s = duration_s;
        self
    }

    pub fn n_frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn n_ppg_samples(&self) -> usize {
        (self.duration_s * self.ppg_rate_hz).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Spec(msg));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration must be > 0, got {}", self.duration_s));
        }
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return bad(format!("fps must be > 0, got {}", self.fps));
        }
        if !(self.ppg_rate_hz > 2.0 * MAX_HR_BPM / 60.0) {
            return bad(format!("PPG rate {} Hz is too low", self.ppg_rate_hz));
        }
        if self.n_frames() < 2 {
            return bad("fewer than two frames".into());
        }
        let ends = match self.hr {
            HeartRate::Constant(b) => [b, b],
            HeartRate::Ramp { start, end } => [start, end],
        };
        if ends.iter().any(|b| !(MIN_HR_BPM..=MAX_HR_BPM).contains(b)) {
            return bad(format!(
                "heart rate must stay within {MIN_HR_BPM}-{MAX_HR_BPM} bpm, got {ends:?}"
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.pulse_amp.iter().any(|a| !(*a >= 0.0)) || !(self.second_harmonic >= 0.0) {
            return bad("pulse amplitudes must be >= 0".into());
        }
        if !(self.flicker.amp >= 0.0) || !(self.motion_spike.magnitude >= 0.0) {
            return bad("flicker and spike amplitudes must be >= 0".into());
        }
        match self.flicker.kind {
            FlickerKind::Sinusoidal { freq_hz } if !(freq_hz > 0.0) => {
                return bad(format!("flicker frequency must be > 0, got {freq_hz}"));
            }
            FlickerKind::RandomWalk { step } if !(step > 0.0) => {
                return bad(format!("random-walk step must be > 0, got {step}"));
            }
            _ => {}
        }
        for c in 0..3 {
            let base = self.baseline_rgb[c];
            let swing = self.pulse_amp[c] * (1.0 + self.second_harmonic)
                + self.flicker.amp
                + self.motion_spike.magnitude;
            if !(base > 0.0 && base * (1.0 - swing) > 0.0 && base * (1.0 + swing) < 1.0) {
                return bad(format!(
                    "channel {c}: baseline {base} with relative swing {swing} leaves (0, 1)"
                ));
            }
        }
        Ok(())
    }
}

/// Generated trace, PPG and the noise-free components behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub trace: ChannelTrace,
    pub ppg: GroundTruthPpg,
    /// `p(t)` at the video frame rate.
    pub pulse: Vec<f64>,
    /// `flicker(t)` at the video frame rate.
    pub flicker: Vec<f64>,
}

fn waveform(spec: &SynthSpec, t: f64) -> f64 {
    let phi = spec.hr.phase(t, spec.duration_s);
    phi.sin() + spec.second_harmonic * (2.0 * phi).sin()
}

fn flicker_series(spec: &SynthSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let amp = spec.flicker.amp;
    match spec.flicker.kind {
        FlickerKind::None => vec![0.0; n],
        FlickerKind::Sinusoidal { freq_hz } => (0..n)
            .map(|i| amp * (2.0 * PI * freq_hz * i as f64 / spec.fps).sin())
            .collect(),
        FlickerKind::RandomWalk { step } => {
            let normal = Normal::new(0.0, step).expect("step validated");
            let mut walk = Vec::with_capacity(n);
            let mut x = 0.0;
            for _ in 0..n {
                x += normal.sample(rng);
                walk.push(x);
            }
            let mean = walk.iter().sum::<f64>() / n as f64;
            let peak = walk.iter().map(|w| (w - mean).abs()).fold(0.0, f64::max);
            if peak == 0.0 {
                return vec![0.0; n];
            }
            walk.iter().map(|w| amp * (w - mean) / peak).collect()
        }
    }
}

fn spike_series(spec: &SynthSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    const WIDTH_S: f64 = 0.15;
    let centres: Vec<f64> = (0..spec.motion_spike.count)
        .map(|_| rng.random_range(0.0..spec.duration_s))
        .collect();
    (0..n)
        .map(|i| {
            let t = i as f64 / spec.fps;
            centres
                .iter()
                .map(|c| (-0.5 * ((t - c) / WIDTH_S).powi(2)).exp())
                .sum::<f64>()
                .min(1.0)
                * spec.motion_spike.magnitude
        })
        .collect()
}

/// Generates a trace and its ground-truth PPG. Deterministic given the seed.
pub fn synth_trace(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_frames();
    let flicker = flicker_series(spec, n, &mut rng);
    let spikes = spike_series(spec, n, &mut rng);
    let pulse: Vec<f64> = (0..n)
        .map(|i| waveform(spec, i as f64 / spec.fps))
        .collect();
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Spec(e.to_string()))?;

    let mut rgb = Vec::with_capacity(n);
    for i in 0..n {
        let sample: [f64; 3] = std::array::from_fn(|c| {
            let rel = 1.0 + spec.pulse_amp[c] * pulse[i] + flicker[i] + spikes[i];
            spec.baseline_rgb[c] * rel
        });
        rgb.push(sample);
    }
    if spec.noise_std > 0.0 {
        for sample in &mut rgb {
            for v in sample.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
    }
    let trace = ChannelTrace::from_rgb(&rgb, spec.fps, format!("synth-{}", spec.seed))?;
    let ppg_samples = (0..spec.n_ppg_samples())
        .map(|i| waveform(spec, i as f64 / spec.ppg_rate_hz))
        .collect();
    let ppg = GroundTruthPpg::new(ppg_samples, spec.ppg_rate_hz)?;
    Ok(SynthOutput {
        trace,
        ppg,
        pulse,
        flicker,
    })
}

/// How a trace is painted into frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RenderLayout {
    /// Every pixel follows the trace.
    #[default]
    Uniform,
    /// The centre half of the frame (the "face") follows the trace; the
    /// border is a background lit by the same flicker but without pulse.
    FaceBox,
}

impl RenderLayout {
    /// Region that carries the trace, as a manifest ROI.
    pub fn face_roi(&self, width: usize, height: usize) -> RoiSelection {
        match self {
            RenderLayout::Uniform => RoiSelection::Full,
            RenderLayout::FaceBox => RoiSelection::Rect(face_box(width, height)),
        }
    }
}

fn face_box(width: usize, height: usize) -> Roi {
    let w = (width / 2).max(1);
    let h = (height / 2).max(1);
    Roi {
        x: (width - w) / 2,
        y: (height - h) / 2,
        width: w,
        height: h,
    }
}

/// Error-diffusing quantizer for one region and channel: the region's pixel
/// sum tracks the target so its mean stays within `1 / (255 * pixels)` of
/// each sample, and the running error never accumulates across frames.
#[derive(Debug, Clone, Copy, Default)]
struct RegionQuantizer {
    carry: f64,
}

impl RegionQuantizer {
    /// Returns `(base, extra)`: every pixel gets `base`, the first-spread
    /// `extra` pixels one more.
    fn quantize(&mut self, value: f64, pixels: usize) -> (u8, usize) {
        let target = value * 255.0 * pixels as f64 + self.carry;
        let total = target.round().clamp(0.0, 255.0 * pixels as f64);
        self.carry = (target - total).clamp(-1.0, 1.0);
        let total = total as usize;
        ((total / pixels) as u8, total % pixels)
    }
}

// Bresenham spread: pixel `i` of `pixels` gets the extra unit if true.
fn gets_extra(i: usize, extra: usize, pixels: usize) -> bool {
    (i + 1) * extra / pixels > i * extra / pixels
}

/// Writes `trace` as an `RPPGRAW1` video, dithered so the region means
/// reproduce the trace within 8-bit quantization.
pub fn render_video(
    out: &SynthOutput,
    width: usize,
    height: usize,
    layout: RenderLayout,
    path: &Path,
) -> Result<()> {
    if width * height == 0 {
        return Err(Error::InvalidParameter(
            "render size must be at least 1x1".into(),
        ));
    }
    let trace = &out.trace;
    let meta = VideoMeta {
        width,
        height,
        fps: trace.fps(),
        frames: trace.len(),
    };
    let face = match layout {
        RenderLayout::Uniform => Roi::full(width, height),
        RenderLayout::FaceBox => face_box(width, height),
    };
    let inside = |x: usize, y: usize| {
        x >= face.x && x < face.x + face.width && y >= face.y && y < face.y + face.height
    };
    let face_pixels = face.area();
    let bg_pixels = width * height - face_pixels;
    // background: a neutral surface lit by the same flicker
    let bg_base = [0.5, 0.5, 0.5];

    let mut face_q = [RegionQuantizer::default(); 3];
    let mut bg_q = [RegionQuantizer::default(); 3];
    write_atomic(path, |w| {
        let mut writer = RawVideoWriter::new(w, meta)?;
        let mut data = vec![0u8; width * height * 3];
        for f in 0..trace.len() {
            let face_val = [trace.red()[f], trace.green()[f], trace.blue()[f]];
            let face_levels: [(u8, usize); 3] =
                std::array::from_fn(|c| face_q[c].quantize(face_val[c], face_pixels));
            let bg_levels: [(u8, usize); 3] = std::array::from_fn(|c| {
                if bg_pixels == 0 {
                    (0, 0)
                } else {
                    bg_q[c].quantize(bg_base[c] * (1.0 + out.flicker[f]), bg_pixels)
                }
            });
            let (mut fi, mut bi) = (0usize, 0usize);
            for y in 0..height {
                for x in 0..width {
                    let p = (y * width + x) * 3;
                    let (levels, idx, count) = if inside(x, y) {
                        fi += 1;
                        (&face_levels, fi - 1, face_pixels)
                    } else {
                        bi += 1;
                        (&bg_levels, bi - 1, bg_pixels)
                    };
                    for c in 0..3 {
                        let (base, extra) = levels[c];
                        data[p + c] = base.saturating_add(gets_extra(idx, extra, count) as u8);
                    }
                }
            }
            writer.write_frame(&RgbFrame::new(width, height, data.clone())?)?;
        }
        writer.finish()?;
        Ok(())
    })
}

/// Files written for one synthetic recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthFiles {
    pub trace_path: PathBuf,
    pub ppg_path: PathBuf,
    pub video_path: Option<PathBuf>,
    pub spec_path: PathBuf,
    pub entry: ManifestEntry,
}

impl SynthFiles {
    pub fn paths(&self) -> Vec<&Path> {
        let mut v = vec![self.trace_path.as_path(), self.ppg_path.as_path()];
        if let Some(p) = &self.video_path {
            v.push(p);
        }
        v.push(&self.spec_path);
        v
    }
}

/// Options for [`write_recording`].
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingOptions {
    pub name: String,
    pub subject_id: String,
    pub illumination: Illumination,
    /// Render an `RPPGRAW1` video of this size; the manifest entry then
    /// points at the video instead of the trace CSV.
    pub render: Option<(usize, usize)>,
    pub layout: RenderLayout,
}

impl RecordingOptions {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        Self {
            subject_id: name.clone(),
            name,
            illumination: Illumination::Controlled,
            render: None,
            layout: RenderLayout::Uniform,
        }
    }
}

/// Writes `<name>.trace.csv`, `<name>.ppg.csv`, `<name>.spec.json` and
/// optionally `<name>.rppg` into `dir`, returning a manifest entry whose
/// paths are relative to `dir`.
pub fn write_recording(
    spec: &SynthSpec,
    dir: &Path,
    opts: &RecordingOptions,
) -> Result<SynthFiles> {
    let out = synth_trace(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rel = |suffix: &str| format!("{}.{suffix}", opts.name);
    let trace_path = dir.join(rel("trace.csv"));
    let ppg_path = dir.join(rel("ppg.csv"));
    let spec_path = dir.join(rel("spec.json"));
    write_trace_csv(&out.trace, &trace_path)?;
    write_ppg_csv(&out.ppg, &ppg_path)?;
    let spec_json = serde_json::to_string_pretty(spec)? + "\n";
    write_atomic(&spec_path, |w| {
        w.write_all(spec_json.as_bytes())
            .map_err(|e| Error::io(&spec_path, e))
    })?;

    let (video_path, roi, origin) = match opts.render {
        Some((width, height)) => {
            let path = dir.join(rel("rppg"));
            render_video(&out, width, height, opts.layout, &path)?;
            (Some(path), opts.layout.face_roi(width, height), rel("rppg"))
        }
        None => (None, RoiSelection::Full, rel("trace.csv")),
    };
    let entry = ManifestEntry {
        video_path: video_path.clone().unwrap_or_else(|| trace_path.clone()),
        ppg_path: ppg_path.clone(),
        subject_id: opts.subject_id.clone(),
        illumination: opts.illumination,
        roi,
        ppg_rate_hz: spec.ppg_rate_hz,
        fps_override: None,
        origin,
        ppg_origin: rel("ppg.csv"),
    };
    Ok(SynthFiles {
        trace_path,
        ppg_path,
        video_path,
        spec_path,
        entry,
    })
}

/// Writes several recordings plus `manifest.json` into `dir`.
pub fn write_dataset(
    dir: &Path,
    recordings: &[(SynthSpec, RecordingOptions)],
) -> Result<(PathBuf, Vec<SynthFiles>)> {
    let files = recordings
        .iter()
        .map(|(spec, opts)| write_recording(spec, dir, opts))
        .collect::<Result<Vec<_>>>()?;
    let manifest = DatasetManifest {
        entries: files.iter().map(|f| f.entry.clone()).collect(),
        split: None,
        generator: Some(GENERATOR_ID.into()),
    };
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok((path, files))
}

/// Convenience for callers that only need the raw writer.
pub fn render_to_file(
    spec: &SynthSpec,
    width: usize,
    height: usize,
    path: &Path,
) -> Result<SynthOutput> {
    let out = synth_trace(spec)?;
    render_video(&out, width, height, RenderLayout::Uniform, path)?;
    Ok(out)
}
